"""Undirected agent communication graphs.

Agents are numbered 1..N. All generators return connected graphs in which
every agent has at least one neighbor; :class:`Topology` instances are
immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

__all__ = [
    "Topology",
    "make_line",
    "make_ring",
    "make_star",
    "make_complete",
    "make_random_connected",
    "save_topology",
    "load_topology",
]


@dataclass(frozen=True)
class Topology:
    """Undirected communication graph over agents 1..num_agents.

    ``edges`` is a sorted tuple of (i, j) pairs with i < j; the adjacency
    lists are derived from it at construction.
    """

    num_agents: int
    edges: tuple
    adjacency: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("a topology needs at least one agent")
        seen = set()
        adjacency = {i: [] for i in range(1, self.num_agents + 1)}
        for edge in self.edges:
            i, j = edge
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (1 <= i <= self.num_agents and 1 <= j <= self.num_agents):
                raise ValueError(f"edge {edge} references an unknown agent")
            if i > j:
                raise ValueError(f"edge {edge} must be ordered (i < j)")
            if edge in seen:
                raise ValueError(f"duplicate edge {edge}")
            seen.add(edge)
            adjacency[i].append(j)
            adjacency[j].append(i)
        object.__setattr__(
            self,
            "adjacency",
            {i: tuple(sorted(neigh)) for i, neigh in adjacency.items()},
        )
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    def neighbors(self, agent: int) -> tuple:
        """Neighbor ids of ``agent`` (never includes the agent itself)."""
        if agent not in self.adjacency:
            raise KeyError(f"unknown agent id {agent}")
        return self.adjacency[agent]

    def degree(self, agent: int) -> int:
        return len(self.neighbors(agent))

    def is_connected(self) -> bool:
        """True if every agent can reach every other agent."""
        return nx.is_connected(self._graph())

    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / self.num_agents

    def _graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(1, self.num_agents + 1))
        g.add_edges_from(self.edges)
        return g


def make_line(num_agents: int) -> Topology:
    """Agents connected one after the other: 1-2-3-...-N."""
    if num_agents < 2:
        raise ValueError("a line topology needs at least 2 agents")
    return Topology(num_agents, tuple((i, i + 1) for i in range(1, num_agents)))


def make_ring(num_agents: int) -> Topology:
    """Cycle over all agents; every agent has exactly two neighbors."""
    if num_agents < 3:
        raise ValueError("a ring topology needs at least 3 agents")
    edges = [(i, i + 1) for i in range(1, num_agents)]
    edges.append((1, num_agents))
    return Topology(num_agents, tuple(edges))


def make_star(num_agents: int) -> Topology:
    """Agent 1 is the hub; all other agents are leaves."""
    if num_agents < 2:
        raise ValueError("a star topology needs at least 2 agents")
    return Topology(num_agents, tuple((1, i) for i in range(2, num_agents + 1)))


def make_complete(num_agents: int) -> Topology:
    """Every agent connected to every other agent."""
    if num_agents < 2:
        raise ValueError("a complete topology needs at least 2 agents")
    edges = tuple(
        (i, j)
        for i in range(1, num_agents + 1)
        for j in range(i + 1, num_agents + 1)
    )
    return Topology(num_agents, edges)


def make_random_connected(
    num_agents: int, avg_degree: float, seed: int, max_attempts: int = 100
) -> Topology:
    """Connected random graph with mean degree close to ``avg_degree``.

    Samples round(N * avg_degree / 2) distinct edges uniformly; if the
    result is disconnected, edges joining distinct components are added and
    the same number of randomly chosen non-bridge edges are removed to
    restore the count. Deterministic for a fixed seed.
    """
    if num_agents < 2:
        raise ValueError("a random topology needs at least 2 agents")
    if not (1.0 <= avg_degree <= num_agents - 1):
        raise ValueError(
            f"avg_degree {avg_degree} outside the feasible range "
            f"[1, {num_agents - 1}]"
        )
    target = int(round(num_agents * avg_degree / 2.0))
    max_edges = num_agents * (num_agents - 1) // 2
    if target < num_agents - 1:
        raise ValueError(
            f"average degree {avg_degree} is infeasible: {target} edges cannot "
            f"connect {num_agents} agents"
        )
    target = min(target, max_edges)
    all_edges = [
        (i, j)
        for i in range(1, num_agents + 1)
        for j in range(i + 1, num_agents + 1)
    ]
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        idx = rng.choice(max_edges, size=target, replace=False)
        g = nx.Graph()
        g.add_nodes_from(range(1, num_agents + 1))
        g.add_edges_from(all_edges[k] for k in sorted(idx))
        added = 0
        while not nx.is_connected(g):
            comps = [sorted(c) for c in nx.connected_components(g)]
            comps.sort()
            a = comps[0][int(rng.integers(len(comps[0])))]
            b = comps[1][int(rng.integers(len(comps[1])))]
            g.add_edge(min(a, b), max(a, b))
            added += 1
        while added > 0:
            bridges = set(nx.bridges(g))
            removable = sorted(
                e for e in g.edges if e not in bridges and (e[1], e[0]) not in bridges
            )
            if not removable:
                break
            drop = removable[int(rng.integers(len(removable)))]
            g.remove_edge(*drop)
            added -= 1
        if added == 0 and nx.is_connected(g):
            edges = tuple(sorted((min(i, j), max(i, j)) for i, j in g.edges))
            return Topology(num_agents, edges)
    raise RuntimeError(
        f"could not build a connected graph with avg_degree={avg_degree} "
        f"after {max_attempts} attempts"
    )


def save_topology(topo: Topology, path) -> None:
    """Write the edge-list text format: first line N, then one 'i j' per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{topo.num_agents}\n")
        for i, j in topo.edges:
            fh.write(f"{i} {j}\n")


def load_topology(path) -> Topology:
    """Read the edge-list text format written by :func:`save_topology`."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty topology file")
    try:
        num_agents = int(lines[0])
    except ValueError:
        raise ValueError(f"{path}: first line must be the agent count") from None
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((min(i, j), max(i, j)))
    return Topology(num_agents, tuple(edges))
