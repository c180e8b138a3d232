"""Per-agent state and the outer protocol updates of one consensus round.

Each round an agent (1) collates its linear term c from last round's own
and neighbor duals, (2) solves its local subproblem by the inner BCD loop,
(3) maps the beta block to a fresh dual mu = beta / (2 rho_bar),
(4) exchanges mu with its neighbors, and (5) ascends its disagreement
multiplier v. Steps (1)-(3) touch only local state; the exchange is the
only cross-agent channel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .functions import FunctionSpec
from .inner import BcdConfig, BcdState, ThetaPrecomp, bcd_solve, theta_precompute

__all__ = [
    "AgentState",
    "MuMessage",
    "ProtocolDesyncError",
    "make_agent",
    "compute_c",
    "primal_step",
    "dual_step",
    "recover_estimate",
    "write_messages",
    "read_messages",
]


class ProtocolDesyncError(RuntimeError):
    """Raised when an agent is missing a neighbor value it needs."""


@dataclass
class AgentState:
    """Protocol variables owned by one agent.

    ``neighbor_mu`` holds the most recently exchanged neighbor duals,
    keyed by neighbor id. ``rho_bar`` equals rho times the agent degree.
    """

    id: int
    neighbors: tuple
    rho_bar: float
    mu: np.ndarray
    v: np.ndarray
    c: np.ndarray
    bcd: BcdState
    neighbor_mu: dict = field(default_factory=dict)
    precomp: ThetaPrecomp | None = None
    last_deltas: list = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(self.neighbors)


def make_agent(
    agent_id: int,
    neighbors,
    rho: float,
    num_samples: int,
    num_features: int,
) -> AgentState:
    """Fresh agent state with zero-initialized protocol variables."""
    neighbors = tuple(neighbors)
    if not neighbors:
        raise ValueError(f"agent {agent_id} has no neighbors")
    if rho <= 0:
        raise ValueError("rho must be positive")
    return AgentState(
        id=agent_id,
        neighbors=neighbors,
        rho_bar=rho * len(neighbors),
        mu=np.zeros(num_samples),
        v=np.zeros(num_samples),
        c=np.zeros(num_samples),
        bcd=BcdState.zeros(num_features, num_samples),
        neighbor_mu={j: np.zeros(num_samples) for j in neighbors},
    )


def _gather_neighbor_mu(state: AgentState) -> list:
    vals = []
    for j in state.neighbors:
        if j not in state.neighbor_mu:
            raise ProtocolDesyncError(
                f"agent {state.id} is missing the dual of neighbor {j}"
            )
        vals.append(state.neighbor_mu[j])
    return vals

def compute_c(state: AgentState, rho: float) -> np.ndarray:
    """Collate c = v - rho*|V_i|*mu - rho*sum_j mu_j from round-(k-1) values.

    Stores the result on the state and returns it.
    """
    neigh = _gather_neighbor_mu(state)
    c = state.v - rho * state.degree * state.mu - rho * np.sum(neigh, axis=0)
    state.c = c
    return c


def primal_step(
    state: AgentState,
    f: FunctionSpec,
    r: FunctionSpec,
    a_block: np.ndarray,
    b: np.ndarray,
    num_agents: int,
    cfg: BcdConfig,
) -> np.ndarray:
    """Run the warm-started BCD loop and refresh mu = beta / (2 rho_bar).

    Requires :func:`compute_c` to have run for this round. Stores the new
    mu and BCD state; the per-sweep dual-objective trace (when tracked)
    lands in ``state.last_deltas``.
    """
    if state.precomp is None:
        state.precomp = theta_precompute(f, r, a_block, num_agents)
    result = bcd_solve(
        f, r, a_block, state.c, b, num_agents, state.rho_bar,
        state.bcd, cfg, precomp=state.precomp,
    )
    state.bcd = result.state
    state.last_deltas = result.deltas
    state.mu = result.state.beta / (2.0 * state.rho_bar)
    return state.mu


def dual_step(state: AgentState, rho: float) -> np.ndarray:
    """Ascent on the disagreement multiplier: v += rho * sum_j (mu_i - mu_j).

    Requires ``neighbor_mu`` to hold the current round's exchanged values.
    """
    neigh = _gather_neighbor_mu(state)
    state.v = state.v + rho * (state.degree * state.mu - np.sum(neigh, axis=0))
    return state.v


def recover_estimate(state: AgentState, orientation: int) -> np.ndarray:
    """Local model estimate: orientation * theta."""
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    return orientation * state.bcd.theta


@dataclass(frozen=True)
class MuMessage:
    """One exchanged dual vector: sender id, round index, payload."""

    sender: int
    round: int
    payload: np.ndarray


_HEADER = struct.Struct("<qi")  # round (int64), sender (int32), little-endian


def write_messages(messages, fh) -> None:
    """Append binary round records: int64 round, int32 sender, M float64, LE."""
    for msg in messages:
        fh.write(_HEADER.pack(msg.round, msg.sender))
        fh.write(np.asarray(msg.payload, dtype="<f8").tobytes())


def read_messages(fh, num_samples: int):
    """Read back records written by :func:`write_messages`."""
    out = []
    payload_bytes = 8 * num_samples
    while True:
        head = fh.read(_HEADER.size)
        if not head:
            return out
        if len(head) != _HEADER.size:
            raise ValueError("truncated message header")
        rnd, sender = _HEADER.unpack(head)
        raw = fh.read(payload_bytes)
        if len(raw) != payload_bytes:
            raise ValueError("truncated message payload")
        out.append(
            MuMessage(sender=sender, round=rnd, payload=np.frombuffer(raw, dtype="<f8").copy())
        )
