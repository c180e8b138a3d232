"""Synchronous round engine running the consensus protocol over a topology.

A round has three barrier-separated phases: local work (collate c, inner
BCD, dual refresh), neighbor exchange of the dual vectors, and the
disagreement-multiplier ascent. Agents inside a phase never read each
other's in-round writes, so advancing them sequentially or concurrently
gives identical results; metrics are reduced in fixed agent order.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import oracle as oracle_mod
from .agent import (
    AgentState,
    MuMessage,
    compute_c,
    dual_step,
    make_agent,
    primal_step,
    recover_estimate,
    write_messages,
)
from .data import FeaturePartition
from .functions import FunctionSpec
from .inner import BcdConfig, delta_value
from .topology import Topology

__all__ = [
    "RunConfig",
    "RoundRecord",
    "RunHistory",
    "run",
    "consensus_residual",
    "misalignment",
]

_CSV_HEADER = "round,misalignment,consensus_residual,mu_error,delta_k_mean"


@dataclass(frozen=True)
class RunConfig:
    """Outer-loop configuration: round budget, penalty, stopping tolerances."""

    max_rounds: int = 2000
    rho: float = 2.0
    bcd: BcdConfig = field(default_factory=BcdConfig)
    stop_consensus_tol: float = 1e-10
    stop_estimate_tol: float = 1e-8
    seed: int = 0
    record_per_agent: bool = False

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.stop_consensus_tol <= 0 or self.stop_estimate_tol <= 0:
            raise ValueError("stopping tolerances must be positive")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    misalignment: float
    consensus_residual: float
    mu_error: float
    delta_mean: float


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class RunHistory:
    """Per-round metrics plus final per-agent estimates and bookkeeping."""

    records: list = field(default_factory=list)
    final_estimates: list = field(default_factory=list)
    final_duals: list = field(default_factory=list)
    orientation: int = 1
    wall_clock: list = field(default_factory=list)
    converged: bool = False
    failed: bool = False
    per_agent: list | None = None

    @property
    def rounds_executed(self) -> int:
        return len(self.records)

    def estimate_vector(self) -> np.ndarray:
        return np.concatenate(self.final_estimates)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_CSV_HEADER + "\n")
            for rec in self.records:
                fh.write(
                    f"{rec.round},{_fmt(rec.misalignment)},"
                    f"{_fmt(rec.consensus_residual)},{_fmt(rec.mu_error)},"
                    f"{_fmt(rec.delta_mean)}\n"
                )

    def per_agent_to_csv(self, path) -> None:
        if self.per_agent is None:
            raise ValueError("run was not configured with record_per_agent")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("round,agent,estimate\n")
            for rnd, estimates in enumerate(self.per_agent, start=1):
                for agent_id, est in enumerate(estimates, start=1):
                    joined = ",".join(_fmt(x) for x in est)
                    fh.write(f"{rnd},{agent_id},{joined}\n")


def consensus_residual(mus, topo: Topology) -> float:
    """Sum over edges of ||mu_i - mu_j||^2; zero iff neighbors agree."""
    total = 0.0
    for i, j in topo.edges:
        diff = mus[i - 1] - mus[j - 1]
        total += float(diff @ diff)
    return total


def misalignment(x: np.ndarray, truth: np.ndarray) -> float:
    """Relative squared error ||x - truth||^2 / ||truth||^2."""
    truth = np.asarray(truth, dtype=float)
    denom = float(truth @ truth)
    if denom == 0.0:
        raise ValueError("misalignment is undefined for a zero truth vector")
    diff = np.asarray(x, dtype=float) - truth
    return float(diff @ diff) / denom


def run(
    fp: FeaturePartition,
    topo: Topology,
    f: FunctionSpec,
    r_list,
    cfg: RunConfig,
    oracle_solution=None,
    *,
    orientation: int | None = None,
    num_threads: int = 1,
    message_log=None,
) -> RunHistory:
    """Execute the protocol until the stopping rule or the round budget.

    ``oracle_solution`` (with ``mu_star`` filled) enables the per-round
    dual-error metric. ``orientation`` overrides the per-run sign
    calibration. ``message_log`` is an optional binary file object that
    receives every exchanged dual vector.
    """
    num_agents = fp.num_agents
    if topo.num_agents != num_agents:
        raise ValueError(
            f"topology has {topo.num_agents} agents, partition has {num_agents}"
        )
    if len(r_list) != num_agents:
        raise ValueError("one regularizer spec per agent is required")
    for i in range(1, num_agents + 1):
        if topo.degree(i) == 0:
            raise ValueError(
                f"invalid topology: agent {i} has no neighbors (degree >= 1 required)"
            )
    if not topo.is_connected():
        warnings.warn(
            "topology is not connected; agents will only agree within components",
            UserWarning,
            stacklevel=2,
        )
    if orientation is None:
        orientation = oracle_mod.calibrate_orientation(f, r_list[0], cfg.seed)

    m = fp.num_samples
    b = fp.response
    n = num_agents
    rho = cfg.rho
    mu_star = getattr(oracle_solution, "mu_star", None)
    mu_star_norm = float(np.linalg.norm(mu_star)) if mu_star is not None else 0.0

    agents = [
        make_agent(i, topo.neighbors(i), rho, m, fp.sizes[i - 1])
        for i in range(1, n + 1)
    ]

    history = RunHistory(orientation=orientation)
    if cfg.record_per_agent:
        history.per_agent = []

    pool = ThreadPoolExecutor(max_workers=num_threads) if num_threads > 1 else None

    def each(fn):
        if pool is None:
            for st in agents:
                fn(st)
        else:
            list(pool.map(fn, agents))

    def local_work(st: AgentState):
        compute_c(st, rho)
        primal_step(st, f, r_list[st.id - 1], fp.blocks[st.id - 1], b, n, cfg.bcd)

    def ascend(st: AgentState):
        dual_step(st, rho)

    recent: list[np.ndarray] = []
    try:
        for k in range(1, cfg.max_rounds + 1):
            tic = time.perf_counter()
            each(local_work)
            if message_log is not None:
                write_messages(
                    (MuMessage(st.id, k, st.mu) for st in agents), message_log
                )
            for st in agents:
                for j in st.neighbors:
                    agents[j - 1].neighbor_mu[st.id] = st.mu
            each(ascend)

            estimates = [recover_estimate(st, orientation) for st in agents]
            stacked = np.concatenate(estimates)
            mis = (
                misalignment(stacked, fp.truth) if fp.truth is not None else np.nan
            )
            resid = consensus_residual([st.mu for st in agents], topo)
            if mu_star is not None and mu_star_norm > 0:
                mu_err = float(
                    np.mean(
                        [np.linalg.norm(st.mu - mu_star) for st in agents]
                    )
                ) / mu_star_norm
            else:
                mu_err = np.nan
            delta_mean = float(
                np.mean(
                    [
                        delta_value(
                            f, r_list[st.id - 1], st.c, fp.blocks[st.id - 1],
                            b, n, st.rho_bar, st.bcd.theta, st.bcd.beta,
                        )
                        for st in agents
                    ]
                )
            )
            history.records.append(
                RoundRecord(k, mis, resid, mu_err, delta_mean)
            )
            history.wall_clock.append(time.perf_counter() - tic)
            if cfg.record_per_agent:
                history.per_agent.append(estimates)

            if not np.isfinite(resid) or not np.isfinite(stacked).all():
                history.failed = True
                break

            recent.append(stacked)
            if len(recent) > 11:
                recent.pop(0)
            if resid <= cfg.stop_consensus_tol * n * m and len(recent) == 11:
                change = np.linalg.norm(recent[-1] - recent[0])
                scale = max(float(np.linalg.norm(recent[-1])), 1e-300)
                if change / scale <= cfg.stop_estimate_tol:
                    history.converged = True
                    break
    finally:
        if pool is not None:
            pool.shutdown()

    history.final_estimates = [recover_estimate(st, orientation) for st in agents]
    history.final_duals = [st.mu.copy() for st in agents]
    return history
