"""Per-agent inner solver: block coordinate descent on the subproblem's dual.

Each outer round, every agent must minimize a coupled objective in its dual
variable. Rather than evaluating conjugate functions, the minimization is
carried out on the dual of that subproblem, whose objective

    delta(theta, beta) = -r(-theta) - ||beta||^2 / (4 rho_bar)
                         - N * f(-c - A theta - b/N - beta)

is maximized by alternating exact/approximate minimization over the theta
and beta blocks:

* the beta block has the closed-form solution beta = q - prox(f, 2 rho_bar N, q)
  with q = -c - A theta - b/N (a single prox call on f);
* the theta block is a composite problem in the original regularizer r,
  solved by proximal gradient when f is smooth and by diminishing-step
  subgradient descent otherwise.

Only prox, gradient, and subgradient evaluations of f and r ever occur.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import backend
from .functions import FunctionSpec, prox, subgradient, value

__all__ = [
    "BcdState",
    "BcdConfig",
    "ThetaPrecomp",
    "ThetaResult",
    "BcdResult",
    "largest_eigenvalue",
    "theta_precompute",
    "beta_update",
    "theta_update",
    "delta_value",
    "bcd_solve",
]


@dataclass
class BcdState:
    """Warm-started variables of the inner solver.

    ``theta`` has the agent's local feature dimension, ``beta`` the sample
    dimension. ``subgrad_t`` counts subgradient iterations consumed so far
    so the diminishing step schedule continues across outer rounds.
    """

    theta: np.ndarray
    beta: np.ndarray
    subgrad_t: int = 0

    @classmethod
    def zeros(cls, num_features: int, num_samples: int) -> "BcdState":
        return cls(np.zeros(num_features), np.zeros(num_samples))


@dataclass(frozen=True)
class BcdConfig:
    """Inner-solver configuration.

    Parameters
    ----------
    sweeps : int
        Number of alternating theta/beta sweeps per outer round.
    theta_budget : int
        Iteration cap for one theta subproblem solve.
    theta_tolerance : float
        Relative step-norm stopping tolerance of the theta solver.
    step_rule : str
        ``fixed-lipschitz`` (proximal gradient, smooth loss only) or
        ``diminishing-subgradient``. A non-smooth loss always uses the
        subgradient rule regardless of this setting.
    subgradient_scale : float
        Step length at subgradient iteration t is
        ``subgradient_scale / sqrt(t)`` (normalized direction).
    track_delta : bool
        Record the dual objective after every half-step in
        :func:`bcd_solve` (costs one extra f evaluation per half-step).
    """

    sweeps: int = 2
    theta_budget: int = 200
    theta_tolerance: float = 1e-8
    step_rule: str = "fixed-lipschitz"
    subgradient_scale: float = 1.0
    track_delta: bool = False

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.theta_budget < 1:
            raise ValueError("theta_budget must be >= 1")
        if self.theta_tolerance <= 0:
            raise ValueError("theta_tolerance must be positive")
        if self.step_rule not in ("fixed-lipschitz", "diminishing-subgradient"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


class ThetaResult(NamedTuple):
    theta: np.ndarray
    iterations: int
    converged: bool


class BcdResult(NamedTuple):
    state: BcdState
    deltas: list  # dual objective after each half-step (when tracked)


@dataclass
class ThetaPrecomp:
    """Per-agent quantities reused across theta solves (Gram matrix and step)."""

    gram: np.ndarray
    lipschitz: float
    smooth_path: bool


def largest_eigenvalue(sym: np.ndarray, iters: int = 1000, tol: float = 1e-12) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    n = sym.shape[0]
    if n == 1:
        return float(sym[0, 0])
    vec = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        nxt = sym @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        nxt /= norm
        new_lam = float(nxt @ (sym @ nxt))
        if abs(new_lam - lam) <= tol * max(abs(new_lam), 1.0):
            return new_lam
        lam, vec = new_lam, nxt
    return lam


def theta_precompute(
    f: FunctionSpec, r: FunctionSpec, a_block: np.ndarray, num_agents: int
) -> ThetaPrecomp:
    """Build the Gram matrix and Lipschitz constant for an agent's theta solves."""
    smooth_path = f.smooth
    gram = a_block.T @ a_block
    lip = 0.0
    if smooth_path:
        # smooth part is N * f(q' + A phi) + l2-part of r; f smooth means
        # f = squared-l2 here, with curvature 2 per unit weight
        lip = 2.0 * num_agents * f.l2_weight * largest_eigenvalue(gram) * 1.02
        lip += 2.0 * r.l2_weight
    return ThetaPrecomp(gram=gram, lipschitz=lip, smooth_path=smooth_path)


def beta_update(
    f: FunctionSpec, q: np.ndarray, rho_bar: float, num_agents: int
) -> np.ndarray:
    """Exact minimizer of ||beta||^2/(4 rho_bar) + N f(q - beta) over beta.

    Computed through the prox identity beta = q - prox(f, 2 rho_bar N, q).
    """
    if rho_bar <= 0:
        raise ValueError("rho_bar must be positive")
    q = np.asarray(q, dtype=float)
    return q - prox(f, 2.0 * rho_bar * num_agents, q)


def theta_update(
    f: FunctionSpec,
    r: FunctionSpec,
    a_block: np.ndarray,
    q_prime: np.ndarray,
    num_agents: int,
    init: np.ndarray,
    cfg: BcdConfig,
    precomp: ThetaPrecomp | None = None,
    subgrad_t0: int = 0,
) -> ThetaResult:
    """Approximately minimize r(-theta) + N f(q_prime - A theta) over theta.

    Works on the substituted variable phi = -theta, minimizing
    r(phi) + N f(q_prime + A phi), and negates the result. Exhausting the
    iteration budget is not an error; the best iterate is returned with
    ``converged=False``.
    """
    if precomp is None:
        precomp = theta_precompute(f, r, a_block, num_agents)
    phi0 = -np.asarray(init, dtype=float)
    q_prime = np.ascontiguousarray(q_prime, dtype=float)
    use_subgrad = (not f.smooth) or cfg.step_rule == "diminishing-subgradient"
    if use_subgrad:
        if f.l1_weight and not f.l2_weight:
            # pure-l1 loss: the compiled kernel covers this form
            phi, iters = backend.subgrad_composite(
                np.ascontiguousarray(a_block, dtype=float),
                q_prime,
                num_agents * f.l1_weight,
                r.l1_weight,
                r.l2_weight,
                phi0,
                cfg.subgradient_scale,
                cfg.theta_budget,
                subgrad_t0,
            )
        else:
            # smooth loss under the forced rule, or a loss mixing terms
            phi, iters = _subgrad_general(
                f, r, a_block, q_prime, num_agents, phi0, cfg, subgrad_t0
            )
        return ThetaResult(-phi, iters, False)
    if precomp.lipschitz <= 1e-300:
        # zero observation block and no quadratic regularizer curvature:
        # the objective reduces to the l1 term alone, minimized at zero
        return ThetaResult(np.zeros_like(phi0), 0, True)
    lin = a_block.T @ q_prime
    phi, iters, converged = backend.ista_quadratic(
        np.ascontiguousarray(precomp.gram, dtype=float),
        np.ascontiguousarray(lin, dtype=float),
        num_agents * f.l2_weight,
        r.l1_weight,
        r.l2_weight,
        phi0,
        1.0 / precomp.lipschitz,
        cfg.theta_budget,
        cfg.theta_tolerance,
    )
    return ThetaResult(-phi, iters, converged)


def _subgrad_general(f, r, a_block, q_prime, num_agents, phi0, cfg, t0):
    # diminishing-step subgradient descent on N f(q' + A phi) + r(phi) for
    # loss kinds the compiled kernel does not cover (smooth or mixed-term f)
    phi = phi0.copy()
    best = phi.copy()
    best_obj = np.inf
    iterations = 0
    for it in range(1, cfg.theta_budget + 1):
        iterations = it
        res = q_prime + a_block @ phi
        obj = num_agents * value(f, res) + value(r, phi)
        if obj < best_obj:
            best_obj, best = obj, phi.copy()
        g = num_agents * (a_block.T @ subgradient(f, res))
        g += 2.0 * r.l2_weight * phi + r.l1_weight * np.sign(phi)
        gnorm = np.linalg.norm(g)
        if gnorm <= 1e-300:
            best = phi
            break
        phi = phi - (cfg.subgradient_scale / np.sqrt(t0 + it) / gnorm) * g
    else:
        res = q_prime + a_block @ phi
        obj = num_agents * value(f, res) + value(r, phi)
        if obj < best_obj:
            best = phi
    return best, iterations


def delta_value(
    f: FunctionSpec,
    r: FunctionSpec,
    c_prev: np.ndarray,
    a_block: np.ndarray,
    b: np.ndarray,
    num_agents: int,
    rho_bar: float,
    theta: np.ndarray,
    beta: np.ndarray,
) -> float:
    """Dual objective of the agent subproblem at (theta, beta)."""
    u = -c_prev - a_block @ theta - b / num_agents - beta
    return (
        -value(r, -np.asarray(theta, dtype=float))
        - float(beta @ beta) / (4.0 * rho_bar)
        - num_agents * value(f, u)
    )


def bcd_solve(
    f: FunctionSpec,
    r: FunctionSpec,
    a_block: np.ndarray,
    c_prev: np.ndarray,
    b: np.ndarray,
    num_agents: int,
    rho_bar: float,
    warm: BcdState,
    cfg: BcdConfig,
    precomp: ThetaPrecomp | None = None,
) -> BcdResult:
    """Run ``cfg.sweeps`` alternating theta/beta block updates, warm-started.

    Returns the final state plus the dual-objective trace (initial value and
    one entry per half-step) when ``cfg.track_delta`` is set.
    """
    theta = np.asarray(warm.theta, dtype=float)
    beta = np.asarray(warm.beta, dtype=float)
    subgrad_t = warm.subgrad_t
    base = -np.asarray(c_prev, dtype=float) - np.asarray(b, dtype=float) / num_agents
    deltas: list[float] = []

    def record():
        deltas.append(
            delta_value(f, r, c_prev, a_block, b, num_agents, rho_bar, theta, beta)
        )

    if cfg.track_delta:
        record()
    use_subgrad = (not f.smooth) or cfg.step_rule == "diminishing-subgradient"
    for _ in range(cfg.sweeps):
        q_prime = base - beta
        res = theta_update(
            f, r, a_block, q_prime, num_agents, theta, cfg,
            precomp=precomp, subgrad_t0=subgrad_t,
        )
        theta = res.theta
        if use_subgrad:
            subgrad_t += res.iterations
        if cfg.track_delta:
            record()
        beta = beta_update(f, base - a_block @ theta, rho_bar, num_agents)
        if cfg.track_delta:
            record()
    return BcdResult(BcdState(theta, beta, subgrad_t), deltas)
