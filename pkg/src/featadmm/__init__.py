"""featadmm: consensus ADMM for learning with feature-partitioned data.

Agents each hold a column block of the observation matrix and agree on a
shared dual vector over an arbitrary connected communication graph. Each
agent's subproblem is solved through its own dual by block coordinate
descent, so the method needs only prox and subgradient evaluations of the
original loss and regularizers; conjugate functions are never computed,
which keeps non-smooth objectives (lasso, elastic net, absolute loss) in
reach.
"""

from .backend import BACKEND
from .data import FeaturePartition, load_partition, partition_columns, save_partition, synthesize
from .functions import (
    FunctionSpec,
    NonSmoothPointError,
    abs_l1_loss,
    elastic_net,
    format_function,
    gradient,
    l1_reg,
    l2_reg,
    parse_function,
    prox,
    squared_l2_loss,
    subgradient,
    value,
)
from .inner import BcdConfig, BcdState, bcd_solve, beta_update, delta_value, theta_update
from .oracle import (
    CalibrationError,
    OracleSolution,
    UnsupportedProblemError,
    calibrate_orientation,
    dual_optimum,
    solve_centralized,
)
from .simulator import RunConfig, RunHistory, consensus_residual, misalignment, run
from .topology import (
    Topology,
    load_topology,
    make_complete,
    make_line,
    make_random_connected,
    make_ring,
    make_star,
    save_topology,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # data
    "FeaturePartition",
    "synthesize",
    "partition_columns",
    "save_partition",
    "load_partition",
    # functions
    "FunctionSpec",
    "NonSmoothPointError",
    "squared_l2_loss",
    "abs_l1_loss",
    "l2_reg",
    "l1_reg",
    "elastic_net",
    "parse_function",
    "format_function",
    "value",
    "gradient",
    "subgradient",
    "prox",
    # inner
    "BcdConfig",
    "BcdState",
    "beta_update",
    "theta_update",
    "delta_value",
    "bcd_solve",
    # oracle
    "OracleSolution",
    "CalibrationError",
    "UnsupportedProblemError",
    "solve_centralized",
    "dual_optimum",
    "calibrate_orientation",
    # simulator
    "RunConfig",
    "RunHistory",
    "run",
    "consensus_residual",
    "misalignment",
    # topology
    "Topology",
    "make_line",
    "make_ring",
    "make_star",
    "make_complete",
    "make_random_connected",
    "save_topology",
    "load_topology",
]
