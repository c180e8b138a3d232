"""Command-line interface: dataset synthesis, experiment runs, oracle solves,
and preset experiment suites emitting CSV convergence curves.

Config files are flat ``key = value`` text (UTF-8, ``#`` comments). Every
key has a default except ``out``. Command-line flags override config
values. Each run directory receives a ``manifest.txt`` with all effective
parameters; re-running from a manifest reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import oracle as oracle_mod
from .backend import BACKEND
from .data import FeaturePartition, load_partition, save_partition, synthesize
from .functions import parse_function
from .inner import BcdConfig
from .simulator import RunConfig, RunHistory, misalignment, run
from .topology import (
    load_topology,
    make_complete,
    make_line,
    make_random_connected,
    make_ring,
    make_star,
)

__all__ = ["main", "ExperimentConfig", "ConfigError", "parse_config"]

TRIAL_TOPOLOGY_OFFSET = 10**6


class ConfigError(ValueError):
    """Config file problem, with the offending line number when known."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (one manifest's worth)."""

    data: str = "synth"
    n: int = 10
    m: int = 500
    pi: int = 2
    sizes: str = ""
    noise: float = 0.1
    seed: int = 1
    topology: str = "random"
    avg_degree: float = 3.0
    f: str = "squared_l2_loss"
    r: str = "elastic_net:eta1=1,eta2=1"
    r_list: str = ""
    rho: float = 2.0
    max_rounds: int = 2000
    stop_consensus_tol: float = 1e-10
    stop_estimate_tol: float = 1e-8
    bcd_sweeps: int = 2
    theta_budget: int = 200
    theta_tolerance: float = 1e-8
    step_rule: str = "fixed-lipschitz"
    subgradient_scale: float = 1.0
    record_per_agent: bool = False
    trials: int = 1
    out: str = ""

    def block_sizes(self) -> list:
        if self.sizes:
            return [int(s) for s in self.sizes.split(",")]
        return [self.pi] * self.n

    def loss(self):
        return parse_function(self.f)

    def regularizers(self) -> list:
        if self.r_list:
            specs = [parse_function(s) for s in self.r_list.split(";")]
            if len(specs) != self.n:
                raise ConfigError(
                    f"r_list has {len(specs)} entries for {self.n} agents"
                )
            return specs
        return [parse_function(self.r)] * self.n

    def run_config(self) -> RunConfig:
        return RunConfig(
            max_rounds=self.max_rounds,
            rho=self.rho,
            bcd=BcdConfig(
                sweeps=self.bcd_sweeps,
                theta_budget=self.theta_budget,
                theta_tolerance=self.theta_tolerance,
                step_rule=self.step_rule,
                subgradient_scale=self.subgradient_scale,
            ),
            stop_consensus_tol=self.stop_consensus_tol,
            stop_estimate_tol=self.stop_estimate_tol,
            seed=self.seed,
            record_per_agent=self.record_per_agent,
        )

    def dataset(self, trial: int) -> FeaturePartition:
        if self.data == "synth":
            return synthesize(
                self.n, self.m, self.block_sizes(), self.noise, self.seed + trial
            )
        fp = load_partition(self.data)
        if fp.num_agents != self.n:
            raise ConfigError(
                f"partition directory holds {fp.num_agents} blocks, config says {self.n}"
            )
        return fp

    def make_topology(self, trial: int):
        kind = self.topology
        if kind == "random":
            return make_random_connected(
                self.n, self.avg_degree, self.seed + TRIAL_TOPOLOGY_OFFSET + trial
            )
        if kind == "line":
            return make_line(self.n)
        if kind == "ring":
            return make_ring(self.n)
        if kind == "star":
            return make_star(self.n)
        if kind == "complete":
            return make_complete(self.n)
        if kind.startswith("file:"):
            return load_topology(kind[5:])
        raise ConfigError(f"unknown topology {kind!r}")

    def manifest_text(self) -> str:
        lines = []
        for fld in fields(self):
            val = getattr(self, fld.name)
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{fld.name} = {val}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {fld.name: fld.type for fld in fields(ExperimentConfig)}


def _coerce(key: str, raw: str, lineno: int | None):
    where = f"line {lineno}: " if lineno is not None else ""
    typ = _FIELD_TYPES.get(key)
    if typ is None:
        raise ConfigError(f"{where}unknown config key {key!r}")
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}bad value for {key!r}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    """Parse a flat key=value config file into an ExperimentConfig."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, sep, raw = text.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line.rstrip()!r}")
            key = key.strip()
            values[key] = _coerce(key, raw, lineno)
    return ExperimentConfig(**values)


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class TrialOutcome:
    history: RunHistory
    final_misalignment: float
    oracle_misalignment: float


def _solve_oracle(cfg: ExperimentConfig, fp: FeaturePartition):
    f = cfg.loss()
    r_specs = cfg.regularizers()
    try:
        sol = oracle_mod.solve_centralized(
            fp.matrix(), fp.response, f, r_specs, fp.sizes
        )
    except oracle_mod.UnsupportedProblemError:
        return None
    if f.smooth:
        oracle_mod.dual_optimum(sol, fp.matrix(), fp.response, f)
    return sol


def _run_trial(cfg: ExperimentConfig, trial: int) -> TrialOutcome:
    fp = cfg.dataset(trial)
    topo = cfg.make_topology(trial)
    sol = _solve_oracle(cfg, fp)
    history = run(fp, topo, cfg.loss(), cfg.regularizers(), cfg.run_config(), sol)
    final_mis = history.records[-1].misalignment if history.records else np.nan
    oracle_mis = (
        misalignment(sol.x_star, fp.truth)
        if sol is not None and fp.truth is not None
        else np.nan
    )
    return TrialOutcome(history, final_mis, oracle_mis)


def _average_records(outcomes) -> list:
    """Trial-mean of each metric per round, carrying final values forward."""
    depth = max(o.history.rounds_executed for o in outcomes)
    rows = []
    for k in range(depth):
        cols = [[], [], [], []]
        for o in outcomes:
            recs = o.history.records
            rec = recs[min(k, len(recs) - 1)]
            cols[0].append(rec.misalignment)
            cols[1].append(rec.consensus_residual)
            cols[2].append(rec.mu_error)
            cols[3].append(rec.delta_mean)
        rows.append((k + 1, *(float(np.mean(c)) for c in cols)))
    return rows


def _execute_experiment(cfg: ExperimentConfig, out_dir: str) -> bool:
    """Run all trials of one experiment; returns True if every trial was clean."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.manifest_text())

    max_workers = int(os.environ.get("FEATADMM_THREADS", "1") or "1")
    trials = list(range(cfg.trials))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(lambda j: _run_trial(cfg, j), trials))
    else:
        outcomes = [_run_trial(cfg, j) for j in trials]

    for j, outcome in enumerate(outcomes):
        outcome.history.to_csv(os.path.join(out_dir, f"trial_{j + 1:03d}.csv"))
        if cfg.record_per_agent:
            outcome.history.per_agent_to_csv(
                os.path.join(out_dir, f"trial_{j + 1:03d}_agents.csv")
            )

    with open(os.path.join(out_dir, "average.csv"), "w", encoding="utf-8") as fh:
        fh.write("round,misalignment,consensus_residual,mu_error,delta_k_mean\n")
        for row in _average_records(outcomes):
            fh.write(",".join([str(row[0])] + [_fmt(v) for v in row[1:]]) + "\n")

    ok = all(not o.history.failed for o in outcomes)
    converged = sum(1 for o in outcomes if o.history.converged)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"trials = {cfg.trials}\n")
        fh.write(f"converged_trials = {converged}\n")
        fh.write(
            f"mean_final_misalignment = "
            f"{_fmt(np.mean([o.final_misalignment for o in outcomes]))}\n"
        )
        fh.write(
            f"mean_oracle_misalignment = "
            f"{_fmt(np.mean([o.oracle_misalignment for o in outcomes]))}\n"
        )
        fh.write(f"orientation = {outcomes[0].history.orientation}\n")
        fh.write(f"backend = {BACKEND}\n")
    print(
        f"{out_dir}: {cfg.trials} trial(s), {converged} converged, "
        f"mean final misalignment "
        f"{np.mean([o.final_misalignment for o in outcomes]):.6g}"
    )
    return ok


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    for flag, key in (
        ("out", "out"),
        ("seed", "seed"),
        ("trials", "trials"),
        ("max_rounds", "max_rounds"),
        ("rho", "rho"),
        ("bcd_sweeps", "bcd_sweeps"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            updates[key] = val
    return replace(cfg, **updates) if updates else cfg


def cmd_synth(args) -> int:
    sizes = (
        [int(s) for s in args.sizes.split(",")] if args.sizes else [args.pi] * args.n
    )
    fp = synthesize(args.n, args.m, sizes, args.noise, args.seed)
    save_partition(fp, args.out)
    print(
        f"wrote {fp.num_agents} blocks of {fp.num_samples}x"
        f"{'/'.join(str(s) for s in fp.sizes)} to {args.out}"
    )
    return 0


def cmd_run(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    if not cfg.out:
        raise ConfigError("no output directory: set 'out' in the config or pass --out")
    ok = _execute_experiment(cfg, cfg.out)
    return 0 if ok else 1


def cmd_oracle(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    if not cfg.out:
        raise ConfigError("no output directory: set 'out' in the config or pass --out")
    fp = cfg.dataset(0)
    sol = _solve_oracle(cfg, fp)
    if sol is None:
        print("unsupported loss/regularizer combination for the oracle", file=sys.stderr)
        return 1
    oracle_mod.save_solution(sol, cfg.out)
    print(
        f"objective {sol.objective_value:.12g} via {sol.method} "
        f"({sol.iterations_used} iterations)"
    )
    return 0 if sol.converged else 1


_ELASTIC = {"f": "squared_l2_loss", "r": "elastic_net:eta1=1,eta2=1", "rho": 2.0}
_RIDGE = {"f": "squared_l2_loss", "r": "l2_reg:eta=0.001", "rho": 2.0}
_LASSO = {"f": "squared_l2_loss", "r": "l1_reg:eta=0.001", "rho": 2.0, "max_rounds": 5000}

_REGRESSION_SCENARIOS = (
    ("n10_m50_pi2", {"n": 10, "m": 50, "pi": 2}),
    ("n10_m200_pi2", {"n": 10, "m": 200, "pi": 2}),
    ("n20_m200_pi2", {"n": 20, "m": 200, "pi": 2}),
    ("n10_m200_pi10", {"n": 10, "m": 200, "pi": 10}),
)

PRESETS = {
    "elastic-net-pi": [
        (f"pi{pi}_m{m}", {**_ELASTIC, "n": 10, "pi": pi, "m": m})
        for pi, m in ((2, 800), (10, 1000), (20, 1100), (50, 1500))
    ],
    "elastic-net-m": [
        (f"m{m}", {**_ELASTIC, "n": 10, "pi": 2, "m": m})
        for m in (100, 500, 1000)
    ],
    "elastic-net-n": [
        (f"n{n}", {**_ELASTIC, "n": n, "pi": 2, "m": 500})
        for n in (5, 10, 20)
    ],
    "elastic-net-topo": [
        (kind, {**_ELASTIC, "n": 10, "pi": 2, "m": 500, "topology": kind})
        for kind in ("line", "ring", "star", "complete")
    ],
    "ridge": [(name, {**_RIDGE, **params}) for name, params in _REGRESSION_SCENARIOS],
    "lasso": [(name, {**_LASSO, **params}) for name, params in _REGRESSION_SCENARIOS],
}


def cmd_reproduce(args) -> int:
    if args.preset not in PRESETS:
        print(
            f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}",
            file=sys.stderr,
        )
        return 2
    status = 0
    for name, params in PRESETS[args.preset]:
        cfg = _apply_overrides(
            replace(ExperimentConfig(trials=10), **params), args
        )
        out_dir = os.path.join(args.out, args.preset, name)
        cfg = replace(cfg, out=out_dir)
        if not _execute_experiment(cfg, out_dir):
            status = 1
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featadmm",
        description=(
            "Consensus ADMM for feature-partitioned learning; synthesize "
            "datasets, run multi-agent experiments, solve centralized "
            "baselines, and reproduce the preset experiment suites."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic partition directory")
    p_synth.add_argument("--n", type=int, default=10, help="number of agents")
    p_synth.add_argument("--m", type=int, default=500, help="number of samples")
    p_synth.add_argument("--pi", type=int, default=2, help="features per agent")
    p_synth.add_argument("--sizes", default="", help="comma list of per-agent widths")
    p_synth.add_argument("--noise", type=float, default=0.1, help="noise variance")
    p_synth.add_argument("--seed", type=int, default=1)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key=value config file")
    common.add_argument("--out", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--max-rounds", dest="max_rounds", type=int, default=None)
    common.add_argument("--rho", type=float, default=None)
    common.add_argument("--bcd-sweeps", dest="bcd_sweeps", type=int, default=None)

    p_run = sub.add_parser("run", parents=[common], help="run an experiment")
    p_run.set_defaults(func=cmd_run)

    p_oracle = sub.add_parser(
        "oracle", parents=[common], help="solve the centralized problem"
    )
    p_oracle.set_defaults(func=cmd_oracle)

    p_rep = sub.add_parser("reproduce", help="run a preset experiment suite")
    p_rep.add_argument("preset", help=" | ".join(sorted(PRESETS)))
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.add_argument("--trials", type=int, default=None)
    p_rep.add_argument("--max-rounds", dest="max_rounds", type=int, default=None)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
