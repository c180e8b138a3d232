"""Feature-partitioned datasets: column blocks, response vector, ground truth.

The observation matrix A (M samples x P features) is split column-wise into
one block per agent; agent i holds A_i of shape M x P_i and estimates only
its slice of the global model. Synthetic data follows the linear model
b = A omega + psi with standard-normal A and omega and Gaussian noise psi.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FeaturePartition",
    "synthesize",
    "partition_columns",
    "load_matrix_csv",
    "save_matrix_csv",
    "save_partition",
    "load_partition",
]

_FMT = "%.17g"  # lossless float64 round-trip


@dataclass(frozen=True)
class FeaturePartition:
    """Column blocks of the observation matrix plus response and optional truth."""

    blocks: tuple
    response: np.ndarray
    truth: np.ndarray | None = None
    seed: int | None = None
    sizes: tuple = field(init=False)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("a partition needs at least one block")
        m = self.blocks[0].shape[0]
        for k, blk in enumerate(self.blocks):
            if blk.ndim != 2:
                raise ValueError(f"block {k + 1} is not a matrix")
            if blk.shape[0] != m:
                raise ValueError(
                    f"block {k + 1} has {blk.shape[0]} rows, expected {m}"
                )
            if blk.shape[1] < 1:
                raise ValueError(f"block {k + 1} has no columns")
        if self.response.shape != (m,):
            raise ValueError(
                f"response length {self.response.shape} does not match {m} samples"
            )
        object.__setattr__(self, "sizes", tuple(b.shape[1] for b in self.blocks))
        if self.truth is not None and self.truth.shape != (sum(self.sizes),):
            raise ValueError("truth length does not match the total feature count")

    @property
    def num_agents(self) -> int:
        return len(self.blocks)

    @property
    def num_samples(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def num_features(self) -> int:
        return sum(self.sizes)

    def matrix(self) -> np.ndarray:
        """Concatenate the blocks back into the full observation matrix."""
        return np.hstack(self.blocks)

    def truth_block(self, agent: int) -> np.ndarray:
        """Slice of the ground truth owned by ``agent`` (1-based id)."""
        if self.truth is None:
            raise ValueError("partition has no ground truth")
        start = sum(self.sizes[: agent - 1])
        return self.truth[start : start + self.sizes[agent - 1]]


def synthesize(
    num_agents: int,
    num_samples: int,
    sizes,
    noise_variance: float = 0.1,
    seed: int = 0,
) -> FeaturePartition:
    """Draw a synthetic feature-partitioned regression dataset.

    ``sizes`` is either one int (same block width everywhere) or a sequence
    of per-agent widths. Entries of A and the truth vector are iid standard
    normal; the response is b = A omega + psi with
    psi ~ N(0, noise_variance I). Deterministic for a fixed seed.
    """
    if num_agents < 1 or num_samples < 1:
        raise ValueError("num_agents and num_samples must be positive")
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    if np.isscalar(sizes):
        sizes = [int(sizes)] * num_agents
    sizes = [int(s) for s in sizes]
    if len(sizes) != num_agents or any(s < 1 for s in sizes):
        raise ValueError("sizes must give a positive width for every agent")
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((num_samples, total))
    omega = rng.standard_normal(total)
    psi = (
        np.sqrt(noise_variance) * rng.standard_normal(num_samples)
        if noise_variance > 0
        else np.zeros(num_samples)
    )
    b = a @ omega + psi
    return partition_columns(a, b, sizes, truth=omega, seed=seed)


def partition_columns(
    a: np.ndarray, b: np.ndarray, sizes, truth: np.ndarray | None = None,
    seed: int | None = None,
) -> FeaturePartition:
    """Split the columns of ``a`` into consecutive blocks of the given sizes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sizes = [int(s) for s in sizes]
    if a.ndim != 2:
        raise ValueError("observation matrix must be 2-d")
    if sum(sizes) != a.shape[1]:
        raise ValueError(
            f"block sizes sum to {sum(sizes)} but the matrix has {a.shape[1]} columns"
        )
    blocks = []
    start = 0
    for s in sizes:
        blocks.append(np.ascontiguousarray(a[:, start : start + s]))
        start += s
    return FeaturePartition(
        tuple(blocks),
        b,
        truth=None if truth is None else np.asarray(truth, dtype=float),
        seed=seed,
    )


def save_matrix_csv(mat: np.ndarray, path) -> None:
    """Write a matrix (or vector, as one column per line=row) as bare CSV."""
    np.savetxt(path, np.atleast_2d(np.asarray(mat, dtype=float)), fmt=_FMT, delimiter=",")


def load_matrix_csv(path) -> np.ndarray:
    """Read a bare CSV matrix; raises ValueError on empty or ragged input."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty input warns before we raise
            mat = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except Exception as exc:
        raise ValueError(f"{path}: cannot parse CSV matrix ({exc})") from exc
    if mat.size == 0:
        raise ValueError(f"{path}: empty matrix file")
    return mat


def save_partition(fp: FeaturePartition, directory) -> None:
    """Write blocks, response, optional truth, and metadata into a directory.

    Layout: block_001.csv .. block_NNN.csv, b.csv, truth.csv (if present),
    meta.txt with N, M, sizes, seed.
    """
    os.makedirs(directory, exist_ok=True)
    for k, blk in enumerate(fp.blocks, start=1):
        save_matrix_csv(blk, os.path.join(directory, f"block_{k:03d}.csv"))
    save_matrix_csv(fp.response.reshape(-1, 1), os.path.join(directory, "b.csv"))
    if fp.truth is not None:
        save_matrix_csv(fp.truth.reshape(-1, 1), os.path.join(directory, "truth.csv"))
    with open(os.path.join(directory, "meta.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"num_agents = {fp.num_agents}\n")
        fh.write(f"num_samples = {fp.num_samples}\n")
        fh.write(f"sizes = {','.join(str(s) for s in fp.sizes)}\n")
        fh.write(f"seed = {'' if fp.seed is None else fp.seed}\n")


def load_partition(directory) -> FeaturePartition:
    """Read a directory written by :func:`save_partition`."""
    meta_path = os.path.join(directory, "meta.txt")
    meta = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line in fh:
            key, sep, val = line.partition("=")
            if sep:
                meta[key.strip()] = val.strip()
    try:
        num_agents = int(meta["num_agents"])
        sizes = [int(s) for s in meta["sizes"].split(",")]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{meta_path}: malformed metadata ({exc})") from exc
    blocks = []
    for k in range(1, num_agents + 1):
        blk = load_matrix_csv(os.path.join(directory, f"block_{k:03d}.csv"))
        if blk.shape[1] != sizes[k - 1]:
            raise ValueError(
                f"block {k} has {blk.shape[1]} columns, metadata says {sizes[k - 1]}"
            )
        blocks.append(blk)
    b = load_matrix_csv(os.path.join(directory, "b.csv")).ravel()
    truth = None
    truth_path = os.path.join(directory, "truth.csv")
    if os.path.exists(truth_path):
        truth = load_matrix_csv(truth_path).ravel()
    seed = int(meta["seed"]) if meta.get("seed") else None
    return FeaturePartition(tuple(blocks), b, truth=truth, seed=seed)
