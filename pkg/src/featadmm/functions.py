"""Loss and regularizer descriptors with value, (sub)gradient, and prox capabilities.

Every supported function is convex, proper, and lower semi-continuous, and
has a closed-form proximal operator. This is the machinery that lets the
rest of the library work with non-smooth objectives through prox and
subgradient calls only, never through conjugate functions.

Supported kinds
---------------
``squared_l2_loss``
    e -> ||e||^2 (note: no 1/2 factor).
``abs_l1_loss``
    e -> ||e||_1.
``l2_reg``
    x -> eta * ||x||^2.
``l1_reg``
    x -> eta * ||x||_1.
``elastic_net``
    x -> eta1 * ||x||_1 + eta2 * ||x||^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
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
    "soft_threshold",
]

_KINDS = ("squared_l2_loss", "abs_l1_loss", "l2_reg", "l1_reg", "elastic_net")


class NonSmoothPointError(ValueError):
    """Raised when a gradient is requested at a kink of a non-smooth function."""


@dataclass(frozen=True)
class FunctionSpec:
    """Descriptor of a convex loss or regularizer.

    Parameters
    ----------
    kind : str
        One of ``squared_l2_loss``, ``abs_l1_loss``, ``l2_reg``, ``l1_reg``,
        ``elastic_net``.
    eta1 : float
        Weight of the l1 term (used by ``l1_reg`` and ``elastic_net``).
    eta2 : float
        Weight of the squared-l2 term (used by ``l2_reg`` and ``elastic_net``).
    """

    kind: str
    eta1: float = 0.0
    eta2: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("regularization weights must be nonnegative")

    @property
    def smooth(self) -> bool:
        """True if the function is differentiable everywhere."""
        return self.l1_weight == 0.0

    @property
    def l1_weight(self) -> float:
        """Coefficient of the ||.||_1 term."""
        if self.kind == "abs_l1_loss":
            return 1.0
        if self.kind in ("l1_reg", "elastic_net"):
            return self.eta1
        return 0.0

    @property
    def l2_weight(self) -> float:
        """Coefficient of the ||.||^2 term."""
        if self.kind == "squared_l2_loss":
            return 1.0
        if self.kind == "l2_reg":
            return self.eta2
        if self.kind == "elastic_net":
            return self.eta2
        return 0.0


def squared_l2_loss() -> FunctionSpec:
    return FunctionSpec("squared_l2_loss")


def abs_l1_loss() -> FunctionSpec:
    return FunctionSpec("abs_l1_loss")


def l2_reg(eta: float) -> FunctionSpec:
    return FunctionSpec("l2_reg", eta2=eta)


def l1_reg(eta: float) -> FunctionSpec:
    return FunctionSpec("l1_reg", eta1=eta)


def elastic_net(eta1: float, eta2: float) -> FunctionSpec:
    return FunctionSpec("elastic_net", eta1=eta1, eta2=eta2)


def parse_function(text: str) -> FunctionSpec:
    """Parse the textual syntax used in config files and on the command line.

    Examples: ``squared_l2_loss``, ``abs_l1_loss``, ``l2_reg:eta=0.001``,
    ``l1_reg:eta=0.001``, ``elastic_net:eta1=1,eta2=1``.
    """
    head, _, tail = text.strip().partition(":")
    head = head.strip()
    params = {}
    if tail:
        for item in tail.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"malformed function parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ValueError(f"non-numeric value in function spec {text!r}") from None
    if head == "squared_l2_loss":
        _expect_params(text, params, ())
        return squared_l2_loss()
    if head == "abs_l1_loss":
        _expect_params(text, params, ())
        return abs_l1_loss()
    if head == "l2_reg":
        _expect_params(text, params, ("eta",))
        return l2_reg(params["eta"])
    if head == "l1_reg":
        _expect_params(text, params, ("eta",))
        return l1_reg(params["eta"])
    if head == "elastic_net":
        _expect_params(text, params, ("eta1", "eta2"))
        return elastic_net(params["eta1"], params["eta2"])
    raise ValueError(f"unknown function kind {head!r}")


def _expect_params(text, params, names):
    if set(params) != set(names):
        raise ValueError(f"function spec {text!r} expects parameters {list(names)}")


def format_function(spec: FunctionSpec) -> str:
    """Inverse of :func:`parse_function`."""
    if spec.kind == "l2_reg":
        return f"l2_reg:eta={spec.eta2:.17g}"
    if spec.kind == "l1_reg":
        return f"l1_reg:eta={spec.eta1:.17g}"
    if spec.kind == "elastic_net":
        return f"elastic_net:eta1={spec.eta1:.17g},eta2={spec.eta2:.17g}"
    return spec.kind


def soft_threshold(q: np.ndarray, t: float) -> np.ndarray:
    """Componentwise soft threshold sign(q) * max(|q| - t, 0)."""
    return np.sign(q) * np.maximum(np.abs(q) - t, 0.0)


def value(spec: FunctionSpec, v: np.ndarray) -> float:
    """Evaluate the function at ``v``."""
    v = np.asarray(v, dtype=float)
    out = 0.0
    l1 = spec.l1_weight
    l2 = spec.l2_weight
    if l1:
        out += l1 * float(np.abs(v).sum())
    if l2:
        out += l2 * float(v @ v)
    return out


def gradient(spec: FunctionSpec, v: np.ndarray) -> np.ndarray:
    """Gradient at ``v``.

    Raises
    ------
    NonSmoothPointError
        If the function has an l1 term and any coordinate of ``v`` is zero.
    """
    v = np.asarray(v, dtype=float)
    l1 = spec.l1_weight
    if l1 and np.any(v == 0.0):
        raise NonSmoothPointError(
            f"{spec.kind} is not differentiable where a coordinate is zero"
        )
    g = 2.0 * spec.l2_weight * v
    if l1:
        g = g + l1 * np.sign(v)
    return g


def subgradient(spec: FunctionSpec, v: np.ndarray) -> np.ndarray:
    """A subgradient at ``v``; the zero element is selected at kinks.

    Equals :func:`gradient` wherever the function is smooth.
    """
    v = np.asarray(v, dtype=float)
    g = 2.0 * spec.l2_weight * v
    l1 = spec.l1_weight
    if l1:
        g = g + l1 * np.sign(v)
    return g


def prox(spec: FunctionSpec, lam: float, q: np.ndarray) -> np.ndarray:
    """Proximal operator argmin_s { lam * spec(s) + 0.5 * ||s - q||^2 }.

    Closed form for every supported kind: soft threshold for l1 terms,
    scaling 1/(1 + 2*lam*w) for squared-l2 terms, and their composition
    for the elastic net.
    """
    if lam <= 0:
        raise ValueError("prox weight lam must be positive")
    q = np.asarray(q, dtype=float)
    l1 = spec.l1_weight
    l2 = spec.l2_weight
    s = soft_threshold(q, lam * l1) if l1 else q
    if l2:
        s = s / (1.0 + 2.0 * lam * l2)
    return s
