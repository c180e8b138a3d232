"""Pure-numpy implementations of the hot inner-loop kernels.

These are the reference implementations for the compiled extension in
``_inner_loops.pyx``; both expose the same signatures and are selected at
import time by :mod:`featadmm.backend`.
"""

from __future__ import annotations

import math

import numpy as np


def ista_quadratic(gram, lin, n_scale, l1_weight, l2_weight, phi0, step, budget, tol):
    """Proximal-gradient loop for the composite quadratic subproblem.

    Minimizes over phi::

        n_scale * (phi' G phi + 2 lin' phi) + l2_weight * ||phi||^2
                                            + l1_weight * ||phi||_1

    with fixed step size ``step`` (caller supplies 1/L). Stops when the step
    norm falls below ``tol * (1 + ||phi||)`` or after ``budget`` iterations.

    Returns ``(phi, iterations, converged)``.
    """
    phi = np.array(phi0, dtype=float, copy=True)
    iterations = 0
    converged = False
    t = step * l1_weight
    for _ in range(budget):
        iterations += 1
        grad = 2.0 * n_scale * (gram @ phi + lin) + 2.0 * l2_weight * phi
        nxt = phi - step * grad
        if l1_weight:
            nxt = np.sign(nxt) * np.maximum(np.abs(nxt) - t, 0.0)
        delta = nxt - phi
        phi = nxt
        if math.sqrt(float(delta @ delta)) <= tol * (1.0 + math.sqrt(float(phi @ phi))):
            converged = True
            break
    return phi, iterations, converged


def subgrad_composite(a, q, n_scale, l1_weight, l2_weight, phi0, scale, budget, t0):
    """Diminishing-step subgradient loop for the non-smooth-loss subproblem.

    Minimizes over phi::

        n_scale * ||q + A phi||_1 + l2_weight * ||phi||^2
                                  + l1_weight * ||phi||_1

    Each iteration moves a distance ``scale / sqrt(t0 + t)`` along the
    negated, normalized subgradient; ``t0`` continues the step schedule
    across calls. The best iterate seen (by objective value) is returned.

    Returns ``(phi, iterations)``.
    """
    phi = np.array(phi0, dtype=float, copy=True)
    best = phi.copy()
    best_obj = math.inf
    iterations = 0
    for it in range(1, budget + 1):
        iterations = it
        r = q + a @ phi
        obj = (
            n_scale * float(np.abs(r).sum())
            + l2_weight * float(phi @ phi)
            + l1_weight * float(np.abs(phi).sum())
        )
        if obj < best_obj:
            best_obj = obj
            best[:] = phi
        g = n_scale * (a.T @ np.sign(r)) + 2.0 * l2_weight * phi
        if l1_weight:
            g = g + l1_weight * np.sign(phi)
        gnorm = math.sqrt(float(g @ g))
        if gnorm <= 1e-300:
            best[:] = phi
            break
        phi -= (scale / math.sqrt(t0 + it) / gnorm) * g
    else:
        # final iterate was never scored; give it a chance
        r = q + a @ phi
        obj = (
            n_scale * float(np.abs(r).sum())
            + l2_weight * float(phi @ phi)
            + l1_weight * float(np.abs(phi).sum())
        )
        if obj < best_obj:
            best[:] = phi
    return best, iterations
