"""Backend kernel tests: pure-numpy and compiled paths must agree."""

import numpy as np
import pytest
from scipy.optimize import minimize

from featadmm import backend
from featadmm import _inner_loops_py as py_impl

try:
    from featadmm import _inner_loops as c_impl
except ImportError:
    c_impl = None

IMPLS = [py_impl] + ([c_impl] if c_impl is not None else [])


def quad_objective(gram, lin, n_scale, l1w, l2w, phi):
    return (
        n_scale * (phi @ gram @ phi + 2.0 * lin @ phi)
        + l2w * phi @ phi
        + l1w * np.abs(phi).sum()
    )


def make_quad_case(rng, p=3, m=12):
    a = rng.standard_normal((m, p))
    gram = a.T @ a
    lin = rng.standard_normal(p)
    n_scale = float(rng.uniform(0.5, 4.0))
    l1w = float(rng.uniform(0.0, 1.5))
    l2w = float(rng.uniform(0.0, 1.5))
    lip = 2.0 * n_scale * np.linalg.eigvalsh(gram)[-1] + 2.0 * l2w
    return gram, lin, n_scale, l1w, l2w, 1.0 / (lip * 1.02)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestIstaQuadratic:
    def test_reaches_reference_minimum(self, impl):
        rng = np.random.default_rng(11)
        for _ in range(10):
            gram, lin, n_scale, l1w, l2w, step = make_quad_case(rng)
            phi0 = rng.standard_normal(3)
            phi, iters, converged = impl.ista_quadratic(
                gram, lin, n_scale, l1w, l2w, phi0, step, 20000, 1e-12
            )
            assert converged
            ref = minimize(
                lambda z: quad_objective(gram, lin, n_scale, l1w, l2w, z),
                phi0,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000},
            ).x
            got = quad_objective(gram, lin, n_scale, l1w, l2w, phi)
            want = quad_objective(gram, lin, n_scale, l1w, l2w, ref)
            assert got <= want + 1e-8 * (1.0 + abs(want))

    def test_budget_exhaustion_returns_iterate(self, impl):
        rng = np.random.default_rng(12)
        gram, lin, n_scale, l1w, l2w, step = make_quad_case(rng)
        phi0 = rng.standard_normal(3) * 10.0
        phi, iters, converged = impl.ista_quadratic(
            gram, lin, n_scale, l1w, l2w, phi0, step, 3, 1e-14
        )
        assert iters == 3 and not converged
        assert np.isfinite(phi).all()

    def test_monotone_descent(self, impl):
        rng = np.random.default_rng(13)
        gram, lin, n_scale, l1w, l2w, step = make_quad_case(rng)
        phi = rng.standard_normal(3) * 5.0
        prev = quad_objective(gram, lin, n_scale, l1w, l2w, phi)
        for _ in range(50):
            phi, _, _ = impl.ista_quadratic(
                gram, lin, n_scale, l1w, l2w, phi, step, 1, 1e-16
            )
            cur = quad_objective(gram, lin, n_scale, l1w, l2w, phi)
            assert cur <= prev + 1e-12 * (1.0 + abs(prev))
            prev = cur


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestSubgradComposite:
    def test_descends_l1_objective(self, impl):
        rng = np.random.default_rng(14)
        m, p = 20, 3
        a = rng.standard_normal((m, p))
        q = rng.standard_normal(m)
        phi0 = rng.standard_normal(p) * 3.0

        def obj(phi):
            return 2.0 * np.abs(q + a @ phi).sum() + 0.3 * phi @ phi

        phi, iters = impl.subgrad_composite(a, q, 2.0, 0.0, 0.3, phi0, 0.5, 4000, 0)
        ref = minimize(obj, phi0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20000}).x
        assert obj(phi) <= obj(ref) * 1.001 + 1e-6
        assert obj(phi) < obj(phi0)

    def test_best_iterate_never_worse_than_start(self, impl):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((10, 2))
        q = rng.standard_normal(10)
        phi0 = rng.standard_normal(2)

        def obj(phi):
            return 1.0 * np.abs(q + a @ phi).sum() + 0.7 * np.abs(phi).sum()

        for budget in (1, 2, 5, 50):
            phi, _ = impl.subgrad_composite(a, q, 1.0, 0.7, 0.0, phi0, 1.0, budget, 0)
            assert obj(phi) <= obj(phi0) + 1e-12

    def test_schedule_continuation_shrinks_steps(self, impl):
        # far from the optimum every step improves, so the best (returned)
        # iterate is the moved one and its displacement is the step length
        rng = np.random.default_rng(16)
        a = rng.standard_normal((10, 2))
        q = rng.standard_normal(10)
        phi0 = np.full(2, 100.0)
        early, _ = impl.subgrad_composite(a, q, 1.0, 0.0, 0.0, phi0, 1.0, 1, 0)
        late, _ = impl.subgrad_composite(a, q, 1.0, 0.0, 0.0, phi0, 1.0, 1, 10**6)
        # one step of length 1/sqrt(1) vs 1/sqrt(1e6 + 1)
        assert np.linalg.norm(early - phi0) == pytest.approx(1.0, rel=1e-9)
        assert np.linalg.norm(late - phi0) == pytest.approx(1e-3, rel=1e-2)


@pytest.mark.skipif(c_impl is None, reason="compiled extension not built")
class TestBackendsAgree:
    def test_ista_matches(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            gram, lin, n_scale, l1w, l2w, step = make_quad_case(rng)
            phi0 = rng.standard_normal(3)
            args = (gram, lin, n_scale, l1w, l2w, phi0, step, 500, 1e-10)
            phi_py, it_py, conv_py = py_impl.ista_quadratic(*args)
            phi_c, it_c, conv_c = c_impl.ista_quadratic(*args)
            assert it_py == it_c and conv_py == conv_c
            np.testing.assert_allclose(phi_py, phi_c, atol=1e-12)

    def test_subgrad_matches(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            m, p = 15, 3
            a = rng.standard_normal((m, p))
            q = rng.standard_normal(m)
            phi0 = rng.standard_normal(p)
            args = (a, q, 2.0, 0.4, 0.6, phi0, 0.8, 200, 7)
            phi_py, it_py = py_impl.subgrad_composite(*args)
            phi_c, it_c = c_impl.subgrad_composite(*args)
            assert it_py == it_c
            np.testing.assert_allclose(phi_py, phi_c, atol=1e-12)


def test_backend_module_exposes_selected_impl():
    assert backend.BACKEND in ("compiled", "python")
    assert callable(backend.ista_quadratic)
    assert callable(backend.subgrad_composite)


def test_env_var_forces_python_backend():
    import os
    import subprocess
    import sys

    env = dict(os.environ)
    env["FEATADMM_PURE_PYTHON"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", "from featadmm.backend import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    ).stdout.strip()
    assert out == "python"
