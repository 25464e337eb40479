import numpy as np
import pytest

from conftest import random_symmetric
from oracles import expm_taylor, shifted_qr_eigvals

from rdreg._backend import HAVE_NUMBA
from rdreg.errors import ContractError, ResonantSystemError
from rdreg.numkit import (
    GridFunction,
    companion_generator,
    expm2,
    lyap_solve,
    psd_project,
    quad,
    rotation_generator,
    sym_eig,
)

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.mark.parametrize("backend", BACKENDS)
class TestSymEig:
    def test_identity(self, backend):
        w, _ = sym_eig(np.eye(3), backend=backend)
        np.testing.assert_allclose(w, [1.0, 1.0, 1.0], atol=1e-14)

    def test_diagonal(self, backend):
        w, _ = sym_eig(np.diag([-2.0, 5.0]), backend=backend)
        np.testing.assert_allclose(w, [-2.0, 5.0], atol=1e-14)

    def test_random_vs_qr_oracle(self, backend):
        rng = np.random.default_rng(7)
        m = random_symmetric(rng, 6, scale=3.0)
        w, _ = sym_eig(m, backend=backend)
        ref = shifted_qr_eigvals(m)
        assert np.all(np.diff(w) >= -1e-12)
        np.testing.assert_allclose(w, ref, atol=1e-9 * np.linalg.norm(m))

    def test_reconstruction(self, backend):
        rng = np.random.default_rng(11)
        for n in (2, 4, 8, 12):
            m = random_symmetric(rng, n, scale=2.0)
            w, v = sym_eig(m, backend=backend)
            err = np.abs((v * w) @ v.T - m).max()
            assert err <= 1e-9 * max(np.linalg.norm(m), 1.0)
            ortho = np.abs(v.T @ v - np.eye(n)).max()
            assert ortho <= 1e-12

    def test_rejects_nonsymmetric(self, backend):
        with pytest.raises(ContractError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]), backend=backend)


class TestExpm2:
    def test_zero_matrix(self):
        np.testing.assert_array_equal(expm2(np.zeros((2, 2)), 1.0), np.eye(2))

    def test_companion_vs_taylor(self):
        m = companion_generator(0.25)
        got = expm2(m, 0.2)
        np.testing.assert_allclose(got, expm_taylor(m, 0.2), atol=1e-12)

    def test_full_rotation_period(self):
        m = rotation_generator(0.5)
        got = expm2(m, 2.0 * np.pi / 0.5)
        np.testing.assert_allclose(got, np.eye(2), atol=1e-10)

    def test_theta_zero_limit(self):
        got = expm2(companion_generator(0.0), 0.7)
        np.testing.assert_allclose(got, [[1.0, 0.7], [0.0, 1.0]], atol=1e-14)

    def test_general_vs_taylor(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((2, 2))
        np.testing.assert_allclose(expm2(m, 0.3), expm_taylor(m, 0.3, terms=30), atol=1e-12)

    @pytest.mark.parametrize("m", [
        rotation_generator(0.5),
        companion_generator(2.0),
        np.array([[0.3, -1.2], [0.8, 0.1]]),
    ])
    def test_group_property(self, m):
        s, t = 0.4, 1.1
        lhs = expm2(m, s) @ expm2(m, t)
        np.testing.assert_allclose(lhs, expm2(m, s + t), atol=1e-10)

    def test_hyperbolic_branch(self):
        m = np.array([[0.0, 2.0], [0.5, 0.0]])
        np.testing.assert_allclose(expm2(m, 0.6), expm_taylor(m, 0.6, terms=30), atol=1e-12)


class TestLyapSolve:
    def test_scaled_identity(self):
        np.testing.assert_allclose(lyap_solve(-np.eye(2), 2.0 * np.eye(2)), np.eye(2), atol=1e-12)

    def test_diagonal(self):
        q = lyap_solve(np.diag([-1.0, -3.0]), np.eye(2))
        np.testing.assert_allclose(q, np.diag([0.5, 1.0 / 6.0]), atol=1e-12)

    def test_random_hurwitz(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 3))
        a -= (np.linalg.eigvals(a).real.max() + 1.0) * np.eye(3)
        w = np.eye(3)
        q = lyap_solve(a, w)
        resid = np.abs(a.T @ q + q @ a + w).max()
        assert resid <= 1e-9 * np.linalg.norm(w)
        assert np.abs(q - q.T).max() <= 1e-12
        assert sym_eig(q)[0][0] > 0.0

    def test_resonant_spectrum(self):
        with pytest.raises(ResonantSystemError):
            lyap_solve(np.diag([1.0, -1.0]), np.eye(2))


class TestQuad:
    def test_constant(self):
        assert quad(np.ones(101)) == pytest.approx(1.0, abs=1e-14)

    def test_full_period_cosine(self):
        x = np.linspace(0.0, 1.0, 201)
        assert quad(np.cos(2.0 * np.pi * x)) == pytest.approx(0.0, abs=1e-8)

    def test_quadratic(self):
        x = np.linspace(0.0, 1.0, 201)
        assert quad(x ** 2) == pytest.approx(1.0 / 3.0, abs=1e-8)

    def test_cubic_exact(self):
        x = np.linspace(0.0, 1.0, 101)
        assert quad(x ** 3 - 0.4 * x ** 2 + 2.0 * x) == pytest.approx(0.25 - 0.4 / 3.0 + 1.0, abs=1e-13)

    def test_gridfunction_input(self):
        gf = GridFunction.from_callable(lambda x: x, 100)
        assert quad(gf) == pytest.approx(0.5, abs=1e-14)


class TestPsdProject:
    def test_clip(self):
        got = psd_project(np.diag([-1.0, 2.0]), 0.0)
        np.testing.assert_allclose(got, np.diag([0.0, 2.0]), atol=1e-14)

    def test_fixed_point(self):
        m = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(psd_project(m, 0.0), m, atol=1e-12)

    def test_floor_enforced(self):
        rng = np.random.default_rng(9)
        m = random_symmetric(rng, 5)
        out = psd_project(m, 0.25)
        assert sym_eig(out - 0.25 * np.eye(5))[0][0] >= -1e-12


class TestGridFunction:
    def test_too_few_nodes(self):
        with pytest.raises(ContractError):
            GridFunction(np.array([1.0, 2.0]))

    def test_grid_properties(self):
        gf = GridFunction(np.zeros(11))
        assert gf.m == 10
        assert gf.x[1] == pytest.approx(0.1)
