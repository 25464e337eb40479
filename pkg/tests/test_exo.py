import numpy as np
import pytest

from rdreg.errors import ContractError, DegenerateDisturbanceError, SingularTransformError
from rdreg.exo import (
    CanonicalHarmonic,
    ExoSpec,
    canonical_transform,
    check_observable,
    harmonic_from_gamma,
)
from rdreg.numkit import companion_generator, expm2, rotation_generator


def random_generator(rng, omega):
    # any similarity of the rotation generator keeps the {i w, -i w} spectrum
    while True:
        v = rng.standard_normal((2, 2))
        if abs(np.linalg.det(v)) > 0.3:
            return v @ rotation_generator(omega) @ np.linalg.inv(v)


class TestExoSpec:
    def test_canonical_construction(self):
        spec = ExoSpec.canonical(0.5, [1.0, 0.0], [2.0, 0.0])
        assert spec.y_ref_at(0.0) == pytest.approx(2.0)

    def test_invariant_violations(self):
        with pytest.raises(ContractError):
            ExoSpec(0.5, np.array([[1.0, 0.5], [-0.5, 0.0]]), np.zeros(2), np.zeros(2))
        with pytest.raises(ContractError):
            ExoSpec(0.5, np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros(2), np.zeros(2))

    def test_flow_preserves_amplitude(self):
        spec = ExoSpec.canonical(0.7, [0.3, -1.1], [1.0, 0.0])
        r0 = np.linalg.norm(spec.p0)
        for t in np.linspace(0.0, 100.0, 641):
            assert abs(np.linalg.norm(spec.p_at(t)) - r0) <= 1e-8


class TestHarmonicFromGamma:
    def test_canonical_generator_passthrough(self):
        b, c = 1.7, -0.4
        spec = ExoSpec.canonical(0.5, [b, c], [1.0, 0.0])
        harm = harmonic_from_gamma(np.array([1.0, 0.0]), spec)
        assert harm.b == pytest.approx(b, abs=1e-14)
        assert harm.c == pytest.approx(c, abs=1e-14)

    def test_pure_sine_amplitude(self):
        # signal 5 sin(0.5 t) read out through the first channel
        spec = ExoSpec.canonical(0.5, [0.0, 5.0], [1.0, 0.0])
        harm = harmonic_from_gamma(np.array([1.0, 0.0]), spec)
        assert harm.b == pytest.approx(0.0, abs=1e-14)
        assert harm.c == pytest.approx(5.0, abs=1e-14)

    def test_two_point_sampling_oracle(self):
        rng = np.random.default_rng(21)
        omega = 0.8
        for _ in range(5):
            g = random_generator(rng, omega)
            spec = ExoSpec(omega, g, rng.standard_normal(2), np.zeros(2))
            row = rng.standard_normal(2)
            harm = harmonic_from_gamma(row, spec)
            assert row @ spec.p_at(0.0) == pytest.approx(harm.b, abs=1e-10)
            quarter = np.pi / (2.0 * omega)
            assert row @ spec.p_at(quarter) == pytest.approx(harm.c, abs=1e-10)

    def test_degenerate(self):
        spec = ExoSpec.canonical(0.5, [1.0, 0.0], [1.0, 0.0])
        with pytest.raises(DegenerateDisturbanceError):
            harmonic_from_gamma(np.zeros(2), spec)


class TestCanonicalTransform:
    def test_first_axis(self):
        t = canonical_transform(0.5, np.array([1.0, 0.0]))
        np.testing.assert_allclose(t, [[1.0, 0.0], [0.0, 0.5]], atol=1e-14)

    def test_second_axis(self):
        t = canonical_transform(0.5, np.array([0.0, 1.0]))
        np.testing.assert_allclose(t, [[0.0, 1.0], [-0.5, 0.0]], atol=1e-14)
        assert abs(np.linalg.det(t)) > 0.0

    def test_similarity_identities(self):
        rng = np.random.default_rng(4)
        for omega in (0.1, 0.5, 2.0):
            g0 = rng.standard_normal(2)
            t = canonical_transform(omega, g0)
            lhs = t @ rotation_generator(omega) @ np.linalg.inv(t)
            np.testing.assert_allclose(lhs, companion_generator(omega ** 2), atol=1e-10)
            np.testing.assert_allclose(g0 @ np.linalg.inv(t), [1.0, 0.0], atol=1e-10)

    def test_unobservable_raises(self):
        with pytest.raises(SingularTransformError):
            canonical_transform(0.5, np.zeros(2))


class TestCheckObservable:
    def test_examples(self):
        assert check_observable(0.5, np.array([1.0, 1.0]))
        assert not check_observable(0.5, np.array([0.0, 0.0]))

    def test_omega_validation(self):
        with pytest.raises(ContractError):
            check_observable(0.0, np.array([1.0, 0.0]))


class TestCanonicalSignal:
    def setup_method(self):
        self.harm = CanonicalHarmonic(0.5, 1.2, -0.7)
        self.harm.transform = canonical_transform(0.5, np.array([0.4, 0.9]))

    def test_d_satisfies_companion_ode(self):
        dt = 1e-3
        ts = np.arange(0.0, 2.0, dt)
        d = np.array([self.harm.d_at(t) for t in ts])
        ddot = np.gradient(d, dt, axis=0)[2:-2]
        rhs = d @ self.harm.companion.T
        # central differences are O(dt^2)-accurate on the smooth harmonic
        assert np.abs(ddot - rhs[2:-2]).max() <= 10.0 * dt ** 2 * np.abs(d).max()

    def test_output_row_consistency(self):
        g0 = np.array([0.4, 0.9])
        for t in np.linspace(0.0, 20.0, 57):
            d = self.harm.d_at(t)
            eta = self.harm.eta_at(t)
            assert self.harm.gamma_c @ d == pytest.approx(float(g0 @ eta), abs=1e-10)
