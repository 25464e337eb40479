"""Exosystem and disturbance models.

The 2-D exosystem generates every disturbance and the reference signal. Any
generator with spectrum {i w, -i w} satisfies G^2 = -w^2 I, so harmonic
amplitudes in a scalar channel follow from the value and derivative at t=0
without a canonical-form computation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateDisturbanceError, SingularTransformError
from .numkit import companion_generator, expm2, rotation_generator


@dataclass(frozen=True)
class ExoSpec:
    """Harmonic exosystem: dp/dt = G p, reference y_ref = d4 p."""

    omega: float
    g_matrix: np.ndarray  # (2, 2), spectrum {i w, -i w}
    p0: np.ndarray  # (2,)
    d4: np.ndarray  # (2,) output row

    def __post_init__(self):
        g = np.asarray(self.g_matrix, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        d4 = np.asarray(self.d4, dtype=float)
        if self.omega <= 0:
            raise ContractError("omega must be positive")
        if g.shape != (2, 2) or p0.shape != (2,) or d4.shape != (2,):
            raise ContractError("exosystem needs 2x2 G and length-2 p0, d4")
        scale = max(1.0, np.abs(g).max())
        if abs(g[0, 0] + g[1, 1]) > 1e-12 * scale:
            raise ContractError("trace(G) must vanish for a {i w, -i w} spectrum")
        if abs(np.linalg.det(g) - self.omega ** 2) > 1e-9 * max(1.0, self.omega ** 2):
            raise ContractError("det(G) must equal omega^2")
        object.__setattr__(self, "g_matrix", g)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "d4", d4)

    @classmethod
    def canonical(cls, omega, p0, d4):
        return cls(omega, rotation_generator(omega), np.asarray(p0, float), np.asarray(d4, float))

    def p_at(self, t):
        return expm2(self.g_matrix, t) @ self.p0

    def y_ref_at(self, t):
        return float(self.d4 @ self.p_at(t))


@dataclass
class CanonicalHarmonic:
    """A scalar harmonic b cos(w t) + c sin(w t) and its canonical generators."""

    omega: float
    b: float
    c: float
    transform: np.ndarray = field(default=None)  # T with d(t) = T eta(t), set later

    @property
    def theta(self):
        return self.omega ** 2

    @property
    def eta0(self):
        return np.array([self.b, self.c])

    @property
    def rotation(self):
        return rotation_generator(self.omega)

    @property
    def companion(self):
        return companion_generator(self.theta)

    @property
    def gamma_c(self):
        return np.array([1.0, 0.0])

    def eta_at(self, t):
        return expm2(self.rotation, t) @ self.eta0

    def d_at(self, t):
        if self.transform is None:
            raise ContractError("canonical transform not attached yet")
        return self.transform @ self.eta_at(t)


def harmonic_from_gamma(gamma_row, exo):
    """Amplitudes (b, c) with gamma_row p(t) = b cos(w t) + c sin(w t).

    b is the value at t=0 and c the scaled derivative; exact because
    G^2 = -w^2 I for any admissible generator.
    """
    gamma_row = np.asarray(gamma_row, dtype=float)
    if gamma_row.shape != (2,):
        raise ContractError("gamma_row must be a length-2 row")
    b = float(gamma_row @ exo.p0)
    c = float(gamma_row @ exo.g_matrix @ exo.p0) / exo.omega
    scale = max(1.0, float(np.linalg.norm(gamma_row) * np.linalg.norm(exo.p0)))
    if b * b + c * c <= (1e-14 * scale) ** 2:
        raise DegenerateDisturbanceError("harmonic amplitude b^2 + c^2 vanishes")
    return CanonicalHarmonic(exo.omega, b, c)


def check_observable(omega, g0):
    """Whether the (rotation generator, g0) pair is observable."""
    if omega <= 0:
        raise ContractError("omega must be positive")
    g0 = np.asarray(g0, dtype=float)
    det = g0[0] * (omega * g0[0]) - g0[1] * (-omega * g0[1])
    return abs(det) > 1e-12 * float(g0 @ g0) * omega


def canonical_transform(omega, g0):
    """Change of basis T = [g0; g0 Gc] mapping the rotation pair to companion form.

    Satisfies Sc(theta) = T Gc T^{-1} and gamma_c = g0 T^{-1}; both identities
    are verified numerically before returning.
    """
    g0 = np.asarray(g0, dtype=float)
    if not check_observable(omega, g0):
        raise SingularTransformError("pair (rotation generator, g0) is unobservable")
    gc = rotation_generator(omega)
    t = np.vstack([g0, g0 @ gc])
    tinv = np.linalg.inv(t)
    resid = t @ gc @ tinv - companion_generator(omega ** 2)
    scale = max(1.0, omega ** 2)
    if np.abs(resid).max() > 1e-10 * scale:
        raise SingularTransformError("companion-form identity failed numerically")
    if np.abs(g0 @ tinv - np.array([1.0, 0.0])).max() > 1e-10:
        raise SingularTransformError("output-row identity failed numerically")
    return t
