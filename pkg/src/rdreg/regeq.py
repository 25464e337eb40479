"""Solvers for the three function-valued design equations.

* the tracking-transform profile Gamma (a linear row-valued IVP driven by
  the disturbance shapes),
* the observer decoupling profile g (a nonlocal BVP, solved by projecting
  onto the complex eigenbasis of the rotation generator and shooting with
  a one-pass linearity factorization),
* the controller map f(x, theta) (an IVP whose nonlocal term is explicit
  because f(0) is prescribed).

All three march a classical fourth-order one-step method at the PDE grid
spacing, with forcing sampled at half-step resolution so the stage values
are exact. Residuals are certified with a fourth-order centered stencil
plus a step-halving rerun.
"""

from dataclasses import dataclass, field

import numpy as np

from ._backend import resolve_backend
from .errors import ContractError, ResonantSystemError
from .exo import canonical_transform, harmonic_from_gamma
from .kernels import loops
from .modal import ModalBasis, eigenfunction_values
from .numkit import expm2, rotation_generator


@dataclass(frozen=True)
class InjectionProfile:
    """Observer injection shape: a finite cosine series with given gains."""

    gains: np.ndarray  # (N+1,)
    values: np.ndarray  # samples on the plant grid (M+1,)
    half_values: np.ndarray  # samples at half-step resolution (2M+1,)

    def evaluate(self, x):
        out = np.full_like(np.asarray(x, dtype=float), self.gains[0], dtype=float)
        for n in range(1, self.gains.shape[0]):
            out += self.gains[n] * eigenfunction_values(n, x)
        return out


def build_injection_profile(gains, basis: ModalBasis):
    gains = np.asarray(gains, dtype=float).reshape(-1)
    if gains.shape[0] - 1 > basis.max_mode:
        raise ContractError("more injection gains than basis modes")
    x_half = np.linspace(0.0, 1.0, 2 * basis.grid_m + 1)
    prof = InjectionProfile(gains, np.zeros(basis.grid_m + 1), np.zeros(2 * basis.grid_m + 1))
    values = prof.evaluate(basis.x)
    half = prof.evaluate(x_half)
    return InjectionProfile(gains, values, half)


def _injection_half(inj, grid_m):
    if isinstance(inj, InjectionProfile):
        half = inj.half_values
        if half.shape[0] != 2 * grid_m + 1:
            return inj.evaluate(np.linspace(0.0, 1.0, 2 * grid_m + 1))
        return half
    half = np.asarray(inj, dtype=float)
    if half.shape[0] != 2 * grid_m + 1:
        raise ContractError("injection samples must live on the half-step grid")
    return half


@dataclass(frozen=True)
class ProfileSolution:
    """A row-valued profile and its first derivative on the grid."""

    values: np.ndarray  # (M+1, 2)
    derivs: np.ndarray  # (M+1, 2)

    @property
    def end_slope(self):
        return self.derivs[-1]

    @property
    def start_value(self):
        return self.values[0]


def _integrate_row(a_mat, forcing_half, y0, dy0, backend):
    n2 = forcing_half.shape[0] - 1
    if n2 % 2 != 0:
        raise ContractError("forcing must be sampled at half-step resolution")
    n = n2 // 2
    h = 1.0 / n
    out_y = np.empty((n + 1, 2))
    out_dy = np.empty((n + 1, 2))
    kern = loops.get("integrate_row_ivp", backend)
    kern(
        h, n,
        a_mat[0, 0], a_mat[0, 1], a_mat[1, 0], a_mat[1, 1],
        np.ascontiguousarray(forcing_half, dtype=float),
        float(y0[0]), float(y0[1]), float(dy0[0]), float(dy0[1]),
        out_y, out_dy,
    )
    return ProfileSolution(out_y, out_dy)


def solve_regulator_profile(a, g_matrix, d1_half, d2, d4, backend=None):
    """Integrate Gamma'' = Gamma (G - a I) - d1(x), Gamma(0)=d4, Gamma'(0)=d2."""
    backend = resolve_backend(backend)
    d1_half = np.asarray(d1_half, dtype=float)
    if d1_half.ndim != 2 or d1_half.shape[1] != 2:
        raise ContractError("d1 samples must have shape (2M+1, 2)")
    a_mat = np.asarray(g_matrix, dtype=float) - a * np.eye(2)
    return _integrate_row(a_mat, -d1_half, np.asarray(d4, float), np.asarray(d2, float), backend)


def delayed_feedforward_row(dgamma_end, d3, g_matrix, tau):
    """Disturbance-cancellation row: (Gamma'(1) - d3) e^{G tau}."""
    row = np.asarray(dgamma_end, dtype=float) - np.asarray(d3, dtype=float)
    return row @ expm2(np.asarray(g_matrix, dtype=float), tau)


@dataclass(frozen=True)
class DecouplerSolution(ProfileSolution):
    """Observer decoupling profile g with the shooting diagnostics kept."""

    shoot_deriv_end: complex = 0.0 + 0.0j  # u'(1) of the unit-normalized solve

    @property
    def g0(self):
        return self.values[0]


def solve_observer_decoupler(a, omega, tau, inj, grid_m, backend=None):
    """Solve g'' = g (Gc - a I) - L(x) g(0), g'(0)=0, g'(1) = -gamma_c e^{-Gc tau}.

    Projection onto the eigenvector (1, i) of the rotation generator reduces
    the BVP to one complex scalar problem; linearity in g(0) turns the
    nonlocal term into a unit-normalized shoot u with g = c u, where
    c = -e^{-i w tau} / u'(1).
    """
    backend = resolve_backend(backend)
    if omega <= 0:
        raise ContractError("omega must be positive")
    half = _injection_half(inj, grid_m)
    h = 1.0 / grid_m
    out_u = np.empty(grid_m + 1, dtype=complex)
    out_du = np.empty(grid_m + 1, dtype=complex)
    kern = loops.get("integrate_scalar_ivp_cplx", backend)
    alpha = 1j * omega - a
    kern(h, grid_m, alpha, -np.ascontiguousarray(half, dtype=float), 1.0, 0.0, out_u, out_du)
    du_end = out_du[-1]
    if abs(du_end) <= 1e-10 * np.abs(out_u).max():
        raise ResonantSystemError(
            f"decoupler BVP is resonant: |u'(1)| = {abs(du_end):.3e} below threshold"
        )
    # boundary row contracted with (1, i): e^{-Gc tau} (1, i)^T = e^{-i w tau} (1, i)^T
    c1 = -np.exp(-1j * omega * tau) / du_end
    g_cplx = c1 * out_u
    dg_cplx = c1 * out_du
    values = np.column_stack([g_cplx.real, g_cplx.imag])
    derivs = np.column_stack([dg_cplx.real, dg_cplx.imag])
    return DecouplerSolution(values, derivs, shoot_deriv_end=du_end)


@dataclass(frozen=True)
class ControllerMap(ProfileSolution):
    """Controller map f(x, theta): profile plus the estimate it was built at."""

    theta: float = 0.0


GAMMA_C = np.array([1.0, 0.0])


def solve_controller_map(theta, a, inj, grid_m, backend=None):
    """Integrate f'' = f (Sc(theta) - a I) - L(x) f(0), f(0)=gamma_c, f'(0)=0."""
    if theta < 0:
        raise ContractError("theta must be nonnegative (clamp estimates upstream)")
    backend = resolve_backend(backend)
    half = _injection_half(inj, grid_m)
    a_mat = np.array([[-a, 1.0], [-theta, -a]])
    forcing = np.column_stack([-half, np.zeros_like(half)])
    sol = _integrate_row(a_mat, forcing, GAMMA_C, np.zeros(2), backend)
    return ControllerMap(sol.values, sol.derivs, theta=float(theta))


@dataclass(frozen=True)
class RegulatorMaps:
    """Snapshot of every design map at the true frequency (tests/diagnostics)."""

    gamma: ProfileSolution
    ff_row: np.ndarray  # (2,) feedforward cancellation row
    harmonic: object  # CanonicalHarmonic with transform attached
    g: DecouplerSolution
    f: ControllerMap
    injection: InjectionProfile


def build_regulator_maps(plant, exo_spec, injection, backend=None):
    gamma = solve_regulator_profile(
        plant.a, exo_spec.g_matrix, plant.d1_half, plant.d2, exo_spec.d4, backend=backend
    )
    ff_row = delayed_feedforward_row(gamma.end_slope, plant.d3, exo_spec.g_matrix, plant.tau)
    harm = harmonic_from_gamma(ff_row, exo_spec)
    g = solve_observer_decoupler(
        plant.a, exo_spec.omega, plant.tau, injection, plant.grid_m, backend=backend
    )
    harm.transform = canonical_transform(exo_spec.omega, g.g0)
    f = solve_controller_map(
        exo_spec.omega ** 2, plant.a, injection, plant.grid_m, backend=backend
    )
    return RegulatorMaps(gamma, ff_row, harm, g, f, injection)


def second_derivative_stencil(values, h):
    """Fourth-order centered second derivative on interior nodes 2..M-2."""
    v = np.asarray(values, dtype=float)
    return (-v[:-4] + 16.0 * v[1:-3] - 30.0 * v[2:-2] + 16.0 * v[3:-1] - v[4:]) / (12.0 * h * h)


def ivp_residual(values, rhs_at_nodes, grid_m):
    """Max-norm defect of y'' = rhs using the interior fourth-order stencil."""
    d2 = second_derivative_stencil(values, 1.0 / grid_m)
    rhs = np.asarray(rhs_at_nodes, dtype=float)[2:-2]
    return float(np.abs(d2 - rhs).max())


def regulator_rhs(sol: ProfileSolution, a, g_matrix, d1_nodes):
    return sol.values @ (np.asarray(g_matrix, float) - a * np.eye(2)) - d1_nodes


def decoupler_rhs(sol: DecouplerSolution, a, omega, inj_nodes):
    return sol.values @ (rotation_generator(omega) - a * np.eye(2)) - np.outer(inj_nodes, sol.g0)


def controller_rhs(sol: ControllerMap, a, inj_nodes):
    a_mat = np.array([[-a, 1.0], [-sol.theta, -a]])
    return sol.values @ a_mat - np.outer(inj_nodes, GAMMA_C)


def dump_profiles_csv(path, grid_m, **profiles):
    """Debug dump of row-valued profiles: columns x, component1, component2."""
    x = np.linspace(0.0, 1.0, grid_m + 1)
    with open(path, "w") as fh:
        names = sorted(profiles)
        header = ["x"]
        for name in names:
            header += [f"{name}_1", f"{name}_2"]
        fh.write(",".join(header) + "\n")
        for i in range(grid_m + 1):
            row = [f"{x[i]:.17g}"]
            for name in names:
                vals = profiles[name]
                row += [f"{vals[i, 0]:.17g}", f"{vals[i, 1]:.17g}"]
            fh.write(",".join(row) + "\n")
