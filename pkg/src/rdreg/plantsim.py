"""Finite-difference simulation of the plant, exosystem, and delayed input.

Space: second-order central differences with ghost nodes for the Neumann /
flux boundaries. Time: Crank-Nicolson with source terms evaluated at the
half step; the 2-D exosystem advances by its exact rotation. The implicit
matrix is constant per run, so it is prefactored once: Thomas LU sweeps on
the numba backend, a dense precomputed inverse (one matvec per step) on the
numpy fallback.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import resolve_backend
from .errors import ContractError
from .kernels import loops, vector
from .numkit import expm2


@dataclass(frozen=True)
class PlantSpec:
    """Physical problem data for the reaction-diffusion plant."""

    a: float
    tau: float
    grid_m: int
    dt: float
    d1_half: np.ndarray  # in-domain disturbance rows at half-step resolution (2M+1, 2)
    d2: np.ndarray  # left-boundary disturbance row (2,)
    d3: np.ndarray  # right-boundary disturbance row (2,)
    w0: np.ndarray  # initial state samples (M+1,)

    def __post_init__(self):
        if self.tau < 0:
            raise ContractError("delay must be nonnegative")
        if self.grid_m < 20 or self.grid_m % 2 != 0:
            raise ContractError("grid_m must be even and >= 20")
        if self.dt <= 0:
            raise ContractError("dt must be positive")
        d1 = np.asarray(self.d1_half, dtype=float)
        if d1.shape != (2 * self.grid_m + 1, 2):
            raise ContractError("d1_half must have shape (2*grid_m + 1, 2)")
        w0 = np.asarray(self.w0, dtype=float)
        if w0.shape != (self.grid_m + 1,):
            raise ContractError("w0 must have shape (grid_m + 1,)")
        object.__setattr__(self, "d1_half", d1)
        object.__setattr__(self, "d2", np.asarray(self.d2, dtype=float))
        object.__setattr__(self, "d3", np.asarray(self.d3, dtype=float))
        object.__setattr__(self, "w0", w0)

    @property
    def d1_nodes(self):
        return self.d1_half[::2]

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.grid_m + 1)


def quiet_plant(a, tau, grid_m, dt, w0=None):
    """Disturbance-free spec (test harness convenience)."""
    w0 = np.zeros(grid_m + 1) if w0 is None else np.asarray(w0, dtype=float)
    return PlantSpec(
        a, tau, grid_m, dt,
        np.zeros((2 * grid_m + 1, 2)), np.zeros(2), np.zeros(2), w0,
    )


@dataclass
class PdeState:
    t: float
    w: np.ndarray
    p: np.ndarray


class DelayLine:
    """Ring buffer of control samples at dt resolution, linear interpolation.

    Pushes arrive at t = k*dt in order. Queries at negative times return 0
    (zero history); queries newer than the last push clamp to it (only the
    tau < dt/2 midpoint sampling hits this); queries older than the buffer
    span raise.
    """

    def __init__(self, tau, dt):
        if tau < 0 or dt <= 0:
            raise ContractError("need tau >= 0 and dt > 0")
        self.tau = tau
        self.dt = dt
        self.capacity = int(math.ceil(tau / dt)) + 4
        self._buf = np.zeros(self.capacity)
        self._newest = -1

    def push(self, t, u):
        k = int(round(t / self.dt))
        if abs(t - k * self.dt) > 1e-9 * max(1.0, abs(t)):
            raise ContractError("pushes must land on the dt grid")
        if k != self._newest + 1:
            raise ContractError("pushes must be consecutive in time")
        self._newest = k
        self._buf[k % self.capacity] = u

    def _at(self, k):
        return self._buf[k % self.capacity]

    def sample(self, t_query):
        if t_query < 0.0:
            return 0.0
        if self._newest < 0:
            raise ContractError("sampling an empty delay line")
        pos = t_query / self.dt
        i0 = int(math.floor(pos))
        if i0 >= self._newest:
            return float(self._at(self._newest))
        if i0 < self._newest - (self.capacity - 1):
            raise ContractError("query older than the delay buffer span")
        frac = pos - i0
        u0 = self._at(i0)
        return float(u0 + frac * (self._at(i0 + 1) - u0))

    def push_and_sample(self, t, u):
        """Record u(t) and return the delayed sample u(t - tau)."""
        self.push(t, u)
        return self.sample(t - self.tau)


class CrankNicolsonPlan:
    """Prefactored Crank-Nicolson stepping data for w_t = w_xx + a w + src."""

    def __init__(self, a, grid_m, dt, backend=None):
        self.backend = resolve_backend(backend)
        self.a = a
        self.grid_m = grid_m
        self.dt = dt
        dx = 1.0 / grid_m
        self.flux_scale = 2.0 / dx
        r = dt / (2.0 * dx * dx)
        s = 0.5 * dt * a
        n = grid_m + 1
        # RHS matrix I + dt/2 (D2 + aI): uniform diagonal, doubled edge coupling
        self.bd = 1.0 + s - 2.0 * r
        self.be = 2.0 * r
        self.bi = r
        # LHS matrix I - dt/2 (D2 + aI)
        diag = np.full(n, 1.0 - s + 2.0 * r)
        upper = np.full(n - 1, -r)
        lower = np.full(n - 1, -r)
        upper[0] = -2.0 * r
        lower[-1] = -2.0 * r
        if self.backend == "numba":
            melim = np.zeros(n)
            dprime = np.empty(n)
            dprime[0] = diag[0]
            for i in range(1, n):
                melim[i] = lower[i - 1] / dprime[i - 1]
                dprime[i] = diag[i] - melim[i] * upper[i - 1]
            self._melim = melim
            self._dprime = dprime
            self._cupper = np.append(upper, 0.0)
            self._kern = loops.get("cn_step_thomas", "numba")
        else:
            lhs = np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)
            self._inv_lhs = np.linalg.inv(lhs)

    def step(self, w, src, out):
        """Advance one dt; src holds half-step source samples. out != w."""
        if out is w:
            raise ContractError("CN step cannot run in place")
        if self.backend == "numba":
            return self._kern(
                w, src, self.dt, self.bd, self.be, self.bi,
                self._melim, self._dprime, self._cupper, out,
            )
        return vector.cn_step_dense(w, src, self.dt, self.bd, self.be, self.bi, self._inv_lhs, out)


class PlantSimulator:
    """Steps the coupled (w, p) system under a supplied delayed control value."""

    def __init__(self, spec: PlantSpec, exo_spec, backend=None):
        self.spec = spec
        self.exo = exo_spec
        self.plan = CrankNicolsonPlan(spec.a, spec.grid_m, spec.dt, backend)
        self.rot_full = expm2(exo_spec.g_matrix, spec.dt)
        self.rot_half = expm2(exo_spec.g_matrix, 0.5 * spec.dt)

    def initial_state(self):
        return PdeState(0.0, self.spec.w0.copy(), self.exo.p0.copy())

    def step_plant(self, state: PdeState, u_delayed):
        """One CN step; u_delayed is the boundary control sampled at t + dt/2 - tau."""
        spec = self.spec
        p_mid = self.rot_half @ state.p
        src = spec.d1_nodes @ p_mid
        src[0] -= float(spec.d2 @ p_mid) * self.plan.flux_scale
        src[-1] += (u_delayed + float(spec.d3 @ p_mid)) * self.plan.flux_scale
        w_new = np.empty_like(state.w)
        self.plan.step(state.w, src, w_new)
        return PdeState(state.t + spec.dt, w_new, self.rot_full @ state.p)

    def output(self, state: PdeState):
        return float(state.w[0])


class EpsilonSimulator:
    """Homogeneous-interior oracle: eps_t = eps_xx + a eps with a given end flux."""

    def __init__(self, a, grid_m, dt, backend=None):
        self.plan = CrankNicolsonPlan(a, grid_m, dt, backend)
        self.grid_m = grid_m
        self.dt = dt
        self._src = np.zeros(grid_m + 1)

    def step_epsilon(self, eps_values, end_flux):
        """Advance one dt with eps_x(0)=0 and eps_x(1)=end_flux (half-step value)."""
        self._src[-1] = end_flux * self.plan.flux_scale
        out = np.empty_like(eps_values)
        self.plan.step(eps_values, self._src, out)
        return out


def write_snapshot_csv(path, x, times, states):
    """State snapshots: header row 't' + x nodes, then one timestamped row each."""
    with open(path, "w") as fh:
        fh.write(",".join(["t"] + [f"{xi:.17g}" for xi in x]) + "\n")
        for t, w in zip(times, states):
            fh.write(",".join([f"{t:.17g}"] + [f"{wi:.17g}" for wi in w]) + "\n")
