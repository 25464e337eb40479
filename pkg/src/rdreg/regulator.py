"""Runtime control stack: state observer, adaptive frequency observer, the
tracking-error feedback law, and the closed-loop / baseline drivers.

Per step the driver measures the tracking error, forms the observer
innovation, assembles the control from the current estimate snapshot,
pushes it into the delay line, then advances plant, state observer, and
adaptive observer. The controller map snapshot is refreshed only when the
frequency estimate has moved past a threshold, never more than once per
`refresh_min_steps` steps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import resolve_backend
from .errors import ContractError
from .exo import ExoSpec
from .kernels import loops
from .modal import ModalBasis, build_basis, project_vector, project_rows
from .numkit import companion_generator, expm2
from .plantsim import DelayLine, PlantSimulator, PlantSpec, EpsilonSimulator
from .regeq import (
    InjectionProfile,
    RegulatorMaps,
    build_injection_profile,
    solve_controller_map,
)


@dataclass(frozen=True)
class ControllerConfig:
    """Constants of the assembled feedback law."""

    gains: np.ndarray  # modal gain row (N+1,)
    tau: float
    refresh_threshold: float = 1e-3
    refresh_min_steps: int = 10
    theta_floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float).reshape(-1))


@dataclass(frozen=True)
class ControlSnapshot:
    """Controller map pieces frozen at one frequency estimate."""

    theta: float
    modal_rows: np.ndarray  # (N+1, 2) modal coefficients of the map
    end_slope: np.ndarray  # (2,) map derivative at x = 1


def make_control_snapshot(theta, a, injection, basis: ModalBasis, n_modes, backend=None):
    cmap = solve_controller_map(theta, a, injection, basis.grid_m, backend=backend)
    rows = project_rows(cmap.values, basis, n_modes + 1)
    return ControlSnapshot(float(theta), rows, cmap.end_slope.copy())


def control_law(eps_hat_values, theta_hat, dhat, snapshot: ControlSnapshot,
                cfg: ControllerConfig, basis: ModalBasis):
    """Three-term feedback: modal state term, map-times-estimate term, and
    the delay-compensated cancellation term."""
    k = cfg.gains
    proj = project_vector(eps_hat_values, basis, k.shape[0])
    theta_c = max(theta_hat, cfg.theta_floor)
    rot = expm2(companion_generator(theta_c), cfg.tau)
    return float(k @ proj + (k @ snapshot.modal_rows) @ dhat - snapshot.end_slope @ (rot @ dhat))


def feedforward_law(eps_bar, gains, ff_row, p):
    """Full-information law: modal feedback plus exact disturbance cancellation."""
    return float(np.asarray(gains, float) @ eps_bar + np.asarray(ff_row, float) @ p)


class StateObserver:
    """Copy of the decoupled error system driven by the measured tracking error."""

    def __init__(self, injection: InjectionProfile, plan, eps_hat0):
        self.injection = injection
        self.plan = plan
        self.values = np.asarray(eps_hat0, dtype=float).copy()
        if self.values.shape[0] != plan.grid_m + 1:
            raise ContractError("observer initial state does not match the grid")

    def step(self, y_e, u_delayed_mid):
        """CN step; innovation explicit at the current time, flux at midstep."""
        innov = self.values[0] - y_e
        src = self.injection.values * innov
        src[-1] += u_delayed_mid * self.plan.flux_scale
        out = np.empty_like(self.values)
        self.plan.step(self.values, src, out)
        self.values = out
        return innov


class AdaptiveObserver:
    """Four-state estimator for the disturbance amplitude pair and theta."""

    def __init__(self, iota, kappa0, kappa1, init=(0.0, 0.0, 0.0, 0.0), backend=None):
        if iota <= 0 or kappa0 <= 1.0 / (4.0 * iota) or kappa1 <= 0:
            raise ContractError("gains must satisfy iota > 0, kappa0 > 1/(4 iota), kappa1 > 0")
        self.iota = float(iota)
        self.kappa0 = float(kappa0)
        self.kappa1 = float(kappa1)
        self.xi, self.chi1, self.phi, self.theta = (float(v) for v in init)
        self._kern = loops.get("adaptive_rk4", resolve_backend(backend))

    def outputs(self):
        """Current estimates (d1, d2) of the canonical disturbance pair."""
        d1 = self.chi1
        d2 = self.phi + self.xi * self.theta + self.iota * self.chi1
        return d1, d2

    def step(self, yd_start, yd_end, dt):
        self.xi, self.chi1, self.phi, self.theta = self._kern(
            self.xi, self.chi1, self.phi, self.theta,
            yd_start, yd_end, dt, self.iota, self.kappa0, self.kappa1,
        )


def adaptive_manifold_init(harmonic, iota):
    """States putting the estimator on its zero-error manifold at t = 0."""
    d0 = harmonic.d_at(0.0)
    amp = complex(d0[0], -d0[1] / harmonic.omega)
    xi0 = (-amp / (iota + 1j * harmonic.omega)).real
    return (xi0, float(d0[0]), iota * iota * xi0, harmonic.theta)


@dataclass
class ClosedLoopTrace:
    t: np.ndarray
    y_p: np.ndarray
    y_ref: np.ndarray
    y_e: np.ndarray
    theta_hat: np.ndarray
    u: np.ndarray
    dcan1_hat: np.ndarray
    dcan2_hat: np.ndarray
    norm_eps_hat: np.ndarray
    max_abs_w: float = 0.0
    clamped_steps: int = 0
    refresh_count: int = 0
    snapshot_t: np.ndarray = None
    snapshot_w: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    COLUMNS = ("t", "y_p", "y_ref", "y_e", "theta_hat", "U", "dcan1_hat", "dcan2_hat", "norm_eps_hat")

    def write_csv(self, path, stride=1):
        cols = (self.t, self.y_p, self.y_ref, self.y_e, self.theta_hat,
                self.u, self.dcan1_hat, self.dcan2_hat, self.norm_eps_hat)
        idx = list(range(0, self.t.shape[0], stride))
        if idx[-1] != self.t.shape[0] - 1:
            idx.append(self.t.shape[0] - 1)
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for i in idx:
                fh.write(",".join(format(c[i], ".17g") for c in cols) + "\n")


def _steps_for(horizon, dt):
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(horizon - n_steps * dt) > 1e-9 * max(1.0, horizon):
        raise ContractError("horizon must be a positive multiple of dt")
    return n_steps


def run_closed_loop(plant: PlantSpec, exo_spec: ExoSpec, k_row, l_col,
                    iota, kappa0, kappa1, horizon, *,
                    backend=None,
                    eps_hat0=None,
                    adaptive_init=(0.0, 0.0, 0.0, 0.0),
                    theta_freeze=None,
                    cfg: ControllerConfig = None,
                    maps: RegulatorMaps = None,
                    record_diagnostics=False,
                    snapshot_stride=0):
    """Simulate the full output-feedback loop and emit the trace.

    The controller sees only the tracking error; plant and exosystem truth
    are used for the emitted reference/diagnostic series. When
    `record_diagnostics` is set, `maps` supplies the design profiles needed
    to track the internal error coordinates.
    """
    backend = resolve_backend(backend)
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    l_col = np.asarray(l_col, dtype=float).reshape(-1)
    if k_row.shape != l_col.shape:
        raise ContractError("controller and observer gains must share the modal order")
    n_modes = k_row.shape[0] - 1
    dt = plant.dt
    n_steps = _steps_for(horizon, dt)
    if cfg is None:
        cfg = ControllerConfig(k_row, plant.tau)

    basis = build_basis(n_modes, plant.grid_m)
    injection = build_injection_profile(l_col, basis)
    sim = PlantSimulator(plant, exo_spec, backend=backend)
    observer = StateObserver(injection, sim.plan,
                             plant.w0 if eps_hat0 is None else eps_hat0)
    adaptive = AdaptiveObserver(iota, kappa0, kappa1, adaptive_init, backend=backend)
    if theta_freeze is not None:
        adaptive.theta = float(theta_freeze)
    delay = DelayLine(plant.tau, dt)

    theta0 = max(adaptive.theta, cfg.theta_floor)
    snapshot = make_control_snapshot(theta0, plant.a, injection, basis, n_modes, backend=backend)
    last_refresh = 0
    refresh_count = 0
    clamped = 0

    size = n_steps + 1
    tr = ClosedLoopTrace(*(np.empty(size) for _ in range(9)))
    weights = basis.weights

    diag = {}
    if record_diagnostics:
        if maps is None:
            raise ContractError("diagnostics need the design maps")
        gamma_nodes = maps.gamma.values
        g_nodes = maps.g.values
        t_mat = maps.harmonic.transform
        eta = maps.harmonic.eta0.copy()
        rot_eta = expm2(maps.harmonic.rotation, dt)
        for name in ("norm_eps_tilde", "u_gap", "theta_err", "d_err", "y_d", "u_full_info"):
            diag[name] = np.empty(size)

    snap_t, snap_w = [], []
    state = sim.initial_state()
    max_abs_w = float(np.abs(state.w).max())

    for k in range(size):
        t = k * dt
        y_p = state.w[0]
        y_ref = float(exo_spec.d4 @ state.p)
        y_e = y_p - y_ref
        y_d = y_e - observer.values[0]
        d1h, d2h = adaptive.outputs()
        theta_hat = adaptive.theta
        if theta_hat < cfg.theta_floor:
            clamped += 1
        theta_c = max(theta_hat, cfg.theta_floor)

        if (abs(theta_c - snapshot.theta) > cfg.refresh_threshold
                and k - last_refresh >= cfg.refresh_min_steps):
            snapshot = make_control_snapshot(theta_c, plant.a, injection, basis,
                                             n_modes, backend=backend)
            last_refresh = k
            refresh_count += 1

        dhat = np.array([d1h, d2h])
        u = control_law(observer.values, theta_hat, dhat, snapshot, cfg, basis)

        tr.t[k] = t
        tr.y_p[k] = y_p
        tr.y_ref[k] = y_ref
        tr.y_e[k] = y_e
        tr.theta_hat[k] = theta_hat
        tr.u[k] = u
        tr.dcan1_hat[k] = d1h
        tr.dcan2_hat[k] = d2h
        tr.norm_eps_hat[k] = math.sqrt(max(weights @ (observer.values ** 2), 0.0))

        if record_diagnostics:
            eps_true = state.w - gamma_nodes @ state.p
            eps_part = eps_true - g_nodes @ eta
            eps_tilde = eps_part - observer.values
            diag["norm_eps_tilde"][k] = math.sqrt(max(weights @ (eps_tilde ** 2), 0.0))
            eps_bar_true = project_vector(eps_true, basis, n_modes + 1)
            u_fi = feedforward_law(eps_bar_true, k_row, np.array([1.0, 0.0]), eta)
            diag["u_full_info"][k] = u_fi
            diag["u_gap"][k] = abs(u - u_fi)
            diag["theta_err"][k] = abs(theta_hat - maps.harmonic.theta)
            d_true = t_mat @ eta
            diag["d_err"][k] = float(np.hypot(d1h - d_true[0], d2h - d_true[1]))
            diag["y_d"][k] = y_d

        if snapshot_stride and k % snapshot_stride == 0:
            snap_t.append(t)
            snap_w.append(state.w.copy())

        if k == n_steps:
            break

        delay.push(t, u)
        u_mid = delay.sample(t + 0.5 * dt - plant.tau)
        state = sim.step_plant(state, u_mid)
        observer.step(y_e, u_mid)
        max_abs_w = max(max_abs_w, float(np.abs(state.w).max()))
        if record_diagnostics:
            eta = rot_eta @ eta
        y_e_next = state.w[0] - float(exo_spec.d4 @ state.p)
        y_d_next = y_e_next - observer.values[0]
        adaptive.step(y_d, y_d_next, dt)
        if theta_freeze is not None:
            adaptive.theta = float(theta_freeze)

    tr.max_abs_w = max_abs_w
    tr.clamped_steps = clamped
    tr.refresh_count = refresh_count
    tr.diagnostics = diag
    if snapshot_stride:
        tr.snapshot_t = np.array(snap_t)
        tr.snapshot_w = np.array(snap_w)
    return tr


@dataclass
class BaselineTrace:
    t: np.ndarray
    y_e: np.ndarray
    u: np.ndarray
    eps_bar: np.ndarray  # (steps+1, N+1)
    norm_eps: np.ndarray
    eps_grids: np.ndarray = None  # (steps+1, M+1) when recorded
    u_gap: np.ndarray = None  # |u - feedforward target| when tracked


def run_feedforward(plant: PlantSpec, exo_spec: ExoSpec, maps: RegulatorMaps, k_row,
                    horizon, *, backend=None, record_eps=False):
    """Full-information baseline: simulate (w, p) under the exact feedforward law."""
    backend = resolve_backend(backend)
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    n_modes = k_row.shape[0] - 1
    dt = plant.dt
    n_steps = _steps_for(horizon, dt)
    basis = build_basis(n_modes, plant.grid_m)
    sim = PlantSimulator(plant, exo_spec, backend=backend)
    delay = DelayLine(plant.tau, dt)
    gamma_nodes = maps.gamma.values
    weights = basis.weights

    size = n_steps + 1
    out = BaselineTrace(
        np.empty(size), np.empty(size), np.empty(size),
        np.empty((size, n_modes + 1)), np.empty(size),
        np.empty((size, plant.grid_m + 1)) if record_eps else None,
    )
    state = sim.initial_state()
    for k in range(size):
        t = k * dt
        eps_nodes = state.w - gamma_nodes @ state.p
        eps_bar = project_vector(eps_nodes, basis, n_modes + 1)
        u = feedforward_law(eps_bar, k_row, maps.ff_row, state.p)
        out.t[k] = t
        out.y_e[k] = state.w[0] - float(exo_spec.d4 @ state.p)
        out.u[k] = u
        out.eps_bar[k] = eps_bar
        out.norm_eps[k] = math.sqrt(max(weights @ (eps_nodes ** 2), 0.0))
        if record_eps:
            out.eps_grids[k] = eps_nodes
        if k == n_steps:
            break
        delay.push(t, u)
        u_mid = delay.sample(t + 0.5 * dt - plant.tau)
        state = sim.step_plant(state, u_mid)
    return out


def run_epsilon_oracle(a, tau, grid_m, dt, k_row, ff_row, exo_spec: ExoSpec,
                       eps0, horizon, *, backend=None, record_eps=False):
    """Direct simulation of the transformed error system with its piecewise
    boundary law (cancellation transient before t = tau, delayed modal
    feedback afterwards). Test oracle only."""
    backend = resolve_backend(backend)
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    n_modes = k_row.shape[0] - 1
    n_steps = _steps_for(horizon, dt)
    basis = build_basis(n_modes, grid_m)
    sim = EpsilonSimulator(a, grid_m, dt, backend=backend)
    weights = basis.weights

    size = n_steps + 1
    out = BaselineTrace(
        np.empty(size), np.empty(size), np.empty(size),
        np.empty((size, n_modes + 1)), np.empty(size),
        np.empty((size, grid_m + 1)) if record_eps else None,
    )
    eps = np.asarray(eps0, dtype=float).copy()
    hist = np.empty((size, n_modes + 1))
    for k in range(size):
        t = k * dt
        eps_bar = project_vector(eps, basis, n_modes + 1)
        hist[k] = eps_bar
        out.t[k] = t
        out.y_e[k] = eps[0]
        out.eps_bar[k] = eps_bar
        out.u[k] = float(k_row @ eps_bar)
        out.norm_eps[k] = math.sqrt(max(weights @ (eps ** 2), 0.0))
        if record_eps:
            out.eps_grids[k] = eps
        if k == n_steps:
            break
        s_mid = t + 0.5 * dt
        if s_mid < tau:
            p_delayed = expm2(exo_spec.g_matrix, s_mid - tau) @ exo_spec.p0
            flux = -float(np.asarray(ff_row, float) @ p_delayed)
        else:
            pos = (s_mid - tau) / dt
            i0 = min(int(math.floor(pos)), k)
            frac = pos - i0
            row = hist[i0] if i0 >= k else hist[i0] + frac * (hist[i0 + 1] - hist[i0])
            flux = float(k_row @ row)
        eps = sim.step_epsilon(eps, flux)
    return out


def run_full_information(plant: PlantSpec, exo_spec: ExoSpec, maps: RegulatorMaps, k_row,
                         horizon, *, backend=None):
    """Drive the assembled control law with oracle-true (theta, d, state).

    Convergence check for the estimate-based law: with perfect estimates the
    output must approach the feedforward baseline.
    """
    backend = resolve_backend(backend)
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    n_modes = k_row.shape[0] - 1
    dt = plant.dt
    n_steps = _steps_for(horizon, dt)
    basis = build_basis(n_modes, plant.grid_m)
    cfg = ControllerConfig(k_row, plant.tau)
    injection = maps.injection
    snapshot = make_control_snapshot(maps.harmonic.theta, plant.a, injection, basis,
                                     n_modes, backend=backend)
    sim = PlantSimulator(plant, exo_spec, backend=backend)
    delay = DelayLine(plant.tau, dt)
    gamma_nodes = maps.gamma.values
    g_nodes = maps.g.values
    eta = maps.harmonic.eta0.copy()
    rot_eta = expm2(maps.harmonic.rotation, dt)
    t_mat = maps.harmonic.transform

    size = n_steps + 1
    out = BaselineTrace(
        np.empty(size), np.empty(size), np.empty(size),
        np.empty((size, n_modes + 1)), np.empty(size),
    )
    gap = np.empty(size)
    state = sim.initial_state()
    for k in range(size):
        t = k * dt
        eps_nodes = state.w - gamma_nodes @ state.p
        eps_part = eps_nodes - g_nodes @ eta
        d_true = t_mat @ eta
        u = control_law(eps_part, maps.harmonic.theta, d_true, snapshot, cfg, basis)
        eps_bar = project_vector(eps_nodes, basis, n_modes + 1)
        u_ff = feedforward_law(eps_bar, k_row, np.array([1.0, 0.0]), eta)
        out.t[k] = t
        out.y_e[k] = state.w[0] - float(exo_spec.d4 @ state.p)
        out.u[k] = u
        out.eps_bar[k] = eps_bar
        out.norm_eps[k] = math.sqrt(max(basis.weights @ (eps_nodes ** 2), 0.0))
        gap[k] = abs(u - u_ff)
        if k == n_steps:
            break
        delay.push(t, u)
        u_mid = delay.sample(t + 0.5 * dt - plant.tau)
        state = sim.step_plant(state, u_mid)
        eta = rot_eta @ eta
    out.u_gap = gap
    return out
