"""Reduced-order model, gain design, and machine-checkable stability certificates.

The controller condition is a delay-dependent matrix inequality, affine in
the five decision matrices once the gain row is fixed. Feasible points are
found by projected subgradient descent on the top eigenvalue (the decision
space is tiny), and every returned certificate is re-checked by direct
eigenvalue computation, so soundness never depends on the search path.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SynthesisError
from .numkit import composite_weights, lyap_solve, psd_project, sym_eig

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ReducedModel:
    """Modal truncation of the boundary-controlled error system."""

    a: float
    delta: float
    tau: float
    n: int  # truncation order; matrices have size n+1

    @property
    def size(self):
        return self.n + 1

    @property
    def a_mat(self):
        lam = np.array([(k * np.pi) ** 2 for k in range(self.size)])
        return np.diag(-lam + self.a)

    @property
    def b_col(self):
        return np.array([1.0] + [((-1.0) ** k) * SQRT2 for k in range(1, self.size)])

    @property
    def c_row(self):
        return np.array([1.0] + [SQRT2] * self.n)


def build_reduced(a, delta, tau, n):
    if n < 0:
        raise ContractError("truncation order must be >= 0")
    if delta <= 0 or tau < 0:
        raise ContractError("need delta > 0 and tau >= 0")
    return ReducedModel(float(a), float(delta), float(tau), int(n))


def place_single_input(a_mat, b_col, targets):
    """Ackermann placement: gains k with eig(A + b k) = targets."""
    a_mat = np.asarray(a_mat, dtype=float)
    b = np.asarray(b_col, dtype=float).reshape(-1)
    n = a_mat.shape[0]
    if len(targets) != n:
        raise ContractError("need one target per state")
    ctrb = np.empty((n, n))
    col = b.copy()
    for j in range(n):
        ctrb[:, j] = col
        col = a_mat @ col
    sv = np.linalg.svd(ctrb, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1e-30):
        raise SynthesisError("pair (A, B) numerically uncontrollable")
    chi = np.poly(np.asarray(targets, dtype=float))
    phi_a = np.zeros_like(a_mat)
    for c in chi:
        phi_a = phi_a @ a_mat + c * np.eye(n)
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    return -(e_last @ np.linalg.solve(ctrb, phi_a))


def _default_targets(model: ReducedModel, margin, spread):
    # Pull slow modes just past the decay rate; leave already-fast modes
    # near their open-loop positions (moving them right costs delayed gain
    # energy and breaks the matrix-inequality feasibility).
    open_eigs = np.diag(model.a_mat)
    return [
        min(-(model.delta + margin) - spread * k, open_eigs[k] - spread)
        for k in range(model.size)
    ]


def design_k(model: ReducedModel, margin=1.0, spread=0.3, targets=None):
    """Controller gain row placing eig(A + BK) at the targets."""
    if targets is None:
        targets = _default_targets(model, margin, spread)
    return place_single_input(model.a_mat, model.b_col, targets)


def design_l(model: ReducedModel, margin=1.0, spread=0.3, targets=None):
    """Observer gain column placing eig(A + LC) at the targets (dual placement)."""
    if targets is None:
        targets = _default_targets(model, margin, spread)
    row = place_single_input(model.a_mat.T, model.c_row, targets)
    return row.reshape(-1)


def build_phi(model: ReducedModel, k_row, p1, p2, p3, s, r):
    """Assemble the symmetric delay-LMI matrix from its six defined blocks."""
    n = model.size
    mats = [np.asarray(m, dtype=float) for m in (p1, p2, p3, s, r)]
    for m in mats:
        if m.shape != (n, n):
            raise ContractError("decision matrices must match the model size")
    p1, p2, p3, s, r = mats
    a = model.a_mat
    bk = np.outer(model.b_col, np.asarray(k_row, dtype=float).reshape(-1))
    ed = math.exp(-2.0 * model.delta * model.tau)
    f11 = a.T @ p2 + p2.T @ a + 2.0 * model.delta * p1 + s - ed * r
    f12 = p1 - p2.T + a.T @ p3
    f13 = ed * r + p2.T @ bk
    f22 = -p3 - p3.T + model.tau ** 2 * r
    f23 = p3.T @ bk
    f33 = -ed * (s + r)
    phi = np.block([[f11, f12, f13], [f12.T, f22, f23], [f13.T, f23.T, f33]])
    return 0.5 * (phi + phi.T)


@dataclass(frozen=True)
class ControllerFeasibility:
    feasible: bool
    margin: float  # top eigenvalue of the assembled inequality matrix
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    s: np.ndarray
    r: np.ndarray
    iterations: int
    seed: int


def _sym_count(n):
    return n * (n + 1) // 2


def _unpack_decision(z, n):
    mats = []
    idx = 0
    for _ in range(3):
        m = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                m[i, j] = m[j, i] = z[idx]
                idx += 1
        mats.append(m)
    p2 = z[idx:idx + n * n].reshape(n, n).copy()
    idx += n * n
    p3 = z[idx:idx + n * n].reshape(n, n).copy()
    p1, s, r = mats
    return p1, p2, p3, s, r


def _pack_decision(p1, p2, p3, s, r):
    n = p1.shape[0]
    out = []
    for m in (p1, s, r):
        for i in range(n):
            for j in range(i, n):
                out.append(m[i, j])
    out.extend(p2.ravel())
    out.extend(p3.ravel())
    return np.array(out)


def certify_controller(model: ReducedModel, k_row, seed=0, budget=20000,
                       floor=1e-2, stop_margin=-1e-3, backend=None):
    """Search for decision matrices certifying the closed delay inequality.

    Projected subgradient descent on the top eigenvalue, with the three
    positive-definite blocks floored at `floor` each iterate (the inequality
    is homogeneous, so the floor just fixes the scale). Returns the best
    point found; `feasible` reflects the recomputed margins only.
    """
    n = model.size
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    nz = 3 * _sym_count(n) + 2 * n * n
    zero = [np.zeros((n, n))] * 5
    phi0 = build_phi(model, k_row, *zero)
    basis = np.empty((nz, 3 * n, 3 * n))
    for idx in range(nz):
        e = np.zeros(nz)
        e[idx] = 1.0
        basis[idx] = build_phi(model, k_row, *_unpack_decision(e, n)) - phi0

    rng = np.random.default_rng(seed)
    z = rng.standard_normal(nz) * 0.5
    p1, p2, p3, s, r = _unpack_decision(z, n)
    p1, s, r = (psd_project(m, floor, backend=backend) for m in (p1, s, r))
    z = _pack_decision(p1, p2, p3, s, r)

    best = np.inf
    z_best = z.copy()
    it = 0
    for it in range(budget):
        phi = phi0 + np.tensordot(z, basis, axes=1)
        w, v = sym_eig(phi, backend=backend)
        top = w[-1]
        if top < best:
            best = top
            z_best = z.copy()
            if best <= stop_margin:
                break
        vec = v[:, -1]
        grad = basis @ vec @ vec
        norm = np.linalg.norm(grad)
        if norm > 0.0:
            z = z - (0.1 / (1.0 + it / 200.0)) * grad / norm
        p1, p2, p3, s, r = _unpack_decision(z, n)
        p1, s, r = (psd_project(m, floor, backend=backend) for m in (p1, s, r))
        z = _pack_decision(p1, p2, p3, s, r)

    p1, p2, p3, s, r = _unpack_decision(z_best, n)
    phi = build_phi(model, k_row, p1, p2, p3, s, r)
    margin = sym_eig(phi, backend=backend)[0][-1]
    min_eig = min(sym_eig(m, backend=backend)[0][0] for m in (p1, s, r))
    feasible = bool(margin <= -1e-8 and min_eig >= 1e-8)
    return ControllerFeasibility(feasible, float(margin), p1, p2, p3, s, r, it + 1, seed)


@dataclass(frozen=True)
class ObserverFeasibility:
    feasible: bool
    margin: float  # top eigenvalue of Q Acl + Acl^T Q + 2 delta Q
    abscissa: float  # spectral abscissa of A + LC
    q: np.ndarray


def certify_observer(model: ReducedModel, l_col, backend=None):
    """Constructive Lyapunov certificate for the observer gain."""
    l_col = np.asarray(l_col, dtype=float).reshape(-1)
    acl = model.a_mat + np.outer(l_col, model.c_row)
    abscissa = float(np.linalg.eigvals(acl).real.max())
    n = model.size
    if abscissa >= -model.delta:
        return ObserverFeasibility(False, float("nan"), abscissa, np.full((n, n), np.nan))
    q = lyap_solve(acl + model.delta * np.eye(n), np.eye(n))
    lhs = q @ acl + acl.T @ q + 2.0 * model.delta * q
    margin = sym_eig(0.5 * (lhs + lhs.T), backend=backend)[0][-1]
    q_min = sym_eig(q, backend=backend)[0][0]
    feasible = bool(margin <= -1e-8 and q_min >= 1e-8)
    return ObserverFeasibility(feasible, float(margin), abscissa, q)


@dataclass(frozen=True)
class GainCertificate:
    """Gains plus every matrix needed to re-check both inequalities offline."""

    a: float
    delta: float
    tau: float
    k_row: np.ndarray
    l_col: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    s: np.ndarray
    r: np.ndarray
    q: np.ndarray
    margin_phi: float
    margin_observer: float

    @property
    def n(self):
        return self.k_row.shape[0] - 1

    def model(self):
        return build_reduced(self.a, self.delta, self.tau, self.n)


def make_certificate(model, k_row, l_col, ctrl: ControllerFeasibility, obs: ObserverFeasibility):
    return GainCertificate(
        model.a, model.delta, model.tau,
        np.asarray(k_row, float).reshape(-1), np.asarray(l_col, float).reshape(-1),
        ctrl.p1, ctrl.p2, ctrl.p3, ctrl.s, ctrl.r, obs.q,
        ctrl.margin, obs.margin,
    )


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    margin_phi: float
    margin_observer: float
    min_eig_p1: float
    min_eig_s: float
    min_eig_r: float
    min_eig_q: float

    def lines(self):
        return [
            f"margin_phi = {self.margin_phi:.17g}",
            f"margin_observer = {self.margin_observer:.17g}",
            f"min_eig_p1 = {self.min_eig_p1:.17g}",
            f"min_eig_s = {self.min_eig_s:.17g}",
            f"min_eig_r = {self.min_eig_r:.17g}",
            f"min_eig_q = {self.min_eig_q:.17g}",
            f"verdict = {'pass' if self.ok else 'fail'}",
        ]


def verify_certificate(cert: GainCertificate, backend=None):
    """Re-derive both margins from the serialized matrices alone."""
    model = cert.model()
    phi = build_phi(model, cert.k_row, cert.p1, cert.p2, cert.p3, cert.s, cert.r)
    margin_phi = sym_eig(phi, backend=backend)[0][-1]
    acl = model.a_mat + np.outer(cert.l_col, model.c_row)
    lhs = cert.q @ acl + acl.T @ cert.q + 2.0 * model.delta * cert.q
    margin_obs = sym_eig(0.5 * (lhs + lhs.T), backend=backend)[0][-1]
    mins = [sym_eig(m, backend=backend)[0][0] for m in (cert.p1, cert.s, cert.r, cert.q)]
    ok = bool(
        margin_phi <= -1e-8
        and margin_obs <= -1e-8
        and all(v >= 1e-8 for v in mins)
    )
    return VerificationReport(ok, float(margin_phi), float(margin_obs), *map(float, mins))


# -- flat text serialization (17 significant digits; bit-exact round trip) --

def _fmt(x):
    return format(float(x), ".17g")


def save_certificate(cert: GainCertificate, path):
    blocks = [
        ("K", cert.k_row.reshape(1, -1)), ("L", cert.l_col.reshape(-1, 1)),
        ("P1", cert.p1), ("P2", cert.p2), ("P3", cert.p3),
        ("S", cert.s), ("R", cert.r), ("Q", cert.q),
    ]
    with open(path, "w") as fh:
        fh.write("rdreg-certificate 1\n")
        for name, val in (
            ("a", cert.a), ("delta", cert.delta), ("tau", cert.tau),
            ("margin_phi", cert.margin_phi), ("margin_observer", cert.margin_observer),
        ):
            fh.write(f"scalar {name} {_fmt(val)}\n")
        for name, mat in blocks:
            rows, cols = mat.shape
            fh.write(f"matrix {name} {rows} {cols}\n")
            for i in range(rows):
                fh.write(" ".join(_fmt(v) for v in mat[i]) + "\n")


def load_certificate(path):
    scalars = {}
    matrices = {}
    with open(path) as fh:
        header = fh.readline().split()
        if header[:1] != ["rdreg-certificate"]:
            raise ContractError(f"{path}: not a certificate file")
        line = fh.readline()
        while line:
            parts = line.split()
            if not parts:
                line = fh.readline()
                continue
            if parts[0] == "scalar":
                scalars[parts[1]] = float(parts[2])
            elif parts[0] == "matrix":
                name, rows, cols = parts[1], int(parts[2]), int(parts[3])
                mat = np.empty((rows, cols))
                for i in range(rows):
                    mat[i] = [float(v) for v in fh.readline().split()]
                matrices[name] = mat
            else:
                raise ContractError(f"{path}: unknown record {parts[0]!r}")
            line = fh.readline()
    try:
        return GainCertificate(
            scalars["a"], scalars["delta"], scalars["tau"],
            matrices["K"].reshape(-1), matrices["L"].reshape(-1),
            matrices["P1"], matrices["P2"], matrices["P3"],
            matrices["S"], matrices["R"], matrices["Q"],
            scalars["margin_phi"], scalars["margin_observer"],
        )
    except KeyError as exc:
        raise ContractError(f"{path}: missing record {exc}") from exc


# -- energy functionals over sampled traces --

def eval_lk_functional(times, eps_bar, p1, s, r, delta, tau):
    """Delay energy V1(t) = V0 + V_S + V_R over a uniformly sampled trace.

    Returns (times_out, v1) for the sample times with a full [t - tau, t]
    history window. The history derivative is taken by second-order
    differences; window integrals use the composite rule.
    """
    times = np.asarray(times, dtype=float)
    eps_bar = np.atleast_2d(np.asarray(eps_bar, dtype=float))
    if eps_bar.shape[0] != times.shape[0]:
        raise ContractError("trace and time arrays disagree")
    if times.shape[0] < 3:
        raise ContractError("insufficient history")
    dt = times[1] - times[0]
    if np.abs(np.diff(times) - dt).max() > 1e-9 * max(dt, 1e-30):
        raise ContractError("trace must be uniformly sampled")
    lag = tau / dt
    j = int(round(lag))
    if abs(lag - j) > 1e-6 or j < 1:
        raise ContractError("tau must be an integer multiple of the sampling step")
    if times.shape[0] <= j:
        raise ContractError("insufficient history")
    deriv = np.gradient(eps_bar, dt, axis=0)
    wts = composite_weights(j, dt)
    qs = np.einsum("ti,ij,tj->t", eps_bar, s, eps_bar)
    qr = np.einsum("ti,ij,tj->t", deriv, r, deriv)
    out_t = times[j:]
    v1 = np.empty(out_t.shape[0])
    for m, k in enumerate(range(j, times.shape[0])):
        window = slice(k - j, k + 1)
        ages = times[k] - times[window]
        decay = np.exp(-2.0 * delta * ages)
        v0 = eps_bar[k] @ p1 @ eps_bar[k]
        vs = wts @ (decay * qs[window])
        vr = tau * (wts @ ((tau - ages) * decay * qr[window]))
        v1[m] = v0 + vs + vr
    return out_t, v1


def eval_quadratic_energy(rows, q):
    """V2(t) = e(t)^T Q e(t) along a sampled trace."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return np.einsum("ti,ij,tj->t", rows, q, rows)
