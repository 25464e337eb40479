"""Dense linear algebra and quadrature primitives shared by all modules."""

from dataclasses import dataclass

import numpy as np

from ._backend import resolve_backend
from .errors import ContractError, ResonantSystemError
from .kernels import loops

SYM_TOL = 1e-12


@dataclass(frozen=True)
class GridFunction:
    """Samples of a scalar or row-vector function on the uniform grid of [0, 1].

    values has shape (M+1,) or (M+1, k); the grid is x_i = i/M.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] < 3:
            raise ContractError("grid needs at least 3 nodes")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[0] - 1

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.values.shape[0])

    @classmethod
    def from_callable(cls, fn, m):
        x = np.linspace(0.0, 1.0, m + 1)
        return cls(np.asarray(fn(x), dtype=float))


def require_symmetric(mat, what="matrix"):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ContractError(f"{what} must be square, got shape {mat.shape}")
    scale = max(1.0, np.abs(mat).max())
    if np.abs(mat - mat.T).max() > SYM_TOL * scale:
        raise ContractError(f"{what} is not symmetric within {SYM_TOL:g}*max(1,||M||)")
    return mat


def sym_eig(mat, backend=None):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as orthonormal columns).
    The numba backend runs a cyclic Jacobi sweep; the numpy fallback uses
    LAPACK through np.linalg.eigh. Both satisfy the same reconstruction
    contract, and the test suite checks each against an independent
    shifted-QR oracle.
    """
    mat = require_symmetric(mat)
    backend = resolve_backend(backend)
    if backend == "numpy":
        w, v = np.linalg.eigh(mat)
        return w, v
    a = np.array(mat, dtype=float, order="C")
    v = np.eye(a.shape[0])
    fro = np.linalg.norm(a)
    off_tol = (1e-15 * max(fro, 1e-30)) ** 2
    loops.get("jacobi_eigh", backend)(a, v, off_tol, 64)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def expm2(mat, t=1.0):
    """Matrix exponential e^{mat*t} for 2x2 matrices.

    Zero-diagonal generators (the rotation and companion families) use the
    exact trig/hyperbolic closed form; anything else falls back to
    scaling-and-squaring with an order-8 series.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ContractError(f"expm2 expects a 2x2 matrix, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ContractError("expm2 requires finite entries")
    if mat[0, 0] == 0.0 and mat[1, 1] == 0.0:
        # M^2 = (b*c) I for M = [[0, b], [c, 0]]
        bc = mat[0, 1] * mat[1, 0]
        if bc < 0.0:
            om = np.sqrt(-bc)
            cs = np.cos(om * t)
            sn_over = np.sin(om * t) / om
            return cs * np.eye(2) + sn_over * mat
        if bc > 0.0:
            mu = np.sqrt(bc)
            return np.cosh(mu * t) * np.eye(2) + (np.sinh(mu * t) / mu) * mat
        return np.eye(2) + t * mat
    return _expm_squaring(mat * t)


def _expm_squaring(x):
    nrm = np.abs(x).sum(axis=1).max()
    squarings = max(0, int(np.ceil(np.log2(max(nrm, 1e-300) / 0.5))))
    y = x / (2.0 ** squarings)
    term = np.eye(2)
    acc = np.eye(2)
    for k in range(1, 9):
        term = term @ y / k
        acc = acc + term
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def rotation_generator(omega):
    """Skew generator [[0, w], [-w, 0]] of the planar rotation group."""
    return np.array([[0.0, omega], [-omega, 0.0]])


def companion_generator(theta):
    """Companion-form harmonic generator [[0, 1], [-theta, 0]]."""
    return np.array([[0.0, 1.0], [-theta, 0.0]])


def lyap_solve(f, w):
    """Solve F^T Q + Q F = -W for symmetric Q (small dense Kronecker route)."""
    f = np.asarray(f, dtype=float)
    w = require_symmetric(w, "W")
    n = f.shape[0]
    if f.shape != (n, n) or w.shape != (n, n):
        raise ContractError("lyap_solve needs square F and W of equal size")
    eye = np.eye(n)
    kron = np.kron(eye, f.T) + np.kron(f.T, eye)
    sv = np.linalg.svd(kron, compute_uv=False)
    scale = max(sv[0], 1e-30)
    if sv[-1] <= 1e-12 * scale:
        raise ResonantSystemError(
            "F and -F share an eigenvalue (numerically); Lyapunov equation singular"
        )
    q = np.linalg.solve(kron, -w.reshape(-1)).reshape(n, n)
    return 0.5 * (q + q.T)


def composite_weights(m, h):
    """Quadrature weights on m+1 uniform nodes: Simpson if m even, trapezoid else."""
    w = np.empty(m + 1)
    if m % 2 == 0 and m >= 2:
        w[:] = 2.0
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    else:
        w[:] = 1.0
        w[0] = w[-1] = 0.5
        w *= h
    return w


def quad(values):
    """Integral of grid samples over [0, 1] (composite Simpson, M even)."""
    if isinstance(values, GridFunction):
        values = values.values
    values = np.asarray(values, dtype=float)
    m = values.shape[0] - 1
    return composite_weights(m, 1.0 / m) @ values


def psd_project(mat, floor=0.0, backend=None):
    """Clip the spectrum of a symmetric matrix at `floor`, keeping eigenvectors."""
    w, v = sym_eig(mat, backend=backend)
    w = np.maximum(w, floor)
    return (v * w) @ v.T
