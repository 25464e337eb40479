"""Neumann-Laplacian eigenbasis on [0, 1], truncation rule, modal projection.

Eigenpairs: lambda_n = (n pi)^2 with phi_0 = 1 and phi_n = sqrt(2) cos(n pi x),
an orthonormal basis of L^2(0, 1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .numkit import composite_weights


@dataclass(frozen=True)
class ModalBasis:
    max_mode: int
    grid_m: int
    eigenvalues: np.ndarray  # (max_mode+1,)
    modes: np.ndarray  # (max_mode+1, grid_m+1) eigenfunction samples
    weights: np.ndarray  # quadrature weights on the grid

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.grid_m + 1)


def eigenfunction_values(n, x):
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x)
    return np.sqrt(2.0) * np.cos(n * np.pi * x)


def build_basis(max_mode, grid_m):
    if max_mode < 0:
        raise ContractError("max_mode must be >= 0")
    if grid_m < 2 or grid_m % 2 != 0:
        raise ContractError("grid_m must be even and >= 2")
    x = np.linspace(0.0, 1.0, grid_m + 1)
    lam = np.array([(n * np.pi) ** 2 for n in range(max_mode + 1)])
    modes = np.vstack([eigenfunction_values(n, x) for n in range(max_mode + 1)])
    return ModalBasis(max_mode, grid_m, lam, modes, composite_weights(grid_m, 1.0 / grid_m))


def min_truncation(a, delta):
    """Smallest N with -lambda_n + a < -delta for every n > N."""
    if delta <= 0:
        raise ContractError("decay rate must be positive")
    n = 0
    while ((n + 1) * np.pi) ** 2 <= a + delta:
        n += 1
    return n


def project(values, basis, n):
    """Modal coefficient <f, phi_n> by quadrature on the basis grid."""
    if n < 0 or n > basis.max_mode:
        raise ContractError(f"mode {n} outside basis range 0..{basis.max_mode}")
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != basis.grid_m + 1:
        raise ContractError("sample count does not match the basis grid")
    return values @ (basis.weights * basis.modes[n])


def project_vector(values, basis, count):
    """Stacked coefficients [<f, phi_0>, ..., <f, phi_{count-1}>]."""
    if count - 1 > basis.max_mode:
        raise ContractError("requested more modes than the basis holds")
    return (basis.weights * values) @ basis.modes[:count].T


def project_rows(values, basis, count):
    """Coefficients of a row-vector-valued sample array (M+1, k) -> (count, k)."""
    if count - 1 > basis.max_mode:
        raise ContractError("requested more modes than the basis holds")
    return basis.modes[:count] @ (basis.weights[:, None] * values)
