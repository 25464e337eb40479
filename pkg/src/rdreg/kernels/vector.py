"""Vectorized numpy implementations of the hot kernels (fallback path)."""

import numpy as np


def cn_step_dense(w, src, dt, bd, be, bi, inv_lhs, out):
    """Crank-Nicolson step using a precomputed dense inverse of the LHS.

    Same semantics as loops.cn_step_thomas; the O(M^2) matvec replaces the
    sequential Thomas sweeps so the whole step stays vectorized.
    """
    rhs = bd * w
    rhs[1:-1] += bi * (w[2:] + w[:-2])
    rhs[0] += be * w[1]
    rhs[-1] += be * w[-2]
    rhs += dt * src
    np.dot(inv_lhs, rhs, out=out)
    return out
