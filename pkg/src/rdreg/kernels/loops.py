"""Loop kernels shared by both backends.

Every function here is written in njit-compatible style (scalar math, no
temporaries in hot loops). The numba backend compiles them lazily with
``numba.njit(cache=True)``; the numpy backend calls the same source
uncompiled. Array arguments are float64/complex128 and contiguous.
"""

import math

_COMPILED = {}


def compiled(name):
    """Lazily njit-compile a kernel by name (cached per process and on disk)."""
    fn = _COMPILED.get(name)
    if fn is None:
        from numba import njit

        fn = njit(cache=True, fastmath=False)(globals()[name])
        _COMPILED[name] = fn
    return fn


def get(name, backend):
    if backend == "numba":
        return compiled(name)
    return globals()[name]


def jacobi_eigh(A, V, off_tol, max_sweeps):
    """Cyclic Jacobi diagonalization of symmetric A (overwritten in place).

    V must start as the identity; on return diag(A) holds the (unsorted)
    eigenvalues and the columns of V the eigenvectors. off_tol bounds the
    sum of squared off-diagonal entries at convergence.
    """
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += A[i, j] * A[i, j]
        if off <= off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = 0.5 * (aqq - app) / apq
                t = 1.0 / (abs(theta) + math.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = akp - s * (akq + tau * akp)
                        A[p, k] = A[k, p]
                        A[k, q] = akq + s * (akp - tau * akq)
                        A[q, k] = A[k, q]
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = vkp - s * (vkq + tau * vkp)
                    V[k, q] = vkq + s * (vkp - tau * vkq)
    return A, V


def cn_step_thomas(w, src, dt, bd, be, bi, melim, dprime, cupper, out):
    """One Crank-Nicolson step via a prefactored Thomas solve.

    RHS matrix has uniform diagonal bd, edge off-diagonal be (ghost-node
    doubling) and interior off-diagonal bi. melim/dprime/cupper are the
    precomputed LU data of the constant LHS tridiagonal system. out is used
    as the work buffer and receives the new state.
    """
    n = w.shape[0]
    out[0] = bd * w[0] + be * w[1] + dt * src[0]
    for i in range(1, n - 1):
        out[i] = bd * w[i] + bi * (w[i - 1] + w[i + 1]) + dt * src[i]
    out[n - 1] = bd * w[n - 1] + be * w[n - 2] + dt * src[n - 1]
    for i in range(1, n):
        out[i] -= melim[i] * out[i - 1]
    out[n - 1] /= dprime[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = (out[i] - cupper[i] * out[i + 1]) / dprime[i]
    return out


def adaptive_rk4(xi, chi1, ph, th, yd0, yd1, dt, iota, kap0, kap1):
    """One RK4 step of the adaptive frequency/amplitude estimator.

    The driving measurement is interpolated linearly between yd0 (step
    start) and yd1 (step end). Returns the four updated states.
    """
    ydm = 0.5 * (yd0 + yd1)

    a_xi = -iota * xi - yd0
    a_ch = ph + iota * yd0 + th * xi + kap0 * (yd0 - chi1)
    a_ph = -iota * ph - iota * iota * yd0
    a_th = kap1 * xi * (yd0 - chi1)

    x2 = xi + 0.5 * dt * a_xi
    c2 = chi1 + 0.5 * dt * a_ch
    p2 = ph + 0.5 * dt * a_ph
    t2 = th + 0.5 * dt * a_th
    b_xi = -iota * x2 - ydm
    b_ch = p2 + iota * ydm + t2 * x2 + kap0 * (ydm - c2)
    b_ph = -iota * p2 - iota * iota * ydm
    b_th = kap1 * x2 * (ydm - c2)

    x3 = xi + 0.5 * dt * b_xi
    c3 = chi1 + 0.5 * dt * b_ch
    p3 = ph + 0.5 * dt * b_ph
    t3 = th + 0.5 * dt * b_th
    c_xi = -iota * x3 - ydm
    c_ch = p3 + iota * ydm + t3 * x3 + kap0 * (ydm - c3)
    c_ph = -iota * p3 - iota * iota * ydm
    c_th = kap1 * x3 * (ydm - c3)

    x4 = xi + dt * c_xi
    c4 = chi1 + dt * c_ch
    p4 = ph + dt * c_ph
    t4 = th + dt * c_th
    d_xi = -iota * x4 - yd1
    d_ch = p4 + iota * yd1 + t4 * x4 + kap0 * (yd1 - c4)
    d_ph = -iota * p4 - iota * iota * yd1
    d_th = kap1 * x4 * (yd1 - c4)

    sixth = dt / 6.0
    return (
        xi + sixth * (a_xi + 2.0 * (b_xi + c_xi) + d_xi),
        chi1 + sixth * (a_ch + 2.0 * (b_ch + c_ch) + d_ch),
        ph + sixth * (a_ph + 2.0 * (b_ph + c_ph) + d_ph),
        th + sixth * (a_th + 2.0 * (b_th + c_th) + d_th),
    )


def integrate_row_ivp(h, n, a00, a01, a10, a11, forcing, y00, y01, dy00, dy01, out_y, out_dy):
    """RK4 for the row-valued second-order IVP y'' = y A + F(x) on [0, 1].

    forcing holds F sampled at half-step resolution ((2n+1, 2)); out_y and
    out_dy ((n+1, 2)) receive y and y' at the n+1 grid nodes. Row-matrix
    products use (yA)_j = y0 A[0,j] + y1 A[1,j].
    """
    y0 = y00
    y1 = y01
    d0 = dy00
    d1 = dy01
    out_y[0, 0] = y0
    out_y[0, 1] = y1
    out_dy[0, 0] = d0
    out_dy[0, 1] = d1
    for i in range(n):
        fl0 = forcing[2 * i, 0]
        fl1 = forcing[2 * i, 1]
        fm0 = forcing[2 * i + 1, 0]
        fm1 = forcing[2 * i + 1, 1]
        fr0 = forcing[2 * i + 2, 0]
        fr1 = forcing[2 * i + 2, 1]

        k1y0 = d0
        k1y1 = d1
        k1d0 = y0 * a00 + y1 * a10 + fl0
        k1d1 = y0 * a01 + y1 * a11 + fl1

        ty0 = y0 + 0.5 * h * k1y0
        ty1 = y1 + 0.5 * h * k1y1
        k2y0 = d0 + 0.5 * h * k1d0
        k2y1 = d1 + 0.5 * h * k1d1
        k2d0 = ty0 * a00 + ty1 * a10 + fm0
        k2d1 = ty0 * a01 + ty1 * a11 + fm1

        ty0 = y0 + 0.5 * h * k2y0
        ty1 = y1 + 0.5 * h * k2y1
        k3y0 = d0 + 0.5 * h * k2d0
        k3y1 = d1 + 0.5 * h * k2d1
        k3d0 = ty0 * a00 + ty1 * a10 + fm0
        k3d1 = ty0 * a01 + ty1 * a11 + fm1

        ty0 = y0 + h * k3y0
        ty1 = y1 + h * k3y1
        k4y0 = d0 + h * k3d0
        k4y1 = d1 + h * k3d1
        k4d0 = ty0 * a00 + ty1 * a10 + fr0
        k4d1 = ty0 * a01 + ty1 * a11 + fr1

        sixth = h / 6.0
        y0 += sixth * (k1y0 + 2.0 * (k2y0 + k3y0) + k4y0)
        y1 += sixth * (k1y1 + 2.0 * (k2y1 + k3y1) + k4y1)
        d0 += sixth * (k1d0 + 2.0 * (k2d0 + k3d0) + k4d0)
        d1 += sixth * (k1d1 + 2.0 * (k2d1 + k3d1) + k4d1)
        out_y[i + 1, 0] = y0
        out_y[i + 1, 1] = y1
        out_dy[i + 1, 0] = d0
        out_dy[i + 1, 1] = d1
    return out_y, out_dy


def integrate_scalar_ivp_cplx(h, n, alpha, forcing, u0, du0, out_u, out_du):
    """RK4 for the complex scalar IVP u'' = alpha u + F(x) on [0, 1].

    forcing is real, sampled at half-step resolution (2n+1,). Used by the
    observer-decoupler solve after projecting onto the rotation generator's
    complex eigenbasis.
    """
    u = u0 + 0.0j
    du = du0 + 0.0j
    out_u[0] = u
    out_du[0] = du
    for i in range(n):
        fl = forcing[2 * i]
        fm = forcing[2 * i + 1]
        fr = forcing[2 * i + 2]

        k1u = du
        k1d = alpha * u + fl
        k2u = du + 0.5 * h * k1d
        k2d = alpha * (u + 0.5 * h * k1u) + fm
        k3u = du + 0.5 * h * k2d
        k3d = alpha * (u + 0.5 * h * k2u) + fm
        k4u = du + h * k3d
        k4d = alpha * (u + h * k3u) + fr

        sixth = h / 6.0
        u += sixth * (k1u + 2.0 * (k2u + k3u) + k4u)
        du += sixth * (k1d + 2.0 * (k2d + k3d) + k4d)
        out_u[i + 1] = u
        out_du[i + 1] = du
    return out_u, out_du
