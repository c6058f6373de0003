# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the hot kernels in ``ibimpb._core_py``.

Same function names, arguments and semantics as the NumPy fallback;
loops parallelize over independent output rows (OpenMP), so results are
bitwise reproducible for any thread count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport parallel, prange
from libc.math cimport exp, fmax, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef double FOUR_PI = 12.566370614359172


# ---------------------------------------------------------------------------
# WENO5 / Godunov stencils
# ---------------------------------------------------------------------------


cdef inline double _weno_biased(double v1, double v2, double v3,
                                double v4, double v5) noexcept nogil:
    cdef double s1, s2, s3, scale, eps, a1, a2, a3, c1, c2, c3
    s1 = (13.0 / 12.0) * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = (13.0 / 12.0) * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = (13.0 / 12.0) * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    scale = fmax(fmax(fmax(v1 * v1, v2 * v2), fmax(v3 * v3, v4 * v4)), v5 * v5)
    eps = 1e-6 * scale + 1e-99
    a1 = 0.1 / ((s1 + eps) * (s1 + eps))
    a2 = 0.6 / ((s2 + eps) * (s2 + eps))
    a3 = 0.3 / ((s3 + eps) * (s3 + eps))
    c1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    c2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    c3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    return (a1 * c1 + a2 * c2 + a3 * c3) / (a1 + a2 + a3)


# separate pm/pp helpers that return by value: prange privatization only
# covers variables assigned directly in the loop body
cdef inline double _weno_pm7(double f0, double f1, double f2, double f3,
                             double f4, double f5, double inv_h) noexcept nogil:
    return _weno_biased((f1 - f0) * inv_h, (f2 - f1) * inv_h,
                        (f3 - f2) * inv_h, (f4 - f3) * inv_h,
                        (f5 - f4) * inv_h)


cdef inline double _weno_pp7(double f1, double f2, double f3, double f4,
                             double f5, double f6, double inv_h) noexcept nogil:
    return _weno_biased((f6 - f5) * inv_h, (f5 - f4) * inv_h,
                        (f4 - f3) * inv_h, (f3 - f2) * inv_h,
                        (f2 - f1) * inv_h)


cdef inline double _god_sq_out(double pm, double pp) noexcept nogil:
    cdef double a = pm if pm > 0.0 else 0.0
    cdef double b = pp if pp < 0.0 else 0.0
    return fmax(a * a, b * b)


cdef inline double _god_sq_in(double pm, double pp) noexcept nogil:
    cdef double a = pm if pm < 0.0 else 0.0
    cdef double b = pp if pp > 0.0 else 0.0
    return fmax(a * a, b * b)


def weno_axis_pairs(double[:, :, ::1] pad, int g, double h, int axis):
    """Interior-shaped (pm, pp) arrays along one axis."""
    cdef Py_ssize_t n0 = pad.shape[0] - 2 * g
    cdef Py_ssize_t n1 = pad.shape[1] - 2 * g
    cdef Py_ssize_t n2 = pad.shape[2] - 2 * g
    pm_arr = np.empty((n0, n1, n2))
    pp_arr = np.empty((n0, n1, n2))
    cdef double[:, :, ::1] pm = pm_arr
    cdef double[:, :, ::1] pp = pp_arr
    cdef Py_ssize_t i, j, k, I, J, K
    cdef double inv_h = 1.0 / h
    for i in range(n0):
        I = i + g
        for j in range(n1):
            J = j + g
            for k in range(n2):
                K = k + g
                if axis == 0:
                    pm[i, j, k] = _weno_pm7(pad[I - 3, J, K], pad[I - 2, J, K],
                                            pad[I - 1, J, K], pad[I, J, K],
                                            pad[I + 1, J, K], pad[I + 2, J, K], inv_h)
                    pp[i, j, k] = _weno_pp7(pad[I - 2, J, K], pad[I - 1, J, K],
                                            pad[I, J, K], pad[I + 1, J, K],
                                            pad[I + 2, J, K], pad[I + 3, J, K], inv_h)
                elif axis == 1:
                    pm[i, j, k] = _weno_pm7(pad[I, J - 3, K], pad[I, J - 2, K],
                                            pad[I, J - 1, K], pad[I, J, K],
                                            pad[I, J + 1, K], pad[I, J + 2, K], inv_h)
                    pp[i, j, k] = _weno_pp7(pad[I, J - 2, K], pad[I, J - 1, K],
                                            pad[I, J, K], pad[I, J + 1, K],
                                            pad[I, J + 2, K], pad[I, J + 3, K], inv_h)
                else:
                    pm[i, j, k] = _weno_pm7(pad[I, J, K - 3], pad[I, J, K - 2],
                                            pad[I, J, K - 1], pad[I, J, K],
                                            pad[I, J, K + 1], pad[I, J, K + 2], inv_h)
                    pp[i, j, k] = _weno_pp7(pad[I, J, K - 2], pad[I, J, K - 1],
                                            pad[I, J, K], pad[I, J, K + 1],
                                            pad[I, J, K + 2], pad[I, J, K + 3], inv_h)
    return pm_arr, pp_arr


def hj_flow_rhs(double[:, :, ::1] pad, int g, double h, int nthreads=1):
    """RHS of d(phi)/dt = |grad phi| (front moving inward)."""
    cdef Py_ssize_t n0 = pad.shape[0] - 2 * g
    cdef Py_ssize_t n1 = pad.shape[1] - 2 * g
    cdef Py_ssize_t n2 = pad.shape[2] - 2 * g
    out_arr = np.empty((n0, n1, n2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, I, J, K
    cdef double inv_h = 1.0 / h
    cdef double pm, pp, acc
    for i in prange(n0, nogil=True, num_threads=nthreads, schedule='static'):
        I = i + g
        for j in range(n1):
            J = j + g
            for k in range(n2):
                K = k + g
                pm = _weno_pm7(pad[I - 3, J, K], pad[I - 2, J, K], pad[I - 1, J, K],
                               pad[I, J, K], pad[I + 1, J, K], pad[I + 2, J, K], inv_h)
                pp = _weno_pp7(pad[I - 2, J, K], pad[I - 1, J, K], pad[I, J, K],
                               pad[I + 1, J, K], pad[I + 2, J, K], pad[I + 3, J, K], inv_h)
                acc = _god_sq_in(pm, pp)
                pm = _weno_pm7(pad[I, J - 3, K], pad[I, J - 2, K], pad[I, J - 1, K],
                               pad[I, J, K], pad[I, J + 1, K], pad[I, J + 2, K], inv_h)
                pp = _weno_pp7(pad[I, J - 2, K], pad[I, J - 1, K], pad[I, J, K],
                               pad[I, J + 1, K], pad[I, J + 2, K], pad[I, J + 3, K], inv_h)
                acc = acc + _god_sq_in(pm, pp)
                pm = _weno_pm7(pad[I, J, K - 3], pad[I, J, K - 2], pad[I, J, K - 1],
                               pad[I, J, K], pad[I, J, K + 1], pad[I, J, K + 2], inv_h)
                pp = _weno_pp7(pad[I, J, K - 2], pad[I, J, K - 1], pad[I, J, K],
                               pad[I, J, K + 1], pad[I, J, K + 2], pad[I, J, K + 3], inv_h)
                acc = acc + _god_sq_in(pm, pp)
                out[i, j, k] = sqrt(acc)
    return out_arr


def hj_reinit_rhs(double[:, :, ::1] pad, double[:, :, ::1] sgn, int g,
                  double h, int nthreads=1):
    """RHS of the reinitialization equation with frozen smoothed sign."""
    cdef Py_ssize_t n0 = pad.shape[0] - 2 * g
    cdef Py_ssize_t n1 = pad.shape[1] - 2 * g
    cdef Py_ssize_t n2 = pad.shape[2] - 2 * g
    out_arr = np.empty((n0, n1, n2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, I, J, K
    cdef double inv_h = 1.0 / h
    cdef double pm, pp, acc, s
    for i in prange(n0, nogil=True, num_threads=nthreads, schedule='static'):
        I = i + g
        for j in range(n1):
            J = j + g
            for k in range(n2):
                K = k + g
                s = sgn[i, j, k]
                pm = _weno_pm7(pad[I - 3, J, K], pad[I - 2, J, K], pad[I - 1, J, K],
                               pad[I, J, K], pad[I + 1, J, K], pad[I + 2, J, K], inv_h)
                pp = _weno_pp7(pad[I - 2, J, K], pad[I - 1, J, K], pad[I, J, K],
                               pad[I + 1, J, K], pad[I + 2, J, K], pad[I + 3, J, K], inv_h)
                acc = _god_sq_out(pm, pp) if s > 0.0 else _god_sq_in(pm, pp)
                pm = _weno_pm7(pad[I, J - 3, K], pad[I, J - 2, K], pad[I, J - 1, K],
                               pad[I, J, K], pad[I, J + 1, K], pad[I, J + 2, K], inv_h)
                pp = _weno_pp7(pad[I, J - 2, K], pad[I, J - 1, K], pad[I, J, K],
                               pad[I, J + 1, K], pad[I, J + 2, K], pad[I, J + 3, K], inv_h)
                acc = acc + (_god_sq_out(pm, pp) if s > 0.0 else _god_sq_in(pm, pp))
                pm = _weno_pm7(pad[I, J, K - 3], pad[I, J, K - 2], pad[I, J, K - 1],
                               pad[I, J, K], pad[I, J, K + 1], pad[I, J, K + 2], inv_h)
                pp = _weno_pp7(pad[I, J, K - 2], pad[I, J, K - 1], pad[I, J, K],
                               pad[I, J, K + 1], pad[I, J, K + 2], pad[I, J, K + 3], inv_h)
                acc = acc + (_god_sq_out(pm, pp) if s > 0.0 else _god_sq_in(pm, pp))
                out[i, j, k] = -s * (sqrt(acc) - 1.0)
    return out_arr


def weno_gradient(double[:, :, ::1] pad, int g, double h, int nthreads=1):
    """(pm+pp)/2 gradient per axis on the interior."""
    cdef Py_ssize_t n0 = pad.shape[0] - 2 * g
    cdef Py_ssize_t n1 = pad.shape[1] - 2 * g
    cdef Py_ssize_t n2 = pad.shape[2] - 2 * g
    gx_arr = np.empty((n0, n1, n2))
    gy_arr = np.empty((n0, n1, n2))
    gz_arr = np.empty((n0, n1, n2))
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gy = gy_arr
    cdef double[:, :, ::1] gz = gz_arr
    cdef Py_ssize_t i, j, k, I, J, K
    cdef double inv_h = 1.0 / h
    cdef double pm, pp
    for i in prange(n0, nogil=True, num_threads=nthreads, schedule='static'):
        I = i + g
        for j in range(n1):
            J = j + g
            for k in range(n2):
                K = k + g
                pm = _weno_pm7(pad[I - 3, J, K], pad[I - 2, J, K], pad[I - 1, J, K],
                               pad[I, J, K], pad[I + 1, J, K], pad[I + 2, J, K], inv_h)
                pp = _weno_pp7(pad[I - 2, J, K], pad[I - 1, J, K], pad[I, J, K],
                               pad[I + 1, J, K], pad[I + 2, J, K], pad[I + 3, J, K], inv_h)
                gx[i, j, k] = 0.5 * (pm + pp)
                pm = _weno_pm7(pad[I, J - 3, K], pad[I, J - 2, K], pad[I, J - 1, K],
                               pad[I, J, K], pad[I, J + 1, K], pad[I, J + 2, K], inv_h)
                pp = _weno_pp7(pad[I, J - 2, K], pad[I, J - 1, K], pad[I, J, K],
                               pad[I, J + 1, K], pad[I, J + 2, K], pad[I, J + 3, K], inv_h)
                gy[i, j, k] = 0.5 * (pm + pp)
                pm = _weno_pm7(pad[I, J, K - 3], pad[I, J, K - 2], pad[I, J, K - 1],
                               pad[I, J, K], pad[I, J, K + 1], pad[I, J, K + 2], inv_h)
                pp = _weno_pp7(pad[I, J, K - 2], pad[I, J, K - 1], pad[I, J, K],
                               pad[I, J, K + 1], pad[I, J, K + 2], pad[I, J, K + 3], inv_h)
                gz[i, j, k] = 0.5 * (pm + pp)
    return gx_arr, gy_arr, gz_arr


# ---------------------------------------------------------------------------
# Distance-to-union-of-spheres fill
# ---------------------------------------------------------------------------


def vdw_fill(double[:, :, :] out, double[::1] origin, double h,
             double[:, ::1] centers, double[::1] radii, double cap,
             int nthreads=1):
    cdef Py_ssize_t n0 = out.shape[0]
    cdef Py_ssize_t n1 = out.shape[1]
    cdef Py_ssize_t n2 = out.shape[2]
    cdef Py_ssize_t na = centers.shape[0]
    cdef Py_ssize_t i, j, k, a
    cdef Py_ssize_t lo0, lo1, lo2, hi0, hi1, hi2
    cdef double cx, cy, cz, r, reach, dx, dy, dz, d
    for i in prange(n0, nogil=True, num_threads=nthreads, schedule='static'):
        for j in range(n1):
            for k in range(n2):
                out[i, j, k] = cap
    # per-atom window updates; serial over atoms to avoid write races
    for a in range(na):
        cx = centers[a, 0]
        cy = centers[a, 1]
        cz = centers[a, 2]
        r = radii[a]
        reach = r + cap
        lo0 = <Py_ssize_t>((cx - reach - origin[0]) / h + 0.999999999999)
        lo1 = <Py_ssize_t>((cy - reach - origin[1]) / h + 0.999999999999)
        lo2 = <Py_ssize_t>((cz - reach - origin[2]) / h + 0.999999999999)
        hi0 = <Py_ssize_t>((cx + reach - origin[0]) / h) + 1
        hi1 = <Py_ssize_t>((cy + reach - origin[1]) / h) + 1
        hi2 = <Py_ssize_t>((cz + reach - origin[2]) / h) + 1
        if lo0 < 0: lo0 = 0
        if lo1 < 0: lo1 = 0
        if lo2 < 0: lo2 = 0
        if hi0 > n0: hi0 = n0
        if hi1 > n1: hi1 = n1
        if hi2 > n2: hi2 = n2
        for i in range(lo0, hi0):
            dx = origin[0] + i * h - cx
            for j in range(lo1, hi1):
                dy = origin[1] + j * h - cy
                for k in range(lo2, hi2):
                    dz = origin[2] + k * h - cz
                    d = sqrt(dx * dx + dy * dy + dz * dz) - r
                    if d < out[i, j, k]:
                        out[i, j, k] = d
    return np.asarray(out)


# ---------------------------------------------------------------------------
# Fused four-kernel pair interactions
# ---------------------------------------------------------------------------


cdef inline void _pair_accumulate(double xi0, double xi1, double xi2,
                                  double ni0, double ni1, double ni2,
                                  double yj0, double yj1, double yj2,
                                  double nj0, double nj1, double nj2,
                                  double wr1, double wr2,
                                  double theta1, double theta2, double kappa,
                                  double tau2, double rloc2, double cnear,
                                  double* o1, double* o2) noexcept nogil:
    cdef double dx0 = xi0 - yj0
    cdef double dx1 = xi1 - yj1
    cdef double dx2 = xi2 - yj2
    cdef double r2 = dx0 * dx0 + dx1 * dx1 + dx2 * dx2
    cdef double ndd = ni0 * dx0 + ni1 * dx1 + ni2 * dx2
    cdef double r, er, inv_r3, okr, qkr, nydd, nn, k11, k12, k21, k22
    if r2 - ndd * ndd < tau2 and r2 < rloc2:
        o1[0] -= cnear * wr2
        return
    r = sqrt(r2)
    er = exp(-kappa * r)
    inv_r3 = 1.0 / (r2 * r)
    okr = (1.0 + kappa * r) * er
    qkr = (3.0 + (3.0 + kappa * r) * kappa * r) * er
    nydd = nj0 * dx0 + nj1 * dx1 + nj2 * dx2
    nn = ni0 * nj0 + ni1 * nj1 + ni2 * nj2
    k11 = nydd * (1.0 - theta1 * okr) * inv_r3
    k12 = (1.0 - er) / r
    k21 = nn * (1.0 - okr) * inv_r3 - ndd * nydd * (3.0 - qkr) * inv_r3 / r2
    k22 = -ndd * (1.0 - theta2 * okr) * inv_r3
    o1[0] += (k11 * wr1 - k12 * wr2) / FOUR_PI
    o2[0] += (k21 * wr1 - k22 * wr2) / FOUR_PI


def dense_pb_matvec(double[:, ::1] pts, double[:, ::1] nrm, double[::1] w,
                    double[::1] rho1, double[::1] rho2, double h3,
                    double theta1, double theta2, double kappa,
                    double tau, double rloc, double cnear, int nthreads=1):
    cdef Py_ssize_t m = pts.shape[0]
    out1_arr = np.empty(m)
    out2_arr = np.empty(m)
    cdef double[::1] out1 = out1_arr
    cdef double[::1] out2 = out2_arr
    cdef double tau2 = tau * tau
    cdef double rloc2 = rloc * rloc
    cdef Py_ssize_t i, j
    cdef double o1, o2, xi0, xi1, xi2, ni0, ni1, ni2
    for i in prange(m, nogil=True, num_threads=nthreads, schedule='static'):
        xi0 = pts[i, 0]
        xi1 = pts[i, 1]
        xi2 = pts[i, 2]
        ni0 = nrm[i, 0]
        ni1 = nrm[i, 1]
        ni2 = nrm[i, 2]
        o1 = 0.0
        o2 = 0.0
        for j in range(m):
            _pair_accumulate(xi0, xi1, xi2, ni0, ni1, ni2,
                             pts[j, 0], pts[j, 1], pts[j, 2],
                             nrm[j, 0], nrm[j, 1], nrm[j, 2],
                             w[j] * rho1[j], w[j] * rho2[j],
                             theta1, theta2, kappa, tau2, rloc2, cnear,
                             &o1, &o2)
        out1[i] = o1 * h3
        out2[i] = o2 * h3
    return out1_arr, out2_arr


# ---------------------------------------------------------------------------
# Treecode traversal
# ---------------------------------------------------------------------------


def tree_pb_traverse(double[:, ::1] node_center, double[::1] node_half,
                     int[:, ::1] node_child, long[::1] node_start,
                     long[::1] node_count, double[:, :, ::1] node_cheb,
                     double[:, :, ::1] node_far,
                     double[:, ::1] pts, double[:, ::1] nrm, double[::1] w,
                     double[::1] rho1, double[::1] rho2,
                     double theta1, double theta2, double kappa,
                     double tau, double rloc, double cnear,
                     double theta_mac, double guard, int nthreads=1):
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t p3 = node_cheb.shape[1]
    out1_arr = np.zeros(m)
    out2_arr = np.zeros(m)
    cdef double[::1] out1 = out1_arr
    cdef double[::1] out2 = out2_arr
    cdef double tau2 = tau * tau
    cdef double rloc2 = rloc * rloc
    cdef double sqrt3 = 1.7320508075688772
    cdef double inv_theta = 0.0
    if theta_mac > 0.0:
        inv_theta = 1.0 / theta_mac
    cdef Py_ssize_t i, t, c, mth, jj, s, e
    cdef int* stack
    cdef int sp, n, has_child
    cdef double xi0, xi1, xi2, ni0, ni1, ni2, o1, o2
    cdef double rb, thresh, d0, d1, d2, dd2
    cdef double dx0, dx1, dx2, r2, r, er, inv_r3, okr, qkr
    cdef double m1x, m1y, m1z, m2, dxdotm1, nxdotm1, ndd
    cdef double fac1, g0mgk, a_f, b_f, w22

    with nogil, parallel(num_threads=nthreads):
        stack = <int*> malloc(512 * sizeof(int))
        for i in prange(m, schedule='static'):
            xi0 = pts[i, 0]
            xi1 = pts[i, 1]
            xi2 = pts[i, 2]
            ni0 = nrm[i, 0]
            ni1 = nrm[i, 1]
            ni2 = nrm[i, 2]
            o1 = 0.0
            o2 = 0.0
            stack[0] = 0
            sp = 1
            while sp > 0:
                sp = sp - 1
                n = stack[sp]
                # open a cluster only when the gap to its bounding sphere
                # exceeds both theta^-1 radii and the regularization guard
                rb = node_half[n] * sqrt3
                thresh = rb + guard
                if inv_theta > 0.0 and rb + rb * inv_theta > thresh:
                    thresh = rb + rb * inv_theta
                d0 = xi0 - node_center[n, 0]
                d1 = xi1 - node_center[n, 1]
                d2 = xi2 - node_center[n, 2]
                dd2 = d0 * d0 + d1 * d1 + d2 * d2
                if dd2 >= thresh * thresh:
                    # far: contract interpolated kernels with cluster moments
                    for mth in range(p3):
                        dx0 = xi0 - node_cheb[n, mth, 0]
                        dx1 = xi1 - node_cheb[n, mth, 1]
                        dx2 = xi2 - node_cheb[n, mth, 2]
                        r2 = dx0 * dx0 + dx1 * dx1 + dx2 * dx2
                        r = sqrt(r2)
                        er = exp(-kappa * r)
                        inv_r3 = 1.0 / (r2 * r)
                        okr = (1.0 + kappa * r) * er
                        qkr = (3.0 + (3.0 + kappa * r) * kappa * r) * er
                        m1x = node_far[n, 0, mth]
                        m1y = node_far[n, 1, mth]
                        m1z = node_far[n, 2, mth]
                        m2 = node_far[n, 3, mth]
                        dxdotm1 = dx0 * m1x + dx1 * m1y + dx2 * m1z
                        nxdotm1 = ni0 * m1x + ni1 * m1y + ni2 * m1z
                        ndd = ni0 * dx0 + ni1 * dx1 + ni2 * dx2
                        fac1 = (1.0 - theta1 * okr) * inv_r3
                        g0mgk = (1.0 - er) / r
                        a_f = (1.0 - okr) * inv_r3
                        b_f = (3.0 - qkr) * inv_r3 / r2
                        w22 = -ndd * (1.0 - theta2 * okr) * inv_r3
                        o1 = o1 + (fac1 * dxdotm1 - g0mgk * m2) / FOUR_PI
                        o2 = o2 + (a_f * nxdotm1 - b_f * ndd * dxdotm1 - w22 * m2) / FOUR_PI
                else:
                    has_child = 0
                    for c in range(8):
                        if node_child[n, c] >= 0:
                            stack[sp] = node_child[n, c]
                            sp = sp + 1
                            has_child = 1
                    if has_child == 0:
                        s = node_start[n]
                        e = s + node_count[n]
                        for jj in range(s, e):
                            _pair_accumulate(xi0, xi1, xi2, ni0, ni1, ni2,
                                             pts[jj, 0], pts[jj, 1], pts[jj, 2],
                                             nrm[jj, 0], nrm[jj, 1], nrm[jj, 2],
                                             w[jj] * rho1[jj], w[jj] * rho2[jj],
                                             theta1, theta2, kappa, tau2, rloc2,
                                             cnear, &o1, &o2)
            out1[i] = o1
            out2[i] = o2
        free(stack)
    return out1_arr, out2_arr
