"""Pure NumPy implementations of the hot kernels.

This module is the fallback twin of the compiled extension
:mod:`ibimpb._core`.  Both expose the same functions with the same
semantics; :mod:`ibimpb.backend` picks whichever is available.  The
NumPy versions are vectorized but allocate temporaries freely, so they
are meant for small and medium grids and for cross-checking the
compiled code, not for production-size runs.

Conventions shared by both backends:

* scalar fields are padded arrays with ``g`` ghost layers per side;
  functions return interior-shaped arrays,
* WENO finite differences follow the classic five-stencil weighted
  form with smoothness regularization ``1e-6 * max(v_k^2) + 1e-99``,
* the Godunov combination for ``|grad(phi)|`` uses, per axis,
  ``max(max(pm,0)^2, min(pp,0)^2)`` for fronts moving along +normal
  and the mirrored form for the opposite direction,
* pair interactions use the regularized four-kernel fused evaluation
  (see :mod:`ibimpb.kernels` for the scalar reference).
"""

import numpy as np

FOUR_PI = 4.0 * np.pi

# ---------------------------------------------------------------------------
# WENO5 / Godunov stencils
# ---------------------------------------------------------------------------


def _weno_combine(v1, v2, v3, v4, v5):
    s1 = (13.0 / 12.0) * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = (13.0 / 12.0) * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = (13.0 / 12.0) * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    scale = v1 * v1
    for v in (v2, v3, v4, v5):
        scale = np.maximum(scale, v * v)
    eps = 1e-6 * scale + 1e-99
    a1 = 0.1 / (s1 + eps) ** 2
    a2 = 0.6 / (s2 + eps) ** 2
    a3 = 0.3 / (s3 + eps) ** 2
    c1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    c2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    c3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    return (a1 * c1 + a2 * c2 + a3 * c3) / (a1 + a2 + a3)


def _diff_slices(pad, g, axis, offsets):
    """Slices of the one-sided difference array at node-relative offsets.

    The difference array ``D[k] = (pad[k+1] - pad[k])`` lives on half
    indices; offset ``o`` selects ``D[i + g + o]`` for interior node
    ``i`` along ``axis`` while the other axes are restricted to the
    interior.
    """
    n_ax = pad.shape[axis] - 2 * g
    D = np.diff(pad, axis=axis)
    views = []
    for off in offsets:
        idx = []
        for ax in range(3):
            if ax == axis:
                idx.append(slice(g + off, g + off + n_ax))
            else:
                idx.append(slice(g, pad.shape[ax] - g))
        views.append(D[tuple(idx)])
    return views


def weno_axis_pairs(pad, g, h, axis):
    """Left/right biased fifth order WENO derivative pair along ``axis``."""
    vm = _diff_slices(pad, g, axis, (-3, -2, -1, 0, 1))
    vp = _diff_slices(pad, g, axis, (2, 1, 0, -1, -2))
    inv_h = 1.0 / h
    pm = _weno_combine(*[v * inv_h for v in vm])
    pp = _weno_combine(*[v * inv_h for v in vp])
    return pm, pp


def _godunov_sq(pm, pp, outward):
    if outward:
        return np.maximum(np.maximum(pm, 0.0) ** 2, np.minimum(pp, 0.0) ** 2)
    return np.maximum(np.minimum(pm, 0.0) ** 2, np.maximum(pp, 0.0) ** 2)


def hj_flow_rhs(pad, g, h, nthreads=1):
    """Right-hand side of the inward eikonal flow, d(phi)/dt = |grad phi|.

    The front moves against the outward normal, hence the mirrored
    Godunov combination.
    """
    acc = None
    for axis in range(3):
        pm, pp = weno_axis_pairs(pad, g, h, axis)
        term = _godunov_sq(pm, pp, outward=False)
        acc = term if acc is None else acc + term
    return np.sqrt(acc)


def hj_reinit_rhs(pad, sgn, g, h, nthreads=1):
    """Right-hand side of the reinitialization equation.

    ``sgn`` is the frozen smoothed sign of the initial field on the
    interior.  Characteristics flow away from the zero level set, so
    positive-sign nodes use the outward Godunov combination and
    negative-sign nodes the mirrored one.
    """
    acc_out = None
    acc_in = None
    for axis in range(3):
        pm, pp = weno_axis_pairs(pad, g, h, axis)
        t_out = _godunov_sq(pm, pp, outward=True)
        t_in = _godunov_sq(pm, pp, outward=False)
        if acc_out is None:
            acc_out, acc_in = t_out, t_in
        else:
            acc_out += t_out
            acc_in += t_in
    norm = np.sqrt(np.where(sgn > 0.0, acc_out, acc_in))
    return -sgn * (norm - 1.0)


def weno_gradient(pad, g, h, nthreads=1):
    """Gradient approximation (pm+pp)/2 per axis on the interior."""
    grads = []
    for axis in range(3):
        pm, pp = weno_axis_pairs(pad, g, h, axis)
        grads.append(0.5 * (pm + pp))
    return tuple(grads)


# ---------------------------------------------------------------------------
# Distance-to-union-of-spheres fill
# ---------------------------------------------------------------------------


def vdw_fill(out, origin, h, centers, radii, cap, nthreads=1):
    """In-place ``min_k(|x - z_k| - r_k)`` clamped above at ``cap``.

    Atoms only touch nodes inside the window where the sphere distance
    could undercut the clamp, which keeps the fill linear in atom count
    for fixed resolution.
    """
    out[...] = cap
    dims = out.shape
    for z, r in zip(centers, radii):
        reach = r + cap
        lo = np.maximum(np.ceil((z - reach - origin) / h).astype(np.int64), 0)
        hi = np.minimum(np.floor((z - origin + reach) / h).astype(np.int64) + 1,
                        np.asarray(dims, dtype=np.int64))
        if np.any(lo >= hi):
            continue
        ax = [origin[a] + h * np.arange(lo[a], hi[a]) - z[a] for a in range(3)]
        d2 = (ax[0][:, None, None] ** 2 + ax[1][None, :, None] ** 2
              + ax[2][None, None, :] ** 2)
        win = out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        np.minimum(win, np.sqrt(d2) - r, out=win)
    return out


# ---------------------------------------------------------------------------
# Fused four-kernel pair interactions
# ---------------------------------------------------------------------------


def _fused_pair_block(tx, tn, sy, sn, sw, srho1, srho2,
                      theta1, theta2, kappa, tau, rloc, cnear):
    """All-pairs fused evaluation between a target block and sources.

    Returns the two accumulated outputs for the block (without the h^3
    factor).  Near pairs (tangential distance < tau and true distance
    < rloc, both measured between surface projections) use the
    regularized values: K11 = K21 = K22 = 0 and K12 = cnear.
    """
    dx = tx[:, None, :] - sy[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", dx, dx)
    ndd = np.einsum("ik,ijk->ij", tn, dx)
    near = (r2 - ndd * ndd < tau * tau) & (r2 < rloc * rloc)

    r2s = np.where(near, 1.0, r2)
    r = np.sqrt(r2s)
    er = np.exp(-kappa * r)
    inv_r = 1.0 / r
    inv_r3 = inv_r / r2s
    okr = (1.0 + kappa * r) * er
    qkr = (3.0 + 3.0 * kappa * r + kappa * kappa * r2s) * er

    nydd = np.einsum("jk,ijk->ij", sn, dx)
    k11 = nydd * (1.0 - theta1 * okr) * inv_r3 / FOUR_PI
    k12 = (1.0 - er) * inv_r / FOUR_PI
    k21 = (np.einsum("ik,jk->ij", tn, sn) * (1.0 - okr) * inv_r3
           - ndd * nydd * (3.0 - qkr) * inv_r3 / r2s) / FOUR_PI
    k22 = -ndd * (1.0 - theta2 * okr) * inv_r3 / FOUR_PI

    k11 = np.where(near, 0.0, k11)
    k12 = np.where(near, cnear, k12)
    k21 = np.where(near, 0.0, k21)
    k22 = np.where(near, 0.0, k22)

    wr1 = sw * srho1
    wr2 = sw * srho2
    out1 = k11 @ wr1 - k12 @ wr2
    out2 = k21 @ wr1 - k22 @ wr2
    return out1, out2


def dense_pb_matvec(pts, nrm, w, rho1, rho2, h3, theta1, theta2,
                    kappa, tau, rloc, cnear, nthreads=1):
    """Dense application of the four-kernel block operator.

    out1 = h^3 sum_ج (K11 w rho1 - K12 w rho2), out2 analogous with
    K21/K22.  Diagonal lambda terms are added by the caller.
    """
    m = pts.shape[0]
    out1 = np.empty(m)
    out2 = np.empty(m)
    block = max(1, int(4.0e6 // max(m, 1)))
    for s in range(0, m, block):
        e = min(s + block, m)
        b1, b2 = _fused_pair_block(pts[s:e], nrm[s:e], pts, nrm, w, rho1, rho2,
                                   theta1, theta2, kappa, tau, rloc, cnear)
        out1[s:e] = b1
        out2[s:e] = b2
    out1 *= h3
    out2 *= h3
    return out1, out2


def _far_block(tx, tn, cheb, far, theta1, theta2, kappa):
    """Cluster far-field contribution for a block of targets.

    ``cheb`` is (P3, 3) interpolation nodes, ``far`` is the (4, P3)
    moment array: normal-weighted first-density moments (3 components)
    and plain second-density moments.
    """
    dx = tx[:, None, :] - cheb[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", dx, dx)
    r = np.sqrt(r2)
    er = np.exp(-kappa * r)
    inv_r = 1.0 / r
    inv_r3 = inv_r / r2
    okr = (1.0 + kappa * r) * er
    qkr = (3.0 + 3.0 * kappa * r + kappa * kappa * r2) * er

    dxdotm1 = np.einsum("ijk,kj->ij", dx, far[:3])
    nxdotm1 = np.einsum("ik,kj->ij", tn, far[:3])
    ndd = np.einsum("ik,ijk->ij", tn, dx)

    fac1 = (1.0 - theta1 * okr) * inv_r3 / FOUR_PI
    g0mgk = (1.0 - er) * inv_r / FOUR_PI
    a_f = (1.0 - okr) * inv_r3 / FOUR_PI
    b_f = (3.0 - qkr) * inv_r3 / (r2 * FOUR_PI)
    w22 = -ndd * (1.0 - theta2 * okr) * inv_r3 / FOUR_PI

    out1 = (fac1 * dxdotm1 - g0mgk * far[3]).sum(axis=1)
    out2 = (a_f * nxdotm1 - b_f * ndd * dxdotm1 - w22 * far[3]).sum(axis=1)
    return out1, out2


def tree_pb_traverse(node_center, node_half, node_child, node_start, node_count,
                     node_cheb, node_far, pts, nrm, w, rho1, rho2,
                     theta1, theta2, kappa, tau, rloc, cnear,
                     theta_mac, guard, nthreads=1):
    """Barnes-Hut style traversal over all targets (node-major).

    Point arrays must already be in tree (permuted) order.  A cluster is
    used in interpolated form only if the target is beyond both the
    opening criterion and the regularization guard; otherwise the
    traversal descends, reaching direct pair evaluation at the leaves.
    Returns outputs without the h^3 factor.
    """
    m = pts.shape[0]
    out1 = np.zeros(m)
    out2 = np.zeros(m)
    sqrt3 = np.sqrt(3.0)
    stack = [(0, np.arange(m))]
    while stack:
        inode, tidx = stack.pop()
        if tidx.size == 0:
            continue
        rb = node_half[inode] * sqrt3
        thresh = rb + guard
        if theta_mac > 0.0:
            thresh = max(thresh, rb + rb / theta_mac)
        d = pts[tidx] - node_center[inode]
        d2 = np.einsum("ij,ij->i", d, d)
        accept = d2 >= thresh * thresh
        acc = tidx[accept]
        rest = tidx[~accept]
        if acc.size:
            b1, b2 = _far_block(pts[acc], nrm[acc], node_cheb[inode],
                                node_far[inode], theta1, theta2, kappa)
            out1[acc] += b1
            out2[acc] += b2
        if rest.size:
            children = [c for c in node_child[inode] if c >= 0]
            if children:
                for c in reversed(children):
                    stack.append((int(c), rest))
            else:
                s = node_start[inode]
                e = s + node_count[inode]
                b1, b2 = _fused_pair_block(pts[rest], nrm[rest], pts[s:e],
                                           nrm[s:e], w[s:e], rho1[s:e], rho2[s:e],
                                           theta1, theta2, kappa, tau, rloc, cnear)
                out1[rest] += b1
                out2[rest] += b2
    return out1, out2
