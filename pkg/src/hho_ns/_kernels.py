"""Hot element-level kernels: numba-compiled path plus a pure numpy path.

The numba path is used when numba imports and the environment variable
``HHO_NS_NUMBA`` is not set to ``0``.  Both paths take and return the same
arrays, and ``tests/test_kernels.py`` checks they agree.

Face arrays are stacked per local face: ``wf`` is ``(nF, nqf)``, element
basis traces ``phif`` are ``(nF, nqf, Nk)``, face bases ``psif`` are
``(nF, nqf, kp1)`` and outward normals ``nrm`` are ``(nF, 2)``.  A local
scalar DOF vector is ``[v_T (Nk), v_F1 (kp1), v_F2 (kp1), ...]``; the vector
version stacks the two components, so index ``c * n_s + s``.
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def _env_enabled():
    return os.environ.get("HHO_NS_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _env_enabled()


# --------------------------------------------------------------------------
# scaled monomials
# --------------------------------------------------------------------------


def monomials_numpy(xs, ys, exps):
    px = exps[:, 0][None, :]
    py = exps[:, 1][None, :]
    x = xs[:, None]
    y = ys[:, None]
    xp = x**px
    yp = y**py
    vals = xp * yp
    grads = np.empty(vals.shape + (2,))
    grads[..., 0] = np.where(px > 0, px * x ** np.maximum(px - 1, 0), 0.0) * yp
    grads[..., 1] = np.where(py > 0, py * y ** np.maximum(py - 1, 0), 0.0) * xp
    return vals, grads


@njit(cache=True)
def _monomials_nb(xs, ys, exps):
    n = xs.shape[0]
    N = exps.shape[0]
    vals = np.empty((n, N))
    grads = np.zeros((n, N, 2))
    for q in range(n):
        x = xs[q]
        y = ys[q]
        for a in range(N):
            px = exps[a, 0]
            py = exps[a, 1]
            vx = x**px
            vy = y**py
            vals[q, a] = vx * vy
            if px > 0:
                grads[q, a, 0] = px * x ** (px - 1) * vy
            if py > 0:
                grads[q, a, 1] = py * vx * y ** (py - 1)
    return vals, grads


def monomials(xs, ys, exps):
    """Values and gradients of x^a y^b at the given (already scaled) points."""
    xs = np.ascontiguousarray(xs, dtype=float)
    ys = np.ascontiguousarray(ys, dtype=float)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    if USE_NUMBA:
        return _monomials_nb(xs, ys, exps)
    return monomials_numpy(xs, ys, exps)


# --------------------------------------------------------------------------
# convective bilinear form c(w)[v, u] = t_T(w, u, v) per component
# --------------------------------------------------------------------------


def convective_block_numpy(Wv, Wf, eta, wq, phi, dphi, wf, phif, psif, nrm):
    nF, _, kp1 = psif.shape
    Nk = phi.shape[1]
    n_s = Nk + nF * kp1
    c = np.zeros((n_s, n_s))
    Q = np.einsum("q,qa,qbj,qj->ab", wq, phi, dphi, Wv)
    c[:Nk, :Nk] = 0.5 * (Q - Q.T)
    wn = np.einsum("fqj,fj->fq", Wf, nrm)
    X = 0.5 * np.einsum("fq,fqa,fqb->fab", wf * wn, phif, psif)
    if eta > 0.0:
        S = np.concatenate([-phif, psif], axis=2)
        Y = 0.5 * eta * np.einsum("fq,fqa,fqb->fab", wf * np.abs(wn), S, S)
    for f in range(nF):
        off = Nk + f * kp1
        c[:Nk, off:off + kp1] += X[f]
        c[off:off + kp1, :Nk] -= X[f].T
        if eta > 0.0:
            idx = np.r_[0:Nk, off:off + kp1]
            c[np.ix_(idx, idx)] += Y[f]
    return c


@njit(cache=True)
def _convective_block_nb(Wv, Wf, eta, wq, phi, dphi, wf, phif, psif, nrm):
    nF = psif.shape[0]
    nqf = psif.shape[1]
    kp1 = psif.shape[2]
    nq = phi.shape[0]
    Nk = phi.shape[1]
    n_s = Nk + nF * kp1
    c = np.zeros((n_s, n_s))
    for q in range(nq):
        for b in range(Nk):
            gb = dphi[q, b, 0] * Wv[q, 0] + dphi[q, b, 1] * Wv[q, 1]
            for a in range(Nk):
                val = 0.5 * wq[q] * phi[q, a] * gb
                c[a, b] += val
                c[b, a] -= val
    for f in range(nF):
        off = Nk + f * kp1
        for q in range(nqf):
            wn = Wf[f, q, 0] * nrm[f, 0] + Wf[f, q, 1] * nrm[f, 1]
            s = 0.5 * wf[f, q] * wn
            for a in range(Nk):
                for b in range(kp1):
                    val = s * phif[f, q, a] * psif[f, q, b]
                    c[a, off + b] += val
                    c[off + b, a] -= val
            if eta > 0.0:
                e = 0.5 * eta * wf[f, q] * abs(wn)
                for a in range(Nk + kp1):
                    ia = a if a < Nk else off + a - Nk
                    sa = -phif[f, q, a] if a < Nk else psif[f, q, a - Nk]
                    for b in range(Nk + kp1):
                        ib = b if b < Nk else off + b - Nk
                        sb = -phif[f, q, b] if b < Nk else psif[f, q, b - Nk]
                        c[ia, ib] += e * sa * sb
    return c


def convective_block(Wv, Wf, eta, wq, phi, dphi, wf, phif, psif, nrm):
    """Scalar matrix ``c`` with ``t_T(w, u, v) = sum_i v_i^T c u_i``.

    ``Wv`` holds the convecting velocity at volume points, ``Wf`` at face
    points (element trace for the HHO form, face unknown for HDG).
    """
    if USE_NUMBA:
        return _convective_block_nb(Wv, Wf, float(eta), wq, phi, dphi, wf, phif, psif, nrm)
    return convective_block_numpy(Wv, Wf, eta, wq, phi, dphi, wf, phif, psif, nrm)


# --------------------------------------------------------------------------
# derivative of t_T(w, u, v) with respect to the first slot, at fixed u
# --------------------------------------------------------------------------


def convective_wderiv_numpy(Uv, dUv, UF, UT, hdg, eta, wq, phi, dphi, wf, phif, psif, nrm):
    nF, _, kp1 = psif.shape
    Nk = phi.shape[1]
    n_s = Nk + nF * kp1
    E = np.zeros((2, n_s, 2, n_s))
    E[:, :Nk, :, :Nk] = -0.5 * np.einsum("q,qg,qi,qaj->iajg", wq, phi, Uv, dphi)
    E[:, :Nk, :, :Nk] += 0.5 * np.einsum("q,qg,qa,qij->iajg", wq, phi, phi, dUv)
    b = psif if hdg else phif
    R1 = 0.5 * np.einsum("fq,fqi,fqa,fj,fqg->fiajg", wf, UF, phif, nrm, b)
    R2 = -0.5 * np.einsum("fq,fqi,fqa,fj,fqg->fiajg", wf, UT, psif, nrm, b)
    if hdg and eta > 0.0:
        wn = np.einsum("fqj,fj->fq", UF, nrm)
        S = np.concatenate([-phif, psif], axis=2)
        R3 = 0.5 * eta * np.einsum("fq,fqi,fqa,fj,fqg->fiajg", wf * np.sign(wn), UF - UT, S, nrm, psif)
    for f in range(nF):
        off = Nk + f * kp1
        cols = slice(off, off + kp1) if hdg else slice(0, Nk)
        E[:, :Nk, :, cols] += R1[f]
        E[:, off:off + kp1, :, cols] += R2[f]
        if hdg and eta > 0.0:
            E[:, :Nk, :, cols] += R3[f][:, :Nk]
            E[:, off:off + kp1, :, cols] += R3[f][:, Nk:]
    return E.reshape(2 * n_s, 2 * n_s)


@njit(cache=True)
def _convective_wderiv_nb(Uv, dUv, UF, UT, hdg, eta, wq, phi, dphi, wf, phif, psif, nrm):
    nF = psif.shape[0]
    nqf = psif.shape[1]
    kp1 = psif.shape[2]
    nq = phi.shape[0]
    Nk = phi.shape[1]
    n_s = Nk + nF * kp1
    E = np.zeros((2, n_s, 2, n_s))
    for q in range(nq):
        for i in range(2):
            for j in range(2):
                for a in range(Nk):
                    r = -0.5 * Uv[q, i] * dphi[q, a, j] + 0.5 * phi[q, a] * dUv[q, i, j]
                    r *= wq[q]
                    for g in range(Nk):
                        E[i, a, j, g] += r * phi[q, g]
    nb = kp1 if hdg else Nk
    for f in range(nF):
        off = Nk + f * kp1
        coff = off if hdg else 0
        for q in range(nqf):
            sgn = 0.0
            if hdg and eta > 0.0:
                wn = UF[f, q, 0] * nrm[f, 0] + UF[f, q, 1] * nrm[f, 1]
                if wn > 0.0:
                    sgn = 1.0
                elif wn < 0.0:
                    sgn = -1.0
            for i in range(2):
                for j in range(2):
                    s1 = 0.5 * wf[f, q] * UF[f, q, i] * nrm[f, j]
                    s2 = -0.5 * wf[f, q] * UT[f, q, i] * nrm[f, j]
                    s3 = 0.5 * eta * wf[f, q] * sgn * (UF[f, q, i] - UT[f, q, i]) * nrm[f, j]
                    for g in range(nb):
                        bg = psif[f, q, g] if hdg else phif[f, q, g]
                        for a in range(Nk):
                            E[i, a, j, coff + g] += (s1 - s3) * phif[f, q, a] * bg
                        for a in range(kp1):
                            E[i, off + a, j, coff + g] += (s2 + s3) * psif[f, q, a] * bg
    return E.reshape(2 * n_s, 2 * n_s)


def convective_wderiv(Uv, dUv, UF, UT, hdg, eta, wq, phi, dphi, wf, phif, psif, nrm):
    """Matrix ``E`` with ``v^T E delta = t_T(delta, u, v)``.

    ``Uv``/``dUv``: u_T and its gradient (component, derivative) at volume
    points; ``UF``/``UT``: u_F and the u_T trace at face points.
    """
    if USE_NUMBA:
        return _convective_wderiv_nb(Uv, dUv, UF, UT, bool(hdg), float(eta), wq, phi, dphi, wf, phif, psif, nrm)
    return convective_wderiv_numpy(Uv, dUv, UF, UT, hdg, eta, wq, phi, dphi, wf, phif, psif, nrm)


def set_backend(use_numba):
    """Switch between the numba and numpy paths at runtime (tests, benchmarks)."""
    global USE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    USE_NUMBA = bool(use_numba)
