"""Element-level HHO reconstructions and forms.

Every operator acts on the local hybrid vector of one element.  Scalar
operators act on ``[v_T (Nk), v_F1 (k+1), ...]`` of length ``n_s``; the
velocity is handled component-wise, so the vector operators are
block-diagonal copies (``kron(I_2, .)``) except the divergence, the coupling
and the convective terms which mix components.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels
from .errors import InvalidArgument
from .fespace import ElementBasis, dim_poly, face_quadrature, polygon_quadrature

FORMS = ("hho", "hdg")


def _n_local(ed, k):
    return dim_poly(k) + len(ed.geom.faces) * (k + 1)


def _grad_arrays(ed, k, l):
    """Test basis of degree l and the trial data needed by the gradient RHS."""
    nk = dim_poly(k)
    if l <= ed.basis.degree:
        nl = dim_poly(l)
        vol = (ed.quad.weights, ed.phi[:, :nl], ed.dphi[:, :nk])
        faces = [(ed.wf[j], ed.phif[j][:, :nl], ed.phif[j][:, :nk], ed.psif[j]) for j in range(len(ed.wf))]
        return vol, faces
    g = ed.geom
    quad = polygon_quadrature(g, l + max(2 * k, l))
    test = ElementBasis(g, l, quad if quad.degree >= 2 * l else None)
    phi_l = test.eval(quad.points)
    _, dphi_k = ed.basis.eval_both(quad.points)
    faces = []
    for fg, fb in zip(g.faces, ed.face_bases):
        fq = face_quadrature(fg.a, fg.b, l + k + 1)
        faces.append((fq.weights, test.eval(fq.points), ed.basis.eval(fq.points)[:, :nk], fb.eval(fq.points)))
    return (quad.weights, phi_l, dphi_k[:, :nk]), faces


def gradient_reconstruction(ed, k, l=None):
    """Scalar gradient reconstruction ``G_T^l`` as a ``(2 dim P^l, n_s)`` matrix.

    Rows ``[0, dim)`` hold the x-derivative coefficients, rows ``[dim, 2 dim)``
    the y-derivative ones.  The test basis is orthonormal, so the mass matrix
    on the left-hand side is the identity.
    """
    l = k if l is None else l
    if l < 0:
        raise InvalidArgument("gradient degree must be nonnegative")
    nk = dim_poly(k)
    kp1 = k + 1
    (w, phi_l, dphi_k), faces = _grad_arrays(ed, k, l)
    nl = phi_l.shape[1]
    G = np.zeros((2 * nl, _n_local(ed, k)))
    for j in range(2):
        rows = slice(j * nl, (j + 1) * nl)
        G[rows, :nk] = (phi_l * w[:, None]).T @ dphi_k[:, :, j]
        for f, (wf, tl, tk, psi) in enumerate(faces):
            n = ed.nrm[f, j]
            off = nk + f * kp1
            G[rows, :nk] -= n * (tl * wf[:, None]).T @ tk
            G[rows, off:off + kp1] += n * (tl * wf[:, None]).T @ psi
    return G


def velocity_reconstruction(ed, k):
    """Scalar potential reconstruction ``p_T`` as a ``(dim P^{k+1}, n_s)`` matrix.

    The Neumann problem is solved on the zero-mean part of the orthonormal
    basis; the constant coefficient copies the one of ``v_T`` (mean closure).
    """
    nk = dim_poly(k)
    kp1 = k + 1
    w = ed.quad.weights
    dphi = ed.dphi[:, 1:]  # zero-mean functions of degree <= k+1
    K = np.einsum("q,qaj,qbj->ab", w, dphi, dphi)
    rhs = np.zeros((dphi.shape[1], _n_local(ed, k)))
    rhs[:, :nk] = np.einsum("q,qaj,qbj->ab", w, dphi, ed.dphi[:, :nk])
    for f in range(len(ed.wf)):
        gn = ed.dphif[f][:, 1:] @ ed.nrm[f]  # (nqf, N-1)
        off = nk + f * kp1
        rhs[:, :nk] -= (gn * ed.wf[f][:, None]).T @ ed.phif[f][:, :nk]
        rhs[:, off:off + kp1] += (gn * ed.wf[f][:, None]).T @ ed.psif[f]
    P = np.zeros((ed.phi.shape[1], rhs.shape[1]))
    P[1:] = cho_solve(cho_factor(K), rhs)
    P[0, 0] = 1.0
    return P


def divergence_reconstruction(ed, k, G=None):
    """``D_T = tr(G_T^k)`` as a ``(dim P^k, 2 n_s)`` matrix on the vector local DOFs."""
    G = gradient_reconstruction(ed, k) if G is None else G
    nk = dim_poly(k)
    return np.hstack([G[:nk], G[nk:]])


def face_residual(ed, k, j, P=None):
    """Scalar ``d_TF`` for local face ``j``: ``(k+1, n_s)`` matrix."""
    P = velocity_reconstruction(ed, k) if P is None else P
    nk = dim_poly(k)
    kp1 = k + 1
    Q = P.copy()
    Q[:nk] = 0.0
    Q[:nk, :nk] = np.eye(nk)  # v_T + (p_T v - pi^k p_T v)
    proj = (ed.psif[j] * ed.wf[j][:, None]).T @ ed.phif[j]  # pi_F^k of element basis traces
    d = -proj @ Q
    off = nk + j * kp1
    d[:, off:off + kp1] += np.eye(kp1)
    return d


def viscous_matrix(ed, k, G=None, P=None):
    """Scalar ``A_T = G^T G + sum_F h_F^{-1} d_TF^T d_TF``; returns ``(A_T, S_T)``."""
    G = gradient_reconstruction(ed, k) if G is None else G
    P = velocity_reconstruction(ed, k) if P is None else P
    S = np.zeros((G.shape[1], G.shape[1]))
    for j in range(len(ed.wf)):
        d = face_residual(ed, k, j, P)
        S += d.T @ d / ed.hF[j]
    return G.T @ G + S, S


def coupling_matrix(ed, k, G=None):
    """``B_T`` with ``q^T B_T v = -int_T D_T v q``."""
    return -divergence_reconstruction(ed, k, G)


@dataclass
class LocalOperatorPack:
    index: int
    k: int
    nk: int
    kp1: int
    n_s: int
    G: np.ndarray  # scalar gradient, (2 nk, n_s)
    P: np.ndarray  # scalar potential reconstruction, (dim P^{k+1}, n_s)
    D: np.ndarray  # divergence, (nk, 2 n_s)
    A: np.ndarray  # scalar viscous matrix, (n_s, n_s)
    S: np.ndarray  # scalar stabilisation
    B: np.ndarray  # coupling, (nk, 2 n_s)
    ed: object
    # contiguous quadrature arrays restricted to P^k for the kernels
    w: np.ndarray = None
    phi: np.ndarray = None
    dphi: np.ndarray = None
    wf: np.ndarray = None
    phif: np.ndarray = None
    psif: np.ndarray = None
    nrm: np.ndarray = None

    @property
    def n_vel(self):
        return 2 * self.n_s

    @property
    def A_vec(self):
        return np.kron(np.eye(2), self.A)

    @property
    def G_vec(self):
        return np.kron(np.eye(2), self.G)

    def cell_indices(self):
        """Positions of v_T inside the vector local DOFs."""
        return np.r_[0:self.nk, self.n_s:self.n_s + self.nk]

    def face_indices(self, j):
        off = self.nk + j * self.kp1
        return np.r_[off:off + self.kp1, self.n_s + off:self.n_s + off + self.kp1]


def build_pack(ed, k):
    G = gradient_reconstruction(ed, k)
    P = velocity_reconstruction(ed, k)
    A, S = viscous_matrix(ed, k, G, P)
    D = divergence_reconstruction(ed, k, G)
    nk = dim_poly(k)
    c = np.ascontiguousarray
    return LocalOperatorPack(
        index=ed.geom.index, k=k, nk=nk, kp1=k + 1, n_s=G.shape[1],
        G=G, P=P, D=D, A=A, S=S, B=-D, ed=ed,
        w=c(ed.quad.weights), phi=c(ed.phi[:, :nk]), dphi=c(ed.dphi[:, :nk]),
        wf=c(ed.wf), phif=c(ed.phif[:, :, :nk]), psif=c(ed.psif), nrm=c(ed.nrm),
    )


def build_packs(space):
    return [build_pack(ed, space.k) for ed in space.elements]


# ---------------------------------------------------------------------------
# convective trilinear forms
# ---------------------------------------------------------------------------


def _split(pack, x):
    x = np.asarray(x, float).reshape(2, pack.n_s)
    cell = x[:, :pack.nk]
    faces = x[:, pack.nk:].reshape(2, -1, pack.kp1)  # (comp, face, basis)
    return cell, faces


def _check_form(form, eta):
    if form not in FORMS:
        raise InvalidArgument(f"unknown trilinear form {form!r}; expected one of {FORMS}")
    if eta < 0:
        raise InvalidArgument(f"eta must be nonnegative, got {eta}")


def _traces(pack, x):
    cell, faces = _split(pack, x)
    vol = pack.phi @ cell.T  # (nq, 2)
    tr = np.einsum("fqa,ca->fqc", pack.phif, cell)
    fv = np.einsum("fqb,cfb->fqc", pack.psif, faces)
    return cell, vol, tr, fv


def convective_block(pack, w, form="hho", eta=0.0):
    """Scalar matrix ``c`` with ``t_T(w, u, v) = sum_i v_i^T c u_i``."""
    _check_form(form, eta)
    _, Wv, Wt, Wf = _traces(pack, w)
    Wface = Wf if form == "hdg" else Wt
    e = eta if form == "hdg" else 0.0
    return _kernels.convective_block(np.ascontiguousarray(Wv), np.ascontiguousarray(Wface), e,
                                     pack.w, pack.phi, pack.dphi, pack.wf, pack.phif, pack.psif, pack.nrm)


def convective_matrix(pack, w, form="hho", eta=0.0):
    """``C(w)`` on the vector local DOFs: ``v^T C(w) u = t_T(w, u, v)``."""
    return np.kron(np.eye(2), convective_block(pack, w, form, eta))


def convective_apply(pack, w, u, v):
    """Element-local skew-symmetric convective form, expanded without G^{2k}."""
    return float(np.asarray(v) @ convective_matrix(pack, w) @ np.asarray(u))


def hdg_convective_apply(pack, w, u, v, eta):
    """HDG-inspired variant: face unknowns of ``w`` convect, plus an upwind-like penalty."""
    return float(np.asarray(v) @ convective_matrix(pack, w, "hdg", eta) @ np.asarray(u))


def convective_first_slot(pack, u, form="hho", eta=0.0):
    """Matrix ``E(u)`` with ``v^T E(u) d = t_T(d, u, v)``."""
    _check_form(form, eta)
    cell, Uv, UT, UF = _traces(pack, u)
    dUv = np.einsum("qaj,ca->qcj", pack.dphi, cell)
    return _kernels.convective_wderiv(
        np.ascontiguousarray(Uv), np.ascontiguousarray(dUv), np.ascontiguousarray(UF),
        np.ascontiguousarray(UT), form == "hdg", float(eta),
        pack.w, pack.phi, pack.dphi, pack.wf, pack.phif, pack.psif, pack.nrm)


def convective_jacobian(pack, u, form="hho", eta=0.0):
    """Derivative of ``u -> t_T(u, u, .)``: ``v^T J d = t_T(d, u, v) + t_T(u, d, v)``."""
    return convective_first_slot(pack, u, form, eta) + convective_matrix(pack, u, form, eta)
