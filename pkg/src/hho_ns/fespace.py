"""Polynomial bases, quadrature, L2 projectors and hybrid vectors.

Element bases are scaled monomials ``((x - x_T)/h_T)^a ((y - y_T)/h_T)^b``
ordered by total degree and orthonormalised against the element mass matrix
by a lower-triangular transform.  The transform keeps the hierarchy, so the
first ``dim(P^l)`` functions of a degree-``K`` basis span ``P^l`` for every
``l <= K``, the first function is the constant ``|T|^{-1/2}`` and all other
functions have zero mean.  Face bases are Legendre polynomials in the
canonical face coordinate, scaled to be orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from . import _kernels
from .errors import InvalidArgument, InvalidMesh, QuadratureCapabilityError
from .mesh import validate_mesh

MAX_QUAD_DEGREE = 60


def dim_poly(degree):
    """Dimension of P^degree in two variables."""
    return (degree + 1) * (degree + 2) // 2


@dataclass(frozen=True)
class BasisSpec:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise InvalidArgument(f"degree must be a nonnegative integer, got {self.k}")

    @property
    def n_cell(self):
        return dim_poly(self.k)

    @property
    def n_recon(self):
        return dim_poly(self.k + 1)

    @property
    def n_face(self):
        return self.k + 1

    @property
    def cell_quad_degree(self):
        return max(2 * (self.k + 1), 3 * self.k + 2)

    @property
    def face_quad_degree(self):
        # 3k covers the face terms of the convective form for k > 3
        return max(2 * self.k + 3, 3 * self.k)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _check_degree(degree):
    if degree < 0 or degree > MAX_QUAD_DEGREE or int(degree) != degree:
        raise QuadratureCapabilityError(f"quadrature degree {degree} not in [0, {MAX_QUAD_DEGREE}]")
    return int(degree)


@lru_cache(maxsize=None)
def _reference_triangle(degree):
    # collapsed (Duffy) Gauss rule on {r, s >= 0, r + s <= 1}; Gauss-Jacobi in
    # the collapsed direction absorbs the (1 - s) Jacobian
    n = degree // 2 + 1
    xi, wxi = legendre.leggauss(n)
    eta, weta = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (1.0 + eta)
    r = np.outer(1.0 - s, 0.5 * (1.0 + xi))  # (eta, xi)
    S = np.repeat(s[:, None], n, axis=1)
    w = np.outer(weta, wxi) / 8.0
    return np.stack([r.ravel(), S.ravel()], axis=1), w.ravel()


def triangle_quadrature(p0, p1, p2, degree):
    degree = _check_degree(degree)
    ref, w = _reference_triangle(degree)
    p0 = np.asarray(p0, float)
    J = np.column_stack([np.asarray(p1) - p0, np.asarray(p2) - p0])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    pts = p0 + ref @ J.T
    return QuadratureRule(pts, w * abs(det), degree)


def polygon_quadrature(geom, degree):
    """Exact up to ``degree`` on a polygon star-shaped w.r.t. its centroid."""
    degree = _check_degree(degree)
    pts, wts = [], []
    for c, a, b in geom.subtriangles():
        q = triangle_quadrature(c, a, b, degree)
        cross = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
        if cross < 0:
            raise InvalidMesh(f"element {geom.index} is not star-shaped with respect to its centroid")
        pts.append(q.points)
        wts.append(q.weights)
    return QuadratureRule(np.concatenate(pts), np.concatenate(wts), degree)


def face_quadrature(a, b, degree):
    """Gauss-Legendre rule on the segment [a, b]."""
    degree = _check_degree(degree)
    x, w = legendre.leggauss(degree // 2 + 1)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    L = np.linalg.norm(b - a)
    pts = a + np.outer(0.5 * (1.0 + x), b - a)
    return QuadratureRule(pts, 0.5 * L * w, degree)


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


def monomial_exponents(degree):
    return np.array([(d - j, j) for d in range(degree + 1) for j in range(d + 1)], dtype=np.int64)


class ElementBasis:
    """L2-orthonormal hierarchical basis of P^degree(T)."""

    def __init__(self, geom, degree, quad=None):
        self.geom = geom
        self.degree = int(degree)
        self.center = geom.centroid
        self.h = geom.diameter
        self.exps = monomial_exponents(self.degree)
        if quad is None:
            quad = polygon_quadrature(geom, 2 * self.degree)
        elif quad.degree < 2 * self.degree:
            raise QuadratureCapabilityError("basis orthonormalisation needs quadrature degree >= 2*degree")
        m, _ = self._monomials(quad.points)
        M = (m * quad.weights[:, None]).T @ m
        # two Cholesky passes: the second one cleans up roundoff of the first
        L = np.linalg.cholesky(M)
        C = np.linalg.solve(L, np.eye(len(M)))
        M2 = C @ M @ C.T
        L2 = np.linalg.cholesky(M2)
        self.coef = np.linalg.solve(L2, C)  # rows: basis functions in monomial coords

    @property
    def size(self):
        return len(self.exps)

    def _monomials(self, pts):
        pts = np.atleast_2d(pts)
        xs = (pts[:, 0] - self.center[0]) / self.h
        ys = (pts[:, 1] - self.center[1]) / self.h
        return _kernels.monomials(xs, ys, self.exps)

    def eval(self, pts):
        m, _ = self._monomials(pts)
        return m @ self.coef.T

    def eval_grad(self, pts):
        _, g = self._monomials(pts)
        return np.einsum("qmj,am->qaj", g, self.coef) / self.h

    def eval_both(self, pts):
        m, g = self._monomials(pts)
        return m @ self.coef.T, np.einsum("qmj,am->qaj", g, self.coef) / self.h


class FaceBasis:
    """Orthonormal Legendre basis of P^degree(F) in the canonical face coordinate."""

    def __init__(self, a, b, degree):
        self.a = np.asarray(a, float)
        self.b = np.asarray(b, float)
        self.degree = int(degree)
        t = self.b - self.a
        self.length = float(np.linalg.norm(t))
        self.tangent = t / self.length
        self.mid = 0.5 * (self.a + self.b)
        self.scale = np.sqrt((2 * np.arange(self.degree + 1) + 1) / self.length)

    @property
    def size(self):
        return self.degree + 1

    def eval(self, pts):
        pts = np.atleast_2d(pts)
        xi = 2.0 * ((pts - self.mid) @ self.tangent) / self.length
        return legendre.legvander(xi, self.degree) * self.scale


def _evaluate(f, pts):
    vals = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(pts), float(vals))
    return vals


def l2_project_element(f, geom, degree, basis=None, quad=None):
    """Coefficients of the L2 projection of ``f(x, y)`` on P^degree(T).

    ``f`` may return scalars ``(n,)`` or vectors ``(n, c)``; the result has
    shape ``(dim,)`` or ``(dim, c)`` in the orthonormal basis.
    """
    if basis is None:
        basis = ElementBasis(geom, degree)
    if quad is None:
        quad = polygon_quadrature(geom, max(2 * degree + 4, 2 * basis.degree))
    phi = basis.eval(quad.points)[:, :dim_poly(degree)]
    vals = _evaluate(f, quad.points)
    return np.tensordot(phi * quad.weights[:, None], vals, axes=(0, 0))


def l2_project_face(f, a, b, degree, basis=None, quad=None):
    if basis is None:
        basis = FaceBasis(a, b, degree)
    if quad is None:
        quad = face_quadrature(a, b, 2 * degree + 4)
    psi = basis.eval(quad.points)[:, :degree + 1]
    vals = _evaluate(f, quad.points)
    return np.tensordot(psi * quad.weights[:, None], vals, axes=(0, 0))


# ---------------------------------------------------------------------------
# discrete space: cached element/face data
# ---------------------------------------------------------------------------


@dataclass
class ElementData:
    """Quadrature-level data of one element for a fixed degree k.

    ``phi``/``dphi`` hold the degree-(k+1) basis at volume points; the face
    arrays are stacked per local face (see ``_kernels``).
    """

    geom: object
    basis: ElementBasis
    quad: QuadratureRule
    phi: np.ndarray
    dphi: np.ndarray
    face_bases: tuple
    wf: np.ndarray
    ptsf: np.ndarray
    phif: np.ndarray
    dphif: np.ndarray
    psif: np.ndarray
    nrm: np.ndarray
    hF: np.ndarray
    face_ids: np.ndarray
    boundary: np.ndarray


class HHOSpace:
    """Mesh plus degree plus every per-element basis and quadrature rule."""

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.spec = BasisSpec(k)
        self.k = self.spec.k
        diag = validate_mesh(mesh)
        if diag.flagged:
            raise InvalidMesh(f"elements {list(diag.flagged)[:10]} are not star-shaped w.r.t. their centroid")
        self.face_bases = tuple(
            FaceBasis(mesh.vertices[lo], mesh.vertices[hi], self.k) for lo, hi in mesh.faces
        )
        self.elements = tuple(self._element_data(t) for t in range(mesh.n_elements))

    @property
    def nk(self):
        return self.spec.n_cell

    @property
    def kp1(self):
        return self.spec.n_face

    def _element_data(self, t):
        g = self.mesh.element_geom(t)
        quad = polygon_quadrature(g, self.spec.cell_quad_degree)
        basis = ElementBasis(g, self.k + 1, quad)
        phi, dphi = basis.eval_both(quad.points)
        fq = [face_quadrature(f.a, f.b, self.spec.face_quad_degree) for f in g.faces]
        ptsf = np.stack([q.points for q in fq])
        wf = np.stack([q.weights for q in fq])
        nF, nqf = wf.shape
        phif, dphif = basis.eval_both(ptsf.reshape(-1, 2))
        fb = tuple(self.face_bases[f.index] for f in g.faces)
        psif = np.stack([b.eval(p) for b, p in zip(fb, ptsf)])
        return ElementData(
            geom=g,
            basis=basis,
            quad=quad,
            phi=phi,
            dphi=dphi,
            face_bases=fb,
            wf=wf,
            ptsf=ptsf,
            phif=phif.reshape(nF, nqf, -1),
            dphif=dphif.reshape(nF, nqf, -1, 2),
            psif=psif,
            nrm=np.stack([f.normal for f in g.faces]),
            hF=np.array([f.measure for f in g.faces]),
            face_ids=np.array([f.index for f in g.faces], dtype=np.int64),
            boundary=np.array([f.boundary for f in g.faces]),
        )


# ---------------------------------------------------------------------------
# hybrid vectors
# ---------------------------------------------------------------------------


class HybridVelocity:
    """Element and face coefficients of a vector-valued hybrid function.

    Storage is one flat array ``[cells (nT, 2, Nk) | faces (nF, 2, k+1)]``;
    ``cells`` and ``faces`` are views into it.
    """

    def __init__(self, k, n_cells, n_faces, data=None):
        self.k = int(k)
        self.n_cells = n_cells
        self.n_faces = n_faces
        nk = dim_poly(self.k)
        self._split = n_cells * 2 * nk
        size = self._split + n_faces * 2 * (self.k + 1)
        if data is None:
            data = np.zeros(size)
        data = np.asarray(data, dtype=float)
        if data.shape != (size,):
            raise InvalidArgument(f"expected {size} coefficients, got shape {data.shape}")
        self.data = data

    @classmethod
    def zeros(cls, space):
        return cls(space.k, space.mesh.n_elements, space.mesh.n_faces)

    @property
    def cells(self):
        return self.data[:self._split].reshape(self.n_cells, 2, -1)

    @property
    def faces(self):
        return self.data[self._split:].reshape(self.n_faces, 2, self.k + 1)

    def local(self, space, t):
        """Local vector ``[comp x: (v_T, v_F...), comp y: (...)]`` of element ``t``."""
        fl = space.elements[t].face_ids
        return np.concatenate([
            np.concatenate([self.cells[t, c], self.faces[fl, c].ravel()]) for c in range(2)
        ])

    def copy(self):
        return HybridVelocity(self.k, self.n_cells, self.n_faces, self.data.copy())

    def __add__(self, other):
        return HybridVelocity(self.k, self.n_cells, self.n_faces, self.data + other.data)

    def __sub__(self, other):
        return HybridVelocity(self.k, self.n_cells, self.n_faces, self.data - other.data)

    def __mul__(self, s):
        return HybridVelocity(self.k, self.n_cells, self.n_faces, s * self.data)

    __rmul__ = __mul__


def interpolate(v, space):
    """Global interpolator: element and face L2 projections, component-wise.

    ``v(x, y)`` returns an ``(n, 2)`` array.
    """
    out = HybridVelocity.zeros(space)
    nk = space.nk
    for t, ed in enumerate(space.elements):
        vals = _evaluate(v, ed.quad.points)
        out.cells[t] = (np.tensordot(ed.phi[:, :nk] * ed.quad.weights[:, None], vals, axes=(0, 0))).T
    done = np.zeros(space.mesh.n_faces, dtype=bool)
    for ed in space.elements:
        for j, f in enumerate(ed.face_ids):
            if done[f]:
                continue
            vals = _evaluate(v, ed.ptsf[j])
            out.faces[f] = np.tensordot(ed.psif[j] * ed.wf[j][:, None], vals, axes=(0, 0)).T
            done[f] = True
    return out


def project_scalar(q, space, degree=None):
    """Element-wise L2 projection of a scalar field, shape ``(nT, dim)``."""
    degree = space.k if degree is None else degree
    n = dim_poly(degree)
    out = np.empty((space.mesh.n_elements, n))
    for t, ed in enumerate(space.elements):
        vals = _evaluate(q, ed.quad.points)
        out[t] = (ed.phi[:, :n] * ed.quad.weights[:, None]).T @ vals
    return out


def norm_1h(vh, space):
    """Discrete H1 seminorm: broken gradient plus scaled face jumps."""
    nk = space.nk
    total = 0.0
    for t, ed in enumerate(space.elements):
        vT = vh.cells[t]  # (2, nk)
        g = np.einsum("qaj,ca->qcj", ed.dphi[:, :nk], vT)
        total += np.einsum("q,qcj,qcj->", ed.quad.weights, g, g)
        for j, f in enumerate(ed.face_ids):
            jump = ed.psif[j] @ vh.faces[f].T - ed.phif[j][:, :nk] @ vT.T
            total += (ed.wf[j][:, None] * jump**2).sum() / ed.hF[j]
    return float(np.sqrt(total))


def l2_norm_cells(vh):
    """L2 norm of the broken element part (orthonormal bases make this exact)."""
    return float(np.sqrt((vh.cells**2).sum()))
