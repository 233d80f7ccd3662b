"""Global DOFs, Newton-linearised element systems and static condensation.

Unknowns are increments: the current iterate already carries the Dirichlet
data on boundary faces, so boundary face increments are zero and drop out.
Element velocity DOFs and the pressure fluctuations (all but the constant
mode) are eliminated element by element; the global system couples the
interior face velocities, the element pressure means and one scalar
multiplier enforcing the zero-mean pressure constraint.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.linalg import spsolve

from .errors import CondensationError, InvalidArgument
from .fespace import HybridVelocity, dim_poly
from .local_ops import FORMS, convective_first_slot, convective_matrix


class DofMap:
    """Offsets of the full and the condensed unknown vectors.

    Full layout: ``[cell velocities | face velocities | pressures | multiplier]``
    where the velocity part coincides with ``HybridVelocity.data``.
    Condensed layout: ``[interior face velocities | pressure means | multiplier]``.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = int(k)
        self.nk = dim_poly(self.k)
        self.kp1 = self.k + 1
        self.n_cells = mesh.n_elements
        self.n_faces = mesh.n_faces
        self.n_vel_cells = self.n_cells * 2 * self.nk
        self.n_vel = self.n_vel_cells + self.n_faces * 2 * self.kp1
        self.p_offset = self.n_vel
        self.n_p = self.n_cells * self.nk
        self.mult = self.n_vel + self.n_p
        self.n_full = self.mult + 1

        self.cond_face = np.full(self.n_faces, -1, dtype=np.int64)
        interior = mesh.interior_faces
        self.cond_face[interior] = np.arange(len(interior)) * 2 * self.kp1
        self.n_cond_faces = len(interior) * 2 * self.kp1
        self.cond_mult = self.n_cond_faces + self.n_cells
        self.condensed_dim = self.cond_mult + 1

    @property
    def n_interior(self):
        return len(self.mesh.interior_faces)

    def cond_p0(self, t):
        return self.n_cond_faces + t

    def face_offset(self, f):
        return self.n_vel_cells + f * 2 * self.kp1

    def vel_l2g(self, t):
        """Global full indices of the vector local DOFs of element ``t``."""
        fl = self.mesh.element_faces[t]
        out = []
        for c in range(2):
            out.append(t * 2 * self.nk + c * self.nk + np.arange(self.nk))
            for f in fl:
                out.append(self.face_offset(f) + c * self.kp1 + np.arange(self.kp1))
        return np.concatenate(out)

    def p_l2g(self, t):
        return self.p_offset + t * self.nk + np.arange(self.nk)

    def boundary_mask_full(self):
        mask = np.zeros(self.n_full, dtype=bool)
        for f in self.mesh.boundary_faces:
            o = self.face_offset(f)
            mask[o:o + 2 * self.kp1] = True
        return mask


def build_dofmap(mesh, k):
    return DofMap(mesh, k)


class PressureField:
    """Piecewise P^k pressure in the orthonormal element bases."""

    def __init__(self, coeffs, areas):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.areas = np.asarray(areas, dtype=float)

    @classmethod
    def zeros(cls, space):
        return cls(np.zeros((space.mesh.n_elements, space.nk)), space.mesh.element_areas)

    def integral(self):
        # the constant basis function is |T|^{-1/2}
        return float((self.coeffs[:, 0] * np.sqrt(self.areas)).sum())

    def mean(self):
        return self.integral() / self.areas.sum()

    def l2_norm(self):
        return float(np.sqrt((self.coeffs**2).sum()))

    def minus_mean(self):
        c = self.coeffs.copy()
        c[:, 0] -= self.mean() * np.sqrt(self.areas)
        return PressureField(c, self.areas)

    def copy(self):
        return PressureField(self.coeffs.copy(), self.areas)

    def __sub__(self, other):
        return PressureField(self.coeffs - other.coeffs, self.areas)


@dataclass
class LinearizedSystem:
    """Element blocks of the Newton system ``M delta = -R``.

    ``mats[t]`` acts on ``[vector local velocity (2 n_s) | pressure (nk)]``.
    The multiplier couples only through ``sqrt(|T|)`` on the pressure means.
    """

    dofmap: DofMap
    packs: list
    mats: list
    res: list
    res_mult: float
    sqrt_area: np.ndarray
    lam: float

    def residual_vector(self):
        """Full residual in the global layout (boundary face rows included)."""
        dm = self.dofmap
        r = np.zeros(dm.n_full)
        for t, (pk, R) in enumerate(zip(self.packs, self.res)):
            r[dm.vel_l2g(t)] += R[:pk.n_vel]
            r[dm.p_l2g(t)] += R[pk.n_vel:]
        r[dm.mult] = self.res_mult
        return r

    def to_global(self):
        """Sparse full matrix and residual with Dirichlet rows set to identity."""
        dm = self.dofmap
        rows, cols, vals = [], [], []
        for t, (pk, M) in enumerate(zip(self.packs, self.mats)):
            g = np.concatenate([dm.vel_l2g(t), dm.p_l2g(t)])
            rows.append(np.repeat(g, len(g)))
            cols.append(np.tile(g, len(g)))
            vals.append(M.ravel())
            p0 = dm.p_l2g(t)[0]
            rows.append([p0, dm.mult])
            cols.append([dm.mult, p0])
            vals.append([self.sqrt_area[t]] * 2)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        bmask = dm.boundary_mask_full()
        keep = ~(bmask[rows] | bmask[cols])
        bidx = np.flatnonzero(bmask)
        rows = np.concatenate([rows[keep], bidx])
        cols = np.concatenate([cols[keep], bidx])
        vals = np.concatenate([vals[keep], np.ones(len(bidx))])
        K = sp.csr_matrix((vals, (rows, cols)), shape=(dm.n_full, dm.n_full))
        r = self.residual_vector()
        r[bmask] = 0.0
        return K, r


def assemble_linearized(space, packs, dofmap, u, p, lam, nu, load=None, form="hho", eta=0.0,
                        convection=True):
    """Element Jacobians and residuals of the discrete problem at ``(u, p, lam)``.

    Momentum residual ``nu a_T(u, v) + t_T(u, u, v) + b_T(v, p) - (f, v_T)``;
    mass residual ``-int D_T u q`` plus the multiplier on the constant mode;
    multiplier residual ``int p``.  ``load[t]`` is the vector local load.
    """
    if form not in FORMS:
        raise InvalidArgument(f"unknown trilinear form {form!r}")
    if dofmap.k != space.k or dofmap.n_cells != space.mesh.n_elements or len(packs) != space.mesh.n_elements:
        raise InvalidArgument("dofmap, packs and space do not describe the same discretisation")
    if nu <= 0:
        raise InvalidArgument("viscosity must be positive")
    sqrt_area = np.sqrt(space.mesh.element_areas)
    mats, res = [], []
    for t, pk in enumerate(packs):
        x = u.local(space, t)
        pt = p.coeffs[t]
        J = nu * pk.A_vec
        Rv = J @ x + pk.B.T @ pt
        if convection:
            C = convective_matrix(pk, x, form, eta)
            Rv += C @ x
            J = J + C + convective_first_slot(pk, x, form, eta)
        if load is not None:
            Rv -= load[t]
        Rq = pk.B @ x
        Rq[0] += sqrt_area[t] * lam
        nv = pk.n_vel
        M = np.zeros((nv + pk.nk, nv + pk.nk))
        M[:nv, :nv] = J
        M[:nv, nv:] = pk.B.T
        M[nv:, :nv] = pk.B
        mats.append(M)
        res.append(np.concatenate([Rv, Rq]))
    res_mult = float((p.coeffs[:, 0] * sqrt_area).sum())
    return LinearizedSystem(dofmap, packs, mats, res, res_mult, sqrt_area, lam)


@dataclass
class _Recovery:
    lu: tuple
    M_IK: np.ndarray
    R_I: np.ndarray
    I: np.ndarray
    K_glob: np.ndarray  # condensed global index per kept local DOF, -1 for Dirichlet


@dataclass
class CondensedSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    recovery: list
    dofmap: DofMap
    system: LinearizedSystem

    @property
    def residual_norm(self):
        """Euclidean norm of the condensed residual (``rhs = -residual``)."""
        return float(np.linalg.norm(self.rhs))

    def solve(self):
        return spsolve(self.matrix.tocsc(), self.rhs)


def _local_split(pk):
    nv = pk.n_vel
    I = np.concatenate([pk.cell_indices(), nv + np.arange(1, pk.nk)])
    K = np.concatenate([pk.face_indices(j) for j in range(len(pk.wf))] + [np.array([nv])])
    return I, K


def static_condense(system):
    """Eliminate cell velocities and pressure fluctuations element by element."""
    dm = system.dofmap
    mesh = dm.mesh
    rows, cols, vals = [], [], []
    rhs = np.zeros(dm.condensed_dim)
    recovery = []
    for t, (pk, M, R) in enumerate(zip(system.packs, system.mats, system.res)):
        I, K = _local_split(pk)
        kg = np.concatenate(
            [dm.cond_face[f] + np.arange(2 * pk.kp1) if dm.cond_face[f] >= 0 else np.full(2 * pk.kp1, -1)
             for f in mesh.element_faces[t]] + [np.array([dm.cond_p0(t)])])
        M_II = M[np.ix_(I, I)]
        M_IK = M[np.ix_(I, K)]
        M_KI = M[np.ix_(K, I)]
        M_KK = M[np.ix_(K, K)]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", LinAlgWarning)
                lu = lu_factor(M_II, check_finite=False)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as exc:
            raise CondensationError(f"singular local block on element {t}: {exc}", element=t) from exc
        if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * np.abs(M_II).max()):
            raise CondensationError(f"singular local block on element {t}", element=t)
        X = lu_solve(lu, np.column_stack([M_IK, R[I]]), check_finite=False)
        S = M_KK - M_KI @ X[:, :-1]
        g = R[K] - M_KI @ X[:, -1]
        keep = kg >= 0
        kk = kg[keep]
        rows.append(np.repeat(kk, len(kk)))
        cols.append(np.tile(kk, len(kk)))
        vals.append(S[np.ix_(keep, keep)].ravel())
        rhs[kk] -= g[keep]
        recovery.append(_Recovery(lu, M_IK, R[I], I, kg))
    cp0 = dm.n_cond_faces + np.arange(dm.n_cells)
    rows.append(np.concatenate([cp0, np.full(dm.n_cells, dm.cond_mult)]))
    cols.append(np.concatenate([np.full(dm.n_cells, dm.cond_mult), cp0]))
    vals.append(np.concatenate([system.sqrt_area, system.sqrt_area]))
    rhs[dm.cond_mult] = -system.res_mult
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dm.condensed_dim, dm.condensed_dim))
    return CondensedSystem(A, rhs, recovery, dm, system)


def recover_local(cs, x, space):
    """Back-substitute a condensed solution; returns velocity, pressure and multiplier increments."""
    dm = cs.dofmap
    du = HybridVelocity.zeros(space)
    dp = np.zeros((dm.n_cells, dm.nk))
    for f in dm.mesh.interior_faces:
        o = dm.cond_face[f]
        du.faces[f] = x[o:o + 2 * dm.kp1].reshape(2, dm.kp1)
    for t, (pk, rec) in enumerate(zip(cs.system.packs, cs.recovery)):
        xK = np.where(rec.K_glob >= 0, x[np.maximum(rec.K_glob, 0)], 0.0)
        xI = lu_solve(rec.lu, -rec.R_I - rec.M_IK @ xK, check_finite=False)
        nk = pk.nk
        du.cells[t] = xI[:2 * nk].reshape(2, nk)
        dp[t, 0] = x[dm.cond_p0(t)]
        dp[t, 1:] = xI[2 * nk:]
    return du, PressureField(dp, dm.mesh.element_areas), float(x[dm.cond_mult])


def solve_uncondensed(system, space):
    """Direct sparse solve of the full Newton system (reference path)."""
    dm = system.dofmap
    K, r = system.to_global()
    x = spsolve(K.tocsc(), -r)
    du = HybridVelocity(dm.k, dm.n_cells, dm.n_faces, x[:dm.n_vel].copy())
    dp = PressureField(x[dm.p_offset:dm.mult].reshape(dm.n_cells, dm.nk), dm.mesh.element_areas)
    return du, dp, float(x[dm.mult])
