"""Stokes and Navier-Stokes solves on the statically condensed system."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .assembly import (
    PressureField,
    assemble_linearized,
    build_dofmap,
    recover_local,
    static_condense,
)
from .errors import InvalidArgument, NewtonDivergedError, SolverError
from .fespace import HHOSpace, HybridVelocity, _evaluate, norm_1h
from .local_ops import FORMS, build_packs

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    nu: float = 1.0
    tol: float = 1e-10
    max_iter: int = 25
    form: str = "hho"
    eta: float = 0.0
    backtracking: bool = True  # residual-halving fallback, only used when a full step fails
    max_halvings: int = 5

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidArgument(f"viscosity must be positive, got {self.nu}")
        if not self.tol > 0:
            raise InvalidArgument(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be at least 1")
        if self.form not in FORMS:
            raise InvalidArgument(f"unknown trilinear form {self.form!r}")
        if self.eta < 0:
            raise InvalidArgument(f"eta must be nonnegative, got {self.eta}")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    norm_u_1h: float = float("nan")
    norm_p_l2: float = float("nan")
    energy_defect: float = float("nan")  # nu a_h(u, u) - (f, u_h)
    energy_load: float = float("nan")  # (f, u_h)
    mass_residual: float = float("nan")
    multiplier: float = 0.0
    reference_residual: float = 0.0


class Discretization:
    """Space, local operators and DOF map for one mesh and degree."""

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = int(k)
        self.space = HHOSpace(mesh, self.k)
        self.packs = build_packs(self.space)
        self.dofmap = build_dofmap(mesh, self.k)

    def load(self, f):
        """Vector local load vectors ``(f, v_T)`` per element."""
        out = []
        nk = self.space.nk
        for ed, pk in zip(self.space.elements, self.packs):
            r = np.zeros(pk.n_vel)
            if f is not None:
                vals = _evaluate(f, ed.quad.points)
                m = (ed.phi[:, :nk] * ed.quad.weights[:, None]).T @ vals  # (nk, 2)
                r[:nk] = m[:, 0]
                r[pk.n_s:pk.n_s + nk] = m[:, 1]
            out.append(r)
        return out

    def lifting(self, g):
        """Zero everywhere except boundary faces, which carry pi_F^k g."""
        u = HybridVelocity.zeros(self.space)
        if g is None:
            return u
        for ed in self.space.elements:
            for j, f in enumerate(ed.face_ids):
                if ed.boundary[j]:
                    vals = _evaluate(g, ed.ptsf[j])
                    u.faces[f] = np.tensordot(ed.psif[j] * ed.wf[j][:, None], vals, axes=(0, 0)).T
        return u

    def viscous_energy(self, u):
        return float(sum(u.local(self.space, t) @ pk.A_vec @ u.local(self.space, t)
                         for t, pk in enumerate(self.packs)))

    def load_pairing(self, load, u):
        return float(sum(load[t] @ u.local(self.space, t) for t in range(len(self.packs))))


@lru_cache(maxsize=8)
def discretize(mesh, k):
    return Discretization(mesh, k)


def _condensed_at(disc, u, p, lam, config, load, convection):
    system = assemble_linearized(disc.space, disc.packs, disc.dofmap, u, p, lam, config.nu, load,
                                 config.form, config.eta, convection)
    return static_condense(system)


def _apply(disc, cs, u, p, lam, step=1.0):
    x = cs.solve()
    if not np.all(np.isfinite(x)):
        raise SolverError("sparse factorization produced non-finite values")
    du, dp, dlam = recover_local(cs, x, disc.space)
    return u + step * du, PressureField(p.coeffs + step * dp.coeffs, p.areas), lam + step * dlam, (du, dp, dlam)


def _finalize(disc, u, p, lam, load, config, report, system):
    report.norm_u_1h = norm_1h(u, disc.space)
    report.norm_p_l2 = p.l2_norm()
    report.energy_load = disc.load_pairing(load, u)
    report.energy_defect = config.nu * disc.viscous_energy(u) - report.energy_load
    mass = [system.res[t][pk.n_vel:] for t, pk in enumerate(disc.packs)]
    report.mass_residual = float(max(np.abs(m).max() for m in mass))
    report.multiplier = lam


def solve_stokes(mesh, k, config=None, f=None, g=None):
    """Linear Stokes problem (the discrete problem without the convective term)."""
    config = config or SolverConfig()
    disc = discretize(mesh, k)
    load = disc.load(f)
    u = disc.lifting(g)
    p = PressureField.zeros(disc.space)
    cs = _condensed_at(disc, u, p, 0.0, config, load, convection=False)
    report = SolveReport(reference_residual=cs.residual_norm)
    u, p, lam, _ = _apply(disc, cs, u, p, 0.0)
    cs = _condensed_at(disc, u, p, lam, config, load, convection=False)
    report.iterations = 1
    ref = report.reference_residual
    report.residual_history = [cs.residual_norm / (ref if ref > 0 else 1.0)]
    report.converged = True
    _finalize(disc, u, p, lam, load, config, report, cs.system)
    return u, p, report


def solve_navier_stokes(mesh, k, config=None, f=None, g=None):
    """Newton iteration started from the Stokes solution.

    The stopping test is ``|r_n| <= tol * |r_ref|`` where ``r`` is the
    condensed residual and ``r_ref`` the condensed residual of the Dirichlet
    lifting (the right-hand side once the boundary data are moved there);
    when the data vanish the test is absolute.  ``iterations`` counts linear
    solves, the Stokes initial guess included.
    """
    config = config or SolverConfig()
    disc = discretize(mesh, k)
    load = disc.load(f)
    u = disc.lifting(g)
    p = PressureField.zeros(disc.space)
    lam = 0.0

    cs = _condensed_at(disc, u, p, lam, config, load, convection=True)
    ref = cs.residual_norm
    scale = ref if ref > 0 else 1.0
    report = SolveReport(reference_residual=ref)

    stokes = _condensed_at(disc, u, p, lam, config, load, convection=False)
    u, p, lam, _ = _apply(disc, stokes, u, p, lam)
    report.iterations = 1

    cs = _condensed_at(disc, u, p, lam, config, load, convection=True)
    while True:
        r = cs.residual_norm / scale
        report.residual_history.append(r)
        log.debug("newton it=%d residual=%.3e", report.iterations, r)
        if r <= config.tol:
            report.converged = True
            break
        if report.iterations >= config.max_iter or not np.isfinite(r):
            _finalize(disc, u, p, lam, load, config, report, cs.system)
            raise NewtonDivergedError(
                f"Newton did not converge in {report.iterations} iterations (residual {r:.3e})", report)
        u_new, p_new, lam_new, (du, dp, dlam) = _apply(disc, cs, u, p, lam)
        cs_new = _condensed_at(disc, u_new, p_new, lam_new, config, load, convection=True)
        step = 1.0
        halvings = 0
        while (config.backtracking and halvings < config.max_halvings
               and not cs_new.residual_norm < cs.residual_norm):
            step *= 0.5
            halvings += 1
            u_new = u + step * du
            p_new = PressureField(p.coeffs + step * dp.coeffs, p.areas)
            lam_new = lam + step * dlam
            cs_new = _condensed_at(disc, u_new, p_new, lam_new, config, load, convection=True)
        if halvings:
            log.info("newton step damped by %g", step)
        u, p, lam, cs = u_new, p_new, lam_new, cs_new
        report.iterations += 1

    _finalize(disc, u, p, lam, load, config, report, cs.system)
    return u, p, report


def apriori_check(u, p, config, f, mesh, k):
    """Scaled norms mirroring the a priori bounds (reported, never asserted).

    Returns ``nu |u_h|_{1,h} / |f|`` and ``|p_h| / (|f| + |f|^2 / nu^2)``; both
    are zero when ``f`` vanishes.
    """
    disc = discretize(mesh, k)
    fnorm = 0.0
    if f is not None:
        for ed in disc.space.elements:
            vals = _evaluate(f, ed.quad.points)
            fnorm += float(ed.quad.weights @ (vals**2).sum(-1))
    fnorm = np.sqrt(fnorm)
    nu_ = config.nu
    un = norm_1h(u, disc.space)
    pn = p.l2_norm()
    out = {"f_l2": fnorm, "u_1h": un, "p_l2": pn}
    if fnorm > 0:
        out["velocity_ratio"] = nu_ * un / fnorm
        out["pressure_ratio"] = pn / (fnorm + fnorm**2 / nu_**2)
    else:
        out["velocity_ratio"] = 0.0
        out["pressure_ratio"] = 0.0
    log.info("a priori check: %s", out)
    return out
