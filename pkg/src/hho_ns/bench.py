"""Benchmark cases, discrete error norms and convergence studies."""
from __future__ import annotations

import csv
import logging
import re
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import sympy as sp

from .assembly import PressureField
from .errors import InvalidArgument, NewtonDivergedError
from .fespace import interpolate, l2_norm_cells, norm_1h, project_scalar
from .mesh import generate_cartesian, generate_triangular, read_polymesh
from .solver import SolverConfig, discretize, solve_navier_stokes

log = logging.getLogger(__name__)

CSV_COLUMNS = ("meshsize", "err_u", "err_l2_u", "err_p", "iters")


@dataclass
class ExactSolution:
    name: str
    u: Callable
    grad_u: Callable  # (n, 2, 2) with grad_u[:, i, j] = d u_i / d x_j
    p: Callable
    f: Callable
    nu: float
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    f_is_zero: bool = False

    def momentum_residual(self, x, y, h=1e-4):
        """Strong-form residual ``-nu lap u + grad u u + grad p - f`` by central differences."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)

        def lap(fn):
            return (fn(x + h, y) + fn(x - h, y) + fn(x, y + h) + fn(x, y - h) - 4 * fn(x, y)) / h**2

        gp = np.stack([(self.p(x + h, y) - self.p(x - h, y)) / (2 * h),
                       (self.p(x, y + h) - self.p(x, y - h)) / (2 * h)], -1)
        conv = np.einsum("nij,nj->ni", self.grad_u(x, y), self.u(x, y))
        return -self.nu * lap(self.u) + conv + gp - self.f(x, y)


def kovasznay(nu=1.0):
    """Kovasznay flow on ``(-0.5, 1.5) x (0, 2)``; zero body force."""
    if not nu > 0:
        raise InvalidArgument(f"viscosity must be positive, got {nu}")
    re_ = 1.0 / (2.0 * nu)
    lam = re_ - np.sqrt(re_**2 + 4.0 * np.pi**2)
    tp = 2.0 * np.pi

    def u(x, y):
        e = np.exp(lam * x)
        return np.stack([1.0 - e * np.cos(tp * y), lam / tp * e * np.sin(tp * y)], -1)

    def grad_u(x, y):
        e = np.exp(lam * x)
        c, s = np.cos(tp * y), np.sin(tp * y)
        g = np.empty(np.shape(x) + (2, 2))
        g[..., 0, 0] = -lam * e * c
        g[..., 0, 1] = tp * e * s
        g[..., 1, 0] = lam**2 / tp * e * s
        g[..., 1, 1] = lam * e * c
        return g

    def p(x, y):
        return -0.5 * np.exp(2.0 * lam * x) + 0.5 * lam * (np.exp(4.0 * lam) - 1.0) + 0.0 * y

    def f(x, y):
        return np.zeros(np.shape(x) + (2,))

    sol = ExactSolution("kovasznay", u, grad_u, p, f, float(nu), (-0.5, 1.5, 0.0, 2.0), True)
    sol.lam = lam
    return sol


def _lambdify(expr, xs):
    fn = sp.lambdify(xs, expr, "numpy")

    def wrapped(x, y):
        x = np.asarray(x, float)
        return np.broadcast_to(np.asarray(fn(x, y), float), x.shape).copy()

    return wrapped


def manufactured(u_expr, p_expr, nu=1.0, name="manufactured", domain=(0.0, 1.0, 0.0, 1.0), rng=None,
                 convective=True):
    """Exact solution from closed-form ``u`` and ``p``; the load follows from the strong form.

    Expressions are sympy objects or strings in ``x`` and ``y``.  The velocity
    must be divergence free; this is checked at random points of the domain.
    ``convective=False`` gives the Stokes load.
    """
    if not nu > 0:
        raise InvalidArgument(f"viscosity must be positive, got {nu}")
    x, y = sp.symbols("x y")
    try:
        ux, uy = (sp.sympify(e, locals={"x": x, "y": y}) for e in u_expr)
        pe = sp.sympify(p_expr, locals={"x": x, "y": y})
    except (sp.SympifyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"cannot parse manufactured solution: {exc}") from exc
    div = _lambdify(sp.diff(ux, x) + sp.diff(uy, y), (x, y))
    rng = np.random.default_rng(0) if rng is None else rng
    px = rng.uniform(domain[0], domain[1], 64)
    py = rng.uniform(domain[2], domain[3], 64)
    scale = 1.0 + np.abs(_lambdify(ux, (x, y))(px, py)).max() + np.abs(_lambdify(uy, (x, y))(px, py)).max()
    if np.abs(div(px, py)).max() > 1e-10 * scale:
        raise InvalidArgument("manufactured velocity is not divergence free")

    comps = (ux, uy)
    grads = [[sp.diff(c, v) for v in (x, y)] for c in comps]
    fexpr = [-nu * (sp.diff(c, x, 2) + sp.diff(c, y, 2))
             + (grads[i][0] * ux + grads[i][1] * uy if convective else 0) + sp.diff(pe, (x, y)[i])
             for i, c in enumerate(comps)]
    fexpr = [sp.simplify(e) for e in fexpr]
    u_f = [_lambdify(c, (x, y)) for c in comps]
    g_f = [[_lambdify(g, (x, y)) for g in row] for row in grads]
    f_f = [_lambdify(e, (x, y)) for e in fexpr]
    p_f = _lambdify(pe, (x, y))

    def u(a, b):
        return np.stack([fn(a, b) for fn in u_f], -1)

    def grad_u(a, b):
        return np.stack([np.stack([fn(a, b) for fn in row], -1) for row in g_f], -2)

    def f(a, b):
        return np.stack([fn(a, b) for fn in f_f], -1)

    return ExactSolution(name, u, grad_u, p_f, f, float(nu), tuple(domain), all(e == 0 for e in fexpr))


def polynomial_case(nu=1.0):
    """Cubic stream-function flow on the unit square with a bilinear pressure."""
    return manufactured(("x**2*y", "-x*y**2"), "x*y - 1/4", nu, name="polynomial")


CASES = {"kovasznay": kovasznay, "polynomial": polynomial_case}


@dataclass
class ConvergenceRow:
    meshsize: float
    err_u: float
    err_l2_u: float
    err_p: float
    iters: int


def compute_errors(u_h, p_h, exact, mesh, k, iters=0):
    """Errors against the interpolate ``I_h u`` and the zero-mean projection of ``p``."""
    space = discretize(mesh, k).space
    diff = u_h - interpolate(exact.u, space)
    p_ref = PressureField(project_scalar(exact.p, space), mesh.element_areas).minus_mean()
    return ConvergenceRow(mesh.h, norm_1h(diff, space), l2_norm_cells(diff),
                          (p_h.minus_mean() - p_ref).l2_norm(), int(iters))


def slope(hs, errs):
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    hs = np.asarray(hs, float)
    errs = np.asarray(errs, float)
    if len(hs) < 2 or np.any(errs <= 0):
        return float("nan")
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


@dataclass
class ConvergenceTable:
    case: str
    k: int
    form: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], float)

    def slopes(self, last=3):
        hs = self.column("meshsize")[-last:]
        return {c: slope(hs, self.column(c)[-last:]) for c in ("err_u", "err_l2_u", "err_p")}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(r.meshsize)), repr(float(r.err_u)), repr(float(r.err_l2_u)),
                            repr(float(r.err_p)), r.iters])

    def as_dicts(self):
        return [asdict(r) for r in self.rows]


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidArgument(f"unexpected CSV header {reader.fieldnames}")
        types = {f.name: f.type for f in fields(ConvergenceRow)}
        return [ConvergenceRow(**{c: (int if types[c] in (int, "int") else float)(row[c]) for c in CSV_COLUMNS})
                for row in reader]


def mesh_family(spec, domain):
    """Map a refinement level ``n`` to a mesh of ``domain``.

    ``spec`` is ``"cartesian"``, ``"triangular"`` or ``"file:PATH"``; a path
    may contain ``{n}``.  File meshes are affinely mapped onto ``domain``.
    """
    if callable(spec):
        return spec
    if spec == "cartesian":
        return lambda n: generate_cartesian(n, n, domain)
    if spec == "triangular":
        return lambda n: generate_triangular(n, n, domain)
    if isinstance(spec, str) and spec.startswith("file:"):
        pattern = spec[5:]
        if not pattern:
            raise InvalidArgument("empty mesh file path")
        return lambda n: read_polymesh(pattern.replace("{n}", str(n))).mapped(domain)
    raise InvalidArgument(f"unknown mesh family {spec!r}")


def parse_refinements(text):
    if not re.fullmatch(r"\s*\d+(\s*,\s*\d+)*\s*", text or ""):
        raise InvalidArgument(f"refinement list must be comma separated integers, got {text!r}")
    ns = [int(t) for t in text.split(",")]
    if any(n < 1 for n in ns):
        raise InvalidArgument("refinement levels must be positive")
    return ns


def convergence_study(exact, k, family="cartesian", refinements=(4, 8, 16, 32), config=None):
    """Navier-Stokes solves over a refinement list; one row per level."""
    config = config or SolverConfig(nu=exact.nu)
    if config.nu != exact.nu:
        raise InvalidArgument(f"config viscosity {config.nu} differs from the case's {exact.nu}")
    if k < 0:
        raise InvalidArgument("degree must be nonnegative")
    make = mesh_family(family, exact.domain)
    table = ConvergenceTable(exact.name, int(k), config.form)
    f = None if exact.f_is_zero else exact.f
    t0 = time.perf_counter()
    for n in refinements:
        mesh = make(n)
        try:
            u_h, p_h, rep = solve_navier_stokes(mesh, k, config, f=f, g=exact.u)
        except NewtonDivergedError as exc:
            raise NewtonDivergedError(f"{exact.name}, k={k}, level {n}: {exc}", exc.report) from exc
        row = compute_errors(u_h, p_h, exact, mesh, k, rep.iterations)
        log.info("%s k=%d n=%d h=%.4g err_u=%.3e err_l2_u=%.3e err_p=%.3e iters=%d",
                 exact.name, k, n, row.meshsize, row.err_u, row.err_l2_u, row.err_p, row.iters)
        if table.rows and not row.meshsize < table.rows[-1].meshsize:
            raise InvalidArgument("mesh sizes must decrease along the refinement list")
        table.rows.append(row)
    table.seconds = time.perf_counter() - t0
    return table
