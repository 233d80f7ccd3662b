import numpy as np
import pytest

from conftest import hanging_node_mesh
from hho_ns.assembly import PressureField
from hho_ns.bench import kovasznay, manufactured
from hho_ns.errors import InvalidArgument, NewtonDivergedError
from hho_ns.fespace import interpolate, l2_norm_cells, norm_1h, project_scalar
from hho_ns.mesh import generate_cartesian, generate_triangular
from hho_ns.solver import SolverConfig, apriori_check, discretize, solve_navier_stokes, solve_stokes

# divergence-free velocities of exact degree k+1 (curl of a stream function) and pressures in P^k
STOKES_CASES = {
    0: (("x", "-y"), "0"),
    1: (("x**2 + y**2", "-2*x*y"), "x - 2*y"),
    2: (("x**3 - 3*x*y**2", "y**3 - 3*x**2*y"), "x*y - y**2 + 1"),
    3: (("x**4 + y**4", "-4*x**3*y"), "x**2*y - x*y + 2"),
}


def _stokes_errors(mesh, k):
    u_expr, p_expr = STOKES_CASES[k]
    ex = manufactured(u_expr, p_expr, nu=1.0, convective=False)
    u, p, rep = solve_stokes(mesh, k, SolverConfig(), f=ex.f, g=ex.u)
    sp = discretize(mesh, k).space
    d = u - interpolate(ex.u, sp)
    pref = PressureField(project_scalar(ex.p, sp), mesh.element_areas).minus_mean()
    return norm_1h(d, sp), l2_norm_cells(d), (p - pref).l2_norm(), rep


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("mesh", [generate_cartesian(3, 3), generate_triangular(2, 3), hanging_node_mesh()],
                         ids=["cartesian", "triangular", "hanging"])
def test_stokes_polynomial_exactness(mesh, k):
    e1, e0, ep, rep = _stokes_errors(mesh, k)
    assert max(e1, e0, ep) < 1e-8
    assert rep.iterations == 1
    assert rep.mass_residual < 1e-10


def test_zero_data_converges_to_zero_in_one_iteration():
    u, p, rep = solve_navier_stokes(generate_cartesian(3, 3), 1)
    assert rep.converged and rep.iterations == 1
    assert np.abs(u.data).max() == 0.0 and np.abs(p.coeffs).max() == 0.0


@pytest.mark.parametrize("form", ["hho", "hdg"])
def test_navier_stokes_kovasznay_small(form):
    ex = kovasznay()
    mesh = generate_cartesian(6, 6, ex.domain)
    u, p, rep = solve_navier_stokes(mesh, 2, SolverConfig(form=form), g=ex.u)
    assert rep.converged
    assert rep.residual_history[-1] <= 1e-10
    assert abs(p.integral()) < 1e-10
    assert rep.mass_residual < 1e-9
    assert rep.norm_u_1h > 0 and rep.norm_p_l2 > 0


def test_divergence_raises_with_report():
    ex = kovasznay()
    mesh = generate_cartesian(4, 4, ex.domain)
    with pytest.raises(NewtonDivergedError) as exc:
        solve_navier_stokes(mesh, 1, SolverConfig(max_iter=2), g=ex.u)
    rep = exc.value.report
    assert rep is not None and not rep.converged
    assert len(rep.residual_history) == 2


def test_energy_identity_zero_boundary_data():
    f = lambda x, y: np.stack([np.sin(np.pi * y) + x, np.cos(2 * x) * y], -1)
    mesh = generate_triangular(4, 4)
    cfg = SolverConfig(tol=1e-10)
    u, p, rep = solve_navier_stokes(mesh, 1, cfg, f=f)
    assert abs(rep.energy_defect) <= 10 * cfg.tol * abs(rep.energy_load)
    checks = apriori_check(u, p, cfg, f, mesh, 1)
    assert checks["velocity_ratio"] > 0 and checks["pressure_ratio"] > 0


def test_config_validation():
    for kwargs in ({"nu": 0}, {"tol": -1}, {"max_iter": 0}, {"form": "x"}, {"eta": -0.1}):
        with pytest.raises(InvalidArgument):
            SolverConfig(**kwargs)
