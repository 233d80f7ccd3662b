import numpy as np
import pytest

from conftest import hanging_node_mesh
from hho_ns.assembly import (
    PressureField,
    assemble_linearized,
    build_dofmap,
    recover_local,
    solve_uncondensed,
    static_condense,
)
from hho_ns.errors import InvalidArgument
from hho_ns.fespace import HHOSpace, HybridVelocity, dim_poly, interpolate
from hho_ns.local_ops import build_packs
from hho_ns.mesh import generate_cartesian, generate_triangular


def _setup(mesh, k):
    space = HHOSpace(mesh, k)
    return space, build_packs(space), build_dofmap(mesh, k)


def _random_state(space, seed):
    rng = np.random.default_rng(seed)
    u = HybridVelocity.zeros(space)
    u.data[:] = rng.standard_normal(u.data.shape)
    p = PressureField(rng.standard_normal((space.mesh.n_elements, space.nk)), space.mesh.element_areas)
    return u, p, float(rng.standard_normal())


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("mesh", [generate_cartesian(3, 2), generate_triangular(2, 2), hanging_node_mesh()],
                         ids=["cartesian", "triangular", "hanging"])
def test_dof_counts(mesh, k):
    dm = build_dofmap(mesh, k)
    assert dm.n_vel == 2 * (mesh.n_elements * dim_poly(k) + mesh.n_faces * (k + 1))
    assert dm.condensed_dim == 2 * len(mesh.interior_faces) * (k + 1) + mesh.n_elements + 1
    assert dm.n_full == dm.n_vel + mesh.n_elements * dim_poly(k) + 1


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("form,eta", [("hho", 0.0), ("hdg", 0.0), ("hdg", 1.0)])
def test_condensed_matches_full_newton_step(k, form, eta):
    mesh = hanging_node_mesh()
    space, packs, dm = _setup(mesh, k)
    u, p, lam = _random_state(space, k)
    # Dirichlet faces must carry the boundary data; any values work for the comparison
    load = [np.random.default_rng(9).standard_normal(pk.n_vel) for pk in packs]
    system = assemble_linearized(space, packs, dm, u, p, lam, 0.3, load, form, eta)
    cs = static_condense(system)
    du, dp, dl = recover_local(cs, cs.solve(), space)
    du_f, dp_f, dl_f = solve_uncondensed(system, space)
    assert np.linalg.norm(du.data - du_f.data) <= 1e-9 * np.linalg.norm(du_f.data)
    assert np.linalg.norm(dp.coeffs - dp_f.coeffs) <= 1e-9 * np.linalg.norm(dp_f.coeffs)
    assert dl == pytest.approx(dl_f, rel=1e-9, abs=1e-12)


def test_residual_vanishes_after_linear_step():
    mesh = generate_triangular(3, 3)
    space, packs, dm = _setup(mesh, 1)
    u = interpolate(lambda x, y: np.stack([np.sin(y), np.cos(x)], -1), space)
    for f in mesh.interior_faces:
        u.faces[f] = 0.0
    p = PressureField.zeros(space)
    system = assemble_linearized(space, packs, dm, u, p, 0.0, 1.0, convection=False)
    cs = static_condense(system)
    du, dp, dl = recover_local(cs, cs.solve(), space)
    u2 = u + du
    p2 = PressureField(p.coeffs + dp.coeffs, p.areas)
    after = static_condense(assemble_linearized(space, packs, dm, u2, p2, dl, 1.0, convection=False))
    assert after.residual_norm < 1e-12 * max(cs.residual_norm, 1.0)
    assert abs(p2.integral()) < 1e-12
    r = after.system.residual_vector()
    interior = ~dm.boundary_mask_full()
    assert np.abs(r[interior]).max() < 1e-10


def test_boundary_face_increments_vanish():
    mesh = generate_cartesian(2, 2)
    space, packs, dm = _setup(mesh, 1)
    u, p, lam = _random_state(space, 3)
    cs = static_condense(assemble_linearized(space, packs, dm, u, p, lam, 1.0))
    du, _, _ = recover_local(cs, cs.solve(), space)
    assert np.all(du.faces[mesh.boundary_faces] == 0.0)


def test_pressure_field_helpers():
    areas = np.array([1.0, 3.0])
    p = PressureField(np.array([[1.0, 2.0], [np.sqrt(3.0), 0.0]]), areas)
    assert p.integral() == pytest.approx(1.0 + 3.0)
    assert p.mean() == pytest.approx(1.0)
    q = p.minus_mean()
    assert q.integral() == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(q.coeffs[:, 1:], p.coeffs[:, 1:])
    assert (p - p).l2_norm() == 0.0


def test_assembly_validates_inputs():
    mesh = generate_cartesian(2, 2)
    space, packs, dm = _setup(mesh, 1)
    u, p, lam = _random_state(space, 0)
    with pytest.raises(InvalidArgument):
        assemble_linearized(space, packs, dm, u, p, lam, 0.0)
    with pytest.raises(InvalidArgument):
        assemble_linearized(space, packs, build_dofmap(mesh, 2), u, p, lam, 1.0)
    with pytest.raises(InvalidArgument):
        assemble_linearized(space, packs, dm, u, p, lam, 1.0, form="sup")
