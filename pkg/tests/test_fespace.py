import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ELEMENTS, hanging_node_mesh, single_element_space
from hho_ns.errors import InvalidArgument, InvalidMesh, QuadratureCapabilityError
from hho_ns.fespace import (
    BasisSpec,
    ElementBasis,
    FaceBasis,
    HHOSpace,
    HybridVelocity,
    dim_poly,
    face_quadrature,
    interpolate,
    l2_norm_cells,
    l2_project_element,
    norm_1h,
    polygon_quadrature,
    project_scalar,
    triangle_quadrature,
)
from hho_ns.mesh import Mesh, generate_cartesian


def test_basis_spec_dimensions():
    s = BasisSpec(2)
    assert (s.n_cell, s.n_recon, s.n_face) == (6, 10, 3)
    assert s.cell_quad_degree == 8
    assert s.face_quad_degree == 7
    with pytest.raises(InvalidArgument):
        BasisSpec(-1)


@given(a=st.integers(0, 8), b=st.integers(0, 8))
@settings(max_examples=40, deadline=None)
def test_triangle_rule_integrates_monomials(a, b):
    # int_{ref triangle} x^a y^b = a! b! / (a + b + 2)!
    from math import factorial

    q = triangle_quadrature([0, 0], [1, 0], [0, 1], a + b)
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert q.integrate(q.points[:, 0] ** a * q.points[:, 1] ** b) == pytest.approx(exact, rel=1e-12)


def test_polygon_rule_area_and_first_moments():
    g = single_element_space("hexagon", 0).mesh.element_geom(0)
    q = polygon_quadrature(g, 4)
    assert q.integrate(np.ones(len(q.weights))) == pytest.approx(g.area, rel=1e-13)
    assert np.allclose(q.integrate(q.points) / g.area, g.centroid)


def test_face_rule():
    q = face_quadrature([0, 0], [3, 4], 5)
    s = np.linalg.norm(q.points, axis=1) / 5
    assert q.integrate(s**5) == pytest.approx(5 / 6, rel=1e-13)


def test_quadrature_degree_limits():
    with pytest.raises(QuadratureCapabilityError):
        face_quadrature([0, 0], [1, 0], 61)
    with pytest.raises(QuadratureCapabilityError):
        triangle_quadrature([0, 0], [1, 0], [0, 1], -1)


@pytest.mark.parametrize("kind", sorted(ELEMENTS))
@pytest.mark.parametrize("degree", [0, 2, 4])
def test_element_basis_orthonormal_and_hierarchical(kind, degree):
    g = single_element_space(kind, 0).mesh.element_geom(0)
    basis = ElementBasis(g, degree)
    q = polygon_quadrature(g, 2 * degree + 2)
    phi = basis.eval(q.points)
    M = (phi * q.weights[:, None]).T @ phi
    assert np.abs(M - np.eye(basis.size)).max() < 1e-12
    assert np.allclose(phi[:, 0], 1 / np.sqrt(g.area))
    # hierarchical: the first dim P^l functions only use monomials of degree <= l
    for l in range(degree):
        assert np.abs(basis.coef[:dim_poly(l), dim_poly(l):]).max() < 1e-12


def test_element_basis_gradient_by_differences():
    g = single_element_space("triangle", 0).mesh.element_geom(0)
    b = ElementBasis(g, 3)
    x = np.array([[0.4, 0.3]])
    e = 1e-6
    fd = np.stack([(b.eval(x + [e, 0]) - b.eval(x - [e, 0]))[0] / (2 * e),
                   (b.eval(x + [0, e]) - b.eval(x - [0, e]))[0] / (2 * e)], -1)
    assert np.allclose(b.eval_grad(x)[0], fd, atol=1e-6)


def test_element_basis_rejects_weak_quadrature():
    g = single_element_space("square", 0).mesh.element_geom(0)
    with pytest.raises(QuadratureCapabilityError):
        ElementBasis(g, 3, polygon_quadrature(g, 4))


def test_face_basis_orthonormal():
    fb = FaceBasis([0.1, 0.2], [0.9, -0.4], 4)
    q = face_quadrature(fb.a, fb.b, 10)
    psi = fb.eval(q.points)
    assert np.abs((psi * q.weights[:, None]).T @ psi - np.eye(5)).max() < 1e-13


def test_projection_reproduces_polynomials():
    g = single_element_space("hexagon", 0).mesh.element_geom(0)
    b = ElementBasis(g, 3)
    c = l2_project_element(lambda x, y: x**3 - 2 * x * y + 1, g, 3, basis=b)
    pts = np.array([[0.3, 0.5], [0.6, 0.2]])
    assert np.allclose(b.eval(pts) @ c, pts[:, 0] ** 3 - 2 * pts[:, 0] * pts[:, 1] + 1)


def test_space_rejects_non_star_shaped():
    verts = [[0, 0], [3, 0], [3, 0.2], [0.2, 0.2], [0.2, 2.8], [3, 2.8], [3, 3], [0, 3]]
    with pytest.raises(InvalidMesh):
        HHOSpace(Mesh(verts, [list(range(8))]), 1)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_interpolate_constant_has_zero_discrete_gradient(k):
    sp = HHOSpace(hanging_node_mesh(), k)
    v = interpolate(lambda x, y: np.stack([0 * x + 2.0, 0 * x - 1.0], -1), sp)
    assert norm_1h(v, sp) < 1e-12
    assert l2_norm_cells(v) == pytest.approx(np.sqrt(5.0), rel=1e-12)


def test_norm_1h_of_linear_field():
    sp = HHOSpace(generate_cartesian(3, 3), 1)
    v = interpolate(lambda x, y: np.stack([x, 0 * x], -1), sp)
    assert norm_1h(v, sp) == pytest.approx(1.0, rel=1e-12)


def test_hybrid_velocity_arithmetic_and_views():
    sp = HHOSpace(generate_cartesian(2, 2), 1)
    a = interpolate(lambda x, y: np.stack([x, y], -1), sp)
    b = 2.0 * a - a
    assert np.allclose(b.data, a.data)
    b.cells[0, 0, 0] = 7.0
    assert b.data[0] == 7.0
    with pytest.raises(InvalidArgument):
        HybridVelocity(1, 4, 12, np.zeros(3))
    assert len(a.local(sp, 0)) == 2 * (3 + 4 * 2)


def test_project_scalar_shape_and_mean():
    sp = HHOSpace(generate_cartesian(2, 2), 2)
    c = project_scalar(lambda x, y: 0 * x + 3.0, sp)
    assert c.shape == (4, 6)
    assert np.allclose(c[:, 1:], 0, atol=1e-13)
    assert np.allclose(c[:, 0], 3.0 * np.sqrt(sp.mesh.element_areas))
