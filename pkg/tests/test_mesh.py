import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hanging_node_mesh
from hho_ns.errors import InvalidArgument, InvalidMesh, MeshParseError
from hho_ns.mesh import (
    Mesh,
    generate_cartesian,
    generate_triangular,
    polygon_area_centroid,
    read_polymesh,
    validate_mesh,
    write_polymesh,
)


def _euler_ok(mesh):
    used = {int(v) for e in mesh.elements for v in e}
    return len(used) - mesh.n_faces + mesh.n_elements == 1


@given(nx=st.integers(1, 6), ny=st.integers(1, 6))
@settings(max_examples=20, deadline=None)
def test_cartesian_counts_and_normals(nx, ny):
    m = generate_cartesian(nx, ny, (-0.5, 1.5, 0.0, 2.0))
    assert m.n_elements == nx * ny
    assert m.n_faces == nx * (ny + 1) + ny * (nx + 1)
    assert len(m.boundary_faces) == 2 * (nx + ny)
    assert _euler_ok(m)
    assert m.measure == pytest.approx(4.0)
    for t in range(m.n_elements):
        g = m.element_geom(t)
        # divergence theorem: sum of |F| n_TF vanishes on closed polygons
        s = sum(f.measure * f.normal for f in g.faces)
        assert np.allclose(s, 0.0, atol=1e-13)
        for f in g.faces:
            mid = 0.5 * (f.a + f.b)
            assert np.dot(mid - g.centroid, f.normal) > 0


def test_triangular_counts():
    m = generate_triangular(3, 2)
    assert m.n_elements == 12
    assert _euler_ok(m)
    assert m.h == pytest.approx(np.hypot(1 / 3, 1 / 2))


def test_boundary_normals_point_outward():
    m = generate_triangular(4, 4)
    c = np.array([0.5, 0.5])
    for f in m.boundary_faces:
        assert np.dot(m.face_centers[f] - c, m.face_normals[f]) > 0


def test_interior_face_normals_are_opposite_between_neighbours():
    m = hanging_node_mesh()
    for f in m.interior_faces:
        t0, t1 = m.face_elements[f]
        n0 = [g.normal for g in m.element_geom(t0).faces if g.index == f][0]
        n1 = [g.normal for g in m.element_geom(t1).faces if g.index == f][0]
        assert np.allclose(n0, -n1)


def test_polygon_area_centroid():
    a, c = polygon_area_centroid(np.array([[0, 0], [2, 0], [2, 1], [0, 1]], float))
    assert a == pytest.approx(2.0)
    assert np.allclose(c, [1.0, 0.5])


def test_rejects_clockwise_and_bad_topology():
    with pytest.raises(InvalidMesh):
        Mesh([[0, 0], [0, 1], [1, 0]], [[0, 1, 2]])
    with pytest.raises(InvalidMesh):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 5]])
    with pytest.raises(InvalidMesh):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1]])
    # three triangles on one edge
    v = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 2]]
    with pytest.raises(InvalidMesh):
        Mesh(v, [[0, 1, 2], [0, 3, 1], [0, 1, 4]])


def test_generators_validate_arguments():
    with pytest.raises(InvalidArgument):
        generate_cartesian(0, 2)
    with pytest.raises(InvalidArgument):
        generate_cartesian(2, 2, (1.0, 0.0, 0.0, 1.0))


def test_roundtrip(tmp_path):
    m = hanging_node_mesh()
    path = tmp_path / "m.txt"
    write_polymesh(m, path)
    back = read_polymesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert all(np.array_equal(a, b) for a, b in zip(back.elements, m.elements))
    assert back.n_faces == m.n_faces


def test_parser_comments_and_errors(tmp_path):
    p = tmp_path / "ok.txt"
    p.write_text("# unit square\n4 1\n0 0\n1 0 # corner\n1 1\n0 1\n\n4 0 1 2 3\n")
    assert read_polymesh(p).n_elements == 1
    cases = {
        "4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2\n": 6,
        "4 1\n0 0\n1 zero\n1 1\n0 1\n4 0 1 2 3\n": 3,
        "4 2\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n": 6,
        "4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 9\n": 6,
        "x 1\n": 1,
    }
    for text, line in cases.items():
        p.write_text(text)
        with pytest.raises(MeshParseError) as exc:
            read_polymesh(p)
        assert exc.value.lineno == line


def test_diagnostics_flag_non_star_shaped_element():
    # a thin "C"-shaped polygon whose centroid lies outside
    verts = [[0, 0], [3, 0], [3, 0.2], [0.2, 0.2], [0.2, 2.8], [3, 2.8], [3, 3], [0, 3]]
    d = validate_mesh(Mesh(verts, [list(range(8))]))
    assert not d.ok
    assert d.flagged == (0,)
    assert validate_mesh(generate_cartesian(3, 3)).ok
    s = validate_mesh(hanging_node_mesh()).summary()
    assert s["n_elements"] == 10 and s["n_flagged"] == 0


def test_mapped_and_permuted():
    m = generate_cartesian(2, 3)
    mm = m.mapped((-0.5, 1.5, 0.0, 2.0))
    assert mm.bbox == pytest.approx((-0.5, 1.5, 0.0, 2.0))
    assert mm.measure == pytest.approx(4.0)
    p = m.permuted([5, 4, 3, 2, 1, 0])
    assert np.allclose(p.element_areas, m.element_areas[::-1])
