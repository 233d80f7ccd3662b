import numpy as np
import pytest

from hho_ns.fespace import HHOSpace, interpolate
from hho_ns.mesh import Mesh

ELEMENTS = {
    "square": [(0.2, 0.1), (0.7, 0.1), (0.7, 0.6), (0.2, 0.6)],
    "triangle": [(0.0, 0.0), (1.0, 0.2), (0.3, 0.9)],
    "hexagon": [(0.0, 0.0), (0.6, -0.1), (1.0, 0.4), (0.9, 0.9), (0.3, 1.0), (-0.15, 0.5)],
}

ACCEPTANCE_LINES = []


def single_element_space(kind, k):
    pts = np.array(ELEMENTS[kind], float)
    return HHOSpace(Mesh(pts, [list(range(len(pts)))]), k)


def scalar_interpolate(q, space, t=0):
    """Scalar local interpolate ``I_T q`` on element ``t``."""
    v = interpolate(lambda x, y: np.stack([q(x, y), 0 * x], -1), space)
    n_s = len(v.local(space, t)) // 2
    return v.local(space, t)[:n_s]


@pytest.fixture(params=sorted(ELEMENTS))
def element_kind(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def hanging_node_mesh():
    """Unit square: two pentagons on the left, a 2x4 grid of small squares on the right."""
    xs = [0.0, 0.25, 0.5, 0.75, 1.0]
    verts = [(x, y) for y in xs for x in xs]

    def vid(i, j):
        return j * 5 + i

    elems = [
        [vid(0, 0), vid(2, 0), vid(2, 1), vid(2, 2), vid(0, 2)],
        [vid(0, 2), vid(2, 2), vid(2, 3), vid(2, 4), vid(0, 4)],
    ]
    for j in range(4):
        for i in (2, 3):
            elems.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return Mesh(np.array(verts), elems)
