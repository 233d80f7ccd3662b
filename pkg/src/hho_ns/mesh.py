"""Two-dimensional polygonal meshes with the face topology used by HHO operators.

Faces are stored once, globally, with a fixed normal ``n_F``.  For interior
faces the normal is the clockwise rotation of the tangent running from the
lower to the higher vertex index; boundary faces carry the outward normal.
Each element keeps the list of its faces together with a sign so that the
outward normal is ``n_TF = sign * n_F``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidMesh, MeshParseError


@dataclass(frozen=True)
class FaceGeom:
    """Geometry of one face seen from one element."""

    index: int
    a: np.ndarray  # canonical endpoints (lower, higher vertex index)
    b: np.ndarray
    normal: np.ndarray  # n_TF, outward from the element
    measure: float
    boundary: bool

    @property
    def center(self):
        return 0.5 * (self.a + self.b)

    @property
    def diameter(self):
        return self.measure


@dataclass(frozen=True)
class ElementGeom:
    index: int
    vertices: np.ndarray  # (m, 2), counterclockwise
    centroid: np.ndarray
    area: float
    diameter: float
    faces: tuple = field(default_factory=tuple)

    def subtriangles(self):
        """Triangles (centroid, v_i, v_{i+1}) covering a centroid-star-shaped polygon."""
        v = self.vertices
        return [(self.centroid, v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def polygon_area_centroid(pts):
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _diameter(pts):
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


class Mesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (nv, 2) array
    elements : sequence of vertex index lists, counterclockwise
    """

    def __init__(self, vertices, elements):
        self.vertices = np.array(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InvalidMesh("vertices must be an (n, 2) array")
        self.vertices.setflags(write=False)
        self.elements = tuple(np.array(e, dtype=np.int64) for e in elements)
        if not self.elements:
            raise InvalidMesh("mesh has no elements")
        nv = len(self.vertices)
        for t, e in enumerate(self.elements):
            if len(e) < 3:
                raise InvalidMesh(f"element {t} has fewer than 3 vertices")
            if e.min() < 0 or e.max() >= nv:
                raise InvalidMesh(f"element {t} references a missing vertex")
            if len(set(e.tolist())) != len(e):
                raise InvalidMesh(f"element {t} repeats a vertex")
        self._build_geometry()
        self._build_faces()

    def _build_geometry(self):
        n = len(self.elements)
        self.element_areas = np.empty(n)
        self.element_centroids = np.empty((n, 2))
        self.element_diameters = np.empty(n)
        for t, e in enumerate(self.elements):
            pts = self.vertices[e]
            area, c = polygon_area_centroid(pts)
            if area <= 0.0:
                raise InvalidMesh(f"element {t} is clockwise or degenerate (signed area {area:g})")
            self.element_areas[t] = area
            self.element_centroids[t] = c
            self.element_diameters[t] = _diameter(pts)

    def _build_faces(self):
        lookup = {}
        faces = []
        face_elements = []
        element_faces = []
        element_signs = []
        for t, e in enumerate(self.elements):
            fl, sl = [], []
            m = len(e)
            for i in range(m):
                va, vb = int(e[i]), int(e[(i + 1) % m])
                key = (min(va, vb), max(va, vb))
                forward = va < vb
                if key in lookup:
                    f = lookup[key]
                    inc = face_elements[f]
                    if len(inc) >= 2:
                        raise InvalidMesh(f"edge {key} is shared by more than two elements")
                    if inc[0][1] == forward:
                        raise InvalidMesh(f"edge {key} is traversed in the same direction by elements "
                                          f"{inc[0][0]} and {t} (inconsistent orientation)")
                    inc.append((t, forward))
                else:
                    f = len(faces)
                    lookup[key] = f
                    faces.append(key)
                    face_elements.append([(t, forward)])
                fl.append(f)
                sl.append(forward)
            element_faces.append(fl)
            element_signs.append(sl)

        nf = len(faces)
        self.faces = np.array(faces, dtype=np.int64).reshape(nf, 2)
        self.face_elements = np.full((nf, 2), -1, dtype=np.int64)
        self.boundary = np.zeros(nf, dtype=bool)
        self.face_normals = np.empty((nf, 2))
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        tang = b - a
        self.face_measures = np.sqrt((tang**2).sum(1))
        if np.any(self.face_measures == 0.0):
            raise InvalidMesh("zero-length face")
        canonical = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / self.face_measures[:, None]
        # the element walking lo->hi sees the canonical normal as outward
        flip = np.ones(nf)
        for f, inc in enumerate(face_elements):
            for j, (t, _) in enumerate(inc):
                self.face_elements[f, j] = t
            if len(inc) == 1:
                self.boundary[f] = True
                if not inc[0][1]:
                    flip[f] = -1.0
        self.face_normals = canonical * flip[:, None]
        self.element_faces = tuple(np.array(fl, dtype=np.int64) for fl in element_faces)
        signs = []
        for t, (fl, sl) in enumerate(zip(element_faces, element_signs)):
            s = np.array([1.0 if fw else -1.0 for fw in sl]) * flip[fl]
            signs.append(s)
        self.element_face_signs = tuple(signs)
        self.face_centers = 0.5 * (a + b)

    # -- sizes ------------------------------------------------------------

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def interior_faces(self):
        return np.flatnonzero(~self.boundary)

    @cached_property
    def boundary_faces(self):
        return np.flatnonzero(self.boundary)

    @property
    def h(self):
        return float(self.element_diameters.max())

    @property
    def measure(self):
        return float(self.element_areas.sum())

    @cached_property
    def bbox(self):
        lo = self.vertices.min(0)
        hi = self.vertices.max(0)
        return (lo[0], hi[0], lo[1], hi[1])

    # -- per-element geometry --------------------------------------------

    def element_geom(self, t):
        return self._geoms[t]

    @cached_property
    def _geoms(self):
        out = []
        for t, e in enumerate(self.elements):
            fg = []
            for f, s in zip(self.element_faces[t], self.element_face_signs[t]):
                lo, hi = self.faces[f]
                fg.append(FaceGeom(
                    index=int(f),
                    a=self.vertices[lo],
                    b=self.vertices[hi],
                    normal=s * self.face_normals[f],
                    measure=float(self.face_measures[f]),
                    boundary=bool(self.boundary[f]),
                ))
            out.append(ElementGeom(
                index=t,
                vertices=self.vertices[e],
                centroid=self.element_centroids[t],
                area=float(self.element_areas[t]),
                diameter=float(self.element_diameters[t]),
                faces=tuple(fg),
            ))
        return tuple(out)

    def mapped(self, bbox):
        """Linearly map this mesh's bounding box onto ``bbox = (x0, x1, y0, y1)``."""
        x0, x1, y0, y1 = _check_bbox(bbox)
        a0, a1, b0, b1 = self.bbox
        v = self.vertices.copy()
        v[:, 0] = x0 + (v[:, 0] - a0) * (x1 - x0) / (a1 - a0)
        v[:, 1] = y0 + (v[:, 1] - b0) * (y1 - y0) / (b1 - b0)
        return Mesh(v, self.elements)

    def permuted(self, order):
        """Same mesh with elements listed in a different order."""
        return Mesh(self.vertices, [self.elements[i] for i in order])

    def __repr__(self):
        return (f"Mesh(n_elements={self.n_elements}, n_faces={self.n_faces}, "
                f"n_interior={len(self.interior_faces)}, h={self.h:.4g})")


def _check_bbox(bbox):
    try:
        x0, x1, y0, y1 = (float(v) for v in bbox)
    except (TypeError, ValueError):
        raise InvalidArgument("bbox must be (x0, x1, y0, y1)") from None
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgument(f"degenerate bbox {bbox}")
    return x0, x1, y0, y1


def _check_counts(nx, ny):
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgument(f"cell counts must be positive integers, got ({nx}, {ny})")
    return int(nx), int(ny)


def _grid_vertices(nx, ny, bbox):
    x0, x1, y0, y1 = bbox
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def generate_cartesian(nx, ny, bbox=(0.0, 1.0, 0.0, 1.0)):
    """Structured mesh of ``nx * ny`` rectangles."""
    nx, ny = _check_counts(nx, ny)
    bbox = _check_bbox(bbox)
    verts = _grid_vertices(nx, ny, bbox)
    vid = lambda i, j: j * (nx + 1) + i
    elems = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(ny) for i in range(nx)]
    return Mesh(verts, elems)


def generate_triangular(nx, ny, bbox=(0.0, 1.0, 0.0, 1.0)):
    """Each Cartesian cell split along its lower-left/upper-right diagonal."""
    nx, ny = _check_counts(nx, ny)
    bbox = _check_bbox(bbox)
    verts = _grid_vertices(nx, ny, bbox)
    vid = lambda i, j: j * (nx + 1) + i
    elems = []
    for j in range(ny):
        for i in range(nx):
            elems.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
            elems.append([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return Mesh(verts, elems)


def read_polymesh(path):
    """Read the plain-text polygonal format.

    Layout: ``npts nelems``, then ``npts`` lines ``x y``, then ``nelems`` lines
    ``m i1 ... im`` (0-based, counterclockwise).  ``#`` starts a comment.
    """
    lines = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                lines.append((lineno, text.split()))
    if not lines:
        raise MeshParseError("empty mesh file", 1)

    def ints(lineno, toks):
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise MeshParseError(f"expected integers, got {' '.join(toks)!r}", lineno) from None

    lineno, toks = lines[0]
    header = ints(lineno, toks)
    if len(header) != 2 or min(header) < 1:
        raise MeshParseError("header must be 'npts nelems' with positive counts", lineno)
    npts, nel = header
    if len(lines) < 1 + npts + nel:
        last = lines[-1][0]
        raise MeshParseError(f"expected {npts} points and {nel} elements, file ends early", last)
    pts = np.empty((npts, 2))
    for i in range(npts):
        lineno, toks = lines[1 + i]
        if len(toks) != 2:
            raise MeshParseError("point line must hold exactly 'x y'", lineno)
        try:
            pts[i] = [float(toks[0]), float(toks[1])]
        except ValueError:
            raise MeshParseError(f"bad coordinates {' '.join(toks)!r}", lineno) from None
    elems = []
    for i in range(nel):
        lineno, toks = lines[1 + npts + i]
        vals = ints(lineno, toks)
        m = vals[0]
        if m < 3 or len(vals) != m + 1:
            raise MeshParseError(f"element line declares {m} vertices but lists {len(vals) - 1}", lineno)
        idx = vals[1:]
        if min(idx) < 0 or max(idx) >= npts:
            raise MeshParseError("vertex index out of range", lineno)
        elems.append(idx)
    if len(lines) > 1 + npts + nel:
        raise MeshParseError("trailing data after the last element", lines[1 + npts + nel][0])
    return Mesh(pts, elems)


def write_polymesh(mesh, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{len(mesh.vertices)} {mesh.n_elements}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for e in mesh.elements:
            fh.write(" ".join(str(v) for v in [len(e), *e.tolist()]) + "\n")


@dataclass
class MeshDiagnostics:
    n_elements: int
    n_faces: int
    n_interior: int
    n_boundary: int
    h: float
    face_ratio_min: np.ndarray  # per element, min h_F / h_T
    face_ratio_max: np.ndarray
    inradius_ratio: np.ndarray  # per element, min sub-triangle inradius / h_T
    flagged: tuple  # elements not star-shaped with respect to their centroid

    @property
    def ok(self):
        return not self.flagged

    def summary(self):
        return {
            "n_elements": self.n_elements,
            "n_faces": self.n_faces,
            "n_interior": self.n_interior,
            "n_boundary": self.n_boundary,
            "h": self.h,
            "face_ratio_min": float(self.face_ratio_min.min()),
            "face_ratio_max": float(self.face_ratio_max.max()),
            "inradius_ratio_min": float(self.inradius_ratio.min()),
            "n_flagged": len(self.flagged),
        }


def validate_mesh(mesh, tol=1e-12):
    """Regularity indicators; reports problems instead of raising."""
    n = mesh.n_elements
    rmin = np.empty(n)
    rmax = np.empty(n)
    rin = np.empty(n)
    flagged = []
    for t in range(n):
        g = mesh.element_geom(t)
        hF = np.array([f.measure for f in g.faces])
        rmin[t] = hF.min() / g.diameter
        rmax[t] = hF.max() / g.diameter
        worst = np.inf
        bad = False
        for c, p, q in g.subtriangles():
            e1, e2 = p - c, q - c
            a2 = e1[0] * e2[1] - e1[1] * e2[0]
            if a2 <= tol * g.diameter**2:
                bad = True
            perim = np.linalg.norm(e1) + np.linalg.norm(e2) + np.linalg.norm(q - p)
            worst = min(worst, a2 / perim)  # inradius = 2 A / perimeter
        rin[t] = worst / g.diameter
        if bad:
            flagged.append(t)
    return MeshDiagnostics(
        n_elements=n,
        n_faces=mesh.n_faces,
        n_interior=len(mesh.interior_faces),
        n_boundary=len(mesh.boundary_faces),
        h=mesh.h,
        face_ratio_min=rmin,
        face_ratio_max=rmax,
        inradius_ratio=rin,
        flagged=tuple(flagged),
    )
