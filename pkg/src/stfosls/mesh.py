"""Conforming triangulations of a space-time rectangle with newest-vertex bisection.

The computational domain is the rectangle (0, T) x (a, b) with coordinates
(t, x).  Meshes are stored as flat numpy arrays and are immutable by
convention: refinement returns a new mesh.

Element conventions
-------------------
* Vertices are ordered counterclockwise (positive signed area).
* Local edge ``k`` runs from local vertex ``k`` to local vertex ``(k+1) % 3``.
* Local edge 0, i.e. the edge between local vertices 0 and 1, is the
  refinement edge; local vertex 2 is the newest vertex.
* Bisecting at the midpoint ``m`` of edge (v0, v1) produces the children
  ``(v2, v0, m)`` and ``(v1, v2, m)``, whose refinement edges are the parent
  edges opposite the new vertex.

Boundary facets carry tags that are assigned combinatorially on the initial
grid and inherited through bisection, so no floating-point classification is
ever needed on refined meshes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "FacetTag",
    "Mesh",
    "uniform_initial_mesh",
    "bisect",
    "element_measure",
    "element_measures",
    "element_patch",
    "initial_facets",
    "initial_facet_list",
    "is_conforming",
    "boundary_tags_consistent",
    "sorted_angles",
    "write_mesh",
    "read_mesh",
]


class FacetTag(IntEnum):
    """Classification of element edges against the boundary of the rectangle."""

    INTERIOR = 0
    LATERAL_DIRICHLET = 1
    INITIAL = 2
    FINAL = 3


_TAG_NAMES = {
    FacetTag.LATERAL_DIRICHLET: "lateral",
    FacetTag.INITIAL: "initial",
    FacetTag.FINAL: "final",
}
_NAME_TAGS = {name: tag for tag, name in _TAG_NAMES.items()}


@dataclass(frozen=True)
class Mesh:
    """Triangulation of the rectangle (0, t_end) x (x_lo, x_hi).

    Attributes
    ----------
    points : (n_points, 2) float array
        Vertex coordinates, columns (t, x).
    elements : (n_elements, 3) int array
        Vertex indices per triangle, counterclockwise; edge (v0, v1) is the
        refinement edge.
    generation : (n_elements,) int array
        Bisection depth of each element.
    edge_tags : (n_elements, 3) int array
        ``FacetTag`` value of each local edge.
    refined_from : (n_elements,) int array
        Index of the ancestor element in the mesh this one was produced
        from by :func:`bisect` (the element's own index for an unrefined
        copy, and ``arange`` for an initial mesh).
    """

    points: np.ndarray
    elements: np.ndarray
    generation: np.ndarray
    edge_tags: np.ndarray
    t_end: float
    x_lo: float
    x_hi: float
    refined_from: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_coords(self) -> np.ndarray:
        """Vertex coordinates per element, shape (n_elements, 3, 2)."""
        return self.points[self.elements]


def uniform_initial_mesh(t_end: float, omega: tuple, nt: int, nx: int) -> Mesh:
    """Uniform triangulation of (0, t_end) x omega with 2*nt*nx triangles.

    Every grid cell is split along its diagonal, and the diagonal (the
    longest edge of both triangles) is chosen as their refinement edge.
    Diagonals are interior to their cell, so the refinement-edge assignment
    is compatible and bisection closure always terminates.

    Raises
    ------
    ValueError
        If the rectangle is degenerate or a resolution is not positive.
    """
    x_lo, x_hi = float(omega[0]), float(omega[1])
    if not (t_end > 0.0):
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not (x_lo < x_hi):
        raise ValueError(f"empty spatial interval ({x_lo}, {x_hi})")
    if nt < 1 or nx < 1:
        raise ValueError(f"grid resolutions must be >= 1, got nt={nt}, nx={nx}")

    tv = np.linspace(0.0, t_end, nt + 1)
    xv = np.linspace(x_lo, x_hi, nx + 1)
    points = np.empty(((nt + 1) * (nx + 1), 2))
    for i in range(nt + 1):
        for j in range(nx + 1):
            points[i * (nx + 1) + j] = (tv[i], xv[j])

    def vid(i, j):
        return i * (nx + 1) + j

    elements = []
    tags = []
    interior = int(FacetTag.INTERIOR)
    for i in range(nt):
        for j in range(nx):
            p00, p01 = vid(i, j), vid(i, j + 1)
            p10, p11 = vid(i + 1, j), vid(i + 1, j + 1)
            # Lower-right triangle: diagonal (p00, p11) is the refinement edge.
            elements.append((p00, p11, p01))
            tags.append((
                interior,
                int(FacetTag.LATERAL_DIRICHLET) if j + 1 == nx else interior,
                int(FacetTag.INITIAL) if i == 0 else interior,
            ))
            # Upper-left triangle shares the same diagonal as refinement edge.
            elements.append((p11, p00, p10))
            tags.append((
                interior,
                int(FacetTag.LATERAL_DIRICHLET) if j == 0 else interior,
                int(FacetTag.FINAL) if i + 1 == nt else interior,
            ))

    n_elems = len(elements)
    return Mesh(
        points=points,
        elements=np.asarray(elements, dtype=np.int64),
        generation=np.zeros(n_elems, dtype=np.int64),
        edge_tags=np.asarray(tags, dtype=np.int64),
        t_end=float(t_end),
        x_lo=x_lo,
        x_hi=x_hi,
        refined_from=np.arange(n_elems, dtype=np.int64),
    )


def _edge_keys(elements: np.ndarray, stride: int) -> np.ndarray:
    """Orientation-free integer key of every local edge, shape (n_elements, 3)."""
    a = elements
    b = np.roll(elements, -1, axis=1)
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return lo * stride + hi


def bisect(mesh: Mesh, marks) -> Mesh:
    """Refine at least the marked elements by newest-vertex bisection.

    The refinement edges of the marked elements are scheduled for bisection;
    closure passes then schedule the refinement edge of any element that has
    some scheduled edge, until a fixpoint is reached.  Every element is
    finally split so that exactly its scheduled edges are bisected, which
    keeps the mesh conforming.  Each bisection introduces one new vertex,
    the midpoint of the parent's refinement edge; midpoints are deduplicated
    through the parent edge's vertex pair, never by coordinate comparison.

    Facet tags are inherited: the halves of a tagged edge keep its tag, the
    interior edges created by bisection are untagged.
    """
    marks = np.asarray(sorted(set(int(k) for k in np.atleast_1d(np.asarray(marks, dtype=np.int64))))
                       if np.size(marks) else [], dtype=np.int64)
    if marks.size and (marks.min() < 0 or marks.max() >= mesh.n_elements):
        raise IndexError("marked element index out of range")

    n0 = mesh.n_points
    keys = _edge_keys(mesh.elements, n0)
    scheduled = np.unique(keys[marks, 0]) if marks.size else np.empty(0, dtype=np.int64)

    # Closure: an element with any scheduled edge must schedule its
    # refinement edge as well.  Fixpoint passes; the scheduled set only
    # grows and is bounded by the number of edges.
    while scheduled.size:
        hit = np.isin(keys, scheduled)
        need = hit.any(axis=1) & ~hit[:, 0]
        if not need.any():
            break
        scheduled = np.union1d(scheduled, keys[need, 0])

    scheduled_set = set(int(k) for k in scheduled)
    split_elem = np.isin(keys[:, 0], scheduled) if scheduled.size \
        else np.zeros(mesh.n_elements, dtype=bool)

    points = mesh.points
    midpoint_of: dict[int, int] = {}
    new_points: list[np.ndarray] = []

    def midpoint(va: int, vb: int) -> int:
        key = int(min(va, vb)) * n0 + int(max(va, vb))
        idx = midpoint_of.get(key)
        if idx is None:
            idx = n0 + len(new_points)
            new_points.append(0.5 * (points[va] + points[vb]))
            midpoint_of[key] = idx
        return idx

    out_elems: list[tuple] = []
    out_gen: list[int] = []
    out_tags: list[tuple] = []
    out_from: list[int] = []
    interior = int(FacetTag.INTERIOR)

    def split(v0, v1, v2, gen, tags, ancestor):
        # Edges containing a midpoint vertex are never scheduled, so the
        # recursion bottoms out after at most two levels per call.
        if v0 < n0 and v1 < n0 and (min(v0, v1) * n0 + max(v0, v1)) in scheduled_set:
            m = midpoint(v0, v1)
            split(v2, v0, m, gen + 1, (tags[2], tags[0], interior), ancestor)
            split(v1, v2, m, gen + 1, (tags[1], interior, tags[0]), ancestor)
        else:
            out_elems.append((v0, v1, v2))
            out_gen.append(gen)
            out_tags.append(tags)
            out_from.append(ancestor)

    for e in range(mesh.n_elements):
        v0, v1, v2 = (int(v) for v in mesh.elements[e])
        tags = tuple(int(t) for t in mesh.edge_tags[e])
        if split_elem[e]:
            split(v0, v1, v2, int(mesh.generation[e]), tags, e)
        else:
            out_elems.append((v0, v1, v2))
            out_gen.append(int(mesh.generation[e]))
            out_tags.append(tags)
            out_from.append(e)

    all_points = np.vstack([points, np.asarray(new_points)]) if new_points else points.copy()
    return Mesh(
        points=all_points,
        elements=np.asarray(out_elems, dtype=np.int64),
        generation=np.asarray(out_gen, dtype=np.int64),
        edge_tags=np.asarray(out_tags, dtype=np.int64),
        t_end=mesh.t_end,
        x_lo=mesh.x_lo,
        x_hi=mesh.x_hi,
        refined_from=np.asarray(out_from, dtype=np.int64),
    )


def element_measures(mesh: Mesh) -> np.ndarray:
    """Signed areas of all elements (positive for valid meshes)."""
    coords = mesh.element_coords()
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def element_measure(mesh: Mesh, k: int) -> float:
    """Area of element ``k``."""
    p = mesh.points[mesh.elements[k]]
    d1, d2 = p[1] - p[0], p[2] - p[0]
    return 0.5 * float(d1[0] * d2[1] - d1[1] * d2[0])


def element_patch(mesh: Mesh, k: int) -> np.ndarray:
    """Indices of all elements sharing at least one vertex with element ``k``."""
    verts = set(int(v) for v in mesh.elements[k])
    hit = np.isin(mesh.elements, list(verts)).any(axis=1)
    return np.flatnonzero(hit)


def initial_facets(mesh: Mesh, k: int):
    """Vertex pairs of the edges of element ``k`` tagged Initial."""
    tri = mesh.elements[k]
    out = []
    for loc in range(3):
        if mesh.edge_tags[k, loc] == FacetTag.INITIAL:
            out.append((int(tri[loc]), int(tri[(loc + 1) % 3])))
    return out


def initial_facet_list(mesh: Mesh) -> np.ndarray:
    """All (element, local edge) pairs tagged Initial, in element order."""
    elems, locs = np.nonzero(mesh.edge_tags == FacetTag.INITIAL)
    return np.column_stack([elems, locs])


def _boundary_side(mesh: Mesh, va: int, vb: int) -> bool:
    """Whether edge (va, vb) lies on one full side of the rectangle."""
    pa, pb = mesh.points[va], mesh.points[vb]
    return (
        (pa[0] == 0.0 and pb[0] == 0.0)
        or (pa[0] == mesh.t_end and pb[0] == mesh.t_end)
        or (pa[1] == mesh.x_lo and pb[1] == mesh.x_lo)
        or (pa[1] == mesh.x_hi and pb[1] == mesh.x_hi)
    )


def _edge_incidence(mesh: Mesh) -> dict:
    """Map sorted vertex pair -> list of (element, local edge) incidences."""
    inc: dict[tuple, list] = {}
    elems = mesh.elements
    for e in range(mesh.n_elements):
        for loc in range(3):
            a, b = int(elems[e, loc]), int(elems[e, (loc + 1) % 3])
            inc.setdefault((min(a, b), max(a, b)), []).append((e, loc))
    return inc


def is_conforming(mesh: Mesh) -> bool:
    """True iff interior edges have two incident elements and boundary edges one.

    An edge with a single incidence counts as a boundary edge only when it
    lies on a side of the computational rectangle; a once-counted edge in
    the interior signals a hanging node.
    """
    for (a, b), incident in _edge_incidence(mesh).items():
        if len(incident) > 2:
            return False
        if len(incident) == 1 and not _boundary_side(mesh, a, b):
            return False
    return True


def boundary_tags_consistent(mesh: Mesh) -> bool:
    """Check that tags mark exactly the boundary and match their side."""
    side_tag = {
        "t0": FacetTag.INITIAL,
        "t1": FacetTag.FINAL,
        "x": FacetTag.LATERAL_DIRICHLET,
    }
    for (a, b), incident in _edge_incidence(mesh).items():
        tags = [FacetTag(int(mesh.edge_tags[e, loc])) for e, loc in incident]
        if len(incident) == 2:
            if any(tag != FacetTag.INTERIOR for tag in tags):
                return False
            continue
        pa, pb = mesh.points[a], mesh.points[b]
        if pa[0] == 0.0 and pb[0] == 0.0:
            expected = side_tag["t0"]
        elif pa[0] == mesh.t_end and pb[0] == mesh.t_end:
            expected = side_tag["t1"]
        elif (pa[1] == pb[1]) and pa[1] in (mesh.x_lo, mesh.x_hi):
            expected = side_tag["x"]
        else:
            return False
        if tags != [expected]:
            return False
    return True


def sorted_angles(mesh: Mesh) -> np.ndarray:
    """Interior angles per element, each row sorted ascending (radians)."""
    coords = mesh.element_coords()
    angles = np.empty((mesh.n_elements, 3))
    for loc in range(3):
        u = coords[:, (loc + 1) % 3] - coords[:, loc]
        v = coords[:, (loc + 2) % 3] - coords[:, loc]
        cosv = (u * v).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, loc] = np.arccos(np.clip(cosv, -1.0, 1.0))
    angles.sort(axis=1)
    return angles


def write_mesh(mesh: Mesh, path) -> None:
    """Dump a mesh in the ASCII format ``spacetime-mesh v1``.

    Line 1 is the format header, line 2 holds point and element counts,
    followed by one ``t x`` line per point, one ``v0 v1 v2 generation`` line
    per element, and one ``elem edge tag`` line per tagged boundary facet.
    All blocks use insertion order.
    """
    lines = ["spacetime-mesh v1", f"{mesh.n_points} {mesh.n_elements}"]
    for p in mesh.points:
        lines.append(f"{float(p[0])!r} {float(p[1])!r}")
    for e in range(mesh.n_elements):
        v = mesh.elements[e]
        lines.append(f"{int(v[0])} {int(v[1])} {int(v[2])} {int(mesh.generation[e])}")
    for e in range(mesh.n_elements):
        for loc in range(3):
            tag = FacetTag(int(mesh.edge_tags[e, loc]))
            if tag != FacetTag.INTERIOR:
                lines.append(f"{e} {loc} {_TAG_NAMES[tag]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read a mesh written by :func:`write_mesh`."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if lines[0] != "spacetime-mesh v1":
        raise ValueError(f"unsupported mesh format header: {lines[0]!r}")
    n_points, n_elements = (int(tok) for tok in lines[1].split())
    points = np.array(
        [[float(tok) for tok in lines[2 + i].split()] for i in range(n_points)]
    )
    rows = [lines[2 + n_points + i].split() for i in range(n_elements)]
    elements = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in rows], dtype=np.int64)
    generation = np.array([int(r[3]) for r in rows], dtype=np.int64)
    edge_tags = np.zeros((n_elements, 3), dtype=np.int64)
    for line in lines[2 + n_points + n_elements:]:
        e, loc, name = line.split()
        edge_tags[int(e), int(loc)] = int(_NAME_TAGS[name])
    return Mesh(
        points=points,
        elements=elements,
        generation=generation,
        edge_tags=edge_tags,
        t_end=float(points[:, 0].max()),
        x_lo=float(points[:, 1].min()),
        x_hi=float(points[:, 1].max()),
        refined_from=np.arange(n_elements, dtype=np.int64),
    )
