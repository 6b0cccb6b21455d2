"""Continuous Lagrange spaces on space-time triangles, quadrature, and dof maps.

Supports degrees p in {1, 2}.  The reference triangle has vertices
(0,0), (1,0), (0,1); reference coordinates are written (xi, eta) and the
barycentric coordinates are (1 - xi - eta, xi, eta).  For p = 2 the extra
Lagrange nodes sit at the edge midpoints, ordered like the local edges:
node 3 on edge (v0,v1), node 4 on edge (v1,v2), node 5 on edge (v2,v0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import FacetTag, Mesh

__all__ = [
    "ReferenceElement",
    "QuadratureRule",
    "EdgeQuadratureRule",
    "DofMap",
    "build_reference",
    "build_quadrature",
    "build_edge_quadrature",
    "build_dofmap",
    "affine_map",
    "affine_maps",
    "evaluate_field",
    "interpolate_nodes",
    "edge_reference_points",
]

_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class ReferenceElement:
    """Nodal Lagrange basis on the reference triangle.

    ``values`` and ``gradients`` evaluate all basis functions at an array of
    reference points; the basis is nodal (`phi_i(node_j) = delta_ij`) and
    sums to one everywhere.
    """

    degree: int
    nodes: np.ndarray  # (n_local, 2) reference coordinates

    @property
    def n_local(self) -> int:
        return self.nodes.shape[0]

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        xi, eta = pts[:, 0], pts[:, 1]
        lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        if self.degree == 1:
            return lam
        l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
        return np.stack(
            [
                l0 * (2.0 * l0 - 1.0),
                l1 * (2.0 * l1 - 1.0),
                l2 * (2.0 * l2 - 1.0),
                4.0 * l0 * l1,
                4.0 * l1 * l2,
                4.0 * l2 * l0,
            ],
            axis=1,
        )

    def gradients(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        n = pts.shape[0]
        if self.degree == 1:
            g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
            return np.broadcast_to(g, (n, 3, 2)).copy()
        xi, eta = pts[:, 0], pts[:, 1]
        l0 = 1.0 - xi - eta
        dl0 = np.array([-1.0, -1.0])
        dl1 = np.array([1.0, 0.0])
        dl2 = np.array([0.0, 1.0])
        out = np.empty((n, 6, 2))
        out[:, 0] = (4.0 * l0 - 1.0)[:, None] * dl0
        out[:, 1] = (4.0 * xi - 1.0)[:, None] * dl1
        out[:, 2] = (4.0 * eta - 1.0)[:, None] * dl2
        out[:, 3] = 4.0 * (xi[:, None] * dl0 + l0[:, None] * dl1)
        out[:, 4] = 4.0 * (eta[:, None] * dl1 + xi[:, None] * dl2)
        out[:, 5] = 4.0 * (l0[:, None] * dl2 + eta[:, None] * dl0)
        return out


def build_reference(p: int) -> ReferenceElement:
    """Nodal basis of degree ``p`` on the reference triangle."""
    if p == 1:
        nodes = _REF_VERTICES.copy()
    elif p == 2:
        mids = 0.5 * (_REF_VERTICES + np.roll(_REF_VERTICES, -1, axis=0))
        nodes = np.vstack([_REF_VERTICES, mids])
    else:
        raise ValueError(f"unsupported polynomial degree {p}; only 1 and 2 are available")
    return ReferenceElement(degree=p, nodes=nodes)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle; weights sum to 1/2."""

    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    def reference_points(self) -> np.ndarray:
        """Points in (xi, eta) coordinates, shape (nq, 2)."""
        return self.points[:, 1:]


@dataclass(frozen=True)
class EdgeQuadratureRule:
    """Gauss rule on the unit interval; weights sum to 1."""

    points: np.ndarray  # (nq,) in (0, 1)
    weights: np.ndarray
    degree: int


def build_quadrature(exactness: int) -> QuadratureRule:
    """Triangle rule exact for total degree ``exactness``.

    Built as a collapsed tensor Gauss-Legendre rule: the unit square is
    mapped onto the triangle by (u, v) -> (u, v(1-u)), whose Jacobian 1-u
    raises the u-degree of a degree-q integrand to q+1.  A one-dimensional
    rule with ceil((q+2)/2) points in each direction is therefore exact.
    """
    if exactness < 0:
        raise ValueError("quadrature exactness must be nonnegative")
    n = max(1, (int(exactness) + 3) // 2)
    gp, gw = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (gp + 1.0)
    wu = 0.5 * gw
    xi = np.repeat(u, n)
    eta = np.tile(u, n) * (1.0 - xi)
    w = np.repeat(wu, n) * np.tile(wu, n) * (1.0 - xi)
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(points=bary, weights=w, degree=int(exactness))


def build_edge_quadrature(exactness: int) -> EdgeQuadratureRule:
    """Gauss-Legendre rule on (0, 1) exact for degree ``exactness``."""
    if exactness < 0:
        raise ValueError("quadrature exactness must be nonnegative")
    n = max(1, (int(exactness) + 2) // 2)
    gp, gw = np.polynomial.legendre.leggauss(n)
    return EdgeQuadratureRule(points=0.5 * (gp + 1.0), weights=0.5 * gw, degree=int(exactness))


def edge_reference_points(loc: int, s: np.ndarray) -> np.ndarray:
    """Reference coordinates of points with parameter ``s`` on local edge ``loc``."""
    a = _REF_VERTICES[loc]
    b = _REF_VERTICES[(loc + 1) % 3]
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return a[None, :] + s[:, None] * (b - a)[None, :]


@dataclass(frozen=True)
class DofMap:
    """Global numbering for the product space of one constrained scalar field
    and ``n_u2_components`` unconstrained copies of the same scalar space.

    Scalar Lagrange nodes are shared across elements (vertices, plus edge
    midpoints for p = 2), which enforces global continuity.  Field u1 drops
    the nodes sitting on constrained facets; the free u1 dofs come first in
    the global vector, followed by the u2 components one block at a time.
    """

    degree: int
    n_scalar: int
    node_coords: np.ndarray  # (n_scalar, 2)
    cell_nodes: np.ndarray  # (n_elements, n_local) scalar node ids
    free_index: np.ndarray  # (n_scalar,) free u1 dof id or -1
    constrained_nodes: np.ndarray  # sorted scalar node ids removed from u1
    n_u1: int
    n_u2_components: int

    @property
    def n_dofs(self) -> int:
        return self.n_u1 + self.n_u2_components * self.n_scalar

    @property
    def cell_dofs_u1(self) -> np.ndarray:
        return self.free_index[self.cell_nodes]

    def u2_offset(self, comp: int) -> int:
        return self.n_u1 + comp * self.n_scalar

    def cell_dofs_u2(self, comp: int) -> np.ndarray:
        return self.u2_offset(comp) + self.cell_nodes


def build_dofmap(
    mesh: Mesh,
    p: int,
    constrain_lateral: bool = True,
    n_u2_components: int = 1,
    dirichlet_tags=None,
) -> DofMap:
    """Construct the dof map for degree ``p`` on ``mesh``.

    ``constrain_lateral`` removes the u1 nodes lying on facets tagged
    LateralDirichlet.  ``dirichlet_tags`` overrides that default with an
    explicit set of facet tags to constrain (used by the stationary
    instance, which constrains the whole boundary).
    """
    if p not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {p}; only 1 and 2 are available")
    n_vertices = mesh.n_points
    elements = mesh.elements

    if p == 1:
        cell_nodes = elements.copy()
        n_scalar = n_vertices
        node_coords = mesh.points.copy()
    else:
        edge_id: dict[tuple, int] = {}
        cell_nodes = np.empty((mesh.n_elements, 6), dtype=np.int64)
        cell_nodes[:, :3] = elements
        for e in range(mesh.n_elements):
            for loc in range(3):
                a = int(elements[e, loc])
                b = int(elements[e, (loc + 1) % 3])
                key = (min(a, b), max(a, b))
                idx = edge_id.get(key)
                if idx is None:
                    idx = n_vertices + len(edge_id)
                    edge_id[key] = idx
                cell_nodes[e, 3 + loc] = idx
        n_scalar = n_vertices + len(edge_id)
        node_coords = np.empty((n_scalar, 2))
        node_coords[:n_vertices] = mesh.points
        for (a, b), idx in edge_id.items():
            node_coords[idx] = 0.5 * (mesh.points[a] + mesh.points[b])

    if dirichlet_tags is None:
        dirichlet_tags = frozenset({FacetTag.LATERAL_DIRICHLET}) if constrain_lateral else frozenset()
    else:
        dirichlet_tags = frozenset(FacetTag(int(t)) for t in dirichlet_tags)

    constrained = set()
    for e in range(mesh.n_elements):
        for loc in range(3):
            if FacetTag(int(mesh.edge_tags[e, loc])) in dirichlet_tags:
                constrained.add(int(elements[e, loc]))
                constrained.add(int(elements[e, (loc + 1) % 3]))
                if p == 2:
                    constrained.add(int(cell_nodes[e, 3 + loc]))

    free_index = np.full(n_scalar, -1, dtype=np.int64)
    next_id = 0
    for node in range(n_scalar):
        if node not in constrained:
            free_index[node] = next_id
            next_id += 1

    return DofMap(
        degree=p,
        n_scalar=n_scalar,
        node_coords=node_coords,
        cell_nodes=cell_nodes,
        free_index=free_index,
        constrained_nodes=np.array(sorted(constrained), dtype=np.int64),
        n_u1=next_id,
        n_u2_components=int(n_u2_components),
    )


def affine_map(mesh: Mesh, k: int):
    """Jacobian, inverse transpose, and determinant of the reference map of element ``k``.

    The map is F(xi) = P0 + J xi with J = [P1 - P0 | P2 - P0]; det J equals
    twice the element area.  Physical gradients are J^{-T} times reference
    gradients.
    """
    p = mesh.points[mesh.elements[k]]
    jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if det <= 0.0:
        raise ValueError(f"element {k} is degenerate or inverted (det={det})")
    inv_t = np.array([[jac[1, 1], -jac[1, 0]], [-jac[0, 1], jac[0, 0]]]) / det
    return jac, inv_t, float(det)


def affine_maps(mesh: Mesh):
    """Batched version of :func:`affine_map` over all elements."""
    coords = mesh.element_coords()
    jac = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]
    return jac, inv_t, det


def evaluate_field(coeffs: np.ndarray, dofmap: DofMap, mesh: Mesh, k: int, point, field: int = 0):
    """Value and space-time gradient of one solution field inside element ``k``.

    ``point`` is given in reference coordinates (xi, eta).  ``field`` 0 is
    the constrained u1 field, ``field`` c >= 1 the (c-1)-th u2 component.
    Constrained u1 dofs contribute zero.
    """
    ref = build_reference(dofmap.degree)
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    vals = ref.values(pts)
    grads = ref.gradients(pts)
    _, inv_t, _ = affine_map(mesh, k)

    if field == 0:
        dofs = dofmap.cell_dofs_u1[k]
        local = np.where(dofs >= 0, coeffs[np.maximum(dofs, 0)], 0.0)
    else:
        dofs = dofmap.cell_dofs_u2(field - 1)[k]
        local = coeffs[dofs]

    value = vals @ local
    grad_ref = np.einsum("qia,i->qa", grads, local)
    grad = grad_ref @ inv_t.T
    if np.asarray(point).ndim == 1:
        return float(value[0]), grad[0]
    return value, grad


def interpolate_nodes(f, dofmap: DofMap) -> np.ndarray:
    """Nodal interpolation of a callable f(t, x) on the scalar Lagrange nodes."""
    t = dofmap.node_coords[:, 0]
    x = dofmap.node_coords[:, 1]
    return np.asarray([float(f(float(ti), float(xi))) for ti, xi in zip(t, x)])
