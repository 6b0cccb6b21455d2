"""Brute-force reference implementations used by tests and the verify command.

Everything here is deliberately slow and structurally independent of the
production assembly and estimation paths: fields are evaluated pointwise
per global basis function through :func:`evaluate_field`, system images
through the scalar :func:`eval_G`, and integrals are accumulated in plain
loops.  A size guard keeps the dense work at desk scale.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .mesh import FacetTag, Mesh
from .problem import ExactFields, sample
from .spaces import (
    DofMap,
    build_edge_quadrature,
    build_quadrature,
    edge_reference_points,
    evaluate_field,
)
from .system import eval_G, eval_data, eval_data_initial

__all__ = [
    "MAX_DENSE_DOFS",
    "dense_assemble",
    "dense_solve",
    "min_eigenvalue",
    "fine_norm",
    "residual_norm_sweep",
    "locate_point",
    "discrete_image_system",
]

MAX_DENSE_DOFS = 300


def _initial_edges(mesh: Mesh):
    """(element, local edge) pairs tagged Initial, found by direct scan."""
    out = []
    for e in range(mesh.n_elements):
        for loc in range(3):
            if mesh.edge_tags[e, loc] == FacetTag.INITIAL:
                out.append((e, loc))
    return out


def _edge_geometry(mesh: Mesh, e: int, loc: int, s: np.ndarray):
    a = mesh.elements[e, loc]
    b = mesh.elements[e, (loc + 1) % 3]
    pa, pb = mesh.points[a], mesh.points[b]
    length = float(np.hypot(pb[0] - pa[0], pb[1] - pa[1]))
    xs = pa[1] + s * (pb[1] - pa[1])
    return xs, length


def _basis_images(mesh: Mesh, dofmap: DofMap, system, quad, equad):
    """System image of every global basis function at every quadrature point.

    Returns the interior image table (n_dofs, n_elements, nq, n_int), the
    trace table (n_dofs, n_facets, nq_edge), the physical points, the
    weighted measures, and the initial-facet list.
    """
    n = dofmap.n_dofs
    ne = mesh.n_elements
    refpts = quad.reference_points()
    nq = refpts.shape[0]
    n_int = system.n_interior
    nc = dofmap.n_u2_components

    pts = np.empty((ne, nq, 2))
    wdet = np.empty((ne, nq))
    for e in range(ne):
        tri = mesh.points[mesh.elements[e]]
        jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        for q in range(nq):
            pts[e, q] = tri[0] + jac @ refpts[q]
            wdet[e, q] = quad.weights[q] * det

    table = np.zeros((n, ne, nq, n_int))
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        for e in range(ne):
            u1v, u1g = evaluate_field(unit, dofmap, mesh, e, refpts, field=0)
            u2v = np.empty((nq, nc))
            u2g = np.empty((nq, nc, 2))
            for comp in range(nc):
                v, g = evaluate_field(unit, dofmap, mesh, e, refpts, field=comp + 1)
                u2v[:, comp] = v
                u2g[:, comp, :] = g
            for q in range(nq):
                img = eval_G(system, pts[e, q], u1v[q], u1g[q], u2v[q], u2g[q])
                table[j, e, q, : system.n_flux] = img.flux
                table[j, e, q, system.n_flux] = img.div

    facets = _initial_edges(mesh) if system.has_initial_trace else []
    trace = np.zeros((n, len(facets), equad.points.size))
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        for fi, (e, loc) in enumerate(facets):
            v, _ = evaluate_field(unit, dofmap, mesh, e, edge_reference_points(loc, equad.points), field=0)
            trace[j, fi] = v
    return table, trace, pts, wdet, facets


def dense_assemble(mesh: Mesh, dofmap: DofMap, system, quadrature=None, edge_quadrature=None):
    """Dense Galerkin matrix and load by direct global-basis integration."""
    n = dofmap.n_dofs
    if n > MAX_DENSE_DOFS:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_DOFS} dofs, got {n}")
    quad = quadrature if quadrature is not None else build_quadrature(2 * dofmap.degree + 2)
    equad = edge_quadrature if edge_quadrature is not None else build_edge_quadrature(2 * dofmap.degree + 2)

    table, trace, pts, wdet, facets = _basis_images(mesh, dofmap, system, quad, equad)

    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            acc = float(np.einsum("eqr,eqr,eq->", table[i], table[j], wdet))
            matrix[i, j] = acc
            matrix[j, i] = acc

    rhs = np.zeros(n)
    data = np.empty(pts.shape[:2] + (system.n_interior,))
    for e in range(pts.shape[0]):
        for q in range(pts.shape[1]):
            data[e, q] = eval_data(system, pts[e, q])
    for j in range(n):
        rhs[j] = float(np.einsum("eqr,eqr,eq->", data, table[j], wdet))

    for fi, (e, loc) in enumerate(facets):
        xs, length = _edge_geometry(mesh, e, loc, equad.points)
        w = equad.weights * length
        u0 = np.array([eval_data_initial(system, xv) for xv in xs])
        for i in range(n):
            if not trace[i, fi].any():
                continue
            rhs[i] += float(np.dot(w, u0 * trace[i, fi]))
            for j in range(n):
                matrix[i, j] += float(np.dot(w, trace[i, fi] * trace[j, fi]))

    return matrix, rhs


def dense_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Direct Cholesky solve; raises on non-positive-definite pivots."""
    if matrix.shape[0] > MAX_DENSE_DOFS:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_DOFS} dofs")
    factor = scipy.linalg.cho_factor(matrix, lower=True)
    return scipy.linalg.cho_solve(factor, rhs)


def min_eigenvalue(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric dense matrix."""
    if matrix.shape[0] > MAX_DENSE_DOFS:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_DOFS} dofs")
    return float(np.linalg.eigvalsh(matrix)[0])


def fine_norm(exact: ExactFields, mesh: Mesh, system, degree: int = 8) -> float:
    """Graph norm of closed-form fields by high-order quadrature.

    Independent of the estimator path; the value is mesh-partition
    independent because the seminorms are additive over elements.
    """
    quad = build_quadrature(max(int(degree), 8))
    equad = build_edge_quadrature(max(int(degree), 8))
    refpts = quad.reference_points()

    total = 0.0
    for e in range(mesh.n_elements):
        tri = mesh.points[mesh.elements[e]]
        jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        phys = tri[0][None, :] + refpts @ jac.T
        t, x = phys[:, 0], phys[:, 1]
        u1 = sample(exact.u1, t, x)
        grad = exact.u1_grad(t, x)
        u2 = exact.u2(t, x)
        div = sample(exact.div, t, x)
        dens = u1**2 + div**2
        for axis in system.spatial_axes:
            dens = dens + grad[..., axis] ** 2
        dens = dens + (u2**2).sum(axis=-1)
        total += float(np.dot(quad.weights * det, dens))

    if system.has_initial_trace:
        for e, loc in _initial_edges(mesh):
            xs, length = _edge_geometry(mesh, e, loc, equad.points)
            vals = sample(exact.u1, np.zeros_like(xs), xs)
            total += float(np.dot(equad.weights * length, vals**2))
    return float(np.sqrt(total))


def locate_point(mesh: Mesh, t: float, x: float):
    """Element containing (t, x) and its reference coordinates, by linear scan."""
    coords = mesh.element_coords()
    for e in range(mesh.n_elements):
        p0 = coords[e, 0]
        jac = np.column_stack([coords[e, 1] - p0, coords[e, 2] - p0])
        ref = np.linalg.solve(jac, np.array([t, x]) - p0)
        if ref[0] >= -1e-12 and ref[1] >= -1e-12 and ref.sum() <= 1.0 + 1e-12:
            return e, ref
    raise ValueError(f"point ({t}, {x}) lies outside the mesh")


class _DiscreteImageSystem:
    """Same operator as the wrapped system, data replaced by G applied to a
    fixed discrete field, evaluated through brute-force point location.

    Only meant for small meshes; with this data the discrete field is the
    exact minimizer and the residual vanishes identically.
    """

    def __init__(self, mesh: Mesh, dofmap: DofMap, system, coeffs: np.ndarray):
        self._mesh = mesh
        self._dofmap = dofmap
        self._inner = system
        self._coeffs = np.asarray(coeffs, dtype=float)
        self.n_flux = system.n_flux
        self.has_initial_trace = system.has_initial_trace
        self.dirichlet_tags = system.dirichlet_tags
        self.spatial_axes = system.spatial_axes

    @property
    def n_interior(self):
        return self._inner.n_interior

    def residual_u1(self, t, x, val, grad):
        return self._inner.residual_u1(t, x, val, grad)

    def residual_u2(self, comp, t, x, val, grad):
        return self._inner.residual_u2(comp, t, x, val, grad)

    def divergence(self, u1_grad, u2_grads):
        return self._inner.divergence(u1_grad, u2_grads)

    def _image_at(self, t, x):
        e, ref = locate_point(self._mesh, t, x)
        u1v, u1g = evaluate_field(self._coeffs, self._dofmap, self._mesh, e, ref, field=0)
        nc = self._dofmap.n_u2_components
        u2v = np.empty(nc)
        u2g = np.empty((nc, 2))
        for comp in range(nc):
            v, g = evaluate_field(self._coeffs, self._dofmap, self._mesh, e, ref, field=comp + 1)
            u2v[comp] = v
            u2g[comp] = g
        return eval_G(self._inner, (t, x), u1v, u1g, u2v, u2g)

    def data_interior(self, t, x):
        t_arr = np.asarray(t, dtype=float)
        x_arr = np.asarray(x, dtype=float)
        t_b, x_b = np.broadcast_arrays(t_arr, x_arr)
        out = np.empty(t_b.shape + (self.n_interior,))
        it = np.nditer(t_b, flags=["multi_index"])
        for tv in it:
            idx = it.multi_index
            img = self._image_at(float(tv), float(x_b[idx]))
            out[idx][: self.n_flux] = img.flux
            out[idx][self.n_flux] = img.div
        return out

    def data_initial(self, x):
        x_arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x_arr).ravel()
        out = np.empty(flat.size)
        for k, xv in enumerate(flat):
            out[k] = self._image_at(0.0, float(xv)).initial
        return out.reshape(x_arr.shape)


def discrete_image_system(mesh: Mesh, dofmap: DofMap, system, coeffs: np.ndarray):
    """Wrap ``system`` so its data vector is the image of the given coefficients."""
    return _DiscreteImageSystem(mesh, dofmap, system, coeffs)


def residual_norm_sweep(mesh: Mesh, solution, system, degree: int = None) -> float:
    """Global residual norm by one flat sweep over all quadrature points.

    No per-element partition of the result: a single scalar accumulator,
    used to cross-check the additivity of the element indicators.
    """
    dofmap = solution.dofmap
    deg = degree if degree is not None else 2 * dofmap.degree + 2
    quad = build_quadrature(deg)
    equad = build_edge_quadrature(deg)
    refpts = quad.reference_points()
    nc = dofmap.n_u2_components

    acc = 0.0
    for e in range(mesh.n_elements):
        tri = mesh.points[mesh.elements[e]]
        jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        u1v, u1g = evaluate_field(solution.coeffs, dofmap, mesh, e, refpts, field=0)
        u2v = np.empty((refpts.shape[0], nc))
        u2g = np.empty((refpts.shape[0], nc, 2))
        for comp in range(nc):
            v, g = evaluate_field(solution.coeffs, dofmap, mesh, e, refpts, field=comp + 1)
            u2v[:, comp] = v
            u2g[:, comp, :] = g
        for q in range(refpts.shape[0]):
            point = tri[0] + jac @ refpts[q]
            img = eval_G(system, point, u1v[q], u1g[q], u2v[q], u2g[q])
            target = eval_data(system, point)
            diff = target - np.concatenate([img.flux, [img.div]])
            acc += quad.weights[q] * det * float(diff @ diff)

    if system.has_initial_trace:
        for e, loc in _initial_edges(mesh):
            xs, length = _edge_geometry(mesh, e, loc, equad.points)
            vals, _ = evaluate_field(
                solution.coeffs, dofmap, mesh, e, edge_reference_points(loc, equad.points), field=0
            )
            for q, xv in enumerate(xs):
                mismatch = vals[q] - eval_data_initial(system, xv)
                acc += equad.weights[q] * length * mismatch**2
    return float(np.sqrt(acc))
