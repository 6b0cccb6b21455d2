"""Assembly of the least-squares Galerkin system and its conjugate-gradient solve.

The bilinear form is the L-inner product of system images,

    M[i, j] = integral( G(phi_i) . G(phi_j) )
            + integral over initial facets of trace(phi_i) trace(phi_j),

with the load b[i] = (data, G(phi_i))_L.  Constrained u1 dofs are eliminated
(never enter the global system), so the matrix is symmetric positive
definite on the free dofs.

Element contributions are computed vectorized over all elements and
scattered with a deterministic stable-sort accumulation, which makes the
assembled matrix bit-exactly symmetric and runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, initial_facet_list
from .spaces import (
    DofMap,
    EdgeQuadratureRule,
    QuadratureRule,
    affine_maps,
    build_edge_quadrature,
    build_quadrature,
    build_reference,
    edge_reference_points,
)

__all__ = [
    "SparseSystem",
    "SolverReport",
    "DiscreteSolution",
    "assemble",
    "solve_cg",
    "element_fields",
    "galerkin_orthogonality_check",
]


@dataclass(frozen=True)
class SparseSystem:
    """Assembled symmetric positive definite system."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_dofs: int


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    relative_residual: float
    converged: bool


@dataclass(frozen=True)
class DiscreteSolution:
    """Coefficient vector of a least-squares approximation on one mesh."""

    coeffs: np.ndarray
    mesh: Mesh
    dofmap: DofMap

    @property
    def u1(self) -> np.ndarray:
        return self.coeffs[: self.dofmap.n_u1]

    def u2(self, comp: int = 0) -> np.ndarray:
        off = self.dofmap.u2_offset(comp)
        return self.coeffs[off: off + self.dofmap.n_scalar]


def default_quadrature(dofmap: DofMap) -> QuadratureRule:
    """Degree 2p + 2 rule: exact for products of system images of basis
    functions under constant coefficients, with headroom for smooth data."""
    return build_quadrature(2 * dofmap.degree + 2)


def default_edge_quadrature(dofmap: DofMap) -> EdgeQuadratureRule:
    return build_edge_quadrature(2 * dofmap.degree + 2)


def _geometry_tables(mesh: Mesh, dofmap: DofMap, quad: QuadratureRule):
    """Basis values, physical gradients, quadrature points and weights."""
    ref = build_reference(dofmap.degree)
    _, inv_t, det = affine_maps(mesh)
    refpts = quad.reference_points()
    values = ref.values(refpts)  # (nq, nloc)
    ref_grads = ref.gradients(refpts)  # (nq, nloc, 2)
    phys_grads = np.einsum("eab,qib->eqia", inv_t, ref_grads)
    coords = mesh.element_coords()
    pts = np.einsum("qk,ekc->eqc", quad.points, coords)  # (ne, nq, 2)
    wdet = quad.weights[None, :] * det[:, None]
    return values, phys_grads, pts, wdet


def _residual_tables(system, values, phys_grads, pts):
    """System images of all local basis functions, shape (ne, nq, nloc_total, n_int).

    Field blocks are ordered u1 first, then the u2 components.
    """
    t = pts[..., 0][..., None]
    x = pts[..., 1][..., None]
    val = values[None, :, :]
    blocks = [system.residual_u1(t, x, val, phys_grads)]
    for comp in range(system.n_flux):
        blocks.append(system.residual_u2(comp, t, x, val, phys_grads))
    return np.concatenate(blocks, axis=2)


def _global_dofs(dofmap: DofMap, n_flux: int) -> np.ndarray:
    cols = [dofmap.cell_dofs_u1]
    for comp in range(n_flux):
        cols.append(dofmap.cell_dofs_u2(comp))
    return np.concatenate(cols, axis=1)


def _accumulate_csr(rows, cols, vals, n) -> sp.csr_matrix:
    """Deterministic COO -> CSR accumulation.

    ``lexsort`` is stable, so duplicate (row, col) entries are summed in
    their insertion (element) order; symmetric local blocks therefore give a
    bit-exactly symmetric global matrix.
    """
    if len(vals) == 0:
        return sp.csr_matrix((n, n))
    order = np.lexsort((cols, rows))
    r = rows[order]
    c = cols[order]
    v = vals[order]
    first = np.ones(len(r), dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(first)
    data = np.add.reduceat(v, starts)
    indptr = np.searchsorted(r[starts], np.arange(n + 1), side="left")
    return sp.csr_matrix((data, c[starts], indptr), shape=(n, n))


def _initial_facet_tables(mesh: Mesh, dofmap: DofMap, equad: EdgeQuadratureRule):
    """Per-facet data for the trace terms on the t = 0 boundary.

    Yields (element, local edge, basis values (nq_e, nloc), x coordinates
    (nq_e,), weighted lengths (nq_e,)) for every facet tagged Initial.
    """
    ref = build_reference(dofmap.degree)
    edge_tables = [ref.values(edge_reference_points(loc, equad.points)) for loc in range(3)]
    out = []
    for e, loc in initial_facet_list(mesh):
        a = mesh.elements[e, loc]
        b = mesh.elements[e, (loc + 1) % 3]
        pa, pb = mesh.points[a], mesh.points[b]
        length = float(np.hypot(*(pb - pa)))
        xs = pa[1] + equad.points * (pb[1] - pa[1])
        out.append((int(e), int(loc), edge_tables[loc], xs, equad.weights * length))
    return out


def assemble(
    mesh: Mesh,
    dofmap: DofMap,
    system,
    quadrature: Optional[QuadratureRule] = None,
    edge_quadrature: Optional[EdgeQuadratureRule] = None,
) -> SparseSystem:
    """Assemble matrix and load of the least-squares Galerkin equation."""
    quad = quadrature if quadrature is not None else default_quadrature(dofmap)
    equad = edge_quadrature if edge_quadrature is not None else default_edge_quadrature(dofmap)

    values, phys_grads, pts, wdet = _geometry_tables(mesh, dofmap, quad)
    resid = _residual_tables(system, values, phys_grads, pts)
    local = np.einsum("eqar,eqbr,eq->eab", resid, resid, wdet)
    data = system.data_interior(pts[..., 0], pts[..., 1])
    local_rhs = np.einsum("eqr,eqar,eq->ea", data, resid, wdet)

    gdofs = _global_dofs(dofmap, system.n_flux)
    n = dofmap.n_dofs

    rows = np.broadcast_to(gdofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(gdofs[:, None, :], local.shape).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    rows_list = [rows[keep]]
    cols_list = [cols[keep]]
    vals_list = [vals[keep]]

    rhs = np.zeros(n)
    rkeep = gdofs.ravel() >= 0
    np.add.at(rhs, gdofs.ravel()[rkeep], local_rhs.ravel()[rkeep])

    if system.has_initial_trace:
        for e, _loc, basis, xs, wlen in _initial_facet_tables(mesh, dofmap, equad):
            dofs = dofmap.cell_dofs_u1[e]
            mloc = np.einsum("qa,qb,q->ab", basis, basis, wlen)
            bloc = np.einsum("q,qa,q->a", system.data_initial(xs), basis, wlen)
            free = dofs >= 0
            er = np.broadcast_to(dofs[:, None], mloc.shape)
            ec = np.broadcast_to(dofs[None, :], mloc.shape)
            ekeep = (er >= 0) & (ec >= 0)
            rows_list.append(er[ekeep].ravel())
            cols_list.append(ec[ekeep].ravel())
            vals_list.append(mloc[ekeep].ravel())
            np.add.at(rhs, dofs[free], bloc[free])

    matrix = _accumulate_csr(
        np.concatenate(rows_list).astype(np.int64),
        np.concatenate(cols_list).astype(np.int64),
        np.concatenate(vals_list),
        n,
    )
    return SparseSystem(matrix=matrix, rhs=rhs, n_dofs=n)


def solve_cg(matrix, rhs: np.ndarray, rel_tol: float = 1e-10, max_iters: Optional[int] = None):
    """Unpreconditioned conjugate gradients with zero initial guess.

    Stops when ||b - M x|| <= rel_tol ||b||; deterministic for fixed inputs.
    Non-convergence is reported through the flag, not raised.
    """
    n = rhs.shape[0]
    if max_iters is None:
        max_iters = 20 * max(n, 1)
    x = np.zeros(n)
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return x, SolverReport(iterations=0, relative_residual=0.0, converged=True)
    r = rhs.copy()
    p = r.copy()
    rho = float(r @ r)
    tol2 = (rel_tol * b_norm) ** 2
    iterations = 0
    while rho > tol2 and iterations < max_iters:
        q = matrix @ p
        alpha = rho / float(p @ q)
        x += alpha * p
        r -= alpha * q
        rho_new = float(r @ r)
        p = r + (rho_new / rho) * p
        rho = rho_new
        iterations += 1
    rel = float(np.sqrt(rho)) / b_norm
    return x, SolverReport(iterations=iterations, relative_residual=rel, converged=rel <= rel_tol)


def element_fields(solution: DiscreteSolution, quadrature: QuadratureRule):
    """Discrete field values at quadrature points of every element.

    Returns (u1 values (ne, nq), u1 gradients (ne, nq, 2), u2 values
    (ne, nq, nc), u2 gradients (ne, nq, nc, 2), physical points (ne, nq, 2),
    weighted measures (ne, nq)).
    """
    dofmap = solution.dofmap
    values, phys_grads, pts, wdet = _geometry_tables(solution.mesh, dofmap, quadrature)

    dofs_u1 = dofmap.cell_dofs_u1
    local_u1 = np.where(dofs_u1 >= 0, solution.coeffs[np.maximum(dofs_u1, 0)], 0.0)
    u1_val = np.einsum("qi,ei->eq", values, local_u1)
    u1_grad = np.einsum("eqia,ei->eqa", phys_grads, local_u1)

    nc = dofmap.n_u2_components
    u2_val = np.empty(u1_val.shape + (nc,))
    u2_grad = np.empty(u1_val.shape + (nc, 2))
    for comp in range(nc):
        local = solution.coeffs[dofmap.cell_dofs_u2(comp)]
        u2_val[..., comp] = np.einsum("qi,ei->eq", values, local)
        u2_grad[..., comp, :] = np.einsum("eqia,ei->eqa", phys_grads, local)
    return u1_val, u1_grad, u2_val, u2_grad, pts, wdet


def u1_trace_on_facet(solution: DiscreteSolution, e: int, loc: int, s: np.ndarray) -> np.ndarray:
    """Values of u1 along local edge ``loc`` of element ``e`` at parameters ``s``."""
    ref = build_reference(solution.dofmap.degree)
    basis = ref.values(edge_reference_points(loc, s))
    dofs = solution.dofmap.cell_dofs_u1[e]
    local = np.where(dofs >= 0, solution.coeffs[np.maximum(dofs, 0)], 0.0)
    return basis @ local


def galerkin_orthogonality_check(
    solution: DiscreteSolution,
    system,
    quadrature: Optional[QuadratureRule] = None,
    sparse_system: Optional[SparseSystem] = None,
) -> float:
    """Largest normalized defect max_j |(f - G u, G phi_j)_L| / ||(f, G phi)_L||.

    The inner products are exactly the algebraic residual entries of the
    assembled system, so the defect measures how far the computed
    coefficients are from discrete orthogonality.
    """
    if sparse_system is None:
        sparse_system = assemble(solution.mesh, solution.dofmap, system, quadrature)
    r = sparse_system.rhs - sparse_system.matrix @ solution.coeffs
    b_norm = float(np.linalg.norm(sparse_system.rhs))
    r_max = float(np.max(np.abs(r))) if r.size else 0.0
    if b_norm == 0.0:
        return 0.0 if r_max == 0.0 else float("inf")
    return r_max / b_norm
