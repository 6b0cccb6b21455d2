"""Elementwise least-squares error indicators and graph-norm error evaluation.

The squared indicator of an element collects the local L-norm of the
residual: the interior residual components integrated over the element plus
the squared mismatch of the initial trace over the element's facets on
t = 0.  Squared indicators add up exactly to the squared global estimator.

The error against a manufactured reference is measured in the localized
graph seminorm

    ||v||^2 = ||v1||^2 + ||grad_x v1||^2 + ||v2||^2 + ||div v||^2
              + ||v1(0,.)||^2,

whose pieces the report keeps separate; the trace term is dropped for
systems without an initial-trace component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import (
    DiscreteSolution,
    default_edge_quadrature,
    default_quadrature,
    element_fields,
    _initial_facet_tables,
)
from .mesh import Mesh
from .problem import ExactFields, sample
from .spaces import EdgeQuadratureRule, QuadratureRule

__all__ = [
    "Indicators",
    "ErrorReport",
    "compute_indicators",
    "u_norm_error",
    "efficiency_reliability_ratio",
    "data_norm",
]


@dataclass(frozen=True)
class Indicators:
    """Per-element indicators eta(K) >= 0 with eta^2 = sum of eta(K)^2."""

    per_element: np.ndarray
    total: float


@dataclass(frozen=True)
class ErrorReport:
    """Squared-additive seminorm contributions of the discretization error."""

    u1_l2: float
    u1_grad_l2: float
    u2_l2: float
    div_l2: float
    initial_l2: float
    total: float

    def contributions(self):
        return (self.u1_l2, self.u1_grad_l2, self.u2_l2, self.div_l2, self.initial_l2)


def _interior_residuals(solution: DiscreteSolution, system, quad: QuadratureRule):
    """data - G(u^delta) at all quadrature points, with weights and points."""
    u1_val, u1_grad, u2_val, u2_grad, pts, wdet = element_fields(solution, quad)
    t, x = pts[..., 0], pts[..., 1]
    image = system.residual_u1(t, x, u1_val, u1_grad)
    for comp in range(system.n_flux):
        image = image + system.residual_u2(comp, t, x, u2_val[..., comp], u2_grad[..., comp, :])
    resid = system.data_interior(t, x) - image
    return resid, wdet


def compute_indicators(
    mesh: Mesh,
    solution: DiscreteSolution,
    system,
    quadrature: Optional[QuadratureRule] = None,
    edge_quadrature: Optional[EdgeQuadratureRule] = None,
) -> Indicators:
    """Least-squares indicators of a solved discrete solution."""
    quad = quadrature if quadrature is not None else default_quadrature(solution.dofmap)
    equad = edge_quadrature if edge_quadrature is not None else default_edge_quadrature(solution.dofmap)

    resid, wdet = _interior_residuals(solution, system, quad)
    eta2 = np.einsum("eqr,eqr,eq->e", resid, resid, wdet)

    if system.has_initial_trace:
        for e, _loc, basis, xs, wlen in _initial_facet_tables(mesh, solution.dofmap, equad):
            dofs = solution.dofmap.cell_dofs_u1[e]
            local = np.where(dofs >= 0, solution.coeffs[np.maximum(dofs, 0)], 0.0)
            trace = basis @ local
            mismatch = trace - system.data_initial(xs)
            eta2[e] += float(np.dot(wlen, mismatch**2))

    eta2 = np.maximum(eta2, 0.0)
    return Indicators(per_element=np.sqrt(eta2), total=float(np.sqrt(eta2.sum())))


def u_norm_error(
    mesh: Mesh,
    solution: DiscreteSolution,
    exact: ExactFields,
    system,
    quadrature: Optional[QuadratureRule] = None,
    edge_quadrature: Optional[EdgeQuadratureRule] = None,
) -> ErrorReport:
    """Graph-norm error of a discrete solution against closed-form references."""
    quad = quadrature if quadrature is not None else default_quadrature(solution.dofmap)
    equad = edge_quadrature if edge_quadrature is not None else default_edge_quadrature(solution.dofmap)

    u1_val, u1_grad, u2_val, u2_grad, pts, wdet = element_fields(solution, quad)
    t, x = pts[..., 0], pts[..., 1]

    e_u1 = u1_val - sample(exact.u1, t, x)
    e_grad = u1_grad - exact.u1_grad(t, x)
    e_u2 = u2_val - exact.u2(t, x)
    e_div = system.divergence(u1_grad, u2_grad) - sample(exact.div, t, x)

    sq_u1 = float(np.einsum("eq,eq->", e_u1**2, wdet))
    sq_grad = 0.0
    for axis in system.spatial_axes:
        sq_grad += float(np.einsum("eq,eq->", e_grad[..., axis] ** 2, wdet))
    sq_u2 = float(np.einsum("eqc,eq->", e_u2**2, wdet))
    sq_div = float(np.einsum("eq,eq->", e_div**2, wdet))

    sq_trace = 0.0
    if system.has_initial_trace:
        for e, loc, basis, xs, wlen in _initial_facet_tables(mesh, solution.dofmap, equad):
            dofs = solution.dofmap.cell_dofs_u1[e]
            local = np.where(dofs >= 0, solution.coeffs[np.maximum(dofs, 0)], 0.0)
            trace = basis @ local
            ref = sample(exact.u1, np.zeros_like(xs), xs)
            sq_trace += float(np.dot(wlen, (trace - ref) ** 2))

    total = float(np.sqrt(sq_u1 + sq_grad + sq_u2 + sq_div + sq_trace))
    return ErrorReport(
        u1_l2=float(np.sqrt(sq_u1)),
        u1_grad_l2=float(np.sqrt(sq_grad)),
        u2_l2=float(np.sqrt(sq_u2)),
        div_l2=float(np.sqrt(sq_div)),
        initial_l2=float(np.sqrt(sq_trace)),
        total=total,
    )


def efficiency_reliability_ratio(indicators: Indicators, report: ErrorReport) -> float:
    """Ratio estimator / error; returns inf when the error vanishes."""
    if report.total == 0.0:
        return float("inf")
    return indicators.total / report.total


def data_norm(
    mesh: Mesh,
    dofmap,
    system,
    quadrature: Optional[QuadratureRule] = None,
    edge_quadrature: Optional[EdgeQuadratureRule] = None,
) -> float:
    """L-norm of the data vector (interior targets plus initial datum)."""
    quad = quadrature if quadrature is not None else default_quadrature(dofmap)
    equad = edge_quadrature if edge_quadrature is not None else default_edge_quadrature(dofmap)

    from .assembly import _geometry_tables

    _, _, pts, wdet = _geometry_tables(mesh, dofmap, quad)
    data = system.data_interior(pts[..., 0], pts[..., 1])
    sq = float(np.einsum("eqr,eqr,eq->", data, data, wdet))
    if system.has_initial_trace:
        for _e, _loc, _basis, xs, wlen in _initial_facet_tables(mesh, dofmap, equad):
            sq += float(np.dot(wlen, system.data_initial(xs) ** 2))
    return float(np.sqrt(sq))
