"""The adaptive loop (solve, estimate, mark, refine) and a uniform-refinement
mode for convergence-rate studies, with per-level run logging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .assembly import (
    DiscreteSolution,
    SolverReport,
    assemble,
    galerkin_orthogonality_check,
    solve_cg,
)
from .estimator import compute_indicators, u_norm_error
from .marking import MarkingConfig, mark, verify_marking_property
from .mesh import Mesh, bisect
from .problem import ExactFields, ParabolicProblem
from .spaces import build_dofmap, build_edge_quadrature, build_quadrature
from .system import parabolic_system

__all__ = [
    "StopCriteria",
    "RunRecord",
    "RunLog",
    "SolverFailure",
    "MarkingPropertyError",
    "adaptive_run",
    "uniform_run",
    "rate_table",
    "write_runlog_csv",
]


class SolverFailure(RuntimeError):
    """The inner linear solver did not reach its tolerance."""


class MarkingPropertyError(RuntimeError):
    """A produced mark set violated the marking property (internal bug guard)."""


@dataclass(frozen=True)
class StopCriteria:
    """Loop termination: any satisfied criterion stops the run.

    ``max_iterations`` bounds the number of refinement steps (a run records
    at most max_iterations + 1 levels), ``max_dofs`` stops once a solved
    level reaches that many unknowns, and ``estimator_tolerance`` is an
    absolute threshold on the global estimator.
    """

    max_iterations: Optional[int] = None
    max_dofs: Optional[int] = None
    estimator_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations is None and self.max_dofs is None \
                and self.estimator_tolerance is None:
            raise ValueError("at least one stopping criterion must be set")


@dataclass
class RunRecord:
    level: int
    dofs: int
    elements: int
    estimator: float
    error: Optional[float]
    marked: int
    solver: SolverReport
    galerkin_defect: Optional[float] = None


@dataclass
class RunLog:
    records: List[RunRecord] = field(default_factory=list)
    reason: str = ""
    final_mesh: Optional[Mesh] = None

    def estimators(self) -> np.ndarray:
        return np.array([r.estimator for r in self.records])

    def errors(self) -> np.ndarray:
        return np.array([math.nan if r.error is None else r.error for r in self.records])

    def dofs(self) -> np.ndarray:
        return np.array([r.dofs for r in self.records])


def _as_system(problem_or_system):
    if isinstance(problem_or_system, ParabolicProblem):
        return parabolic_system(problem_or_system)
    return problem_or_system


def _solve_level(mesh, system, p, quad, equad, cg_rel_tol, check_galerkin):
    dofmap = build_dofmap(
        mesh, p, n_u2_components=system.n_flux, dirichlet_tags=system.dirichlet_tags
    )
    sparse = assemble(mesh, dofmap, system, quad, equad)
    coeffs, report = solve_cg(sparse.matrix, sparse.rhs, rel_tol=cg_rel_tol)
    if not report.converged:
        raise SolverFailure(
            f"CG stalled at relative residual {report.relative_residual:.3e} "
            f"after {report.iterations} iterations on {sparse.n_dofs} dofs"
        )
    solution = DiscreteSolution(coeffs=coeffs, mesh=mesh, dofmap=dofmap)
    defect = None
    if check_galerkin:
        defect = galerkin_orthogonality_check(solution, system, quad, sparse_system=sparse)
    return solution, report, defect


def adaptive_run(
    problem_or_system,
    mesh0: Mesh,
    p: int,
    marking: MarkingConfig,
    stop: StopCriteria,
    exact: Optional[ExactFields] = None,
    quad_degree: Optional[int] = None,
    cg_rel_tol: float = 1e-10,
    check_galerkin: bool = False,
) -> RunLog:
    """Run the adaptive loop until a stopping criterion fires.

    Each level solves the least-squares system, computes indicators, marks
    (verifying the marking property), and refines exactly the marked set
    plus bisection closure.  All-zero indicators terminate the run as
    converged.
    """
    system = _as_system(problem_or_system)
    degree = quad_degree if quad_degree is not None else 2 * p + 2
    quad = build_quadrature(degree)
    equad = build_edge_quadrature(degree)

    log = RunLog()
    mesh = mesh0
    level = 0
    while True:
        solution, report, defect = _solve_level(
            mesh, system, p, quad, equad, cg_rel_tol, check_galerkin
        )
        indicators = compute_indicators(mesh, solution, system, quad, equad)
        error = None
        if exact is not None:
            error = u_norm_error(mesh, solution, exact, system, quad, equad).total
        record = RunRecord(
            level=level,
            dofs=solution.dofmap.n_dofs,
            elements=mesh.n_elements,
            estimator=indicators.total,
            error=error,
            marked=0,
            solver=report,
            galerkin_defect=defect,
        )
        log.records.append(record)

        log.final_mesh = mesh
        if stop.estimator_tolerance is not None and indicators.total <= stop.estimator_tolerance:
            log.reason = "estimator_tolerance"
            return log
        if np.all(indicators.per_element == 0.0):
            log.reason = "converged"
            return log
        if stop.max_dofs is not None and solution.dofmap.n_dofs >= stop.max_dofs:
            log.reason = "max_dofs"
            return log
        if stop.max_iterations is not None and level >= stop.max_iterations:
            log.reason = "max_iterations"
            return log

        marks = mark(indicators.per_element, marking)
        if not verify_marking_property(indicators.per_element, marks):
            raise MarkingPropertyError(
                f"marking strategy {marking.strategy.value} violated the marking property"
            )
        record.marked = int(marks.size)
        mesh = bisect(mesh, marks)
        level += 1


def uniform_run(
    problem_or_system,
    mesh0: Mesh,
    p: int,
    levels: int,
    exact: Optional[ExactFields] = None,
    quad_degree: Optional[int] = None,
    cg_rel_tol: float = 1e-10,
    check_galerkin: bool = False,
) -> RunLog:
    """Solve on a sequence of uniformly refined meshes.

    Each level applies two full bisection sweeps, which splits every
    triangle into four similar children and halves the mesh width.
    """
    if levels < 1:
        raise ValueError("a uniform run needs at least one level")
    system = _as_system(problem_or_system)
    degree = quad_degree if quad_degree is not None else 2 * p + 2
    quad = build_quadrature(degree)
    equad = build_edge_quadrature(degree)

    log = RunLog()
    mesh = mesh0
    for level in range(levels):
        solution, report, defect = _solve_level(
            mesh, system, p, quad, equad, cg_rel_tol, check_galerkin
        )
        indicators = compute_indicators(mesh, solution, system, quad, equad)
        error = None
        if exact is not None:
            error = u_norm_error(mesh, solution, exact, system, quad, equad).total
        marked = mesh.n_elements if level + 1 < levels else 0
        log.records.append(
            RunRecord(
                level=level,
                dofs=solution.dofmap.n_dofs,
                elements=mesh.n_elements,
                estimator=indicators.total,
                error=error,
                marked=marked,
                solver=report,
                galerkin_defect=defect,
            )
        )
        if level + 1 < levels:
            mesh = bisect(mesh, np.arange(mesh.n_elements))
            mesh = bisect(mesh, np.arange(mesh.n_elements))
    log.reason = "levels"
    log.final_mesh = mesh
    return log


def rate_table(runlog: RunLog, column: str = "auto"):
    """Rows (dofs, estimator, error, order) with orders against mesh width.

    The order between consecutive records uses h ~ dofs^(-1/2) in the
    space-time plane: order = 2 log(v_prev / v) / log(dofs / dofs_prev).
    ``column`` selects 'error' or 'estimator'; 'auto' prefers the error
    when every record carries one.
    """
    if len(runlog.records) < 2:
        raise ValueError("rate table needs at least two records")
    if column == "auto":
        column = "error" if all(r.error is not None for r in runlog.records) else "estimator"
    values = runlog.errors() if column == "error" else runlog.estimators()
    dofs = runlog.dofs().astype(float)

    rows = []
    for i, rec in enumerate(runlog.records):
        order = None
        if i > 0:
            prev, cur = values[i - 1], values[i]
            if prev == cur:
                order = 0.0
            elif prev > 0 and cur > 0 and dofs[i] > dofs[i - 1]:
                order = 2.0 * math.log(prev / cur) / math.log(dofs[i] / dofs[i - 1])
            else:
                order = math.nan
        rows.append((rec.dofs, rec.estimator, rec.error, order))
    return rows


def write_runlog_csv(runlog: RunLog, path) -> None:
    """CSV log, one row per level; the error column is empty without a reference."""
    lines = ["level,dofs,elements,estimator,error,marked,cg_iters"]
    for r in runlog.records:
        err = "" if r.error is None else repr(float(r.error))
        lines.append(
            f"{r.level},{r.dofs},{r.elements},{float(r.estimator)!r},{err},{r.marked},{r.solver.iterations}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
