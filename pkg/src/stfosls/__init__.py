"""Adaptive space-time least-squares finite elements for parabolic problems.

The second-order equation du/dt - d/dx(A du/dx) + b du/dx + c u = f with
homogeneous lateral Dirichlet conditions is recast as a first-order system
for the pair (u, -A du/dx) on the space-time rectangle, discretized with
continuous Lagrange elements on bisection meshes, and solved by minimizing
the L2 residual of the system.  The residual doubles as a reliable and
efficient error estimator whose local parts drive an adaptive
solve-estimate-mark-refine loop.
"""

from .assembly import DiscreteSolution, SolverReport, SparseSystem, assemble, solve_cg
from .driver import (
    MarkingPropertyError,
    RunLog,
    RunRecord,
    SolverFailure,
    StopCriteria,
    adaptive_run,
    rate_table,
    uniform_run,
    write_runlog_csv,
)
from .estimator import (
    ErrorReport,
    Indicators,
    compute_indicators,
    efficiency_reliability_ratio,
    u_norm_error,
)
from .marking import MarkingConfig, MarkStrategy, mark, mark_doerfler, mark_maximum
from .mesh import FacetTag, Mesh, bisect, is_conforming, uniform_initial_mesh
from .problem import (
    CoefficientField,
    ConvectionForm,
    ExactFields,
    ManufacturedCase,
    ParabolicProblem,
    ProblemData,
    data_vector,
    exact_error_data,
    from_manufactured,
    make_problem,
)
from .spaces import build_dofmap, build_edge_quadrature, build_quadrature, build_reference
from .system import (
    GImage,
    ParabolicSystem,
    PoissonSystem,
    eval_G,
    eval_data,
    parabolic_system,
    poisson_sine_case,
    poisson_system,
)

__version__ = "0.1.0"
