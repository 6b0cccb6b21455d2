import math

import numpy as np
import pytest

from stfosls.driver import (
    RunLog,
    RunRecord,
    SolverReport,
    StopCriteria,
    adaptive_run,
    rate_table,
    uniform_run,
    write_runlog_csv,
)
from stfosls.marking import MarkingConfig, MarkStrategy
from stfosls.mesh import is_conforming, uniform_initial_mesh
from stfosls.problem import (
    CoefficientField,
    ParabolicProblem,
    ProblemData,
    exact_error_data,
    make_problem,
)

DOERFLER = MarkingConfig(MarkStrategy.DOERFLER, 0.5)


def _zero_problem():
    zero = lambda t, x: np.zeros_like(np.asarray(t, dtype=float))
    return ParabolicProblem(
        t_end=1.0, x_lo=0.0, x_hi=1.0,
        coefficients=CoefficientField(
            lambda t, x: np.ones_like(np.asarray(t, dtype=float)), zero, zero
        ),
        data=ProblemData(f1=zero, f2=zero, u0=lambda x: 0.0 * np.asarray(x, dtype=float)),
    )


def test_stop_criteria_requires_a_criterion():
    with pytest.raises(ValueError):
        StopCriteria()


def test_solver_failure_aborts_run(monkeypatch):
    import stfosls.driver as driver_mod
    from stfosls.driver import SolverFailure

    def stalled(matrix, rhs, rel_tol=1e-10, max_iters=None):
        return np.zeros_like(rhs), SolverReport(
            iterations=1, relative_residual=1.0, converged=False
        )

    monkeypatch.setattr(driver_mod, "solve_cg", stalled)
    problem, _ = make_problem("heat-smooth")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    with pytest.raises(SolverFailure):
        adaptive_run(problem, mesh, 1, DOERFLER, StopCriteria(max_iterations=2))


def test_zero_data_stops_at_level_zero():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = adaptive_run(_zero_problem(), mesh, 1, DOERFLER, StopCriteria(max_iterations=10))
    assert len(log.records) == 1
    assert log.reason == "converged"
    assert log.records[0].estimator == 0.0


def test_adaptive_heat_estimator_decreases():
    problem, case = make_problem("heat-smooth")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = adaptive_run(
        problem, mesh, 1, DOERFLER, StopCriteria(max_dofs=5000),
        exact=exact_error_data(case), check_galerkin=True,
    )
    eta = log.estimators()
    assert log.reason == "max_dofs"
    assert np.all(np.diff(eta[-5:]) < 0)
    assert eta[-1] < eta[0]
    assert all(r.galerkin_defect <= 1e-7 for r in log.records)
    dofs = log.dofs()
    assert np.all(np.diff(dofs) >= 0)


def test_adaptive_meshes_stay_conforming():
    problem, _ = make_problem("incompatible")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = adaptive_run(problem, mesh, 1, DOERFLER, StopCriteria(max_iterations=8))
    assert log.final_mesh is not None
    assert is_conforming(log.final_mesh)


def test_incompatible_concentrates_near_initial_time():
    """By level 10 the share of elements near t = 0 exceeds the share a
    uniform mesh of comparable size would have."""
    problem, _ = make_problem("incompatible")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = adaptive_run(problem, mesh, 1, DOERFLER, StopCriteria(max_iterations=10))
    final = log.final_mesh

    def fraction_near_zero(m, cut=0.1):
        tmin = m.element_coords()[:, :, 0].min(axis=1)
        return float(np.mean(tmin < cut))

    n = max(2, int(round(math.sqrt(final.n_elements / 2.0))))
    uniform = uniform_initial_mesh(1.0, (0.0, 1.0), n, n)
    assert fraction_near_zero(final) > fraction_near_zero(uniform)


def test_uniform_run_zero_data():
    from stfosls.problem import ManufacturedCase

    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    problem = _zero_problem()
    zero = lambda t, x: np.zeros_like(np.asarray(t, dtype=float))
    zero_exact = exact_error_data(ManufacturedCase("zero", zero, zero, zero, zero, zero, zero))
    log = uniform_run(problem, mesh, 1, 3, exact=zero_exact)
    assert np.all(log.estimators() == 0.0)
    assert np.all(log.errors() == 0.0)


def test_uniform_run_halves_mesh_width():
    problem, _ = make_problem("heat-smooth")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = uniform_run(problem, mesh, 1, 3)
    elems = np.array([r.elements for r in log.records])
    assert np.array_equal(elems, [8, 32, 128])


def test_estimator_monotone_under_uniform_refinement():
    problem, _ = make_problem("convection-reaction")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = uniform_run(problem, mesh, 1, 4)
    eta = log.estimators()
    assert np.all(eta[1:] <= eta[:-1] + 1e-10)


def _fake_log(entries):
    records = [
        RunRecord(
            level=i, dofs=d, elements=d, estimator=e, error=err, marked=0,
            solver=SolverReport(1, 0.0, True),
        )
        for i, (d, e, err) in enumerate(entries)
    ]
    return RunLog(records=records, reason="levels")


def test_rate_table_hand_examples():
    # error ratio 2 under mesh-width ratio 2 (dofs ratio 4) -> order 1
    log = _fake_log([(100, 1.0, 2.0), (400, 0.5, 1.0)])
    rows = rate_table(log)
    assert rows[0][3] is None
    assert rows[1][3] == pytest.approx(1.0, abs=1e-12)

    constant = _fake_log([(100, 1.0, 0.7), (400, 1.0, 0.7)])
    assert rate_table(constant)[1][3] == 0.0

    with pytest.raises(ValueError):
        rate_table(_fake_log([(100, 1.0, 1.0)]))


def test_rate_table_reproduces_uniform_rates():
    problem, case = make_problem("heat-smooth")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = uniform_run(problem, mesh, 1, 4, exact=exact_error_data(case))
    orders = [row[3] for row in rate_table(log)[1:]]
    assert all(0.85 <= o <= 1.3 for o in orders)


def test_runlog_csv_format(tmp_path):
    problem, case = make_problem("heat-smooth")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    log = uniform_run(problem, mesh, 1, 2, exact=exact_error_data(case))
    path = tmp_path / "runlog.csv"
    write_runlog_csv(log, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "level,dofs,elements,estimator,error,marked,cg_iters"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "12" and first[2] == "8"
    assert float(first[3]) > 0 and float(first[4]) > 0

    # error column is empty without a manufactured reference
    problem2, _ = make_problem("incompatible")
    log2 = adaptive_run(problem2, mesh, 1, DOERFLER, StopCriteria(max_iterations=1))
    path2 = tmp_path / "runlog2.csv"
    write_runlog_csv(log2, path2)
    row = path2.read_text().splitlines()[1].split(",")
    assert row[4] == ""


def test_runs_are_deterministic(tmp_path):
    problem, _ = make_problem("incompatible")
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    out = []
    for tag in ("a", "b"):
        log = adaptive_run(problem, mesh, 1, DOERFLER, StopCriteria(max_iterations=6))
        path = tmp_path / f"log_{tag}.csv"
        write_runlog_csv(log, path)
        out.append(path.read_bytes())
    assert out[0] == out[1]


def test_marking_property_holds_every_iteration():
    """Replicate the loop by hand and verify the marking property per level."""
    from stfosls.assembly import DiscreteSolution, assemble, solve_cg
    from stfosls.estimator import compute_indicators
    from stfosls.marking import mark, verify_marking_property
    from stfosls.mesh import bisect
    from stfosls.spaces import build_dofmap
    from stfosls.system import parabolic_system

    problem, _ = make_problem("heat-smooth")
    system = parabolic_system(problem)
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    for _ in range(5):
        dofmap = build_dofmap(mesh, 1, n_u2_components=1, dirichlet_tags=system.dirichlet_tags)
        sparse_system = assemble(mesh, dofmap, system)
        coeffs, report = solve_cg(sparse_system.matrix, sparse_system.rhs)
        assert report.converged
        solution = DiscreteSolution(coeffs=coeffs, mesh=mesh, dofmap=dofmap)
        indicators = compute_indicators(mesh, solution, system)
        marks = mark(indicators.per_element, DOERFLER)
        assert verify_marking_property(indicators.per_element, marks)
        mesh = bisect(mesh, marks)

    log = adaptive_run(problem, uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2), 1,
                       DOERFLER, StopCriteria(max_iterations=5))
    assert log.reason == "max_iterations"
    assert all(r.marked > 0 for r in log.records[:-1])
