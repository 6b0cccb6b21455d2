import numpy as np
import pytest
import sympy as sp

from stfosls.problem import (
    CoefficientField,
    ConvectionForm,
    ManufacturedCase,
    data_vector,
    exact_error_data,
    from_manufactured,
    make_problem,
    sample,
)


def _constant(v):
    return lambda t, x: np.full_like(np.asarray(t, dtype=float), v)


def _symbolic_source(u_expr, a_expr, b_expr, c_expr):
    """Strong-form source u_t - (A u_x)_x + b u_x + c u via symbolic differentiation."""
    t, x = sp.symbols("t x")
    f1 = (
        sp.diff(u_expr, t)
        - sp.diff(a_expr * sp.diff(u_expr, x), x)
        + b_expr * sp.diff(u_expr, x)
        + c_expr * u_expr
    )
    return sp.lambdify((t, x), sp.simplify(f1), "numpy")


def test_data_vector_zero_f2():
    problem, _ = make_problem("heat-smooth")
    target_flux, target_div, target_init = data_vector(problem)
    t = np.array([0.1, 0.7])
    x = np.array([0.3, 0.9])
    assert np.all(target_flux(t, x) == 0.0)
    assert np.allclose(target_div(t, x), sample(problem.data.f1, t, x), atol=0.0)
    assert np.allclose(target_init(x), np.sin(np.pi * x), atol=1e-15)


def test_data_vector_flux_correction():
    # A = 1, b = 1, f2 = 1, f1 = 0: divergence target is 0 - 1*1*1 = -1
    from stfosls.problem import ParabolicProblem, ProblemData

    problem = ParabolicProblem(
        t_end=1.0,
        x_lo=0.0,
        x_hi=1.0,
        coefficients=CoefficientField(_constant(1.0), _constant(1.0), _constant(0.0)),
        data=ProblemData(f1=_constant(0.0), f2=_constant(1.0), u0=lambda x: 0.0 * x),
        form=ConvectionForm.FLUX,
    )
    _, target_div, _ = data_vector(problem)
    assert np.allclose(target_div(np.array([0.2]), np.array([0.4])), -1.0, atol=0.0)


@pytest.mark.parametrize(
    "name,a_expr,b_expr,c_expr",
    [
        ("heat-smooth", 1, 0, 0),
        ("convection-reaction", 1, 1, 1),
        ("variable-a", None, 0, 0),
    ],
)
def test_manufactured_source_against_symbolic_oracle(name, a_expr, b_expr, c_expr):
    t, x = sp.symbols("t x")
    u_expr = sp.exp(-t) * sp.sin(sp.pi * x)
    if a_expr is None:
        a_expr = 1 + t * x / 2
    oracle = _symbolic_source(u_expr, sp.sympify(a_expr), sp.sympify(b_expr), sp.sympify(c_expr))

    problem, _ = make_problem(name)
    rng = np.random.default_rng(0)
    tt = rng.random(200)
    xx = rng.random(200)
    assert np.allclose(sample(problem.data.f1, tt, xx), oracle(tt, xx), atol=1e-12)


def test_heat_source_closed_form():
    problem, _ = make_problem("heat-smooth")
    tt = np.array([0.0, 0.5])
    xx = np.array([0.25, 0.75])
    expected = (np.pi**2 - 1.0) * np.exp(-tt) * np.sin(np.pi * xx)
    assert np.allclose(sample(problem.data.f1, tt, xx), expected, atol=1e-14)


def test_zero_case():
    zero = ManufacturedCase(
        name="zero",
        u=_constant(0.0),
        u_t=_constant(0.0),
        u_x=_constant(0.0),
        u_xx=_constant(0.0),
        flux=_constant(0.0),
        flux_x=_constant(0.0),
    )
    coeff = CoefficientField(_constant(1.0), _constant(0.0), _constant(0.0))
    problem = from_manufactured(zero, coeff)
    tt = np.linspace(0, 1, 5)
    assert np.all(sample(problem.data.f1, tt, tt) == 0.0)
    assert np.all(problem.data.u0(tt) == 0.0)


def test_exact_error_data_reference_flux():
    _, case = make_problem("heat-smooth")
    exact = exact_error_data(case)
    # flux reference at (0.5, 0.5): -pi e^{-1/2} cos(pi/2) = 0
    assert exact.u2(0.5, 0.5)[..., 0] == pytest.approx(0.0, abs=1e-15)
    # divergence identity: with b = c = 0 and f2 = 0 the space-time divergence
    # of the exact pair equals the source
    problem, _ = make_problem("heat-smooth")
    rng = np.random.default_rng(1)
    tt, xx = rng.random(100), rng.random(100)
    assert np.allclose(exact.div(tt, xx), sample(problem.data.f1, tt, xx), atol=1e-12)


def test_exact_error_data_zero_case():
    zero = ManufacturedCase(
        "zero", _constant(0.0), _constant(0.0), _constant(0.0), _constant(0.0),
        _constant(0.0), _constant(0.0),
    )
    exact = exact_error_data(zero)
    assert exact.u1(0.3, 0.4) == 0.0
    assert np.all(exact.u1_grad(0.3, 0.4) == 0.0)
    assert np.all(exact.u2(0.3, 0.4) == 0.0)


@pytest.mark.parametrize("name", ["heat-smooth", "convection-reaction", "variable-a"])
def test_strong_form_residual_vanishes(name):
    """f1 - (u_t - (A u_x)_x + b u_x + c u) = 0 at 1000 random points."""
    problem, case = make_problem(name)
    coeff = problem.coefficients
    rng = np.random.default_rng(42)
    t = rng.random(1000)
    x = rng.random(1000)
    lhs = (
        sample(case.u_t, t, x)
        + sample(case.flux_x, t, x)
        + sample(coeff.convection, t, x) * sample(case.u_x, t, x)
        + sample(coeff.reaction, t, x) * sample(case.u, t, x)
    )
    assert np.abs(sample(problem.data.f1, t, x) - lhs).max() <= 1e-12


def test_variable_a_flux_consistency():
    t, x = sp.symbols("t x")
    u_expr = sp.exp(-t) * sp.sin(sp.pi * x)
    a_expr = 1 + t * x / 2
    flux_expr = sp.lambdify((t, x), -a_expr * sp.diff(u_expr, x), "numpy")
    flux_x_expr = sp.lambdify((t, x), sp.diff(-a_expr * sp.diff(u_expr, x), x), "numpy")

    _, case = make_problem("variable-a")
    rng = np.random.default_rng(2)
    tt, xx = rng.random(100), rng.random(100)
    assert np.allclose(sample(case.flux, tt, xx), flux_expr(tt, xx), atol=1e-13)
    assert np.allclose(sample(case.flux_x, tt, xx), flux_x_expr(tt, xx), atol=1e-12)


def test_data_consistent_across_forms():
    """The two convection forms are built from identical (f1, f2, u0)."""
    rng = np.random.default_rng(3)
    tt, xx = rng.random(50), rng.random(50)
    for name in ("convection-reaction", "incompatible"):
        pf, _ = make_problem(name, ConvectionForm.FLUX)
        pg, _ = make_problem(name, ConvectionForm.GRADIENT)
        assert np.array_equal(sample(pf.data.f1, tt, xx), sample(pg.data.f1, tt, xx))
        assert np.array_equal(sample(pf.data.f2, tt, xx), sample(pg.data.f2, tt, xx))
        assert np.array_equal(
            np.asarray(pf.data.u0(xx), dtype=float), np.asarray(pg.data.u0(xx), dtype=float)
        )


def test_unknown_case_rejected():
    with pytest.raises(ValueError):
        make_problem("no-such-case")


def test_coefficient_positivity_on_samples():
    for name in ("heat-smooth", "convection-reaction", "variable-a", "incompatible"):
        problem, _ = make_problem(name)
        rng = np.random.default_rng(4)
        t, x = rng.random(500), rng.random(500)
        a = sample(problem.coefficients.diffusion, t, x)
        assert np.all(a > 0)
        assert np.all(np.isfinite(sample(problem.data.f1, t, x)))
