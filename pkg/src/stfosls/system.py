"""First-order systems evaluated pointwise on discrete fields.

A system maps the pair (u1, u2) of a constrained scalar field and a vector
of flux components to interior residual components plus, optionally, an
initial-trace component supported on facets tagged Initial.  Assembly,
estimation and the adaptive driver only use this interface, so any linear
first-order least-squares formulation over the same product space plugs in.

Parabolic instance (flux form):

    G(u1, u2) = (u2 + A du1/dx,
                 du1/dt + du2/dx - b A^{-1} u2 + c u1,
                 u1(0, .))

with target data (f2, f1 - b A^{-1} f2, u0).  The gradient form replaces
``-b A^{-1} u2`` by ``+b du1/dx``.

Stationary Poisson instance on the same 2D mesh, coordinates read as
(x1, x2), flux convention sigma = -grad(u), so div(sigma) = f:

    G(u, sigma) = (sigma + grad(u), div(sigma)),   data (0, 0, f),

with u constrained on the whole boundary and no initial-trace component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import FacetTag
from .problem import ConvectionForm, ParabolicProblem, sample, sample_x

__all__ = [
    "GImage",
    "ParabolicSystem",
    "PoissonSystem",
    "parabolic_system",
    "poisson_system",
    "eval_G",
    "eval_data",
    "eval_data_initial",
    "poisson_sine_case",
]


@dataclass(frozen=True)
class GImage:
    """Pointwise image of the system operator.

    ``flux`` holds the flux-residual components, ``div`` the divergence
    residual, and ``initial`` the trace component (None for systems without
    one; it only carries meaning on facets tagged Initial).
    """

    flux: np.ndarray
    div: float
    initial: Optional[float]


class ParabolicSystem:
    """Space-time first-order system of the second-order parabolic equation."""

    n_flux = 1
    has_initial_trace = True
    dirichlet_tags = frozenset({FacetTag.LATERAL_DIRICHLET})
    spatial_axes = (1,)  # coordinate axes entering the spatial gradient

    def __init__(self, problem: ParabolicProblem):
        self.problem = problem

    @property
    def n_interior(self) -> int:
        return self.n_flux + 1

    def residual_u1(self, t, x, val, grad):
        """Interior residual components generated by the u1 field.

        ``grad`` stacks (d/dt, d/dx) in its last axis; output stacks
        (flux residual, divergence residual).
        """
        coeff = self.problem.coefficients
        a = sample(coeff.diffusion, t, x)
        c = sample(coeff.reaction, t, x)
        r_flux = a * grad[..., 1]
        r_div = grad[..., 0] + c * val
        if self.problem.form is ConvectionForm.GRADIENT:
            b = sample(coeff.convection, t, x)
            r_div = r_div + b * grad[..., 1]
        return np.stack(np.broadcast_arrays(r_flux, r_div), axis=-1)

    def residual_u2(self, comp, t, x, val, grad):
        if comp != 0:
            raise IndexError("parabolic system has a single flux component")
        r_flux = np.asarray(val, dtype=float)
        r_div = grad[..., 1]
        if self.problem.form is ConvectionForm.FLUX:
            coeff = self.problem.coefficients
            b = sample(coeff.convection, t, x)
            a = sample(coeff.diffusion, t, x)
            r_div = r_div - b / a * val
        return np.stack(np.broadcast_arrays(r_flux, r_div), axis=-1)

    def data_interior(self, t, x):
        coeff, data = self.problem.coefficients, self.problem.data
        f2 = sample(data.f2, t, x)
        b = sample(coeff.convection, t, x)
        a = sample(coeff.diffusion, t, x)
        target_div = sample(data.f1, t, x) - b / a * f2
        return np.stack([f2, target_div], axis=-1)

    def data_initial(self, x):
        return sample_x(self.problem.data.u0, x)

    @staticmethod
    def divergence(u1_grad, u2_grads):
        """Space-time divergence d(u1)/dt + d(u2)/dx of the field vector."""
        return u1_grad[..., 0] + u2_grads[..., 0, 1]


class PoissonSystem:
    """Least-squares system of the Poisson problem -div(grad u) = f."""

    n_flux = 2
    has_initial_trace = False
    dirichlet_tags = frozenset(
        {FacetTag.LATERAL_DIRICHLET, FacetTag.INITIAL, FacetTag.FINAL}
    )
    spatial_axes = (0, 1)

    def __init__(self, f: Callable):
        self.f = f

    @property
    def n_interior(self) -> int:
        return self.n_flux + 1

    def residual_u1(self, t, x, val, grad):
        zero = np.zeros_like(np.asarray(val, dtype=float))
        return np.stack(np.broadcast_arrays(grad[..., 0], grad[..., 1], zero), axis=-1)

    def residual_u2(self, comp, t, x, val, grad):
        if comp not in (0, 1):
            raise IndexError("flux component out of range")
        val = np.asarray(val, dtype=float)
        zero = np.zeros_like(val)
        rows = [zero, zero, grad[..., comp]]
        rows[comp] = val
        return np.stack(np.broadcast_arrays(*rows), axis=-1)

    def data_interior(self, t, x):
        f = sample(self.f, t, x)
        zero = np.zeros_like(f)
        return np.stack([zero, zero, f], axis=-1)

    def data_initial(self, x):
        raise RuntimeError("stationary system has no initial-trace component")

    @staticmethod
    def divergence(u1_grad, u2_grads):
        return u2_grads[..., 0, 0] + u2_grads[..., 1, 1]


def parabolic_system(problem: ParabolicProblem) -> ParabolicSystem:
    return ParabolicSystem(problem)


def poisson_system(f: Callable) -> PoissonSystem:
    return PoissonSystem(f)


def eval_G(system, point, u1_val, u1_grad, u2_val, u2_grad) -> GImage:
    """Apply the system operator to field values at one point.

    ``u2_val`` has one entry per flux component and ``u2_grad`` one gradient
    row per component; scalars are accepted for single-flux systems.
    """
    t, x = float(point[0]), float(point[1])
    u1_grad = np.asarray(u1_grad, dtype=float)
    u2_val = np.atleast_1d(np.asarray(u2_val, dtype=float))
    u2_grad = np.asarray(u2_grad, dtype=float).reshape(system.n_flux, 2)

    interior = system.residual_u1(t, x, float(u1_val), u1_grad)
    for comp in range(system.n_flux):
        interior = interior + system.residual_u2(comp, t, x, u2_val[comp], u2_grad[comp])
    interior = np.asarray(interior, dtype=float)
    return GImage(
        flux=interior[:system.n_flux],
        div=float(interior[system.n_flux]),
        initial=float(u1_val) if system.has_initial_trace else None,
    )


def eval_data(system, point) -> np.ndarray:
    """Interior residual targets at one point, flux components first."""
    t, x = float(point[0]), float(point[1])
    return np.asarray(system.data_interior(t, x), dtype=float)


def eval_data_initial(system, x) -> float:
    """Initial-trace target at a point of the t = 0 boundary."""
    return float(system.data_initial(float(x)))


def poisson_sine_case():
    """Poisson instance with u = sin(pi x1) sin(pi x2) and its exact fields."""
    from .problem import ExactFields

    pi = np.pi

    def u(t, x):
        return np.sin(pi * t) * np.sin(pi * x)

    def f(t, x):
        return 2.0 * pi * pi * np.sin(pi * t) * np.sin(pi * x)

    def u_grad(t, x):
        return np.stack(
            [
                pi * np.cos(pi * np.asarray(t)) * np.sin(pi * np.asarray(x)),
                pi * np.sin(pi * np.asarray(t)) * np.cos(pi * np.asarray(x)),
            ],
            axis=-1,
        )

    def sigma(t, x):
        return -u_grad(t, x)

    exact = ExactFields(u1=u, u1_grad=u_grad, u2=sigma, div=f)
    return PoissonSystem(f), exact
