"""Conservation-law models: fluxes, wave speeds, invariant regions, LF flux.

States are numpy arrays whose last axis holds the conserved components
(m=1 for scalar laws, m=4 for 2D Euler: rho, rho*v1, rho*v2, E).  All
operations are vectorized over any number of leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class AdmissibilityError(RuntimeError):
    """A state left the invariant region where the scheme required membership."""

    def __init__(self, message: str, cell: tuple[int, int] | None = None):
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class BoxScalar:
    """Scalar invariant region: the interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("box region needs lo < hi")

    def contains(self, u: np.ndarray, slack: float = 0.0) -> np.ndarray:
        v = u[..., 0]
        return (v >= self.lo - slack) & (v <= self.hi + slack)


@dataclass(frozen=True)
class EulerPositivity:
    """Euler admissible set {rho > 0, p > 0} with small numerical floors."""

    eps_rho: float = 1e-13
    eps_p: float = 1e-13
    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        if not (0.0 < self.eps_rho <= 1e-10 and 0.0 < self.eps_p <= 1e-10):
            raise ValueError("positivity floors must lie in (0, 1e-10]")

    def contains(self, u: np.ndarray, slack: float = 0.0) -> np.ndarray:
        rho = u[..., 0]
        ok_rho = rho >= self.eps_rho * (1.0 - 1e-10) - slack
        p = _pressure_raw(u, self.gamma)
        return ok_rho & (p >= self.eps_p * (1.0 - 1e-10) - slack)


InvariantRegion = BoxScalar | EulerPositivity


def in_region(region: InvariantRegion, u: np.ndarray) -> np.ndarray:
    return region.contains(np.asarray(u, dtype=float))


def _pressure_raw(u: np.ndarray, gamma: float) -> np.ndarray:
    """p = (gamma-1)(E - (m1^2+m2^2)/(2 rho)); no admissibility checks."""
    rho = u[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        kinetic = (u[..., 1] ** 2 + u[..., 2] ** 2) / (2.0 * rho)
    return (gamma - 1.0) * (u[..., 3] - kinetic)


def euler_pressure(u: np.ndarray, gamma: float) -> np.ndarray | float:
    u = np.asarray(u, dtype=float)
    if np.any(u[..., 0] <= 0.0):
        raise AdmissibilityError("nonpositive density in euler_pressure")
    p = _pressure_raw(u, gamma)
    return float(p) if p.ndim == 0 else p


class AdvectionModel:
    """Linear advection u_t + c1 u_x + c2 u_y = 0."""

    m = 1
    name = "advection2d"

    def __init__(self, c=(1.0, 1.0), region: BoxScalar = BoxScalar(-1.0, 1.0),
                 exact_solution: Optional[Callable] = None):
        self.c = (float(c[0]), float(c[1]))
        self.region = region
        self.exact_solution = exact_solution
        self.params = {"c": self.c}

    def flux(self, u: np.ndarray, axis: int) -> np.ndarray:
        return self.c[axis] * u

    def max_wave_speed(self, u: np.ndarray, axis: int) -> np.ndarray:
        return np.full(u.shape[:-1], abs(self.c[axis]))

    def check_admissible(self, u: np.ndarray) -> np.ndarray:
        return np.isfinite(u[..., 0])


class BurgersModel:
    """2D inviscid Burgers: f1 = f2 = u^2/2."""

    m = 1
    name = "burgers2d"

    def __init__(self, region: BoxScalar, exact_solution: Optional[Callable] = None):
        self.region = region
        self.exact_solution = exact_solution
        self.params = {}

    def flux(self, u: np.ndarray, axis: int) -> np.ndarray:
        return 0.5 * u * u

    def max_wave_speed(self, u: np.ndarray, axis: int) -> np.ndarray:
        return np.abs(u[..., 0])

    def check_admissible(self, u: np.ndarray) -> np.ndarray:
        return np.isfinite(u[..., 0])


class EulerModel:
    """2D compressible Euler equations with ideal-gas closure."""

    m = 4
    name = "euler2d"

    def __init__(self, gamma: float = 5.0 / 3.0, region: EulerPositivity | None = None,
                 exact_solution: Optional[Callable] = None):
        self.gamma = float(gamma)
        self.region = region if region is not None else EulerPositivity(gamma=self.gamma)
        self.exact_solution = exact_solution
        self.params = {"gamma": self.gamma}

    def pressure(self, u: np.ndarray) -> np.ndarray:
        return _pressure_raw(u, self.gamma)

    def flux(self, u: np.ndarray, axis: int) -> np.ndarray:
        rho = u[..., 0]
        v = u[..., 1 + axis] / rho
        p = self.pressure(u)
        out = u * v[..., None]
        out[..., 1 + axis] += p
        out[..., 3] += p * v
        return out

    def max_wave_speed(self, u: np.ndarray, axis: int) -> np.ndarray:
        rho = u[..., 0]
        p = self.pressure(u)
        if np.any(rho <= 0.0) or np.any(p <= 0.0):
            raise AdmissibilityError("wave speed requested for inadmissible Euler state")
        return np.abs(u[..., 1 + axis] / rho) + np.sqrt(self.gamma * p / rho)

    def check_admissible(self, u: np.ndarray) -> np.ndarray:
        return (u[..., 0] > 0.0) & (self.pressure(u) > 0.0)

    def conserved(self, rho: float, v1: float, v2: float, p: float) -> np.ndarray:
        energy = p / (self.gamma - 1.0) + 0.5 * rho * (v1 * v1 + v2 * v2)
        return np.array([rho, rho * v1, rho * v2, energy])


ConservationLawModel = AdvectionModel | BurgersModel | EulerModel


def max_wave_speed(model: ConservationLawModel, u: np.ndarray, axis: int) -> np.ndarray:
    return model.max_wave_speed(np.asarray(u, dtype=float), axis)


def lax_friedrichs_flux(
    model: ConservationLawModel,
    u_left: np.ndarray,
    u_right: np.ndarray,
    axis: int,
    alpha: float,
) -> np.ndarray:
    """Global Lax-Friedrichs flux 0.5(f(uL)+f(uR)) - 0.5*alpha*(uR-uL)."""
    return 0.5 * (model.flux(u_left, axis) + model.flux(u_right, axis)) - 0.5 * alpha * (
        u_right - u_left
    )
