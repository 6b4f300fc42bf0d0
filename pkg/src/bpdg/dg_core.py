"""Modal DG discretization on a uniform 2D Cartesian mesh.

The basis is orthonormal under the cell-mean inner product, so the mode-0
coefficient of every cell *is* its cell average and the mode-0 row of the
semi-discrete residual coincides (to round-off) with the flux-difference
evolution equation of the cell averages.  That identity is what lets the
convex-decomposition CFL analysis apply to this solver verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np

from .decomposition import (
    SpeedRatios,
    bp_max_dt,
    jiang_liu_2d,
    linear_stability_dt,
    optimal_2d,
    zhang_shu_2d,
)
from .physics import AdmissibilityError, ConservationLawModel, lax_friedrichs_flux
from .quadrature import gauss_rule

PERIODIC = "periodic"
OUTFLOW = "outflow"


@dataclass(frozen=True)
class InflowSegment:
    """Prescribed state on part of a boundary side; outflow elsewhere on it."""

    state: np.ndarray  # conserved components (m,)
    lo: float
    hi: float


BoundaryCondition = str | InflowSegment


@dataclass(frozen=True)
class Mesh2D:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    bc_left: BoundaryCondition = PERIODIC
    bc_right: BoundaryCondition = PERIODIC
    bc_bottom: BoundaryCondition = PERIODIC
    bc_top: BoundaryCondition = PERIODIC

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.x_hi <= self.x_lo or self.y_hi <= self.y_lo:
            raise ValueError("degenerate mesh")
        for a, b in ((self.bc_left, self.bc_right), (self.bc_bottom, self.bc_top)):
            if (a == PERIODIC) != (b == PERIODIC):
                raise ValueError("periodic boundaries must be paired")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_lo + (np.arange(self.ny) + 0.5) * self.dy


def _legendre_table(k: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_n and P_n' for n=0..k at t in [-1,1]; shapes (k+1, len(t))."""
    t = np.asarray(t, dtype=float)
    vals = np.empty((k + 1,) + t.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    if k >= 1:
        vals[1] = t
        ders[1] = 1.0
    for n in range(2, k + 1):
        vals[n] = ((2 * n - 1) * t * vals[n - 1] - (n - 1) * vals[n - 2]) / n
        ders[n] = ders[n - 2] + (2 * n - 1) * vals[n - 1]
    return vals, ders


class Basis2D:
    """Orthonormal total-degree-k modal basis on [-1/2, 1/2]^2 (mean measure).

    Modes are products of scaled Legendre polynomials; mode 0 is the constant 1
    and the remaining modes average to zero over the cell.
    """

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("polynomial degree must be >= 0")
        self.k = k
        self.mode_exps = [
            (d - b, b) for d in range(k + 1) for b in range(d + 1)
        ]
        self.n_modes = len(self.mode_exps)  # (k+1)(k+2)/2
        self.face_rule = gauss_rule(k + 1)
        # volume quadrature: (k+1)^2 tensor Gauss
        g = self.face_rule
        xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        self.vol_offsets = np.column_stack([xi.ravel(), eta.ravel()])
        self.vol_weights = np.outer(g.weights, g.weights).ravel()
        self.phi_vol, self.dphi_dxi_vol, self.dphi_deta_vol = self.eval_with_grads(self.vol_offsets)
        q = len(g)
        self.phi_xm = self.eval_modes(np.column_stack([np.full(q, -0.5), g.nodes]))
        self.phi_xp = self.eval_modes(np.column_stack([np.full(q, 0.5), g.nodes]))
        self.phi_ym = self.eval_modes(np.column_stack([g.nodes, np.full(q, -0.5)]))
        self.phi_yp = self.eval_modes(np.column_stack([g.nodes, np.full(q, 0.5)]))

    def _phi1d(self, offsets_1d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals, ders = _legendre_table(self.k, 2.0 * np.asarray(offsets_1d))
        scale = np.sqrt(2.0 * np.arange(self.k + 1) + 1.0)[:, None]
        return scale * vals, 2.0 * scale * ders

    def eval_modes(self, offsets: np.ndarray) -> np.ndarray:
        """Basis values at reference offsets (P, 2) -> (n_modes, P)."""
        offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        px, _ = self._phi1d(offsets[:, 0])
        py, _ = self._phi1d(offsets[:, 1])
        return np.stack([px[a] * py[b] for a, b in self.mode_exps])

    def eval_with_grads(self, offsets: np.ndarray):
        offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        px, dpx = self._phi1d(offsets[:, 0])
        py, dpy = self._phi1d(offsets[:, 1])
        phi = np.stack([px[a] * py[b] for a, b in self.mode_exps])
        dxi = np.stack([dpx[a] * py[b] for a, b in self.mode_exps])
        deta = np.stack([px[a] * dpy[b] for a, b in self.mode_exps])
        return phi, dxi, deta


@dataclass
class DGField:
    """Per-cell modal coefficients, shape (nx, ny, n_modes, m)."""

    coeffs: np.ndarray
    basis: Basis2D
    mesh: Mesh2D
    model: ConservationLawModel

    @property
    def cell_averages(self) -> np.ndarray:
        return self.coeffs[:, :, 0, :]

    def copy(self) -> "DGField":
        return DGField(self.coeffs.copy(), self.basis, self.mesh, self.model)

    def like(self, coeffs: np.ndarray) -> "DGField":
        return DGField(coeffs, self.basis, self.mesh, self.model)


def project(
    u0: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mesh: Mesh2D,
    basis: Basis2D,
    model: ConservationLawModel,
) -> DGField:
    """L2 projection of u0(x, y) -> (..., m) using a (k+2)^2 tensor Gauss rule."""
    g = gauss_rule(basis.k + 2)
    xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    offsets = np.column_stack([xi.ravel(), eta.ravel()])
    weights = np.outer(g.weights, g.weights).ravel()
    phi = basis.eval_modes(offsets)  # (n, G)
    x = mesh.x_centers[:, None, None] + offsets[None, None, :, 0] * mesh.dx
    y = mesh.y_centers[None, :, None] + offsets[None, None, :, 1] * mesh.dy
    vals = np.asarray(u0(x, y), dtype=float)
    if vals.shape != (mesh.nx, mesh.ny, len(weights), model.m):
        raise ValueError("initial-data callable returned the wrong shape")
    coeffs = np.einsum("ijgc,ng,g->ijnc", vals, phi, weights, optimize=True)
    return DGField(coeffs, basis, mesh, model)


def evaluate(field: DGField, i: int, j: int, offset: tuple[float, float]) -> np.ndarray:
    if not (0 <= i < field.mesh.nx and 0 <= j < field.mesh.ny):
        raise IndexError(f"cell index ({i}, {j}) out of range")
    phi = field.basis.eval_modes(np.array([offset]))[:, 0]
    return field.coeffs[i, j] .T @ phi


def evaluate_at_offsets(field: DGField, offsets: np.ndarray) -> np.ndarray:
    """Field values at the same reference offsets in every cell: (nx, ny, P, m)."""
    phi = field.basis.eval_modes(offsets)
    return np.einsum("ijnc,np->ijpc", field.coeffs, phi, optimize=True)


def _traces(field: DGField):
    c = field.coeffs
    b = field.basis
    uxm = np.einsum("ijnc,nq->ijqc", c, b.phi_xm, optimize=True)
    uxp = np.einsum("ijnc,nq->ijqc", c, b.phi_xp, optimize=True)
    uym = np.einsum("ijnc,nq->ijqc", c, b.phi_ym, optimize=True)
    uyp = np.einsum("ijnc,nq->ijqc", c, b.phi_yp, optimize=True)
    return uxm, uxp, uym, uyp


def _ghost_trace(bc: BoundaryCondition, interior: np.ndarray, wrap: np.ndarray,
                 coords: np.ndarray) -> np.ndarray:
    """Exterior trace along one boundary; `coords` are face-point positions
    along the boundary, shape matching interior[..., 0]."""
    if bc == PERIODIC:
        return wrap
    ghost = interior.copy()
    if isinstance(bc, InflowSegment):
        inside = (coords >= bc.lo - 1e-12) & (coords <= bc.hi + 1e-12)
        ghost[inside] = bc.state
    elif bc != OUTFLOW:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return ghost


def _face_coords(mesh: Mesh2D, along_y: bool, q_nodes: np.ndarray) -> np.ndarray:
    if along_y:
        return (mesh.y_centers[:, None] + q_nodes[None, :] * mesh.dy)
    return (mesh.x_centers[:, None] + q_nodes[None, :] * mesh.dx)


def _check_admissible(field: DGField, *point_sets: np.ndarray) -> None:
    model = field.model
    for pts in point_sets:
        ok = model.check_admissible(pts)
        if not np.all(ok):
            bad = np.argwhere(~ok)[0]
            cell = (int(bad[0]), int(bad[1])) if len(bad) >= 2 else None
            raise AdmissibilityError(
                f"inadmissible state at quadrature/trace point in cell {cell}", cell=cell
            )


def global_max_speeds(field: DGField) -> tuple[float, float]:
    """Global per-axis max wave speed over volume and face quadrature points,
    including the exterior boundary trace states (e.g. inflow data)."""
    mesh = field.mesh
    uxm, uxp, uym, uyp = _traces(field)
    uvol = np.einsum("ijnc,ng->ijgc", field.coeffs, field.basis.phi_vol, optimize=True)
    q_nodes = field.basis.face_rule.nodes
    y_face = _face_coords(mesh, True, q_nodes)
    x_face = _face_coords(mesh, False, q_nodes)
    ghosts = (
        _ghost_trace(mesh.bc_left, uxm[0], uxp[-1], y_face),
        _ghost_trace(mesh.bc_right, uxp[-1], uxm[0], y_face),
        _ghost_trace(mesh.bc_bottom, uym[:, 0], uyp[:, -1], x_face),
        _ghost_trace(mesh.bc_top, uyp[:, -1], uym[:, 0], x_face),
    )
    a = [0.0, 0.0]
    for pts in (uvol, uxm, uxp, uym, uyp) + ghosts:
        for axis in (0, 1):
            a[axis] = max(a[axis], float(np.max(field.model.max_wave_speed(pts, axis))))
    return a[0], a[1]


def semidiscrete_residual(
    field: DGField,
    alphas: tuple[float, float] | float,
) -> np.ndarray:
    """Weak-form DG rate of change of the modal coefficients.

    `alphas` are the global Lax-Friedrichs viscosities per axis (a scalar is
    used for both).  Raises AdmissibilityError if any quadrature or trace
    state is inadmissible, which signals a missing or failed limiter.
    """
    if np.isscalar(alphas):
        alphas = (float(alphas), float(alphas))
    mesh, basis, model = field.mesh, field.basis, field.model
    uxm, uxp, uym, uyp = _traces(field)
    uvol = np.einsum("ijnc,ng->ijgc", field.coeffs, basis.phi_vol, optimize=True)
    _check_admissible(field, uvol, uxm, uxp, uym, uyp)

    wv = basis.vol_weights
    f1 = model.flux(uvol, 0)
    f2 = model.flux(uvol, 1)
    rate = (
        np.einsum("ijgc,ng,g->ijnc", f1, basis.dphi_dxi_vol, wv, optimize=True) / mesh.dx
        + np.einsum("ijgc,ng,g->ijnc", f2, basis.dphi_deta_vol, wv, optimize=True) / mesh.dy
    )

    q_nodes = basis.face_rule.nodes
    wq = basis.face_rule.weights

    # x-direction interface fluxes, shape (nx+1, ny, Q, m)
    y_face = _face_coords(mesh, True, q_nodes)
    left_ghost = _ghost_trace(mesh.bc_left, uxm[0], uxp[-1], y_face)
    right_ghost = _ghost_trace(mesh.bc_right, uxp[-1], uxm[0], y_face)
    u_minus = np.concatenate([left_ghost[None], uxp], axis=0)
    u_plus = np.concatenate([uxm, right_ghost[None]], axis=0)
    fx = lax_friedrichs_flux(model, u_minus, u_plus, 0, alphas[0])
    rate -= (
        np.einsum("ijqc,nq,q->ijnc", fx[1:], basis.phi_xp, wq, optimize=True)
        - np.einsum("ijqc,nq,q->ijnc", fx[:-1], basis.phi_xm, wq, optimize=True)
    ) / mesh.dx

    # y-direction interface fluxes, shape (nx, ny+1, Q, m)
    x_face = _face_coords(mesh, False, q_nodes)
    bottom_ghost = _ghost_trace(mesh.bc_bottom, uym[:, 0], uyp[:, -1], x_face)
    top_ghost = _ghost_trace(mesh.bc_top, uyp[:, -1], uym[:, 0], x_face)
    u_minus = np.concatenate([bottom_ghost[:, None], uyp], axis=1)
    u_plus = np.concatenate([uym, top_ghost[:, None]], axis=1)
    fy = lax_friedrichs_flux(model, u_minus, u_plus, 1, alphas[1])
    rate -= (
        np.einsum("ijqc,nq,q->ijnc", fy[:, 1:], basis.phi_yp, wq, optimize=True)
        - np.einsum("ijqc,nq,q->ijnc", fy[:, :-1], basis.phi_ym, wq, optimize=True)
    ) / mesh.dy
    return rate


@dataclass(frozen=True)
class SspScheme:
    """Shu-Osher form: each stage is sum of alpha*u_m + dt*beta*F(u_m) terms."""

    name: str
    stages: tuple[tuple[tuple[float, float, int], ...], ...]

    @property
    def ssp_coefficient(self) -> float:
        return min(
            alpha / beta for stage in self.stages for alpha, beta, _ in stage if beta > 0
        )


SSPRK3 = SspScheme(
    "SSPRK3",
    (
        ((1.0, 1.0, 0),),
        ((0.75, 0.0, 0), (0.25, 0.25, 1)),
        ((1.0 / 3.0, 0.0, 0), (2.0 / 3.0, 2.0 / 3.0, 2)),
    ),
)

# five-stage fourth-order SSP scheme; effective SSP coefficient ~1.508
SSPRK4 = SspScheme(
    "SSPRK4",
    (
        ((1.0, 0.391752226571890, 0),),
        ((0.444370493651235, 0.0, 0), (0.555629506348765, 0.368410593050371, 1)),
        ((0.620101851488403, 0.0, 0), (0.379898148511597, 0.251891774271694, 2)),
        ((0.178079954393132, 0.0, 0), (0.821920045606868, 0.544974750228521, 3)),
        (
            (0.517231671970585, 0.0, 2),
            (0.096059710526147, 0.063692468666290, 3),
            (0.386708617503269, 0.226007483236906, 4),
        ),
    ),
)

SCHEMES = {"ssprk3": SSPRK3, "ssprk4": SSPRK4}


def ssp_step(
    field: DGField,
    scheme: SspScheme,
    dt: float,
    limiter_chain: Optional[Callable[[DGField], DGField]] = None,
) -> DGField:
    """One SSP-RK step with the limiter chain applied after every stage."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    states = [field]
    rates: dict[int, np.ndarray] = {}
    for stage in scheme.stages:
        new = np.zeros_like(field.coeffs)
        for alpha, beta, idx in stage:
            new += alpha * states[idx].coeffs
            if beta != 0.0:
                if idx not in rates:
                    rates[idx] = semidiscrete_residual(
                        states[idx], global_max_speeds(states[idx])
                    )
                new += dt * beta * rates[idx]
        stage_field = field.like(new)
        if limiter_chain is not None:
            stage_field = limiter_chain(stage_field)
        states.append(stage_field)
    return states[-1]


OPTIMAL_BP = "optimal"
CLASSIC_BP = "classic"
JIANG_LIU_BP = "jiangliu"
LINEAR_STABILITY = "linear"


def step_controller(
    policy: str,
    field: DGField,
    scheme: SspScheme,
    c0: float = 1.0,
    safety: float = 1.0,
    fallback_dt: Optional[float] = None,
) -> float:
    """Time step C_SSP * (policy's CFL bound) * safety from the current field."""
    a1, a2 = global_max_speeds(field)
    mesh = field.mesh
    k = field.basis.k
    if a1 == 0.0 and a2 == 0.0:
        if fallback_dt is None:
            raise ValueError("zero wave speeds and no fallback dt configured")
        return fallback_dt
    # a degenerate axis imposes no constraint; keep ratios positive for the
    # decomposition constructors
    floor = 1e-12 * max(a1 / mesh.dx, a2 / mesh.dy)
    ratios = SpeedRatios((max(a1 / mesh.dx, floor), max(a2 / mesh.dy, floor)))
    if policy == LINEAR_STABILITY:
        base = linear_stability_dt(k, (a1, a2), (mesh.dx, mesh.dy))
    else:
        if policy == OPTIMAL_BP:
            decomp = optimal_2d(k, ratios)
        elif policy == CLASSIC_BP:
            decomp = zhang_shu_2d(k, ratios)
        elif policy == JIANG_LIU_BP:
            decomp = jiang_liu_2d(k)
        else:
            raise ValueError(f"unknown dt policy {policy!r}")
        base = bp_max_dt(decomp, (a1, a2), (mesh.dx, mesh.dy), c0).max_dt
    return scheme.ssp_coefficient * base * safety


def error_norms(
    field: DGField,
    exact: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    t: float,
) -> tuple[float, float, float]:
    """Domain-averaged L1/L2 and pointwise Linf error vs exact(x, y, t),
    measured with a (k+3)^2 tensor Gauss rule per cell."""
    if exact is None:
        raise ValueError("model has no exact solution")
    mesh, basis = field.mesh, field.basis
    g = gauss_rule(basis.k + 3)
    xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    offsets = np.column_stack([xi.ravel(), eta.ravel()])
    weights = np.outer(g.weights, g.weights).ravel()
    vals = evaluate_at_offsets(field, offsets)
    x = mesh.x_centers[:, None, None] + offsets[None, None, :, 0] * mesh.dx
    y = mesh.y_centers[None, :, None] + offsets[None, None, :, 1] * mesh.dy
    err = vals - np.asarray(exact(x, y, t), dtype=float)
    abs_err = np.abs(err).sum(axis=-1)
    n_cells = mesh.nx * mesh.ny
    l1 = float(np.einsum("ijg,g->", abs_err, weights) / n_cells)
    l2 = float(math.sqrt(np.einsum("ijg,g->", (err**2).sum(axis=-1), weights) / n_cells))
    linf = float(np.max(abs_err))
    return l1, l2, linf
