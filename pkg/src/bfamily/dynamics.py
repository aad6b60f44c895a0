"""Eulerian and Lagrangian solvers for the b-family.

Eulerian: method-of-lines RK4 on
    u_t = -u u_x + (1 - dx^2)^{-1} (-b u u_x + (b-3) u_x u_xx),
all quadratic products 2/3-dealiased.

Lagrangian: RK4 on the first-order geodesic system
    (phi, phi_t)' = (phi_t, Gamma_phi(phi_t, phi_t)),
where Gamma_phi is evaluated without inverting phi: the conjugated
derivatives give the bilinear term in flow coordinates, and the conjugated
Helmholtz operator A_phi g = g - (g_xx/phi_x^2 - g_x phi_xx/phi_x^3) is
solved by preconditioned fixed-point iteration with the flat Helmholtz
inverse as preconditioner, falling back to the literal
compose/invert pipeline if the iteration stalls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .diffeo import (
    Diffeomorphism,
    compose_field,
    evaluate_field,
    identity,
    invert,
)
from .errors import (
    ExpDomainError,
    GridError,
    PositivityError,
    SolverError,
)
from .spectral import Field, Grid, hs_norm

COMPLETED = "completed"
BLOWUP_NORM = "blowup_norm"
BLOWUP_PHIX = "blowup_phix"


@dataclass(frozen=True)
class BParams:
    """Family parameter b and the Sobolev index s used for diagnostics."""

    b: float
    s: float

    def __post_init__(self):
        if not self.s > 1.5:
            raise ValueError(f"Sobolev index must satisfy s > 3/2, got {self.s}")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    snapshot_stride: int = 1
    blowup_norm_cap: float = 1e6
    min_phix: float = 1e-6
    christoffel_tol: float = 1e-10
    christoffel_max_iter: int = 200

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0 and self.dt <= self.T):
            raise ValueError("need 0 < dt <= T")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.blowup_norm_cap <= 0 or self.min_phix <= 0:
            raise ValueError("blow-up guards must be positive")


@dataclass(eq=False)
class SprayState:
    """A point (phi, phi_t) on the tangent bundle of the flow group."""

    phi: Diffeomorphism
    phit: Field

    def __post_init__(self):
        if self.phi.grid != self.phit.grid:
            raise GridError("phi and phi_t live on different grids")


@dataclass(eq=False)
class Trajectory:
    params: BParams
    config: SolverConfig
    times: np.ndarray
    states: list
    termination: str

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must align")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ValueError("trajectories start at t = 0")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("snapshot times must increase strictly")

    @property
    def final_state(self):
        return self.states[-1]


def default_dt(u0: Field) -> float:
    """min(1e-3, 0.5 h / max|u0|), the advective step-size heuristic."""
    peak = float(np.max(np.abs(u0.values)))
    if peak == 0.0:
        return 1e-3
    return min(1e-3, 0.5 * u0.grid.spacing / peak)


@lru_cache(maxsize=16)
def _ops(grid: Grid):
    """Per-grid spectral symbols shared by the hot loops."""
    xi = grid.xi
    ik1 = (1j * xi).copy()
    ik1[grid.n_points // 2] = 0.0
    k = np.fft.fftfreq(grid.n_points, d=1.0 / grid.n_points)
    mask = (np.abs(k) <= grid.n_points // 3).astype(float)
    return {
        "ik1": ik1,
        "m2": -(xi**2),
        "helm_inv": 1.0 / (1.0 + xi**2),
        "mask": mask,
    }


def _d1_d2(v: np.ndarray, ops):
    spec = np.fft.fft(v)
    return (
        np.fft.ifft(ops["ik1"] * spec).real,
        np.fft.ifft(ops["m2"] * spec).real,
    )


def _mult(a: np.ndarray, b: np.ndarray, ops) -> np.ndarray:
    """Dealiased product: truncate both factors and the result at |k| <= N//3."""
    mask = ops["mask"]
    at = np.fft.ifft(mask * np.fft.fft(a)).real
    bt = np.fft.ifft(mask * np.fft.fft(b)).real
    return np.fft.ifft(mask * np.fft.fft(at * bt)).real


def _helm_inv(v: np.ndarray, ops) -> np.ndarray:
    return np.fft.ifft(ops["helm_inv"] * np.fft.fft(v)).real


def _rhs_eulerian_arr(u: np.ndarray, b: float, ops) -> np.ndarray:
    ux, uxx = _d1_d2(u, ops)
    uux = _mult(u, ux, ops)
    uxuxx = _mult(ux, uxx, ops)
    return -uux + _helm_inv(-b * uux + (b - 3.0) * uxuxx, ops)


def rhs_eulerian(u: Field, params: BParams) -> Field:
    """Right-hand side of the nonlocal velocity form."""
    return Field(u.grid, _rhs_eulerian_arr(u.values, params.b, _ops(u.grid)))


def _christoffel_id_arr(grid: Grid, b: float, v: np.ndarray, w: np.ndarray):
    ops = _ops(grid)
    vx, vxx = _d1_d2(v, ops)
    wx, wxx = _d1_d2(w, ops)
    bil = -(b / 2.0) * (_mult(v, wx, ops) + _mult(w, vx, ops)) + (
        (b - 3.0) / 2.0
    ) * (_mult(vx, wxx, ops) + _mult(wx, vxx, ops))
    return _helm_inv(bil, ops)


def christoffel_id(v: Field, w: Field, params: BParams) -> Field:
    """Symmetric Christoffel bilinear form at the identity.

    B(v, w) = -(b/2)(v w_x + w v_x) + ((b-3)/2)(v_x w_xx + w_x v_xx),
    so the diagonal reproduces -b v v_x + (b-3) v_x v_xx; the value is
    the Helmholtz inverse of B.
    """
    v._check_same_grid(w)
    return Field(v.grid, _christoffel_id_arr(v.grid, params.b, v.values, w.values))


def _christoffel_at_arr(
    grid: Grid,
    b: float,
    disp: np.ndarray,
    v: np.ndarray,
    tol: float,
    max_iter: int,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Gamma_phi(v, v) in flow coordinates, phi = id + disp."""
    ops = _ops(grid)
    fx, fxx = _d1_d2(disp, ops)
    phi_x = 1.0 + fx
    if np.min(phi_x) <= 0.0:
        raise PositivityError(
            f"flow map degenerated inside a stage (min phi_x = {np.min(phi_x):.3e})"
        )
    vx, vxx = _d1_d2(v, ops)
    d1 = vx / phi_x
    d2 = vxx / phi_x**2 - vx * fxx / phi_x**3
    bil = -b * _mult(v, d1, ops) + (b - 3.0) * _mult(d1, d2, ops)

    bnorm = float(np.linalg.norm(bil))
    if bnorm == 0.0:
        return np.zeros_like(v)

    def apply_conjugated_helmholtz(g):
        gx, gxx = _d1_d2(g, ops)
        return g - (gxx / phi_x**2 - gx * fxx / phi_x**3)

    # warm starts (the previous stage's solution) cut the iteration count
    # roughly in half inside the time loops
    g = _helm_inv(bil, ops) if initial is None else initial
    prev = np.inf
    stalls = 0
    for _ in range(max_iter):
        resid = bil - apply_conjugated_helmholtz(g)
        rnorm = float(np.linalg.norm(resid))
        if rnorm <= tol * bnorm:
            return g
        if rnorm >= 0.98 * prev:
            stalls += 1
            if stalls >= 5:
                break
        else:
            stalls = 0
        prev = rnorm
        g = g + _helm_inv(resid, ops)
    # stalled or out of iterations: literal pipeline via explicit inversion
    phi = Diffeomorphism(grid, Field(grid, disp))
    pulled = compose_field(Field(grid, v), invert(phi)).values
    gamma_flat = Field(grid, _christoffel_id_arr(grid, b, pulled, pulled))
    return compose_field(gamma_flat, phi).values


def christoffel_at(
    phi: Diffeomorphism,
    v: Field,
    params: BParams,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> Field:
    """Gamma_phi(v, v) without explicit inversion of phi.

    Convergence is declared when the relative residual of the conjugated
    Helmholtz solve drops below tol; at phi = id the first iterate is
    already exact so the result coincides with christoffel_id.
    """
    if phi.grid != v.grid:
        raise GridError("phi and v live on different grids")
    out = _christoffel_at_arr(
        phi.grid, params.b, phi.displacement.values, v.values, tol, max_iter
    )
    return Field(phi.grid, out)


def _step_times(config: SolverConfig):
    """Step sizes covering [0, T]: fixed dt plus at most one trailing partial."""
    n_full = int(math.floor(config.T / config.dt + 1e-9))
    steps = [config.dt] * n_full
    tail = config.T - n_full * config.dt
    if tail > 1e-9 * config.T:
        steps.append(tail)
    return steps


def solve_eulerian(u0: Field, params: BParams, config: SolverConfig) -> Trajectory:
    """Classical RK4 on the nonlocal velocity form with fixed dt."""
    grid = u0.grid
    ops = _ops(grid)
    b = params.b
    u = u0.values.copy()
    times = [0.0]
    states = [Field(grid, u)]
    termination = COMPLETED
    steps = _step_times(config)
    for k, dt in enumerate(steps):
        k1 = _rhs_eulerian_arr(u, b, ops)
        k2 = _rhs_eulerian_arr(u + 0.5 * dt * k1, b, ops)
        k3 = _rhs_eulerian_arr(u + 0.5 * dt * k2, b, ops)
        k4 = _rhs_eulerian_arr(u + dt * k3, b, ops)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        last = k == len(steps) - 1
        t = config.T if last else (k + 1) * config.dt
        if not np.all(np.isfinite(u)):
            raise SolverError(f"solution lost finiteness at t = {t:.6g}", time=t)
        blown = hs_norm(Field(grid, u), params.s) > config.blowup_norm_cap
        if blown or last or (k + 1) % config.snapshot_stride == 0:
            times.append(t)
            states.append(Field(grid, u))
        if blown:
            termination = BLOWUP_NORM
            break
    return Trajectory(params, config, np.array(times), states, termination)


def solve_geodesic(u0: Field, params: BParams, config: SolverConfig) -> Trajectory:
    """RK4 on the geodesic system; terminates when phi_x drops below the guard."""
    grid = u0.grid
    b = params.b
    disp = np.zeros(grid.n_points)
    phit = u0.values.copy()
    times = [0.0]
    states = [SprayState(identity(grid), Field(grid, phit))]
    termination = COMPLETED

    warm = None

    def gamma(d, v, guess):
        return _christoffel_at_arr(
            grid,
            b,
            d,
            v,
            config.christoffel_tol,
            config.christoffel_max_iter,
            initial=guess,
        )

    steps = _step_times(config)
    for k, dt in enumerate(steps):
        last = k == len(steps) - 1
        t = config.T if last else (k + 1) * config.dt
        try:
            a1 = gamma(disp, phit, warm)
            a2 = gamma(disp + 0.5 * dt * phit, phit + 0.5 * dt * a1, a1)
            a3 = gamma(
                disp + 0.5 * dt * (phit + 0.5 * dt * a1), phit + 0.5 * dt * a2, a2
            )
            a4 = gamma(disp + dt * (phit + 0.5 * dt * a2), phit + dt * a3, a3)
            warm = a4
        except PositivityError:
            termination = BLOWUP_PHIX
            break
        v1 = phit
        v2 = phit + 0.5 * dt * a1
        v3 = phit + 0.5 * dt * a2
        v4 = phit + dt * a3
        disp = disp + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        phit = phit + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not (np.all(np.isfinite(disp)) and np.all(np.isfinite(phit))):
            raise SolverError(f"flow lost finiteness at t = {t:.6g}", time=t)
        try:
            phi = Diffeomorphism(grid, Field(grid, disp))
        except PositivityError:
            termination = BLOWUP_PHIX
            break
        blown = float(np.min(phi.phi_x)) < config.min_phix
        if blown or last or (k + 1) % config.snapshot_stride == 0:
            times.append(t)
            states.append(SprayState(phi, Field(grid, phit)))
        if blown:
            termination = BLOWUP_PHIX
            break
    return Trajectory(params, config, np.array(times), states, termination)


def exp_map(v: Field, params: BParams, config: SolverConfig) -> Diffeomorphism:
    """Time-one point of the geodesic with initial velocity v at the identity."""
    traj = solve_geodesic(v, params, replace(config, T=1.0))
    if traj.termination != COMPLETED:
        raise ExpDomainError(
            f"initial velocity outside the exp domain ({traj.termination} "
            f"at t = {traj.times[-1]:.6g})"
        )
    return traj.final_state.phi


def dexp(
    u0: Field, v: Field, params: BParams, eps: float, config: SolverConfig
) -> Field:
    """Central-difference differential of exp at u0 in direction v."""
    u0._check_same_grid(v)
    plus = exp_map(u0 + eps * v, params, config)
    minus = exp_map(u0 + (-eps) * v, params, config)
    return Field(
        u0.grid,
        (plus.displacement.values - minus.displacement.values) / (2.0 * eps),
    )


def flow_from_velocity(traj: Trajectory) -> Trajectory:
    """Integrate phi_t = u(t) o phi along a stored Eulerian trajectory.

    One RK4 step per snapshot interval with u interpolated linearly in time,
    so the trajectory must be stored with stride 1.
    """
    if traj.config.snapshot_stride != 1:
        raise ValueError("flow reconstruction needs snapshot_stride = 1")
    if not traj.states or not isinstance(traj.states[0], Field):
        raise TypeError("flow reconstruction expects an Eulerian trajectory")
    grid = traj.states[0].grid
    disp = np.zeros(grid.n_points)
    out_states = [SprayState(identity(grid), traj.states[0])]
    for k in range(len(traj.times) - 1):
        dt = float(traj.times[k + 1] - traj.times[k])
        u_a = traj.states[k]
        u_b = traj.states[k + 1]
        u_mid = Field(grid, 0.5 * (u_a.values + u_b.values))
        x = grid.x
        k1 = evaluate_field(u_a, x + disp)
        k2 = evaluate_field(u_mid, x + disp + 0.5 * dt * k1)
        k3 = evaluate_field(u_mid, x + disp + 0.5 * dt * k2)
        k4 = evaluate_field(u_b, x + disp + dt * k3)
        disp = disp + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        phi = Diffeomorphism(grid, Field(grid, disp))  # raises on phi_x <= 0
        out_states.append(
            SprayState(phi, Field(grid, evaluate_field(u_b, x + disp)))
        )
    return Trajectory(
        traj.params, traj.config, traj.times.copy(), out_states, traj.termination
    )


def eulerian_from_lagrangian(state: SprayState) -> Field:
    """Recover the velocity field u = phi_t o phi^{-1}."""
    return compose_field(state.phit, invert(state.phi))
