"""Time-incremental solver for Burgers' equation plus its exact oracle.

``step_incremental`` advances ``u_t + u u_x = nu u_xx`` by convolving the
current field against a Gaussian kernel whose mean is shifted by the
drift frozen at the output point (``x - u(x) dt``) and whose variance is
``2 nu dt``. The admissible step size comes from two scale conditions on
the drift field: ``sqrt(nu dt) << x_s`` and ``dt << t_s``.

``cole_hopf_exact`` evaluates the closed-form solution

    v(x,t) = [int (x-x')/t exp(-H/(2 nu)) dx'] / [int exp(-H/(2 nu)) dx']

with ``H = int_0^{x'} v(y,0) dy + (x-x')^2/(2t)``, in log space so small
nu does not underflow. The slope/interface transform pair
(``phi = exp(-h/(2 nu))``, ``h = -2 nu log phi``) and the velocity
variant through the potential are in ``kpz_transform``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .grid import Field, Grid1D

__all__ = [
    "BurgersState",
    "StepBounds",
    "StepSizeWarning",
    "estimate_scales",
    "admissible_dt",
    "step_incremental",
    "evolve",
    "cole_hopf_exact",
    "kpz_transform",
    "kpz_residual",
]

DEFAULT_EPSILON = 0.05


class StepSizeWarning(UserWarning):
    """Requested step exceeds the admissible bound for the drift scales."""


@dataclass
class BurgersState:
    """Velocity samples on a grid at time t with diffusivity nu."""

    grid: Grid1D
    u: np.ndarray
    t: float
    nu: float

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.grid.n_points,):
            raise ValueError("u shape does not match grid")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("u must be finite everywhere")
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")


@dataclass(frozen=True)
class StepBounds:
    """Drift-field length and time scales with the smallness tolerance."""

    x_s: float
    t_s: float
    epsilon_max: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not (0 < self.epsilon_max < 1):
            raise ValueError(f"epsilon_max must lie in (0,1), got {self.epsilon_max}")
        if self.x_s <= 0 or self.t_s <= 0:
            raise ValueError("scales must be positive (may be inf)")


def estimate_scales(state: BurgersState, epsilon_max: float = DEFAULT_EPSILON) -> StepBounds:
    """Drift scales x_s = max|u|/max|u_x| and t_s = x_s/max|u|.

    A constant (or zero) field has no gradient scale; both bounds are then
    infinite and any step size is admissible.
    """
    umax = float(np.max(np.abs(state.u)))
    gmax = float(np.max(np.abs(np.gradient(state.u, state.grid.dx))))
    if gmax == 0.0 or umax == 0.0:
        return StepBounds(np.inf, np.inf, epsilon_max)
    return StepBounds(umax / gmax, 1.0 / gmax, epsilon_max)


def admissible_dt(bounds: StepBounds, nu: float) -> float:
    """Largest step honoring both smallness conditions at epsilon_max."""
    eps = bounds.epsilon_max
    diffusive = eps * eps * bounds.x_s * bounds.x_s / nu if nu > 0 else np.inf
    return min(diffusive, eps * bounds.t_s)


def _window_halfwidth(sigma: float, shift_max: float, dx: float, n: int) -> int:
    cells = int(np.ceil((9.0 * sigma + shift_max) / dx)) + 1
    return min(cells, n // 2 if n > 3 else n)


def step_incremental(
    state: BurgersState,
    dt: float,
    boundary: str = "zero_pad",
    drift: np.ndarray | None = None,
) -> BurgersState:
    """One incremental update of the velocity field over dt.

    For each output point x the update is the quadrature
    ``sum_j u(x'_j) N(x'_j; x - u(x) dt, 2 nu dt) dx`` with the Gaussian
    truncated beyond nine standard deviations. ``boundary`` selects the
    field extension: "zero_pad" (compact data) or "periodic". ``drift``
    overrides the advecting field frozen into the kernel (defaults to the
    state's own u; zeros give the pure-diffusion step).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if np.isnan(state.u).any():
        raise ValueError("u contains NaN")
    if boundary not in ("zero_pad", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")

    grid, u = state.grid, state.u
    adv = u if drift is None else np.asarray(drift, dtype=float)
    if adv.shape != u.shape:
        raise ValueError("drift override shape does not match grid")

    dt_ok = admissible_dt(estimate_scales(replace(state, u=adv)), state.nu)
    if dt > dt_ok * (1 + 1e-9):
        warnings.warn(
            f"dt={dt:g} exceeds admissible step {dt_ok:g} for the current "
            "drift scales",
            StepSizeWarning,
            stacklevel=2,
        )
    dx = grid.dx
    variance = 2.0 * state.nu * dt
    if state.nu * dt < 1e-14 * dx * dx:
        # delta-kernel limit: pure shift by the local drift
        xq = grid.x - adv * dt
        if boundary == "periodic":
            per = grid.period
            xq = grid.x_min + np.mod(xq - grid.x_min, per)
            u_new = CubicSpline(grid.x, u, bc_type="periodic")(xq)
        else:
            u_new = np.interp(xq, grid.x, u, left=0.0, right=0.0)
        return replace(state, u=np.asarray(u_new), t=state.t + dt)

    sigma = np.sqrt(variance)
    shift = adv * dt

    if boundary == "periodic":
        n = grid.n_points - 1  # last sample duplicates the first
        ui = u[:n]
        w = _window_halfwidth(sigma, np.max(np.abs(shift)), dx, n)
        offsets = np.arange(-w, w + 1)
        dist = offsets[None, :] * dx + shift[:n, None]
        kern = np.exp(-dist * dist / (2.0 * variance)) * (dx / np.sqrt(2.0 * np.pi * variance))
        idx = (np.arange(n)[:, None] + offsets[None, :]) % n
        u_new = np.einsum("ij,ij->i", kern, ui[idx])
        u_new = np.append(u_new, u_new[0])
    else:
        n = grid.n_points
        w = _window_halfwidth(sigma, np.max(np.abs(shift)), dx, n)
        offsets = np.arange(-w, w + 1)
        dist = offsets[None, :] * dx + shift[:, None]
        kern = np.exp(-dist * dist / (2.0 * variance)) * (dx / np.sqrt(2.0 * np.pi * variance))
        idx = np.arange(n)[:, None] + offsets[None, :]
        valid = (idx >= 0) & (idx < n)
        src = np.where(valid, u[np.clip(idx, 0, n - 1)], 0.0)
        quad_w = np.where(valid & ((idx == 0) | (idx == n - 1)), 0.5, 1.0)
        u_new = np.einsum("ij,ij->i", kern * quad_w, src)

    return replace(state, u=u_new, t=state.t + dt)


def evolve(
    state: BurgersState,
    t_final: float,
    epsilon_max: float = DEFAULT_EPSILON,
    dt_scale: float = 1.0,
    boundary: str = "zero_pad",
) -> BurgersState:
    """Advance to t_final with the step size re-estimated every iteration.

    The admissible step shrinks as gradients steepen, so a fixed step
    chosen from the initial profile would eventually violate the scale
    conditions. ``dt_scale`` < 1 tightens every step by that factor
    (useful for convergence studies).
    """
    if t_final < state.t:
        raise ValueError("t_final must be >= current time")
    if not (0 < dt_scale <= 1):
        raise ValueError("dt_scale must lie in (0, 1]")
    while state.t < t_final - 1e-15 * max(1.0, t_final):
        dt = dt_scale * admissible_dt(estimate_scales(state, epsilon_max), state.nu)
        if not np.isfinite(dt):
            dt = t_final - state.t
        dt = min(dt, t_final - state.t)
        state = step_incremental(state, dt, boundary=boundary)
    return state


def _potential_origin(grid: Grid1D) -> float:
    return 0.0 if grid.contains(0.0) else grid.x_min


def _cumulative_potential(u0: Field) -> tuple[CubicSpline, float, float]:
    """Cumulative integral of the initial velocity from the grid origin,
    as a spline, plus its per-period increment and the origin used."""
    grid = u0.grid
    v = np.concatenate(([0.0], cumulative_simpson(u0.values, x=grid.x)))
    spline = CubicSpline(grid.x, v)
    origin = _potential_origin(grid)
    v0 = float(spline(origin))
    period_gain = float(v[-1])
    return spline, v0, period_gain


def _eval_potential(
    xq: np.ndarray,
    spline: CubicSpline,
    v0: float,
    grid: Grid1D,
    extension: str,
    period_gain: float,
) -> np.ndarray:
    if extension == "periodic":
        per = grid.period
        wraps = np.floor((xq - grid.x_min) / per)
        base = xq - wraps * per
        return spline(base) + wraps * period_gain - v0
    clamped = np.clip(xq, grid.x_min, grid.x_max)
    return spline(clamped) - v0


def cole_hopf_exact(
    u0: Field,
    nu: float,
    x,
    t: float,
    extension: str = "compact",
    rtol: float = 1e-11,
) -> float | np.ndarray:
    """Exact solution of Burgers' equation by direct quadrature.

    ``extension`` states how the initial data continues beyond its grid:
    "compact" (zero outside, potential goes flat) or "periodic". Both
    integrals are evaluated with the minimum of H subtracted, so the
    ratio survives arbitrarily small nu.
    """
    if nu <= 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if extension not in ("compact", "periodic"):
        raise ValueError(f"unknown extension {extension!r}")

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    grid = u0.grid
    if t == 0.0:
        vals = np.interp(xs, grid.x, u0.values, left=0.0, right=0.0)
        return float(vals[0]) if np.ndim(x) == 0 else vals

    spline, v0, period_gain = _cumulative_potential(u0)
    umax = float(np.max(np.abs(u0.values)))
    half = umax * t + 12.0 * np.sqrt(2.0 * nu * t) + 2.0 * grid.dx

    out = np.empty(xs.shape)
    for i, xi in enumerate(xs):
        prev = None
        m = 4097
        while True:
            xq = np.linspace(xi - half, xi + half, m)
            pot = _eval_potential(xq, spline, v0, grid, extension, period_gain)
            h_val = pot + (xi - xq) ** 2 / (2.0 * t)
            logw = -(h_val - h_val.min()) / (2.0 * nu)
            wgt = np.exp(logw)
            dxq = xq[1] - xq[0]
            denom = _simpson(wgt, dxq)
            numer = _simpson(wgt * (xi - xq) / t, dxq)
            val = numer / denom
            if prev is not None and abs(val - prev) <= rtol * max(1.0, abs(val)):
                break
            if m >= 2**17 + 1:
                break
            prev = val
            m = 2 * (m - 1) + 1
        out[i] = val
    return float(out[0]) if np.ndim(x) == 0 else out


def _simpson(y: np.ndarray, dx: float) -> float:
    n = y.size
    if n % 2 == 0:
        raise ValueError("need an odd number of samples")
    return dx / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())


def kpz_transform(field: Field, nu: float, direction: str) -> Field:
    """Transform between interface height h, its diffusive surrogate phi,
    and the velocity through the potential.

    direction: "h_to_phi" (phi = exp(-h/(2 nu))), "phi_to_h"
    (h = -2 nu log phi, requiring phi > 0), or "velocity_to_phi"
    (phi = exp(-int_0^x u / (2 nu)), integrating from the grid origin).
    """
    if nu <= 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    v = field.values
    if direction == "h_to_phi":
        return Field(field.grid, np.exp(-v / (2.0 * nu)))
    if direction == "phi_to_h":
        if np.any(v <= 0):
            raise ValueError("phi must be positive everywhere to invert")
        return Field(field.grid, -2.0 * nu * np.log(v))
    if direction == "velocity_to_phi":
        spline, v0, _ = _cumulative_potential(field)
        pot = spline(field.grid.x) - v0
        return Field(field.grid, np.exp(-pot / (2.0 * nu)))
    raise ValueError(f"unknown direction {direction!r}")


def kpz_residual(h_first: Field, h_second: Field, dt: float, nu: float) -> float:
    """Max-abs finite-difference residual of h_t + h_x^2/2 - nu h_xx = 0.

    Forward difference in time between the two slices; centered spatial
    differences on the first slice. O(dx^2 + dt) for smooth interfaces.
    """
    if h_first.grid != h_second.grid:
        raise ValueError("time slices must share one grid")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    dx = h_first.grid.dx
    h = h_first.values
    h_t = (h_second.values - h) / dt
    h_x = np.gradient(h, dx)
    h_xx = np.empty_like(h)
    h_xx[1:-1] = (h[2:] - 2 * h[1:-1] + h[:-2]) / (dx * dx)
    h_xx[0] = h_xx[1]
    h_xx[-1] = h_xx[-2]
    res = h_t + 0.5 * h_x * h_x - nu * h_xx
    return float(np.max(np.abs(res[1:-1])))
