"""Analytic short-horizon transition kernels and their self-consistency checks.

Three Gaussian kernels cover the toolkit's needs:

* ``heat_kernel`` -- pure diffusion, variance ``2 nu dt``;
* ``drift_kernel`` -- diffusion with the drift frozen at the solution
  point, shifting the mean to ``x - drift * dt``;
* ``ou_kernel`` -- the linear-drift (strained) kernel with mean
  ``x0 * exp(-h(t))`` and variance ``2 nu p(t)``, valid for any strain
  realization through its h and p functionals.

``check_consistency`` recovers the local drift and diffusion rates from
short-horizon displacement moments (the two conditions any transition
density must satisfy), and ``chapman_kolmogorov_check`` verifies the
semigroup composition property by direct quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid1D
from .strain import StrainRealization

__all__ = [
    "DegenerateKernelError",
    "KernelSpec",
    "heat_kernel",
    "drift_kernel",
    "ou_kernel",
    "gaussian_family",
    "ou_family",
    "ConsistencyResult",
    "check_consistency",
    "ChapmanKolmogorovResult",
    "chapman_kolmogorov_check",
]

# Two-time transition family: family(x_to, x_from, t_from, t_to) -> density
# in x_to, broadcasting over array arguments.
TransitionFamily = Callable[..., np.ndarray]


class DegenerateKernelError(ValueError):
    """Raised when nu*dt vanishes and the kernel collapses to a delta."""


def _gaussian(x, mean, variance):
    return np.exp(-((x - mean) ** 2) / (2.0 * variance)) / np.sqrt(2.0 * np.pi * variance)


@dataclass(frozen=True)
class KernelSpec:
    """Diffusivity, frozen drift at the solution point, and the step size."""

    nu: float
    drift: float
    dt: float

    def __post_init__(self) -> None:
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    @property
    def variance(self) -> float:
        return 2.0 * self.nu * self.dt

    def is_degenerate(self, dx: float) -> bool:
        """True when the kernel width is negligible on a grid of spacing dx
        and callers should substitute the identity (delta limit)."""
        return self.nu * self.dt < 1e-14 * dx * dx


def heat_kernel(spec: KernelSpec, x, xp):
    """Zero-drift transition density in ``xp``: mean x, variance 2*nu*dt."""
    if spec.nu * spec.dt == 0.0:
        raise DegenerateKernelError(
            "nu*dt = 0: kernel is a delta; use the identity (no-op) path"
        )
    return _gaussian(np.asarray(xp, dtype=float), x, spec.variance)


def drift_kernel(spec: KernelSpec, x, xp):
    """Transition density in ``xp`` with mean shifted to x - drift*dt."""
    if spec.nu * spec.dt == 0.0:
        raise DegenerateKernelError(
            "nu*dt = 0: kernel is a delta; use the identity (no-op) path"
        )
    return _gaussian(np.asarray(xp, dtype=float), x - spec.drift * spec.dt, spec.variance)


def ou_kernel(realization: StrainRealization, nu: float, x, x0: float, t: float):
    """Strained-diffusion density in ``x`` launched from ``x0`` at t=0.

    Mean ``x0 exp(-h(t))``, variance ``2 nu p(t)``; degenerates to a delta
    at x0 as t -> 0+.
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    if nu <= 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    mean = x0 * np.exp(-realization.h(t))
    variance = 2.0 * nu * realization.p(t)
    return _gaussian(np.asarray(x, dtype=float), mean, variance)


def gaussian_family(nu: float, drift: float = 0.0) -> TransitionFamily:
    """Two-time family for the constant-drift kernel (elapsed-time only).

    The drift convention matches ``drift_kernel``: over elapsed time d the
    mean moves to ``x_from - drift * d``.
    """

    def family(x_to, x_from, t_from, t_to):
        d = t_to - t_from
        if nu * d <= 0:
            raise DegenerateKernelError("need nu*(t_to - t_from) > 0")
        return _gaussian(np.asarray(x_to, dtype=float), np.asarray(x_from) - drift * d, 2.0 * nu * d)

    return family


def ou_family(realization: StrainRealization, nu: float) -> TransitionFamily:
    """Two-time family of the strained kernel anchored in absolute time.

    Between t0 and t1 the mean contracts by ``exp(-(h(t1)-h(t0)))`` and the
    variance grows by ``2 nu (p(t1) - p(t0) exp(-2(h(t1)-h(t0))))``, which
    follows from the p recurrence and stays overflow-free.
    """

    def family(x_to, x_from, t_from, t_to):
        if t_to <= t_from:
            raise ValueError("need t_to > t_from")
        dh = realization.h(t_to) - realization.h(t_from)
        variance = 2.0 * nu * (realization.p(t_to) - realization.p(t_from) * np.exp(-2.0 * dh))
        mean = np.asarray(x_from) * np.exp(-dh)
        return _gaussian(np.asarray(x_to, dtype=float), mean, variance)

    return family


@dataclass
class ConsistencyResult:
    """Per-horizon displacement-moment rates and their small-dt limits."""

    dts: np.ndarray
    drift_estimates: np.ndarray
    diffusion_estimates: np.ndarray
    drift: float
    diffusion: float
    drift_order: float
    diffusion_order: float
    failed: bool = False


def _moment_grid(family: TransitionFamily, x_from: float, dt: float):
    """Find a quadrature window holding all but ~1e-14 of the kernel mass."""
    width = 1e-8
    mass_prev = None
    for _ in range(120):
        xs = np.linspace(x_from - width, x_from + width, 2001)
        dens = family(xs, x_from, 0.0, dt)
        mass = np.trapezoid(dens, xs)
        edge = max(dens[0], dens[-1])
        if mass > 0.5 and edge < 1e-16 * max(dens.max(), 1e-300):
            if mass_prev is not None and abs(mass - mass_prev) < 1e-13:
                break
            mass_prev = mass
        width *= 2.0
    else:
        return None, None, mass
    # refine so the grid resolves the kernel core
    second = np.trapezoid((xs - x_from) ** 2 * dens, xs)
    std = np.sqrt(max(second, 1e-300))
    n = int(np.clip(40 * width / std, 2001, 200001))
    xs = np.linspace(x_from - width, x_from + width, n)
    dens = family(xs, x_from, 0.0, dt)
    return xs, dens, np.trapezoid(dens, xs)


def _observed_order(dts: np.ndarray, estimates: np.ndarray) -> float:
    diffs = np.abs(np.diff(estimates))
    scale = max(np.max(np.abs(estimates)), 1e-300)
    orders = []
    for i in range(len(diffs) - 1):
        if diffs[i] > 1e-12 * scale and diffs[i + 1] > 1e-12 * scale:
            orders.append(np.log(diffs[i] / diffs[i + 1]) / np.log(dts[i] / dts[i + 1]))
    return float(np.median(orders)) if orders else float("nan")


def check_consistency(
    family: TransitionFamily, x_probe: float, dts
) -> ConsistencyResult:
    """Estimate drift and diffusion rates from first/second displacement
    moments of the kernel over a decreasing sequence of horizons.

    The first-moment rate converges to the (backward) drift b(x_probe)
    and the raw second-moment rate to 2*nu, each with O(dt) error for the
    kernels in this module.
    """
    dts = np.asarray(sorted(dts, reverse=True), dtype=float)
    if np.any(dts <= 0):
        raise ValueError("all dt values must be > 0")
    drifts = np.empty(dts.size)
    diffusions = np.empty(dts.size)
    for i, dt in enumerate(dts):
        xs, dens, mass = _moment_grid(family, x_probe, dt)
        if xs is None or abs(mass - 1.0) > 1e-6:
            return ConsistencyResult(
                dts, drifts, diffusions, float("nan"), float("nan"),
                float("nan"), float("nan"), failed=True,
            )
        disp = xs - x_probe
        drifts[i] = np.trapezoid(disp * dens, xs) / dt
        diffusions[i] = np.trapezoid(disp * disp * dens, xs) / dt
    return ConsistencyResult(
        dts=dts,
        drift_estimates=drifts,
        diffusion_estimates=diffusions,
        drift=float(drifts[-1]),
        diffusion=float(diffusions[-1]),
        drift_order=_observed_order(dts, drifts),
        diffusion_order=_observed_order(dts, diffusions),
    )


@dataclass
class ChapmanKolmogorovResult:
    defect: float
    truncated: bool
    direct_mass: float
    intermediate_mass: float


def chapman_kolmogorov_check(
    family: TransitionFamily,
    t1: float,
    t2: float,
    grid: Grid1D,
    x_start: float | None = None,
) -> ChapmanKolmogorovResult:
    """Compose the kernel over t1 then t2 on the grid and compare with the
    direct kernel over t1+t2; returns the max-abs defect.

    Sets ``truncated`` when the grid holds less than 1 - 1e-12 of either
    density's mass, in which case the defect is not meaningful.
    """
    if t1 <= 0 or t2 <= 0:
        raise ValueError("t1 and t2 must be > 0")
    x = grid.x
    if x_start is None:
        x_start = 0.5 * (grid.x_min + grid.x_max)
    w = np.full(grid.n_points, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx

    mid = family(x, x_start, 0.0, t1)
    direct = family(x, x_start, 0.0, t1 + t2)
    step2 = family(x[:, None], x[None, :], t1, t1 + t2)
    composed = step2 @ (mid * w)

    mid_mass = float(np.sum(mid * w))
    direct_mass = float(np.sum(direct * w))
    truncated = min(mid_mass, direct_mass) < 1.0 - 1e-12
    defect = float(np.max(np.abs(composed - direct)))
    return ChapmanKolmogorovResult(
        defect=defect,
        truncated=truncated,
        direct_mass=direct_mass,
        intermediate_mass=mid_mass,
    )
