"""Strain-rate models k(t) and the functionals h(t), p(t) built from them.

A strain model is a mean rate ``k0 > 0`` plus an optional stationary
zero-mean Gaussian fluctuation, either white in time (delta-correlated,
with ``<k'(t+tau) k'(t)> = k_tilde * delta(tau)``) or exponentially
correlated (an Ornstein-Uhlenbeck fluctuation with stationary variance
``variance`` and correlation time ``tau_c``).

Realizations expose two accumulated functionals used by every transition
kernel downstream::

    h(t) = integral_0^t k(s) ds
    p(t) = exp(-2 h(t)) * integral_0^t exp(2 h(s)) ds

``p`` is always evaluated through the equivalent initial-value problem
``p' = 1 - 2 k(t) p, p(0) = 0``, which avoids overflow of ``exp(2h)``.

Closed-form ensemble moments over the Gaussian fluctuation reduce to the
kernel ``I(t) = integral_0^t (t - s) R(|s|) ds`` of the correlation
function ``R``; for the white-noise model the delta sits exactly on the
integration endpoint and its weight there is a convention, exposed as
``boundary_delta_weight`` (0.5 is the white-noise limit of any smooth
stationary correlation; 1.0 assigns the delta full mass).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "NoFluctuation",
    "DeltaCorrelated",
    "ExponentialCorrelated",
    "StrainModel",
    "StrainStabilityWarning",
    "ConstantStrain",
    "CallableStrain",
    "SampledStrainPath",
    "strain_h",
    "strain_p",
    "strain_path_sample",
    "sample_strain_matrix",
    "path_h",
    "path_p",
    "integrated_correlation",
    "stretch_moment",
]

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)


class StrainStabilityWarning(UserWarning):
    """Fluctuation amplitude at or above the mean strain; compressive
    intervals are possible and sheet stability is not modeled."""


@dataclass(frozen=True)
class NoFluctuation:
    pass


@dataclass(frozen=True)
class DeltaCorrelated:
    """White-in-time fluctuation with correlation mass ``k_tilde`` (1/time)."""

    k_tilde: float

    def __post_init__(self) -> None:
        if self.k_tilde < 0:
            raise ValueError(f"k_tilde must be >= 0, got {self.k_tilde}")


@dataclass(frozen=True)
class ExponentialCorrelated:
    """OU fluctuation: ``R(tau) = variance * exp(-|tau|/tau_c)``."""

    variance: float
    tau_c: float

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if self.tau_c <= 0:
            raise ValueError(f"tau_c must be > 0, got {self.tau_c}")


Fluctuation = NoFluctuation | DeltaCorrelated | ExponentialCorrelated


@dataclass(frozen=True)
class StrainModel:
    """Mean strain ``k0`` plus an optional Gaussian fluctuation model."""

    k0: float
    fluctuation: Fluctuation = field(default_factory=NoFluctuation)
    boundary_delta_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.k0 <= 0:
            raise ValueError(f"k0 must be > 0, got {self.k0}")
        if self.boundary_delta_weight not in (0.5, 1.0):
            raise ValueError(
                f"boundary_delta_weight must be 0.5 or 1.0, got "
                f"{self.boundary_delta_weight}"
            )
        f = self.fluctuation
        if isinstance(f, DeltaCorrelated) and f.k_tilde >= self.k0:
            warnings.warn(
                f"fluctuation mass k_tilde={f.k_tilde} >= k0={self.k0}; "
                "net compression intervals likely, stability not modeled",
                StrainStabilityWarning,
                stacklevel=2,
            )
        if isinstance(f, ExponentialCorrelated) and np.sqrt(f.variance) >= self.k0:
            warnings.warn(
                f"fluctuation rms {np.sqrt(f.variance):g} >= k0={self.k0}; "
                "net compression intervals likely, stability not modeled",
                StrainStabilityWarning,
                stacklevel=2,
            )


@runtime_checkable
class StrainRealization(Protocol):
    """A concrete k(t) trajectory exposing its accumulated functionals."""

    def k(self, t): ...

    def h(self, t): ...

    def p(self, t): ...


def _check_time(t: float) -> float:
    t = float(t)
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    return t


class ConstantStrain:
    """Deterministic constant strain rate; h and p are exact."""

    def __init__(self, k0: float):
        if k0 <= 0:
            raise ValueError(f"k0 must be > 0, got {k0}")
        self.k0 = float(k0)

    def k(self, t):
        return np.broadcast_to(self.k0, np.shape(t)).copy() if np.ndim(t) else self.k0

    def h(self, t):
        return self.k0 * np.asarray(t, dtype=float) if np.ndim(t) else self.k0 * _check_time(t)

    def p(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else _check_time(t)
        return -np.expm1(-2.0 * self.k0 * t) / (2.0 * self.k0)


class CallableStrain:
    """Deterministic time-varying strain given as a callable ``k(t)``.

    h uses adaptive quadrature; p integrates ``exp(2(h(s) - h(t)))``,
    whose integrand is bounded by 1 whenever k >= 0.
    """

    def __init__(self, fn: Callable[[float], float]):
        self._fn = fn

    def k(self, t):
        return self._fn(t)

    def h(self, t):
        t = _check_time(t)
        if t == 0.0:
            return 0.0
        val, _ = quad(self._fn, 0.0, t, **_QUAD_OPTS)
        return val

    def p(self, t):
        t = _check_time(t)
        if t == 0.0:
            return 0.0
        h_t = self.h(t)
        val, _ = quad(lambda s: np.exp(2.0 * (self.h(s) - h_t)), 0.0, t, **_QUAD_OPTS)
        return val


class SampledStrainPath:
    """Piecewise-constant realization on steps of width ``dt`` from t=0.

    ``k_values[i]`` holds on ``[i*dt, (i+1)*dt)``. h and p accumulate the
    per-step closed forms, so both are exact for the step function.
    """

    def __init__(self, k_values: np.ndarray, dt: float):
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.k_values = np.asarray(k_values, dtype=float)
        if self.k_values.ndim != 1 or self.k_values.size == 0:
            raise ValueError("k_values must be a non-empty 1-D array")
        self.dt = float(dt)
        self.t_end = self.dt * self.k_values.size
        # cumulative h at step boundaries, and p by its exact recurrence
        self._h_nodes = np.concatenate(([0.0], np.cumsum(self.k_values) * self.dt))
        p_nodes = np.empty(self.k_values.size + 1)
        p_nodes[0] = 0.0
        for i, ki in enumerate(self.k_values):
            p_nodes[i + 1] = _p_step(p_nodes[i], ki, self.dt)
        self._p_nodes = p_nodes

    def _locate(self, t: float) -> tuple[int, float]:
        t = _check_time(t)
        if t > self.t_end * (1 + 1e-12):
            raise ValueError(f"t={t} beyond sampled horizon {self.t_end}")
        t = min(t, self.t_end)
        i = min(int(t / self.dt), self.k_values.size - 1)
        return i, t - i * self.dt

    def k(self, t):
        i, _ = self._locate(t)
        return float(self.k_values[i])

    def h(self, t):
        i, rem = self._locate(t)
        return float(self._h_nodes[i] + self.k_values[i] * rem)

    def p(self, t):
        i, rem = self._locate(t)
        return float(_p_step(self._p_nodes[i], self.k_values[i], rem))


def _p_step(p0, k, dt):
    """Advance p' = 1 - 2 k p exactly over a step of constant k."""
    if np.ndim(k) == 0 and k == 0.0:
        return p0 + dt
    k = np.asarray(k, dtype=float)
    decay = np.exp(-2.0 * k * dt)
    growth = np.where(k != 0.0, -np.expm1(-2.0 * k * dt) / (2.0 * np.where(k != 0.0, k, 1.0)), dt)
    return p0 * decay + growth


def strain_h(realization: StrainRealization, t: float) -> float:
    """Accumulated strain integral ``h(t) = int_0^t k``."""
    _check_time(t)
    return realization.h(t)


def strain_p(realization: StrainRealization, t: float) -> float:
    """Spread functional ``p(t) = exp(-2h(t)) int_0^t exp(2h)``."""
    _check_time(t)
    return realization.p(t)


def _path_keys(seed: int, index: int) -> np.ndarray:
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)], dtype=np.uint64)


def _path_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_path_keys(seed, index)))


def sample_strain_matrix(
    model: StrainModel, t_end: float, dt: float, seed: int, n_paths: int
) -> np.ndarray:
    """Sample ``n_paths`` piecewise-constant k(t) realizations.

    Returns an (n_paths, n_steps) array. Path ``i`` is drawn from its own
    counter-based stream keyed by ``(seed, i)``, so the result does not
    depend on evaluation order or batching.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("t_end and dt must be > 0")
    n_steps = max(1, int(round(t_end / dt)))
    f = model.fluctuation
    if isinstance(f, NoFluctuation):
        return np.full((n_paths, n_steps), model.k0)
    xi = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        xi[i] = _path_generator(seed, i).standard_normal(n_steps)
    if isinstance(f, DeltaCorrelated):
        return model.k0 + np.sqrt(f.k_tilde / dt) * xi
    if isinstance(f, ExponentialCorrelated):
        # exact OU update from the stationary law, recursed across columns
        rho = np.exp(-dt / f.tau_c)
        innov = np.sqrt(f.variance * (1.0 - rho * rho))
        kp = np.empty_like(xi)
        kp[:, 0] = np.sqrt(f.variance) * xi[:, 0]
        for j in range(1, n_steps):
            kp[:, j] = rho * kp[:, j - 1] + innov * xi[:, j]
        return model.k0 + kp
    raise TypeError(f"unsupported fluctuation model {type(f).__name__}")


def strain_path_sample(
    model: StrainModel, t_end: float, dt: float, seed: int, index: int = 0
) -> SampledStrainPath:
    """Draw one reproducible realization of the strain model."""
    k = sample_strain_matrix(model, t_end, dt, seed, index + 1)[index]
    return SampledStrainPath(k, dt)


def path_h(k_matrix: np.ndarray, dt: float) -> np.ndarray:
    """h(t_end) for each row of a (n_paths, n_steps) strain matrix."""
    return np.sum(k_matrix, axis=1) * dt


def path_p(k_matrix: np.ndarray, dt: float) -> np.ndarray:
    """p(t_end) for each row, via the exact per-step recurrence."""
    n_paths, n_steps = k_matrix.shape
    p = np.zeros(n_paths)
    for j in range(n_steps):
        p = _p_step(p, k_matrix[:, j], dt)
    return p


def integrated_correlation(model: StrainModel, t: float) -> float:
    """``I(t) = int_0^t (t - s) R(|s|) ds`` for the model's correlation R.

    Equals half the variance of ``int_0^t k'``. For the delta model the
    endpoint mass is scaled by ``boundary_delta_weight``.
    """
    t = _check_time(t)
    f = model.fluctuation
    if isinstance(f, NoFluctuation):
        return 0.0
    if isinstance(f, DeltaCorrelated):
        return model.boundary_delta_weight * f.k_tilde * t
    if isinstance(f, ExponentialCorrelated):
        tc = f.tau_c
        return f.variance * (tc * t - tc * tc * (-np.expm1(-t / tc)))
    raise TypeError(f"unsupported fluctuation model {type(f).__name__}")


def stretch_moment(model: StrainModel, t: float, a: float) -> float:
    """Closed-form ``< exp(a * h(t)) >`` over the Gaussian fluctuation.

    With ``h = k0 t + Z`` and Z zero-mean Gaussian of variance ``2 I(t)``,
    the moment is ``exp(a k0 t + a^2 I(t))``.
    """
    t = _check_time(t)
    return float(np.exp(a * model.k0 * t + a * a * integrated_correlation(model, t)))
