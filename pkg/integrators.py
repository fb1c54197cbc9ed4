#!/usr/bin/env python3
"""Implicit Euler scheme, the RK4 reference flow and discretization-error measurements."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from lattice import Drift, compute_constants, drift_for, require_matching
from models import (
    DerivedConstants,
    DivergenceError,
    IESConfig,
    LatticeState,
    ModelParams,
    NoConvergence,
    ParameterError,
    Trajectory,
)

logger = logging.getLogger(__name__)

NORM_SLACK = 1e-10
DEFAULT_REFERENCE_STEP = 1e-3


@dataclass(frozen=True)
class PicardResult:
    values: np.ndarray
    iterations: int
    increments: tuple[float, ...]


def _row_norms(values: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(values.real**2 + values.imag**2, axis=-1))


def picard_solve(previous: np.ndarray, drift: Drift, cfg: IESConfig) -> PicardResult:
    """Solve y = previous + eps*drift(y) by fixed-point iteration from y0 = previous.

    ``previous`` may be a single state or a batch (rows are states); each row
    stops on its own criterion so a row's result never depends on its batch.
    """

    batch = np.atleast_2d(previous)
    y = batch.copy()
    active = np.arange(batch.shape[0])
    increments: list[float] = []
    eps = cfg.eps
    for iteration in itertools.count(1):
        current = y[active]
        with np.errstate(over="ignore", invalid="ignore"):
            updated = batch[active] + eps * drift(current)
        if not np.all(np.isfinite(updated)):
            raise NoConvergence(
                f"Picard iteration overflowed at iteration {iteration} (eps={eps})",
                iterations=iteration,
            )
        diff = _row_norms(updated - current)
        scale = np.maximum(1.0, _row_norms(current))
        increments.append(float(diff.max()))
        y[active] = updated
        active = active[diff > cfg.fp_tol * scale]
        if active.size == 0:
            break
        if iteration >= cfg.fp_max_iter:
            raise NoConvergence(
                f"Picard iteration did not converge in {cfg.fp_max_iter} iterations (eps={eps})",
                iterations=iteration,
            )
    residual = _row_norms(y - batch - eps * drift(y))
    if np.any(residual > 10 * cfg.fp_tol * np.maximum(1.0, _row_norms(y))):
        raise NoConvergence(
            f"Fixed-point residual {float(residual.max())!r} above tolerance (eps={eps})",
            iterations=iteration,
        )
    values = y if previous.ndim == 2 else y[0]
    return PicardResult(values=values, iterations=iteration, increments=tuple(increments))


def check_step_size(cfg: IESConfig, constants: DerivedConstants) -> None:
    if cfg.enforce_eps_star and cfg.eps > constants.eps_star * (1 + 1e-12):
        raise ParameterError(f"eps={cfg.eps!r} exceeds eps_star={constants.eps_star!r}")


def check_step_preconditions(
    values: np.ndarray,
    radius: float,
    cfg: IESConfig,
    constants: DerivedConstants,
) -> None:
    if not cfg.enforce_eps_star:
        return
    check_step_size(cfg, constants)
    largest = float(np.max(_row_norms(np.atleast_2d(values))))
    if largest > radius * (1 + NORM_SLACK) + 1e-300:
        raise ParameterError(f"initial norm {largest!r} exceeds the absorbing radius {radius!r}")


def ies_step_values(
    values: np.ndarray,
    params: ModelParams,
    cfg: IESConfig,
    *,
    m: Optional[int] = None,
    constants: Optional[DerivedConstants] = None,
) -> np.ndarray:
    """One implicit Euler step on a state array or a batch of them."""

    constants = constants or compute_constants(params)
    check_step_preconditions(values, constants.r_star, cfg, constants)
    return picard_solve(values, drift_for(params, m), cfg).values


def implicit_euler_step(
    u_prev: LatticeState,
    params: ModelParams,
    cfg: IESConfig,
    *,
    constants: Optional[DerivedConstants] = None,
) -> LatticeState:
    require_matching(u_prev, params)
    values = ies_step_values(u_prev.values, params, cfg, m=u_prev.m, constants=constants)
    return u_prev.with_values(values)


def iterate_ies(
    u0: LatticeState,
    n: int,
    params: ModelParams,
    cfg: IESConfig,
    *,
    constants: Optional[DerivedConstants] = None,
) -> Trajectory:
    if n < 0:
        raise ParameterError("n must be >= 0")
    constants = constants or compute_constants(params)
    states = [u0]
    for step in range(1, n + 1):
        try:
            states.append(implicit_euler_step(states[-1], params, cfg, constants=constants))
        except NoConvergence as exc:
            raise NoConvergence(f"step {step}: {exc}", step=step, iterations=exc.iterations) from exc
    times = tuple(cfg.eps * index for index in range(n + 1))
    return Trajectory(states=tuple(states), times=times, step=cfg.eps)


def advance_ies(
    u0: LatticeState,
    n: int,
    params: ModelParams,
    cfg: IESConfig,
    *,
    constants: Optional[DerivedConstants] = None,
) -> LatticeState:
    """Final state of ``iterate_ies`` without keeping the intermediate states."""

    require_matching(u0, params)
    constants = constants or compute_constants(params)
    drift = drift_for(params, u0.m)
    check_step_preconditions(u0.values, constants.r_star, cfg, constants)
    values = np.array(u0.values)
    for step in range(1, n + 1):
        try:
            values = picard_solve(values, drift, cfg).values
        except NoConvergence as exc:
            raise NoConvergence(f"step {step}: {exc}", step=step, iterations=exc.iterations) from exc
    return u0.with_values(values)


def rk4_values(values: np.ndarray, drift: Drift, t_end: float, substeps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta over [0, t_end] with equal substeps."""

    if substeps < 1:
        raise ParameterError("substeps must be >= 1")
    if t_end < 0:
        raise ParameterError("t_end must be >= 0")
    y = np.array(values, dtype=np.complex128)
    if t_end == 0:
        return y
    h = t_end / substeps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(substeps):
            k1 = drift(y)
            k2 = drift(y + 0.5 * h * k1)
            k3 = drift(y + 0.5 * h * k2)
            k4 = drift(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(f"reference integration overflowed (t_end={t_end}, substeps={substeps})")
    return y


def reference_solve(
    u0: LatticeState, t_end: float, params: ModelParams, substeps: int
) -> LatticeState:
    require_matching(u0, params)
    return u0.with_values(rk4_values(u0.values, drift_for(params, u0.m), t_end, substeps))


def default_reference_substeps(t_end: float) -> int:
    return max(1000, math.ceil(t_end / DEFAULT_REFERENCE_STEP))


def one_step_defect(
    y: LatticeState,
    eps: float,
    params: ModelParams,
    *,
    substeps: int = 100,
    cfg: Optional[IESConfig] = None,
) -> float:
    """||u(eps, y) - u_1(y)||: exact flow versus one implicit Euler step."""

    cfg = cfg or IESConfig(eps=eps, enforce_eps_star=False)
    exact = reference_solve(y, eps, params, substeps)
    step = implicit_euler_step(y, params, cfg.with_updated(eps=eps))
    return float(np.linalg.norm(exact.values - step.values))


def steps_for(T: float, eps: float) -> int:
    n = round(T / eps)
    if n < 1 or abs(n * eps - T) > 1e-9 * T:
        raise ParameterError(f"eps={eps!r} does not divide T={T!r}")
    return n


def snap_step(T: float, eps: float) -> float:
    """Largest step <= eps that divides T."""

    return T / math.ceil(T / eps * (1 - 1e-12))


def global_error(
    y: LatticeState,
    T: float,
    eps: float,
    params: ModelParams,
    *,
    reference: Optional[LatticeState] = None,
    substeps: Optional[int] = None,
    cfg: Optional[IESConfig] = None,
) -> float:
    """||u(T, y) - u_n(y)|| with n = T/eps."""

    if T <= 0:
        raise ParameterError("T must be > 0")
    n = steps_for(T, eps)
    if reference is None:
        reference = reference_solve(y, T, params, substeps or default_reference_substeps(T))
    cfg = (cfg or IESConfig(eps=eps, enforce_eps_star=False)).with_updated(eps=eps)
    final = advance_ies(y, n, params, cfg)
    return float(np.linalg.norm(reference.values - final.values))


def one_step_bound(eps: float, constants: DerivedConstants) -> float:
    return constants.one_step_constant() * eps * eps


def global_bound(eps: float, T: float, constants: DerivedConstants) -> float:
    r = constants.r_star
    return 0.5 * constants.M(r) * math.exp(constants.L(r) * T) * eps


def discrete_energy_bound(r0_sq: float, n: int, eps: float, constants: DerivedConstants) -> float:
    """IES envelope of ||u_n||^2 for data with ||u_0||^2 = r0_sq."""

    factor = (1 + 2 * eps * constants.gap) ** (-n)
    return r0_sq * factor + constants.c1 / constants.gap * (1 - factor)


def fit_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step); nan if any error is zero."""

    steps_arr = np.asarray(steps, dtype=float)
    errors_arr = np.asarray(errors, dtype=float)
    if steps_arr.size < 2 or np.any(errors_arr <= 0):
        return math.nan
    slope, _ = np.polyfit(np.log(steps_arr), np.log(errors_arr), 1)
    return float(slope)


__all__ = [
    "PicardResult",
    "advance_ies",
    "check_step_preconditions",
    "check_step_size",
    "default_reference_substeps",
    "discrete_energy_bound",
    "fit_order",
    "global_bound",
    "global_error",
    "ies_step_values",
    "implicit_euler_step",
    "iterate_ies",
    "one_step_bound",
    "one_step_defect",
    "picard_solve",
    "reference_solve",
    "rk4_values",
    "snap_step",
    "steps_for",
]
