#!/usr/bin/env python3
"""Ornstein-Uhlenbeck paths and the random-coefficient lattice system."""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import lfilter

from integrators import check_step_size, picard_solve, steps_for
from lattice import compute_constants, laplacian_values, nonlinear_values, require_matching
from models import (
    DerivedConstants,
    Direction,
    IESConfig,
    LatticeState,
    ModelParams,
    NoConvergence,
    NoiseConfig,
    OUPath,
    ParameterError,
    QuadratureError,
    Trajectory,
    ValidationError,
)
from workers import ordered_map

logger = logging.getLogger(__name__)

OU_STREAM = 0
INIT_STREAM = 1
SAMPLE_STREAM = 3
RADIUS_TAIL_TOL = 1e-8
MIN_RADIUS_WINDOW = 50.0


def seeded_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for (seed, stream...) so members never share draws."""

    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def ou_from_increments(z0: float, w: np.ndarray, dt: float) -> np.ndarray:
    """Exact OU recursion z_{i+1} = z_i e^{-dt} + xi_i sqrt((1 - e^{-2dt})/2), xi = w/sqrt(dt)."""

    decay = math.exp(-dt)
    spread = math.sqrt(-math.expm1(-2.0 * dt) / 2.0)
    xi = np.asarray(w, dtype=float) / math.sqrt(dt)
    tail, _ = lfilter([spread], [1.0, -decay], xi, zi=[decay * z0])
    return np.concatenate(([z0], tail))


def sample_ou_path(
    t_begin: float, t_end: float, cfg: NoiseConfig, *, stream: Sequence[int] = ()
) -> OUPath:
    """Stationary OU path on a grid of step cfg.dt anchored at t_end and reaching back past t_begin."""

    if not t_begin < t_end:
        raise ParameterError("OU path needs t_begin < t_end")
    dt = cfg.dt
    n = max(1, math.ceil((t_end - t_begin) / dt - 1e-9))
    times = t_end - dt * np.arange(n, -1, -1, dtype=float)
    rng = seeded_rng(cfg.seed, OU_STREAM, *stream)
    z0 = rng.normal(0.0, math.sqrt(0.5))
    w = rng.standard_normal(n) * math.sqrt(dt)
    return OUPath(times=times, w=w, z=ou_from_increments(z0, w, dt))


def random_field_values(
    values: np.ndarray,
    z_val: float,
    params: ModelParams,
    a: float,
    force: np.ndarray,
    *,
    periodic: bool = False,
) -> np.ndarray:
    return (
        complex(params.lam, params.mu) * laplacian_values(values, periodic=periodic)
        - complex(params.gamma, params.beta) * values
        - complex(params.k, params.nu) * nonlinear_values(values, params.p) * math.exp(params.p * a * z_val)
        + force * math.exp(-a * z_val)
        + (a * z_val) * values
    )


def random_drift_for(params: ModelParams, z_val: float, a: float, m: Optional[int] = None):
    force = params.force(m)
    periodic = m is not None

    def drift(values: np.ndarray) -> np.ndarray:
        return random_field_values(values, z_val, params, a, force, periodic=periodic)

    return drift


def random_vector_field(U: LatticeState, z_val: float, params: ModelParams, a: float) -> LatticeState:
    require_matching(U, params)
    return U.with_values(random_drift_for(params, z_val, a, U.m)(U.values))


def _check_path_step(path: OUPath, eps: float) -> None:
    if abs(path.dt - eps) > 1e-9 * eps:
        raise ValidationError(f"OU path step {path.dt!r} does not match eps={eps!r}")


def random_advance_values(
    values: np.ndarray,
    z_grid: np.ndarray,
    params: ModelParams,
    cfg: IESConfig,
    a: float,
    *,
    m: Optional[int] = None,
    first_step: int = 1,
) -> np.ndarray:
    """Frozen-coefficient implicit Euler along ``z_grid`` (values at right endpoints)."""

    current = np.array(values)
    for offset, z_val in enumerate(z_grid):
        try:
            current = picard_solve(current, random_drift_for(params, float(z_val), a, m), cfg).values
        except NoConvergence as exc:
            step = first_step + offset
            raise NoConvergence(
                f"step {step}: {exc}; reduce eps or a", step=step, iterations=exc.iterations
            ) from exc
    return current


def random_ies_trajectory(
    U0: LatticeState,
    path: OUPath,
    params: ModelParams,
    cfg: IESConfig,
    a: float,
) -> Trajectory:
    require_matching(U0, params)
    _check_path_step(path, cfg.eps)
    check_step_size(cfg, compute_constants(params))
    states = [U0]
    for step in range(1, path.steps + 1):
        values = random_advance_values(
            states[-1].values, path.z[step : step + 1], params, cfg, a, m=U0.m, first_step=step
        )
        states.append(U0.with_values(values))
    return Trajectory(states=tuple(states), times=tuple(float(t) for t in path.times), step=cfg.eps)


def conjugate(U: LatticeState, z_val: float, a: float, direction: Direction) -> LatticeState:
    """Switch between the original variable u and U = e^{-az}u."""

    if direction == "to_u":
        return U.with_values(U.values * math.exp(-a * z_val))
    if direction == "to_original":
        return U.with_values(U.values * math.exp(a * z_val))
    raise ValidationError(f"Unknown conjugation direction '{direction}'")


def pullback_solve(
    U0: LatticeState,
    T_back: float,
    cfg_noise: NoiseConfig,
    params: ModelParams,
    cfg_ies: IESConfig,
    m: Optional[int] = None,
    *,
    path: Optional[OUPath] = None,
    stream: Sequence[int] = (),
) -> LatticeState:
    """Start at time -T_back from U0 and return the state at time 0."""

    require_matching(U0, params)
    if U0.m != m:
        raise ValidationError("Initial state does not match the requested truncation")
    if T_back <= 0:
        raise ParameterError("T_back must be > 0")
    n = steps_for(T_back, cfg_ies.eps)
    check_step_size(cfg_ies, compute_constants(params))
    if path is None:
        path = sample_ou_path(-T_back, 0.0, cfg_noise.with_updated(dt=cfg_ies.eps), stream=stream)
    else:
        _check_path_step(path, cfg_ies.eps)
        if abs(path.times[-1]) > 1e-9:
            raise ValidationError("Pullback paths must end at time 0")
        path = path.restrict(path.times[-1] - n * cfg_ies.eps)
    values = random_advance_values(U0.values, path.z[1:], params, cfg_ies, cfg_noise.a, m=m)
    return U0.with_values(values)


def absorbing_window(constants: DerivedConstants) -> float:
    """Integration horizon S for the absorbing radius."""

    return max(10.0 / (2 * constants.gap) * math.log(1e8), MIN_RADIUS_WINDOW)


def radius_path_span(constants: DerivedConstants, dt: float) -> float:
    return math.ceil(absorbing_window(constants) / dt - 1e-9) * dt


def _exp_linear_cells(grid: np.ndarray, exponent: np.ndarray) -> float:
    """Integral of exp of the piecewise-linear interpolant of ``exponent``."""

    widths = np.diff(grid)
    jumps = np.diff(exponent)
    ratio = np.ones_like(jumps)
    moving = jumps != 0
    ratio[moving] = np.expm1(jumps[moving]) / jumps[moving]
    return float(np.sum(widths * np.exp(exponent[:-1]) * ratio))


def absorbing_radius(
    a: float,
    path: OUPath,
    params: ModelParams,
    constants: Optional[DerivedConstants] = None,
) -> float:
    """Pathwise absorbing radius R(a, omega) for the squared norm."""

    constants = constants or compute_constants(params)
    horizon = absorbing_window(constants)
    tol = 1e-9 * max(1.0, horizon)
    if abs(path.times[-1]) > tol or path.times[0] > -horizon + tol:
        raise QuadratureError(f"OU path must cover [-{horizon:.6g}, 0]")
    start = int(np.searchsorted(path.times, -horizon + tol, side="right")) - 1
    grid = path.times[start:]
    z = path.z[start:]
    running = cumulative_trapezoid(z, grid, initial=0.0)
    inner = running - running[-1]
    exponent = -a * z - 2.0 * a * inner + 2.0 * constants.gap * grid
    integral = _exp_linear_cells(grid, exponent)
    tail = math.exp(exponent[0]) / (2.0 * constants.gap)
    if not integral > 0 or tail > RADIUS_TAIL_TOL * integral:
        raise QuadratureError(
            f"absorbing radius integrand tail {tail!r} is not negligible (a={a!r})"
        )
    return params.eta + 2.0 * constants.c1 * integral


def radius_ensemble(
    a_values: Iterable[float],
    params: ModelParams,
    *,
    n_paths: int = 100,
    seed: int = 0,
    dt: float = 0.01,
    threads: int = 1,
) -> list[float]:
    """Monte Carlo mean of R(a, omega) per a over antithetic path pairs (omega, -omega)."""

    a_values = list(a_values)
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    constants = compute_constants(params)
    span = radius_path_span(constants, dt)
    cfg = NoiseConfig(a=0.0, seed=seed, dt=dt)

    def pair(index: int) -> list[float]:
        path = sample_ou_path(-span, 0.0, cfg, stream=(index,))
        mirror = path.negated()
        return [
            absorbing_radius(a, path, params, constants) + absorbing_radius(a, mirror, params, constants)
            for a in a_values
        ]

    n_pairs = math.ceil(n_paths / 2)
    sums = np.array(ordered_map(pair, range(n_pairs), threads))
    means = sums.sum(axis=0) / (2 * n_pairs)
    logger.debug("radius ensemble over %d path pairs: %r", n_pairs, means)
    return [float(value) for value in means]


__all__ = [
    "INIT_STREAM",
    "OU_STREAM",
    "SAMPLE_STREAM",
    "absorbing_radius",
    "absorbing_window",
    "conjugate",
    "ou_from_increments",
    "pullback_solve",
    "radius_ensemble",
    "radius_path_span",
    "random_advance_values",
    "random_drift_for",
    "random_field_values",
    "random_ies_trajectory",
    "random_vector_field",
    "sample_ou_path",
    "seeded_rng",
]
