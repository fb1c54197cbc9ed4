#!/usr/bin/env python3
"""Point-cloud attractor approximations and Hausdorff distances."""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np

from integrators import check_step_preconditions, picard_solve, rk4_values
from lattice import compute_constants, drift_for
from models import (
    RANDOM_VARIANTS,
    REF_SUBSTEPS,
    TRUNCATED_VARIANTS,
    VARIANTS,
    CloudKnobs,
    CloudMeta,
    CloudRecipe,
    ConfigError,
    DerivedConstants,
    DimensionError,
    IESConfig,
    ModelParams,
    NoiseConfig,
    OUPath,
    PointCloud,
    SweepAxis,
    SweepRow,
    Variant,
)
from stochastic import INIT_STREAM, random_drift_for, sample_ou_path, seeded_rng
from workers import ordered_map

logger = logging.getLogger(__name__)

DISTANCE_BLOCK = 256
DISTANCE_CHUNK = 1 << 20


def _require_same_dimension(A: PointCloud, B: PointCloud) -> None:
    if A.dimension != B.dimension:
        raise DimensionError(
            f"Clouds have different dimensions ({A.dimension} vs {B.dimension}); expand truncated clouds first"
        )


def _nearest_distances(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Distance from each source row to its nearest target row.

    Each pair is sqrt(sum(|a - b|^2)) summed along one contiguous row.
    """

    rows = max(1, DISTANCE_CHUNK // target.size)
    nearest = np.empty(len(source))
    for start in range(0, len(source), rows):
        diff = source[start : start + rows, np.newaxis, :] - target[np.newaxis, :, :]
        squared = np.sum(diff.real**2 + diff.imag**2, axis=2)
        nearest[start : start + rows] = np.sqrt(squared).min(axis=1)
    return nearest


def hausdorff_semi(A: PointCloud, B: PointCloud, *, threads: int = 1) -> float:
    """d(A, B) = max over a in A of the distance from a to B."""

    _require_same_dimension(A, B)
    source = A.points
    blocks = [source[start : start + DISTANCE_BLOCK] for start in range(0, len(source), DISTANCE_BLOCK)]
    nearest = ordered_map(lambda block: _nearest_distances(block, B.points), blocks, threads)
    return float(np.concatenate(nearest).max())


def hausdorff_full(A: PointCloud, B: PointCloud, *, threads: int = 1) -> float:
    return max(hausdorff_semi(A, B, threads=threads), hausdorff_semi(B, A, threads=threads))


def cloud_norm(A: PointCloud) -> float:
    return float(A.norms().max())


def expand_cloud(cloud: PointCloud, J: int) -> PointCloud:
    """Null-expand every point of a truncated cloud into the window -J..J."""

    if cloud.m is None:
        if cloud.dimension != 2 * J + 1:
            raise DimensionError(f"Full-window cloud of dimension {cloud.dimension} is not on window {J}")
        return cloud
    if J < cloud.m:
        raise DimensionError(f"Cannot expand Truncated(m={cloud.m}) into window {J}")
    points = np.zeros((len(cloud), 2 * J + 1), dtype=np.complex128)
    points[:, J - cloud.m : J + cloud.m + 1] = cloud.points
    return PointCloud(points, meta=cloud.meta)


def sample_ball(n: int, dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian directions scaled to radius*sqrt(v), v uniform on [0, 1)."""

    raw = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    directions = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    radii = radius * np.sqrt(rng.random(n))
    return directions * radii[:, np.newaxis]


def burn_in_steps(eps: float, constants: DerivedConstants, contraction: float) -> int:
    return math.ceil(math.log(contraction) / math.log1p(2 * eps * constants.gap))


def _check_knobs(variant: Variant, params: ModelParams, knobs: CloudKnobs) -> None:
    if variant not in VARIANTS:
        raise ConfigError(f"Unknown cloud variant '{variant}'")
    if variant in TRUNCATED_VARIANTS:
        if knobs.m is None:
            raise ConfigError(f"variant {variant} needs a truncation m")
        if knobs.m < 1 or knobs.m > params.window:
            raise ConfigError(f"m={knobs.m} must lie in [1, {params.window}]")
    elif knobs.m is not None:
        raise ConfigError(f"variant {variant} does not take a truncation m")
    if variant not in RANDOM_VARIANTS and knobs.a != 0:
        raise ConfigError(f"variant {variant} is deterministic; a must be 0")
    if knobs.eps is not None and not knobs.eps > 0:
        raise ConfigError("eps must be > 0")
    if knobs.ref_substeps < 1:
        raise ConfigError("ref_substeps must be >= 1")


def _orbit(
    advance: Callable[[np.ndarray], np.ndarray], burn_in: int, collect: int
) -> Callable[[np.ndarray], np.ndarray]:
    def run(initial: np.ndarray) -> np.ndarray:
        values = initial
        for _ in range(burn_in):
            values = advance(values)
        kept = [values]
        for _ in range(collect - 1):
            values = advance(values)
            kept.append(values)
        return np.stack(kept, axis=1)

    return run


def _pullback(
    z: np.ndarray,
    params: ModelParams,
    cfg: IESConfig,
    a: float,
    m: Optional[int],
    collect: int,
) -> Callable[[np.ndarray], np.ndarray]:
    """Members start at -(burn_in + c)*eps for c < collect and all stop at time 0."""

    total = z.size - 1

    def run(initial: np.ndarray) -> np.ndarray:
        members, dim = initial.shape
        values = np.repeat(initial, collect, axis=0)
        starts = np.tile(collect - 1 - np.arange(collect), members)
        for step in range(1, total + 1):
            started = starts < step
            values[started] = picard_solve(
                values[started], random_drift_for(params, float(z[step]), a, m), cfg
            ).values
        return values.reshape(members, collect, dim)

    return run


def build_attractor_cloud(
    variant: Variant,
    params: ModelParams,
    recipe: CloudRecipe,
    knobs: CloudKnobs,
    *,
    constants: Optional[DerivedConstants] = None,
    path: Optional[OUPath] = None,
    threads: int = 1,
) -> PointCloud:
    _check_knobs(variant, params, knobs)
    constants = constants or compute_constants(params)
    eps = knobs.eps if knobs.eps is not None else constants.eps_star
    burn_in = recipe.burn_in if recipe.burn_in is not None else burn_in_steps(eps, constants, recipe.contraction)
    m = knobs.m
    dim = 2 * (params.window if m is None else m) + 1
    rng = seeded_rng(knobs.seed, INIT_STREAM, dim)
    initial = sample_ball(recipe.n_init, dim, constants.r_star, rng)
    cfg = IESConfig(eps=eps)
    logger.debug("building %s cloud: eps=%r burn_in=%d members=%d", variant, eps, burn_in, recipe.n_init)

    if variant in RANDOM_VARIANTS:
        check_step_preconditions(initial, constants.r_star, cfg, constants)
        total = burn_in + recipe.collect - 1
        if path is None:
            noise = NoiseConfig(a=knobs.a, seed=knobs.seed, dt=eps)
            path = sample_ou_path(-total * eps, 0.0, noise) if total else None
        elif total:
            if abs(path.dt - eps) > 1e-9 * eps:
                raise ConfigError(f"OU path step {path.dt!r} does not match eps={eps!r}")
            path = path.restrict(path.times[-1] - total * eps)
        z = path.z if path is not None and total else np.zeros(1)
        runner = _pullback(z, params, cfg, knobs.a, m, recipe.collect)
    elif variant in ("ies", "truncated_ies"):
        check_step_preconditions(initial, constants.r_star, cfg, constants)
        drift = drift_for(params, m)
        runner = _orbit(lambda values: picard_solve(values, drift, cfg).values, burn_in, recipe.collect)
    else:
        drift = drift_for(params, m)
        runner = _orbit(
            lambda values: rk4_values(values, drift, eps, knobs.ref_substeps), burn_in, recipe.collect
        )

    chunks = np.array_split(initial, min(max(threads, 1), recipe.n_init))
    orbits = ordered_map(runner, chunks, threads)
    points = np.concatenate(orbits, axis=0).reshape(-1, dim)
    meta = CloudMeta(
        variant=variant,
        eps=eps,
        m=m,
        a=knobs.a,
        seed=knobs.seed,
        burn_in=burn_in,
        collect=recipe.collect,
    )
    return PointCloud(points, m=m, meta=meta)


def collection_spacing(cloud: PointCloud) -> float:
    """Largest distance between consecutive collected iterates of one member."""

    collect = cloud.meta.collect if cloud.meta is not None else 1
    if collect < 2:
        return 0.0
    orbits = cloud.points.reshape(-1, collect, cloud.dimension)
    steps = np.diff(orbits, axis=1)
    return float(np.sqrt(np.sum(steps.real**2 + steps.imag**2, axis=2)).max())


def invariance_gap(
    cloud: PointCloud, params: ModelParams, *, ref_substeps: int = REF_SUBSTEPS, threads: int = 1
) -> float:
    """rho(A, S A) for one more step of the dynamics that produced the cloud."""

    if cloud.meta is None or cloud.meta.variant in RANDOM_VARIANTS:
        raise ConfigError("invariance check needs a deterministic cloud")
    drift = drift_for(params, cloud.m)
    if cloud.meta.variant in ("ies", "truncated_ies"):
        stepped = picard_solve(np.array(cloud.points), drift, IESConfig(eps=cloud.meta.eps)).values
    else:
        stepped = rk4_values(cloud.points, drift, cloud.meta.eps, ref_substeps)
    return hausdorff_full(cloud, PointCloud(stepped, m=cloud.m), threads=threads)


def trend_bounds(values: Sequence[float], slack: float = 0.1, floor: float = 0.0) -> list[float]:
    """Per-row ceiling of a non-increasing-within-slack trend; the first row is unconstrained."""

    bounds = [math.inf]
    for previous in list(values)[:-1]:
        bounds.append(max((1 + slack) * previous, floor))
    return bounds


def trend_holds(values: Sequence[float], slack: float = 0.1, floor: float = 0.0) -> bool:
    return all(value <= bound for value, bound in zip(values, trend_bounds(values, slack, floor)))


def _sweep_variants(axis: SweepAxis, knobs: CloudKnobs) -> tuple[Variant, Variant]:
    truncated = knobs.m is not None
    if axis == "epsilon":
        return ("truncated_ref" if truncated else "continuous_ref", "truncated_ies" if truncated else "ies")
    if axis == "eps_to_eps":
        variant = "truncated_ies" if truncated else "ies"
        return (variant, variant)
    if axis == "dimension":
        if knobs.a > 0:
            return ("random_pullback", "truncated_random_pullback")
        return ("ies", "truncated_ies")
    if axis == "noise":
        return (
            "truncated_ref" if truncated else "continuous_ref",
            "truncated_random_pullback" if truncated else "random_pullback",
        )
    if axis == "noise_to_noise":
        variant = "truncated_random_pullback" if truncated else "random_pullback"
        return (variant, variant)
    raise ConfigError(f"Unknown sweep axis '{axis}'")


def convergence_sweep(
    axis: SweepAxis,
    grid: Sequence[float],
    params: ModelParams,
    knobs: CloudKnobs,
    recipe: CloudRecipe,
    *,
    threads: int = 1,
) -> list[SweepRow]:
    """d(moving, reference) for each grid value, in grid order."""

    if not grid:
        raise ConfigError(f"sweep grid for axis {axis} is empty")
    constants = compute_constants(params)
    reference_variant, moving_variant = _sweep_variants(axis, knobs)

    if axis == "dimension":
        reference_knobs = knobs.with_updated(m=None)
    elif axis in ("epsilon", "eps_to_eps", "noise"):
        reference_knobs = knobs.with_updated(a=0.0)
    else:
        reference_knobs = knobs
    reference = build_attractor_cloud(
        reference_variant, params, recipe, reference_knobs, constants=constants, threads=threads
    )

    rows = []
    for value in grid:
        if axis in ("epsilon", "eps_to_eps"):
            moving_knobs = knobs.with_updated(eps=float(value), a=0.0)
        elif axis == "dimension":
            moving_knobs = knobs.with_updated(m=int(value))
        else:
            moving_knobs = knobs.with_updated(a=float(value))
        moving = build_attractor_cloud(
            moving_variant, params, recipe, moving_knobs, constants=constants, threads=threads
        )
        if moving.dimension != reference.dimension:
            moving = expand_cloud(moving, params.window)
        distance = hausdorff_semi(moving, reference, threads=threads)
        logger.debug("sweep %s: knob=%r d=%r", axis, value, distance)
        rows.append(SweepRow(knob=float(value), distance=distance))
    return rows


__all__ = [
    "build_attractor_cloud",
    "burn_in_steps",
    "cloud_norm",
    "collection_spacing",
    "convergence_sweep",
    "expand_cloud",
    "hausdorff_full",
    "hausdorff_semi",
    "invariance_gap",
    "sample_ball",
    "trend_bounds",
    "trend_holds",
]
