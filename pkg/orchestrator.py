#!/usr/bin/env python3
"""Orchestrator for cgl experiments."""

from __future__ import annotations

import logging
import math
import sys
import time
from pathlib import Path
from typing import Callable, List, Optional, TypeVar

import numpy as np

from attractor import (
    build_attractor_cloud,
    cloud_norm,
    collection_spacing,
    convergence_sweep,
    hausdorff_full,
    invariance_gap,
    sample_ball,
    trend_bounds,
)
from config import Config, load_config
from integrators import (
    default_reference_substeps,
    fit_order,
    global_bound,
    global_error,
    one_step_defect,
    reference_solve,
    snap_step,
)
from lattice import compute_constants
from models import (
    RANDOM_VARIANTS,
    TRUNCATED_VARIANTS,
    CloudKnobs,
    ConfigError,
    ExperimentError,
    LatticeError,
    LatticeState,
    NoiseConfig,
    ResultRecord,
    SweepAxis,
    ValidationError,
)
from run_config import RunConfig
from stochastic import (
    SAMPLE_STREAM,
    absorbing_radius,
    ou_from_increments,
    radius_ensemble,
    radius_path_span,
    sample_ou_path,
    seeded_rng,
)
from store import save_cloud, save_records
from workers import ordered_map

logger = logging.getLogger(__name__)

T = TypeVar("T")

COMMANDS = {
    "constants": "cmd_constants",
    "error-order": "cmd_error_order",
    "attractor": "cmd_attractor",
    "sweep-eps": "cmd_sweep_eps",
    "sweep-m": "cmd_sweep_m",
    "sweep-noise": "cmd_sweep_noise",
    "ou-stats": "cmd_ou_stats",
    "radius": "cmd_radius",
}

ONE_STEP_SLACK = 1.05
ORDER_TOLERANCE = 0.2
SWEEP_M_FINAL = 1e-3
TAIL_BOUND = 1e-8
COLLAPSE_BOUND = 1e-6
ZERO_NOISE_BOUND = 1e-9
OU_TOLERANCE = 0.02
RADIUS_ZERO_TOL = 1e-8
RADIUS_CONTINUITY = 0.05
MAX_EXIT_CODE = 125


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


class Orchestrator:
    def __init__(self, run_config: Optional[RunConfig] = None, *, config: Optional[Config] = None) -> None:
        self.config = config or load_config()
        _configure_logging(self.config.log_level)
        self.run_config = run_config or RunConfig()
        self.params = self.run_config.params
        self.constants = compute_constants(self.params)
        self.threads = self.config.threads

    def run_cli(self, command: str) -> int:
        records = self.run_command(command)
        path = self.results_path(command)
        save_records(path, records)
        self._print_records(records)
        failures = sum(not record.passed for record in records)
        print(f"wrote {len(records)} records to {path}")
        if failures:
            print(f"{failures} check(s) failed")
        return min(failures, MAX_EXIT_CODE)

    def run_command(self, command: str) -> List[ResultRecord]:
        method_name = COMMANDS.get(command)
        if method_name is None:
            raise ConfigError(f"Unknown command '{command}'")
        logger.info("experiment %s: start", command)
        started = time.perf_counter()
        try:
            records = getattr(self, method_name)()
        except ValidationError:
            raise
        except LatticeError as exc:
            raise ExperimentError(command, exc) from exc
        logger.info("experiment %s: %d records in %.3fs", command, len(records), time.perf_counter() - started)
        return records

    def output_prefix(self, command: str) -> Path:
        prefix = self.run_config.output.prefix
        if prefix:
            return Path(prefix).expanduser()
        return self.config.output_dir / command

    def results_path(self, command: str) -> Path:
        prefix = self.output_prefix(command)
        return prefix.with_name(prefix.name + ".csv")

    def cloud_path(self, command: str) -> Path:
        prefix = self.output_prefix(command)
        return prefix.with_name(prefix.name + ".cloud.txt")

    def _timed(self, fn: Callable[[], T]) -> tuple[T, Optional[float]]:
        started = time.perf_counter()
        value = fn()
        if not self.run_config.output.timings:
            return value, None
        return value, time.perf_counter() - started

    @staticmethod
    def _record(
        experiment: str,
        knob: str,
        value: object,
        measure: float,
        bound: float,
        passed: bool,
        seconds: Optional[float] = None,
    ) -> ResultRecord:
        text = repr(value) if isinstance(value, float) else str(value)
        return ResultRecord(
            experiment=experiment,
            knob=knob,
            value=text,
            measure=float(measure),
            bound=float(bound),
            passed=bool(passed),
            seconds=seconds,
        )

    @staticmethod
    def _print_records(records: List[ResultRecord]) -> None:
        for record in records:
            status = "ok" if record.passed else "FAIL"
            print(
                f"{record.experiment:<28} {record.knob}={record.value:<24} "
                f"measure={record.measure!r} bound={record.bound!r} {status}"
            )

    def _params_label(self) -> str:
        params = self.params
        return (
            f"lambda={params.lam!r};mu={params.mu!r};gamma={params.gamma!r};beta={params.beta!r};"
            f"k={params.k!r};nu={params.nu!r};p={params.p!r};eta={params.eta!r};window={params.window}"
        )

    def cmd_constants(self) -> List[ResultRecord]:
        c, seconds = self._timed(lambda: compute_constants(self.params))
        label = self._params_label()
        radius = c.r_star + 1
        M1 = c.M(radius)
        L1 = c.L(radius)
        return [
            self._record("constants.c1", "params", label, c.c1, 0.0, c.c1 >= 0, seconds),
            self._record("constants.c3", "params", label, c.c3, 0.0, c.c3 > 0, seconds),
            self._record(
                "constants.r_star", "params", label, c.r_star, c.attractor_bound(),
                c.r_star >= c.attractor_bound(), seconds,
            ),
            self._record("constants.eps_star", "params", label, c.eps_star, 0.0, c.eps_star > 0, seconds),
            self._record(
                "constants.M", "r", radius, M1, 1.0 / c.eps_star,
                M1 <= (1.0 / c.eps_star) * (1 + 1e-12), seconds,
            ),
            self._record(
                "constants.L", "r", radius, L1, 1.0 / c.eps_star - 1.0,
                L1 <= (1.0 / c.eps_star - 1.0) * (1 + 1e-12), seconds,
            ),
        ]

    def _initial_samples(self) -> List[LatticeState]:
        run = self.run_config.run
        rng = seeded_rng(run.seed, SAMPLE_STREAM)
        points = sample_ball(run.samples, 2 * self.params.window + 1, self.constants.r_star, rng)
        return [LatticeState(point) for point in points]

    def cmd_error_order(self) -> List[ResultRecord]:
        run = self.run_config.run
        c = self.constants
        params = self.params
        samples = self._initial_samples()
        eps_grid = [c.eps_star * 2.0**-k for k in run.eps_exponents]
        records: List[ResultRecord] = []

        def defects_for(y: LatticeState) -> List[float]:
            return [one_step_defect(y, eps, params, substeps=run.substeps) for eps in eps_grid]

        defects, seconds = self._timed(lambda: np.array(self._map(defects_for, samples)))
        worst = defects.max(axis=0)
        ceiling = c.one_step_constant() * ONE_STEP_SLACK
        for eps, defect in zip(eps_grid, worst):
            scaled = defect / eps**2
            records.append(self._record("error_order.one_step", "eps", eps, scaled, ceiling, scaled <= ceiling, seconds))
        slope = fit_order(eps_grid, worst)
        records.append(
            self._record(
                "error_order.one_step_slope", "eps_exponents", _join(run.eps_exponents), slope, 2.0,
                _order_ok(slope, 2.0, worst), seconds,
            )
        )

        T = run.T
        steps = [snap_step(T, eps) for eps in eps_grid]

        def errors_for(y: LatticeState) -> List[float]:
            reference = reference_solve(y, T, params, default_reference_substeps(T))
            return [global_error(y, T, eps, params, reference=reference) for eps in steps]

        errors, seconds = self._timed(lambda: np.array(self._map(errors_for, samples)))
        worst = errors.max(axis=0)
        for eps, error in zip(steps, worst):
            bound = global_bound(eps, T, c)
            records.append(self._record("error_order.global", "eps", eps, error, bound, error <= bound, seconds))
        slope = fit_order(steps, worst)
        records.append(
            self._record(
                "error_order.global_slope", "T", T, slope, 1.0, _order_ok(slope, 1.0, worst), seconds,
            )
        )
        return records

    def _knobs(self, *, truncated: bool = False, a: float = 0.0) -> CloudKnobs:
        run = self.run_config.run
        return CloudKnobs(eps=run.eps, m=run.m if truncated else None, a=a, seed=run.seed)

    def cmd_attractor(self) -> List[ResultRecord]:
        run = self.run_config.run
        variant = run.variant
        if variant in RANDOM_VARIANTS:
            raise ConfigError("attractor runs deterministic variants; use sweep-noise for random clouds", field="run.variant")
        truncated = variant in TRUNCATED_VARIANTS
        knobs = self._knobs(truncated=truncated)
        c = self.constants
        cloud, seconds = self._timed(
            lambda: build_attractor_cloud(
                variant, self.params, self.run_config.recipe, knobs, constants=c, threads=self.threads
            )
        )
        meta = cloud.meta
        records: List[ResultRecord] = []
        c1 = c.c1_m(run.m) if truncated else c.c1
        norm = cloud_norm(cloud)
        bound = c1 / c.gap + 0.01
        records.append(self._record("attractor.norm_sq", "variant", variant, norm**2, bound, norm**2 <= bound, seconds))

        if not np.any(self.params.force(knobs.m)):
            decay = c.r_star * (1 + 2 * meta.eps * c.gap) ** (-meta.burn_in / 2) + 1e-12
            records.append(self._record("attractor.decay", "burn_in", meta.burn_in, norm, decay, norm <= decay, seconds))
            records.append(
                self._record("attractor.collapse", "burn_in", meta.burn_in, norm, COLLAPSE_BOUND, norm <= COLLAPSE_BOUND, seconds)
            )

        half = (cloud.dimension - 1) // 2
        if run.tail_site <= half:
            sites = np.abs(np.arange(-half, half + 1))
            outer = cloud.points[:, sites >= run.tail_site]
            tail = float(np.max(np.sum(outer.real**2 + outer.imag**2, axis=1)))
            records.append(self._record("attractor.tail", "site", run.tail_site, tail, TAIL_BOUND, tail < TAIL_BOUND, seconds))

        spacing = collection_spacing(cloud)
        gap = invariance_gap(cloud, self.params, ref_substeps=knobs.ref_substeps, threads=self.threads)
        ceiling = 2 * spacing + 1e-12
        records.append(self._record("attractor.invariance", "collect", meta.collect, gap, ceiling, gap <= ceiling, seconds))

        if self.run_config.output.dump_cloud:
            save_cloud(self.cloud_path("attractor"), cloud)
        return records

    def _sweep_records(
        self,
        experiment: str,
        knob: str,
        axis: SweepAxis,
        grid: List[float],
        knobs: CloudKnobs,
    ) -> List[ResultRecord]:
        sweep = self.run_config.sweep
        rows, seconds = self._timed(
            lambda: convergence_sweep(
                axis, grid, self.params, knobs, self.run_config.recipe, threads=self.threads
            )
        )
        distances = [row.distance for row in rows]
        bounds = trend_bounds(distances, sweep.slack, sweep.floor)
        return [
            self._record(experiment, knob, _knob_value(row.knob, knob), row.distance, bound, row.distance <= bound, seconds)
            for row, bound in zip(rows, bounds)
        ]

    def cmd_sweep_eps(self) -> List[ResultRecord]:
        run = self.run_config.run
        grid = [self.constants.eps_star * 2.0**-k for k in run.sweep_eps_exponents]
        return self._sweep_records("sweep_eps.distance", "eps", "epsilon", grid, self._knobs())

    def cmd_sweep_m(self) -> List[ResultRecord]:
        run = self.run_config.run
        records = self._sweep_records(
            "sweep_m.distance", "m", "dimension", [float(m) for m in run.m_grid], self._knobs()
        )
        final = records[-1].measure
        records.append(
            self._record("sweep_m.final", "m", run.m_grid[-1], final, SWEEP_M_FINAL, final < SWEEP_M_FINAL, records[-1].seconds)
        )
        return records

    def cmd_sweep_noise(self) -> List[ResultRecord]:
        run = self.run_config.run
        grid = list(run.a_grid)
        records = self._sweep_records("sweep_noise.full", "a", "noise", grid, self._knobs())
        records += self._sweep_records("sweep_noise.truncated", "a", "noise", grid, self._knobs(truncated=True))

        recipe = self.run_config.recipe

        def zero_noise_gap() -> float:
            knobs = self._knobs()
            random_cloud = build_attractor_cloud(
                "random_pullback", self.params, recipe, knobs, constants=self.constants, threads=self.threads
            )
            ies_cloud = build_attractor_cloud(
                "ies", self.params, recipe, knobs, constants=self.constants, threads=self.threads
            )
            return hausdorff_full(random_cloud, ies_cloud, threads=self.threads)

        gap, seconds = self._timed(zero_noise_gap)
        records.append(self._record("sweep_noise.zero", "a", 0.0, gap, ZERO_NOISE_BOUND, gap < ZERO_NOISE_BOUND, seconds))
        return records

    def cmd_ou_stats(self) -> List[ResultRecord]:
        run = self.run_config.run
        dt = run.ou_dt
        cfg = NoiseConfig(a=0.0, seed=run.seed, dt=dt)
        path, seconds = self._timed(lambda: sample_ou_path(0.0, run.ou_samples * dt, cfg))
        z = path.z
        records: List[ResultRecord] = []

        variance = float(np.var(z))
        records.append(
            self._record("ou.variance", "samples", z.size, variance, 0.5, abs(variance - 0.5) <= OU_TOLERANCE, seconds)
        )
        lag = max(1, round(1.0 / dt))
        correlation = float(np.corrcoef(z[:-lag], z[lag:])[0, 1])
        expected = math.exp(-lag * dt)
        records.append(
            self._record(
                "ou.autocorr", "lag", lag * dt, correlation, expected,
                abs(correlation - expected) <= OU_TOLERANCE, seconds,
            )
        )

        elapsed = path.times - path.times[0]
        ratios = [float(np.max(np.abs(z[elapsed <= horizon]))) / horizon for horizon in run.growth_horizons]
        bounds = trend_bounds(ratios, 0.0)
        for horizon, ratio, bound in zip(run.growth_horizons, ratios, bounds):
            records.append(self._record("ou.growth", "T", horizon, ratio, bound, ratio < bound, seconds))

        rebuilt = ou_from_increments(z[0], path.w, dt)
        mismatch = float(np.max(np.abs(rebuilt - z)))
        records.append(self._record("ou.reconstruct", "samples", z.size, mismatch, 0.0, mismatch == 0.0, seconds))
        return records

    def cmd_radius(self) -> List[ResultRecord]:
        run = self.run_config.run
        c = self.constants
        params = self.params
        span = radius_path_span(c, run.radius_dt)
        limit = params.eta + c.c1 / c.gap
        records: List[ResultRecord] = []

        def zero_radius() -> float:
            path = sample_ou_path(-span, 0.0, NoiseConfig(a=0.0, seed=run.seed, dt=run.radius_dt))
            return absorbing_radius(0.0, path, params, c)

        value, seconds = self._timed(zero_radius)
        records.append(
            self._record(
                "radius.zero", "a", 0.0, value, limit,
                abs(value - limit) <= RADIUS_ZERO_TOL * max(1.0, limit), seconds,
            )
        )

        means, seconds = self._timed(
            lambda: radius_ensemble(
                run.radius_a_grid, params, n_paths=run.radius_paths, seed=run.seed,
                dt=run.radius_dt, threads=self.threads,
            )
        )
        previous: Optional[float] = None
        for a, mean in zip(run.radius_a_grid, means):
            if previous is None:
                records.append(
                    self._record(
                        "radius.mean", "a", a, mean, limit,
                        abs(mean - limit) <= RADIUS_CONTINUITY * limit, seconds,
                    )
                )
            else:
                records.append(self._record("radius.mean", "a", a, mean, previous, mean > previous, seconds))
            previous = mean
        return records

    def _map(self, fn: Callable[[LatticeState], T], items: List[LatticeState]) -> List[T]:
        return ordered_map(fn, items, self.threads)


def _join(values) -> str:
    return " ".join(str(value) for value in values)


def _knob_value(value: float, knob: str) -> object:
    return int(value) if knob == "m" else value


def _order_ok(slope: float, expected: float, errors: np.ndarray) -> bool:
    if not np.any(errors):
        return True
    return math.isfinite(slope) and abs(slope - expected) <= ORDER_TOLERANCE


__all__ = ["COMMANDS", "Orchestrator"]
