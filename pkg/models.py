#!/usr/bin/env python3
"""Core models and validation helpers for cgl."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

DEFAULT_WINDOW = 128
CUTOFF_LIPSCHITZ = 1.5
# RK4 substeps per eps step of the reference-flow clouds
REF_SUBSTEPS = 100

Variant = Literal[
    "continuous_ref",
    "ies",
    "truncated_ies",
    "truncated_ref",
    "random_pullback",
    "truncated_random_pullback",
]
VARIANTS: Sequence[Variant] = (
    "continuous_ref",
    "ies",
    "truncated_ies",
    "truncated_ref",
    "random_pullback",
    "truncated_random_pullback",
)
TRUNCATED_VARIANTS = frozenset({"truncated_ies", "truncated_ref", "truncated_random_pullback"})
RANDOM_VARIANTS = frozenset({"random_pullback", "truncated_random_pullback"})

SweepAxis = Literal["epsilon", "dimension", "noise", "noise_to_noise", "eps_to_eps"]
SWEEP_AXES: Sequence[SweepAxis] = (
    "epsilon",
    "dimension",
    "noise",
    "noise_to_noise",
    "eps_to_eps",
)

Direction = Literal["to_u", "to_original"]
SamplerName = Literal["ball"]


class LatticeError(Exception):
    pass


class ValidationError(LatticeError, ValueError):
    pass


class ParameterError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class ConfigError(ValidationError):
    """Raised for malformed experiment configs; carries line/field context."""

    def __init__(
        self, message: str, *, line: int | None = None, field: str | None = None
    ) -> None:
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class NoConvergence(LatticeError):
    def __init__(
        self, message: str, *, step: int | None = None, iterations: int | None = None
    ) -> None:
        self.step = step
        self.iterations = iterations
        super().__init__(message)


class QuadratureError(LatticeError):
    pass


class DivergenceError(LatticeError):
    pass


class ExperimentError(LatticeError):
    """A numerical failure inside a named experiment."""

    def __init__(self, experiment: str, cause: Exception) -> None:
        self.experiment = experiment
        self.cause = cause
        super().__init__(f"{experiment}: {cause}")


def _frozen_complex(values: object) -> np.ndarray:
    array = np.array(values, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


def _require_finite_positive(value: float, label: str) -> float:
    number = float(value)
    if not math.isfinite(number) or number <= 0:
        raise ParameterError(f"{label} must be a positive number")
    return number


@dataclass(frozen=True, eq=False)
class LatticeState:
    """A finite complex vector standing for an l2 sequence.

    ``m is None`` marks a full computational window (sites -J..J); otherwise
    the state lives on the truncated lattice of 2m+1 sites.
    """

    values: np.ndarray
    m: Optional[int] = None

    def __post_init__(self) -> None:
        array = _frozen_complex(self.values)
        if array.ndim != 1 or array.size % 2 == 0:
            raise DimensionError("Lattice states need an odd number of sites")
        if not np.all(np.isfinite(array)):
            raise ValidationError("Lattice state has non-finite entries")
        if self.m is not None:
            if self.m < 1:
                raise DimensionError("Truncation half-width m must be >= 1")
            if array.size != 2 * self.m + 1:
                raise DimensionError(
                    f"Truncated(m={self.m}) state needs {2 * self.m + 1} entries, got {array.size}"
                )
        object.__setattr__(self, "values", array)

    @property
    def kind(self) -> Literal["full", "truncated"]:
        return "full" if self.m is None else "truncated"

    @property
    def window(self) -> int:
        return (self.values.size - 1) // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values.real**2 + self.values.imag**2)))

    def at(self, site: int) -> complex:
        if abs(site) > self.window:
            return 0j
        return complex(self.values[site + self.window])

    def with_values(self, values: object) -> "LatticeState":
        return LatticeState(values=np.asarray(values), m=self.m)

    @classmethod
    def zeros(cls, window: int, *, truncated: bool = False) -> "LatticeState":
        return cls(np.zeros(2 * window + 1), m=window if truncated else None)

    @classmethod
    def delta(
        cls,
        site: int,
        window: int,
        *,
        amplitude: complex = 1.0,
        truncated: bool = False,
    ) -> "LatticeState":
        values = np.zeros(2 * window + 1, dtype=np.complex128)
        values[site + window] = amplitude
        return cls(values, m=window if truncated else None)


def force_from_entries(entries: Mapping[int, complex], window: int) -> np.ndarray:
    """Place indexed force entries on the window -J..J."""

    force = np.zeros(2 * window + 1, dtype=np.complex128)
    for site, value in entries.items():
        if abs(site) > window:
            raise DimensionError(f"Force entry g.{site} lies outside the window |j| <= {window}")
        force[site + window] = value
    return force


@dataclass(frozen=True, eq=False)
class ModelParams:
    lam: float = 0.1
    mu: float = 0.2
    gamma: float = 1.0
    beta: float = 0.5
    k: float = 1.0
    nu: float = 0.3
    p: float = 2.0
    eta: float = 1.0
    window: int = DEFAULT_WINDOW
    g: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        _require_finite_positive(self.lam, "lambda")
        _require_finite_positive(self.gamma, "gamma")
        _require_finite_positive(self.k, "k")
        _require_finite_positive(self.p, "p")
        for label, value in (("mu", self.mu), ("beta", self.beta), ("nu", self.nu)):
            if not math.isfinite(float(value)):
                raise ParameterError(f"{label} must be finite")
        if not math.isfinite(float(self.eta)) or self.eta < 0:
            raise ParameterError("eta must be >= 0")
        if int(self.window) != self.window or self.window < 1:
            raise ParameterError("window must be an integer >= 1")
        if self.gamma <= 4 * self.lam:
            raise ParameterError("gamma must exceed 4*lambda")
        force = np.zeros(2 * self.window + 1) if self.g is None else self.g
        force = _frozen_complex(force)
        if force.shape != (2 * self.window + 1,):
            raise DimensionError(
                f"g must have {2 * self.window + 1} entries for window {self.window}"
            )
        if not np.all(np.isfinite(force)):
            raise ParameterError("g must be finite")
        object.__setattr__(self, "g", force)

    @property
    def gap(self) -> float:
        """The dissipation margin gamma - 4*lambda."""
        return self.gamma - 4 * self.lam

    @property
    def q(self) -> float:
        """Dual exponent (p+2)/(p+1) of the force norm."""
        return (self.p + 2) / (self.p + 1)

    def force(self, m: Optional[int] = None) -> np.ndarray:
        if m is None:
            return self.g
        if m > self.window:
            raise DimensionError(f"Truncation m={m} exceeds window {self.window}")
        return self.g[self.window - m : self.window + m + 1]

    def with_updated(self, **changes: object) -> "ModelParams":
        return replace(self, **changes)

    @classmethod
    def reference(cls, window: int = DEFAULT_WINDOW, **changes: object) -> "ModelParams":
        """The reference set P0 with g = delta_0."""

        params = dict(g=force_from_entries({0: 1.0}, window), window=window)
        params.update(changes)
        return cls(**params)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class DerivedConstants:
    linear_coeff: float
    nonlinear_coeff: float
    p: float
    eta: float
    gap: float
    g_l2: float
    site_masses: np.ndarray
    C_p: float
    c1: float
    c2: float
    c3: float
    r_star: float
    eps_star: float

    def M(self, r: float) -> float:
        return self.linear_coeff * r + self.nonlinear_coeff * r ** (self.p + 1) + self.g_l2

    def L(self, r: float) -> float:
        return self.linear_coeff + self.C_p * r**self.p * self.nonlinear_coeff

    def c1_m(self, m: int) -> float:
        window = (self.site_masses.size - 1) // 2
        if m > window:
            raise DimensionError(f"Truncation m={m} exceeds window {window}")
        return self.c3 * math.fsum(self.site_masses[window - m : window + m + 1])

    def r_star_m(self, m: int) -> float:
        return math.sqrt(self.eta + self.c1_m(m) / self.gap)

    def attractor_bound(self) -> float:
        return math.sqrt(self.c1 / self.gap)

    def attractor_bound_m(self, m: int) -> float:
        return math.sqrt(self.c1_m(m) / self.gap)

    def one_step_constant(self) -> float:
        """C0 = L_{r*} M_{r*} / 2, the bound on the scaled one-step defect."""
        return 0.5 * self.L(self.r_star) * self.M(self.r_star)


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth cutoff xi(|j|/l): 0 on [0,1], 1 on [2,inf), cubic smoothstep between."""

    l: int

    def __post_init__(self) -> None:
        if int(self.l) != self.l or self.l < 1:
            raise ParameterError("cutoff scale l must be a positive integer")

    @staticmethod
    def xi(s: np.ndarray | float) -> np.ndarray:
        t = np.clip(np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)

    def weights(self, sites: np.ndarray) -> np.ndarray:
        return self.xi(np.abs(sites) / self.l)

    @property
    def c2(self) -> float:
        return CUTOFF_LIPSCHITZ


@dataclass(frozen=True)
class IESConfig:
    eps: float
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    enforce_eps_star: bool = True

    def __post_init__(self) -> None:
        _require_finite_positive(self.eps, "eps")
        _require_finite_positive(self.fp_tol, "fp_tol")
        if self.fp_max_iter < 1:
            raise ParameterError("fp_max_iter must be >= 1")

    def with_updated(self, **changes: object) -> "IESConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Trajectory:
    states: tuple[LatticeState, ...]
    times: tuple[float, ...]
    step: float

    def __post_init__(self) -> None:
        if len(self.states) != len(self.times):
            raise ValidationError("Trajectory needs one time per state")

    @property
    def final(self) -> LatticeState:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.array([state.norm() for state in self.states])


@dataclass(frozen=True)
class NoiseConfig:
    a: float
    a_star: float = 1.0
    seed: int = 0
    dt: float = 0.01

    def __post_init__(self) -> None:
        _require_finite_positive(self.a_star, "a_star")
        _require_finite_positive(self.dt, "dt")
        if not math.isfinite(self.a) or self.a < 0 or self.a > self.a_star:
            raise ParameterError(f"noise intensity a must lie in [0, a_star={self.a_star}]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    def with_updated(self, **changes: object) -> "NoiseConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class OUPath:
    """Wiener increments and the stationary OU functional on a uniform grid."""

    times: np.ndarray
    w: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float, copy=True)
        w = np.array(self.w, dtype=float, copy=True)
        z = np.array(self.z, dtype=float, copy=True)
        if times.ndim != 1 or times.size < 2:
            raise ValidationError("OU path needs at least two grid points")
        if z.shape != times.shape or w.shape != (times.size - 1,):
            raise ValidationError("OU path arrays have mismatched lengths")
        for array in (times, w, z):
            array.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def steps(self) -> int:
        return self.times.size - 1

    def restrict(self, t_begin: float) -> "OUPath":
        """Sub-path on [t_begin, t_end]; the grid must contain t_begin."""

        tol = 1e-9 * max(1.0, abs(t_begin))
        start = int(np.searchsorted(self.times, t_begin - tol))
        if start >= self.times.size - 1 or abs(self.times[start] - t_begin) > tol:
            raise ValidationError(f"OU path grid does not contain t={t_begin}")
        return OUPath(self.times[start:], self.w[start:], self.z[start:])

    def negated(self) -> "OUPath":
        """The mirrored sample path -omega."""
        return OUPath(self.times, -self.w, -self.z)


@dataclass(frozen=True)
class CloudMeta:
    variant: Variant
    eps: float
    m: Optional[int] = None
    a: float = 0.0
    seed: int = 0
    burn_in: int = 0
    collect: int = 1


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite set of lattice states (rows of ``points``) of one dimension."""

    points: np.ndarray
    m: Optional[int] = None
    meta: Optional[CloudMeta] = None

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.complex128, copy=True)
        if points.ndim == 1:
            points = points[np.newaxis, :]
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValidationError("Point cloud must be a nonempty set of states")
        if points.shape[1] % 2 == 0:
            raise DimensionError("Cloud points need an odd number of sites")
        if self.m is not None and points.shape[1] != 2 * self.m + 1:
            raise DimensionError(f"Truncated(m={self.m}) cloud needs {2 * self.m + 1} sites")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points.real**2 + self.points.imag**2, axis=1))

    def states(self) -> list[LatticeState]:
        return [LatticeState(row, m=self.m) for row in self.points]

    @classmethod
    def from_states(
        cls, states: Sequence[LatticeState], meta: Optional[CloudMeta] = None
    ) -> "PointCloud":
        if not states:
            raise ValidationError("Point cloud must be a nonempty set of states")
        kinds = {state.m for state in states}
        if len(kinds) != 1:
            raise DimensionError("Cloud points must share one lattice kind")
        return cls(np.stack([state.values for state in states]), m=states[0].m, meta=meta)


@dataclass(frozen=True)
class CloudRecipe:
    n_init: int = 64
    burn_in: Optional[int] = None
    collect: int = 16
    sampler: SamplerName = "ball"
    contraction: float = 1e6

    def __post_init__(self) -> None:
        if self.n_init < 1 or self.collect < 1:
            raise ParameterError("recipe needs n_init >= 1 and collect >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")
        if self.sampler != "ball":
            raise ParameterError(f"Unknown sampler '{self.sampler}'")
        if not self.contraction > 1:
            raise ParameterError("contraction must exceed 1")

    def with_updated(self, **changes: object) -> "CloudRecipe":
        return replace(self, **changes)


@dataclass(frozen=True)
class CloudKnobs:
    eps: Optional[float] = None
    m: Optional[int] = None
    a: float = 0.0
    seed: int = 0
    ref_substeps: int = REF_SUBSTEPS

    def with_updated(self, **changes: object) -> "CloudKnobs":
        return replace(self, **changes)


@dataclass(frozen=True)
class SweepRow:
    knob: float
    distance: float


@dataclass
class ResultRecord:
    experiment: str
    knob: str
    value: str
    measure: float
    bound: float
    passed: bool
    seconds: Optional[float] = None


__all__ = [
    "CUTOFF_LIPSCHITZ",
    "DEFAULT_WINDOW",
    "REF_SUBSTEPS",
    "CloudKnobs",
    "CloudMeta",
    "CloudRecipe",
    "ConfigError",
    "CutoffProfile",
    "DerivedConstants",
    "DimensionError",
    "Direction",
    "DivergenceError",
    "ExperimentError",
    "IESConfig",
    "LatticeError",
    "LatticeState",
    "ModelParams",
    "NoConvergence",
    "NoiseConfig",
    "OUPath",
    "ParameterError",
    "PointCloud",
    "QuadratureError",
    "RANDOM_VARIANTS",
    "ResultRecord",
    "SWEEP_AXES",
    "SweepAxis",
    "SweepRow",
    "TRUNCATED_VARIANTS",
    "Trajectory",
    "VARIANTS",
    "ValidationError",
    "Variant",
    "force_from_entries",
]
