#!/usr/bin/env python3
"""Lattice operators, the Ginzburg-Landau vector field and derived constants."""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Callable, Optional

import numpy as np

from models import (
    CutoffProfile,
    DerivedConstants,
    DimensionError,
    LatticeState,
    ModelParams,
    ParameterError,
    CUTOFF_LIPSCHITZ,
)

logger = logging.getLogger(__name__)

Drift = Callable[[np.ndarray], np.ndarray]


def laplacian_values(values: np.ndarray, *, periodic: bool = False) -> np.ndarray:
    """Second difference -u_{j-1} + 2u_j - u_{j+1} along the last axis."""

    if periodic:
        return 2.0 * values - np.roll(values, 1, axis=-1) - np.roll(values, -1, axis=-1)
    out = 2.0 * values
    out[..., 1:] -= values[..., :-1]
    out[..., :-1] -= values[..., 1:]
    return out


def forward_difference_values(values: np.ndarray, *, periodic: bool = False) -> np.ndarray:
    if periodic:
        return np.roll(values, -1, axis=-1) - values
    out = -values.copy()
    out[..., :-1] += values[..., 1:]
    return out


def nonlinear_values(values: np.ndarray, p: float) -> np.ndarray:
    """|u|^p u evaluated as (|u|^2)^(p/2) u."""

    return (values.real**2 + values.imag**2) ** (0.5 * p) * values


def field_values(
    values: np.ndarray,
    params: ModelParams,
    force: np.ndarray,
    *,
    periodic: bool = False,
) -> np.ndarray:
    return (
        complex(params.lam, params.mu) * laplacian_values(values, periodic=periodic)
        - complex(params.gamma, params.beta) * values
        - complex(params.k, params.nu) * nonlinear_values(values, params.p)
        + force
    )


def drift_for(params: ModelParams, m: Optional[int] = None) -> Drift:
    """Return the array-level vector field of the full (m=None) or truncated system."""

    force = params.force(m)
    periodic = m is not None

    def drift(values: np.ndarray) -> np.ndarray:
        return field_values(values, params, force, periodic=periodic)

    return drift


def require_full(u: LatticeState, params: Optional[ModelParams] = None) -> None:
    if u.m is not None:
        raise DimensionError("Expected a full-window state")
    if params is not None and u.window != params.window:
        raise DimensionError(
            f"State window {u.window} does not match the model window {params.window}"
        )


def require_matching(u: LatticeState, params: ModelParams) -> None:
    """Check that a state of either kind fits the model's lattice."""

    if u.m is None:
        require_full(u, params)
    elif u.m > params.window:
        raise DimensionError(f"Truncation m={u.m} exceeds window {params.window}")


def apply_laplacian(u: LatticeState) -> LatticeState:
    require_full(u)
    return u.with_values(laplacian_values(u.values))


def forward_difference(u: LatticeState) -> LatticeState:
    require_full(u)
    return u.with_values(forward_difference_values(u.values))


def vector_field(u: LatticeState, params: ModelParams) -> LatticeState:
    require_full(u, params)
    return u.with_values(drift_for(params)(u.values))


def state_field(u: LatticeState, params: ModelParams) -> LatticeState:
    """F or F_m depending on the kind of ``u``."""

    require_matching(u, params)
    return u.with_values(drift_for(params, u.m)(u.values))


def compute_constants(params: ModelParams) -> DerivedConstants:
    gap = params.gap
    if gap <= 0:
        raise ParameterError("gamma must exceed 4*lambda")
    p = float(params.p)
    q = params.q
    c3 = (p + 1) / (p + 2) * (params.k * (p + 2)) ** (-1.0 / (p + 1))
    site_masses = np.abs(params.g) ** q
    site_masses.setflags(write=False)
    c1 = c3 * math.fsum(site_masses)
    r_star = math.sqrt(params.eta + c1 / gap)
    linear_coeff = 4 * params.lam + 4 * abs(params.mu) + params.gamma + abs(params.beta)
    nonlinear_coeff = params.k + abs(params.nu)
    constants = DerivedConstants(
        linear_coeff=linear_coeff,
        nonlinear_coeff=nonlinear_coeff,
        p=p,
        eta=float(params.eta),
        gap=gap,
        g_l2=float(np.linalg.norm(params.g)),
        site_masses=site_masses,
        C_p=2 * (p + 1),
        c1=c1,
        c2=CUTOFF_LIPSCHITZ,
        c3=c3,
        r_star=r_star,
        eps_star=0.0,
    )
    radius = r_star + 1
    eps_star = min(1.0 / constants.M(radius), 1.0 / (1.0 + constants.L(radius)))
    constants = replace(constants, eps_star=eps_star)
    logger.debug("constants: c1=%r r*=%r eps*=%r", c1, r_star, eps_star)
    return constants


def lipschitz_gap(u: LatticeState, v: LatticeState, params: ModelParams) -> float:
    if u.m != v.m or u.values.size != v.values.size:
        raise DimensionError("States must share one lattice")
    diff = state_field(u, params).values - state_field(v, params).values
    return float(np.linalg.norm(diff))


def tail_mass(u: LatticeState, cutoff: CutoffProfile) -> float:
    weights = cutoff.weights(u.sites)
    return float(np.sum(weights * (u.values.real**2 + u.values.imag**2)))


def tail_sum(u: LatticeState, site: int) -> float:
    """Plain tail sum over |j| >= site."""

    mask = np.abs(u.sites) >= site
    return float(np.sum(np.abs(u.values[mask]) ** 2))


def absorbing_time(r: float, params: ModelParams, constants: Optional[DerivedConstants] = None) -> float:
    """Time after which the continuous flow maps B_r into B_{r*}."""

    constants = constants or compute_constants(params)
    if r * r <= constants.r_star**2 * (1 + 1e-12):
        return 0.0
    excess = r * r - constants.c1 / constants.gap
    if params.eta == 0:
        return math.inf
    return max(0.0, (math.log(params.eta) - math.log(excess)) / (-2 * constants.gap))


def energy_bound(
    r0_sq: float, t: float, params: ModelParams, constants: Optional[DerivedConstants] = None
) -> float:
    """Gronwall envelope of ||u(t)||^2 for data with ||u0||^2 = r0_sq."""

    constants = constants or compute_constants(params)
    rate = -2 * constants.gap
    decay = math.exp(rate * t)
    return r0_sq * decay + (2 * constants.c1 / rate) * (decay - 1)


__all__ = [
    "Drift",
    "absorbing_time",
    "apply_laplacian",
    "compute_constants",
    "drift_for",
    "energy_bound",
    "field_values",
    "forward_difference",
    "forward_difference_values",
    "laplacian_values",
    "lipschitz_gap",
    "nonlinear_values",
    "require_full",
    "require_matching",
    "state_field",
    "tail_mass",
    "tail_sum",
    "vector_field",
]
