#!/usr/bin/env python3
"""Truncated (2m+1)-site systems with wrap-around coupling."""

from __future__ import annotations

from typing import Optional

import numpy as np

from integrators import implicit_euler_step, reference_solve
from lattice import drift_for, forward_difference_values, laplacian_values, require_full
from models import DerivedConstants, DimensionError, IESConfig, LatticeState, ModelParams


def _require_truncated(z: LatticeState, m: Optional[int] = None) -> int:
    if z.m is None:
        raise DimensionError("Expected a truncated state")
    if m is not None and z.m != m:
        raise DimensionError(f"Expected Truncated(m={m}), got Truncated(m={z.m})")
    return z.m


def apply_laplacian_truncated(z: LatticeState) -> LatticeState:
    _require_truncated(z)
    return z.with_values(laplacian_values(z.values, periodic=True))


def forward_difference_truncated(z: LatticeState) -> LatticeState:
    _require_truncated(z)
    return z.with_values(forward_difference_values(z.values, periodic=True))


def truncated_vector_field(z: LatticeState, params: ModelParams) -> LatticeState:
    m = _require_truncated(z)
    return z.with_values(drift_for(params, m)(z.values))


def truncated_ies_step(
    z_prev: LatticeState,
    params: ModelParams,
    cfg: IESConfig,
    m: int,
    *,
    constants: Optional[DerivedConstants] = None,
) -> LatticeState:
    _require_truncated(z_prev, m)
    return implicit_euler_step(z_prev, params, cfg, constants=constants)


def null_expansion(z: LatticeState, J: int) -> LatticeState:
    m = _require_truncated(z)
    if J < m:
        raise DimensionError(f"Cannot expand Truncated(m={m}) into window {J}")
    values = np.zeros(2 * J + 1, dtype=np.complex128)
    values[J - m : J + m + 1] = z.values
    return LatticeState(values)


def restrict(u: LatticeState, m: int) -> LatticeState:
    require_full(u)
    J = u.window
    if m < 1 or m > J:
        raise DimensionError(f"Cannot restrict window {J} to m={m}")
    return LatticeState(u.values[J - m : J + m + 1], m=m)


def truncated_reference_solve(
    z0: LatticeState, t_end: float, params: ModelParams, m: int, substeps: int
) -> LatticeState:
    _require_truncated(z0, m)
    return reference_solve(z0, t_end, params, substeps)


__all__ = [
    "apply_laplacian_truncated",
    "forward_difference_truncated",
    "null_expansion",
    "restrict",
    "truncated_ies_step",
    "truncated_reference_solve",
    "truncated_vector_field",
]
