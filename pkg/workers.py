#!/usr/bin/env python3
"""Ordered fan-out over ensemble members."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CGL_THREADS"


def resolve_threads(configured: Optional[int] = None) -> int:
    """Worker cap: CGL_THREADS wins over the app config, which wins over the CPU count."""

    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value >= 1:
            return value
    if configured is not None and configured >= 1:
        return configured
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` keeping input order regardless of completion order."""

    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


__all__ = ["THREADS_ENV", "ordered_map", "resolve_threads"]
