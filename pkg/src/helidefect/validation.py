"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import math

import numpy as np

from .errors import EpsilonUnderResolved, GridMismatch, InsufficientData, InvalidField, InvalidParams
from .grid import Field


def check_field(f, rank=None, torus=None):
    """Return ``f`` if it is a finite field of the requested rank and domain type."""
    if not isinstance(f, Field):
        raise InvalidField(f"expected a Field, got {type(f).__name__}")
    if rank is not None and f.rank != rank:
        raise InvalidField(f"expected a rank-{rank} field, got rank {f.rank}")
    if torus is True and not f.grid.is_torus:
        raise GridMismatch("a fully periodic grid is required")
    if torus is False and f.grid.is_torus:
        raise GridMismatch("a slab grid is required")
    return f


def check_same_grid(*fields):
    grids = {f.grid for f in fields}
    if len(grids) > 1:
        raise GridMismatch("fields live on different grids")
    return fields[0].grid if fields else None


def check_series(series, min_len=1, rank=None, torus=None):
    """Normalise a single field or a sequence of fields to a list on one grid."""
    items = list(series) if isinstance(series, (list, tuple)) else [series]
    if len(items) < min_len:
        raise InsufficientData(f"need at least {min_len} fields, got {len(items)}")
    for f in items:
        check_field(f, rank, torus)
    check_same_grid(*items)
    return items


def check_positive(name, value, allow_zero=False):
    v = float(value)
    ok = v >= 0 if allow_zero else v > 0
    if not (ok and math.isfinite(v)):
        raise InvalidParams(f"{name} must be {'non-negative' if allow_zero else 'positive'} and finite")
    return v


def check_ladder(epsilons, grid, min_rungs=4):
    eps = [check_positive("epsilon", e) for e in epsilons]
    if len(eps) < min_rungs:
        raise InvalidParams(f"ladder needs at least {min_rungs} rungs")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidParams("ladder must be strictly decreasing")
    floor = 2.0 * max(grid.spacing)
    if eps[-1] < floor * (1 - 1e-9):
        raise EpsilonUnderResolved(f"epsilon {eps[-1]} below 2h = {floor}")
    return eps


def check_seed(seed):
    """Accept None, an int, a sequence of ints or a Generator; return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
