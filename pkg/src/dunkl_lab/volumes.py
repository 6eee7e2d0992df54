"""Weighted volumes of Euclidean balls and their group orbits.

omega(B(x, r)) and omega(theta(B(x, r))) are computed by nested 1-D
adaptive quadrature (QUADPACK), one level per coordinate, with explicit
breakpoints wherever a reflection hyperplane or a ball edge crosses the
integration segment.  Closed forms exist only in special cases, so tests
use those as oracles rather than the implementation using them.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate as _si

from .reflection import RootSystem, WeylGroup, weight

_QUAD_LIMIT = 200


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the best estimate and the achieved absolute error so callers
    can decide whether to proceed anyway.
    """

    def __init__(self, message, estimate, achieved_abserr):
        super().__init__(message)
        self.estimate = estimate
        self.achieved_abserr = achieved_abserr


def _merge_intervals(pairs: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pairs = sorted((lo, hi) for lo, hi in pairs if hi > lo)
    merged: list[list[float]] = []
    for lo, hi in pairs:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def _segment_breaks(system: RootSystem, prefix: np.ndarray, axis: int,
                    lo: float, hi: float) -> list[float]:
    """Points in (lo, hi) where a singular hyperplane crosses the segment
    {x: x[:axis] = prefix, x[axis] = s, rest fixed later}.  Only crossings
    expressible from the known coordinates are usable: a root contributes
    once all its nonzero coordinates are at or before `axis`."""
    breaks = []
    for row, k in zip(system.positive_roots, system.positive_multiplicities):
        if k == 0.0 or abs(row[axis]) < 1e-14:
            continue
        if np.any(np.abs(row[axis + 1:]) > 1e-14):
            continue
        s = -float(row[:axis] @ prefix) / float(row[axis])
        if lo < s < hi:
            breaks.append(s)
    return sorted(set(breaks))


def _quad(fn, lo, hi, breaks, epsabs, epsrel):
    pts = [b for b in breaks if lo < b < hi] or None
    out = _si.quad(fn, lo, hi, points=pts, epsabs=epsabs, epsrel=epsrel,
                   limit=_QUAD_LIMIT, full_output=1)
    val, err = out[0], out[1]
    if len(out) > 3:  # QUADPACK attached a trouble message
        raise QuadratureError(
            f"quadrature tolerance not reached: {out[3]}", val, err)
    return val


def adaptive_quad(fn, lo: float, hi: float, breaks=(), epsrel: float = 1e-9):
    """Adaptive 1-D integral of fn over [lo, hi] with known awkward points;
    raises QuadratureError (carrying the estimate) when the tolerance is
    not certified."""
    return _quad(fn, lo, hi, list(breaks), 0.0, epsrel)


def _ball_slices(centers: np.ndarray, radius: float, prefix: np.ndarray,
                 axis: int) -> list[tuple[float, float]]:
    """Per-center slice intervals of the balls at the current prefix."""
    out = []
    for c in centers:
        rem = radius * radius - float(np.sum((prefix - c[:axis]) ** 2))
        if rem > 0.0:
            h = np.sqrt(rem)
            out.append((c[axis] - h, c[axis] + h))
    return out


def _volume_level(system: RootSystem, centers: np.ndarray, radius: float,
                  prefix: np.ndarray, epsrel: float) -> float:
    """Integrate omega over the union of balls, coordinates >= len(prefix)."""
    d = system.dimension
    axis = prefix.size
    slices = _merge_intervals(_ball_slices(centers, radius, prefix, axis))
    if not slices:
        return 0.0

    if axis == d - 1:
        def fn(s):
            return weight(system, np.append(prefix, s))
    else:
        def fn(s):
            return _volume_level(system, centers, radius,
                                 np.append(prefix, s), epsrel)

    total = 0.0
    for lo, hi in slices:
        breaks = _segment_breaks(system, prefix, axis, lo, hi)
        if axis < d - 1:
            # ball edges of individual translates are kinks of the inner value
            for a, b in _ball_slices(centers, radius, prefix, axis):
                breaks.extend([a, b])
        total += _quad(fn, lo, hi, sorted(set(breaks)), 0.0, epsrel)
    return total


def ball_volume(system: RootSystem, center, radius: float,
                rtol: float = 1e-6) -> float:
    """omega(B(center, radius)) to the requested relative tolerance."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float).reshape(1, -1)
    # one quadrature level per dimension; split the tolerance across levels
    eps = rtol / (2.0 * system.dimension)
    return _volume_level(system, center, float(radius), np.empty(0), eps)


def orbit_ball_volume(system: RootSystem, group: WeylGroup, center,
                      radius: float, rtol: float = 1e-6) -> float:
    """omega(theta(B(center, radius))), the orbit of the ball under G."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    centers = center @ np.transpose(group.elements, (0, 2, 1))
    # deduplicate coincident orbit points (center on a mirror)
    uniq = []
    for c in centers:
        if not any(np.allclose(c, u, atol=1e-12) for u in uniq):
            uniq.append(c)
    eps = rtol / (2.0 * system.dimension)
    return _volume_level(system, np.asarray(uniq), float(radius), np.empty(0), eps)
