"""Maximal, square-function, variation and oscillation operators over the
heat semigroup, plus the orbit maximal function.

All operators act on a function sampled on a weighted grid, through the
semigroup trajectory t -> T_{t,m} f evaluated on a finite decreasing time
grid.  The variation and oscillation cores are plain sequence functionals
and are reused verbatim by tests against brute-force enumeration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import GridError, SampledFunction, WeightedGrid
from .heat import HeatKernelModel, SemigroupSampler
from .reflection import WeylGroup


class OperatorError(ValueError):
    """Invalid operator parameters."""


class TruncationWarning(UserWarning):
    """A time-grid boundary carries a non-negligible share of a g-function
    integral; widen the grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly decreasing positive times."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 2:
            raise OperatorError("time grid needs at least two times")
        if np.any(t <= 0) or np.any(np.diff(t) >= 0):
            raise OperatorError("times must be positive and strictly decreasing")

    @property
    def count(self) -> int:
        return self.times.size

    @staticmethod
    def log_uniform(t_min: float = 1e-3, t_max: float = 1e2,
                    count: int = 64) -> "TimeGrid":
        if not (0 < t_min < t_max):
            raise OperatorError("need 0 < t_min < t_max")
        return TimeGrid(np.geomspace(t_max, t_min, count))


@dataclass(frozen=True)
class OscillationBrackets:
    """Decreasing bracket endpoints tau_0 > ... > tau_J and, per bracket
    [tau_{j+1}, tau_j], the indices of the time-grid samples inside it."""

    endpoints: np.ndarray
    members: tuple  # tuple of index arrays, one per bracket

    def __post_init__(self):
        e = np.asarray(self.endpoints, dtype=float)
        object.__setattr__(self, "endpoints", e)
        if e.ndim != 1 or e.size < 2:
            raise OperatorError("need at least two bracket endpoints")
        if np.any(e <= 0) or np.any(np.diff(e) >= 0):
            raise OperatorError("endpoints must be positive, strictly decreasing")

    @property
    def count(self) -> int:
        return self.endpoints.size - 1

    @staticmethod
    def from_time_grid(grid: TimeGrid, endpoints) -> "OscillationBrackets":
        e = np.asarray(endpoints, dtype=float)
        members = []
        for j in range(e.size - 1):
            lo, hi = e[j + 1], e[j]
            members.append(np.nonzero((grid.times >= lo) & (grid.times <= hi))[0])
        return OscillationBrackets(e, tuple(members))

    @staticmethod
    def dyadic(grid: TimeGrid, count: int = 16) -> "OscillationBrackets":
        """Endpoints t_max, t_max/2, ... clipped to the grid's range."""
        t_hi, t_lo = grid.times[0], grid.times[-1]
        n = min(count, int(np.floor(np.log2(t_hi / t_lo))))
        e = t_hi * 2.0 ** (-np.arange(n + 1, dtype=float))
        return OscillationBrackets.from_time_grid(grid, e)


def variation_core(values, sigma: float) -> float:
    """sup over subsequences i_1 < i_2 < ... of
    (sum |a_{i_j} - a_{i_{j+1}}|^sigma)^(1/sigma), by exact dynamic
    programming over chain ends: best(i) = max_{j>i} |a_i - a_j|^sigma +
    best(j).  Requires sigma >= 1; smaller exponents are outside this DP's
    optimality argument and are rejected."""
    a = np.asarray(values, dtype=float)
    if sigma < 1.0:
        raise OperatorError("variation exponent must be >= 1")
    if a.ndim != 1:
        raise OperatorError("values must be a 1-d sequence")
    n = a.size
    if n < 2:
        return 0.0
    best = np.zeros(n)
    for i in range(n - 2, -1, -1):
        steps = np.abs(a[i] - a[i + 1:]) ** sigma + best[i + 1:]
        best[i] = np.max(steps)
    return float(np.max(best)) ** (1.0 / sigma)


def variation_core_batch(values: np.ndarray, sigma: float) -> np.ndarray:
    """variation_core down axis 0 for each column of a (n_times, n_pts)
    array; same DP vectorized over the points."""
    a = np.asarray(values, dtype=float)
    if sigma < 1.0:
        raise OperatorError("variation exponent must be >= 1")
    n = a.shape[0]
    if n < 2:
        return np.zeros(a.shape[1])
    best = np.zeros_like(a)
    for i in range(n - 2, -1, -1):
        steps = np.abs(a[i, None, :] - a[i + 1:, :]) ** sigma + best[i + 1:, :]
        best[i] = np.max(steps, axis=0)
    return np.max(best, axis=0) ** (1.0 / sigma)


def oscillation_core(values, brackets: OscillationBrackets) -> float:
    """(sum over brackets of (range of samples in the bracket)^2)^(1/2);
    the range realizes the sup of |a_s - a_r| over sample pairs inside."""
    a = np.asarray(values, dtype=float)
    total = 0.0
    for idx in brackets.members:
        if idx.size >= 2:
            seg = a[idx]
            total += (np.max(seg) - np.min(seg)) ** 2
    return float(np.sqrt(total))


def oscillation_core_batch(values: np.ndarray,
                           brackets: OscillationBrackets) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    total = np.zeros(a.shape[1])
    for idx in brackets.members:
        if idx.size >= 2:
            seg = a[idx, :]
            total += (np.max(seg, axis=0) - np.min(seg, axis=0)) ** 2
    return np.sqrt(total)


def _trajectory(model, grid, f, time_grid, m, sampler):
    if sampler is None:
        sampler = SemigroupSampler(model, grid)
    return sampler.trajectory(f.values, time_grid.times, m)


def maximal_operator(model: HeatKernelModel, grid: WeightedGrid,
                     f: SampledFunction, time_grid: TimeGrid, m: int = 0,
                     sampler: SemigroupSampler | None = None) -> SampledFunction:
    """T_{*,m} f = max over sampled times of |T_{t,m} f|, nodewise."""
    traj = _trajectory(model, grid, f, time_grid, m, sampler)
    return SampledFunction(grid, np.max(np.abs(traj), axis=0))


def littlewood_paley_g(model: HeatKernelModel, grid: WeightedGrid,
                       f: SampledFunction, time_grid: TimeGrid, m: int = 1,
                       sampler: SemigroupSampler | None = None,
                       boundary_share_warn: float = 0.01) -> SampledFunction:
    """g_m(f) = (integral of |T_{t,m} f|^2 dt/t)^(1/2), m >= 1, by the
    trapezoid rule in log t over the sampled times.

    Warns (TruncationWarning) when the first or last decade of the time
    range carries more than `boundary_share_warn` of the integral for some
    node, since then the grid truncates the defining integral visibly."""
    if m < 1:
        raise OperatorError("the square function needs a derivative order >= 1")
    traj = _trajectory(model, grid, f, time_grid, m, sampler)
    logt = np.log(time_grid.times)
    w = np.zeros_like(logt)
    gaps = -np.diff(logt)  # positive; times are decreasing
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    sq = traj ** 2
    total = w @ sq
    decade = np.log(10.0)
    first = logt >= logt[0] - decade   # largest times
    last = logt <= logt[-1] + decade   # smallest times
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.maximum((w[first] @ sq[first]), (w[last] @ sq[last])) / total
    if np.any(share[total > 0] > boundary_share_warn):
        warnings.warn(
            "time-grid boundary decade carries more than "
            f"{boundary_share_warn:.0%} of a g-function integral",
            TruncationWarning, stacklevel=2)
    return SampledFunction(grid, np.sqrt(total))


def variation_operator(model: HeatKernelModel, grid: WeightedGrid,
                       f: SampledFunction, time_grid: TimeGrid,
                       sigma: float, m: int = 0,
                       sampler: SemigroupSampler | None = None) -> SampledFunction:
    """Nodewise sigma-variation of t -> T_{t,m} f along the sampled times."""
    traj = _trajectory(model, grid, f, time_grid, m, sampler)
    return SampledFunction(grid, variation_core_batch(traj, sigma))


def oscillation_operator(model: HeatKernelModel, grid: WeightedGrid,
                         f: SampledFunction, time_grid: TimeGrid,
                         brackets: OscillationBrackets, m: int = 0,
                         sampler: SemigroupSampler | None = None) -> SampledFunction:
    """Nodewise oscillation of t -> T_{t,m} f over the given brackets."""
    traj = _trajectory(model, grid, f, time_grid, m, sampler)
    return SampledFunction(grid, oscillation_core_batch(traj, brackets))


def _ball_averages(distances: np.ndarray, absvals: np.ndarray,
                   qw: np.ndarray, radii) -> np.ndarray:
    """max over radii of the weighted |f|-average over {dist < r}, rowwise."""
    out = np.zeros(distances.shape[0])
    for r in radii:
        inside = distances < r
        mass = inside @ qw
        num = inside @ (absvals * qw)
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(mass > 0, num / mass, 0.0)
        out = np.maximum(out, avg)
    return out


def default_radii(grid: WeightedGrid, count: int = 12) -> np.ndarray:
    """Dyadic radii from a few node spacings up to the box diameter."""
    h = min(np.min(w) for w in grid.axis_widths)
    r_max = 2.0 * grid.box_halfwidth * np.sqrt(grid.dimension)
    n = min(count, max(2, int(np.ceil(np.log2(r_max / (2 * h))))))
    return r_max * 2.0 ** (-np.arange(n, dtype=float))[::-1]


def rho_maximal(grid: WeightedGrid, group: WeylGroup, f: SampledFunction,
                radii=None) -> SampledFunction:
    """Orbit maximal function: sup over r of the |f|-average over the orbit
    ball theta(B(x, r)), with integrals and measures both taken by the grid
    rule so the two sides share one discretization."""
    if radii is None:
        radii = default_radii(grid)
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise OperatorError("radii must be a nonempty positive list")
    dist = grid.rho_matrix(group)
    vals = _ball_averages(dist, np.abs(f.values), grid.quad_weights, radii)
    return SampledFunction(grid, vals)


def hardy_littlewood_maximal(grid: WeightedGrid, f: SampledFunction,
                             radii=None) -> SampledFunction:
    """Euclidean-ball maximal function against the weighted measure."""
    if radii is None:
        radii = default_radii(grid)
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise OperatorError("radii must be a nonempty positive list")
    diff = grid.nodes[:, None, :] - grid.nodes[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    vals = _ball_averages(dist, np.abs(f.values), grid.quad_weights, radii)
    return SampledFunction(grid, vals)
