"""Heat kernel for sign-flip products, its time derivatives, the semigroup
acting on sampled functions, and empirical Gaussian-bound fits.

The rank-one kernel with respect to d omega_k = 2^k |x|^(2k) dx is

    T_t(x, y) = c_k^{-1} (2t)^{-(k+1/2)} exp(-(x^2+y^2)/(4t)) E_k(xy / (2t)),
    c_k = 2^(2k+1/2) Gamma(k+1/2),

where E_k collapses to modified Bessel functions of orders k -/+ 1/2:

    E_k(z) = 2^(k-1/2) Gamma(k+1/2) |z|^(1/2-k)
             [I_{k-1/2}(|z|) + sign(z) I_{k+3/2-1}(|z|)].

Evaluation uses exponentially scaled Bessel functions so the Gaussian and
Bessel growth cancel analytically; a short power series takes over near
xy = 0 where the prefactor |z|^(1/2-k) is indeterminate.  At k = 0 the
formula degenerates to the classical Gaussian kernel, which is used
directly.  Multi-axis kernels are products of rank-one factors, each axis
carrying its own multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ive

from .grids import GridError, SampledFunction, WeightedGrid
from .reflection import RootSystem, RootSystemError, WeylGroup, orbit_distance
from .volumes import ball_volume

_SERIES_SWITCH = 1e-4   # |z| below this uses the power series for E_k
_SERIES_TERMS = 6
# strictly positive floor: the opposite-sign Bessel difference can round to
# zero when it is smaller than machine noise relative to the summands
_POSITIVE_FLOOR = 1e-300

_DERIVATIVE_CAP = 4

# central stencils with O(h^2) error, offsets symmetric around 0
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


class HeatKernelError(ValueError):
    """Invalid kernel parameters."""


@dataclass(frozen=True)
class HeatKernelModel:
    """Heat kernel attached to a sign-flip product root system."""

    root_system: RootSystem
    fd_relative_step: float = 1e-2
    richardson_levels: int = 2
    derivative_cap: int = _DERIVATIVE_CAP
    axis_ks: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if not self.root_system.is_axis_product():
            raise RootSystemError(
                "kernel evaluation supports sign-flip product systems only")
        if not (0 < self.fd_relative_step < 0.2):
            raise HeatKernelError("fd_relative_step must be in (0, 0.2)")
        if self.richardson_levels not in (1, 2):
            raise HeatKernelError("richardson_levels must be 1 or 2")
        object.__setattr__(self, "axis_ks", self.root_system.axis_multiplicities())

    @property
    def dimension(self) -> int:
        return self.root_system.dimension


def _ek_series(k: float, z: np.ndarray) -> np.ndarray:
    """Power series of E_k(z) around z = 0, accurate to machine precision
    for |z| << 1 with a handful of terms."""
    even = np.ones_like(z)
    odd = np.ones_like(z)
    term_e = np.ones_like(z)
    term_o = np.ones_like(z)
    z2 = 0.25 * z * z
    for n in range(1, _SERIES_TERMS):
        term_e = term_e * z2 / (n * (k - 0.5 + n))
        term_o = term_o * z2 / (n * (k + 0.5 + n))
        even += term_e
        odd += term_o
    return even + z / (2.0 * k + 1.0) * odd


def kernel_rank1(k: float, t, x, y) -> np.ndarray | float:
    """Rank-one heat kernel T_t(x, y) against d omega_k = 2^k |x|^(2k) dx.

    Broadcasts over array arguments.  Strictly positive; at k = 0 this is
    the classical Gaussian kernel (4 pi t)^(-1/2) exp(-(x-y)^2 / (4t)).
    """
    if k < 0:
        raise HeatKernelError("multiplicity must be nonnegative")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise HeatKernelError("time must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    if k == 0.0:
        val = np.exp(-((x - y) ** 2) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
        return val if val.ndim else float(val)

    t, x, y = np.broadcast_arrays(t, x, y)
    z = x * y / (2.0 * t)
    az = np.abs(z)
    small = az < _SERIES_SWITCH

    out = np.empty_like(z)

    # series branch, including z = 0 exactly
    if np.any(small):
        ts, xs, ys = t[small], x[small], y[small]
        log_ck = (2.0 * k + 0.5) * np.log(2.0) + gammaln(k + 0.5)
        pref = np.exp(-(k + 0.5) * np.log(2.0 * ts)
                      - (xs * xs + ys * ys) / (4.0 * ts) - log_ck)
        out[small] = pref * _ek_series(k, z[small])

    # scaled-Bessel branch: all exponentials combined analytically
    big = ~small
    if np.any(big):
        tb, xb, yb = t[big], x[big], y[big]
        zb, azb = z[big], az[big]
        bracket = ive(k - 0.5, azb) + np.sign(zb) * ive(k + 0.5, azb)
        bracket = np.maximum(bracket, _POSITIVE_FLOOR)
        log_pref = (-(k + 1.0) * np.log(2.0)
                    - (k + 0.5) * np.log(2.0 * tb)
                    - (k - 0.5) * np.log(azb)
                    - (np.abs(xb) - np.abs(yb)) ** 2 / (4.0 * tb))
        out[big] = np.exp(log_pref) * bracket

    out = np.maximum(out, _POSITIVE_FLOOR)
    return out if out.ndim else float(out)


def kernel(model: HeatKernelModel, t, x, y) -> np.ndarray | float:
    """Product kernel on R^d: one rank-one factor per axis.

    x and y have shape (..., d) (or (d,) for single points); leading shapes
    broadcast.  Symmetric in (x, y); integrates to one against d omega.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = model.dimension
    if x.shape[-1] != d or y.shape[-1] != d:
        raise HeatKernelError(f"points must have {d} coordinates")
    single = x.ndim == 1 and y.ndim == 1 and np.ndim(t) == 0
    val = None
    for j in range(d):
        fac = kernel_rank1(model.axis_ks[j], t, x[..., j], y[..., j])
        val = fac if val is None else val * fac
    return float(val) if single else np.asarray(val)


def kernel_mass(model: HeatKernelModel, t: float, x) -> float:
    """integral of T_t(x, .) d omega over R^d, by adaptive quadrature.

    The kernel factorizes over axes, so the mass is a product of 1-D
    integrals; each is computed over [-(|x_j| + 14 sigma), |x_j| + 14 sigma]
    (the tail beyond is below double precision) with breakpoints at the
    weight singularity and at +/- x_j.  Equals 1 for the exact kernel.
    """
    from .volumes import adaptive_quad

    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dimension,):
        raise HeatKernelError(f"point must have {model.dimension} coordinates")
    t = float(t)
    if t <= 0:
        raise HeatKernelError("time must be positive")
    sigma = np.sqrt(2.0 * t)
    total = 1.0
    for j in range(model.dimension):
        k = model.axis_ks[j]
        xj = float(x[j])
        hi = abs(xj) + 14.0 * sigma
        breaks = sorted({0.0, xj, -xj})

        def integrand(y, k=k, xj=xj):
            w = 2.0 ** k * np.abs(y) ** (2.0 * k) if k > 0 else 1.0
            return kernel_rank1(k, t, xj, y) * w

        total *= adaptive_quad(integrand, -hi, hi, breaks, 1e-11)
    return total


def kernel_time_derivative(model: HeatKernelModel, m: int, t, x, y,
                           return_error: bool = False):
    """t^m d^m/dt^m of the kernel, via Richardson-extrapolated central
    differences with step h = t * fd_relative_step.

    m = 0 returns the kernel itself.  m above the stability cap is
    rejected; the error estimate (optional) is the spread of the last two
    extrapolation levels.
    """
    if m < 0 or int(m) != m:
        raise HeatKernelError("derivative order must be a nonnegative integer")
    if m > model.derivative_cap:
        raise HeatKernelError(
            f"derivative order {m} above stability cap {model.derivative_cap}")
    if m == 0:
        val = kernel(model, t, x, y)
        return (val, np.zeros_like(np.asarray(val, dtype=float))) if return_error else val

    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise HeatKernelError("time must be positive")
    offsets, coeffs = _STENCILS[m]

    def fd(h):
        acc = None
        for off, c in zip(offsets, coeffs):
            term = c * kernel(model, t_arr + off * h, x, y)
            acc = term if acc is None else acc + term
        return acc / h ** m

    h0 = t_arr * model.fd_relative_step
    levels = [fd(h0 / 2 ** j) for j in range(model.richardson_levels + 1)]
    # first Richardson sweep removes the h^2 term, second the h^4 term
    sweep = levels
    power = 4.0
    while len(sweep) > 1:
        sweep = [(power * b - a) / (power - 1.0) for a, b in zip(sweep, sweep[1:])]
        power *= 4.0
    value = t_arr ** m * sweep[0]
    if not return_error:
        return value if np.ndim(value) else float(value)
    prev = levels if model.richardson_levels == 1 else [
        (4.0 * b - a) / 3.0 for a, b in zip(levels, levels[1:])]
    err = t_arr ** m * np.abs(sweep[0] - prev[-1])
    return value, err


class SemigroupSampler:
    """Discretized semigroup action on one grid: dense quadrature matrices

        A_m(t)[i, j] = (t^m d_t^m T_t)(node_i, node_j) * quad_weight_j

    cached per (t, m) so trajectory sweeps over many inputs reuse them.
    """

    def __init__(self, model: HeatKernelModel, grid: WeightedGrid):
        if grid.root_system is not model.root_system:
            # allow equal systems built twice
            if not np.array_equal(grid.root_system.roots, model.root_system.roots):
                raise HeatKernelError("grid and model use different root systems")
        self.model = model
        self.grid = grid
        self._cache: dict[tuple[float, int], np.ndarray] = {}

    def matrix(self, t: float, m: int = 0) -> np.ndarray:
        key = (float(t), int(m))
        if key not in self._cache:
            X = self.grid.nodes[:, None, :]
            Y = self.grid.nodes[None, :, :]
            K = kernel_time_derivative(self.model, m, float(t), X, Y)
            self._cache[key] = K * self.grid.quad_weights[None, :]
        return self._cache[key]

    def apply(self, values: np.ndarray, t: float, m: int = 0) -> np.ndarray:
        return self.matrix(t, m) @ np.asarray(values, dtype=float)

    def trajectory(self, values: np.ndarray, times, m: int = 0) -> np.ndarray:
        """Stack of T_{t,m} values, shape (len(times), n_nodes)."""
        values = np.asarray(values, dtype=float)
        return np.stack([self.apply(values, float(t), m) for t in np.asarray(times)])


def apply_semigroup(model: HeatKernelModel, grid: WeightedGrid,
                    f: SampledFunction, t: float, m: int = 0,
                    sampler: SemigroupSampler | None = None) -> SampledFunction:
    """T_{t,m} f on the grid by quadrature against the kernel."""
    if t <= 0:
        raise HeatKernelError("time must be positive")
    if sampler is None:
        sampler = SemigroupSampler(model, grid)
    return SampledFunction(grid, sampler.apply(f.values, t, m))


def _axis_derivatives(tensor: np.ndarray, coords: np.ndarray, axis: int):
    """Interior first and second derivatives along one tensor axis on a
    non-uniform grid (3-point stencils); edge slots are returned as zero."""
    moved = np.moveaxis(tensor, axis, -1)
    fm, f0, fp = moved[..., :-2], moved[..., 1:-1], moved[..., 2:]
    hm = np.diff(coords)[:-1]
    hp = np.diff(coords)[1:]
    d1 = (-hp / (hm * (hm + hp)) * fm
          + (hp - hm) / (hm * hp) * f0
          + hm / (hp * (hm + hp)) * fp)
    d2 = 2.0 * (fm / (hm * (hm + hp)) - f0 / (hm * hp) + fp / (hp * (hm + hp)))
    out1 = np.zeros_like(moved)
    out2 = np.zeros_like(moved)
    out1[..., 1:-1] = d1
    out2[..., 1:-1] = d2
    return np.moveaxis(out1, -1, axis), np.moveaxis(out2, -1, axis)


def dunkl_laplacian(grid: WeightedGrid, f: SampledFunction) -> SampledFunction:
    """Dunkl Laplacian of a sampled function on a sign-flip product grid:

        sum_j [ d^2_j f + (2 k_j / x_j) d_j f - k_j (f - f o sigma_j) / x_j^2 ]

    Derivatives are non-uniform central differences; the reflection term
    uses the mirrored node exactly.  Nodes on the domain boundary or within
    one panel of a singular hyperplane are masked.
    """
    system = grid.root_system
    if not system.is_axis_product():
        raise RootSystemError(
            "Dunkl Laplacian needs a sign-flip product system (mirror grid)")
    ks = system.axis_multiplicities()
    shp = grid.shape()
    V = f.values.reshape(shp)
    total = np.zeros_like(V)
    mask = np.ones(shp, dtype=bool)
    d = grid.dimension
    for j in range(d):
        coords = grid.axis_nodes[j]
        d1, d2 = _axis_derivatives(V, coords, j)
        xj = coords.reshape([-1 if a == j else 1 for a in range(d)])
        term = d2
        if ks[j] != 0.0:
            flipped = np.flip(V, axis=j)
            term = term + 2.0 * ks[j] / xj * d1 - ks[j] * (V - flipped) / xj ** 2
        total += term
        # mask axis edges, and the first panel on each side of a singular axis
        edge = np.zeros(len(coords), dtype=bool)
        edge[[0, -1]] = True
        if ks[j] != 0.0:
            half = len(coords) // 2
            edge[half - 1:half + 1] = True
        mask &= ~edge.reshape(xj.shape)
    vals = np.where(mask, total, 0.0)
    return SampledFunction(grid, vals.ravel(), mask.ravel())


@dataclass
class KernelBoundFit:
    """Smallest constant making a Gaussian-type bound hold on the sample."""

    constant: float
    decay_rate: float
    m: int
    kind: str                   # "gaussian" or "lipschitz"
    argmax: tuple
    n_samples: int
    argmax_on_boundary: bool


def _volume_factor(system, group, x, y, root_t, cache, rtol):
    def vol(pt):
        key = (tuple(np.round(pt, 12)), round(float(root_t), 12))
        if key not in cache:
            cache[key] = ball_volume(system, pt, root_t, rtol)
        return cache[key]
    return max(vol(np.asarray(x, float)), vol(np.asarray(y, float)))


def fit_gaussian_bound(model: HeatKernelModel, group: WeylGroup,
                       samples, m: int = 0, decay_rate: float = 0.125,
                       volume_rtol: float = 1e-4) -> KernelBoundFit:
    """Empirical constant C in

        |t^m d_t^m T_t(x,y)| <= C exp(-decay_rate rho(x,y)^2 / t) / V(x,y,sqrt t)

    over the finite sample of (t, x, y) triples; V is the larger of the two
    ball volumes at radius sqrt(t).  Reports whether the maximizer sits on
    the sample's t-extremes (a hint the sample should be enlarged).
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one (t, x, y) sample")
    cache: dict = {}
    system = model.root_system
    ts = sorted({float(s[0]) for s in samples})
    best, best_arg = -np.inf, None
    for t, x, y in samples:
        t = float(t)
        val = kernel_time_derivative(model, m, t, np.asarray(x, float),
                                     np.asarray(y, float))
        rho = orbit_distance(group, np.asarray(x, float), np.asarray(y, float))
        V = _volume_factor(system, group, x, y, np.sqrt(t), cache, volume_rtol)
        ratio = abs(float(np.asarray(val))) * V * np.exp(decay_rate * rho ** 2 / t)
        if ratio > best:
            best, best_arg = ratio, (t, tuple(map(float, np.atleast_1d(x))), tuple(map(float, np.atleast_1d(y))))
    on_boundary = best_arg[0] in (ts[0], ts[-1]) and len(ts) > 1
    return KernelBoundFit(best, decay_rate, m, "gaussian", best_arg,
                          len(samples), on_boundary)


def fit_lipschitz_bound(model: HeatKernelModel, group: WeylGroup,
                        samples, m: int = 0, decay_rate: float = 0.125,
                        volume_rtol: float = 1e-4) -> KernelBoundFit:
    """Empirical constant C in the kernel Lipschitz bound

        |T_{t,m}(x,y) - T_{t,m}(x,z)| <=
            C (|y-z|/sqrt t) exp(-decay_rate rho(x,y)^2/t) / V(x,y,sqrt t)

    over (t, x, y, z) samples restricted to |y - z| < sqrt(t)."""
    samples = list(samples)
    cache: dict = {}
    system = model.root_system
    used = 0
    ts = sorted({float(s[0]) for s in samples})
    best, best_arg = -np.inf, None
    for t, x, y, z in samples:
        t = float(t)
        y = np.asarray(y, float)
        z = np.asarray(z, float)
        gap = float(np.linalg.norm(y - z))
        if gap == 0.0 or gap >= np.sqrt(t):
            continue
        used += 1
        vy = kernel_time_derivative(model, m, t, np.asarray(x, float), y)
        vz = kernel_time_derivative(model, m, t, np.asarray(x, float), z)
        diff = abs(float(np.asarray(vy)) - float(np.asarray(vz)))
        rho = orbit_distance(group, np.asarray(x, float), y)
        V = _volume_factor(system, group, x, y, np.sqrt(t), cache, volume_rtol)
        ratio = diff * (np.sqrt(t) / gap) * V * np.exp(decay_rate * rho ** 2 / t)
        if ratio > best:
            best, best_arg = ratio, (t, tuple(map(float, np.atleast_1d(x))),
                                     tuple(map(float, y)), tuple(map(float, z)))
    if best_arg is None:
        raise ValueError("no sample satisfied |y - z| < sqrt(t)")
    on_boundary = best_arg[0] in (ts[0], ts[-1]) and len(ts) > 1
    return KernelBoundFit(best, decay_rate, m, "lipschitz", best_arg,
                          used, on_boundary)
