"""Oscillation-space norms, atoms, and the weighted Calderon-Zygmund
decomposition, all on sampled functions.

Averages, measures and norms here are grid sums, so every inequality these
objects are meant to witness is checked inside one consistent
discretization.  Ball measures that enter atom normalizations use the
adaptive volume quadrature instead, since atoms must be comparable across
grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridError, SampledFunction, WeightedGrid, lp_norm
from .heat import dunkl_laplacian
from .reflection import WeylGroup, orbit_distance
from .volumes import ball_volume, orbit_ball_volume

_MIN_BALL_NODES = 16
_MIN_ATOM_NODES = 32
_ATOM_MARGIN = 0.85   # atoms fill this fraction of their nominal ball


class SpaceError(ValueError):
    """Invalid space-level construction."""


class CZError(ValueError):
    """Degenerate Calderon-Zygmund level."""


@dataclass(frozen=True)
class BallFamily:
    """Finite family of Euclidean balls (centers, radii) used as the test
    set for BMO-type suprema."""

    centers: np.ndarray   # (n, d)
    radii: np.ndarray     # (m,)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        if np.any(r <= 0):
            raise SpaceError("radii must be positive")
        if len(set(np.round(r, 12))) < 3:
            raise SpaceError("ball family needs at least 3 radius scales")


def lattice_ball_family(grid: WeightedGrid, scales: int = 4,
                        center_stride: int | None = None) -> BallFamily:
    """Centers on a node sublattice, dyadic radii from box/2 downward."""
    if center_stride is None:
        center_stride = max(1, len(grid.axis_nodes[0]) // 16)
    idx = [np.arange(0, len(a), center_stride) for a in grid.axis_nodes]
    mesh = np.meshgrid(*[a[i] for a, i in zip(grid.axis_nodes, idx)],
                       indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    radii = grid.box_halfwidth * 2.0 ** (-np.arange(1, scales + 1, dtype=float))
    return BallFamily(centers, radii)


def _euclidean_members(grid, center, r):
    diff = grid.nodes - center[None, :]
    return np.sum(diff * diff, axis=1) < r * r


def _orbit_members(grid, group, center, r):
    dist = orbit_distance(group, grid.nodes, center)
    return dist < r


def _sup_over_balls(grid, f, family, member_fn, deviation):
    """Shared driver: sup over admissible balls of a deviation functional
    of (values inside, weights inside).  Balls with fewer than 16 nodes or
    hanging outside the sampled box are skipped (a partially sampled ball
    would misstate its average); an empty admissible family is an error."""
    vals = f.values
    qw = grid.quad_weights
    box = grid.box_halfwidth * (1.0 + 1e-12)
    best = -np.inf
    admissible = 0
    for center in family.centers:
        reach = float(np.max(np.abs(center)))
        for r in family.radii:
            if reach + r > box:
                continue
            inside = member_fn(grid, center, r)
            if np.count_nonzero(inside) < _MIN_BALL_NODES:
                continue
            admissible += 1
            v = vals[inside]
            w = qw[inside]
            best = max(best, deviation(v, w))
    if admissible == 0:
        raise SpaceError("no ball in the family contains enough nodes")
    return float(best)


def _mean_abs_deviation(v, w):
    mass = np.sum(w)
    mean = np.sum(v * w) / mass
    return np.sum(np.abs(v - mean) * w) / mass


def _mean_above_min(v, w):
    mass = np.sum(w)
    mean = np.sum(v * w) / mass
    return mean - np.min(v)   # grid minimum stands in for the essential inf


def bmo_norm(grid: WeightedGrid, f: SampledFunction,
             family: BallFamily) -> float:
    """sup over Euclidean balls of the weighted mean deviation from the
    ball average."""
    return _sup_over_balls(grid, f, family, _euclidean_members,
                           _mean_abs_deviation)


def bmo_rho_norm(grid: WeightedGrid, group: WeylGroup, f: SampledFunction,
                 family: BallFamily) -> float:
    """Orbit-ball BMO norm: averages run over theta(B) instead of B.
    Never exceeds bmo_norm on the same family for G-invariant f; in
    general it is the smaller space (fewer admissible oscillations)."""
    def member(grid_, center, r):
        return _orbit_members(grid_, group, center, r)
    return _sup_over_balls(grid, f, family, member, _mean_abs_deviation)


def blo_norm(grid: WeightedGrid, f: SampledFunction,
             family: BallFamily) -> float:
    """sup over balls of (ball average - infimum over the ball)."""
    return _sup_over_balls(grid, f, family, _euclidean_members,
                           _mean_above_min)


@dataclass
class Atom:
    """Normalized building block supported in (the orbit of) one ball."""

    kind: str                 # "size" (support/cancellation/size) or "laplacian"
    center: np.ndarray
    radius: float
    q: float
    values: SampledFunction
    ball_measure: float
    witness: SampledFunction | None = None   # the b with a = Delta b
    seed: int | None = None


def make_atom_size(grid: WeightedGrid, center, radius: float, q: float,
                   seed: int) -> Atom:
    """Random atom with the support / cancellation / size conditions:
    supp a in B, integral zero, ||a||_q <= measure(B)^(1/q - 1).

    Values are seeded noise on the ball's nodes, mean-corrected in the
    weighted measure and rescaled to 99% of the size bound."""
    if q <= 1:
        raise SpaceError("size exponent must exceed 1")
    center = np.asarray(center, dtype=float)
    inside = _euclidean_members(grid, center, radius)
    if np.count_nonzero(inside) < _MIN_ATOM_NODES:
        raise SpaceError(
            f"ball holds {np.count_nonzero(inside)} nodes; "
            f"atoms need >= {_MIN_ATOM_NODES}, refine the grid or grow the ball")
    rng = np.random.default_rng(seed)
    vals = np.zeros(grid.n_nodes)
    vals[inside] = rng.standard_normal(np.count_nonzero(inside))
    w = grid.quad_weights[inside]
    vals[inside] -= np.sum(vals[inside] * w) / np.sum(w)
    measure = ball_volume(grid.root_system, center, radius, rtol=1e-6)
    f = SampledFunction(grid, vals)
    nrm = lp_norm(grid, f, q)
    if nrm == 0.0:
        raise SpaceError("degenerate atom draw")
    f.values *= 0.99 * measure ** (1.0 / q - 1.0) / nrm
    return Atom("size", center, float(radius), float(q), f, measure, seed=seed)


def _bump(s):
    """Standard smooth bump on (-1, 1) with value 1 at 0, with first and
    second derivatives; zero (with all derivatives) outside."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    si = s[inside]
    g = 1.0 - si * si
    val = np.exp(1.0 - 1.0 / g)
    a = -2.0 * si / (g * g)           # d/ds of (1 - 1/g)
    da = -2.0 / (g * g) - 8.0 * si * si / (g ** 3)
    out[inside] = val
    d1[inside] = val * a
    d2[inside] = val * (a * a + da)
    return out, d1, d2


def _axis_profile(c_abs, a, wobble_amp, wobble_freq):
    """Even profile psi(u) with closed-form derivatives.

    Annular (two mirrored bumps at |u| ~ c) when the center is far enough
    from the hyperplane, a single centered bump otherwise.  A smooth even
    modulation (in u^2) keyed to the seed varies the shape."""
    if c_abs > 1.05 * a:
        def profile(u):
            s = (np.abs(u) - c_abs) / a
            v, v1, v2 = _bump(s)
            sgn = np.sign(u)
            mod = 1.0 + wobble_amp * np.cos(wobble_freq * u * u)
            mod1 = -2.0 * wobble_amp * wobble_freq * u * np.sin(wobble_freq * u * u)
            mod2 = (-2.0 * wobble_amp * wobble_freq * np.sin(wobble_freq * u * u)
                    - 4.0 * wobble_amp * wobble_freq ** 2 * u * u
                    * np.cos(wobble_freq * u * u))
            p = v * mod
            p1 = v1 * sgn / a * mod + v * mod1
            p2 = v2 / a ** 2 * mod + 2.0 * v1 * sgn / a * mod1 + v * mod2
            return p, p1, p2
    else:
        w = c_abs + a
        def profile(u):
            s = u / w
            v, v1, v2 = _bump(s)
            mod = 1.0 + wobble_amp * np.cos(wobble_freq * u * u)
            mod1 = -2.0 * wobble_amp * wobble_freq * u * np.sin(wobble_freq * u * u)
            mod2 = (-2.0 * wobble_amp * wobble_freq * np.sin(wobble_freq * u * u)
                    - 4.0 * wobble_amp * wobble_freq ** 2 * u * u
                    * np.cos(wobble_freq * u * u))
            p = v * mod
            p1 = v1 / w * mod + v * mod1
            p2 = v2 / w ** 2 * mod + 2.0 * v1 / w * mod1 + v * mod2
            return p, p1, p2
    return profile


class LaplacianAtomRecipe:
    """Smooth sign-flip invariant bump b supported in the orbit of a ball,
    with closed-form Dunkl Laplacian (the reflection difference vanishes
    identically for even profiles)."""

    def __init__(self, grid, center, radius, seed):
        system = grid.root_system
        d = system.dimension
        ks = system.axis_multiplicities()
        center = np.asarray(center, dtype=float)
        rng = np.random.default_rng(seed)
        a = _ATOM_MARGIN * radius / np.sqrt(d)
        self.profiles = []
        for j in range(d):
            amp = 0.35 * rng.random()
            # keep the modulation's local wavelength at the bump's own width
            # scale so grid stencils resolve it
            freq = (0.25 + 0.75 * rng.random()) / (a * (abs(center[j]) + a))
            self.profiles.append(_axis_profile(abs(center[j]), a, amp, freq))
        self.ks = ks
        self.d = d

    def bump(self, pts):
        val = np.ones(pts.shape[0])
        for j in range(self.d):
            p, _, _ = self.profiles[j](pts[:, j])
            val *= p
        return val

    def laplacian(self, pts):
        """sum_j [psi_j'' + (2 k_j / u) psi_j'] prod_{l != j} psi_l, exact."""
        per = []
        for j in range(self.d):
            per.append(self.profiles[j](pts[:, j]))
        total = np.zeros(pts.shape[0])
        for j in range(self.d):
            p, p1, p2 = per[j]
            u = pts[:, j]
            with np.errstate(invalid="ignore", divide="ignore"):
                radial = np.where(u != 0.0, 2.0 * self.ks[j] * p1 / u, 0.0)
            term = p2 + radial
            for l in range(self.d):
                if l != j:
                    term = term * per[l][0]
            total += term
        return total


def make_atom_laplacian(grid: WeightedGrid, center, radius: float,
                        seed: int, q: float = 2.0) -> Atom:
    """Atom a = Dunkl Laplacian of a smooth invariant bump b, rescaled so

        ||b||_q <= r^2 measure(B)^(1/q-1)   and   ||a||_q <= measure(B)^(1/q-1)

    both hold (with 1% headroom).  a uses the closed-form Laplacian of the
    bump, so a = Delta_kappa b at any resolution up to one constant on the
    carrier: the weighted quadrature mean (an O(h^2) artifact) is projected
    out so the discrete cancellation  integral(a) domega = 0  is exact.
    The shift is attached as ``mean_correction``; the grid-stencil Laplacian
    is compared against the closed form and the relative l2 gap is attached
    as ``fd_residual`` for resolution diagnostics."""
    system = grid.root_system
    if not system.is_axis_product():
        raise SpaceError("Laplacian atoms need a sign-flip product system")
    center = np.asarray(center, dtype=float)
    recipe = LaplacianAtomRecipe(grid, center, radius, seed)
    b_vals = recipe.bump(grid.nodes)
    support = b_vals != 0.0
    if np.count_nonzero(support) < _MIN_ATOM_NODES:
        raise SpaceError(
            "bump support holds too few nodes; refine the grid or grow the ball")
    b = SampledFunction(grid, b_vals)
    a_vals = recipe.laplacian(grid.nodes)
    carrier = np.abs(a_vals) > 0
    if np.any(carrier):
        from .reflection import generate_group
        group_dist = orbit_distance(generate_group(system),
                                    grid.nodes[carrier], center)
        if np.any(group_dist >= radius):
            raise SpaceError(
                "the bump's Laplacian leaks outside the orbit ball; "
                "grow the ball or move the center")
    carrier_mass = float(np.sum(grid.quad_weights[carrier]))
    correction = float(np.sum(a_vals * grid.quad_weights)) / carrier_mass
    a_vals = np.where(carrier, a_vals - correction, 0.0)
    measure = ball_volume(system, center, radius, rtol=1e-6)
    bound_b = radius ** 2 * measure ** (1.0 / q - 1.0)
    bound_a = measure ** (1.0 / q - 1.0)
    nb = lp_norm(grid, SampledFunction(grid, b_vals), q)
    na = lp_norm(grid, SampledFunction(grid, a_vals), q)
    if nb == 0.0 or na == 0.0:
        raise SpaceError("degenerate bump at this grid resolution")
    scale = 0.99 * min(bound_b / nb, bound_a / na)
    out = SampledFunction(grid, a_vals * scale)
    witness = SampledFunction(grid, b_vals * scale)
    atom = Atom("laplacian", center, float(radius), float(q), out, measure,
                witness=witness, seed=seed)
    atom.recipe = recipe
    atom.scale = scale
    atom.mean_correction = correction
    fd = dunkl_laplacian(grid, b)
    diff = np.where(fd.mask, fd.values - recipe.laplacian(grid.nodes), 0.0)
    atom.fd_residual = (lp_norm(grid, SampledFunction(grid, diff), 2)
                        / lp_norm(grid, SampledFunction(grid, a_vals), 2))
    return atom


@dataclass
class CZDecomposition:
    """f = good + sum of bad parts, each bad part carried by one ball."""

    level: float
    good: SampledFunction
    bad: list                  # list of (node_index_array, values_on_those_nodes)
    balls: list                # list of (center, radius), circumscribing each cube
    dilation: float            # the dilate factor applied to get B_i*
    cubes: list                # list of (corner_low, side) for reporting

    def bad_total(self) -> np.ndarray:
        out = np.zeros(self.good.grid.n_nodes)
        for idx, vals in self.bad:
            out[idx] += vals
        return out


def cz_decompose(grid: WeightedGrid, f: SampledFunction,
                 level: float) -> CZDecomposition:
    """Stopping-time decomposition at the given level over the dyadic cubes
    of the grid box.

    Maximal dyadic cubes with weighted |f|-average above the level become
    the bad region; on them the bad part is f minus its weighted cube
    average.  Descent continues to single-node cells, so the good part is
    bounded by the level off the selected cubes and by the dyadic doubling
    ratio on them.  A level at or below the global average is rejected.
    """
    if level <= 0:
        raise CZError("level must be positive")
    qw = grid.quad_weights
    av = np.abs(f.values)
    total_mass = float(np.sum(qw))
    global_avg = float(np.sum(av * qw)) / total_mass
    if global_avg > level:
        raise CZError(
            f"level {level} is below the global average {global_avg:.3g}; "
            "the whole domain would be selected")

    L = grid.box_halfwidth
    d = grid.dimension
    selected: list[tuple[np.ndarray, np.ndarray, float]] = []

    def descend(idx: np.ndarray, corner: np.ndarray, side: float):
        if idx.size <= 1:
            return
        half = side / 2.0
        # partition nodes among the 2^d children, half-open boxes
        rel = ((grid.nodes[idx] - corner) >= half).astype(int)
        child_code = rel @ (1 << np.arange(d))
        for code in range(1 << d):
            sub = idx[child_code == code]
            if sub.size == 0:
                continue
            bits = np.array([(code >> j) & 1 for j in range(d)])
            c_corner = corner + bits * half
            mass = float(np.sum(qw[sub]))
            avg = float(np.sum(av[sub] * qw[sub])) / mass
            if avg > level:
                selected.append((sub, c_corner, half))
            else:
                descend(sub, c_corner, half)

    root_corner = np.full(d, -L)
    descend(np.arange(grid.n_nodes), root_corner, 2.0 * L)

    good_vals = f.values.copy()
    bad, balls, cubes = [], [], []
    for idx, corner, side in selected:
        mass = float(np.sum(qw[idx]))
        mean = float(np.sum(f.values[idx] * qw[idx])) / mass
        bad.append((idx, f.values[idx] - mean))
        good_vals[idx] = mean
        center = corner + side / 2.0
        radius = side * np.sqrt(d) / 2.0
        balls.append((center, radius))
        cubes.append((corner, side))
    return CZDecomposition(float(level), SampledFunction(grid, good_vals),
                           bad, balls, 2.0 * np.sqrt(d), cubes)


def cz_check(grid: WeightedGrid, f: SampledFunction,
             dec: CZDecomposition) -> dict:
    """Measured constants for the decomposition contract:

    (i)   reconstruction: max |f - good - sum bad|
    (ii)  good bound: ||good||_inf / level
    (iii) support + finite overlap of the dilated balls (max count)
    (iv)  bad size: max_i ||b_i||_1 / (level * measure(B_i))
    (v)   total measure: level * sum_i measure(B_i) / ||f||_1
    """
    qw = grid.quad_weights
    recon = np.max(np.abs(f.values - dec.good.values - dec.bad_total()))
    good_ratio = np.max(np.abs(dec.good.values)) / dec.level

    overlap = np.zeros(grid.n_nodes, dtype=int)
    bad_ratio = 0.0
    ball_measure_sum = 0.0
    support_ok = True
    for (idx, vals), (center, radius) in zip(dec.bad, dec.balls):
        star = dec.dilation * radius
        inside_star = _euclidean_members(grid, center, star * (1 + 1e-12))
        overlap += inside_star
        if not np.all(inside_star[idx]):
            support_ok = False
        inside = _euclidean_members(grid, center, radius * (1 + 1e-12))
        measure = float(np.sum(qw[inside]))
        ball_measure_sum += measure
        b_l1 = float(np.sum(np.abs(vals) * qw[idx]))
        if measure > 0:
            bad_ratio = max(bad_ratio, b_l1 / (dec.level * measure))
    f_l1 = float(np.sum(np.abs(f.values) * qw))
    return {
        "reconstruction_error": float(recon),
        "good_over_level": float(good_ratio),
        "support_in_dilate": support_ok,
        "max_overlap": int(np.max(overlap)) if dec.bad else 0,
        "bad_l1_over_level_measure": float(bad_ratio),
        "level_times_measure_over_l1": float(dec.level * ball_measure_sum / f_l1)
        if f_l1 > 0 else 0.0,
        "n_cubes": len(dec.bad),
    }
