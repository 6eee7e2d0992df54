"""Root systems, finite reflection groups, weights, and orbit geometry.

A root system here is a finite set R of nonzero vectors, normalized to
|alpha| = sqrt(2), closed under its own reflections, with R intersecting
each line through a root only in {alpha, -alpha}.  A multiplicity function
assigns a nonnegative value to each root, constant on orbits of the
generated reflection group G.  The weight

    omega(x) = prod_{alpha in R+} |<alpha, x>|^(2 k(alpha))

turns Lebesgue measure into the doubling measure all downstream modules
integrate against.  The orbit metric rho(x, y) = min_g |x - g y| replaces
the Euclidean one wherever the group action matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

ROOT_NORM = np.sqrt(2.0)

# Canonical rounding used for set membership of vectors/matrices during
# closure computations.  12 digits: coarse enough to absorb float noise from
# products of orthogonal matrices, fine enough to separate distinct elements.
_ROUND = 12

# Closure iteration cap; reaching it means the generators do not close into
# a (small) finite group.
_GROUP_CAP = 10_000


class RootSystemError(ValueError):
    """Invalid root system or multiplicity specification."""


class GroupClosureError(RuntimeError):
    """Generator closure exceeded the finite-group cap."""


def _key(arr: np.ndarray) -> tuple:
    rounded = np.round(arr, _ROUND)
    rounded += 0.0  # normalize -0.0 to 0.0 so keys are sign-stable
    return tuple(rounded.ravel())


def reflect(alpha, x):
    """Reflect x (vector or batch of row vectors) across the hyperplane
    orthogonal to alpha."""
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    nrm2 = float(alpha @ alpha)
    if nrm2 == 0.0:
        raise RootSystemError("reflection axis must be nonzero")
    return x - (2.0 / nrm2) * np.multiply.outer(x @ alpha, alpha)


def reflection_matrix(alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    nrm2 = float(alpha @ alpha)
    if nrm2 == 0.0:
        raise RootSystemError("reflection axis must be nonzero")
    return np.eye(alpha.size) - (2.0 / nrm2) * np.outer(alpha, alpha)


@dataclass(frozen=True)
class RootSystem:
    """Normalized root system with a per-root multiplicity.

    roots:          (n, d) array, all rows of length sqrt(2)
    multiplicities: (n,) nonnegative, one entry per root row
    positive_idx:   indices of the chosen positive subsystem (n/2 rows)
    family:         construction tag ("z2", "dihedral", "direct_sum")
    """

    roots: np.ndarray
    multiplicities: np.ndarray
    positive_idx: np.ndarray
    family: str = "custom"

    @property
    def dimension(self) -> int:
        return self.roots.shape[1]

    @property
    def positive_roots(self) -> np.ndarray:
        return self.roots[self.positive_idx]

    @property
    def positive_multiplicities(self) -> np.ndarray:
        return self.multiplicities[self.positive_idx]

    @property
    def gamma(self) -> float:
        """Sum of multiplicities over the positive subsystem."""
        return float(np.sum(self.positive_multiplicities))

    @property
    def homogeneous_dimension(self) -> float:
        """d + 2*gamma, the scaling exponent of balls in the weighted measure."""
        return self.dimension + 2.0 * self.gamma

    def is_axis_product(self) -> bool:
        """True when every root is parallel to a coordinate axis (the
        sign-flip product case, the only one with kernel-level support)."""
        for row in self.roots:
            if np.count_nonzero(np.round(row, _ROUND)) != 1:
                return False
        return True

    def axis_multiplicities(self) -> np.ndarray:
        """Per-axis multiplicity vector for axis-product systems."""
        if not self.is_axis_product():
            raise RootSystemError("root system is not a product of sign flips")
        ks = np.zeros(self.dimension)
        for row, k in zip(self.positive_roots, self.positive_multiplicities):
            axis = int(np.argmax(np.abs(row)))
            ks[axis] = k
        return ks


@dataclass(frozen=True)
class WeylGroup:
    """Finite reflection group as an explicit list of orthogonal matrices."""

    elements: np.ndarray  # (N, d, d), elements[0] is the identity

    @property
    def order(self) -> int:
        return self.elements.shape[0]

    @property
    def dimension(self) -> int:
        return self.elements.shape[1]


@dataclass(frozen=True)
class ScalarInvariants:
    gamma: float
    homogeneous_dimension: float
    group_order: int


def _positive_index(roots: np.ndarray) -> np.ndarray:
    """Pick one root per {alpha, -alpha} pair, by lexicographic positivity
    of the reversed coordinate tuple (last coordinate decides first)."""
    idx = []
    for i, row in enumerate(roots):
        r = np.round(row, _ROUND)
        lead = next((v for v in r[::-1] if v != 0.0), 0.0)
        if lead > 0:
            idx.append(i)
    return np.asarray(idx, dtype=int)


def _assemble(roots: list[np.ndarray], mults: list[float], family: str) -> RootSystem:
    roots_arr = np.asarray(roots, dtype=float)
    mults_arr = np.asarray(mults, dtype=float)
    if np.any(mults_arr < 0):
        raise RootSystemError("multiplicities must be nonnegative")
    pos = _positive_index(roots_arr)
    system = RootSystem(roots_arr, mults_arr, pos, family)
    validate_root_system(system)
    return system


def z2_root_system(multiplicities) -> RootSystem:
    """Sign-flip product on R^d: roots {±sqrt(2) e_j}, one multiplicity per axis."""
    ks = np.atleast_1d(np.asarray(multiplicities, dtype=float))
    d = ks.size
    if d == 0:
        raise RootSystemError("need at least one axis")
    roots, mults = [], []
    for j in range(d):
        e = np.zeros(d)
        e[j] = ROOT_NORM
        roots.extend([e, -e])
        mults.extend([ks[j], ks[j]])
    return _assemble(roots, mults, "z2")


def dihedral_root_system(m: int, k_even: float, k_odd: float | None = None) -> RootSystem:
    """Dihedral system I2(m) in the plane: 2m roots at angles j*pi/m.

    For even m the roots split into two orbits (even/odd j) that may carry
    distinct multiplicities; for odd m there is a single orbit and both
    values must agree.
    """
    if m < 3:
        raise RootSystemError("dihedral order parameter must be >= 3")
    if k_odd is None:
        k_odd = k_even
    if m % 2 == 1 and k_even != k_odd:
        raise RootSystemError(
            "odd dihedral systems have a single root orbit; "
            f"multiplicities {k_even} and {k_odd} would not be G-invariant"
        )
    roots, mults = [], []
    for j in range(2 * m):
        ang = j * np.pi / m
        roots.append(ROOT_NORM * np.array([np.cos(ang), np.sin(ang)]))
        mults.append(k_even if j % 2 == 0 else k_odd)
    return _assemble(roots, mults, "dihedral")


def direct_sum_root_system(parts: list[RootSystem]) -> RootSystem:
    """Embed the given systems on orthogonal coordinate blocks."""
    if not parts:
        raise RootSystemError("direct sum needs at least one part")
    total = sum(p.dimension for p in parts)
    roots, mults = [], []
    offset = 0
    for p in parts:
        for row, k in zip(p.roots, p.multiplicities):
            vec = np.zeros(total)
            vec[offset:offset + p.dimension] = row
            roots.append(vec)
            mults.append(k)
        offset += p.dimension
    return _assemble(roots, mults, "direct_sum")


def build_root_system(spec: dict) -> RootSystem:
    """Construct a root system from a flat mapping (the config-file path).

    Keys: family ("z2" | "dihedral" | "direct_sum"), and per family:
      z2:        multiplicities (list of per-axis values)
      dihedral:  order (m), multiplicities (one or two values)
      direct_sum: parts (list of sub-mappings)
    """
    family = str(spec.get("family", "z2")).replace("-", "_")
    if family == "z2":
        return z2_root_system(spec["multiplicities"])
    if family == "dihedral":
        ks = np.atleast_1d(np.asarray(spec["multiplicities"], dtype=float))
        if ks.size not in (1, 2):
            raise RootSystemError("dihedral systems take one or two multiplicities")
        k_odd = ks[1] if ks.size == 2 else None
        return dihedral_root_system(int(spec["order"]), float(ks[0]), k_odd)
    if family == "direct_sum":
        return direct_sum_root_system([build_root_system(p) for p in spec["parts"]])
    raise RootSystemError(f"unknown root system family: {family!r}")


def validate_root_system(system: RootSystem) -> None:
    """Check normalization, pair structure, reflection closure and
    G-invariance of the multiplicity; raise RootSystemError on violation."""
    roots = system.roots
    mults = system.multiplicities
    if roots.ndim != 2 or roots.shape[0] == 0:
        raise RootSystemError("roots must be a nonempty (n, d) array")
    norms = np.linalg.norm(roots, axis=1)
    if not np.allclose(norms, ROOT_NORM, atol=1e-10):
        raise RootSystemError("all roots must have length sqrt(2)")

    index = {_key(row): i for i, row in enumerate(roots)}
    if len(index) != roots.shape[0]:
        raise RootSystemError("duplicate roots")
    for i, row in enumerate(roots):
        if _key(-row) not in index:
            raise RootSystemError("root set is not symmetric under negation")
        # no other root may be parallel to this one
        for j, other in enumerate(roots):
            if j in (i, index[_key(-row)]):
                continue
            cross = np.abs(row @ other)
            if np.isclose(cross, 2.0, atol=1e-10):
                raise RootSystemError("R meets a root line outside {alpha, -alpha}")

    if 2 * system.positive_idx.size != roots.shape[0]:
        raise RootSystemError("positive subsystem must contain one root per pair")

    # closure under the generating reflections, and multiplicity invariance
    # under them (invariance under generators implies it for the whole group)
    for i, beta in enumerate(roots):
        reflected = reflect(beta, roots)
        for j, img in enumerate(reflected):
            key = _key(img)
            if key not in index:
                raise RootSystemError("root set is not closed under its reflections")
            tgt = index[key]
            if not np.isclose(mults[j], mults[tgt], atol=1e-12):
                raise RootSystemError(
                    "multiplicity is not G-invariant: roots "
                    f"{np.round(roots[j], 6)} and {np.round(roots[tgt], 6)} are in "
                    f"one orbit but carry {mults[j]} and {mults[tgt]}"
                )


def generate_group(system: RootSystem) -> WeylGroup:
    """Closure of the root reflections under composition.

    Deterministic element order: identity first, then sorted by the rounded
    matrix entries.  Raises GroupClosureError past the finite cap.
    """
    d = system.dimension
    gens = [reflection_matrix(a) for a in system.positive_roots]
    seen: dict[tuple, np.ndarray] = {}
    ident = np.eye(d)
    frontier = [ident]
    seen[_key(ident)] = ident
    while frontier:
        nxt = []
        for g in frontier:
            for s in gens:
                h = s @ g
                k = _key(h)
                if k not in seen:
                    if len(seen) >= _GROUP_CAP:
                        raise GroupClosureError(
                            "reflection closure exceeded "
                            f"{_GROUP_CAP} elements; not a finite group as given"
                        )
                    seen[k] = h
                    nxt.append(h)
        frontier = nxt
    keys = sorted(k for k in seen if k != _key(ident))
    elements = np.stack([ident] + [seen[k] for k in keys])
    return WeylGroup(elements)


def scalar_invariants(system: RootSystem, group: WeylGroup | None = None) -> ScalarInvariants:
    if group is None:
        group = generate_group(system)
    return ScalarInvariants(system.gamma, system.homogeneous_dimension, group.order)


def weight(system: RootSystem, x) -> np.ndarray | float:
    """omega(x) = prod over positive roots of |<alpha, x>|^(2 k), with the
    0^0 := 1 convention so zero multiplicities never singularize anything."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    pairings = np.abs(pts @ system.positive_roots.T)  # (n, n_pos)
    out = np.ones(pts.shape[0])
    for col, k in enumerate(system.positive_multiplicities):
        if k != 0.0:
            out *= pairings[:, col] ** (2.0 * k)
    return float(out[0]) if single else out


def orbit_distance(group: WeylGroup, x, y) -> np.ndarray | float:
    """rho(x, y) = min over g in G of |x - g y|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = x.ndim == 1 and y.ndim == 1
    X = np.atleast_2d(x)
    Y = np.atleast_2d(y)
    best = None
    for g in group.elements:
        diff = X - Y @ g.T
        dist = np.linalg.norm(diff, axis=-1)
        best = dist if best is None else np.minimum(best, dist)
    return float(best[0]) if single else best


def orbit_distance_matrix(group: WeylGroup, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise rho between rows of X and rows of Y, (len(X), len(Y))."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    best = None
    for g in group.elements:
        Yg = Y @ g.T
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * (X @ Yg.T)
            + np.sum(Yg * Yg, axis=1)[None, :]
        )
        best = d2 if best is None else np.minimum(best, d2)
    return np.sqrt(np.maximum(best, 0.0))


def orbit_ball_membership(group: WeylGroup, center, radius: float, x) -> np.ndarray | bool:
    """Membership in theta(B(center, radius)) = union of g-translates of the
    Euclidean ball, equivalently rho(center, x) < radius (strict)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    dist = orbit_distance(group, x, center)
    return dist < radius
