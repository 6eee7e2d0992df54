"""Weighted tensor grids and quadrature against the reflection-group weight.

Nodes are composite-midpoint points of per-axis panels on [-L, L], graded
toward coordinate hyperplanes that carry a singular weight factor, mirrored
so the node set is invariant under sign flips.  A node's quadrature weight
is the product of its panel widths times omega at the node, so plain
weighted sums of samples are integrals against d omega.  Nodes never lie on
a singular hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reflection import RootSystem, RootSystemError, WeylGroup, weight

_MIN_RESOLUTION = 8


class GridError(ValueError):
    """Invalid grid construction parameters or broken grid invariants."""


def _axis_panels(halfwidth: float, panels: int, grading: float):
    """Breakpoints 0 = b_0 < ... < b_m = L on the positive half axis,
    graded by b_i = L (i/m)^g; g = 1 is uniform."""
    i = np.arange(panels + 1, dtype=float)
    return halfwidth * (i / panels) ** grading


def _axis_rule(halfwidth: float, panels: int, grading: float):
    """Midpoint nodes and panel widths on [-L, L], mirror symmetric."""
    brk = _axis_panels(halfwidth, panels, grading)
    mids = 0.5 * (brk[:-1] + brk[1:])
    widths = np.diff(brk)
    nodes = np.concatenate([-mids[::-1], mids])
    w = np.concatenate([widths[::-1], widths])
    return nodes, w, brk


@dataclass
class WeightedGrid:
    """Tensor-product quadrature grid for one root system."""

    root_system: RootSystem
    box_halfwidth: float
    resolution: int          # nodes per axis (even)
    grading: float
    nodes: np.ndarray        # (n, d), C-order flattening of the tensor grid
    quad_weights: np.ndarray  # (n,), panel volume times omega(node)
    axis_nodes: list = field(repr=False, default_factory=list)
    axis_widths: list = field(repr=False, default_factory=list)
    axis_breakpoints: list = field(repr=False, default_factory=list)
    _rho_cache: dict = field(repr=False, default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.root_system.dimension

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axis_nodes)

    def core_mask(self, margin: float) -> np.ndarray:
        """Nodes at least `margin` away from the truncation boundary."""
        lim = self.box_halfwidth - margin
        return np.all(np.abs(self.nodes) <= lim, axis=1)

    def sign_flip_index(self, axis: int) -> np.ndarray:
        """Permutation of node indices realizing x_axis -> -x_axis."""
        shp = self.shape()
        idx = np.arange(self.n_nodes).reshape(shp)
        idx = np.flip(idx, axis=axis)
        return idx.ravel()

    def group_index_maps(self, group: WeylGroup) -> list[np.ndarray]:
        """For each group element a permutation p with nodes[p[i]] = g nodes[i].

        Only available when the node set is exactly invariant under every
        element (true for sign-flip products on mirrored grids).
        """
        lookup = {tuple(np.round(pt, 9)): i for i, pt in enumerate(self.nodes)}
        maps = []
        for g in group.elements:
            moved = np.round(self.nodes @ g.T, 9) + 0.0
            try:
                perm = np.array([lookup[tuple(pt)] for pt in moved], dtype=int)
            except KeyError:
                raise GridError("node set is not invariant under the group") from None
            maps.append(perm)
        return maps

    def rho_matrix(self, group: WeylGroup) -> np.ndarray:
        """Cached pairwise orbit distances between nodes."""
        key = group.order
        if key not in self._rho_cache:
            from .reflection import orbit_distance_matrix
            self._rho_cache[key] = orbit_distance_matrix(
                group, self.nodes, self.nodes)
        return self._rho_cache[key]


@dataclass
class SampledFunction:
    """Values on a grid's nodes; mask marks nodes excluded from norms."""

    grid: WeightedGrid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise GridError("values must be one scalar per grid node")
        if not np.all(np.isfinite(self.values)):
            raise GridError("sampled values must be finite")

    def valid(self) -> np.ndarray:
        return np.ones(self.grid.n_nodes, bool) if self.mask is None else self.mask


def build_grid(system: RootSystem, box_halfwidth: float, resolution: int,
               grading: float = 2.0) -> WeightedGrid:
    """Build the mirrored graded tensor grid for `system`.

    resolution is the per-axis node count (even, >= 8).  Axes whose
    coordinate hyperplane carries a singular weight factor are graded with
    the given exponent; others stay uniform.  When the system has singular
    hyperplanes not aligned with any axis (dihedral), panel counts are
    staggered across axes so tensor nodes cannot land on those diagonals.
    """
    if resolution < _MIN_RESOLUTION:
        raise GridError(f"resolution must be >= {_MIN_RESOLUTION}")
    if resolution % 2:
        raise GridError("resolution must be even (mirror-symmetric grid)")
    if box_halfwidth <= 0:
        raise GridError("box halfwidth must be positive")
    if grading < 1.0:
        raise GridError("grading exponent must be >= 1")

    d = system.dimension
    singular_axes = np.zeros(d, bool)
    off_axis_singularity = False
    for row, k in zip(system.positive_roots, system.positive_multiplicities):
        if k == 0.0:
            continue
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size == 1:
            singular_axes[nz[0]] = True
        else:
            off_axis_singularity = True

    axis_nodes, axis_widths, axis_breaks = [], [], []
    for j in range(d):
        panels = resolution // 2
        if off_axis_singularity:
            panels += j  # stagger so no two axes share node coordinates
        g = grading if singular_axes[j] else 1.0
        nodes, w, brk = _axis_rule(box_halfwidth, panels, g)
        axis_nodes.append(nodes)
        axis_widths.append(w)
        axis_breaks.append(brk)

    mesh = np.meshgrid(*axis_nodes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*axis_widths, indexing="ij")
    panel_vol = np.ones(nodes.shape[0])
    for wm in wmesh:
        panel_vol = panel_vol * wm.ravel()

    pairings = np.abs(nodes @ system.positive_roots.T)
    on_hyperplane = np.any(
        (pairings < 1e-12) & (system.positive_multiplicities[None, :] > 0), axis=1)
    if np.any(on_hyperplane):
        raise GridError("grid node fell on a singular reflection hyperplane")

    qw = panel_vol * weight(system, nodes)
    return WeightedGrid(system, float(box_halfwidth), int(resolution),
                        float(grading), nodes, qw,
                        axis_nodes, axis_widths, axis_breaks)


def sample(grid: WeightedGrid, fn) -> SampledFunction:
    """Sample a callable of point arrays on the grid nodes."""
    vals = np.asarray(fn(grid.nodes), dtype=float)
    return SampledFunction(grid, vals)


def integrate(grid: WeightedGrid, f) -> float:
    """Integral of f against d omega via the grid rule.

    Summation is numpy's pairwise reduction, so results are deterministic
    for a fixed grid regardless of how callers parallelize around this.
    """
    vals = f.values if isinstance(f, SampledFunction) else np.asarray(f, dtype=float)
    if vals.shape != (grid.n_nodes,):
        raise GridError("integrand must supply one value per node")
    if isinstance(f, SampledFunction) and f.mask is not None:
        vals = np.where(f.mask, vals, 0.0)
    return float(np.sum(vals * grid.quad_weights))


def lp_norm(grid: WeightedGrid, f, p: float = 1.0) -> float:
    """L^p(omega) norm on the grid; p = inf is the max over valid nodes."""
    vals = f.values if isinstance(f, SampledFunction) else np.asarray(f, dtype=float)
    valid = f.valid() if isinstance(f, SampledFunction) else np.ones(len(vals), bool)
    if np.isinf(p):
        return float(np.max(np.abs(vals[valid]), initial=0.0))
    return float(np.sum(np.abs(vals[valid]) ** p * grid.quad_weights[valid]) ** (1.0 / p))


def grid_to_table(grid: WeightedGrid, path) -> None:
    """Serialize nodes and quadrature weights as a plain text table."""
    table = np.column_stack([grid.nodes, grid.quad_weights])
    d = grid.dimension
    header = ",".join([f"x{j + 1}" for j in range(d)] + ["quad_weight"])
    np.savetxt(path, table, delimiter=",", header=header, comments="")


def grid_from_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (nodes, quad_weights) written by grid_to_table."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, :-1], table[:, -1]
