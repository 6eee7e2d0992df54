"""Reference evolution of the rank-one heat equation by finite differences.

Independent check path for the closed-form kernel: evolve

    du/dt = u'' + (2k/x) u' - (k/x^2) (u(x) - u(-x))

with explicit Euler on a uniform staggered grid (no node at x = 0; the
reflection term is an index mirror).  The initial datum is a narrow
Gaussian normalized against d omega_k = 2^k |x|^(2k) dx, so the evolved
profile approximates the kernel column smoothed by that bump.  Kernel
validation compares the evolved profile with the closed-form kernel
propagating the same discrete datum, which removes the bump-width bias
from the comparison.

The Euler step is stable for dt <= c dx^2 / (1 + 2k): Gershgorin applied
to the discrete operator at the first node off the origin gives spectrum
magnitude ~ (4 + 8k)/dx^2, so the classical dt = c dx^2 rule must shrink
as the multiplicity grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ReferenceEvolution:
    k: float
    x: np.ndarray                 # staggered grid, mirror symmetric
    dx: float
    initial: np.ndarray           # normalized narrow Gaussian in d omega
    center: float
    snapshots: dict               # t -> profile u(t, x)

    def profile(self, t: float) -> np.ndarray:
        return self.snapshots[float(t)]

    def at(self, t: float, x_probe: float) -> float:
        """Evolved value at the grid node nearest x_probe."""
        i = int(np.argmin(np.abs(self.x - x_probe)))
        return float(self.snapshots[float(t)][i])

    def measure_weights(self) -> np.ndarray:
        """Quadrature weights of d omega on the reference grid."""
        return (2.0 ** self.k) * np.abs(self.x) ** (2.0 * self.k) * self.dx


def evolve_rank_one(k: float, center: float, times,
                    domain_halfwidth: float = 8.0, dx: float = 4e-3,
                    cfl: float = 0.25, width: float = 1e-2) -> ReferenceEvolution:
    """Evolve the narrow-bump datum and record profiles at the given times.

    times must be positive and increasing; the step count between
    checkpoints is chosen so every checkpoint lands exactly.
    """
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0:
        raise ValueError("checkpoint times must be positive")
    if k < 0:
        raise ValueError("multiplicity must be nonnegative")

    n = int(round(2.0 * domain_halfwidth / dx))
    n += n % 2  # even count keeps the staggered grid mirror symmetric
    x = (np.arange(n) + 0.5) * dx - domain_halfwidth
    inv_dx2 = 1.0 / (dx * dx)

    u = np.exp(-((x - center) ** 2) / (2.0 * width ** 2))
    w = (2.0 ** k) * np.abs(x) ** (2.0 * k) * dx
    mass = float(np.sum(u * w))
    if mass <= 0:
        raise ValueError("initial bump carries no mass on this grid")
    u = u / mass
    initial = u.copy()

    dt_max = cfl * dx * dx / (1.0 + 2.0 * k)
    snapshots = {}
    t_now = 0.0
    coef1 = 2.0 * k / x
    coef2 = k / (x * x)
    for t_stop in times:
        steps = max(1, int(np.ceil((t_stop - t_now) / dt_max)))
        dt = (t_stop - t_now) / steps
        for _ in range(steps):
            um = np.empty_like(u)
            up = np.empty_like(u)
            um[1:] = u[:-1]
            um[0] = 0.0      # Dirichlet closure; boundary mass is negligible
            up[:-1] = u[1:]
            up[-1] = 0.0
            lap = (up - 2.0 * u + um) * inv_dx2
            if k != 0.0:
                grad = (up - um) * (0.5 / dx)
                lap = lap + coef1 * grad - coef2 * (u - u[::-1])
            u = u + dt * lap
        t_now = t_stop
        snapshots[t_stop] = u.copy()
    return ReferenceEvolution(k, x, dx, initial, float(center), snapshots)


def propagate_with_kernel(kernel_fn, evo: ReferenceEvolution, t: float,
                          x_targets) -> np.ndarray:
    """Push the reference datum forward with a kernel callable
    kernel_fn(t, x_array, y_array) by quadrature on the reference grid,
    evaluated at the given target points (snapped to grid nodes)."""
    x_targets = np.atleast_1d(np.asarray(x_targets, dtype=float))
    snapped = evo.x[np.argmin(np.abs(evo.x[None, :] - x_targets[:, None]), axis=1)]
    w = evo.measure_weights()
    K = kernel_fn(t, snapped[:, None], evo.x[None, :])
    return K @ (evo.initial * w)
