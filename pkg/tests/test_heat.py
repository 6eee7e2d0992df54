import numpy as np
import pytest

from dunkl_lab.grids import build_grid, sample
from dunkl_lab.heat import (
    HeatKernelError,
    HeatKernelModel,
    SemigroupSampler,
    apply_semigroup,
    dunkl_laplacian,
    fit_gaussian_bound,
    kernel,
    kernel_mass,
    kernel_rank1,
    kernel_time_derivative,
)
from dunkl_lab.pde_reference import evolve_rank_one, propagate_with_kernel
from dunkl_lab.reflection import generate_group, z2_root_system


def gauss_kernel(t, x, y):
    return np.exp(-((x - y) ** 2) / (4 * t)) / np.sqrt(4 * np.pi * t)


def test_kernel_mass_is_one(model_k1):
    for t in (0.1, 1.0, 10.0):
        for x in (0.0, 0.7, 2.0):
            assert kernel_mass(model_k1, t, [x]) == pytest.approx(1.0, abs=1e-9)


def test_kernel_mass_two_dim():
    model = HeatKernelModel(z2_root_system([0.5, 1.5]))
    for t, x in ((0.5, [0.0, 0.0]), (2.0, [1.0, -0.7])):
        assert kernel_mass(model, t, x) == pytest.approx(1.0, abs=1e-8)


def test_zero_multiplicity_reduces_to_gaussian(rng):
    model = HeatKernelModel(z2_root_system([0.0]))
    t = np.array([0.05, 0.5, 3.0])
    x = rng.normal(size=3)
    y = rng.normal(size=3)
    got = kernel_rank1(0.0, t, x, y)
    assert np.allclose(got, gauss_kernel(t, x, y), rtol=1e-12)
    got_model = np.array([kernel(model, ti, [xi], [yi]) for ti, xi, yi in zip(t, x, y)])
    assert np.allclose(got_model, gauss_kernel(t, x, y), rtol=1e-12)


def test_small_multiplicity_continuity():
    # k -> 0 limit approaches the classical kernel
    t, x, y = 0.7, 1.1, -0.4
    tiny = kernel_rank1(1e-7, t, x, y)
    assert tiny == pytest.approx(gauss_kernel(t, x, y), rel=1e-5)


def test_kernel_symmetry_positivity(model_k1, rng):
    pts = rng.normal(size=(40, 1)) * 3
    for t in (0.02, 0.8, 12.0):
        for i in range(0, 40, 7):
            a, b = pts[i], pts[(i + 11) % 40]
            kab = kernel(model_k1, t, a, b)
            kba = kernel(model_k1, t, b, a)
            assert kab == pytest.approx(kba, rel=1e-11)
            assert kab > 0.0


def test_kernel_scaling_rank_one():
    # T_{c^2 t}(cx, cy) = c^{-D} T_t(x, y) with D = 1 + 2k
    k = 1.0
    t, x, y, c = 0.4, 0.9, -0.3, 2.0
    lhs = kernel_rank1(k, c * c * t, c * x, c * y)
    rhs = kernel_rank1(k, t, x, y) * c ** -(1 + 2 * k)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_series_bessel_branch_agreement():
    # the two evaluation branches must agree across the switchover
    k = 0.8
    for z_target in (0.5e-4, 0.99e-4, 1.01e-4, 2e-4):
        t = 1.0
        x = 1.0
        y = z_target * 2 * t / x  # makes xy/(2t) = z_target
        lo = kernel_rank1(k, t, x, y * (1 - 1e-9))
        hi = kernel_rank1(k, t, x, y * (1 + 1e-9))
        assert lo == pytest.approx(hi, rel=1e-7)


def test_derivative_recursion(model_k1):
    # d/dt T_{t,m} = (m T_{t,m} + T_{t,m+1}) / t, checked by central FD;
    # the m >= 1 values are themselves FD estimates, so use a larger outer
    # step there to keep their noise out of the difference quotient
    t, x, y = 0.6, 1.2, 0.5
    for m, h_rel, tol in ((0, 1e-5, 1e-7), (1, 1e-3, 1e-4), (2, 1e-3, 1e-4)):
        h = h_rel * t
        fd = (
            kernel_time_derivative(model_k1, m, t + h, [x], [y])
            - kernel_time_derivative(model_k1, m, t - h, [x], [y])
        ) / (2 * h)
        tm = kernel_time_derivative(model_k1, m, t, [x], [y])
        tm1 = kernel_time_derivative(model_k1, m + 1, t, [x], [y])
        assert fd == pytest.approx((m * tm + tm1) / t, rel=tol)


def test_derivative_error_estimate(model_k1):
    val, err = kernel_time_derivative(model_k1, 1, 0.5, [1.0], [0.3], return_error=True)
    assert err < 1e-6 * abs(val) + 1e-12


def test_derivative_cap(model_k1):
    with pytest.raises(HeatKernelError):
        kernel_time_derivative(model_k1, 7, 0.5, [1.0], [0.3])


def test_semigroup_law(model_k1, grid_k1, sampler_k1):
    f = sample(grid_k1, lambda x: np.exp(-0.5 * (x[:, 0] - 1.0) ** 2))
    one = apply_semigroup(model_k1, grid_k1, f, 0.7, sampler=sampler_k1)
    two = apply_semigroup(model_k1, grid_k1, one, 0.5, sampler=sampler_k1)
    direct = apply_semigroup(model_k1, grid_k1, f, 1.2, sampler=sampler_k1)
    core = grid_k1.core_mask(2.0)
    diff = np.abs(two.values - direct.values)[core]
    assert diff.max() < 2e-5 * np.abs(direct.values).max()


def test_heat_equation_on_grid(model_k1, grid_k1, sampler_k1):
    f = sample(grid_k1, lambda x: np.exp(-0.5 * x[:, 0] ** 2))
    t = 0.8
    u = apply_semigroup(model_k1, grid_k1, f, t, sampler=sampler_k1)
    lap = dunkl_laplacian(grid_k1, u)
    h = 1e-4 * t
    up = apply_semigroup(model_k1, grid_k1, f, t + h, sampler=sampler_k1)
    dn = apply_semigroup(model_k1, grid_k1, f, t - h, sampler=sampler_k1)
    dt = (up.values - dn.values) / (2 * h)
    ok = lap.mask & grid_k1.core_mask(3.0)
    resid = np.abs(dt - lap.values)[ok]
    assert resid.max() < 1e-2 * np.abs(dt[ok]).max()


def test_laplacian_polynomial(grid_k1):
    # for the rank-one weight |x|^{2k}: Delta x^2 = 2 + 4k = 6 when k = 1
    f = sample(grid_k1, lambda x: x[:, 0] ** 2)
    lap = dunkl_laplacian(grid_k1, f)
    vals = lap.values[lap.mask]
    assert np.allclose(vals, 6.0, atol=1e-6)


def test_sampler_trajectory_matches_apply(model_k1, grid_k1, sampler_k1):
    f = sample(grid_k1, lambda x: np.exp(-((x[:, 0] - 0.5) ** 2)))
    times = np.array([0.3, 1.0, 4.0])
    traj = sampler_k1.trajectory(f.values, times, m=0)
    for i, t in enumerate(times):
        direct = apply_semigroup(model_k1, grid_k1, f, float(t), sampler=sampler_k1)
        assert np.allclose(traj[i], direct.values, rtol=1e-12, atol=1e-15)


def test_fit_gaussian_bound_interior(model_k1, z2_k1_group):
    samples = [(t, np.array([x]), np.array([y]))
               for t in np.geomspace(0.05, 5.0, 7)
               for x in (0.0, 1.0, 2.5)
               for y in (0.3,)]
    fit = fit_gaussian_bound(model_k1, z2_k1_group, samples, m=0)
    assert np.isfinite(fit.constant) and fit.constant > 0
    assert fit.n_samples == len(samples)


def test_pde_reference_quick():
    # coarse cross-check: kernel propagation matches direct PDE evolution
    k, t = 1.0, 0.3
    evo = evolve_rank_one(k, 0.4, [t], domain_halfwidth=6.0, dx=0.008)
    targets = np.array([0.0, 0.5, 1.0, 1.8])
    via_kernel = propagate_with_kernel(
        lambda tt, x, y: kernel_rank1(k, tt, x, y), evo, t, targets)
    idx = [np.argmin(np.abs(evo.x - xi)) for xi in targets]
    direct = evo.snapshots[t][idx]
    assert np.allclose(via_kernel, direct, atol=5e-4 * np.abs(direct).max())
