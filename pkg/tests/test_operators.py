import itertools

import numpy as np
import pytest

from dunkl_lab.grids import build_grid, sample
from dunkl_lab.heat import HeatKernelModel, SemigroupSampler
from dunkl_lab.operators import (
    OperatorError,
    OscillationBrackets,
    TimeGrid,
    TruncationWarning,
    default_radii,
    hardy_littlewood_maximal,
    littlewood_paley_g,
    maximal_operator,
    oscillation_core,
    oscillation_core_batch,
    rho_maximal,
    variation_core,
    variation_core_batch,
    variation_operator,
)
from dunkl_lab.reflection import generate_group, z2_root_system


def brute_variation(a, sigma):
    n = len(a)
    best = 0.0
    for r in range(2, n + 1):
        for idx in itertools.combinations(range(n), r):
            s = sum(
                abs(a[idx[j]] - a[idx[j + 1]]) ** sigma for j in range(r - 1)
            ) ** (1.0 / sigma)
            best = max(best, s)
    return best


def brute_oscillation(a, members):
    total = 0.0
    a = np.asarray(a, float)
    for idx in members:
        if len(idx) >= 2:
            best = max(abs(a[p] - a[q]) for p, q in itertools.combinations(idx, 2))
            total += best**2
    return float(np.sqrt(total))


def test_variation_examples():
    assert variation_core([3.0, 1.0, 2.0], 2.0) == pytest.approx(np.sqrt(5.0))
    # sigma = 1 is the full total variation
    a = [0.0, 2.0, -1.0, 3.0]
    assert variation_core(a, 1.0) == pytest.approx(2 + 3 + 4)


def test_variation_rejects_small_sigma():
    with pytest.raises(OperatorError):
        variation_core([1.0, 2.0], 0.5)


def test_variation_matches_bruteforce(rng):
    for trial in range(60):
        n = int(rng.integers(2, 9))
        a = rng.normal(size=n)
        sigma = float(rng.uniform(1.0, 4.0))
        assert variation_core(a, sigma) == pytest.approx(
            brute_variation(a, sigma), rel=1e-12
        )


def test_variation_batch_matches_loop(rng):
    traj = rng.normal(size=(7, 30))  # (time, node)
    got = variation_core_batch(traj, 2.0)
    want = [variation_core(traj[:, j], 2.0) for j in range(30)]
    assert np.allclose(got, want, rtol=1e-12)


def test_oscillation_example():
    brackets = OscillationBrackets(
        endpoints=np.array([3.0, 1.0, 0.1]),
        members=(np.array([0, 1]), np.array([2, 3, 4])),
    )
    assert oscillation_core([5, 1, 2, 2, 3], brackets) == pytest.approx(np.sqrt(17.0))


def test_oscillation_matches_bruteforce(rng):
    for trial in range(60):
        n = int(rng.integers(4, 12))
        a = rng.normal(size=n)
        cuts = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
        members = tuple(
            np.arange(lo, hi)
            for lo, hi in zip((0, *cuts), (*cuts, n))
            if hi > lo
        )
        endpoints = np.geomspace(10.0, 0.1, len(members) + 1)
        brackets = OscillationBrackets(endpoints, members)
        assert oscillation_core(a, brackets) == pytest.approx(
            brute_oscillation(a, members), rel=1e-12
        )
    batch = oscillation_core_batch(np.column_stack([a, a]), brackets)
    assert np.allclose(batch, oscillation_core(a, brackets))


def test_time_grid_shape():
    tg = TimeGrid.log_uniform(0.01, 10.0, 16)
    assert tg.count == 16
    assert tg.times[0] == pytest.approx(10.0)
    assert tg.times[-1] == pytest.approx(0.01)
    assert np.all(np.diff(tg.times) < 0)
    with pytest.raises(OperatorError):
        TimeGrid.log_uniform(1.0, 0.1, 8)


def test_dyadic_brackets_cover_grid():
    tg = TimeGrid.log_uniform(0.01, 10.0, 40)
    br = OscillationBrackets.dyadic(tg)
    assert np.allclose(br.endpoints[:-1] / br.endpoints[1:], 2.0)
    # every grid time inside the bracket range is claimed by some bracket
    covered = np.unique(np.concatenate(br.members))
    in_range = np.nonzero(tg.times >= br.endpoints[-1] - 1e-15)[0]
    assert np.array_equal(covered, in_range)


def test_constant_function_operator_values(model_k1, grid_k1, sampler_k1, z2_k1_group):
    # T_t 1 = 1; on the grid this holds wherever the kernel tail stays
    # inside the box, so pick times and a core margin jointly (tails reach
    # ~6 sigma = 6 sqrt(2 t))
    ones = sample(grid_k1, lambda x: np.ones(len(x)))
    tg = TimeGrid.log_uniform(0.2, 0.5, 12)
    core = grid_k1.core_mask(6.0)

    mx = maximal_operator(model_k1, grid_k1, ones, tg, sampler=sampler_k1)
    assert np.allclose(mx.values[core], 1.0, atol=1e-8)

    var = variation_operator(model_k1, grid_k1, ones, tg, 2.0, sampler=sampler_k1)
    assert np.max(np.abs(var.values[core])) < 1e-8

    ball_avg = rho_maximal(grid_k1, z2_k1_group, ones)
    assert np.allclose(ball_avg.values[core], 1.0, atol=5e-2)
    assert np.max(ball_avg.values) < 1.0 + 1e-9  # averages of 1 never exceed 1


def test_variation_operator_homogeneity(model_k1, grid_k1, sampler_k1):
    f = sample(grid_k1, lambda x: np.exp(-((x[:, 0] - 1.0) ** 2)))
    f2 = sample(grid_k1, lambda x: 2.0 * np.exp(-((x[:, 0] - 1.0) ** 2)))
    tg = TimeGrid.log_uniform(0.05, 5.0, 10)
    v1 = variation_operator(model_k1, grid_k1, f, tg, 2.0, sampler=sampler_k1)
    v2 = variation_operator(model_k1, grid_k1, f2, tg, 2.0, sampler=sampler_k1)
    assert np.allclose(v2.values, 2.0 * v1.values, rtol=1e-11, atol=1e-14)


def test_g_function_truncation_warning(model_k1, grid_k1, sampler_k1):
    f = sample(grid_k1, lambda x: np.exp(-0.5 * x[:, 0] ** 2))
    short = TimeGrid.log_uniform(0.2, 0.9, 8)  # integral clearly not converged
    with pytest.warns(TruncationWarning):
        littlewood_paley_g(model_k1, grid_k1, f, short, sampler=sampler_k1)


def test_rho_maximal_dominated_by_reflected_hl(grid_k1, z2_k1_group, rng):
    vals = np.abs(rng.normal(size=grid_k1.n_nodes))
    f = sample(grid_k1, lambda x: np.interp(x[:, 0], grid_k1.nodes[:, 0], vals))
    radii = default_radii(grid_k1, 8)
    lhs = rho_maximal(grid_k1, z2_k1_group, f, radii=radii)
    flip = grid_k1.sign_flip_index(0)
    total = hardy_littlewood_maximal(grid_k1, f, radii=radii).values.copy()
    reflected = sample(grid_k1, lambda x: np.zeros(len(x)))
    reflected.values[:] = f.values[flip]
    total += hardy_littlewood_maximal(grid_k1, reflected, radii=radii).values
    assert np.all(lhs.values <= total + 1e-10)


def test_default_radii_inside_box(grid_k1):
    radii = default_radii(grid_k1, 10)
    assert np.all(np.diff(radii) > 0)
    assert radii[-1] <= 2 * grid_k1.box_halfwidth
    assert radii[0] > 0
