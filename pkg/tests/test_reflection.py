import numpy as np
import pytest

from dunkl_lab.reflection import (
    ROOT_NORM,
    RootSystemError,
    build_root_system,
    dihedral_root_system,
    direct_sum_root_system,
    generate_group,
    orbit_ball_membership,
    orbit_distance,
    orbit_distance_matrix,
    reflect,
    reflection_matrix,
    scalar_invariants,
    validate_root_system,
    weight,
    z2_root_system,
)


def test_z2_scalars():
    system = z2_root_system([0.5, 1.5])
    inv = scalar_invariants(system)
    assert inv.gamma == pytest.approx(2.0)
    assert inv.homogeneous_dimension == pytest.approx(6.0)
    assert inv.group_order == 4


def test_z2_weight_value():
    system = z2_root_system([1.0])
    assert weight(system, [2.0]) == pytest.approx(8.0)
    # homogeneity: w(cx) = c^{2 gamma} w(x)
    assert weight(system, [6.0]) == pytest.approx(8.0 * 9.0)


def test_dihedral_square():
    system = dihedral_root_system(4, 1.0, 1.0)
    assert system.roots.shape == (8, 2)
    group = generate_group(system)
    assert len(group.elements) == 8
    inv = scalar_invariants(system, group)
    assert inv.gamma == pytest.approx(4.0)
    assert inv.homogeneous_dimension == pytest.approx(10.0)


def test_dihedral_odd_single_orbit():
    system = dihedral_root_system(3, 0.7)
    inv = scalar_invariants(system)
    assert inv.gamma == pytest.approx(3 * 0.7)
    assert inv.group_order == 6
    with pytest.raises(RootSystemError):
        dihedral_root_system(3, 0.7, 0.9)


def test_root_norm_fixed():
    for system in (z2_root_system([1.0, 0.3]), dihedral_root_system(6, 0.4, 0.8)):
        norms = np.linalg.norm(system.roots, axis=1)
        assert np.allclose(norms, ROOT_NORM, atol=1e-12)


def test_reflection_involution(rng):
    alpha = rng.normal(size=3)
    alpha *= ROOT_NORM / np.linalg.norm(alpha)
    x = rng.normal(size=(20, 3))
    assert np.allclose(reflect(alpha, reflect(alpha, x)), x, atol=1e-12)
    mat = reflection_matrix(alpha)
    assert np.allclose(mat @ mat, np.eye(3), atol=1e-12)
    assert np.allclose(mat @ alpha, -alpha, atol=1e-12)


def test_group_closure_and_orthogonality():
    group = generate_group(dihedral_root_system(5, 0.5))
    mats = group.elements
    assert np.allclose(mats[0], np.eye(2))
    # closed under composition
    flat = mats.reshape(len(mats), -1)
    for a in mats:
        for b in mats:
            prod = (a @ b).reshape(-1)
            dist = np.abs(flat - prod).max(axis=1).min()
            assert dist < 1e-10
    for g in mats:
        assert np.allclose(g.T @ g, np.eye(2), atol=1e-12)


def test_weight_group_invariance(rng):
    system = dihedral_root_system(4, 0.6, 1.1)
    group = generate_group(system)
    x = rng.normal(size=(15, 2))
    w = weight(system, x)
    for g in group.elements:
        assert np.allclose(weight(system, x @ g.T), w, rtol=1e-12)


def test_validate_rejects_broken_systems():
    good = z2_root_system([1.0, 1.0])
    validate_root_system(good)

    bad_norm = build_root_system(
        {"family": "z2", "multiplicities": [1.0]}
    )
    bad_norm.roots[0] *= 1.5
    with pytest.raises(RootSystemError):
        validate_root_system(bad_norm)

    lopsided = z2_root_system([1.0])
    lopsided.multiplicities[0] = 0.25
    with pytest.raises(RootSystemError):
        validate_root_system(lopsided)


def test_orbit_distance_bounds(rng):
    group = generate_group(z2_root_system([1.0, 0.5]))
    X = rng.normal(size=(25, 2)) * 3
    Y = rng.normal(size=(25, 2)) * 3
    rho = orbit_distance_matrix(group, X, Y)
    euclid = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    assert np.all(rho <= euclid + 1e-12)
    # invariance under the group action on either argument
    for g in group.elements:
        assert np.allclose(orbit_distance_matrix(group, X @ g.T, Y), rho, atol=1e-12)
        assert np.allclose(orbit_distance_matrix(group, X, Y @ g.T), rho, atol=1e-12)
    assert np.allclose(rho, orbit_distance_matrix(group, Y, X).T, atol=1e-12)


def test_orbit_distance_reflected_points():
    group = generate_group(z2_root_system([1.0, 1.0]))
    x = np.array([1.0, 0.5])
    assert orbit_distance(group, x, np.array([-1.0, 0.5])) == pytest.approx(0.0)
    assert orbit_distance(group, x, np.array([1.0, -0.5])) == pytest.approx(0.0)


def test_orbit_ball_membership(rng):
    group = generate_group(z2_root_system([0.8, 0.8]))
    center = np.array([2.0, 1.0])
    pts = rng.normal(size=(200, 2)) * 3
    member = orbit_ball_membership(group, center, 1.5, pts)
    rho = np.array([orbit_distance(group, center, p) for p in pts])
    assert np.array_equal(member, rho < 1.5)


def test_direct_sum_matches_product():
    a = z2_root_system([0.5])
    b = z2_root_system([1.5])
    ab = direct_sum_root_system([a, b])
    joint = z2_root_system([0.5, 1.5])
    assert np.allclose(np.sort(ab.roots, axis=0), np.sort(joint.roots, axis=0))
    x = np.array([[0.7, -1.3]])
    assert weight(ab, x) == pytest.approx(weight(joint, x))
