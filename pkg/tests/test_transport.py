import numpy as np
import pytest

from otng import (
    EmpiricalTarget,
    Grid,
    distribution,
    get_family,
    kantorovich_potential,
    optimal_map,
    w2_distance,
    w2_gradient_via_potential,
    w2_objective_gradient,
    w2_squared,
)

GAUSS = get_family("gaussian")
GRID = Grid.symmetric(15.0, 4000)


def test_gaussian_monge_map_is_affine():
    src = distribution(GAUSS, np.array([-1.0, 1.0]))
    tgt = distribution(GAUSS, np.array([2.0, 3.0]))
    tmap = optimal_map(src, tgt, GRID)
    bulk = np.abs(GRID.nodes + 1.0) < 5.0
    expected = 2.0 + 3.0 * (GRID.nodes + 1.0)
    np.testing.assert_allclose(tmap.values[bulk], expected[bulk], atol=1e-9)
    np.testing.assert_allclose(tmap.derivative[bulk], 3.0, atol=1e-6)
    assert not tmap.nonsmooth


def test_monge_ampere_residual_in_the_bulk():
    fam = get_family("mixture-direct")
    src = distribution(fam, np.array([0.4, -2.0, 1.0, 2.0, 2.0]))
    tgt = distribution(GAUSS, np.array([0.0, 1.5]))
    tmap = optimal_map(src, tgt, GRID)
    bulk = np.abs(GRID.nodes) < 6.0
    pushforward = tgt.pdf(tmap.values) * tmap.derivative
    np.testing.assert_allclose(pushforward[bulk], src.pdf(GRID.nodes)[bulk], atol=2e-5)


def test_potential_of_a_unit_shift():
    # T(x) = x + 1, so phi(x) = int_{-15}^x (y - T(y)) dy = -(x + 15)
    src = distribution(GAUSS, np.array([0.0, 1.0]))
    tgt = distribution(GAUSS, np.array([1.0, 1.0]))
    tmap = optimal_map(src, tgt, GRID)
    phi = kantorovich_potential(tmap)
    np.testing.assert_allclose(phi, -(GRID.nodes + 15.0), atol=1e-4)
    assert np.interp(0.0, GRID.nodes, phi) == pytest.approx(-15.0, abs=1e-6)


@pytest.mark.parametrize(
    "t0,t1",
    [
        ([0.0, 1.0], [1.0, 1.0]),
        ([-2.0, 0.5], [3.0, 2.5]),
        ([0.0, 1.0], [0.0, 4.0]),
    ],
)
def test_gaussian_w2_closed_form(t0, t1):
    # W2^2(N(m0,s0^2), N(m1,s1^2)) = (m0-m1)^2 + (s0-s1)^2
    src = distribution(GAUSS, np.array(t0))
    tgt = distribution(GAUSS, np.array(t1))
    expected = (t0[0] - t1[0]) ** 2 + (t0[1] - t1[1]) ** 2
    # the midpoint probability grid truncates the quantile integral at
    # p = 1/(2 n_prob), which costs a few parts in 1e5 of the tails
    assert w2_squared(src, tgt, GRID) == pytest.approx(expected, rel=2e-4, abs=1e-9)
    assert w2_distance(src, tgt, GRID) == pytest.approx(np.sqrt(expected), rel=2e-4, abs=1e-9)


def test_empirical_cdf_and_quantile_conventions():
    tgt = EmpiricalTarget(np.array([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(tgt.samples, [1.0, 2.0, 3.0])
    # right-continuous step function with jumps 1/N at the samples
    np.testing.assert_allclose(tgt.cdf([0.5, 1.0, 1.5, 3.0, 4.0]), [0, 1 / 3, 1 / 3, 1, 1])
    # generalized inverse: smallest sample whose cdf reaches p
    np.testing.assert_allclose(tgt.quantile([0.1, 1 / 3, 0.34, 0.99]), [1.0, 1.0, 2.0, 3.0])


def test_empirical_target_requires_samples():
    with pytest.raises(ValueError):
        EmpiricalTarget(np.array([]))


def test_map_to_empirical_target_is_flagged_nonsmooth():
    src = distribution(GAUSS, np.array([0.0, 1.0]))
    tgt = EmpiricalTarget(src.quantile((np.arange(20) + 0.5) / 20))
    assert optimal_map(src, tgt, GRID).nonsmooth


def test_w2_against_empirical_samples_shrinks_with_sample_size():
    src = distribution(GAUSS, np.array([0.0, 1.0]))
    medians = []
    for n in (100, 1000, 10000):
        vals = []
        for seed in range(5):
            data = GAUSS.sample(np.array([0.0, 1.0]), n, seed)
            vals.append(w2_squared(src, EmpiricalTarget(data), GRID))
        medians.append(np.median(vals))
    assert medians[0] > medians[1] > medians[2]


def fd_gradient(family, theta, target, grid, h=1e-5):
    out = np.empty(family.dim)
    for i in range(family.dim):
        step = h * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        f_p = 0.5 * w2_squared(distribution(family, tp), target, grid)
        f_m = 0.5 * w2_squared(distribution(family, tm), target, grid)
        out[i] = (f_p - f_m) / (2.0 * step)
    return out


def test_objective_gradient_matches_finite_differences():
    fam = get_family("mixture-direct")
    theta = np.array([0.35, -2.0, 1.5, 3.0, 0.8])
    target = distribution(fam, np.array([0.6, 1.0, 1.0, -4.0, 2.0]))
    g = w2_objective_gradient(fam, theta, target, GRID)
    fd = fd_gradient(fam, theta, target, GRID)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-4


def test_gradient_forms_agree_and_tighten_under_refinement():
    fam = get_family("mixture-direct")
    theta = np.array([0.35, -2.0, 1.5, 3.0, 0.8])
    target = distribution(fam, np.array([0.6, 1.0, 1.0, -4.0, 2.0]))

    def rel_gap(grid):
        g1 = w2_objective_gradient(fam, theta, target, grid)
        g2 = w2_gradient_via_potential(fam, theta, target, grid)
        return np.linalg.norm(g1 - g2) / np.linalg.norm(g1)

    coarse = rel_gap(Grid.symmetric(15.0, 4000))
    fine = rel_gap(Grid.symmetric(15.0, 16000))
    assert coarse < 1e-5
    assert fine < coarse
