import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otng import DomainError, Grid, get_family, make_rng

BULK = Grid.symmetric(20.0, 4000)


def fd_grad_pdf(family, theta, x, h=1e-6):
    out = np.empty((family.dim, np.size(x)))
    for i in range(family.dim):
        step = h * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        out[i] = (family.pdf(tp, x) - family.pdf(tm, x)) / (2.0 * step)
    return out


def fd_grad_cdf(family, theta, grid, h=1e-6):
    out = np.empty((family.dim, grid.m))
    for i in range(family.dim):
        step = h * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        out[i] = (family.cdf(tp, grid.nodes) - family.cdf(tm, grid.nodes)) / (2.0 * step)
    return out


CASES = [
    ("gaussian", np.array([0.5, 1.3])),
    ("gamma", np.array([3.0, 1.5])),
    ("laplace", np.array([-1.0, 2.0])),
    ("mixture-direct", np.array([0.3, -3.0, 0.25, 2.0, 1.0])),
    ("mixture-logit", np.array([0.4, -3.0, 0.25, 2.0, 1.0])),
]


@pytest.mark.parametrize("kind,theta", CASES)
def test_pdf_integrates_to_one(kind, theta):
    fam = get_family(kind)
    grid = fam.default_grid(20.0, 4000)
    mass = grid.trapezoid_weights() @ fam.pdf(theta, grid.nodes)
    assert mass == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind,theta", CASES)
def test_cdf_matches_integrated_pdf(kind, theta):
    fam = get_family(kind)
    grid = fam.default_grid(20.0, 4000)
    from scipy.integrate import cumulative_trapezoid

    integrated = cumulative_trapezoid(fam.pdf(theta, grid.nodes), grid.nodes, initial=0.0)
    shift = fam.cdf(theta, grid.nodes[0])
    np.testing.assert_allclose(fam.cdf(theta, grid.nodes), integrated + shift, atol=2e-5)


@pytest.mark.parametrize("kind,theta", CASES)
def test_quantile_inverts_cdf(kind, theta):
    fam = get_family(kind)
    p = np.linspace(0.01, 0.99, 23)
    x = fam.quantile(theta, p)
    np.testing.assert_allclose(fam.cdf(theta, x), p, atol=1e-9)


@pytest.mark.parametrize("kind,theta", CASES)
def test_grad_cdf_matches_finite_differences(kind, theta):
    fam = get_family(kind)
    grid = fam.default_grid(20.0, 2000)
    analytic = fam.grad_cdf(theta, grid)
    fd = fd_grad_cdf(fam, theta, grid)
    # the gamma shape row is itself a quadrature, so it carries grid error
    np.testing.assert_allclose(analytic, fd, atol=1e-5 if kind == "gamma" else 5e-7)


@pytest.mark.parametrize("kind,theta", CASES)
def test_grad_pdf_matches_finite_differences(kind, theta):
    fam = get_family(kind)
    x = np.linspace(0.2, 8.0, 40) if kind == "gamma" else np.linspace(-8.0, 8.0, 40)
    analytic = fam.grad_pdf(theta, x)
    fd = fd_grad_pdf(fam, theta, x)
    np.testing.assert_allclose(analytic, fd, atol=5e-7)


def test_gaussian_quantile_median_is_mu():
    fam = get_family("gaussian")
    assert fam.quantile(np.array([1.7, 2.0]), 0.5) == pytest.approx(1.7)


def test_gamma_shape_one_is_exponential():
    fam = get_family("gamma")
    p = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(
        fam.quantile(np.array([1.0, 2.0]), p), -np.log(1.0 - p) / 2.0, rtol=1e-12
    )
    assert fam.quantile(np.array([1.0, 2.0]), 0.5) == pytest.approx(0.34657, abs=1e-5)


def test_gaussian_grad_cdf_closed_forms():
    fam = get_family("gaussian")
    theta = np.array([0.3, 1.1])
    rows = fam.grad_cdf(theta, BULK)
    rho = fam.pdf(theta, BULK.nodes)
    z = (BULK.nodes - theta[0]) / theta[1]
    np.testing.assert_allclose(rows[0], -rho, atol=1e-14)
    np.testing.assert_allclose(rows[1], -z * rho, atol=1e-14)


def test_gaussian_analytic_cdf_hessian_matches_fd_default():
    from otng.families import Family

    fam = get_family("gaussian")
    theta = np.array([0.2, 1.4])
    grid = Grid.symmetric(12.0, 600)
    analytic = fam.hess_cdf(theta, grid)
    fd = Family.hess_cdf(fam, theta, grid)
    np.testing.assert_allclose(analytic, fd, atol=1e-7)


def test_laplace_location_row_is_minus_pdf():
    fam = get_family("laplace")
    theta = np.array([0.5, 1.5])
    rows = fam.grad_cdf(theta, BULK)
    np.testing.assert_allclose(rows[0], -fam.pdf(theta, BULK.nodes), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-2.0, 2.0),
    mu1=st.floats(-8.0, 8.0),
    v1=st.floats(1.0, 11.0),
    mu2=st.floats(-8.0, 8.0),
    v2=st.floats(1.0, 11.0),
)
def test_mixture_normalization_and_roundtrip(a, mu1, v1, mu2, v2):
    fam = get_family("mixture-logit")
    theta = np.array([a, mu1, v1, mu2, v2])
    grid = Grid.symmetric(30.0, 3000)
    mass = grid.trapezoid_weights() @ fam.pdf(theta, grid.nodes)
    assert mass == pytest.approx(1.0, abs=1e-3)
    p = np.array([0.05, 0.35, 0.65, 0.95])
    np.testing.assert_allclose(fam.cdf(theta, fam.quantile(theta, p)), p, atol=1e-8)


def test_mixture_weights_direct_and_logit():
    direct = get_family("mixture-direct")
    logit = get_family("mixture-logit")
    assert direct.weights(np.array([0.3, 0, 1, 0, 1])) == (0.3, 0.7)
    w1, w2 = logit.weights(np.array([0.0, 0, 1, 0, 1]))
    assert w1 == pytest.approx(0.5) and w2 == pytest.approx(0.5)


def test_sampling_is_deterministic_and_respects_weights():
    fam = get_family("mixture-direct")
    theta = np.array([0.3, -5.0, 1.0, 5.0, 1.0])
    s1 = fam.sample(theta, 1000, seed=123)
    s2 = fam.sample(theta, 1000, seed=123)
    np.testing.assert_array_equal(s1, s2)
    # components are well separated, so the sign splits them
    assert np.mean(s1 < 0.0) == pytest.approx(0.3, abs=0.05)


def test_sampling_different_seeds_differ():
    fam = get_family("gaussian")
    theta = np.array([0.0, 1.0])
    assert not np.array_equal(fam.sample(theta, 50, 1), fam.sample(theta, 50, 2))


def test_domain_violations_raise():
    fam = get_family("gaussian")
    with pytest.raises(DomainError):
        fam.validate(np.array([0.0, -1.0]))
    with pytest.raises(DomainError):
        fam.validate(np.array([0.0]))
    with pytest.raises(DomainError):
        fam.validate(np.array([np.nan, 1.0]))
    direct = get_family("mixture-direct")
    with pytest.raises(DomainError):
        direct.validate(np.array([1.2, 0.0, 1.0, 0.0, 1.0]))


def test_in_domain_margin():
    fam = get_family("mixture-direct")
    theta = np.array([0.5, 0.0, 1.0, 0.0, 5e-5])
    assert fam.in_domain(theta)
    assert not fam.in_domain(theta, margin=1e-4)


def test_unknown_family_kind():
    with pytest.raises(ValueError):
        get_family("cauchy")


def test_make_rng_is_counter_based_and_seeded():
    r1, r2 = make_rng(7), make_rng(7)
    assert isinstance(r1.bit_generator, np.random.Philox)
    np.testing.assert_array_equal(r1.random(8), r2.random(8))
