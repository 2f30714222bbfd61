"""Parametric density families on 1D sample space.

Each family provides pdf, cdf, quantile, parameter gradients of pdf and
cdf, and seeded inverse-transform sampling. CDFs use closed forms
(error function, regularized incomplete gamma, piecewise exponential)
rather than quadrature so downstream tensors do not compound error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import digamma, expit, gammainc, gammaincinv, gammaln, ndtr, ndtri

from .grid import Grid

_SQRT2PI = np.sqrt(2.0 * np.pi)


class DomainError(ValueError):
    """Parameter vector violates the family's domain constraints."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded counter-based generator (Philox) used for all sampling."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT2PI


class Family:
    """Base class: a parametric density family with d-dimensional theta."""

    kind: str
    dim: int
    slot_names: tuple[str, ...]

    # -- domain ------------------------------------------------------------

    def validate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise DomainError(
                f"{self.kind} expects theta of length {self.dim}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.kind}: non-finite parameter entries {theta}")
        if not self.in_domain(theta):
            raise DomainError(f"{self.kind}: parameters {theta} violate domain constraints")
        return theta

    def in_domain(self, theta: np.ndarray, margin: float = 0.0) -> bool:
        raise NotImplementedError

    # -- densities ---------------------------------------------------------

    def pdf(self, theta, x):
        raise NotImplementedError

    def cdf(self, theta, x):
        raise NotImplementedError

    def quantile(self, theta, p):
        """Inverse CDF; default monotone bisection to 1e-10 in probability."""
        theta = self.validate(theta)
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile requires p in (0, 1)")
        lo, hi = self._quantile_bracket(theta, p)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(theta, mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < 1e-13 * max(1.0, np.max(np.abs(hi))):
                break
        return 0.5 * (lo + hi)

    def _quantile_bracket(self, theta, p):
        raise NotImplementedError

    # -- parameter derivatives ----------------------------------------------

    def grad_cdf(self, theta, grid: Grid) -> np.ndarray:
        """(d, m) array of dF/dtheta_i at the grid nodes."""
        raise NotImplementedError

    def grad_pdf(self, theta, x) -> np.ndarray:
        """(d, n) array of drho/dtheta_i at arbitrary points x."""
        raise NotImplementedError

    def hess_cdf(self, theta, grid: Grid) -> np.ndarray:
        """(d, d, m) array of second theta-derivatives of the CDF.

        Default: central differences of the analytic grad_cdf, symmetrized.
        """
        theta = self.validate(theta)
        d = self.dim
        out = np.empty((d, d, grid.m))
        for i in range(d):
            h = 1e-4 * max(1.0, abs(theta[i]))
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            out[i] = (self.grad_cdf(tp, grid) - self.grad_cdf(tm, grid)) / (2.0 * h)
        return 0.5 * (out + out.transpose(1, 0, 2))

    # -- sampling ------------------------------------------------------------

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        """n inverse-transform samples, deterministic for a fixed seed."""
        theta = self.validate(theta)
        if n < 1:
            raise ValueError("sample count must be >= 1")
        u = make_rng(seed).random(int(n))
        u = np.clip(u, 1e-16, 1.0 - 1e-16)
        return np.asarray(self.quantile(theta, u), dtype=float)

    def default_grid(self, r: float = 15.0, m: int = 4000) -> Grid:
        return Grid.symmetric(r, m)


class Gaussian1D(Family):
    """N(mu, sigma^2) with theta = (mu, sigma)."""

    kind = "gaussian"
    dim = 2
    slot_names = ("mu", "sigma")

    def in_domain(self, theta, margin=0.0):
        return theta[1] > max(margin, 0.0)

    def pdf(self, theta, x):
        theta = self.validate(theta)
        mu, sigma = theta
        z = (np.asarray(x, dtype=float) - mu) / sigma
        return _phi(z) / sigma

    def cdf(self, theta, x):
        theta = self.validate(theta)
        mu, sigma = theta
        return ndtr((np.asarray(x, dtype=float) - mu) / sigma)

    def quantile(self, theta, p):
        theta = self.validate(theta)
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile requires p in (0, 1)")
        return theta[0] + theta[1] * ndtri(p)

    def grad_cdf(self, theta, grid):
        theta = self.validate(theta)
        mu, sigma = theta
        z = (grid.nodes - mu) / sigma
        rho = _phi(z) / sigma
        return np.stack([-rho, -z * rho])

    def grad_pdf(self, theta, x):
        theta = self.validate(theta)
        mu, sigma = theta
        z = (np.asarray(x, dtype=float) - mu) / sigma
        rho = _phi(z) / sigma
        return np.stack([rho * z / sigma, rho * (z * z - 1.0) / sigma])

    def hess_cdf(self, theta, grid):
        theta = self.validate(theta)
        mu, sigma = theta
        z = (grid.nodes - mu) / sigma
        phi = _phi(z)
        s2 = sigma * sigma
        h_mm = -z * phi / s2
        h_ms = phi * (1.0 - z * z) / s2
        h_ss = z * phi * (2.0 - z * z) / s2
        return np.stack([np.stack([h_mm, h_ms]), np.stack([h_ms, h_ss])])


class GaussianMixture2(Family):
    """Two-component Gaussian mixture, theta = (a, mu1, var1, mu2, var2).

    The weight slot is either the mixing proportion a in [0, 1] (direct
    form) or an unconstrained value with weights 1/(1+exp(a)),
    1/(1+exp(-a)) (logit form).
    """

    dim = 5
    slot_names = ("a", "mu1", "var1", "mu2", "var2")

    def __init__(self, parametrization: str = "direct"):
        if parametrization not in ("direct", "logit"):
            raise ValueError(f"unknown mixture parametrization {parametrization!r}")
        self.parametrization = parametrization
        self.kind = f"mixture-{parametrization}"

    def in_domain(self, theta, margin=0.0):
        if theta[2] <= max(margin, 0.0) or theta[4] <= max(margin, 0.0):
            return False
        if self.parametrization == "direct":
            return margin <= theta[0] <= 1.0 - margin
        return True

    def weights(self, theta):
        if self.parametrization == "direct":
            return theta[0], 1.0 - theta[0]
        w1 = expit(-theta[0])
        return w1, 1.0 - w1

    def _components(self, theta, x):
        x = np.asarray(x, dtype=float)
        mu1, s1 = theta[1], np.sqrt(theta[2])
        mu2, s2 = theta[3], np.sqrt(theta[4])
        z1, z2 = (x - mu1) / s1, (x - mu2) / s2
        return z1, z2, s1, s2

    def pdf(self, theta, x):
        theta = self.validate(theta)
        w1, w2 = self.weights(theta)
        z1, z2, s1, s2 = self._components(theta, x)
        return w1 * _phi(z1) / s1 + w2 * _phi(z2) / s2

    def cdf(self, theta, x):
        theta = self.validate(theta)
        w1, w2 = self.weights(theta)
        z1, z2, _, _ = self._components(theta, x)
        return w1 * ndtr(z1) + w2 * ndtr(z2)

    def _quantile_bracket(self, theta, p):
        z = ndtri(np.asarray(p, dtype=float))
        q1 = theta[1] + np.sqrt(theta[2]) * z
        q2 = theta[3] + np.sqrt(theta[4]) * z
        # the mixture quantile lies between the component quantiles
        return np.minimum(q1, q2), np.maximum(q1, q2)

    def _grad_rows(self, theta, x):
        w1, w2 = self.weights(theta)
        z1, z2, s1, s2 = self._components(theta, x)
        rho1, rho2 = _phi(z1) / s1, _phi(z2) / s2
        return w1, w2, z1, z2, s1, s2, rho1, rho2

    def _dweight_da(self, theta):
        if self.parametrization == "direct":
            return 1.0
        w1, w2 = self.weights(theta)
        return -w1 * w2

    def grad_cdf(self, theta, grid):
        theta = self.validate(theta)
        w1, w2, z1, z2, s1, s2, rho1, rho2 = self._grad_rows(theta, grid.nodes)
        dF_da = self._dweight_da(theta) * (ndtr(z1) - ndtr(z2))
        return np.stack(
            [
                dF_da,
                -w1 * rho1,
                -w1 * rho1 * (grid.nodes - theta[1]) / (2.0 * theta[2]),
                -w2 * rho2,
                -w2 * rho2 * (grid.nodes - theta[3]) / (2.0 * theta[4]),
            ]
        )

    def grad_pdf(self, theta, x):
        theta = self.validate(theta)
        x = np.asarray(x, dtype=float)
        w1, w2, z1, z2, s1, s2, rho1, rho2 = self._grad_rows(theta, x)
        v1, v2 = theta[2], theta[4]
        d1, d2 = x - theta[1], x - theta[3]
        return np.stack(
            [
                self._dweight_da(theta) * (rho1 - rho2),
                w1 * rho1 * d1 / v1,
                w1 * rho1 * (d1 * d1 - v1) / (2.0 * v1 * v1),
                w2 * rho2 * d2 / v2,
                w2 * rho2 * (d2 * d2 - v2) / (2.0 * v2 * v2),
            ]
        )


class Gamma(Family):
    """Gamma(alpha, beta) with pdf beta^a x^(a-1) exp(-beta x) / Gamma(a)."""

    kind = "gamma"
    dim = 2
    slot_names = ("alpha", "beta")

    def in_domain(self, theta, margin=0.0):
        return theta[0] > max(margin, 0.0) and theta[1] > max(margin, 0.0)

    def pdf(self, theta, x):
        theta = self.validate(theta)
        alpha, beta = theta
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xv = np.atleast_1d(x)
        out = np.zeros_like(xv)
        pos = xv > 0.0
        out[pos] = np.exp(
            alpha * np.log(beta)
            + (alpha - 1.0) * np.log(xv[pos])
            - beta * xv[pos]
            - gammaln(alpha)
        )
        return out[0] if scalar else out

    def cdf(self, theta, x):
        theta = self.validate(theta)
        alpha, beta = theta
        x = np.asarray(x, dtype=float)
        return gammainc(alpha, np.maximum(beta * x, 0.0))

    def quantile(self, theta, p):
        theta = self.validate(theta)
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile requires p in (0, 1)")
        return gammaincinv(theta[0], p) / theta[1]

    def grad_cdf(self, theta, grid):
        theta = self.validate(theta)
        alpha, beta = theta
        x = grid.nodes
        rho = self.pdf(theta, x)
        # dF/dalpha = int_0^x rho(y) (log(beta y) - psi(alpha)) dy; the
        # mass below grid.left (~1e-6) is negligible for alpha away from 0
        integrand = rho * (np.log(beta * x) - digamma(alpha))
        da = cumulative_trapezoid(integrand, x, initial=0.0)
        db = rho * x / beta
        return np.stack([da, db])

    def grad_pdf(self, theta, x):
        theta = self.validate(theta)
        alpha, beta = theta
        x = np.asarray(x, dtype=float)
        rho = self.pdf(theta, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            logx = np.where(x > 0.0, np.log(np.maximum(beta * x, 1e-300)), 0.0)
        return np.stack([rho * (logx - digamma(alpha)), rho * (alpha / beta - x)])

    def default_grid(self, r: float = 15.0, m: int = 4000) -> Grid:
        return Grid.positive(r, m)


class Laplace(Family):
    """Laplace(mu, b) with pdf exp(-|x-mu|/b) / (2b)."""

    kind = "laplace"
    dim = 2
    slot_names = ("mu", "b")

    def in_domain(self, theta, margin=0.0):
        return theta[1] > max(margin, 0.0)

    def pdf(self, theta, x):
        theta = self.validate(theta)
        mu, b = theta
        return np.exp(-np.abs(np.asarray(x, dtype=float) - mu) / b) / (2.0 * b)

    def cdf(self, theta, x):
        theta = self.validate(theta)
        mu, b = theta
        z = (np.asarray(x, dtype=float) - mu) / b
        return np.where(z < 0.0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))

    def quantile(self, theta, p):
        theta = self.validate(theta)
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile requires p in (0, 1)")
        mu, b = theta
        return np.where(
            p < 0.5, mu + b * np.log(2.0 * p), mu - b * np.log(2.0 * (1.0 - p))
        )

    def grad_cdf(self, theta, grid):
        theta = self.validate(theta)
        mu, b = theta
        x = grid.nodes
        rho = self.pdf(theta, x)
        return np.stack([-rho, -(x - mu) * rho / b])

    def grad_pdf(self, theta, x):
        theta = self.validate(theta)
        mu, b = theta
        x = np.asarray(x, dtype=float)
        rho = self.pdf(theta, x)
        return np.stack(
            [rho * np.sign(x - mu) / b, rho * (np.abs(x - mu) / b - 1.0) / b]
        )


_FAMILIES = {
    "gaussian": Gaussian1D,
    "gamma": Gamma,
    "laplace": Laplace,
}


def get_family(kind: str) -> Family:
    """Look a family up by its kind tag."""
    if kind == "mixture-direct":
        return GaussianMixture2("direct")
    if kind == "mixture-logit":
        return GaussianMixture2("logit")
    try:
        return _FAMILIES[kind]()
    except KeyError:
        raise ValueError(f"unknown family kind {kind!r}") from None
