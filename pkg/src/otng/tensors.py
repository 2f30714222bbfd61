"""Metric tensors and Hessians on parameter space.

G_W  = int (1/rho) (grad_theta F)^T (grad_theta F) dx   (Wasserstein)
G_F  = int (1/rho) (grad_theta rho)^T (grad_theta rho) dx   (Fisher-Rao)
Gbar = int (T'/rho) (grad_theta F)^T (grad_theta F) dx  (modified Wasserstein)
Hess = int (T - x) grad2_theta F dx + Gbar              (exact W2 Hessian)

plus the Gaussian closed form <mu1., mu2.> + tr(S1 Sigma S2) with
S Sigma + Sigma S = Sigma-dot (Lyapunov).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .families import Family
from .grid import Grid
from .transport import EmpiricalTarget, distribution, optimal_map

RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricMatrix:
    """Symmetric d x d preconditioner with regularized solve support."""

    entries: np.ndarray
    kind: str
    regularization: float = 0.0
    unstable: bool = False
    tail_bound: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        lam = _regularization(a)
        object.__setattr__(self, "regularization", lam)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def solve(self, v: np.ndarray) -> np.ndarray:
        a = self.entries
        if self.regularization > 0.0:
            a = a + self.regularization * np.eye(self.dim)
        return np.linalg.solve(a, np.asarray(v, dtype=float))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def condition_number(self) -> float:
        ev = self.eigenvalues()
        lam = self.regularization
        return float((ev[-1] + lam) / max(ev[0] + lam, np.finfo(float).tiny))


def _regularization(a: np.ndarray) -> float:
    # add lam*I only when the matrix is nearly rank-deficient (e.g. the
    # mixture tensor at the a in {0, 1} boundary)
    d = a.shape[0]
    thresh = 1e-9 * np.trace(a) / d
    if thresh <= 0.0:
        return np.finfo(float).tiny
    if np.linalg.eigvalsh(a)[0] < thresh:
        return thresh
    return 0.0


def _weighted_outer(rows: np.ndarray, rho: np.ndarray, grid: Grid, extra=None):
    """Assemble int extra/rho rows^T rows dx with a density floor.

    Returns the matrix and a bound on the discarded tail integrand.
    """
    w = grid.trapezoid_weights()
    mask = rho > RHO_FLOOR
    inv = np.where(mask, 1.0 / np.maximum(rho, RHO_FLOOR), 0.0)
    weight = w * inv
    if extra is not None:
        weight = weight * extra
    mat = (rows * weight) @ rows.T
    # bound the discarded mass with rho clamped at the floor
    if np.all(mask):
        tail = 0.0
    else:
        dropped = w * ~mask / RHO_FLOOR
        if extra is not None:
            dropped = dropped * np.abs(extra)
        tail = float(np.max(np.abs(rows) ** 2 @ dropped))
    return 0.5 * (mat + mat.T), tail


def wasserstein_metric_tensor(family: Family, theta, grid: Grid) -> MetricMatrix:
    theta = family.validate(theta)
    rho = np.asarray(family.pdf(theta, grid.nodes), dtype=float)
    mat, tail = _weighted_outer(family.grad_cdf(theta, grid), rho, grid)
    return MetricMatrix(mat, kind="Wasserstein", tail_bound=tail)


def fisher_metric_tensor(family: Family, theta, grid: Grid) -> MetricMatrix:
    theta = family.validate(theta)
    rho = np.asarray(family.pdf(theta, grid.nodes), dtype=float)
    mat, tail = _weighted_outer(family.grad_pdf(theta, grid.nodes), rho, grid)
    return MetricMatrix(mat, kind="FisherRao", tail_bound=tail)


def modified_wasserstein_tensor(family: Family, theta, target, grid: Grid) -> MetricMatrix:
    """G_W with the integrand weighted by T' toward the target.

    Empirical targets make T a step function; the resulting spiky T' is
    used as-is and flagged unstable.
    """
    theta = family.validate(theta)
    tmap = optimal_map(distribution(family, theta), target, grid)
    rho = np.asarray(family.pdf(theta, grid.nodes), dtype=float)
    mat, tail = _weighted_outer(
        family.grad_cdf(theta, grid), rho, grid, extra=tmap.derivative
    )
    return MetricMatrix(
        mat,
        kind="ModifiedWasserstein",
        unstable=tmap.nonsmooth,
        tail_bound=tail,
    )


def w2_hessian(family: Family, theta, target, grid: Grid) -> MetricMatrix:
    """Exact Hessian of (1/2) W2^2 for a continuous target."""
    if isinstance(target, EmpiricalTarget):
        raise ValueError(
            "w2_hessian requires a continuous target; use the modified "
            "Wasserstein tensor or finite differences for empirical data"
        )
    theta = family.validate(theta)
    tmap = optimal_map(distribution(family, theta), target, grid)
    hess_f = family.hess_cdf(theta, grid)
    w = grid.trapezoid_weights()
    term1 = hess_f @ (w * (tmap.values - grid.nodes))
    term2 = modified_wasserstein_tensor(family, theta, target, grid)
    return MetricMatrix(term1 + term2.entries, kind="Hessian", unstable=term2.unstable)


def lyapunov_solve(sigma: np.ndarray, sigma_dot: np.ndarray) -> np.ndarray:
    """Solve S Sigma + Sigma S = Sigma_dot for symmetric S (Sigma SPD).

    Eigendecomposition solver: in Sigma's eigenbasis
    S_ij = Sigma_dot_ij / (lam_i + lam_j).
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    sigma_dot = np.atleast_2d(np.asarray(sigma_dot, dtype=float))
    if sigma.shape != sigma_dot.shape or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma and sigma_dot must be square and of equal shape")
    lam, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if lam[0] < 1e-12:
        raise ValueError(f"sigma is numerically singular (min eigenvalue {lam[0]:.3e})")
    rhs = v.T @ (0.5 * (sigma_dot + sigma_dot.T)) @ v
    s = rhs / (lam[:, None] + lam[None, :])
    s = v @ s @ v.T
    return 0.5 * (s + s.T)


@dataclass(frozen=True)
class GaussianTangent:
    """Tangent vector (mu-dot, Sigma-dot) of the Gaussian family at Sigma.

    S solves the Lyapunov equation S Sigma + Sigma S = Sigma-dot; the
    transport potential gradient is S(x - mu) + mu-dot.
    """

    mu_dot: np.ndarray
    sigma_dot: np.ndarray
    s: np.ndarray = field(repr=False)

    @classmethod
    def from_velocity(cls, mu_dot, sigma_dot, sigma) -> "GaussianTangent":
        mu_dot = np.atleast_1d(np.asarray(mu_dot, dtype=float))
        sigma_dot = np.atleast_2d(np.asarray(sigma_dot, dtype=float))
        return cls(mu_dot=mu_dot, sigma_dot=sigma_dot, s=lyapunov_solve(sigma, sigma_dot))


def gaussian_closed_form_inner(xi: GaussianTangent, eta: GaussianTangent, sigma) -> float:
    """Closed-form Gaussian metric <mu1., mu2.> + tr(S1 Sigma S2)."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if xi.mu_dot.shape != eta.mu_dot.shape or xi.s.shape != eta.s.shape:
        raise ValueError("tangent dimensions do not match")
    if xi.s.shape != sigma.shape:
        raise ValueError("tangents and sigma have mismatched dimensions")
    return float(xi.mu_dot @ eta.mu_dot + np.trace(xi.s @ sigma @ eta.s))
