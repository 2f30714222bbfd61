"""Preconditioned descent schemes, line search, stopping rules.

Five schemes: plain gradient descent, diagonally preconditioned GD,
Wasserstein natural gradient, modified Wasserstein (T'-weighted tensor),
and Fisher-Rao natural gradient. Two losses: (1/2) W2^2 against a target
distribution, and negative log-likelihood of sample data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .families import Family
from .grid import Grid
from .tensors import (
    fisher_metric_tensor,
    modified_wasserstein_tensor,
    wasserstein_metric_tensor,
)
from .transport import distribution, w2_objective_gradient, w2_squared

# out-of-domain proposals are rejected when closer than this to the
# boundary (mixture weight in [m, 1-m], scale slots >= m)
DOMAIN_MARGIN = 1e-4

# proposals whose density keeps less than this mass on the grid are
# rejected: once the model leaves the computation region the truncated
# W2 objective is meaningless (it decays to zero as the mass escapes)
MASS_FLOOR = 0.9

LOSSES = ("w2", "nll")
SCHEME_KINDS = ("gd", "diag", "wasserstein", "modified", "fisher")


class Termination(enum.Enum):
    CONVERGED = "converged"
    LINE_SEARCH_FAILED = "line_search_failed"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class Scheme:
    kind: str
    diag: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "diag":
            if self.diag is None:
                raise ValueError("diag scheme needs a positive diagonal vector")
            d = np.asarray(self.diag, dtype=float)
            if np.any(d <= 0.0):
                raise ValueError("diagonal preconditioner entries must be > 0")
            object.__setattr__(self, "diag", d)

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class StoppingRule:
    grad_tol: float = 1e-1
    min_step: float = 1e-4
    max_iter: int = 200

    def __post_init__(self):
        if self.grad_tol <= 0 or self.min_step <= 0 or self.max_iter <= 0:
            raise ValueError("stopping rule fields must be positive")


@dataclass
class Trace:
    """Full optimizer history; objectives are strictly decreasing."""

    thetas: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    cond_numbers: list = field(default_factory=list)
    unstable_flags: list = field(default_factory=list)
    termination: Termination | None = None

    @property
    def iterations(self) -> int:
        return len(self.step_sizes)

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]


def loss_value(loss, family: Family, theta, *, target=None, data=None, grid: Grid = None):
    theta = family.validate(theta)
    if loss == "w2":
        return 0.5 * w2_squared(distribution(family, theta), target, grid)
    if loss == "nll":
        rho = np.asarray(family.pdf(theta, data), dtype=float)
        if np.any(rho <= 0.0):
            return np.inf
        return float(-np.mean(np.log(rho)))
    raise ValueError(f"unknown loss {loss!r}")


def loss_gradient(loss, family: Family, theta, *, target=None, data=None, grid: Grid = None):
    theta = family.validate(theta)
    if loss == "w2":
        return w2_objective_gradient(family, theta, target, grid)
    if loss == "nll":
        rho = np.asarray(family.pdf(theta, data), dtype=float)
        score = family.grad_pdf(theta, data) / rho
        return -score.mean(axis=1)
    raise ValueError(f"unknown loss {loss!r}")


def descent_direction(scheme: Scheme, family: Family, theta, g, *, grid=None, target=None):
    """Direction solving G dir = -g for the scheme's preconditioner G.

    Returns (direction, condition_number, unstable_flag).
    """
    g = np.asarray(g, dtype=float)
    if scheme.kind == "gd":
        return -g, 1.0, False
    if scheme.kind == "diag":
        p = scheme.diag
        return -g / p, float(p.max() / p.min()), False
    if scheme.kind == "wasserstein":
        tensor = wasserstein_metric_tensor(family, theta, grid)
    elif scheme.kind == "fisher":
        tensor = fisher_metric_tensor(family, theta, grid)
    elif scheme.kind == "modified":
        if target is None:
            raise ValueError("modified Wasserstein scheme requires a transport target")
        tensor = modified_wasserstein_tensor(family, theta, target, grid)
    return -tensor.solve(g), tensor.condition_number(), tensor.unstable


def line_search(objective, theta, direction, current, feasible, *, min_step=1e-4, tau0=1.0):
    """Halving line search; largest tau with a strict decrease.

    Returns (tau, candidate, value) or None once tau drops below min_step.
    """
    tau = tau0
    while tau >= min_step:
        cand = theta + tau * direction
        if feasible(cand):
            val = objective(cand)
            if val < current:
                return tau, cand, val
        tau *= 0.5
    return None


def run(
    scheme: Scheme,
    loss: str,
    family: Family,
    theta0,
    *,
    target=None,
    data=None,
    grid: Grid = None,
    stopping: StoppingRule = StoppingRule(),
) -> Trace:
    """Run one descent scheme to termination.

    Termination causes are checked in the order gradient-norm,
    line-search failure, max iterations.
    """
    theta = family.validate(theta0)

    def f(th):
        return loss_value(loss, family, th, target=target, data=data, grid=grid)

    def feasible(th):
        if not family.in_domain(th, margin=DOMAIN_MARGIN):
            return False
        if loss == "w2" and grid is not None:
            rho = np.asarray(family.pdf(th, grid.nodes), dtype=float)
            if np.trapezoid(rho, grid.nodes) < MASS_FLOOR:
                return False
        return True

    trace = Trace()
    obj = f(theta)
    trace.thetas.append(theta.copy())
    trace.objectives.append(obj)

    while True:
        g = loss_gradient(loss, family, theta, target=target, data=data, grid=grid)
        trace.grad_norms.append(float(np.linalg.norm(g)))
        if trace.grad_norms[-1] <= stopping.grad_tol:
            trace.termination = Termination.CONVERGED
            return trace
        if trace.iterations >= stopping.max_iter:
            trace.termination = Termination.MAX_ITERATIONS
            return trace
        direction, cond, unstable = descent_direction(
            scheme, family, theta, g, grid=grid, target=target
        )
        trace.cond_numbers.append(cond)
        trace.unstable_flags.append(unstable)
        hit = line_search(f, theta, direction, obj, feasible, min_step=stopping.min_step)
        if hit is None:
            trace.termination = Termination.LINE_SEARCH_FAILED
            return trace
        tau, theta, obj = hit
        trace.step_sizes.append(tau)
        trace.thetas.append(theta.copy())
        trace.objectives.append(obj)
