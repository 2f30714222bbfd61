"""Wasserstein natural gradient descent on 1D parametric statistical models."""

from .descent import (
    Scheme,
    StoppingRule,
    Termination,
    Trace,
    descent_direction,
    line_search,
    loss_gradient,
    loss_value,
    run,
)
from .families import (
    DomainError,
    Family,
    Gamma,
    Gaussian1D,
    GaussianMixture2,
    Laplace,
    get_family,
    make_rng,
)
from .geodesics import (
    DiscretePath,
    displacement_interpolation,
    geodesic_coordinate_descent,
    hamiltonian_shoot,
    path_energy,
)
from .grid import Grid
from .tensors import (
    GaussianTangent,
    MetricMatrix,
    fisher_metric_tensor,
    gaussian_closed_form_inner,
    lyapunov_solve,
    modified_wasserstein_tensor,
    w2_hessian,
    wasserstein_metric_tensor,
)
from .transport import (
    EmpiricalTarget,
    ParametricTarget,
    TransportMap1D,
    distribution,
    kantorovich_potential,
    optimal_map,
    w2_distance,
    w2_gradient_via_potential,
    w2_objective_gradient,
    w2_squared,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
