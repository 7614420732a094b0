"""Finite-time ruin asymptotics for Gaussian risk models with interest and inflation.

The reserve process discounts both premiums and Gaussian losses, and ruin over a
finite horizon is studied through the discounted loss
``Y(t) = int_0^t exp(-delta(s)) Z(s) ds``. The package provides the variance
profile of ``Y``, the leading-order ruin probability and conditional ruin-time
law, closed-form reference models, extremal constants, and importance-sampled
Monte Carlo to check them.
"""

from .asymptotics import (
    AsymptoticReport,
    VarianceProfile,
    barrier_level,
    check_hypotheses,
    closed_form_oracle,
    example_model,
    log_normal_survival,
    normal_survival,
    ruin_prob_asymptotic,
    sigma_prime_at,
    variance_at,
)
from .errors import (
    ConfigError,
    DegenerateVarianceError,
    DomainError,
    GaussRuinError,
    HypothesisError,
    InsufficientDataError,
    IntegrationError,
    ModelError,
    NumericError,
)
from .models import (
    CovarianceKernel,
    DiscountModel,
    RiskModel,
    discount_eval,
    discounted_time,
    kernel_eval,
)
from .quadrature import QuadratureResult, differentiate, integrate_1d, integrate_triangle
from .simulation import (
    ConditionalRuinTime,
    PathGrid,
    RuinSamples,
    SimEstimate,
    build_grid,
    conditional_ruin_time,
    estimate_ruin,
    ks_weighted,
    ruin_scan,
    sample_discounted_loss,
    simulate_ruin,
)
from .tail_regimes import (
    ExtremalConstantEstimate,
    RegimeSpec,
    pickands_estimate,
    piterbarg_estimate,
    regime_asymptotic,
)

__version__ = "0.1.0"
