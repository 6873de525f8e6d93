"""hetid: constructive identification of heteroscedastic transformation
models h(Y) = g(X) + sigma(X)*eps.

The pipeline runs from analytic or estimated conditional-CDF partials to
the identifying field lam(y), its root and slope, and a closed-form
reconstruction of the transformation h, with integrator cross-checks and
a Monte Carlo harness for the plug-in estimator.
"""

__version__ = "0.1.0"

from .errors import (EXIT_CONFIG, EXIT_IDENTIFICATION, EXIT_IO,
                     EXIT_NUMERICAL, EXIT_OK, BandwidthError, BracketError,
                     ConfigError, DegenerateDensityError, DomainExitError,
                     HetidError, IdentificationError, InversionError,
                     LimitError, ModelError, QuadratureError,
                     ReconstructionError, exit_code_for)
from .distributions import (ERROR_LAWS, STANDARD_NORMAL, UNIT_LOGISTIC,
                            ErrorDistribution, get_error_law)
from .models import (MODELS, CoefficientPair, SampleSet, TransformationModel,
                     WeightFunction, affine_transform, cond_cdf, cond_cdf_dxi,
                     cond_cdf_dy, make_model, numeric_inverse, simulate,
                     uniform_weight)
from .lamfield import (HETEROSCEDASTIC, HOMOSCEDASTIC_CONSISTENT,
                       INCONCLUSIVE, LambdaField, coefficients_AB, find_y0,
                       homoscedasticity_diagnostic, integrate_lambda,
                       lambda_tilde, lambda_tilde_grid, oracle_lambda_field,
                       oracle_partials, recover_B)
from .reconstruct import (ConstraintSet, ReconstructedTransform, alpha2_limit,
                          branch_quotients, ode_residuals, reconstruct_global,
                          reconstruct_upper, recover_g_sigma,
                          remap_constraints)
from .isotonic import pava_nondecreasing, repair_monotone
from .odecheck import (GronwallInstance, IvpSpec, gronwall_check,
                       integrate_ivp, random_gronwall_suite, uniqueness_probe)
from .estimate import (KernelConfig, MonteCarloPlan, diagnostic_from_samples,
                       estimate_cond_cdf, estimate_lambda, estimate_partials,
                       plugin_reconstruct, run_monte_carlo, trimmed_ygrid)
from .verify import crosscheck_reconstruction, full_verification
from .quadrature import chain_integrals, quad_adaptive, quad_box

__all__ = [name for name in dir() if not name.startswith("_")]
