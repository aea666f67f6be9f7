"""Partially truncated Euler-Maruyama scheme for multiple-delay SDEs with
superlinear, Hoelder-irregular coefficients, plus a coupled Monte Carlo lab
for strong-error and rate experiments."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .brownian import BrownianDriver, coarsen
from .engine import (DiscretePath, SimulationFault, simulate_batch, simulate_classical,
                     simulate_truncated, step_process_value)
from .grid import GridSpec, IncommensurateStepError, build_grid
from .lab import (ErrorReport, estimate_exit_probability, estimate_moment, estimate_step_gap,
                  estimate_strong_error, fit_rate, strong_errors)
from .model import (AssumptionReport, ModelSpec, builtin_multi_delay, builtin_pure_cubic,
                    builtin_vix32, builtin_vq2, check_assumptions, from_powerlaw, model_by_name)
from .powerlaw import PowerLawCoefficients, PowerTerm
from .truncation import (TruncationDomainError, TruncationPolicy, default_policy, eval_truncated_diffusion,
                         eval_truncated_drift, gamma, cubic_policy, truncate, truncation_bound)
from .yamada_watanabe import YWParams
