"""Pochhammer-polynomial expansions of Xi-type entire functions and their
minimal real-root beta-sequences."""

__version__ = "0.1.0"

from .afamily import AFunctionSpec, DomainError, parse_spec, xi_exact  # noqa: E402
from .approximant import XiApproximant, build  # noqa: E402
from .betatrace import BetaTrace, TraceConfig, run_trace  # noqa: E402
from .coefficients import coeff_vector  # noqa: E402
from .rootfinder import all_real, classify, onset_beta  # noqa: E402

__all__ = [
    "AFunctionSpec", "BetaTrace", "DomainError", "TraceConfig", "XiApproximant",
    "all_real", "build", "classify", "coeff_vector", "onset_beta", "parse_spec",
    "run_trace", "xi_exact",
]
