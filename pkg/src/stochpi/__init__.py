"""Stochastic broadcast pi-calculus workbench."""
from .errors import *  # noqa: F401,F403
from .syntax import DefinitionEnv, free_names, substitute
from .parser import load, parse, parse_term
from .congruence import CanonicalProcess, normalize, unfold_constant
from .measures import (
    immediate_output_weight, input_weight, output_rate, output_rate_total,
)
from .distributions import (
    ActionProcDist, InputLabel, OutputLabel, ProcDist, TAU, convex_combine, dist_add,
    dist_par, restrict_pad,
)
from .semantics import (
    TransitionBundle, immediate_transition, markov_transition, passive_transition,
    transition_bundle,
)

__version__ = "0.1.0"
