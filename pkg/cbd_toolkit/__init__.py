"""Contextuality analysis of systems of finite random variables.

Decides whether a system admits an identity coupling (is noncontextual),
checks no-signaling and the CH/Fine inequalities in the 2x2 Bell paradigm,
and measures contextuality through maximal agreement couplings and
min-negativity quasi-couplings. All arithmetic is exact.
"""

from .bell import BellSystem, Classification, ch_fine, classify, marginal_selectivity
from .coupling import (
    identity_coupling_exists,
    identity_coupling_full,
    independent_coupling,
    max_uniform_agreement,
    pairwise_identity_exists,
    verify_coupling,
)
from .errors import CbdError, SystemValidationError
from .ingest import TrialRecord, conditionalize, estimate_system
from .quasi import negativity, quasi_coupling
from .report import ContextualityAnalyzer, analyze_system
from .system import (
    Content,
    Context,
    Distribution,
    System,
    Variable,
    build_system,
    check_no_signaling,
    load_system,
    marginal,
    relabel_with_condition,
)

__version__ = "1.0.0"
