"""Facility location games where agents can trade their allocated locations."""

from .core import (
    EPS,
    Assignment,
    AuditReport,
    Instance,
    InstanceError,
    Outcome,
    PreferenceType,
    Violation,
    endpoint_utility_sum,
    parse_instance,
    render_instance,
    social_welfare,
    utility,
)
from .exchange import ExchangeTrace, TradeStep, beneficial_swap_exists, swap_dynamics, ttc
from .mechanisms import (
    MechanismKind,
    RandomizedOutcome,
    candidate_facilities,
    central_opt,
    location_permutation,
    naive_opt_location,
    opt_location_then_ttc,
    random_endpoints,
)

__version__ = "0.1.0"
