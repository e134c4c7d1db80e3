"""Crowdsourced user recruitment for D2D video enhancement."""

from .model import (
    CrowdUser,
    RegionGrid,
    Request,
    Scenario,
    Schedule,
    Segment,
    check_feasible,
    schedule_cost,
    schedule_utility,
    validate_grid,
)
from .scheduler import build_sorted_requests, solve_single, solve_user

__all__ = [
    "CrowdUser",
    "RegionGrid",
    "Request",
    "Scenario",
    "Schedule",
    "Segment",
    "build_sorted_requests",
    "check_feasible",
    "schedule_cost",
    "schedule_utility",
    "solve_single",
    "solve_user",
    "validate_grid",
]
