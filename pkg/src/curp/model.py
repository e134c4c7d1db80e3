"""Domain model: region grid, requests, users, schedules and utility accounting.

Time and cost live on a non-negative integer lattice. A schedule is a list of
interval segments; the decision indicators of the problem (location at t,
in-transfer flag, which request is served at t) are all recoverable from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np


class GridShapeError(ValueError):
    """P or Q is not a K x K matrix (structural, not a constraint violation)."""


class InvalidDecisionError(ValueError):
    """A decision serves one request from two users at the same time."""


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self):
        return f"{self.code}: {self.detail}"


def _frozen_int_matrix(a, name):
    arr = np.array(a, dtype=np.int64, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise GridShapeError(f"{name} must be a square matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """K regions with moving cost P and transfer time Q.

    ``centers`` (K x 2, meters) is optional; when the grid was synthesized
    from region centers, ``generator`` holds ``(cost_per_meter, speed)`` so
    the scenario file can store the directive instead of the matrices.
    """

    moving_cost: np.ndarray
    transfer_time: np.ndarray
    centers: Optional[np.ndarray] = None
    generator: Optional[tuple] = None

    def __post_init__(self):
        P = _frozen_int_matrix(self.moving_cost, "moving_cost")
        Q = _frozen_int_matrix(self.transfer_time, "transfer_time")
        if P.shape != Q.shape:
            raise GridShapeError(f"P is {P.shape} but Q is {Q.shape}")
        if P.shape[0] == 0:
            raise GridShapeError("grid needs at least one region")
        object.__setattr__(self, "moving_cost", P)
        object.__setattr__(self, "transfer_time", Q)
        if self.centers is not None:
            c = np.array(self.centers, dtype=float, copy=True)
            if c.shape != (P.shape[0], 2):
                raise GridShapeError(f"centers must be {(P.shape[0], 2)}, got {c.shape}")
            c.setflags(write=False)
            object.__setattr__(self, "centers", c)
        if self.generator is not None:
            object.__setattr__(self, "generator", tuple(float(v) for v in self.generator))

    @property
    def region_count(self) -> int:
        return self.moving_cost.shape[0]

    @property
    def p_max(self) -> int:
        return int(self.moving_cost.max())

    @property
    def q_max(self) -> int:
        return int(self.transfer_time.max())

    def p(self, a: int, b: int) -> int:
        return int(self.moving_cost[a, b])

    def q(self, a: int, b: int) -> int:
        return int(self.transfer_time[a, b])

    def __eq__(self, other):
        if not isinstance(other, RegionGrid):
            return NotImplemented
        same_centers = (self.centers is None and other.centers is None) or (
            self.centers is not None
            and other.centers is not None
            and np.array_equal(self.centers, other.centers)
        )
        return (
            np.array_equal(self.moving_cost, other.moving_cost)
            and np.array_equal(self.transfer_time, other.transfer_time)
            and same_centers
            and self.generator == other.generator
        )

    __hash__ = None


@dataclass(frozen=True, order=True)
class Request:
    id: int
    region: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class CrowdUser:
    id: int
    start_region: int


@dataclass(frozen=True)
class Segment:
    region: int
    arrive: int
    depart: int
    served: Optional[int] = None

    @property
    def duration(self) -> int:
        return self.depart - self.arrive


@dataclass(frozen=True)
class Schedule:
    """Route of one user: it starts at ``origin`` at time 0 and visits ``segments`` in order.

    Between two consecutive segments (and between time 0 at the origin and
    the first segment) the user is in transfer for exactly q time units.
    """

    user: int
    origin: int
    segments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def regions(self) -> list:
        return [self.origin] + [s.region for s in self.segments]

    def served_intervals(self):
        for s in self.segments:
            if s.served is not None and s.depart > s.arrive:
                yield s.served, s.arrive, s.depart


@dataclass(frozen=True)
class Scenario:
    grid: RegionGrid
    horizon: int
    requests: tuple
    users: tuple
    budget: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        object.__setattr__(self, "users", tuple(self.users))

    def request_by_id(self) -> dict:
        return {r.id: r for r in self.requests}

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.horizon == other.horizon
            and self.requests == other.requests
            and self.users == other.users
            and self.budget == other.budget
            and self.meta == other.meta
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# validation


def _triangle_violations(M, name, limit):
    K = M.shape[0]
    out = []
    total = 0
    for k3 in range(K):
        bad = M > (M[:, k3][:, None] + M[k3, :][None, :])
        if bad.any():
            idx = np.argwhere(bad)
            total += len(idx)
            for k1, k2 in idx:
                if len(out) < limit:
                    out.append(Violation(
                        f"{name}-triangle",
                        f"{name}[{k1},{k2}]={M[k1, k2]} > {name}[{k1},{k3}]+{name}[{k3},{k2}]"
                        f"={M[k1, k3] + M[k3, k2]} at triple ({k1},{k3},{k2})",
                    ))
    if total > limit:
        out.append(Violation(f"{name}-triangle", f"... {total - limit} more violations"))
    return out


def validate_grid(grid: RegionGrid, limit: int = 100) -> list:
    """Return the violated grid constraints; an empty list means valid.

    Triples are reported as paths ``(k1, k3, k2)`` where the direct entry
    ``k1 -> k2`` exceeds the detour through ``k3``.
    """
    out = []
    for name, M in (("P", grid.moving_cost), ("Q", grid.transfer_time)):
        if M.shape != (grid.region_count, grid.region_count):
            raise GridShapeError(f"{name} has shape {M.shape}")
        diag = np.flatnonzero(np.diag(M) != 0)
        for k in diag:
            out.append(Violation(f"{name}-diagonal", f"{name}[{k},{k}]={M[k, k]} != 0"))
        neg = np.argwhere(M < 0)
        for a, b in neg[:limit]:
            out.append(Violation(f"{name}-negative", f"{name}[{a},{b}]={M[a, b]} < 0"))
        out.extend(_triangle_violations(M, name, limit))
    return out


def validate_scenario(sc: Scenario) -> list:
    out = list(validate_grid(sc.grid))
    K = sc.grid.region_count
    if sc.horizon < 0:
        out.append(Violation("horizon", f"T={sc.horizon} < 0"))
    if sc.budget < 0:
        out.append(Violation("budget", f"C={sc.budget} < 0"))
    seen = set()
    for r in sc.requests:
        if r.id in seen:
            out.append(Violation("request-id", f"duplicate request id {r.id}"))
        seen.add(r.id)
        if not 0 <= r.region < K:
            out.append(Violation("request-region", f"request {r.id} region {r.region} not in [0,{K})"))
        if not 0 <= r.start <= r.end <= sc.horizon:
            out.append(Violation(
                "request-window", f"request {r.id} window [{r.start},{r.end}] not within [0,{sc.horizon}]"))
    seen = set()
    for u in sc.users:
        if u.id in seen:
            out.append(Violation("user-id", f"duplicate user id {u.id}"))
        seen.add(u.id)
        if not 0 <= u.start_region < K:
            out.append(Violation("user-region", f"user {u.id} start {u.start_region} not in [0,{K})"))
    return out


# ---------------------------------------------------------------------------
# cost and utility


def schedule_cost(schedule: Schedule, grid: RegionGrid) -> int:
    regions = schedule.regions()
    return int(sum(grid.moving_cost[a, b] for a, b in zip(regions, regions[1:]) if a != b))


def _union_length(intervals):
    total = 0
    cur_lo = cur_hi = None
    for lo, hi in sorted(intervals):
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def _service_by_request(schedules):
    by_req = {}
    for sch in schedules:
        for rid, lo, hi in sch.served_intervals():
            by_req.setdefault(rid, []).append((lo, hi, sch.user))
    return by_req


def _double_service(by_req):
    """(request, user_a, user_b, lo, hi) for every overlap between different users."""
    found = []
    for rid, ivs in by_req.items():
        ivs = sorted(ivs)
        for a in range(len(ivs)):
            for b in range(a + 1, len(ivs)):
                lo = max(ivs[a][0], ivs[b][0])
                hi = min(ivs[a][1], ivs[b][1])
                if ivs[b][0] >= ivs[a][1]:
                    break
                if hi > lo and ivs[a][2] != ivs[b][2]:
                    found.append((rid, ivs[a][2], ivs[b][2], lo, hi))
    return found


def schedule_utility(schedules: Sequence[Schedule]) -> tuple:
    """Per-request served length and their sum.

    Raises InvalidDecisionError when two users serve one request over an
    overlapping stretch of time.
    """
    by_req = _service_by_request(schedules)
    clash = _double_service(by_req)
    if clash:
        rid, ua, ub, lo, hi = clash[0]
        raise InvalidDecisionError(f"request {rid} served by users {ua} and {ub} during [{lo},{hi}]")
    per = {rid: _union_length([(lo, hi) for lo, hi, _ in ivs]) for rid, ivs in by_req.items()}
    return per, int(sum(per.values()))


def _schedule_violations(sch: Schedule, sc: Scenario, reqs: dict) -> list:
    out = []
    grid = sc.grid
    K = grid.region_count
    tag = f"user {sch.user}"
    prev_region, prev_depart = sch.origin, 0
    if not 0 <= sch.origin < K:
        return [Violation("region", f"{tag}: origin {sch.origin} not in [0,{K})")]
    for n, seg in enumerate(sch.segments):
        where = f"{tag} segment {n}"
        if not 0 <= seg.region < K:
            out.append(Violation("region", f"{where}: region {seg.region} not in [0,{K})"))
            break
        if seg.depart < seg.arrive:
            out.append(Violation("order", f"{where}: depart {seg.depart} < arrive {seg.arrive}"))
        gap = seg.arrive - prev_depart
        need = grid.q(prev_region, seg.region)
        if gap != need:
            out.append(Violation(
                "transfer", f"{where}: gap {gap} from region {prev_region} but q={need}"))
        if seg.depart > sc.horizon:
            out.append(Violation("horizon", f"{where}: depart {seg.depart} > T={sc.horizon}"))
        if seg.served is not None:
            r = reqs.get(seg.served)
            if r is None:
                out.append(Violation("service", f"{where}: unknown request {seg.served}"))
            else:
                if r.region != seg.region:
                    out.append(Violation(
                        "service-range", f"{where}: request {r.id} is at region {r.region}, user at {seg.region}"))
                if not (r.start <= seg.arrive and seg.depart <= r.end):
                    out.append(Violation(
                        "service-window",
                        f"{where}: served [{seg.arrive},{seg.depart}] outside window [{r.start},{r.end}]"))
        prev_region, prev_depart = seg.region, seg.depart
    return out


def check_feasible(schedules: Sequence[Schedule], scenario: Scenario) -> list:
    """Every violated constraint of a multi-user decision (empty = feasible)."""
    out = []
    reqs = scenario.request_by_id()
    users = {u.id: u for u in scenario.users}
    seen = set()
    for sch in schedules:
        u = users.get(sch.user)
        if u is None:
            out.append(Violation("user", f"unknown user {sch.user}"))
            continue
        if sch.user in seen:
            out.append(Violation("user", f"user {sch.user} has more than one schedule"))
        seen.add(sch.user)
        if sch.origin != u.start_region:
            out.append(Violation(
                "origin", f"user {sch.user} starts at {sch.origin}, expected {u.start_region}"))
        out.extend(_schedule_violations(sch, scenario, reqs))
    total = sum(schedule_cost(s, scenario.grid) for s in schedules
                if all(0 <= r < scenario.grid.region_count for r in s.regions()))
    if total > scenario.budget:
        out.append(Violation("budget", f"total moving cost {total} > C={scenario.budget}"))
    for rid, ua, ub, lo, hi in _double_service(_service_by_request(schedules)):
        out.append(Violation("double-service", f"request {rid} served by users {ua} and {ub} during [{lo},{hi}]"))
    return out


def mean_absolute_deviation(values: Iterable) -> float:
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.mean(np.abs(x - x.mean())))


def grid_from_centers(centers, cost_per_meter: float, speed: float) -> RegionGrid:
    """Synthesize P and Q from region centers (meters).

    Entries are ceilings of the scaled Euclidean distance: ceil(a) <= ceil(b) + ceil(c)
    whenever a <= b + c, so both matrices inherit the triangle inequality.
    Round-to-nearest would not (1.4 + 1.4 vs 2.6).
    """
    c = np.asarray(centers, dtype=float)
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    # absorb float noise such as 5 * 0.2 * sqrt(..) landing just above an integer
    P = np.ceil(np.round(d * cost_per_meter, 9)).astype(np.int64)
    Q = np.ceil(np.round(d / speed, 9)).astype(np.int64)
    np.fill_diagonal(P, 0)
    np.fill_diagonal(Q, 0)
    return RegionGrid(P, Q, centers=c, generator=(cost_per_meter, speed))
