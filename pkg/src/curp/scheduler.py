"""Exact single-user solver: dynamic program over (request, budget) with backpointers.

Requests are sorted by end time behind a virtual request v0 (window [0, 0]
at the user's origin). ``U[i][c]`` is the best utility of a chain that ends
by serving request ``i`` until its end with total moving cost at most ``c``::

    U[0][c] = 0
    U[i][c] = max_{j in prior(i), j != i} U[j][c - p_ji] + e_i - max(s_i, e_j + q_ji)

and the cell is infeasible when ``c - p_ji < 0`` for every candidate or when
v0 cannot reach request ``i`` before it ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CrowdUser, RegionGrid, Request, Schedule, Segment, Scenario

INFEASIBLE = np.iinfo(np.int64).min // 4


@dataclass(frozen=True)
class SortedRequestSet:
    """Requests sorted by (end, id), index 0 is the virtual start request.

    ``prior[i]`` lists every j with ``e_j + q_ji <= e_i`` (so it contains i
    itself for i >= 1); ``prior[0] == (0,)``.
    """

    user: CrowdUser
    requests: tuple
    prior: tuple

    def __len__(self):
        return len(self.requests)

    @property
    def real(self) -> tuple:
        return self.requests[1:]


@dataclass
class DpTable:
    utility: np.ndarray
    pred: np.ndarray  # predecessor request index, -1 when none
    pred_cost: np.ndarray  # predecessor cost column, -1 when none
    evaluations: int = 0

    @property
    def feasible(self) -> np.ndarray:
        return self.utility > INFEASIBLE


def virtual_request(user: CrowdUser) -> Request:
    return Request(id=-1, region=user.start_region, start=0, end=0)


def build_sorted_requests(requests, user: CrowdUser, grid: RegionGrid) -> SortedRequestSet:
    ordered = [virtual_request(user)] + sorted(requests, key=lambda r: (r.end, r.id))
    Q = grid.transfer_time
    prior = [(0,)]
    for i in range(1, len(ordered)):
        vi = ordered[i]
        prior.append(tuple(
            j for j, vj in enumerate(ordered) if vj.end + Q[vj.region, vi.region] <= vi.end
        ))
    return SortedRequestSet(user, tuple(ordered), tuple(prior))


def solve_single(rs: SortedRequestSet, budget: int, grid: RegionGrid):
    """Run the DP and rebuild the optimal route.

    Returns ``(table, schedule, utility)``. Predecessors are scanned in
    ascending index and only a strict improvement replaces the incumbent, so
    ties resolve to the smallest predecessor index.
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    budget = int(budget)
    n = len(rs)
    width = budget + 1
    U = np.full((n, width), INFEASIBLE, dtype=np.int64)
    pred = np.full((n, width), -1, dtype=np.int64)
    pred_cost = np.full((n, width), -1, dtype=np.int64)
    U[0, :] = 0
    P, Q = grid.moving_cost, grid.transfer_time
    cols = np.arange(width)
    evaluations = 0
    for i in range(1, n):
        vi = rs.requests[i]
        if 0 not in rs.prior[i]:
            continue
        row = U[i]
        for j in rs.prior[i]:
            # a predecessor at or after i shares i's end time and adds nothing
            # that the chain ending at it does not already hold
            if j >= i:
                continue
            vj = rs.requests[j]
            p = int(P[vj.region, vi.region])
            gain = vi.end - max(vi.start, vj.end + int(Q[vj.region, vi.region]))
            evaluations += width
            if p >= width:
                continue
            src = U[j, : width - p]
            cand = np.where(src > INFEASIBLE, src + gain, INFEASIBLE)
            tgt = slice(p, width)
            better = cand > row[tgt]
            if better.any():
                row[tgt] = np.where(better, cand, row[tgt])
                pred[i, tgt] = np.where(better, j, pred[i, tgt])
                pred_cost[i, tgt] = np.where(better, cols[: width - p], pred_cost[i, tgt])
    table = DpTable(U, pred, pred_cost, evaluations)
    last = U[:, budget]
    best = int(np.argmax(last))
    utility = int(last[best])
    schedule = reconstruct(rs, table, best, budget, grid)
    return table, schedule, utility


def chain_of(table: DpTable, i: int, c: int) -> list:
    chain = []
    while i > 0:
        chain.append(i)
        i, c = int(table.pred[i, c]), int(table.pred_cost[i, c])
    return chain[::-1]


def schedule_for_chain(user: CrowdUser, chain_requests, grid: RegionGrid) -> Schedule:
    """Serve each request of the chain from the earliest moment until its end."""
    segs = []
    region, t = user.start_region, 0
    for r in chain_requests:
        arrive = t + grid.q(region, r.region)
        begin = max(arrive, r.start)
        if begin > arrive:
            segs.append(Segment(r.region, arrive, begin, None))
        segs.append(Segment(r.region, begin, r.end, r.id))
        region, t = r.region, r.end
    return Schedule(user.id, user.start_region, tuple(segs))


def reconstruct(rs: SortedRequestSet, table: DpTable, i: int, c: int, grid: RegionGrid) -> Schedule:
    return schedule_for_chain(rs.user, [rs.requests[k] for k in chain_of(table, i, c)], grid)


def solve_user(requests, user: CrowdUser, grid: RegionGrid, budget: int):
    """Convenience wrapper: sort, solve, return ``(schedule, utility)``."""
    _, schedule, utility = solve_single(build_sorted_requests(requests, user, grid), budget, grid)
    return schedule, utility


def utility_profile(requests, user: CrowdUser, grid: RegionGrid, budget: int) -> np.ndarray:
    """Best utility at every budget 0..C from one table.

    ``U[i][c]`` means cost at most ``c``, so column ``c`` read across all rows
    is exactly the optimum of a solve with budget ``c``.
    """
    table, _, _ = solve_single(build_sorted_requests(requests, user, grid), budget, grid)
    return table.utility.max(axis=0).astype(np.int64)


def knapsack_fixture(weights, values, capacity: int) -> Scenario:
    """Single-user scenario whose optimum equals the 0/1 knapsack optimum.

    Item m becomes a request at its own region m+1 with window length v_m;
    entering region m+1 from anywhere costs w_m, entering the origin costs 0.
    Windows are spaced by q_max = 1 so any subset can be served in full.
    """
    weights = [int(w) for w in weights]
    values = [int(v) for v in values]
    if len(weights) != len(values):
        raise ValueError("weights and values differ in length")
    M = len(weights)
    K = M + 1
    P = np.zeros((K, K), dtype=np.int64)
    for m, w in enumerate(weights):
        P[:, m + 1] = w
    np.fill_diagonal(P, 0)
    Q = np.ones((K, K), dtype=np.int64)
    np.fill_diagonal(Q, 0)
    requests = []
    t = 1
    for m, v in enumerate(values):
        requests.append(Request(m, m + 1, t, t + v))
        t += v + 1
    horizon = requests[-1].end if requests else 0
    return Scenario(RegionGrid(P, Q), horizon, tuple(requests), (CrowdUser(0, 0),), int(capacity),
                    meta={"fixture": "knapsack"})
