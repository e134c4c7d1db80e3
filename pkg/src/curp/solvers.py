"""Multi-user solvers: GPA and the benchmark baselines.

GPA: similarity -> spectral partition -> dispatch one user per partition ->
per-partition utility profiles -> budget allocation -> exact per-partition
routes. Region division (RD) swaps the partition step for k-means on region
coordinates. Sequential and greedy scheduling are simple reference
baselines; their exact rules are documented on each function.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from . import allocation, partition
from .model import (Schedule, Scenario, check_feasible, mean_absolute_deviation, schedule_cost,
                    schedule_utility)
from .scheduler import schedule_for_chain, solve_user


class InfeasibleResultError(RuntimeError):
    pass


@dataclass
class SolveResult:
    schedules: list
    system_utility: int
    total_cost: int
    wall_time: float
    per_user_cost: list
    fairness_mad: float
    info: dict = field(default_factory=dict)


def make_result(schedules, scenario: Scenario, started: float, info=None) -> SolveResult:
    problems = check_feasible(schedules, scenario)
    if problems:
        raise InfeasibleResultError("; ".join(str(p) for p in problems))
    _, utility = schedule_utility(schedules)
    costs = [schedule_cost(s, scenario.grid) for s in schedules]
    return SolveResult(
        schedules=list(schedules),
        system_utility=utility,
        total_cost=int(sum(costs)),
        wall_time=time.perf_counter() - started,
        per_user_cost=costs,
        fairness_mad=mean_absolute_deviation(costs),
        info=info or {},
    )


def idle(user) -> Schedule:
    return Schedule(user.id, user.start_region, ())


def _seed(scenario: Scenario) -> int:
    return int(scenario.meta.get("seed", 0))


def _finish_partitioned(scenario, part, allocator, step, dispatch, started, info):
    grid, C = scenario.grid, scenario.budget
    reqs, users = list(scenario.requests), list(scenario.users)
    owner = partition.dispatch_users(users, part, reqs, grid, mode=dispatch)
    served = sorted(owner)
    groups = [[reqs[n] for n in part.members(r)] for r in served]
    chosen = [users[owner[r]] for r in served]
    profiles = allocation.build_profiles(groups, chosen, grid, C)
    if allocator == "bnb":
        alloc, total = allocation.allocate_bnb(profiles, C)
    elif allocator == "greedy":
        alloc, total = allocation.allocate_greedy(profiles, C, step)
    else:
        raise ValueError(f"unknown allocator {allocator!r}")
    by_user = {}
    for group, user, c, prof in zip(groups, chosen, alloc, profiles):
        sch, util = solve_user(group, user, grid, c)
        assert util == prof[c], "per-partition solve disagrees with its profile"
        by_user[user.id] = sch
    schedules = [by_user.get(u.id, idle(u)) for u in users]
    info.update({
        "partitions": [[r.id for r in g] for g in groups],
        "partition_users": [u.id for u in chosen],
        "allocation": [int(c) for c in alloc],
        "allocated_utility": int(total),
    })
    return make_result(schedules, scenario, started, info)


def _trivial(scenario, started, info):
    return make_result([idle(u) for u in scenario.users], scenario, started, info)


def solve_gpa(scenario: Scenario, allocator: str = "bnb", beta: float = partition.DEFAULT_BETA,
              kmeans: partition.KMeansConfig = None, dispatch: str = "matching",
              step: int = None) -> SolveResult:
    started = time.perf_counter()
    info = {"solver": f"gpa-{allocator}", "beta": beta}
    reqs, users = list(scenario.requests), list(scenario.users)
    if not reqs or not users:
        return _trivial(scenario, started, info)
    cfg = kmeans or partition.KMeansConfig(seed=_seed(scenario))
    J = min(len(users), len(reqs))
    sim = partition.similarity_matrix(reqs, scenario.grid, beta)
    part = partition.spectral_partition(sim.W, sim.L, J, cfg)
    info["ncut"] = partition.normalized_cut_value(part.assignment, sim.W, sim.L)
    return _finish_partitioned(scenario, part, allocator, step, dispatch, started, info)


def _region_features(scenario: Scenario, reqs) -> np.ndarray:
    grid = scenario.grid
    regs = [r.region for r in reqs]
    if grid.centers is not None:
        return np.asarray(grid.centers)[regs]
    # no geometry: describe each request by its symmetrized cost row
    P = np.asarray(grid.moving_cost, dtype=float)
    return ((P + P.T) / 2)[regs]


def solve_region_division(scenario: Scenario, allocator: str = "bnb",
                          kmeans: partition.KMeansConfig = None, dispatch: str = "matching",
                          step: int = None) -> SolveResult:
    started = time.perf_counter()
    info = {"solver": f"rd-{allocator}"}
    reqs, users = list(scenario.requests), list(scenario.users)
    if not reqs or not users:
        return _trivial(scenario, started, info)
    cfg = kmeans or partition.KMeansConfig(seed=_seed(scenario))
    J = min(len(users), len(reqs))
    part = partition.relabel(partition.kmeans_labels(_region_features(scenario, reqs), J, cfg))
    return _finish_partitioned(scenario, part, allocator, step, dispatch, started, info)


def _user_budgets(scenario, budget_split):
    J = len(scenario.users)
    if budget_split == "shared":
        return None
    if budget_split == "even":
        return [scenario.budget // J] * J
    raise ValueError(f"unknown budget split {budget_split!r}")


def solve_single_user(scenario: Scenario) -> SolveResult:
    """Exact DP for the first user over all requests; everyone else idles."""
    started = time.perf_counter()
    users = list(scenario.users)
    if not users:
        return _trivial(scenario, started, {"solver": "dp"})
    sch, _ = solve_user(list(scenario.requests), users[0], scenario.grid, scenario.budget)
    return make_result([sch] + [idle(u) for u in users[1:]], scenario, started, {"solver": "dp"})


def solve_sequential(scenario: Scenario, budget_split: str = "shared") -> SolveResult:
    """Users in id order each run the exact DP on what is left.

    Requests that received positive service leave the pool and the spent
    cost leaves the shared budget (or each user gets C // J with ``even``).
    """
    started = time.perf_counter()
    users = sorted(scenario.users, key=lambda u: u.id)
    split = _user_budgets(scenario, budget_split) if users else None
    pool = list(scenario.requests)
    remaining = scenario.budget
    by_user = {}
    for k, user in enumerate(users):
        cap = remaining if split is None else split[k]
        sch, _ = solve_user(pool, user, scenario.grid, cap)
        spent = schedule_cost(sch, scenario.grid)
        if split is None:
            remaining -= spent
        done = {rid for rid, lo, hi in sch.served_intervals()}
        pool = [r for r in pool if r.id not in done]
        by_user[user.id] = sch
    schedules = [by_user[u.id] for u in scenario.users]
    return make_result(schedules, scenario, started, {"solver": "sequential", "budget_split": budget_split})


def solve_greedy(scenario: Scenario, budget_split: str = "shared") -> SolveResult:
    """Event-driven nearest-first scheduling.

    The user that becomes free earliest (ties: lower id) picks, among the
    untaken requests it can still reach before they end and afford, the one
    with the cheapest move (ties: earlier end, then lower id). It travels
    there, serves until the request ends and becomes free again. A user
    with no candidate retires.
    """
    started = time.perf_counter()
    grid = scenario.grid
    users = list(scenario.users)
    split = _user_budgets(scenario, budget_split) if users else None
    wallet = {u.id: (split[k] if split else None) for k, u in enumerate(users)}
    shared = scenario.budget
    taken = set()
    chains = {u.id: [] for u in users}
    heap = [(0, u.id, u.start_region) for u in users]
    heapq.heapify(heap)
    reqs = sorted(scenario.requests, key=lambda r: r.id)
    while heap:
        t, uid, region = heapq.heappop(heap)
        money = shared if wallet[uid] is None else wallet[uid]
        best = None
        for r in reqs:
            if r.id in taken:
                continue
            p = grid.p(region, r.region)
            if p > money or t + grid.q(region, r.region) >= r.end:
                continue
            key = (p, r.end, r.id)
            if best is None or key < best[0]:
                best = (key, r)
        if best is None:
            continue
        (p, _, _), r = best
        taken.add(r.id)
        if wallet[uid] is None:
            shared -= p
        else:
            wallet[uid] -= p
        chains[uid].append(r)
        heapq.heappush(heap, (r.end, uid, r.region))
    schedules = [schedule_for_chain(u, chains[u.id], grid) for u in users]
    return make_result(schedules, scenario, started, {"solver": "greedy", "budget_split": budget_split})


SOLVERS = {
    "dp": solve_single_user,
    "gpa-bnb": lambda sc, **kw: solve_gpa(sc, "bnb", **kw),
    "gpa-greedy": lambda sc, **kw: solve_gpa(sc, "greedy", **kw),
    "rd-bnb": lambda sc, **kw: solve_region_division(sc, "bnb", **kw),
    "rd-greedy": lambda sc, **kw: solve_region_division(sc, "greedy", **kw),
    "sequential": solve_sequential,
    "greedy": solve_greedy,
}


def run_solver(name: str, scenario: Scenario, beta: float = partition.DEFAULT_BETA,
               step: int = None, dispatch: str = "matching", budget_split: str = "shared") -> SolveResult:
    if name not in SOLVERS:
        raise KeyError(f"unknown solver {name!r}")
    if name.startswith("gpa"):
        return SOLVERS[name](scenario, beta=beta, step=step, dispatch=dispatch)
    if name.startswith("rd"):
        return SOLVERS[name](scenario, step=step, dispatch=dispatch)
    if name in ("sequential", "greedy"):
        return SOLVERS[name](scenario, budget_split=budget_split)
    return SOLVERS[name](scenario)
