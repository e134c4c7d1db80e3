"""Split the global moving budget across partitions.

Each partition r has a utility profile ``U_r[c]`` (best single-user utility
with budget ``c``, non-decreasing). Both allocators maximize
``sum_r U_r[c_r]`` subject to ``sum_r c_r <= C``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .scheduler import utility_profile


def build_profiles(groups, users, grid, budget: int) -> list:
    """Profiles for ``groups[r]`` (list of requests) served by ``users[r]``.

    One DP table per partition yields the whole profile; an empty group or
    a missing user gives the all-zero profile.
    """
    out = []
    for reqs, user in zip(groups, users):
        if not reqs or user is None:
            prof = np.zeros(budget + 1, dtype=np.int64)
        else:
            prof = utility_profile(reqs, user, grid, budget)
        assert np.all(np.diff(prof) >= 0), "profile must be non-decreasing"
        out.append(prof)
    return out


def breakpoints(profile, limit: int) -> list:
    """0 plus every c <= limit where the profile strictly increases."""
    prof = np.asarray(profile)
    top = min(limit, len(prof) - 1)
    steps = np.flatnonzero(np.diff(prof[: top + 1]) > 0) + 1
    return [0] + [int(c) for c in steps]


@dataclass
class AllocationStats:
    nodes: int = 0
    pruned: int = 0
    leaves: int = 0


def _exact_suffix(profiles, budget):
    """best[k][b]: optimum of partitions k.. with budget b (debug-mode reference)."""
    J = len(profiles)
    best = np.zeros((J + 1, budget + 1), dtype=np.int64)
    for k in range(J - 1, -1, -1):
        prof = np.asarray(profiles[k][: budget + 1])
        for b in range(budget + 1):
            best[k, b] = max(prof[c] + best[k + 1, b - c] for c in range(b + 1))
    return best


def allocate_bnb(profiles, budget: int, check_bounds: bool = False, stats: AllocationStats = None):
    """Depth-first branch and bound over partitions in index order.

    The bound after fixing k partitions with utility g and cost h is
    ``g + sum_{r>k} U_r[C - h]``. Children are breakpoints of the current
    profile ordered by descending utility, so the first leaf is a good
    incumbent; a node is pruned when its bound does not beat the incumbent.
    Returns ``(allocation, utility)``.
    """
    J = len(profiles)
    if J == 0:
        return [], 0
    profs = [np.asarray(p, dtype=np.int64) for p in profiles]
    for p in profs:
        if len(p) < budget + 1:
            raise ValueError("profile shorter than budget + 1")
    st = stats if stats is not None else AllocationStats()
    exact = _exact_suffix(profs, budget) if check_bounds else None
    bps = [breakpoints(p, budget) for p in profs]
    best_alloc = [0] * J
    best_val = [-1]
    alloc = [0] * J

    def bound(k, g, h):
        return g + sum(int(profs[r][budget - h]) for r in range(k, J))

    def visit(k, g, h):
        st.nodes += 1
        u = bound(k, g, h)
        if exact is not None:
            assert g + exact[k, budget - h] <= u, "bound below the best completion"
        if u <= best_val[0]:
            st.pruned += 1
            return
        if k == J:
            st.leaves += 1
            best_val[0] = g
            best_alloc[:] = alloc
            return
        room = budget - h
        children = [c for c in bps[k] if c <= room]
        children.sort(key=lambda c: (-int(profs[k][c]), c))
        for c in children:
            alloc[k] = c
            visit(k + 1, g + int(profs[k][c]), h + c)
        alloc[k] = 0

    visit(0, 0, 0)
    return list(best_alloc), int(best_val[0])


def default_step(budget: int) -> int:
    # profiles are flat until the first move is affordable; the step must
    # be able to cross that plateau
    return max(1, budget // 4)


def allocate_greedy(profiles, budget: int, step: int = None):
    """Repeatedly buy the increment with the best utility per unit cost.

    Candidates are every (partition, increment <= step) that fits the
    remaining budget. Ties go to the lower partition, then the smaller
    increment. Stops when nothing fits or no increment gains utility.
    """
    if step is None:
        step = default_step(budget)
    if step < 1:
        raise ValueError("step must be >= 1")
    profs = [np.asarray(p, dtype=np.int64) for p in profiles]
    alloc = [0] * len(profs)
    remaining = budget
    while remaining > 0:
        best = None
        for r, p in enumerate(profs):
            base = int(p[alloc[r]])
            top = min(step, remaining, len(p) - 1 - alloc[r])
            for cs in range(1, top + 1):
                eff = Fraction(int(p[alloc[r] + cs]) - base, cs)
                if best is None or eff > best[0]:
                    best = (eff, r, cs)
        if best is None or best[0] <= 0:
            break
        _, r, cs = best
        alloc[r] += cs
        remaining -= cs
    return alloc, int(sum(int(p[c]) for p, c in zip(profs, alloc)))
