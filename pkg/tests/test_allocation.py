import numpy as np
import pytest

from curp.allocation import (AllocationStats, allocate_bnb, allocate_greedy, breakpoints, build_profiles,
                             default_step)
from curp.model import CrowdUser, RegionGrid, Request
from oracles import best_chain, best_composition, random_grid, random_requests


def random_profile(rng, C, sparsity=0.6, top=6):
    inc = rng.integers(0, top + 1, size=C)
    inc[rng.random(C) < sparsity] = 0
    return np.concatenate([[int(rng.integers(0, 4))], inc]).cumsum()


def concave_profile(rng, C):
    # strictly decreasing positive increments
    inc = np.sort(rng.choice(np.arange(1, 200), size=C, replace=False))[::-1]
    return np.concatenate([[int(rng.integers(0, 5))], inc]).cumsum()


def test_breakpoints():
    assert breakpoints([0, 0, 3, 3, 5], 4) == [0, 2, 4]
    assert breakpoints([1, 1, 1], 2) == [0]


def test_zero_budget():
    profs = [np.array([2]), np.array([3])]
    assert allocate_bnb(profs, 0) == ([0, 0], 5)
    assert allocate_greedy(profs, 0) == ([0, 0], 5)


def test_single_partition_takes_what_it_needs():
    prof = np.array([0, 0, 4, 4, 7, 7, 7])
    alloc, util = allocate_bnb([prof], 6)
    assert alloc == [4] and util == 7


def test_bnb_matches_enumeration():
    rng = np.random.default_rng(17)
    for _ in range(60):
        J = int(rng.integers(1, 5))
        C = int(rng.integers(0, 21))
        profs = [random_profile(rng, C) for _ in range(J)]
        alloc, util = allocate_bnb(profs, C, check_bounds=True)
        assert util == best_composition(profs, C)
        assert sum(alloc) <= C and util == sum(int(p[c]) for p, c in zip(profs, alloc))


def test_bnb_prunes():
    rng = np.random.default_rng(2)
    profs = [random_profile(rng, 30, sparsity=0.3) for _ in range(4)]
    st = AllocationStats()
    allocate_bnb(profs, 30, stats=st)
    assert st.pruned > 0 and st.leaves >= 1


def test_greedy_never_beats_bnb():
    rng = np.random.default_rng(23)
    for _ in range(60):
        J, C = int(rng.integers(1, 5)), int(rng.integers(0, 31))
        profs = [random_profile(rng, C) for _ in range(J)]
        alloc, util = allocate_greedy(profs, C, step=int(rng.integers(1, 8)))
        assert sum(alloc) <= C and util <= allocate_bnb(profs, C)[1]


def test_greedy_optimal_on_concave():
    rng = np.random.default_rng(31)
    for _ in range(40):
        J, C = int(rng.integers(1, 5)), int(rng.integers(1, 31))
        profs = [concave_profile(rng, C) for _ in range(J)]
        assert allocate_greedy(profs, C)[1] == allocate_bnb(profs, C)[1]


def test_greedy_misses_jump_wider_than_step():
    # partition 0 pays off only at c = 6; small steps keep feeding partition 1
    C = 8
    p0 = np.array([0, 0, 0, 0, 0, 0, 50, 50, 50])
    p1 = np.array([0, 2, 4, 6, 8, 9, 10, 11, 12])
    g = allocate_greedy([p0, p1], C, step=2)[1]
    b = allocate_bnb([p0, p1], C)[1]
    assert b == 54 and g == 12
    assert allocate_greedy([p0, p1], C, step=6)[1] == b


def test_default_step():
    assert default_step(0) == 1 and default_step(120) == 30


def test_bnb_monotone_in_budget():
    rng = np.random.default_rng(40)
    profs = [random_profile(rng, 30) for _ in range(3)]
    vals = [allocate_bnb([p[: c + 1] for p in profs], c)[1] for c in range(31)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_build_profiles():
    grid = RegionGrid([[0, 2], [2, 0]], [[0, 1], [1, 0]])
    user = CrowdUser(0, 0)
    empty, local = build_profiles([[], [Request(0, 0, 0, 5)]], [user, user], grid, 4)
    assert list(empty) == [0] * 5 and list(local) == [5] * 5
    rng = np.random.default_rng(3)
    g = random_grid(rng, 4)
    reqs = random_requests(rng, 3, 4)
    (prof,) = build_profiles([reqs], [user], g, 12)
    assert list(prof) == [best_chain(reqs, 0, g, c) for c in range(13)]


def test_short_profile_rejected():
    with pytest.raises(ValueError):
        allocate_bnb([np.array([0, 1])], 5)
