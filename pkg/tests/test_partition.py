import itertools

import numpy as np
import pytest

from curp import partition as pt
from curp.model import CrowdUser, RegionGrid, Request
from oracles import ncut_direct, partitions_into, random_grid, random_requests


def fig5():
    # regions l1 = 0, l2 = 1; transfer 4, moving cost 1
    grid = RegionGrid([[0, 1], [1, 0]], [[0, 4], [4, 0]])
    v1, v2, v3 = Request(1, 0, 3, 14), Request(2, 1, 12, 28), Request(3, 0, 22, 30)
    return grid, (v1, v2, v3)


def test_fig5_overlap_and_connectivity():
    grid, (v1, v2, v3) = fig5()
    assert pt.overlap_degree(v1, v2, grid) == 0.375
    assert pt.overlap_degree(v1, v3, grid) == 0.0
    assert pt.overlap_degree(v2, v3, grid) == 1.0
    assert pt.connectivity_degree(v1, v2, grid) == 1.0
    assert pt.connectivity_degree(v1, v3, grid) == 0.0
    assert pt.connectivity_degree(v2, v3, grid) == 1.0


def test_overlap_symmetric_in_argument_order():
    grid, (v1, v2, v3) = fig5()
    assert pt.overlap_degree(v2, v1, grid) == 0.375
    assert pt.overlap_degree(v3, v2, grid) == 1.0


def test_zero_length_window_is_full_overlap():
    grid = RegionGrid([[0]], [[0]])
    assert pt.overlap_degree(Request(0, 0, 0, 2), Request(1, 0, 5, 5), grid) == 1.0


def test_zero_pmax_gives_zero_connectivity():
    grid = RegionGrid([[0, 0], [0, 0]], [[0, 1], [1, 0]])
    assert pt.connectivity_degree(Request(0, 0, 0, 1), Request(1, 1, 0, 1), grid) == 0.0


def test_fig5_similarity_matrix():
    grid, reqs = fig5()
    eps = 1e-6
    sim = pt.similarity_matrix(list(reqs), grid, beta=1.0, eps=eps)
    expect = np.array([
        [0, 1 / (1.375 + eps), 1 / eps],
        [1 / (1.375 + eps), 0, 1 / (2 + eps)],
        [1 / eps, 1 / (2 + eps), 0],
    ])
    np.testing.assert_allclose(sim.W, expect, rtol=1e-12)
    np.testing.assert_allclose(sim.L, expect.sum(axis=1), rtol=1e-12)
    assert 1 / (1 + 1 + eps) == pytest.approx(0.5, abs=1e-6)


def test_default_eps_caps_similarity():
    grid, reqs = fig5()
    sim = pt.similarity_matrix(list(reqs), grid)
    assert sim.W[0, 2] == pytest.approx(1 / pt.EPSILON)
    assert np.all(sim.W == sim.W.T)


def test_ncut_small_cases():
    W = np.array([[0, 3.0], [3.0, 0]])
    L = W.sum(axis=1)
    assert pt.normalized_cut_value([0, 0], W, L) == 0.0
    # each side: cut 3 over volume 3
    assert pt.normalized_cut_value([0, 1], W, L) == pytest.approx(2.0)


def test_ncut_matches_set_sums():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        A = rng.random((n, n))
        W = A + A.T
        np.fill_diagonal(W, 0)
        a = [int(x) for x in rng.integers(0, 3, size=n)]
        assert pt.normalized_cut_value(a, W, W.sum(axis=1)) == pytest.approx(ncut_direct(a, W))


def _two_blocks(n1, n2, strong=1e6, weak=1e-3):
    n = n1 + n2
    W = np.full((n, n), weak)
    W[:n1, :n1] = strong
    W[n1:, n1:] = strong
    np.fill_diagonal(W, 0)
    return W


def test_two_blocks_separated_at_min_cut():
    W = _two_blocks(4, 5)
    L = W.sum(axis=1)
    part = pt.spectral_partition(W, L, 2)
    got = pt.normalized_cut_value(part.assignment, W, L)
    best = min(pt.normalized_cut_value(a, W, L) for a in partitions_into(9, 2) if len(set(a)) == 2)
    assert got == pytest.approx(best)
    assert len(set(part.assignment[:4])) == 1 and len(set(part.assignment[4:])) == 1


def test_single_partition_and_bounds():
    W = _two_blocks(2, 2)
    assert pt.spectral_partition(W, W.sum(axis=1), 1).assignment == (0, 0, 0, 0)
    with pytest.raises(ValueError):
        pt.spectral_partition(W, W.sum(axis=1), 5)


def test_J_equals_I_is_bijection():
    rng = np.random.default_rng(9)
    A = rng.random((6, 6))
    W = A + A.T
    np.fill_diagonal(W, 0)
    part = pt.spectral_partition(W, W.sum(axis=1), 6)
    assert sorted(part.assignment) == list(range(6))


def test_zero_volume_row_is_solver_error():
    W = np.zeros((3, 3))
    with pytest.raises(pt.SpectralError):
        pt.spectral_embedding(W, W.sum(axis=1), 2)


def test_eigen_bound_below_cut_and_deterministic():
    rng = np.random.default_rng(12)
    for _ in range(10):
        grid = random_grid(rng, 5)
        reqs = random_requests(rng, 12, 5)
        sim = pt.similarity_matrix(reqs, grid)
        J = int(rng.integers(2, 5))
        part = pt.spectral_partition(sim.W, sim.L, J)
        cut = pt.normalized_cut_value(part.assignment, sim.W, sim.L)
        assert pt.eigen_lower_bound(sim.W, sim.L, J) <= cut + 1e-9
        assert pt.spectral_partition(sim.W, sim.L, J) == part


def test_relabel_first_appearance():
    assert pt.relabel([3, 3, 1, 3, 0]).assignment == (0, 0, 1, 0, 2)


# ---------------------------------------------------------------------------
# dispatch


def _centered_grid(centers):
    c = np.asarray(centers, dtype=float)
    D = np.ceil(np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))).astype(int)
    return RegionGrid(D, D, centers=c)


def test_dispatch_single():
    grid = _centered_grid([[0, 0], [5, 5]])
    part = pt.Partitioning((0, 0), 1)
    reqs = [Request(0, 0, 0, 1), Request(1, 1, 0, 1)]
    assert pt.dispatch_users([CrowdUser(0, 1)], part, reqs, grid) == {0: 0}


def test_dispatch_matches_corners():
    grid = _centered_grid([[0, 0], [100, 100]])
    reqs = [Request(0, 0, 0, 1), Request(1, 1, 0, 1)]
    part = pt.Partitioning((0, 1), 2)
    users = [CrowdUser(0, 1), CrowdUser(1, 0)]
    assert pt.dispatch_users(users, part, reqs, grid) == {0: 1, 1: 0}


def test_dispatch_equals_best_permutation():
    rng = np.random.default_rng(5)
    for _ in range(20):
        centers = rng.random((6, 2)) * 50
        grid = _centered_grid(centers)
        reqs = [Request(i, int(rng.integers(0, 6)), 0, 1) for i in range(9)]
        labels = list(range(3)) + [int(x) for x in rng.integers(0, 3, size=6)]
        part = pt.relabel(labels)
        users = [CrowdUser(j, int(rng.integers(0, 6))) for j in range(3)]
        got = pt.dispatch_users(users, part, reqs, grid)

        def dist(u, r):
            regs = [reqs[n].region for n in part.members(r)]
            return np.mean(np.linalg.norm(centers[regs] - centers[users[u].start_region], axis=1))

        def total(m):
            return sum(dist(u, r) for r, u in m.items())

        best = min(total(dict(zip(range(3), perm))) for perm in itertools.permutations(range(3)))
        assert total(got) == pytest.approx(best)
        assert sorted(got.values()) == [0, 1, 2]


def test_dispatch_nearest_can_leave_partition_unserved():
    grid = _centered_grid([[0, 0], [1, 0], [100, 0]])
    reqs = [Request(0, 0, 0, 1), Request(1, 2, 0, 1)]
    part = pt.Partitioning((0, 1), 2)
    users = [CrowdUser(0, 0), CrowdUser(1, 1)]
    assert pt.dispatch_users(users, part, reqs, grid, mode="nearest") == {0: 0}
    assert pt.dispatch_users(users, part, reqs, grid) in ({0: 0, 1: 1}, {0: 1, 1: 0})
