from dataclasses import replace

import numpy as np
import pytest

from curp import scenario_file, sim
from curp.model import Request, validate_grid, validate_scenario
from oracles import unit_sweep_no_control


def test_two_cell_grid():
    cfg = sim.SimConfig(cols=2, rows=1, region_side=5.0, cost_per_meter=1.0, speed=5.0)
    grid = sim.gen_grid(cfg)
    assert grid.moving_cost.tolist() == [[0, 5], [5, 0]]
    assert grid.transfer_time.tolist() == [[0, 1], [1, 0]]


def test_default_costs_adjacent_unit():
    grid = sim.gen_grid(sim.SimConfig(cols=3, rows=1))
    assert grid.moving_cost[0, 1] == 1 and grid.transfer_time[0, 1] == 1


def test_three_by_three_triangle():
    grid = sim.gen_grid(sim.SimConfig(cols=3, rows=3))
    P = grid.moving_cost
    assert all(P[a, b] <= P[a, c] + P[c, b] for a in range(9) for b in range(9) for c in range(9))
    assert validate_grid(grid) == []


def test_poisson_count_mean():
    cfg = sim.SimConfig(horizon=40, arrival_rate=0.1)
    counts = [len(sim.gen_requests(cfg, np.random.default_rng(s), ([], []))) for s in range(10_000)]
    assert np.mean(counts) == pytest.approx(4.0, rel=0.05)


def test_view_time_mean():
    cfg = sim.SimConfig(horizon=200_000, arrival_rate=0.1)
    reqs = sim.gen_requests(cfg, np.random.default_rng(0), ([], []))
    assert np.mean([r.length for r in reqs[:-5]]) == pytest.approx(8.0, rel=0.05)


def test_residence_mean_and_floor():
    x = sim.sample_residence(sim.SimConfig(), np.random.default_rng(0), size=200_000)
    assert x.mean() == pytest.approx(2.5, rel=0.05)
    assert x.min() >= 2.0


def test_empty_horizon():
    assert sim.gen_requests(replace(sim.SimConfig(), horizon=0)) == []


def test_hotspot_occupancy_share():
    cfg = sim.SimConfig(cols=4, rows=4, hotspots=1, hotspot_weight=10.0, horizon=100_000,
                        mobility="campus_waypoint", seed=3)
    hot = sim.gen_hotspots(cfg)
    (trace,) = sim.gen_mobility(cfg, 1, hotspots=hot)
    time_hot = sum(hi - lo for c, lo, hi in trace.stays if c == hot[0][0])
    assert time_hot / cfg.horizon == pytest.approx(10 / 25, abs=0.02)


def test_traces_cover_horizon():
    cfg = sim.SimConfig(horizon=300)
    for tr in sim.gen_traces(cfg, 4):
        assert tr.stays[0][1] == 0 and tr.stays[-1][2] == 300
        assert all(a[2] == b[1] for a, b in zip(tr.stays, tr.stays[1:]))
        assert all(hi - lo >= 2 for _, lo, hi in tr.stays[:-1])


def test_parked_user_and_disjoint_regions():
    parked = sim.Trace(0, ((7, 0, 50),))
    assert sim.eval_no_control([parked], [Request(0, 7, 3, 11)]) == 8
    assert sim.eval_no_control([parked], [Request(0, 6, 3, 11)]) == 0


def test_no_control_matches_unit_sweep():
    cfg = sim.SimConfig(cols=4, rows=3, horizon=150, arrival_rate=0.3, seed=5)
    world = sim.gen_world(cfg)
    for J in (1, 2, 5):
        traces = sim.gen_traces(cfg, J)
        assert sim.eval_no_control(traces, world.requests) == \
            unit_sweep_no_control(traces, world.requests, cfg.horizon)


def test_no_control_monotone_in_users():
    cfg = sim.SimConfig(cols=5, rows=5, horizon=300, arrival_rate=0.2, seed=1)
    world = sim.gen_world(cfg)
    traces = sim.gen_traces(cfg, 6)
    vals = [sim.eval_no_control(traces[:k], world.requests) for k in range(7)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_scenario_is_valid_and_compact():
    sc = sim.gen_scenario(sim.SimConfig(seed=4, users=3))
    assert validate_scenario(sc) == []
    assert sc.grid.region_count == len(sc.meta["cells"]) <= len(sc.requests) + 3


def test_deterministic_and_streams_independent():
    cfg = sim.SimConfig(seed=9)
    a = scenario_file.dumps(sim.gen_scenario(cfg))
    assert a == scenario_file.dumps(sim.gen_scenario(cfg))
    more = sim.gen_world(replace(cfg, users=6, budget=7))
    assert more.requests == sim.gen_world(cfg).requests


def test_campus_metadata():
    sc = sim.gen_scenario(sim.SimConfig(mobility="campus_waypoint", seed=1))
    assert len(sc.meta["hotspots"]["cells"]) == 3
    assert "hotspots" not in sim.gen_scenario(sim.SimConfig(seed=1)).meta


def test_config_checks():
    with pytest.raises(sim.ConfigError):
        sim.SimConfig(arrival_rate=0.5).check(strict=True)
    sim.SimConfig(arrival_rate=0.5).check()
    with pytest.raises(sim.ConfigError):
        sim.SimConfig.from_dict({"colz": 3})
    with pytest.raises(sim.ConfigError):
        sim.SimConfig(mobility="levy").check()


def test_export_traces():
    text = sim.export_traces([sim.Trace(0, ((3, 0, 4), (1, 4, 9)))])
    assert text == "user\tregion\tenter\texit\n0\t3\t0\t4\n0\t1\t4\t9\n"
