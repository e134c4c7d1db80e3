"""Scenario generation and the uncontrolled-mobility baseline.

The area is a ``cols x rows`` lattice of square cells. A generated scenario
only carries the cells that requests or users occupy (its regions), with
their centers and the cost/speed directive, so P and Q stay small.

Random streams: one ``SeedSequence(seed)`` is spawned into fixed children
(hotspots, requests, users, traces), so changing e.g. the budget or the
number of traces never shifts the requests.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .model import CrowdUser, Request, Scenario, grid_from_centers, validate_grid

MOBILITY_MODELS = ("random_waypoint", "campus_waypoint")
STRICT_RATE_RANGE = (0.01, 0.1)

_STREAMS = ("hotspots", "requests", "users", "traces")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    cols: int = 50
    rows: int = 45
    region_side: float = 5.0
    horizon: int = 400
    arrival_rate: float = 0.1
    residence_shape: float = 5.0
    residence_scale: float = 2.0
    view_shape: float = 4.0
    view_scale: float = 2.0
    mobility: str = "random_waypoint"
    hotspots: int = 3
    hotspot_weight: float = 10.0
    users: int = 3
    budget: int = 120
    cost_per_meter: float = 0.2
    speed: float = 5.0
    seed: int = 0

    @property
    def cell_count(self) -> int:
        return self.cols * self.rows

    def check(self, strict: bool = False):
        if self.cols < 1 or self.rows < 1:
            raise ConfigError("grid dimensions must be positive")
        for name in ("region_side", "residence_shape", "residence_scale", "view_shape",
                     "view_scale", "hotspot_weight", "cost_per_meter", "speed"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.arrival_rate <= 0:
            raise ConfigError("arrival_rate must be positive")
        if self.horizon < 0 or self.budget < 0 or self.users < 0 or self.hotspots < 0:
            raise ConfigError("horizon, budget, users and hotspots must be non-negative")
        if self.mobility not in MOBILITY_MODELS:
            raise ConfigError(f"mobility must be one of {MOBILITY_MODELS}")
        lo, hi = STRICT_RATE_RANGE
        if strict and not lo <= self.arrival_rate <= hi:
            raise ConfigError(f"arrival_rate {self.arrival_rate} outside [{lo}, {hi}] (strict mode)")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def streams(seed: int) -> dict:
    children = np.random.SeedSequence(int(seed)).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


def cell_centers(config: SimConfig, cells=None) -> np.ndarray:
    cells = np.arange(config.cell_count) if cells is None else np.asarray(cells)
    col, row = cells % config.cols, cells // config.cols
    return np.stack([(col + 0.5) * config.region_side, (row + 0.5) * config.region_side], axis=1)


def gen_grid(config: SimConfig, cells=None):
    """RegionGrid over ``cells`` (default: every cell; O(K^3) validation)."""
    grid = grid_from_centers(cell_centers(config, cells), config.cost_per_meter, config.speed)
    problems = validate_grid(grid)
    assert not problems, f"synthesized grid violates metric constraints: {problems[:3]}"
    return grid


def gen_hotspots(config: SimConfig, rng=None):
    """(cells, weights) of the campus hotspots; empty for random waypoint."""
    if config.mobility != "campus_waypoint" or config.hotspots == 0:
        return [], []
    rng = rng or streams(config.seed)["hotspots"]
    n = min(config.hotspots, config.cell_count)
    cells = sorted(int(c) for c in rng.choice(config.cell_count, size=n, replace=False))
    return cells, [float(config.hotspot_weight)] * n


def cell_weights(config: SimConfig, hotspots) -> np.ndarray:
    w = np.ones(config.cell_count)
    for c, wt in zip(*hotspots):
        w[c] = wt
    return w / w.sum()


def _draw_cells(config, rng, size, hotspots):
    if config.mobility == "campus_waypoint":
        return rng.choice(config.cell_count, size=size, p=cell_weights(config, hotspots))
    return rng.integers(0, config.cell_count, size=size)


def sample_residence(config: SimConfig, rng, size=None):
    """Classical Pareto draws (minimum = scale)."""
    return config.residence_scale * (1.0 + rng.pareto(config.residence_shape, size=size))


def gen_requests(config: SimConfig, rng=None, hotspots=None) -> list:
    """Poisson arrivals over [0, T); region per arrival, gamma-distributed view time.

    Start = floor(arrival), length = max(1, round(gamma)), end clipped at T.
    Requests carry cell indices as regions.
    """
    if rng is None:
        rng = streams(config.seed)["requests"]
    if hotspots is None:
        hotspots = gen_hotspots(config)
    T = config.horizon
    if T <= 0:
        return []
    arrivals = []
    t = rng.exponential(1.0 / config.arrival_rate)
    while t < T:
        arrivals.append(t)
        t += rng.exponential(1.0 / config.arrival_rate)
    n = len(arrivals)
    cells = _draw_cells(config, rng, n, hotspots)
    views = rng.gamma(config.view_shape, config.view_scale, size=n)
    out = []
    for i, (a, c, v) in enumerate(zip(arrivals, cells, views)):
        s = int(np.floor(a))
        length = max(1, int(np.floor(v + 0.5)))
        out.append(Request(i, int(c), s, min(T, s + length)))
    return out


@dataclass(frozen=True)
class Trace:
    """Piecewise-constant occupancy: ``stays`` is a tuple of (cell, enter, exit)."""

    user: int
    stays: tuple

    def cell_at(self, t) -> int:
        for c, lo, hi in self.stays:
            if lo <= t < hi:
                return c
        return self.stays[-1][0]


def gen_mobility(config: SimConfig, J: int, rng=None, hotspots=None) -> list:
    """Uncontrolled waypoint traces for J users over [0, T].

    Next cell is uniform (random waypoint) or hotspot-weighted (campus);
    residence is Pareto rounded to the nearest integer (>= scale), the last
    stay is clipped at T. Moves between cells are instantaneous.
    """
    if rng is None:
        rng = streams(config.seed)["traces"]
    if hotspots is None:
        hotspots = gen_hotspots(config)
    T = config.horizon
    traces = []
    for j in range(J):
        stays = []
        t = 0
        while t < T or not stays:
            cell = int(_draw_cells(config, rng, 1, hotspots)[0])
            dwell = max(1, int(np.floor(sample_residence(config, rng) + 0.5)))
            hi = min(T, t + dwell)
            stays.append((cell, t, hi))
            t = hi
            if T == 0:
                break
        traces.append(Trace(j, tuple(stays)))
    return traces


def gen_users(config: SimConfig, rng=None, hotspots=None) -> list:
    if rng is None:
        rng = streams(config.seed)["users"]
    if hotspots is None:
        hotspots = gen_hotspots(config)
    cells = _draw_cells(config, rng, config.users, hotspots)
    return [CrowdUser(j, int(c)) for j, c in enumerate(cells)]


@dataclass(frozen=True)
class World:
    config: SimConfig
    hotspots: tuple
    requests: tuple  # regions are cell indices
    users: tuple  # start regions are cell indices

    def to_scenario(self) -> Scenario:
        cells = sorted({r.region for r in self.requests} | {u.start_region for u in self.users})
        if not cells:
            cells = [0]
        index = {c: k for k, c in enumerate(cells)}
        grid = gen_grid(self.config, cells)
        reqs = tuple(Request(r.id, index[r.region], r.start, r.end) for r in self.requests)
        users = tuple(CrowdUser(u.id, index[u.start_region]) for u in self.users)
        meta = {
            "seed": int(self.config.seed),
            "mobility": self.config.mobility,
            "area": {"cols": self.config.cols, "rows": self.config.rows,
                     "region_side": self.config.region_side},
            "cells": [int(c) for c in cells],
            "config": self.config.to_dict(),
        }
        if self.config.mobility == "campus_waypoint":
            meta["hotspots"] = {"cells": list(self.hotspots[0]), "weights": list(self.hotspots[1])}
        return Scenario(grid, self.config.horizon, reqs, users, self.config.budget, meta=meta)


def gen_world(config: SimConfig) -> World:
    config.check()
    rs = streams(config.seed)
    hot = gen_hotspots(config, rs["hotspots"])
    reqs = gen_requests(config, rs["requests"], hot)
    users = gen_users(config, rs["users"], hot)
    return World(config, (tuple(hot[0]), tuple(hot[1])), tuple(reqs), tuple(users))


def gen_scenario(config: SimConfig) -> Scenario:
    return gen_world(config).to_scenario()


def gen_traces(config: SimConfig, J: int) -> list:
    """Traces from the config's own seed stream (independent of requests)."""
    rs = streams(config.seed)
    hot = gen_hotspots(config, rs["hotspots"])
    return gen_mobility(config, J, rs["traces"], hot)


def eval_no_control(traces, requests, cell_of_region=None) -> int:
    """Utility collected by uncontrolled users that happen to share a cell with a request.

    At any instant a cell serves ``min(users present, active requests)``
    requests (each user serves one request, each request gets one user);
    which user serves which request does not change the sum. Swept per cell
    over the +1/-1 events of stays and windows.
    """
    events = {}
    for r in requests:
        c = r.region if cell_of_region is None else cell_of_region[r.region]
        if r.end > r.start:
            ev = events.setdefault(c, [])
            ev.append((r.start, 0, 1))
            ev.append((r.end, 0, -1))
    if not events:
        return 0
    for tr in traces:
        for c, lo, hi in tr.stays:
            if c in events and hi > lo:
                events[c].append((lo, 1, 0))
                events[c].append((hi, -1, 0))
    total = 0
    for ev in events.values():
        ev.sort()
        users = reqs = 0
        last = None
        for t, du, dr in ev:
            if last is not None and t > last:
                total += (t - last) * min(users, reqs)
            users += du
            reqs += dr
            last = t
    return int(total)


def export_traces(traces) -> str:
    lines = ["user\tregion\tenter\texit"]
    for tr in traces:
        for c, lo, hi in tr.stays:
            lines.append(f"{tr.user}\t{c}\t{lo}\t{hi}")
    return "\n".join(lines) + "\n"


def with_overrides(config: SimConfig, **kw) -> SimConfig:
    return replace(config, **kw)
