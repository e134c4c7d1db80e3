"""Scenario file: one JSON document.

Layout (all keys required unless noted)::

    {
      "format": "curp-scenario/1",
      "horizon": T,
      "budget": C,
      "grid": {
        "regions": K,
        # either explicit matrices ...
        "moving_cost": [[...], ...], "transfer_time": [[...], ...],
        # ... or a generator directive (P, Q rebuilt from centers)
        "generator": {"cost_per_meter": 0.2, "speed": 5.0},
        "centers": [[x, y], ...]          # required with generator, optional otherwise
      },
      "requests": [{"id": 0, "region": 3, "start": 10, "end": 18}, ...],
      "users": [{"id": 0, "start_region": 1}, ...],
      "meta": {...}                        # optional, free-form
    }

Serialization is canonical (sorted keys, fixed layout), so parse -> dump ->
parse is the identity and dump output is byte-stable.
"""

from __future__ import annotations

import hashlib
import json

from .model import CrowdUser, RegionGrid, Request, Scenario, grid_from_centers

FORMAT = "curp-scenario/1"


class ScenarioFormatError(ValueError):
    pass


def scenario_to_dict(sc: Scenario) -> dict:
    g = sc.grid
    grid = {"regions": g.region_count}
    if g.generator is not None and g.centers is not None:
        grid["generator"] = {"cost_per_meter": g.generator[0], "speed": g.generator[1]}
    else:
        grid["moving_cost"] = g.moving_cost.tolist()
        grid["transfer_time"] = g.transfer_time.tolist()
    if g.centers is not None:
        grid["centers"] = g.centers.tolist()
    return {
        "format": FORMAT,
        "horizon": int(sc.horizon),
        "budget": int(sc.budget),
        "grid": grid,
        "requests": [
            {"id": r.id, "region": r.region, "start": r.start, "end": r.end} for r in sc.requests
        ],
        "users": [{"id": u.id, "start_region": u.start_region} for u in sc.users],
        "meta": sc.meta,
    }


def _int(d, key, where):
    if not isinstance(d, dict):
        raise ScenarioFormatError(f"{where}: expected an object, got {type(d).__name__}")
    try:
        v = d[key]
    except KeyError:
        raise ScenarioFormatError(f"{where}: missing key '{key}'") from None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioFormatError(f"{where}: '{key}' must be an integer, got {v!r}")
    return v


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("format") != FORMAT:
        raise ScenarioFormatError(f"unsupported format {d.get('format')!r}, expected {FORMAT!r}")
    try:
        g = d["grid"]
    except KeyError:
        raise ScenarioFormatError("missing key 'grid'") from None
    K = _int(g, "regions", "grid")
    if "generator" in g:
        if "centers" not in g:
            raise ScenarioFormatError("grid: generator directive needs 'centers'")
        gen = g["generator"]
        try:
            grid = grid_from_centers(g["centers"], float(gen["cost_per_meter"]), float(gen["speed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioFormatError(f"grid: bad generator directive: {exc}") from None
    else:
        if "moving_cost" not in g or "transfer_time" not in g:
            raise ScenarioFormatError("grid: needs moving_cost and transfer_time, or a generator")
        grid = RegionGrid(g["moving_cost"], g["transfer_time"], centers=g.get("centers"))
    if grid.region_count != K:
        raise ScenarioFormatError(f"grid: regions={K} but matrices are {grid.region_count}x{grid.region_count}")
    requests = tuple(
        Request(_int(r, "id", f"requests[{n}]"), _int(r, "region", f"requests[{n}]"),
                _int(r, "start", f"requests[{n}]"), _int(r, "end", f"requests[{n}]"))
        for n, r in enumerate(d.get("requests", []))
    )
    users = tuple(
        CrowdUser(_int(u, "id", f"users[{n}]"), _int(u, "start_region", f"users[{n}]"))
        for n, u in enumerate(d.get("users", []))
    )
    return Scenario(grid, _int(d, "horizon", "scenario"), requests, users,
                    _int(d, "budget", "scenario"), meta=dict(d.get("meta", {})))


def _emit(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_emit(obj[k], indent + 1)}' for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if all(not isinstance(x, (dict, list)) for x in obj):
            return json.dumps(obj)
        items = [pad + "  " + _emit(x, indent + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(obj)


def dumps(sc_or_dict) -> str:
    d = scenario_to_dict(sc_or_dict) if isinstance(sc_or_dict, Scenario) else sc_or_dict
    return _emit(d) + "\n"


def loads(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ScenarioFormatError("top level must be an object")
    return scenario_from_dict(d)


def save(sc: Scenario, path) -> str:
    text = dumps(sc)
    with open(path, "w") as fh:
        fh.write(text)
    return digest_text(text)


def load(path) -> Scenario:
    with open(path) as fh:
        return loads(fh.read())


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def digest(sc: Scenario) -> str:
    return digest_text(dumps(sc))
