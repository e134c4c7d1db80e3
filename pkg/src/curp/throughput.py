"""Fluent-playback analysis of cellular throughput logs.

Trace file format (plain text)::

    # scene: bus
    0.0 12.31
    1.0 9.87
    ...

First line names the scene, then one ``timestamp_seconds throughput_mbps``
pair per line (whitespace or comma separated, ``#`` lines ignored).
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

SCENES = ("bicycle", "bus", "car", "foot", "train", "tram", "other")


class TraceFormatError(ValueError):
    pass


class EmptyTraceError(ValueError):
    pass


@dataclass(frozen=True)
class BitrateProfile:
    bitrate: float
    label: str = "custom"

    def __post_init__(self):
        if self.bitrate <= 0:
            raise ValueError("bitrate must be positive")


FHD = BitrateProfile(5.2, "FHD")
UHD_4K = BitrateProfile(21.4, "4K")


@dataclass(frozen=True, eq=False)
class ThroughputTrace:
    timestamps: np.ndarray
    throughput: np.ndarray
    scene: str = "other"
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        x = np.asarray(self.throughput, dtype=float)
        if t.shape != x.shape or t.ndim != 1:
            raise TraceFormatError("timestamps and throughput must be equal-length vectors")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise TraceFormatError("timestamps must be strictly increasing")
        if np.any(x < 0):
            raise TraceFormatError("throughput must be non-negative")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "throughput", x)

    def __len__(self):
        return len(self.timestamps)


def resample_1hz(trace: ThroughputTrace) -> np.ndarray:
    """Zero-order hold at whole seconds after the first sample: t0, t0+1, ..."""
    if len(trace) == 0:
        raise EmptyTraceError(f"trace {trace.name or '<unnamed>'} has no samples")
    t = trace.timestamps
    grid = t[0] + np.arange(int(np.floor(t[-1] - t[0])) + 1)
    idx = np.searchsorted(t, grid, side="right") - 1
    return trace.throughput[idx]


def aggregate(traces) -> np.ndarray:
    """Sum of z traces aligned on elapsed time, truncated to the shortest."""
    series = [resample_1hz(tr) for tr in traces]
    n = min(len(s) for s in series)
    return np.sum([s[:n] for s in series], axis=0)


def playback_probability(traces, profile: BitrateProfile) -> float:
    if not traces:
        raise EmptyTraceError("need at least one trace")
    total = aggregate(traces)
    return float(np.mean(total >= profile.bitrate))


# ---------------------------------------------------------------------------
# G(x) <= F(x)^z for the sum of z iid non-negative draws


@dataclass(frozen=True)
class Prop1Row:
    x: float
    g_hat: float
    f_pow: float
    stderr: float
    ok: bool


@dataclass(frozen=True)
class Prop1Report:
    z: int
    n: int
    rows: tuple

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def validate_prop1(dist, z: int, xs, n: int = 100_000, seed: int = 0, sigmas: float = 3.0) -> Prop1Report:
    """Monte-Carlo check that the CDF of a z-fold sum stays below F^z.

    ``dist`` is a frozen scipy.stats distribution (needs ``rvs`` and ``cdf``).
    The allowance per grid point is ``sigmas`` binomial standard errors of
    the estimate, taken at the bound F^z.
    """
    if z < 1:
        raise ValueError("z must be >= 1")
    if n < 10_000:
        raise ValueError("n must be >= 10^4")
    rng = np.random.default_rng(seed)
    sums = dist.rvs(size=(n, z), random_state=rng).sum(axis=1)
    rows = []
    for x in xs:
        g = float(np.mean(sums <= x))
        fz = float(dist.cdf(x)) ** z
        se = float(np.sqrt(max(fz * (1 - fz), 0.0) / n))
        rows.append(Prop1Row(float(x), g, fz, se, g <= fz + sigmas * se))
    return Prop1Report(z, n, tuple(rows))


# ---------------------------------------------------------------------------
# files and the per-scene table


def parse_trace(text: str, name: str = "") -> ThroughputTrace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#") or ":" not in lines[0]:
        raise TraceFormatError(f"{name}: first line must be '# scene: <label>'")
    key, _, value = lines[0][1:].partition(":")
    if key.strip() != "scene":
        raise TraceFormatError(f"{name}: first line must be '# scene: <label>'")
    scene = value.strip().lower()
    if scene not in SCENES:
        scene = "other"
    ts, xs = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise TraceFormatError(f"{name}:{lineno}: expected two columns")
        try:
            ts.append(float(parts[0]))
            xs.append(float(parts[1]))
        except ValueError:
            raise TraceFormatError(f"{name}:{lineno}: not a number") from None
    return ThroughputTrace(np.array(ts), np.array(xs), scene, name)


def read_trace(path) -> ThroughputTrace:
    with open(path) as fh:
        return parse_trace(fh.read(), os.path.basename(path))


def write_trace(trace: ThroughputTrace, path):
    with open(path, "w") as fh:
        fh.write(f"# scene: {trace.scene}\n")
        for t, x in zip(trace.timestamps, trace.throughput):
            fh.write(f"{t:.3f} {x:.4f}\n")


@dataclass
class SceneReport:
    rows: list  # (scene, profile label, z, probability, samples)
    errors: list  # (file name, message)

    def as_text(self) -> str:
        out = [f"{'scene':<10} {'video':<6} {'conf':<5} {'prob':>8} {'samples':>9}"]
        for scene, label, z, p, m in self.rows:
            out.append(f"{scene:<10} {label:<6} {str(z) + 'x':<5} {p:>8.4f} {m:>9d}")
        for f, msg in self.errors:
            out.append(f"error {f}: {msg}")
        return "\n".join(out) + "\n"

    def as_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene", "video", "conf", "probability", "samples"])
        for scene, label, z, p, m in self.rows:
            w.writerow([scene, label, f"{z}x", f"{p:.6f}", m])
        return buf.getvalue()


def scene_report(directory, profiles=(FHD, UHD_4K)) -> SceneReport:
    """Table of fluent-playback probability per scene, profile and z in {1, 2}.

    1x pools every 1 Hz sample of every trace in the scene; 2x pairs traces
    in filename order, (1st, 2nd), (3rd, 4th), ..., dropping an odd one out,
    and pools the aggregated samples of all pairs.
    """
    by_scene = {}
    errors = []
    for fname in sorted(os.listdir(directory)):
        path = os.path.join(directory, fname)
        if not os.path.isfile(path):
            continue
        try:
            tr = read_trace(path)
            if len(tr) == 0:
                raise EmptyTraceError("no samples")
        except (TraceFormatError, EmptyTraceError, UnicodeDecodeError, OSError) as exc:
            errors.append((fname, str(exc)))
            continue
        by_scene.setdefault(tr.scene, []).append(tr)
    rows = []
    for scene in sorted(by_scene):
        traces = by_scene[scene]
        singles = [resample_1hz(t) for t in traces]
        pairs = [aggregate(traces[k:k + 2]) for k in range(0, len(traces) - 1, 2)]
        for prof in profiles:
            ones = np.concatenate(singles)
            rows.append((scene, prof.label, 1, float(np.mean(ones >= prof.bitrate)), int(ones.size)))
            if pairs:
                twos = np.concatenate(pairs)
                rows.append((scene, prof.label, 2, float(np.mean(twos >= prof.bitrate)), int(twos.size)))
    return SceneReport(rows, errors)


def synthetic_corpus(directory, scenes=SCENES[:6], per_scene: int = 4, seconds: int = 600,
                     seed: int = 0) -> list:
    """Write lognormal throughput traces (about 1 Hz with jitter); returns file paths."""
    rng = np.random.default_rng(seed)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for s, scene in enumerate(scenes):
        median = 10.0 + 6.0 * s
        for k in range(per_scene):
            t = np.cumsum(rng.uniform(0.8, 1.2, size=seconds))
            x = rng.lognormal(np.log(median), 0.6, size=seconds)
            path = os.path.join(directory, f"{scene}_{k:02d}.txt")
            write_trace(ThroughputTrace(t, x, scene, os.path.basename(path)), path)
            paths.append(path)
    return paths
