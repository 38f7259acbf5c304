"""Intruder trajectories: protocol generation, trial files and numerical differentiation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

__all__ = [
    "ProtocolSpec",
    "TrialRecord",
    "Trajectory",
    "differentiate",
    "generate_protocol",
    "load_trial",
    "save_trial",
]

# Relative slack on sample spacing before a file is rejected as non-uniform.
SPACING_TOL = 0.01


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled intruder motion; depth is positive below the mud surface."""

    dt: float
    t: np.ndarray
    z_i: np.ndarray
    zdot_i: np.ndarray
    phase_ends: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for name in ("t", "z_i", "zdot_i"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.t)
        if len(self.z_i) != n or len(self.zdot_i) != n:
            raise ValueError("t, z_i and zdot_i must have equal lengths")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be finite and > 0, got {self.dt!r}")
        for name in ("t", "z_i", "zdot_i"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite values")
        _check_spacing(self.t, self.dt)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0


def _check_spacing(t: np.ndarray, dt: float) -> None:
    if len(t) < 2:
        return
    d = np.diff(t)
    if (d <= 0).any():
        k = int(np.flatnonzero(d <= 0)[0]) + 1
        raise ValueError(f"time is not strictly increasing at sample {k} (t={t[k]!r})")
    bad = np.abs(d - dt) > SPACING_TOL * dt
    if bad.any():
        k = int(np.flatnonzero(bad)[0]) + 1
        raise ValueError(f"non-uniform sampling at sample {k}: step {d[k - 1]!r} vs dt {dt!r}")


@dataclass(frozen=True)
class ProtocolSpec:
    """Down / hold / up test protocol. ``z_end <= 0`` is the final height (negative = above the surface)."""

    v_down: float = 0.01
    depth: float = 0.05
    t_sustain: float = 6.0
    v_up: float | None = None
    dt: float = 0.01
    z_end: float = 0.0

    @property
    def withdraw_velocity(self) -> float:
        return self.v_down if self.v_up is None else self.v_up


@dataclass
class TrialRecord:
    """A recorded (or synthesized) trial: motion plus optional measured force."""

    trajectory: Trajectory
    F_meas: np.ndarray | None = None
    water_content: float | None = None
    velocity: float | None = None
    trial_id: str | None = None

    def __post_init__(self) -> None:
        if self.F_meas is not None:
            self.F_meas = np.asarray(self.F_meas, dtype=float)
            if len(self.F_meas) != len(self.trajectory):
                raise ValueError("force series must align 1:1 with trajectory samples")
            if not np.isfinite(self.F_meas).all():
                raise ValueError("force series contains non-finite values")


def _samples(length: float, speed: float, dt: float) -> int:
    return max(1, math.ceil(length / (speed * dt) - 1e-9))


def generate_protocol(spec: ProtocolSpec) -> Trajectory:
    """Build the three-phase constant-velocity profile.

    Phase durations are rounded up to whole samples; the segment speed is
    then reduced slightly so that the target depths are hit exactly.
    ``zdot_i[k]`` is the velocity of the segment ending at sample ``k``
    (sample 0 carries the first segment's velocity).
    """
    v_up = spec.withdraw_velocity
    values = (spec.v_down, spec.depth, spec.t_sustain, v_up, spec.dt, spec.z_end)
    if not all(math.isfinite(v) for v in values):
        raise ValueError("protocol values must be finite")
    if spec.v_down <= 0 or v_up <= 0:
        raise ValueError("intrusion and withdrawal speeds must be > 0")
    if spec.depth <= 0:
        raise ValueError("intrusion depth must be > 0")
    if spec.t_sustain < 0:
        raise ValueError("sustain time must be >= 0")
    if spec.dt <= 0:
        raise ValueError("dt must be > 0")
    if spec.z_end > 0:
        raise ValueError("z_end must be <= 0 (at or above the mud surface)")

    n1 = _samples(spec.depth, spec.v_down, spec.dt)
    n2 = math.ceil(spec.t_sustain / spec.dt - 1e-9) if spec.t_sustain > 0 else 0
    rise = spec.depth - spec.z_end
    n3 = _samples(rise, v_up, spec.dt)
    v1 = spec.depth / (n1 * spec.dt)
    v3 = rise / (n3 * spec.dt)

    down = spec.depth * np.arange(n1 + 1) / n1
    hold = np.full(n2, spec.depth)
    up = spec.depth - rise * np.arange(1, n3 + 1) / n3
    # pin the turning points against rounding in the ramps
    down[-1] = spec.depth
    up[-1] = spec.z_end
    z = np.concatenate([down, hold, up])
    zdot = np.concatenate([np.full(n1 + 1, v1), np.zeros(n2), np.full(n3, -v3)])
    t = np.arange(len(z)) * spec.dt
    return Trajectory(dt=spec.dt, t=t, z_i=z, zdot_i=zdot, phase_ends=(n1, n1 + n2, n1 + n2 + n3))


def differentiate(z, dt: float, window: int = 1) -> np.ndarray:
    """Velocity from sampled displacement.

    Central differences (one-sided at the ends), then a centred moving average
    over ``window`` samples; the window shrinks symmetrically near the ends.
    """
    z = np.asarray(z, dtype=float)
    if len(z) < 2:
        raise ValueError("need at least 2 samples to differentiate")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smoothing window must be odd and >= 1, got {window}")
    v = np.gradient(z, dt)
    if window == 1:
        return v
    half = window // 2
    n = len(v)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(n)
    reach = np.minimum(np.minimum(idx, n - 1 - idx), half)
    return (c[idx + reach + 1] - c[idx - reach]) / (2 * reach + 1)


def _parse_metadata(line: str) -> dict[str, str]:
    meta = {}
    for item in line.lstrip("#").strip().split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ValueError(f"malformed metadata item {item!r}")
        key, value = item.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def load_trial(source: str | Path | IO[str], smoothing_window: int = 5) -> TrialRecord:
    """Read a trial CSV (header ``t_s,z_i_m[,F_N]``).

    A ``zdot_i_m_per_s`` column, when present, is used as is; otherwise the
    velocity is differentiated from ``z_i_m`` with ``smoothing_window``.
    Extra columns are ignored, so simulated traces load as trials too.
    """
    if hasattr(source, "read"):
        text = source.read()
        name = getattr(source, "name", "<stream>")
    else:
        text = Path(source).read_text(encoding="utf-8")
        name = str(source)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    meta: dict[str, str] = {}
    if lines and lines[0].startswith("#"):
        meta = _parse_metadata(lines.pop(0))
    if not lines:
        raise ValueError(f"{name}: missing header")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        raise ValueError(f"{name}: duplicate column names in header {header}")
    for required in ("t_s", "z_i_m"):
        if required not in header:
            raise ValueError(f"{name}: malformed header, missing {required!r}")
    rows = list(reader)
    if len(rows) < 2:
        raise ValueError(f"{name}: need at least 2 samples, found {len(rows)}")
    columns = {}
    for col in ("t_s", "z_i_m", "zdot_i_m_per_s", "F_N"):
        if col not in header:
            continue
        j = header.index(col)
        try:
            values = np.array([float(r[j]) for r in rows])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{name}: bad value in column {col!r}: {exc}") from None
        if not np.isfinite(values).all():
            k = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"{name}: non-finite value in column {col!r} at row {k}")
        columns[col] = values
    t = columns["t_s"]
    if (np.diff(t) <= 0).any():
        k = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
        raise ValueError(f"{name}: time not strictly increasing at row {k}")
    dt = float(f"{(t[-1] - t[0]) / (len(t) - 1):.12g}")
    z = columns["z_i_m"]
    zdot = columns.get("zdot_i_m_per_s")
    if zdot is None:
        zdot = differentiate(z, dt, smoothing_window)
    try:
        traj = Trajectory(dt=dt, t=t, z_i=z, zdot_i=zdot)
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None
    return TrialRecord(
        trajectory=traj,
        F_meas=columns.get("F_N"),
        water_content=float(meta["W"]) if "W" in meta else None,
        velocity=float(meta["v"]) if "v" in meta else None,
        trial_id=meta.get("trial"),
    )


def save_trial(
    record: TrialRecord | Trajectory,
    path: str | Path | None = None,
    include_velocity: bool = True,
) -> str:
    """Write a trajectory or trial as CSV; returns the text."""
    if isinstance(record, Trajectory):
        record = TrialRecord(record)
    traj = record.trajectory
    buf = io.StringIO()
    meta = []
    if record.water_content is not None:
        meta.append(f"W={record.water_content!r}")
    if record.velocity is not None:
        meta.append(f"v={record.velocity!r}")
    if record.trial_id is not None:
        meta.append(f"trial={record.trial_id}")
    if meta:
        buf.write("# " + ",".join(meta) + "\n")
    header = ["t_s", "z_i_m"]
    if include_velocity:
        header.append("zdot_i_m_per_s")
    if record.F_meas is not None:
        header.append("F_N")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for k in range(len(traj)):
        row = [repr(float(traj.t[k])), repr(float(traj.z_i[k]))]
        if include_velocity:
            row.append(repr(float(traj.zdot_i[k])))
        if record.F_meas is not None:
            row.append(repr(float(record.F_meas[k])))
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
