"""Mud state evolution: relaxation ODE, yield/necking switch and post-necking filter.

One sample of the pipeline runs in this order: classify the regime from the
intruder velocity, advance the mud displacement, pass the mud velocity through
the switch (identity, or the second-order filter once necked), evaluate the
stresses, then test the yield condition and latch necking.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import expm

from . import _kernel as K
from .params import IntruderGeometry, MudParameters, Regime, StressComponents

if TYPE_CHECKING:
    from .trajectory import Trajectory

__all__ = [
    "DEFAULT_DT",
    "ForceTrace",
    "MudState",
    "filter_transition",
    "free_response",
    "load_trace",
    "necking_filter_step",
    "simulate",
    "step",
    "step_maxwell",
    "yield_check",
]

DEFAULT_DT = 0.01  # s, 100 Hz

TRACE_COLUMNS = (
    "t_s",
    "z_i_m",
    "zdot_i_m_per_s",
    "z_m_m",
    "zdot_m_m_per_s",
    "f_e1_Pa",
    "f_e2_Pa",
    "f_s_Pa",
    "f_total_Pa",
    "F_N",
    "regime",
    "necked",
)


@dataclass(frozen=True)
class MudState:
    """Internal mud state between samples.

    ``filter_state`` holds (mud displacement since necking, mud velocity) of the
    post-necking filter; it is unused while ``necked`` is False.
    """

    z_i: float = 0.0
    z_m: float = 0.0
    zdot_m_raw: float = 0.0
    zdot_m: float = 0.0
    filter_state: tuple[float, float] = (0.0, 0.0)
    necked: bool = False
    v_m0: float = 0.0
    z_m_neck: float = 0.0
    in_contact: bool = False
    t_since_neck: float = 0.0

    @classmethod
    def at_rest(cls, z_i: float = 0.0) -> MudState:
        """Relaxed mud under an intruder held at ``z_i``."""
        return cls(z_i=z_i, z_m=z_i, in_contact=z_i > 0)

    def _to_array(self) -> np.ndarray:
        s = np.zeros(K.N_STATE)
        s[K.S_ZI] = self.z_i
        s[K.S_ZM] = self.z_m
        s[K.S_ZDOT_RAW] = self.zdot_m_raw
        s[K.S_ZDOT_M] = self.zdot_m
        s[K.S_X1], s[K.S_X2] = self.filter_state
        s[K.S_NECKED] = float(self.necked)
        s[K.S_VM0] = self.v_m0
        s[K.S_ZM_NECK] = self.z_m_neck
        s[K.S_CONTACT] = float(self.in_contact)
        s[K.S_TNECK] = self.t_since_neck
        return s

    @classmethod
    def _from_array(cls, s: np.ndarray) -> MudState:
        return cls(
            z_i=float(s[K.S_ZI]),
            z_m=float(s[K.S_ZM]),
            zdot_m_raw=float(s[K.S_ZDOT_RAW]),
            zdot_m=float(s[K.S_ZDOT_M]),
            filter_state=(float(s[K.S_X1]), float(s[K.S_X2])),
            necked=bool(s[K.S_NECKED]),
            v_m0=float(s[K.S_VM0]),
            z_m_neck=float(s[K.S_ZM_NECK]),
            in_contact=bool(s[K.S_CONTACT]),
            t_since_neck=float(s[K.S_TNECK]),
        )


@dataclass
class ForceTrace:
    """Sampled simulation output; all arrays share the trajectory's length."""

    dt: float
    t: np.ndarray
    z_i: np.ndarray
    zdot_i: np.ndarray
    z_m: np.ndarray
    zdot_m: np.ndarray
    f_e1: np.ndarray
    f_e2: np.ndarray
    f_s: np.ndarray
    f_total: np.ndarray
    F_total: np.ndarray
    withdrawal: np.ndarray
    necked: np.ndarray
    zdot_m_raw: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def regime(self) -> list[Regime]:
        return [Regime.WITHDRAWAL if w else Regime.INTRUSION for w in self.withdrawal]

    def necking_time(self) -> float | None:
        idx = np.flatnonzero(self.necked)
        return float(self.t[idx[0]]) if idx.size else None

    def summary(self) -> dict[str, float | None]:
        """Peak intrusion force, suction minimum, steady sustain force (N), necking time (s)."""
        F = self.F_total
        withdrawing = np.flatnonzero(self.withdrawal)
        end = withdrawing[0] if withdrawing.size else len(F)
        steady = None
        hold = np.flatnonzero(self.zdot_i[:end] == 0.0)
        if hold.size:
            steady = float(F[hold[-1]])
        return {
            "peak_force_N": float(F[:end].max()) if end else float(F.max()),
            "suction_min_N": float(F.min()),
            "steady_sustain_force_N": steady,
            "necking_time_s": self.necking_time(),
        }

    def to_csv(self, path: str | Path | None = None, normalize: bool = False) -> str:
        """Write the trace as CSV (SI units) and return the text.

        With ``normalize`` the force column is divided by ``max |F|``.
        """
        F = self.F_total
        if normalize:
            peak = float(np.abs(F).max())
            F = F / peak if peak > 0 else F
        buf = io.StringIO()
        if self.metadata:
            buf.write("# " + ",".join(f"{k}={v}" for k, v in self.metadata.items()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for k in range(len(self.t)):
            writer.writerow(
                [
                    repr(float(self.t[k])),
                    repr(float(self.z_i[k])),
                    repr(float(self.zdot_i[k])),
                    repr(float(self.z_m[k])),
                    repr(float(self.zdot_m[k])),
                    repr(float(self.f_e1[k])),
                    repr(float(self.f_e2[k])),
                    repr(float(self.f_s[k])),
                    repr(float(self.f_total[k])),
                    repr(float(F[k])),
                    "W" if self.withdrawal[k] else "I",
                    "1" if self.necked[k] else "0",
                ]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def load_trace(path: str | Path) -> ForceTrace:
    """Read a trace CSV written by :meth:`ForceTrace.to_csv`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    metadata = {}
    if lines and lines[0].startswith("#"):
        for item in lines.pop(0).lstrip("#").strip().split(","):
            if "=" in item:
                key, value = item.split("=", 1)
                metadata[key.strip()] = value.strip()
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"{path}: not a force-trace file (header {header!r})")
    rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: trace has no samples")
    cols = list(zip(*rows))
    num = [np.array([float(v) for v in c]) for c in cols[:10]]
    t = num[0]
    dt = float(t[1] - t[0]) if len(t) > 1 else DEFAULT_DT
    return ForceTrace(
        dt=dt,
        t=t,
        z_i=num[1],
        zdot_i=num[2],
        z_m=num[3],
        zdot_m=num[4],
        f_e1=num[5],
        f_e2=num[6],
        f_s=num[7],
        f_total=num[8],
        F_total=num[9],
        withdrawal=np.array([v == "W" for v in cols[10]]),
        necked=np.array([v == "1" for v in cols[11]]),
        metadata=metadata,
    )


def _check_dt(dt: float) -> None:
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")


def _pack(params: MudParameters, geometry: IntruderGeometry, deadband: float, dt: float) -> np.ndarray:
    p = np.empty(K.N_PARAMS)
    p[: len(params.theta)] = params.theta
    p[K.P_LAM] = params.lambda_drag
    p[K.P_RHO] = params.rho_m
    p[K.P_H] = geometry.H
    p[K.P_S] = geometry.area
    p[K.P_DEADBAND] = deadband
    p[K.P_DT] = dt
    a_i = params.k_i / params.b_i
    a_w = params.k_w / params.b_w
    p[K.P_DECAY_I], p[K.P_EXPM1_I] = math.exp(-a_i * dt), math.expm1(-a_i * dt)
    p[K.P_DECAY_W], p[K.P_EXPM1_W] = math.exp(-a_w * dt), math.expm1(-a_w * dt)
    return p


@lru_cache(maxsize=256)
def filter_transition(zeta: float, omega0: float, dt: float) -> np.ndarray:
    """One-step state-transition matrix of the post-necking filter.

    The filter ``s / (s^2 + 2 zeta omega0 s + omega0^2)`` driven by the
    pre-necking velocity is realised as the free motion of
    ``x'' + 2 zeta omega0 x' + omega0^2 x = 0`` with ``x(0) = 0``,
    ``x'(0) = v_m0``; state is ``(x, x')``.
    """
    A = np.array([[0.0, 1.0], [-(omega0**2), -2.0 * zeta * omega0]])
    phi = expm(A * dt)
    phi.setflags(write=False)
    return phi


def free_response(t, zeta: float, omega0: float):
    """Closed-form unit free response of the necking filter.

    Returns ``(x, v)``: mud displacement and velocity per unit initial
    velocity, for under-, critically and over-damped filters.
    """
    t = np.asarray(t, dtype=float)
    sig = zeta * omega0
    if abs(zeta - 1.0) < 1e-9:
        e = np.exp(-omega0 * t)
        return t * e, (1.0 - omega0 * t) * e
    if zeta < 1.0:
        wd = omega0 * math.sqrt(1.0 - zeta * zeta)
        e = np.exp(-sig * t)
        s, c = np.sin(wd * t), np.cos(wd * t)
        return e * s / wd, e * (c - sig / wd * s)
    root = omega0 * math.sqrt(zeta * zeta - 1.0)
    r1, r2 = -sig + root, -sig - root
    e1, e2 = np.exp(r1 * t), np.exp(r2 * t)
    return (e1 - e2) / (r1 - r2), (r1 * e1 - r2 * e2) / (r1 - r2)


def step_maxwell(
    params: MudParameters,
    regime: Regime,
    z_i: float,
    state: MudState,
    dt: float,
) -> tuple[float, float]:
    """Advance the relaxation ODE by ``dt`` with the intruder moving linearly to ``z_i``.

    Returns the new ``(z_m, zdot_m_raw)``. With the intruder held still this is
    ``z_m <- z_i + (z_m - z_i) exp(-k dt / b)``.
    """
    _check_dt(dt)
    if not all(math.isfinite(v) for v in (z_i, state.z_i, state.z_m)):
        raise ValueError("non-finite input to step_maxwell")
    k, b = params.coefficients(regime)
    a = k / b
    u = (z_i - state.z_i) / dt
    e = (state.z_i - state.z_m) * math.exp(-a * dt) - (u / a) * math.expm1(-a * dt)
    return z_i - e, a * e


def yield_check(params: MudParameters, f_total_withdrawal: float) -> bool:
    """True when the withdrawal stress magnitude strictly exceeds the yield stress."""
    return abs(f_total_withdrawal) > params.sigma_y


def necking_filter_step(params: MudParameters, state: MudState, dt: float) -> MudState:
    """Advance the post-necking filter by one step; the new mud velocity is ``zdot_m``."""
    _check_dt(dt)
    if not state.necked:
        raise ValueError("necking filter stepped before necking")
    phi = filter_transition(params.zeta, params.omega0, dt)
    x = phi @ np.asarray(state.filter_state)
    return replace(
        state,
        filter_state=(float(x[0]), float(x[1])),
        z_m=state.z_m_neck + float(x[0]),
        zdot_m=float(x[1]),
        t_since_neck=state.t_since_neck + dt,
    )


def step(
    params: MudParameters,
    geometry: IntruderGeometry,
    z_i: float,
    zdot_i: float,
    state: MudState,
    dt: float = DEFAULT_DT,
    deadband: float = 0.0,
) -> tuple[MudState, StressComponents]:
    """Run one sample of the pipeline and return the new state and stresses."""
    _check_dt(dt)
    if not (math.isfinite(z_i) and math.isfinite(zdot_i)):
        raise ValueError("z_i and zdot_i must be finite")
    p = _pack(params, geometry, deadband, dt)
    phi = filter_transition(params.zeta, params.omega0, dt)
    s = state._to_array()
    record = np.zeros((1, K.N_RECORD))
    K.run(p, phi, s, np.array([z_i], dtype=float), np.array([zdot_i], dtype=float), dt, True, record, K.EMPTY)
    r = record[0]
    stresses = StressComponents(
        float(r[K.R_FE1]), float(r[K.R_FE2]), float(r[K.R_FS]), float(r[K.R_FTOT]), float(r[K.R_F])
    )
    return MudState._from_array(s), stresses


def simulate(
    params: MudParameters,
    geometry: IntruderGeometry,
    trajectory: Trajectory,
    deadband: float = 0.0,
    initial_state: MudState | None = None,
) -> ForceTrace:
    """Simulate the force response to a sampled intruder trajectory.

    Sample 0 is evaluated from ``initial_state`` (default: mud at rest under
    the first sample) without advancing; every later sample advances by the
    trajectory's ``dt``.
    """
    z = np.ascontiguousarray(trajectory.z_i, dtype=float)
    zdot = np.ascontiguousarray(trajectory.zdot_i, dtype=float)
    n = len(z)
    if n == 0:
        raise ValueError("empty trajectory")
    if not (np.isfinite(z).all() and np.isfinite(zdot).all()):
        raise ValueError("trajectory contains non-finite samples")
    dt = trajectory.dt
    _check_dt(dt)
    state = initial_state if initial_state is not None else MudState.at_rest(float(z[0]))
    p = _pack(params, geometry, deadband, dt)
    phi = filter_transition(params.zeta, params.omega0, dt)
    record = np.zeros((n, K.N_RECORD))
    K.run(p, phi, state._to_array(), z, zdot, dt, False, record, K.EMPTY)
    return ForceTrace(
        dt=dt,
        t=np.asarray(trajectory.t, dtype=float),
        z_i=z,
        zdot_i=zdot,
        z_m=record[:, K.R_ZM].copy(),
        zdot_m=record[:, K.R_ZDOT_M].copy(),
        f_e1=record[:, K.R_FE1].copy(),
        f_e2=record[:, K.R_FE2].copy(),
        f_s=record[:, K.R_FS].copy(),
        f_total=record[:, K.R_FTOT].copy(),
        F_total=record[:, K.R_F].copy(),
        withdrawal=record[:, K.R_WITHDRAWAL] != 0.0,
        necked=record[:, K.R_NECKED] != 0.0,
        zdot_m_raw=record[:, K.R_ZDOT_RAW].copy(),
    )
