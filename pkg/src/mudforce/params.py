"""Parameter sets, intruder geometry and the published preset table.

All quantities are stored in SI units. Parameter files use explicit unit
suffixes in their keys so that values can be written exactly as they
appear in the published table (MPa, kPa) and converted on load.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "FIT_NAMES",
    "IntruderGeometry",
    "MudParameters",
    "PRESET_WATER_CONTENTS",
    "Regime",
    "StressComponents",
    "dump_parameters",
    "load_parameters",
    "load_preset",
    "parameters_from_dict",
    "parameters_to_dict",
    "table_rows",
]

# Order of the nine identified constants; used as the calibration vector.
FIT_NAMES = ("k_i", "b_i", "k_w", "b_w", "alpha", "beta", "sigma_y", "zeta", "omega0")

PRESET_WATER_CONTENTS = (15, 20, 25, 30, 35)

# field -> ((key, scale to SI), ...); the first entry is the preferred key on output.
_KEYS: dict[str, tuple[tuple[str, int], ...]] = {
    "k_i": (("k_i_MPa_per_m", 10**6), ("k_i_Pa_per_m", 1)),
    "b_i": (("b_i_MPa_s_per_m", 10**6), ("b_i_Pa_s_per_m", 1)),
    "k_w": (("k_w_MPa_per_m", 10**6), ("k_w_Pa_per_m", 1)),
    "b_w": (("b_w_MPa_s_per_m", 10**6), ("b_w_Pa_s_per_m", 1)),
    "alpha": (("alpha_MPa", 10**6), ("alpha_Pa", 1)),
    "beta": (("beta", 1),),
    "sigma_y": (("sigma_y_kPa", 10**3), ("sigma_y_Pa", 1)),
    "zeta": (("zeta", 1),),
    "omega0": (("omega0_rad_per_s", 1),),
    "lambda_drag": (("lambda_drag", 1),),
    "rho_m": (("rho_m_kg_per_m3", 1),),
    "water_content": (("water_content", 1),),
}

# Column layout of the published table: (header, field, scale from SI, decimals).
_TABLE_COLUMNS = (
    ("k_i [MPa/m]", "k_i", 10**6, 2),
    ("b_i [MPa/(m/s)]", "b_i", 10**6, 2),
    ("k_w [MPa/m]", "k_w", 10**6, 2),
    ("b_w [MPa/(m/s)]", "b_w", 10**6, 2),
    ("alpha [MPa]", "alpha", 10**6, 2),
    ("beta", "beta", 1, 2),
    ("sigma_y [kPa]", "sigma_y", 10**3, 0),
    ("zeta", "zeta", 1, 2),
    ("omega0", "omega0", 1, 2),
)


class Regime(str, enum.Enum):
    """Motion regime selecting the (k, b) coefficient pair."""

    INTRUSION = "I"
    WITHDRAWAL = "W"


@dataclass(frozen=True)
class MudParameters:
    """Constants of the visco-elasto-plastic foot-mud model (SI units).

    Attributes
    ----------
    k_i, b_i : float
        Intrusion stiffness (Pa/m) and damping (Pa s/m) of the Maxwell element.
    k_w, b_w : float
        Withdrawal stiffness (Pa/m) and damping (Pa s/m).
    alpha : float
        Bulk-spring stress scale (Pa).
    beta : float
        Bulk-spring exponent, in (0, 1].
    sigma_y : float
        Yield stress triggering necking (Pa).
    zeta, omega0 : float
        Damping ratio and natural frequency (rad/s) of the necking filter.
    lambda_drag : float
        Inertial drag scaling factor.
    rho_m : float
        Mud density (kg/m^3).
    water_content : float or None
        Volume fraction label, informational only.
    rmse_N : float or None
        Reported fit error carried along with published presets.
    """

    k_i: float
    b_i: float
    k_w: float
    b_w: float
    alpha: float
    beta: float
    sigma_y: float
    zeta: float
    omega0: float
    lambda_drag: float = 0.013
    rho_m: float = 1840.0
    water_content: float | None = None
    rmse_N: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("k_i", "b_i", "k_w", "b_w", "alpha", "sigma_y", "zeta", "omega0", "rho_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta!r}")
        if not (math.isfinite(self.lambda_drag) and self.lambda_drag >= 0):
            raise ValueError(f"lambda_drag must be >= 0, got {self.lambda_drag!r}")

    @property
    def theta(self) -> tuple[float, ...]:
        """The nine identified constants in ``FIT_NAMES`` order."""
        return tuple(getattr(self, name) for name in FIT_NAMES)

    def with_theta(self, theta) -> MudParameters:
        return replace(self, **{name: float(v) for name, v in zip(FIT_NAMES, theta)})

    def coefficients(self, regime: Regime) -> tuple[float, float]:
        """Return the (stiffness, damping) pair for ``regime``."""
        if regime is Regime.WITHDRAWAL:
            return self.k_w, self.b_w
        return self.k_i, self.b_i


@dataclass(frozen=True)
class IntruderGeometry:
    """Cuboid intruder. ``H`` defaults to the width (38 mm for the stock part)."""

    length: float = 0.051
    width: float = 0.038
    height: float = 0.025
    H: float | None = None

    def __post_init__(self) -> None:
        if self.H is None:
            object.__setattr__(self, "H", self.width)
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{f.name} must be finite and > 0, got {value!r}")

    @property
    def area(self) -> float:
        """Bottom contact area S (m^2)."""
        return self.length * self.width


@dataclass(frozen=True)
class StressComponents:
    """Stress decomposition at one instant (Pa), plus the total force (N)."""

    f_e1: float
    f_e2: float
    f_s: float
    f_total: float
    F_total: float


def _to_si(value: Any, scale: int) -> float:
    return float(Decimal(str(value)) * scale)


def _from_si(value: float, scale: int) -> float:
    return float(Decimal(repr(float(value))) / scale)


def parameters_from_dict(data: Mapping[str, Any]) -> MudParameters:
    """Build parameters from a unit-suffixed key/value mapping."""
    known = {key for options in _KEYS.values() for key, _ in options} | {"rmse_N", "fit_report"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown parameter keys: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, options in _KEYS.items():
        present = [(key, scale) for key, scale in options if key in data]
        if len(present) > 1:
            raise ValueError(f"{name} given more than once ({', '.join(k for k, _ in present)})")
        if present:
            key, scale = present[0]
            if data[key] is not None:
                kwargs[name] = _to_si(data[key], scale)
    missing = [name for name in FIT_NAMES if name not in kwargs]
    if missing:
        raise ValueError(f"missing parameters: {', '.join(missing)}")
    if data.get("rmse_N") is not None:
        kwargs["rmse_N"] = float(data["rmse_N"])
    return MudParameters(**kwargs)


def parameters_to_dict(params: MudParameters) -> dict[str, Any]:
    """Inverse of :func:`parameters_from_dict`, using the MPa/kPa keys."""
    out: dict[str, Any] = {}
    values = asdict(params)
    for name, options in _KEYS.items():
        key, scale = options[0]
        if values[name] is None:
            continue
        out[key] = _from_si(values[name], scale)
    if params.rmse_N is not None:
        out["rmse_N"] = params.rmse_N
    return out


def load_parameters(path: str | Path) -> MudParameters:
    with open(path, encoding="utf-8") as fh:
        # decimals keep the written digits until the unit conversion
        return parameters_from_dict(json.load(fh, parse_float=Decimal))


_DECIMAL_MARK = "@decimal:"


def _exact_text(params: MudParameters) -> dict[str, Any]:
    out: dict[str, Any] = {}
    values = asdict(params)
    for name, options in _KEYS.items():
        key, scale = options[0]
        if values[name] is None:
            continue
        # dividing the shortest repr by a power of ten is exact in Decimal
        exact = Decimal(repr(float(values[name]))) / scale
        out[key] = _DECIMAL_MARK + format(exact.normalize(), "f")
    if params.rmse_N is not None:
        out["rmse_N"] = params.rmse_N
    return out


def dump_parameters(params: MudParameters, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
    """Write a parameter file in MPa/kPa units that loads back to the identical SI values."""
    doc = _exact_text(params)
    if extra:
        doc.update(extra)
    text = json.dumps(doc, indent=2)
    text = re.sub(r'"' + _DECIMAL_MARK + r'([^"]+)"', r"\1", text)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_preset(water_content: int | str) -> MudParameters:
    """Load one of the shipped presets, e.g. ``25``, ``"25"`` or ``"W25"``."""
    key = str(water_content).upper().lstrip("W").rstrip("%")
    if not key.isdigit() or int(key) not in PRESET_WATER_CONTENTS:
        raise ValueError(
            f"unknown preset {water_content!r}; available: "
            + ", ".join(f"W{w}" for w in PRESET_WATER_CONTENTS)
        )
    text = resources.files("mudforce.presets").joinpath(f"W{int(key)}.json").read_text("utf-8")
    return parameters_from_dict(json.loads(text, parse_float=Decimal))


def table_rows(presets: list[MudParameters] | None = None) -> list[dict[str, str]]:
    """Format parameter sets as rows of the published table (MPa/kPa, printed precision)."""
    if presets is None:
        presets = [load_preset(w) for w in PRESET_WATER_CONTENTS]
    rows = []
    for p in presets:
        row = {"W": "" if p.water_content is None else f"{round(p.water_content * 100):d}%"}
        for header, name, scale, decimals in _TABLE_COLUMNS:
            row[header] = f"{_from_si(getattr(p, name), scale):.{decimals}f}"
        row["RMSE [N]"] = "" if p.rmse_N is None else f"{p.rmse_N:.2f}"
        rows.append(row)
    return rows
