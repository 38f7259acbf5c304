"""Stress components of the foot-mud resistive force law.

Stateless scalar functions. Sign convention: depth ``z_i`` is positive below
the undisturbed mud surface and ``zdot_i > 0`` means the intruder moves down.
"""

from __future__ import annotations

import math

from .params import IntruderGeometry, MudParameters, Regime, StressComponents

__all__ = [
    "bulk_spring_stress",
    "classify_regime",
    "direction_index",
    "inertial_drag_stress",
    "sign",
    "total_stress",
    "visco_elastic_stress",
]


def sign(x: float) -> float:
    """Sign with ``sign(0) = +1``."""
    return 1.0 if x >= 0 else -1.0


def direction_index(zdot_i: float, deadband: float = 0.0) -> int:
    """Return 0 while intruding or holding, 1 while withdrawing.

    ``deadband`` treats ``|zdot_i| <= deadband`` as zero velocity, which keeps
    noisy measured velocities from toggling the regime during a hold.
    """
    if not math.isfinite(zdot_i):
        raise ValueError(f"zdot_i must be finite, got {zdot_i!r}")
    if deadband > 0 and abs(zdot_i) <= deadband:
        return 0
    return int(round(0.5 * (1.0 - sign(zdot_i))))


def classify_regime(zdot_i: float, deadband: float = 0.0) -> Regime:
    return Regime.WITHDRAWAL if direction_index(zdot_i, deadband) else Regime.INTRUSION


def visco_elastic_stress(params: MudParameters, regime: Regime, zdot_m: float) -> float:
    """Maxwell-element stress ``b_j * zdot_m`` from the (filtered) mud velocity.

    Before necking this equals ``k_j (z_i - z_m)`` through the element's
    internal balance; after necking it follows the filtered velocity to zero.
    """
    _, b = params.coefficients(regime)
    return b * zdot_m


def bulk_spring_stress(params: MudParameters, geometry: IntruderGeometry, z_i: float) -> float:
    """Nonlinear bulk spring ``alpha (z_i / H)**beta``; zero without penetration."""
    if z_i <= 0:
        return 0.0
    return params.alpha * (z_i / geometry.H) ** params.beta


def inertial_drag_stress(params: MudParameters, zdot_i: float) -> float:
    """Quadratic drag ``sign(zdot_i) lambda rho_m zdot_i**2`` (odd in velocity)."""
    return sign(zdot_i) * params.lambda_drag * params.rho_m * zdot_i * zdot_i


def total_stress(
    params: MudParameters,
    geometry: IntruderGeometry,
    regime: Regime,
    z_i: float,
    zdot_i: float,
    zdot_m: float,
    in_contact: bool = True,
) -> StressComponents:
    """Assemble the unified force law for one instant.

    The bulk spring only acts in the intrusion regime. A separated intruder
    (``in_contact=False``) carries no load at all.
    """
    if not in_contact:
        return StressComponents(0.0, 0.0, 0.0, 0.0, 0.0)
    w = 1 if regime is Regime.WITHDRAWAL else 0
    f_e1 = visco_elastic_stress(params, regime, zdot_m)
    f_e2 = bulk_spring_stress(params, geometry, z_i)
    f_s = inertial_drag_stress(params, zdot_i)
    f_total = f_e1 + f_s + (1 - w) * f_e2
    return StressComponents(f_e1, (1 - w) * f_e2, f_s, f_total, f_total * geometry.area)
