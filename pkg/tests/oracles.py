"""Reference computations written independently of the production integrator."""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(f):
        return f


@njit
def _explicit_run(z, zdot, dt, substeps, theta, lam, rho, H, S):
    k_i, b_i, k_w, b_w, alpha, beta, sigma_y, zeta, omega0 = theta
    h = dt / substeps
    n = z.shape[0]
    F = np.zeros(n)
    zm = z[0]
    contact = z[0] > 0.0
    necked = False
    x = 0.0
    xd = 0.0
    zm_neck = 0.0
    vm = 0.0
    for k in range(n):
        v = zdot[k]
        withdrawing = v < 0.0
        kk, bb = (k_w, b_w) if withdrawing else (k_i, b_i)
        if k > 0:
            z0 = z[k - 1]
            slope = (z[k] - z0) / dt
            for j in range(substeps):
                zi = z0 + slope * (j * h)
                if not contact:
                    zi_next = z0 + slope * ((j + 1) * h)
                    if zi_next > 0.0:
                        contact = True
                        necked = False
                        zm = 0.0
                    continue
                if necked:
                    # semi-implicit Euler on x'' + 2 zeta w0 x' + w0^2 x = 0
                    xd += h * (-2.0 * zeta * omega0 * xd - omega0 * omega0 * x)
                    x += h * xd
                else:
                    zm += h * (kk / bb) * (zi - zm)
            if necked:
                zm = zm_neck + x
                vm = xd
            else:
                vm = (kk / bb) * (z[k] - zm)
        if contact and necked and z[k] <= 0.0:
            contact = False
        if not contact:
            F[k] = 0.0
            continue
        f = bb * vm + (lam * rho * v * v if v >= 0.0 else -lam * rho * v * v)
        if not withdrawing and z[k] > 0.0:
            f += alpha * (z[k] / H) ** beta
        if withdrawing and not necked and abs(f) > sigma_y:
            necked = True
            zm_neck = zm
            x = 0.0
            xd = vm
        F[k] = f * S
    return F


def explicit_force(params, geometry, trajectory, fine_dt=1e-5):
    """Total force from forward-Euler stepping of the mud ODE at ``fine_dt``.

    Shares the model semantics (regime per sample, yield test at the sample
    instants) but integrates the relaxation and filter equations by brute
    force instead of with exponential or matrix-exponential updates.
    """
    substeps = int(round(trajectory.dt / fine_dt))
    return _explicit_run(
        np.asarray(trajectory.z_i, dtype=float),
        np.asarray(trajectory.zdot_i, dtype=float),
        trajectory.dt,
        substeps,
        np.array(params.theta, dtype=float),
        params.lambda_drag,
        params.rho_m,
        geometry.H,
        geometry.area,
    )


def underdamped_velocity(t, zeta, omega0, v0):
    """Free response of the filter velocity, written out for zeta < 1."""
    wd = omega0 * math.sqrt(1.0 - zeta**2)
    return v0 * np.exp(-zeta * omega0 * t) * (np.cos(wd * t) - zeta * omega0 / wd * np.sin(wd * t))


def lag_stress(t, b, k, v):
    """Maxwell element stress under constant-velocity intrusion from rest at t = 0."""
    return b * v * (1.0 - np.exp(-k * t / b))
