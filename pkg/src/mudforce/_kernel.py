"""Compiled time-stepping loop shared by ``dynamics.step``, ``dynamics.simulate``
and the calibration objective.

Parameters and the carried state travel as flat float64 arrays (layouts fixed
by the index constants below); inside the loop the state lives in scalar
locals, which is several times faster under numba than indexing the array.
Without numba the same function runs as plain Python.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except Exception:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


# parameter vector
(
    P_KI, P_BI, P_KW, P_BW, P_ALPHA, P_BETA, P_SY, P_ZETA, P_W0,
    P_LAM, P_RHO, P_H, P_S, P_DEADBAND,
    P_DT, P_DECAY_I, P_EXPM1_I, P_DECAY_W, P_EXPM1_W,
) = range(19)
N_PARAMS = 19

# state vector
S_ZI, S_ZM, S_ZDOT_RAW, S_ZDOT_M, S_X1, S_X2, S_NECKED, S_VM0, S_ZM_NECK, S_CONTACT, S_TNECK = range(11)
N_STATE = 11

# columns of the recorded output block
(
    R_FE1, R_FE2, R_FS, R_FTOT, R_F, R_ZM, R_ZDOT_M, R_ZDOT_RAW, R_WITHDRAWAL, R_NECKED,
) = range(10)
N_RECORD = 10


@njit(cache=True)
def run(p, phi, s, z, zdot, dt, advance_first, record, measured):
    """Process samples ``z[k], zdot[k]`` starting from state ``s``.

    Per sample: classify the regime, advance the mud state over ``dt`` (the
    intruder velocity is constant over the step, so the exponential update is
    exact for piecewise-linear depth), evaluate the stresses, then latch
    necking if the withdrawal stress exceeds the yield stress. Sample 0 is
    advanced only when ``advance_first`` is set.

    ``record`` (shape ``(n, N_RECORD)``, or zero rows to skip) receives the
    per-sample outputs; when ``measured`` has ``n`` entries the sum of squared
    total-force residuals is returned, otherwise 0. ``s`` is updated in place.
    """
    n = z.shape[0]
    rec = record.shape[0] == n
    fit = measured.shape[0] == n

    zi = s[S_ZI]
    zm = s[S_ZM]
    raw = s[S_ZDOT_RAW]
    zdm = s[S_ZDOT_M]
    x1 = s[S_X1]
    x2 = s[S_X2]
    necked = s[S_NECKED] != 0.0
    vm0 = s[S_VM0]
    zm_neck = s[S_ZM_NECK]
    contact = s[S_CONTACT] != 0.0
    tneck = s[S_TNECK]

    a_i = p[P_KI] / p[P_BI]
    a_w = p[P_KW] / p[P_BW]
    if dt == p[P_DT]:
        decay_i, em1_i = p[P_DECAY_I], p[P_EXPM1_I]
        decay_w, em1_w = p[P_DECAY_W], p[P_EXPM1_W]
    else:
        decay_i, em1_i = math.exp(-a_i * dt), math.expm1(-a_i * dt)
        decay_w, em1_w = math.exp(-a_w * dt), math.expm1(-a_w * dt)
    drag = p[P_LAM] * p[P_RHO]

    sse = 0.0
    for k in range(n):
        zk = z[k]
        vk = zdot[k]
        withdrawal = vk < -p[P_DEADBAND]
        if withdrawal:
            a, b, decay, em1 = a_w, p[P_BW], decay_w, em1_w
        else:
            a, b, decay, em1 = a_i, p[P_BI], decay_i, em1_i

        if k > 0 or advance_first:
            z_prev = zi
            u = (zk - z_prev) / dt
            zi = zk
            if not contact:
                if zk > 0.0:
                    # first touch, or re-touch after full separation: fresh mud
                    t_touch = dt * (-z_prev) / (zk - z_prev) if z_prev < 0.0 else 0.0
                    contact = True
                    necked = False
                    vm0 = 0.0
                    x1 = 0.0
                    x2 = 0.0
                    tneck = 0.0
                    e = -(u / a) * math.expm1(-a * (dt - t_touch))
                    zm = zk - e
                    raw = a * e
                    zdm = raw
                else:
                    raw = 0.0
                    zdm = 0.0
            elif necked:
                y1 = phi[0, 0] * x1 + phi[0, 1] * x2
                y2 = phi[1, 0] * x1 + phi[1, 1] * x2
                x1 = y1
                x2 = y2
                tneck += dt
                zm = zm_neck + x1
                zdm = x2
                raw = a * (zk - zm)
            else:
                e = (z_prev - zm) * decay - (u / a) * em1
                zm = zk - e
                raw = a * e
                zdm = raw

        if contact and necked and zk <= 0.0:
            # neck broken and intruder out of the hole
            contact = False
            raw = 0.0
            zdm = 0.0

        f_e1 = 0.0
        f_e2 = 0.0
        f_s = 0.0
        f_tot = 0.0
        if contact:
            f_e1 = b * zdm
            if not withdrawal and zk > 0.0:
                f_e2 = p[P_ALPHA] * (zk / p[P_H]) ** p[P_BETA]
            f_s = drag * vk * vk if vk >= 0.0 else -drag * vk * vk
            f_tot = f_e1 + f_s + f_e2
            if withdrawal and not necked and abs(f_tot) > p[P_SY]:
                necked = True
                vm0 = raw
                zm_neck = zm
                x1 = 0.0
                x2 = raw
                tneck = 0.0
        F = f_tot * p[P_S]

        if rec:
            record[k, R_FE1] = f_e1
            record[k, R_FE2] = f_e2
            record[k, R_FS] = f_s
            record[k, R_FTOT] = f_tot
            record[k, R_F] = F
            record[k, R_ZM] = zm
            record[k, R_ZDOT_M] = zdm
            record[k, R_ZDOT_RAW] = raw
            record[k, R_WITHDRAWAL] = 1.0 if withdrawal else 0.0
            record[k, R_NECKED] = 1.0 if necked else 0.0
        if fit:
            r = F - measured[k]
            sse += r * r

    s[S_ZI] = zi
    s[S_ZM] = zm
    s[S_ZDOT_RAW] = raw
    s[S_ZDOT_M] = zdm
    s[S_X1] = x1
    s[S_X2] = x2
    s[S_NECKED] = 1.0 if necked else 0.0
    s[S_VM0] = vm0
    s[S_ZM_NECK] = zm_neck
    s[S_CONTACT] = 1.0 if contact else 0.0
    s[S_TNECK] = tneck
    return sse


EMPTY_RECORD = np.zeros((0, N_RECORD))
EMPTY = np.zeros(0)
