"""Parameter identification: drag factor, bulk-spring constants and the full model fit."""

from __future__ import annotations

import json
import math
from decimal import Decimal
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import _kernel as K
from .dynamics import filter_transition, simulate
from .params import _KEYS, FIT_NAMES, IntruderGeometry, MudParameters, _to_si, dump_parameters
from .trajectory import TrialRecord

__all__ = [
    "AlphaBetaFit",
    "CalibrationError",
    "DEFAULT_BOUNDS",
    "ErrorProfile",
    "FitConfig",
    "FitResult",
    "error_profile",
    "fit_alpha_beta",
    "fit_lambda",
    "fit_parameters",
    "load_bounds",
    "rmse",
    "save_fit_result",
]

# SI units; envelopes of the published table with margin.
DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "k_i": (1e4, 1e7),
    "b_i": (1e4, 1e7),
    "k_w": (1e4, 1e7),
    "b_w": (1e4, 1e7),
    "alpha": (1e3, 1e6),
    "beta": (0.01, 1.0),
    "sigma_y": (100.0, 1e5),
    "zeta": (0.05, 2.0),
    "omega0": (0.1, 20.0),
}

_IDX = {name: i for i, name in enumerate(FIT_NAMES)}
_INTRUSION_BLOCK = [_IDX[n] for n in ("k_i", "b_i", "alpha", "beta")]
_WITHDRAWAL_BLOCK = [_IDX[n] for n in ("k_w", "b_w")]
_FILTER_BLOCK = [_IDX[n] for n in ("zeta", "omega0")]


class CalibrationError(RuntimeError):
    """The optimizer could not improve on its starting point."""


def rmse(predicted, measured) -> float:
    """Root-mean-square difference of two equally long force series."""
    predicted = np.asarray(predicted, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if predicted.shape != measured.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {measured.shape}")
    if predicted.size == 0:
        raise ValueError("rmse of empty series")
    return float(np.sqrt(np.mean((predicted - measured) ** 2)))


def fit_lambda(velocities, stresses, rho_m: float) -> float:
    """Drag factor from sliding data by least squares through the origin.

    Regresses ``f`` on ``sign(v) rho_m v**2``.
    """
    v = np.asarray(velocities, dtype=float)
    f = np.asarray(stresses, dtype=float)
    if v.shape != f.shape or v.size == 0:
        raise ValueError("velocities and stresses must be non-empty and equally long")
    x = np.where(v >= 0, 1.0, -1.0) * rho_m * v * v
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ValueError("degenerate regressor: all sliding velocities are zero")
    return float(x @ f) / sxx


class AlphaBetaFit(NamedTuple):
    alpha: float
    beta: float
    clamped: bool


# smallest exponent reported when the regression slope is not positive
BETA_FLOOR = 1e-6


def fit_alpha_beta(depths, steady_stresses, H: float, beta: float | None = None) -> AlphaBetaFit:
    """Bulk-spring constants from steady sustain stresses at several depths.

    Fits ``ln f = ln alpha + beta ln(D / H)``. The slope is clamped into
    (0, 1] and the intercept refitted for the clamped slope; ``clamped``
    reports whether that happened. Passing ``beta`` fixes the exponent and
    estimates ``alpha`` alone (one point is then enough).
    """
    D = np.asarray(depths, dtype=float)
    f = np.asarray(steady_stresses, dtype=float)
    if D.shape != f.shape or D.size == 0:
        raise ValueError("depths and stresses must be non-empty and equally long")
    if (f <= 0).any():
        raise ValueError("steady stresses must all be > 0")
    if (D <= 0).any():
        raise ValueError("depths must all be > 0")
    x = np.log(D / H)
    y = np.log(f)
    clamped = False
    if beta is None:
        if np.unique(D).size < 2:
            raise ValueError("need at least two distinct depths to estimate beta")
        xc = x - x.mean()
        slope = float(xc @ (y - y.mean())) / float(xc @ xc)
        if slope <= 0.0:
            beta, clamped = BETA_FLOOR, True
        elif slope > 1.0:
            beta, clamped = 1.0, True
        else:
            beta = slope
    elif not (0 < beta <= 1):
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    alpha = math.exp(float(np.mean(y - beta * x)))
    return AlphaBetaFit(alpha, float(beta), clamped)


@dataclass
class FitConfig:
    """Settings for :func:`fit_parameters`. Bounds are SI, keyed by ``FIT_NAMES``."""

    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    initial: MudParameters | None = None
    n_starts: int = 8
    ftol: float = 1e-9
    max_evals: int = 60000
    seed: int = 0
    deadband: float = 0.0

    def __post_init__(self) -> None:
        merged = dict(DEFAULT_BOUNDS)
        merged.update(self.bounds)
        unknown = set(merged) - set(FIT_NAMES)
        if unknown:
            raise ValueError(f"bounds given for unknown parameters: {sorted(unknown)}")
        for name, (lo, hi) in merged.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite with lower < upper, got {(lo, hi)}")
            if lo <= 0:
                raise ValueError(f"lower bound for {name} must be > 0, got {lo}")
        if merged["beta"][1] > 1.0:
            raise ValueError("beta bounds must lie within (0, 1]")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        self.bounds = {name: (float(merged[name][0]), float(merged[name][1])) for name in FIT_NAMES}

    def log_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.log([self.bounds[n][0] for n in FIT_NAMES])
        hi = np.log([self.bounds[n][1] for n in FIT_NAMES])
        return lo, hi


@dataclass
class FitResult:
    params: MudParameters
    objective: float
    n_evals: int
    converged: bool
    at_bound: dict[str, str | None]
    history: list[float]
    seed: int
    bounds: dict[str, tuple[float, float]]

    @property
    def bounds_hit(self) -> list[str]:
        return [name for name, side in self.at_bound.items() if side]

    def report(self) -> dict:
        return {
            "objective_rmse_N": self.objective,
            "evaluations": self.n_evals,
            "converged": self.converged,
            "seed": self.seed,
            "bounds_hit": {name: side for name, side in self.at_bound.items() if side},
            "bounds_SI": {name: list(b) for name, b in self.bounds.items()},
        }


def save_fit_result(result: FitResult, path: str | Path) -> None:
    """Parameter file (MPa/kPa units) plus a ``fit_report`` block."""
    dump_parameters(result.params, path, extra={"fit_report": result.report()})


def load_bounds(path: str | Path) -> dict[str, tuple[float, float]]:
    """Read a bounds file keyed like a parameter file, e.g. ``{"sigma_y_kPa": [1, 50]}``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh, parse_float=Decimal)
    lookup = {key: (name, scale) for name in FIT_NAMES for key, scale in _KEYS[name]}
    out = {}
    for key, value in doc.items():
        if key not in lookup:
            raise ValueError(f"unknown bounds key {key!r}; use parameter-file keys such as 'k_i_MPa_per_m'")
        name, scale = lookup[key]
        if len(value) != 2:
            raise ValueError(f"bounds for {key!r} must be [lower, upper]")
        out[name] = (_to_si(value[0], scale), _to_si(value[1], scale))
    return out


class _BudgetExhausted(Exception):
    pass


class _Problem:
    """Aggregate-RMSE objective over a set of trials in log-parameter space."""

    def __init__(self, trials, geometry, lambda_drag, rho_m, deadband):
        self.geometry = geometry
        self.data = []
        for trial in trials:
            traj = trial.trajectory
            z = np.ascontiguousarray(traj.z_i, dtype=float)
            zdot = np.ascontiguousarray(traj.zdot_i, dtype=float)
            F = np.ascontiguousarray(trial.F_meas, dtype=float)
            withdrawing = np.flatnonzero(zdot < -deadband)
            cut = int(withdrawing[0]) if withdrawing.size else len(z)
            # strongest measured suction; necking can only latch after it
            peak = cut + int(np.argmin(F[cut:])) if cut < len(z) else len(z) - 1
            self.data.append((z, zdot, F, traj.dt, cut, peak))
        self.n_total = sum(len(d[0]) for d in self.data)
        self.base = np.zeros(K.N_PARAMS)
        self.base[K.P_LAM] = lambda_drag
        self.base[K.P_RHO] = rho_m
        self.base[K.P_H] = geometry.H
        self.base[K.P_S] = geometry.area
        self.base[K.P_DEADBAND] = deadband
        self.n_evals = 0
        self.max_evals = math.inf
        self.best = math.inf
        self.best_x = None
        self.history: list[float] = []

    def _pack(self, theta, dt):
        p = self.base.copy()
        p[:9] = theta
        a_i = theta[0] / theta[1]
        a_w = theta[2] / theta[3]
        p[K.P_DT] = dt
        p[K.P_DECAY_I], p[K.P_EXPM1_I] = math.exp(-a_i * dt), math.expm1(-a_i * dt)
        p[K.P_DECAY_W], p[K.P_EXPM1_W] = math.exp(-a_w * dt), math.expm1(-a_w * dt)
        return p

    def sse(self, theta, segment: str = "full") -> tuple[float, int]:
        total, count = 0.0, 0
        for z, zdot, F, dt, cut, peak in self.data:
            m = {"full": len(z), "intrusion": cut, "pre_neck": peak + 1}[segment]
            if m == 0:
                continue
            p = self._pack(theta, dt)
            phi = filter_transition(float(theta[7]), float(theta[8]), dt)
            s = np.zeros(K.N_STATE)
            s[K.S_ZI] = s[K.S_ZM] = z[0]
            s[K.S_CONTACT] = 1.0 if z[0] > 0 else 0.0
            total += K.run(p, phi, s, z[:m], zdot[:m], dt, False, K.EMPTY_RECORD, F[:m])
            count += m
        return total, count

    def __call__(self, x, segment: str = "full") -> float:
        if self.n_evals >= self.max_evals:
            raise _BudgetExhausted
        self.n_evals += 1
        theta = np.exp(x)
        total, count = self.sse(theta, segment)
        value = math.sqrt(total / count) if count else 0.0
        if segment == "full" and value < self.best:
            self.best = value
            self.best_x = np.array(x, dtype=float)
            self.history.append(value)
        return value


def _nelder_mead(f, x0, lo, hi, max_evals, ftol):
    res = minimize(
        f,
        np.clip(x0, lo, hi),
        method="Nelder-Mead",
        bounds=list(zip(lo, hi)),
        options={"maxfev": max(int(max_evals), 10), "adaptive": True, "xatol": 1e-10, "fatol": ftol},
    )
    return res.x, float(res.fun)


def _block_search(problem, x, block, segment, n_starts, rng, lo, hi, evals_per_start, ftol):
    """Latin-hypercube multi-start simplex search over a subset of log-parameters."""
    idx = np.asarray(block)

    def f(y):
        trial_x = x.copy()
        trial_x[idx] = y
        return problem(trial_x, segment)

    starts = qmc.LatinHypercube(d=len(idx), seed=rng).random(n_starts)
    candidates = [x[idx]] + [lo[idx] + (hi[idx] - lo[idx]) * u for u in starts]
    best_y, best_f = None, math.inf
    for y0 in candidates:
        y, fy = _nelder_mead(f, y0, lo[idx], hi[idx], evals_per_start, ftol)
        if fy < best_f:
            best_y, best_f = y, fy
    best_y, best_f = _nelder_mead(f, best_y, lo[idx], hi[idx], 2 * evals_per_start, ftol)
    out = x.copy()
    out[idx] = best_y
    return out


def _yield_seed(data, area: float) -> float | None:
    """Yield stress that latches every trial exactly at its strongest measured suction.

    Each trial bounds sigma_y between the stress one sample before its peak
    and the peak stress; the midpoint of the common interval is returned. With
    noisy data the interval can be empty, and the median of the per-trial
    midpoints is used instead.
    """
    below, above = [], []
    for z, zdot, F, dt, cut, peak in data:
        if peak > cut and peak < len(z) - 1:
            below.append(abs(F[peak - 1]) / area)
            above.append(abs(F[peak]) / area)
    if not below:
        return None
    lo_s, hi_s = max(below), min(above)
    if lo_s < hi_s:
        return 0.5 * (lo_s + hi_s)
    return float(np.median(0.5 * (np.array(below) + np.array(above))))


def _check_trials(trials: Sequence[TrialRecord]) -> None:
    if not trials:
        raise ValueError("no trials to fit")
    contents = {t.water_content for t in trials if t.water_content is not None}
    if len(contents) > 1:
        raise ValueError(f"trials disagree on water content: {sorted(contents)}")
    for i, t in enumerate(trials):
        if t.F_meas is None:
            raise ValueError(f"trial {t.trial_id or i} has no measured force")
        z = t.trajectory.z_i
        if np.ptp(z) == 0.0 or not (z > 0).any():
            raise ValueError(
                f"trial {t.trial_id or i} has no penetrating motion; the force is insensitive to the parameters"
            )


def _staged_search(problem, x0, config, geometry, rng, lo, hi) -> None:
    n_sub = max(2, config.n_starts // 2)
    x = x0.copy()
    x[_IDX["sigma_y"]] = hi[_IDX["sigma_y"]]
    x = _block_search(problem, x, _INTRUSION_BLOCK, "intrusion", config.n_starts, rng, lo, hi, 400, config.ftol)
    x = _block_search(problem, x, _WITHDRAWAL_BLOCK, "pre_neck", n_sub, rng, lo, hi, 200, config.ftol)

    seed_sy = _yield_seed(problem.data, geometry.area)
    if seed_sy is not None:
        x[_IDX["sigma_y"]] = np.clip(math.log(seed_sy), lo[6], hi[6])
    x = _block_search(problem, x, _FILTER_BLOCK, "full", n_sub, rng, lo, hi, 300, config.ftol)

    starts = [x] if config.initial is None else [x, x0]
    for start in starts:
        _nelder_mead(problem, start, lo, hi, 1500, config.ftol)
    # joint restarts from the incumbent until a restart stops paying off
    while True:
        before = problem.best
        _nelder_mead(problem, problem.best_x, lo, hi, 1500, config.ftol)
        if before - problem.best <= config.ftol:
            return


def fit_parameters(
    trials: Sequence[TrialRecord],
    geometry: IntruderGeometry,
    config: FitConfig | None = None,
    lambda_drag: float = 0.013,
    rho_m: float = 1840.0,
) -> FitResult:
    """Fit the nine model constants to measured total-force trials.

    Minimizes the RMSE between simulated and measured force over all samples
    of all trials (jointly), with ``lambda_drag`` and ``rho_m`` held fixed.
    The search runs in log-parameter space with bounded Nelder-Mead:

    1. intrusion constants (k_i, b_i, alpha, beta) on the samples before
       withdrawal, Latin-hypercube multi-start;
    2. withdrawal constants (k_w, b_w) on the withdrawal samples up to the
       strongest measured suction, with necking disabled;
    3. yield stress seeded from that suction peak, then filter constants
       (zeta, omega0) on the full trials, multi-start;
    4. joint simplex restarts over all nine until the improvement drops below
       ``config.ftol`` (N).

    ``config.max_evals`` caps the total number of objective evaluations; a
    fit stopped by the cap reports ``converged=False``.
    """
    config = config or FitConfig()
    _check_trials(trials)
    problem = _Problem(trials, geometry, lambda_drag, rho_m, config.deadband)
    lo, hi = config.log_box()
    rng = np.random.default_rng(config.seed)

    x0 = np.log(config.initial.theta) if config.initial is not None else 0.5 * (lo + hi)
    x0 = np.clip(x0, lo, hi)
    f_initial = problem(x0)

    problem.max_evals = config.max_evals
    converged = False
    try:
        _staged_search(problem, x0, config, geometry, rng, lo, hi)
    except _BudgetExhausted:
        pass
    else:
        converged = True

    # the best full-trial evaluation seen anywhere is the answer
    best_x = problem.best_x
    if not problem.best < f_initial:
        raise CalibrationError(
            f"no start improved on the initial guess (objective {f_initial:.6g} N after {problem.n_evals} evaluations)"
        )
    best_x = np.clip(best_x, lo, hi)
    theta = np.exp(best_x)
    at_bound = {}
    span = hi - lo
    for i, name in enumerate(FIT_NAMES):
        side = None
        if best_x[i] - lo[i] <= 1e-6 * span[i]:
            side = "lower"
        elif hi[i] - best_x[i] <= 1e-6 * span[i]:
            side = "upper"
        at_bound[name] = side
    water = next((t.water_content for t in trials if t.water_content is not None), None)
    params = MudParameters(
        *(float(v) for v in theta), lambda_drag=lambda_drag, rho_m=rho_m, water_content=water
    )
    total, count = problem.sse(theta)
    return FitResult(
        params=params,
        objective=math.sqrt(total / count),
        n_evals=problem.n_evals,
        converged=converged,
        at_bound=at_bound,
        history=list(problem.history),
        seed=config.seed,
        bounds=dict(config.bounds),
    )


@dataclass
class ErrorProfile:
    """Prediction error (F_pred - F_meas) on a normalized process axis."""

    u: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    trial_rmse: list[float]


def error_profile(
    trials: Iterable[TrialRecord],
    params: MudParameters,
    geometry: IntruderGeometry,
    n_points: int = 101,
    deadband: float = 0.0,
) -> ErrorProfile:
    """Mean and one-standard-deviation band of the error across trials.

    Each trial's error is linearly resampled onto ``u`` in [0, 1] (time
    normalized by the trial duration). The band uses the population standard
    deviation over trials.
    """
    u = np.linspace(0.0, 1.0, n_points)
    curves, scores = [], []
    for i, trial in enumerate(trials):
        if trial.F_meas is None:
            raise ValueError(f"trial {trial.trial_id or i} has no measured force")
        trace = simulate(params, geometry, trial.trajectory, deadband=deadband)
        err = trace.F_total - trial.F_meas
        t = trial.trajectory.t
        span = t[-1] - t[0]
        tn = (t - t[0]) / span if span > 0 else np.zeros_like(t)
        curves.append(np.interp(u, tn, err))
        scores.append(rmse(trace.F_total, trial.F_meas))
    if not curves:
        raise ValueError("no trials given")
    stack = np.vstack(curves)
    return ErrorProfile(u=u, mean=stack.mean(axis=0), std=stack.std(axis=0), trial_rmse=scores)
