"""Adaptive Dormand-Prince 5(4) integration of the point-vortex system and the
escape experiment from a perturbed crystal.

The stepper is self-contained: embedded 5(4) pair, proportional-integral step
control, a quartic continuous extension used both for event location and for
resampling, and a terminal event found by bisection on the interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import AlphaModel, Configuration, _pair_geometry, green, invariants, pair_velocities
from .crystal import CrystalSpec, build_crystal
from .errors import (
    CollisionError,
    DomainError,
    NoInstabilityError,
    NonEscapeError,
    NumericalError,
    StepBudgetError,
)
from .export import csv_text, write_text
from .linearization import linearize

__all__ = [
    "IntegratorSettings",
    "DenseSolution",
    "Trajectory",
    "EscapeResult",
    "InvariantDrift",
    "solve",
    "integrate",
    "escape_run",
    "escape_experiment",
    "fit_rate",
    "sup_blocks",
    "trajectory_csv",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th- and 4th-order weights (7 stages, FSAL)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense output: y(t0 + th h) = y0 + h * (K^T P) @ (th, th^2, th^3, th^4)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_PI_BETA = 0.04
_PI_EXP = 0.2 - 0.75 * _PI_BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_EVENT_TOL = 1e-10


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_step: float = math.inf
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise DomainError("integrator tolerances must be positive")
        if not self.max_step > 0.0:
            raise DomainError("max_step must be positive")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise DomainError("max_steps must be a positive integer")

    def tighter(self, factor: float = 10.0) -> "IntegratorSettings":
        return IntegratorSettings(self.rel_tol / factor, self.abs_tol / factor, self.max_step,
                                  int(self.max_steps * 4))


class DenseSolution:
    """Accepted step points plus the per-step interpolant coefficients."""

    def __init__(self, t0: float, y0: np.ndarray):
        self._t = [float(t0)]
        self._y = [np.array(y0, dtype=float)]
        self._h: list[float] = []
        self._q: list[np.ndarray] = []
        self.n_rejected = 0
        self.n_evaluations = 0
        self.event_time: float | None = None

    def _append(self, t_new, y_new, h, q):
        self._t.append(float(t_new))
        self._y.append(y_new)
        self._h.append(float(h))
        self._q.append(q)

    def _truncate(self, t_event: float, y_event: np.ndarray):
        # last segment is kept; its interpolant remains valid on the shortened span
        self._t[-1] = float(t_event)
        self._y[-1] = y_event

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self._t)

    @property
    def ys(self) -> np.ndarray:
        return np.asarray(self._y)

    @property
    def n_steps(self) -> int:
        return len(self._h)

    @property
    def direction(self) -> float:
        return 1.0 if len(self._t) < 2 or self._t[-1] >= self._t[0] else -1.0

    def _eval_segment(self, k: int, t: float) -> np.ndarray:
        t0, h = self._t[k], self._h[k]
        th = (t - t0) / h
        return self._y[k] + h * (self._q[k] @ np.array([th, th * th, th ** 3, th ** 4]))

    def at(self, t: float) -> np.ndarray:
        """State at time ``t`` from the continuous extension."""
        t = float(t)
        ts = self._t
        lo, hi = (ts[0], ts[-1]) if ts[-1] >= ts[0] else (ts[-1], ts[0])
        span = max(abs(hi - lo), 1.0)
        if not (lo - 1e-12 * span <= t <= hi + 1e-12 * span):
            raise DomainError(f"t = {t!r} outside the integrated interval [{lo}, {hi}]")
        if not self._h:
            return self._y[0].copy()
        if t == ts[-1]:
            return self._y[-1].copy()
        arr = np.asarray(ts) * self.direction
        k = int(np.searchsorted(arr, t * self.direction, side="right")) - 1
        k = min(max(k, 0), len(self._h) - 1)
        return self._eval_segment(k, t)

    def sample(self, ts) -> np.ndarray:
        return np.array([self.at(t) for t in ts])


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, settings, direction):
    scale = settings.abs_tol + settings.rel_tol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, settings.max_step)


def solve(fun: Callable[[float, np.ndarray], np.ndarray], y0, t0: float, t1: float,
          settings: IntegratorSettings = IntegratorSettings(),
          event: Callable[[float, np.ndarray], float] | None = None,
          check: Callable[[float, np.ndarray], None] | None = None) -> DenseSolution:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``event(t, y)`` is terminal and fires when it changes sign from negative
    to nonnegative; the crossing is bisected on the interpolant to
    ``1e-10`` in time and the solution ends there (``event_time`` set).
    ``check(t, y)`` runs after every accepted step and may raise.
    """
    y = np.array(y0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise DomainError("initial state must be finite")
    if t1 == t0:
        raise DomainError("integration interval has zero length")
    direction = 1.0 if t1 > t0 else -1.0
    sol = DenseSolution(t0, y)

    def rhs(t, state):
        sol.n_evaluations += 1
        return np.asarray(fun(t, state), dtype=float).reshape(-1)

    f = rhs(t0, y)
    t = float(t0)
    g_old = event(t, y) if event is not None else None
    h_abs = _initial_step(rhs, t, y, f, settings, direction)
    K = np.empty((7, y.size))
    err_old = 1e-4
    rejected_last = False
    attempts = 0

    while direction * (t1 - t) > 0.0:
        if attempts >= settings.max_steps:
            raise StepBudgetError(f"step budget of {settings.max_steps} exhausted at t = {t!r}")
        attempts += 1
        h_abs = min(h_abs, settings.max_step)
        min_h = 10.0 * np.spacing(max(abs(t), 1.0))
        if h_abs < min_h:
            raise NumericalError(f"step size underflow at t = {t!r} (h = {h_abs:.3e})")
        h = direction * h_abs
        t_new = t + h
        if direction * (t_new - t1) > 0.0:
            t_new = t1
            h = t_new - t
            h_abs = abs(h)

        K[0] = f
        for s in range(1, 6):
            K[s] = rhs(t + _C[s] * h, y + h * (_A[s] @ K[:s]))
        y_new = y + h * (_B @ K[:6])
        f_new = rhs(t_new, y_new)
        K[6] = f_new

        scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(h * (_E @ K) / scale)
        if not math.isfinite(err) or not np.all(np.isfinite(y_new)):
            err = math.inf

        if err <= 1.0:
            fac11 = err ** _PI_EXP
            fac = fac11 / err_old ** _PI_BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFETY))
            h_next = h_abs / fac
            if rejected_last:
                h_next = min(h_next, h_abs)
            err_old = max(err, 1e-4)
            rejected_last = False

            q = K.T @ _P
            sol._append(t_new, y_new, h, q)
            t, y, f = t_new, y_new, f_new
            h_abs = h_next
            if check is not None:
                check(t, y)
            if event is not None:
                g_new = event(t, y)
                if g_old < 0.0 <= g_new:
                    t_ev, y_ev = _locate(sol, event)
                    sol._truncate(t_ev, y_ev)
                    sol.event_time = t_ev
                    return sol
                g_old = g_new
        else:
            sol.n_rejected += 1
            fac11 = err ** _PI_EXP if math.isfinite(err) else math.inf
            h_abs = h_abs / min(1.0 / _FAC_MIN, fac11 / _SAFETY)
            rejected_last = True
    return sol


def _locate(sol: DenseSolution, event) -> tuple[float, np.ndarray]:
    k = sol.n_steps - 1
    a, b = sol._t[k], sol._t[k + 1]
    while abs(b - a) > _EVENT_TOL:
        m = 0.5 * (a + b)
        if event(m, sol._eval_segment(k, m)) >= 0.0:
            b = m
        else:
            a = m
    return b, sol._eval_segment(k, b)


@dataclass(frozen=True)
class InvariantDrift:
    """Largest deviation from the initial value over the stored steps, relative
    to a magnitude scale (``sum |a_i a_j G_ij|``, ``sum |a_i||z_i|``,
    ``sum |a_i||z_i|^2``) so that vanishing invariants stay meaningful."""

    hamiltonian: float
    linear_momentum: float
    angular_impulse: float

    def max(self) -> float:
        return max(self.hamiltonian, self.linear_momentum, self.angular_impulse)


class Trajectory:
    """Point-vortex solution: step times, states and the dense interpolant."""

    def __init__(self, model: AlphaModel, intensities: np.ndarray, solution: DenseSolution):
        self.model = model
        self.intensities = np.asarray(intensities, dtype=float)
        self.solution = solution

    @property
    def times(self) -> np.ndarray:
        return self.solution.times

    @property
    def flat_states(self) -> np.ndarray:
        return self.solution.ys

    @property
    def states(self) -> list[Configuration]:
        return [Configuration.from_flat(y, self.intensities) for y in self.solution.ys]

    @property
    def initial(self) -> Configuration:
        return Configuration.from_flat(self.solution.ys[0], self.intensities)

    @property
    def final(self) -> Configuration:
        return Configuration.from_flat(self.solution.ys[-1], self.intensities)

    def at(self, t: float) -> Configuration:
        return Configuration.from_flat(self.solution.at(t), self.intensities)

    def invariant_drift(self) -> InvariantDrift:
        a = self.intensities
        ys = self.solution.ys
        ref = invariants(self.model, Configuration.from_flat(ys[0], a))
        pos0 = ys[0].reshape(-1, 2)
        _, r2 = _pair_geometry(pos0)
        iu = np.triu_indices(len(a), k=1)
        h_scale = float(np.sum(np.abs(a[iu[0]] * a[iu[1]] * green(self.model, np.sqrt(r2[iu]))))) if len(a) > 1 else 0.0
        rad = np.hypot(pos0[:, 0], pos0[:, 1])
        p_scale = float(np.sum(np.abs(a) * rad))
        i_scale = float(np.sum(np.abs(a) * rad ** 2))
        dh = dp = di = 0.0
        for y in ys[1:]:
            snap = invariants(self.model, Configuration.from_flat(y, a))
            dh = max(dh, abs(snap.hamiltonian - ref.hamiltonian))
            dp = max(dp, math.hypot(snap.linear_momentum[0] - ref.linear_momentum[0],
                                    snap.linear_momentum[1] - ref.linear_momentum[1]))
            di = max(di, abs(snap.angular_impulse - ref.angular_impulse))

        def rel(d, s):
            return d / s if s > 0.0 else d

        return InvariantDrift(rel(dh, h_scale), rel(dp, p_scale), rel(di, i_scale))


def _vortex_rhs(model: AlphaModel, intensities: np.ndarray):
    a = np.asarray(intensities, dtype=float)

    def rhs(_t, y):
        return pair_velocities(model.alpha, model.c_alpha, y.reshape(-1, 2), a).reshape(-1)

    return rhs


def _collision_check(floor: float):
    def check(t, y):
        pos = y.reshape(-1, 2)
        if pos.shape[0] < 2:
            return
        _, r2 = _pair_geometry(pos)
        np.fill_diagonal(r2, np.inf)
        k = int(np.argmin(r2))
        d = math.sqrt(r2.flat[k])
        if d < floor:
            i, j = divmod(k, pos.shape[0])
            pair = (min(i, j), max(i, j))
            raise CollisionError(f"vortices {pair[0]} and {pair[1]} closer than {floor:.3e} at t = {t!r}",
                                 time=t, pair=pair)

    return check


def integrate(model: AlphaModel, Z0: Configuration, t_end: float,
              settings: IntegratorSettings = IntegratorSettings(), *,
              t_start: float = 0.0, collision_floor: float | None = None,
              event: Callable[[float, np.ndarray], float] | None = None) -> Trajectory:
    """Point-vortex trajectory from ``Z0`` at ``t_start`` to ``t_end``.

    ``t_end < t_start`` integrates backwards.  The collision floor defaults to
    ``1e-3`` times the smallest initial separation.
    """
    from .core import min_separation  # local: avoids widening the public import list

    if not math.isfinite(t_end) or t_end == t_start:
        raise DomainError("t_end must be finite and differ from t_start")
    sep = min_separation(Z0)
    if sep == 0.0:
        raise DomainError("initial configuration has coincident vortices")
    floor = 1e-3 * sep if collision_floor is None else float(collision_floor)
    check = _collision_check(floor) if Z0.n > 1 and math.isfinite(floor) else None
    sol = solve(_vortex_rhs(model, Z0.intensities), Z0.flat, t_start, t_end, settings, event=event, check=check)
    return Trajectory(model, Z0.intensities, sol)


def sup_blocks(x: np.ndarray) -> float:
    """``max_i |x_i|`` over consecutive coordinate pairs (the vortex sup-norm)."""
    v = np.asarray(x, dtype=float).reshape(-1, 2)
    return float(np.max(np.hypot(v[:, 0], v[:, 1])))


def fit_rate(times: np.ndarray, distances: np.ndarray, window: tuple[float, float]) -> tuple[float, int]:
    """Least-squares slope of ``ln d`` against ``t`` over samples with ``d`` in ``window``."""
    lo, hi = window
    mask = (distances >= lo) & (distances <= hi)
    n = int(mask.sum())
    if n < 3:
        raise NumericalError(f"only {n} samples inside the fitting window [{lo:.3e}, {hi:.3e}]")
    slope, _ = np.polyfit(times[mask], np.log(distances[mask]), 1)
    return float(slope), n


@dataclass(frozen=True, eq=False)
class EscapeResult:
    epsilon: float
    beta: float
    tau_z: float
    fitted_rate: float
    prediction: float
    trajectory: object
    lambda0: float
    window: tuple[float, float]
    fit_points: int
    exit_radius: float
    start_distance: float
    direction: np.ndarray = field(repr=False)

    @property
    def tau_ratio(self) -> float:
        """``tau_z / |ln eps|``."""
        return self.tau_z / abs(math.log(self.epsilon))


def _check_eps_beta(epsilon: float, beta: float):
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")


def escape_run(fun, y_star: np.ndarray, direction: np.ndarray, epsilon: float, beta: float,
               lambda0: float, settings: IntegratorSettings, *, horizon: float | None = None,
               window: tuple[float, float] | None = None, check=None, n_samples: int = 4000,
               wrap: Callable[[DenseSolution], object] = lambda s: s) -> EscapeResult:
    """Generic escape experiment around the equilibrium ``y_star``.

    Starts at ``y_star + (eps/2) v/|v|_inf`` and stops when the vortex
    sup-distance to ``y_star`` first reaches ``2 eps^beta``.  The rate is
    fitted on ``n_samples`` uniform resamples of the interpolant.  The
    default window is ``[eps, eps^beta]``; the horizon defaults to four
    times the linear-escape estimate ``((1-beta)|ln eps| + ln 4)/lambda0``.
    """
    _check_eps_beta(epsilon, beta)
    if not lambda0 > 0.0:
        raise NoInstabilityError("escape needs a positive instability rate")
    y_star = np.asarray(y_star, dtype=float).reshape(-1)
    v = np.asarray(direction, dtype=float).reshape(-1)
    if v.shape != y_star.shape or not sup_blocks(v) > 0.0:
        raise DomainError("perturbation direction must be a nonzero vector of the state shape")
    v = v / sup_blocks(v)
    y0 = y_star + 0.5 * epsilon * v
    exit_radius = 2.0 * epsilon ** beta
    log_eps = abs(math.log(epsilon))
    if horizon is None:
        horizon = 4.0 * ((1.0 - beta) * log_eps + math.log(4.0)) / lambda0
    if window is None:
        window = (epsilon, epsilon ** beta)
    if not window[0] < window[1]:
        raise DomainError(f"empty fitting window [{window[0]!r}, {window[1]!r}]")

    def event(_t, y):
        return sup_blocks(y - y_star) - exit_radius

    sol = solve(fun, y0, 0.0, horizon, settings, event=event, check=check)
    if sol.event_time is None:
        d = np.array([sup_blocks(y - y_star) for y in sol.ys])
        raise NonEscapeError(
            f"no exit through radius {exit_radius:.3e} by t = {horizon:.4g}; "
            f"max distance {d.max():.3e}, final {d[-1]:.3e}")
    tau = sol.event_time
    ts = np.linspace(0.0, tau, n_samples)
    dist = np.array([sup_blocks(sol.at(t) - y_star) for t in ts])
    rate, n_fit = fit_rate(ts, dist, window)
    return EscapeResult(
        epsilon=epsilon,
        beta=beta,
        tau_z=tau,
        fitted_rate=rate,
        prediction=(1.0 - beta) / lambda0 * log_eps,
        trajectory=wrap(sol),
        lambda0=lambda0,
        window=(float(window[0]), float(window[1])),
        fit_points=n_fit,
        exit_radius=exit_radius,
        start_distance=0.5 * epsilon,
        direction=v,
    )


def escape_experiment(model: AlphaModel, spec: CrystalSpec, epsilon: float, beta: float,
                      settings: IntegratorSettings = IntegratorSettings(), *,
                      direction: np.ndarray | None = None, horizon: float | None = None,
                      window: tuple[float, float] | None = None) -> EscapeResult:
    """Perturb the crystal along its unstable eigenvector and time the escape.

    ``direction`` overrides the eigenvector (e.g. a neutral translation mode,
    which must then fail with :class:`NonEscapeError`).
    """
    if spec.model != model:
        spec = CrystalSpec(spec.n_total, model)
    _check_eps_beta(epsilon, beta)
    Z_star = build_crystal(spec)
    sep = float(np.min([np.abs(Z_star.z[i] - Z_star.z[j])
                        for i in range(Z_star.n) for j in range(i + 1, Z_star.n)]))
    if not 2.0 * epsilon ** beta < 0.5 * sep:
        raise DomainError(f"exit radius 2 eps^beta = {2 * epsilon ** beta:.3e} is not below half "
                          f"the minimal separation {sep:.3e}")
    rep = linearize(model, Z_star)
    if not rep.unstable:
        raise NoInstabilityError("crystal is linearly stable; nothing to escape from")
    if direction is None:
        if rep.unstable_eigenvector is None:
            raise NoInstabilityError("dominant eigenvalue is complex; no real escape direction")
        direction = rep.unstable_eigenvector
    return escape_run(
        _vortex_rhs(model, Z_star.intensities), Z_star.flat, direction, epsilon, beta, rep.lambda0,
        settings, horizon=horizon, window=window, check=_collision_check(1e-3 * sep),
        wrap=lambda s: Trajectory(model, Z_star.intensities, s),
    )


def trajectory_csv(times, states, path=None) -> str:
    """CSV with a time column then ``x_i, y_i`` per vortex, 17 significant digits."""
    states = np.asarray(states, dtype=float)
    n = states.shape[1] // 2
    header = ["t"] + [f"{c}{i + 1}" for i in range(n) for c in ("x", "y")]
    text = csv_text(header, ([t, *row] for t, row in zip(times, states)))
    if path is not None:
        write_text(path, text)
    return text
