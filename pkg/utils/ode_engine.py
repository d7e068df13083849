"""Adaptive Dormand-Prince 5(4) integrator with events and Hermite dense output.

Every solver module drives its trajectories through ``integrate``. The engine
only steps forward in the independent variable; callers that need a
different parametrisation (the sonic layer, the inner variable) change
variables in their right-hand side.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from utils.errors import (
    BracketError,
    DomainError,
    IntegrationError,
    NonFiniteRhsError,
    StepUnderflowError,
)

logger = logging.getLogger(__name__)

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince tableau (Hairer, Norsett, Wanner).
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents for a fifth order error estimate.
ALPHA = 0.7 / 5.0
BETA = 0.4 / 5.0

EVENT_RTOL = 1e-12


@dataclass(frozen=True)
class StepControls:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 1e-14
    max_steps: int = 200_000
    first_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError(f"tolerances must be positive: rel_tol={self.rel_tol}, abs_tol={self.abs_tol}")
        if not self.min_step < self.max_step:
            raise DomainError(f"min_step {self.min_step} must be below max_step {self.max_step}")
        if self.max_steps < 1:
            raise DomainError("max_steps must be at least 1")


@dataclass(frozen=True)
class Event:
    """Scalar function whose zero crossing marks or stops the integration.

    direction +1 fires on a rise through zero, -1 on a fall, 0 on either.
    """

    fn: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: int = 0
    name: str = ""

    def crossed(self, before: float, after: float) -> bool:
        if self.direction >= 0 and before < 0.0 <= after:
            return True
        if self.direction <= 0 and before > 0.0 >= after:
            return True
        return False


@dataclass
class IvpProblem:
    rhs: Rhs
    t0: float
    y0: Sequence[float]
    t_max: float
    events: Sequence[Event] = ()
    controls: StepControls = field(default_factory=StepControls)
    # When set, step underflow and step budget end the arc instead of raising.
    partial_ok: bool = False

    def __post_init__(self):
        if not self.t_max > self.t0:
            raise DomainError(f"t_max {self.t_max} must exceed t0 {self.t0}")
        self.y0 = np.asarray(self.y0, dtype=float)


@dataclass(frozen=True)
class Termination:
    reason: str  # reached_t_max | event | step_underflow | step_budget
    event_index: Optional[int] = None
    t: Optional[float] = None
    event_name: str = ""


@dataclass
class SampledArc:
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    termination: Termination
    marks: List[Tuple[int, float]] = field(default_factory=list)
    steps_accepted: int = 0
    steps_rejected: int = 0
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)

    def dense(self, t):
        """Piecewise cubic Hermite interpolant of the accepted steps."""
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.t, self.y, self.f, axis=0)
        return self._spline(t)

    def final(self) -> Tuple[float, np.ndarray]:
        return float(self.t[-1]), self.y[-1].copy()

    def __len__(self) -> int:
        return len(self.t)


def _eval_rhs(rhs: Rhs, t: float, y: np.ndarray) -> np.ndarray:
    return np.asarray(rhs(t, y), dtype=float)


def _dp_step(rhs: Rhs, t: float, y: np.ndarray, f0: np.ndarray, h: float):
    """One Dormand-Prince step; returns (y_new, f_new, error_vector)."""
    k = [f0]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(A[i], k))
        k.append(_eval_rhs(rhs, t + C[i] * h, yi))
    y_new = y + h * sum(b * kj for b, kj in zip(B5, k) if b != 0.0)
    err = h * sum(e * kj for e, kj in zip(E, k) if e != 0.0)
    return y_new, k[6], err


def _initial_step(rhs: Rhs, t0: float, y0: np.ndarray, f0: np.ndarray, ctl: StepControls, span: float) -> float:
    if ctl.first_step is not None:
        return min(ctl.first_step, span)
    scale = ctl.abs_tol + ctl.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span, ctl.max_step)
    y1 = y0 + h0 * f0
    f1 = _eval_rhs(rhs, t0 + h0, y1)
    if not np.all(np.isfinite(f1)):
        return max(h0 * 1e-3, ctl.min_step * 10)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return max(min(100 * h0, h1, span, ctl.max_step), ctl.min_step * 10)


def _locate_event(
    rhs: Rhs, ev: Event, t: float, y: np.ndarray, f: np.ndarray, h: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Find the crossing inside [t, t + h] with re-stepped states."""

    def g(tau: float) -> float:
        if tau == 0.0:
            return float(ev.fn(t, y))
        y_tau, _, _ = _dp_step(rhs, t, y, f, tau)
        return float(ev.fn(t + tau, y_tau))

    tol = EVENT_RTOL * max(1.0, abs(t + h))
    tau = brentq(g, 0.0, h, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    # Prefer the side of the root where the event has fired.
    if not ev.crossed(g(0.0), g(tau)):
        tau = min(h, tau + tol)
    y_ev, f_ev, _ = _dp_step(rhs, t, y, f, tau)
    return t + tau, y_ev, f_ev


def integrate(p: IvpProblem) -> SampledArc:
    ctl = p.controls
    rhs = p.rhs
    t = float(p.t0)
    y = p.y0.copy()
    f = _eval_rhs(rhs, t, y)
    if not np.all(np.isfinite(f)):
        raise NonFiniteRhsError(f"right-hand side not finite at t={t}, y={y}: {f}")

    ts, ys, fs = [t], [y.copy()], [f.copy()]
    marks: List[Tuple[int, float]] = []
    ev_prev = [float(ev.fn(t, y)) for ev in p.events]

    h = _initial_step(rhs, t, y, f, ctl, p.t_max - t)
    err_prev = 1e-4
    accepted = rejected = 0
    termination: Optional[Termination] = None
    last_reject_nonfinite = False

    while termination is None:
        if accepted + rejected >= ctl.max_steps:
            termination = Termination("step_budget", t=t)
            break
        h = min(h, ctl.max_step, p.t_max - t)
        if h < ctl.min_step and p.t_max - t > ctl.min_step:
            termination = Termination("step_underflow", t=t)
            break

        with np.errstate(all="ignore"):
            y_new, f_new, err = _dp_step(rhs, t, y, f, h)
        finite = np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new)) and np.all(np.isfinite(err))
        if not finite:
            rejected += 1
            last_reject_nonfinite = True
            h *= MIN_FACTOR
            continue

        scale = ctl.abs_tol + ctl.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm > 1.0:
            rejected += 1
            last_reject_nonfinite = False
            h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / 5.0))
            continue

        last_reject_nonfinite = False
        ev_new = [float(ev.fn(t + h, y_new)) for ev in p.events]
        hit = None
        step_marks: List[Tuple[int, float]] = []
        for i, ev in enumerate(p.events):
            if ev.crossed(ev_prev[i], ev_new[i]):
                t_ev, y_ev, f_ev = _locate_event(rhs, ev, t, y, f, h)
                if ev.terminal:
                    if hit is None or t_ev < hit[1]:
                        hit = (i, t_ev, y_ev, f_ev)
                else:
                    step_marks.append((i, t_ev))

        if hit is not None:
            i, t_ev, y_ev, f_ev = hit
            # the arc ends at the terminal crossing
            marks.extend(m for m in sorted(step_marks, key=lambda m: m[1]) if m[1] <= t_ev)
            if t_ev > ts[-1]:
                ts.append(t_ev)
                ys.append(y_ev)
                fs.append(f_ev)
            accepted += 1
            termination = Termination("event", event_index=i, t=t_ev, event_name=p.events[i].name)
            break

        marks.extend(sorted(step_marks, key=lambda m: m[1]))
        t, y, f = t + h, y_new, f_new
        ev_prev = ev_new
        ts.append(t)
        ys.append(y.copy())
        fs.append(f.copy())
        accepted += 1

        if p.t_max - t <= EVENT_RTOL * max(1.0, abs(p.t_max)):
            termination = Termination("reached_t_max", t=t)
            break

        err_norm = max(err_norm, 1e-10)
        factor = SAFETY * err_norm ** (-ALPHA) * err_prev ** BETA
        h *= min(MAX_FACTOR, max(MIN_FACTOR, factor))
        err_prev = err_norm

    arc = SampledArc(
        t=np.asarray(ts),
        y=np.asarray(ys),
        f=np.asarray(fs),
        termination=termination,
        marks=marks,
        steps_accepted=accepted,
        steps_rejected=rejected,
    )
    logger.debug(
        "integrate: %s at t=%.6g after %d accepted, %d rejected steps",
        termination.reason,
        arc.t[-1],
        accepted,
        rejected,
    )

    if termination.reason in ("step_underflow", "step_budget") and not p.partial_ok:
        if last_reject_nonfinite:
            err_cls = NonFiniteRhsError
            msg = f"right-hand side not finite near t={t:.17g}"
        elif termination.reason == "step_underflow":
            err_cls = StepUnderflowError
            msg = f"step size fell below {ctl.min_step:g} at t={t:.17g}"
        else:
            err_cls = IntegrationError
            msg = f"step budget of {ctl.max_steps} exhausted at t={t:.17g}"
        exc = err_cls(msg)
        exc.arc = arc
        raise exc
    return arc


def refine_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    x_tol: float = 1e-14,
    f_tol: float = 0.0,
) -> float:
    """Bracketed root of a continuous scalar function (Brent's method)."""
    flo, fhi = float(f(lo)), float(f(hi))
    if not (math.isfinite(flo) and math.isfinite(fhi)) or flo * fhi > 0.0:
        raise BracketError(f"invalid bracket [{lo:.17g}, {hi:.17g}]: f = ({flo:.6g}, {fhi:.6g})")
    if abs(flo) <= f_tol or flo == 0.0:
        return float(lo)
    if abs(fhi) <= f_tol or fhi == 0.0:
        return float(hi)
    return float(brentq(f, lo, hi, xtol=x_tol, rtol=4 * np.finfo(float).eps, maxiter=500))
