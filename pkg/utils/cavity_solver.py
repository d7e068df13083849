"""Self-similar cavitating trajectories and their shock connection.

The trajectory is integrated in the stretch variables (a, b) = (phi', phi/s)
from a series start close to the cavity. Once the sonic quantity
Q = s^2 - Phi_11 gets close to zero the integration continues in an arc
parameter tau with ds/dtau = -Q, carrying ln(b - a) and ln(-Q) as state so
that the terminal layer keeps full relative precision while both shrink.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from utils.errors import (
    HypothesisViolation,
    IntegrationError,
    MultipleRootsError,
    NoConnectionError,
    OutOfRangeError,
    StepUnderflowError,
)
from utils.ode_engine import Event, IvpProblem, SampledArc, StepControls, integrate, refine_root
from utils.stored_energy import (
    StoredEnergy,
    check_hypotheses,
    eval_P,
    eval_phi11,
    eval_phi111,
    eval_phi112,
    eval_R,
    eval_shock_quotients,
    h_prime_inverse,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverTolerances:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    s0_factor: float = 1e-3
    eps_q: float = 1e-8
    eps_ab: float = 1e-10
    sonic_switch: float = 1e-2
    gap_switch: float = 1e-2
    gap_floor: float = 1e-300
    f_tol: float = 1e-10
    bracket_tol: float = 1e-5
    xi_max: float = 1e4
    max_steps: int = 200_000
    min_step: float = 1e-14
    s_max: float = 1e6
    monotone_tol: float = 1e-9

    def controls(self) -> StepControls:
        return StepControls(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            min_step=self.min_step,
            max_steps=self.max_steps,
        )


# ----------------------------------------------------------------------------
# Boundary conditions at the cavity surface


@dataclass(frozen=True)
class StressFree:
    kind: str = "stress_free"

    def content(self, phi0: float) -> float:
        return 0.0

    def v0(self, E: StoredEnergy, phi0: float) -> float:
        return E.H


@dataclass(frozen=True)
class ConstantContent:
    c0: float
    floor: float = 1e-12

    def __call__(self, phi0: float) -> float:
        return max(self.c0, self.floor)


@dataclass(frozen=True)
class AffineContent:
    """G(phi0) = c0 + c1 phi0, clipped to stay positive."""

    c0: float
    c1: float
    floor: float = 1e-12

    def __call__(self, phi0: float) -> float:
        return max(self.c0 + self.c1 * phi0, self.floor)


@dataclass(frozen=True)
class WithContent:
    G: Callable[[float], float]
    kind: str = "with_content"

    def content(self, phi0: float) -> float:
        return float(self.G(phi0))

    def v0(self, E: StoredEnergy, phi0: float) -> float:
        return h_prime_inverse(E, self.content(phi0))


Boundary = Union[StressFree, WithContent]


@functools.lru_cache(maxsize=64)
def _solvable(E: StoredEnergy) -> Tuple[bool, str]:
    report = check_hypotheses(E)
    failed = [name for name in ("H0", "H1", "H2", "H3", "H4") if not report.verdicts[name].ok]
    if not failed:
        return True, ""
    name = failed[0]
    return False, f"{name} fails for {E.describe()}: {report.verdicts[name].witness}"


def require_solvable(E: StoredEnergy) -> None:
    ok, why = _solvable(E)
    if not ok:
        raise HypothesisViolation(why)


@dataclass(frozen=True)
class CavityConfig:
    E: StoredEnergy
    phi0: float
    boundary: Boundary = field(default_factory=StressFree)
    tol: SolverTolerances = field(default_factory=SolverTolerances)
    v0: Optional[float] = None
    s0: float = field(init=False)

    def __post_init__(self):
        if not self.phi0 > 0.0:
            raise OutOfRangeError(f"cavity speed phi0 must be positive, got {self.phi0}")
        if self.v0 is None:
            object.__setattr__(self, "v0", float(self.boundary.v0(self.E, self.phi0)))
        if not self.v0 > 0.0:
            raise OutOfRangeError(f"v0 must be positive, got {self.v0}")
        s0 = self.tol.s0_factor * min(1.0, self.phi0, self.E.nu)
        object.__setattr__(self, "s0", s0)


# ----------------------------------------------------------------------------
# Series start


@dataclass(frozen=True)
class SeriesStart:
    s0: float
    a0: float
    b0: float
    c0: float
    v0: float
    phi0: float


def series_coefficient(E: StoredEnergy, v0: float, phi0: float) -> float:
    """c0 = (d - 1) gamma0 / (phi0 h''(v0)), the slope of v at the cavity."""
    h2 = float(E.h.d2(v0))
    if not h2 > 0.0:
        raise HypothesisViolation(f"h''(v0) must be positive, got {h2} at v0={v0}")
    return (E.d - 1) * E.gamma0 / (phi0 * h2)


def series_values(E: StoredEnergy, phi0: float, v0: float, s0: float) -> SeriesStart:
    d = E.d
    c0 = series_coefficient(E, v0, phi0)
    phi_d = phi0**d + v0 * s0**d + (d / (d + 1.0)) * c0 * s0 ** (d + 1)
    b0 = phi_d ** (1.0 / d) / s0
    a0 = (v0 * s0 ** (d - 1) + c0 * s0**d) * (s0 * b0) ** (1 - d)
    return SeriesStart(s0=s0, a0=a0, b0=b0, c0=c0, v0=v0, phi0=phi0)


def series_start(cfg: CavityConfig) -> SeriesStart:
    return series_values(cfg.E, cfg.phi0, cfg.v0, cfg.s0)


# ----------------------------------------------------------------------------
# Right-hand sides


def radial_rhs(E: StoredEnergy, dynamic: bool = True):
    """(s, a, b)' in the self-similar variable; dynamic=False drops s^2 from Q."""
    d = E.d

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        _, a, b = y
        if a <= 0.0 or b <= 0.0:
            return np.array([1.0, math.nan, math.nan])
        q = -eval_phi11(E, a, b)
        if dynamic:
            q += t * t
        P = eval_P(E, a, b)
        return np.array([1.0, (d - 1) * (a - b) * P / (t * q), (a - b) / t])

    return rhs


def layer_state(y: np.ndarray) -> Tuple[float, float, float, float, float]:
    """(s, a, b, b - a, Q) from a layer state (s, b, ln(b - a), ln(-Q))."""
    s, b, log_gap, log_q = (float(x) for x in y)
    gap = math.exp(log_gap)
    return s, b - gap, b, gap, -math.exp(log_q)


def layer_rhs(E: StoredEnergy):
    """(s, b, ln(b - a), ln(-Q)) against the arc parameter tau with ds/dtau = -Q.

    Carrying the gap and the sonic quantity as logarithms keeps both
    resolved to full relative precision while they shrink together.
    """
    d = E.d

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        s, a, b, gap, Q = layer_state(y)
        if a <= 0.0 or b <= 0.0 or not s > 0.0:
            return np.full(4, math.nan)
        minus_q = -Q
        P = float(eval_P(E, a, b))
        ratio = math.exp(float(y[2]) - float(y[3]))  # (b - a) / (-Q)
        curvature = float(eval_phi111(E, a, b)) * P * ratio - float(eval_phi112(E, a, b)) * gap
        return np.array([
            minus_q,
            -minus_q * gap / s,
            -((d - 1) * P + minus_q) / s,
            -2.0 * s + (d - 1) * curvature / s,
        ])

    return rhs


def connection_sign(E: StoredEnergy, y: np.ndarray) -> float:
    """ln(-Q) - ln(b - a) - ln K, which has the sign of p = -Q - (b - a) K."""
    _, a, b, _, _ = layer_state(y)
    K, _ = eval_shock_quotients(E, a, b)
    K = float(K)
    if not K > 0.0:
        raise HypothesisViolation(f"shock quotient K={K:.6g} is not positive at a={a:.12g}, b={b:.12g}")
    return float(y[3]) - float(y[2]) - math.log(K)


def phi_v_rhs(E: StoredEnergy, s: float, phi: float, v: float) -> Tuple[float, float]:
    """(phi', v') of the desingularised system in the deformation and volume ratio."""
    d = E.d
    r = s / phi
    a = v * r ** (d - 1)
    q = s * s - float(E.g.d2(a))
    den = -float(E.h.d2(v)) + q * r ** (2 * d - 2)
    num = r ** (2 * d - 3) * v * (v * r**d - 1.0) * q + r ** (d - 2) * (float(E.g.d1(a)) - float(E.g.d1(1.0 / r)))
    return a, (d - 1) / phi * num / den


# ----------------------------------------------------------------------------
# Trajectory


@dataclass
class CavityTrajectory:
    """Samples of both segments; gap = b - a and Q come from the integrated state."""

    cfg: CavityConfig
    start: SeriesStart
    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gap: np.ndarray
    Q: np.ndarray
    segment: np.ndarray
    param: np.ndarray
    segments: List[SampledArc]
    T: float
    stop_reason: str
    phi: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    p: np.ndarray = field(init=False)
    T_rad: np.ndarray = field(init=False)

    def __post_init__(self):
        E = self.cfg.E
        d = E.d
        self.phi = self.s * self.b
        self.v = self.a * self.b ** (d - 1)
        K, _ = eval_shock_quotients(E, self.a, self.b)
        self.p = -self.Q - self.gap * np.asarray(K)
        self.T_rad = self.b ** (1 - d) * np.asarray(E.g.d1(self.a)) + np.asarray(E.h.d1(self.v))

    @property
    def E(self) -> StoredEnergy:
        return self.cfg.E

    def _layer_tau(self, s: float, i: int) -> float:
        arc = self.segments[1]
        lo = float(self.param[i]) if self.segment[i] == 1 else 0.0
        hi = float(self.param[i + 1])
        return refine_root(lambda t: float(arc.dense(t)[0]) - s, lo, hi, x_tol=1e-15)

    def state_at(self, s: float) -> Tuple[float, float]:
        """(a, b) at abscissa s from the dense output of the owning segment."""
        if not self.s[0] <= s <= self.s[-1]:
            raise OutOfRangeError(f"s={s:.17g} outside the sampled range [{self.s[0]:.6g}, {self.s[-1]:.6g}]")
        i = int(min(np.searchsorted(self.s, s, side="right") - 1, len(self.s) - 2))
        if self.segment[i + 1] == 0:
            y = self.segments[0].dense(s)
            return float(y[1]), float(y[2])
        y = self.segments[1].dense(self._layer_tau(s, i))
        _, a, b, _, _ = layer_state(y)
        return a, b

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "s": self.s,
            "phi": self.phi,
            "v": self.v,
            "a": self.a,
            "b": self.b,
            "Q": self.Q,
            "p": self.p,
            "T_rad": self.T_rad,
        }

    @property
    def terminal_p(self) -> float:
        """p(T) = R(A, B, T); negative at a shock stop, zero on the diagonal."""
        return float(self.p[-1])


def _run_segment(problem: IvpProblem, what: str) -> SampledArc:
    try:
        return integrate(problem)
    except IntegrationError:
        logger.error("%s: integration failed", what)
        raise


def _layer_start(E: StoredEnergy, s: float, a: float, b: float) -> np.ndarray:
    minus_q = float(eval_phi11(E, a, b)) - s * s
    if not (b > a and minus_q > 0.0):
        raise HypothesisViolation(f"cannot enter the sonic layer at s={s:.12g}: b - a={b - a:.3g}, -Q={minus_q:.3g}")
    return np.array([s, b, math.log(b - a), math.log(minus_q)])


def _layer_events(E: StoredEnergy, tol: SolverTolerances) -> List[Event]:
    """Sonic stop once |Q| is small and p is clearly negative, plus the diagonal guard.

    In two and three dimensions a continuous connection is excluded, so the
    guard only fires when the gap underflows; from four dimensions on it
    marks the sonic connection at b - a = eps_ab.
    """

    def sonic(tau, y):
        _, _, b, _, _ = layer_state(y)
        small_q = float(y[3]) - math.log(tol.eps_q * float(eval_phi11(E, b, b)))
        return max(small_q, connection_sign(E, y) + math.log(2.0))

    floor = tol.eps_ab if E.d >= 4 else tol.gap_floor
    name = "diagonal" if E.d >= 4 else "gap_underflow"

    def diagonal(tau, y):
        return float(y[2]) - math.log(floor)

    return [Event(sonic, direction=-1, name="sonic"), Event(diagonal, direction=-1, name=name)]


def solve_cavity(cfg: CavityConfig) -> CavityTrajectory:
    E, tol = cfg.E, cfg.tol
    require_solvable(E)
    start = series_start(cfg)
    logger.info(
        "solve_cavity: phi0=%.6g v0=%.6g s0=%.3g c0=%.6g (%s)",
        cfg.phi0, cfg.v0, start.s0, start.c0, E.describe(),
    )

    def switch(t, y):
        return t * t - eval_phi11(E, y[1], y[2]) + tol.sonic_switch * eval_phi11(E, y[2], y[2])

    def narrow(t, y):
        return y[2] - y[1] - tol.gap_switch * y[2]

    first = IvpProblem(
        rhs=radial_rhs(E, dynamic=True),
        t0=start.s0,
        y0=[start.s0, start.a0, start.b0],
        t_max=tol.s_max,
        events=[Event(switch, direction=1, name="sonic_switch"), Event(narrow, direction=-1, name="gap_switch")],
        controls=tol.controls(),
        partial_ok=True,
    )
    arc1 = _run_segment(first, "cavity arc")
    reason1 = arc1.termination.reason
    if reason1 == "step_underflow":
        raise StepUnderflowError(f"step underflow at s={arc1.t[-1]:.17g} before the sonic layer (phi0={cfg.phi0})")
    if reason1 == "reached_t_max":
        raise IntegrationError(f"no sonic stop before s={tol.s_max:g} (phi0={cfg.phi0})")

    segments = [arc1]
    stop_reason = "step_budget"
    if reason1 == "event":
        logger.debug("sonic layer entered by %s at s=%.12g", arc1.termination.event_name, arc1.t[-1])
        s1, a1, b1 = (float(x) for x in arc1.y[-1])
        second = IvpProblem(
            rhs=layer_rhs(E),
            t0=0.0,
            y0=_layer_start(E, s1, a1, b1),
            t_max=1e6,
            events=_layer_events(E, tol),
            controls=StepControls(
                rel_tol=tol.rel_tol,
                abs_tol=tol.abs_tol,
                min_step=tol.min_step,
                max_steps=max(tol.max_steps - arc1.steps_accepted - arc1.steps_rejected, 1),
            ),
            partial_ok=True,
        )
        arc2 = _run_segment(second, "sonic layer")
        segments.append(arc2)
        term = arc2.termination
        if term.reason == "event":
            stop_reason = term.event_name
        else:
            stop_reason = term.reason
            logger.warning("sonic layer ended by %s at s=%.17g", term.reason, arc2.y[-1, 0])

    s, a, b = (arc1.y[:, k].copy() for k in range(3))
    gap = b - a
    Q = s**2 - np.asarray(eval_phi11(E, a, b))
    seg_ids = [np.zeros(len(arc1.t), dtype=int)]
    params = [arc1.t]
    if len(segments) == 2 and len(segments[1].t) > 1:
        arc2 = segments[1]
        y2 = arc2.y[1:]
        gap2 = np.exp(y2[:, 2])
        s = np.concatenate([s, y2[:, 0]])
        b = np.concatenate([b, y2[:, 1]])
        a = np.concatenate([a, y2[:, 1] - gap2])
        gap = np.concatenate([gap, gap2])
        Q = np.concatenate([Q, -np.exp(y2[:, 3])])
        seg_ids.append(np.ones(len(y2), dtype=int))
        params.append(arc2.t[1:])

    traj = CavityTrajectory(
        cfg=cfg,
        start=start,
        s=s,
        a=a,
        b=b,
        gap=gap,
        Q=Q,
        segment=np.concatenate(seg_ids),
        param=np.concatenate(params),
        segments=segments,
        T=float(s[-1]),
        stop_reason=stop_reason,
    )
    _check_arc_invariants(traj)
    logger.info(
        "solve_cavity: stop=%s T=%.12g after %d samples (terminal b-a=%.3g, Q=%.3g)",
        stop_reason, traj.T, len(traj.s), traj.gap[-1], traj.Q[-1],
    )
    return traj


def _check_arc_invariants(traj: CavityTrajectory) -> None:
    rtol = traj.cfg.tol.monotone_tol
    a, b, s, gap = traj.a, traj.b, traj.s, traj.gap

    def breach(values: np.ndarray, increasing: bool, label: str):
        step = np.diff(values) if increasing else -np.diff(values)
        bad = np.flatnonzero(step < -rtol * np.abs(values[:-1]))
        if bad.size:
            i = bad[0]
            raise HypothesisViolation(f"{label} fails between s={s[i]:.12g} and s={s[i + 1]:.12g}")

    same = traj.segment[1:] == traj.segment[:-1]
    if np.any(np.diff(traj.param)[same] <= 0):
        raise HypothesisViolation("integration parameter is not strictly increasing")
    if np.any(np.diff(s) < 0):
        raise HypothesisViolation("self-similar abscissa decreases")
    breach(a, True, "a increasing")
    breach(b, False, "b decreasing")
    breach(gap, False, "b - a decreasing")
    if np.any(gap <= 0.0):
        i = int(np.flatnonzero(gap <= 0.0)[0])
        raise HypothesisViolation(f"a >= b at s={s[i]:.12g}")
    if np.any(traj.Q[:-1] >= 0.0):
        i = int(np.flatnonzero(traj.Q[:-1] >= 0.0)[0])
        raise HypothesisViolation(f"Q >= 0 inside the arc at s={s[i]:.12g}")


def cauchy_stress(traj: CavityTrajectory, s: float) -> float:
    """T_rad(s) = b^(1-d) g'(a) + h'(a b^(d-1))."""
    a, b = traj.state_at(s)
    d = traj.E.d
    return float(b ** (1 - d) * traj.E.g.d1(a) + traj.E.h.d1(a * b ** (d - 1)))


# ----------------------------------------------------------------------------
# Connection to the uniform state


@dataclass(frozen=True)
class ConnectionResult:
    sigma: float
    Lambda: float
    a_minus: float
    jump: float
    kind: str  # shock | sonic
    lax_ok: bool
    residual: float
    dp_ds: float = math.nan
    first_family_ok: bool = False
    sigma_ge_nu: bool = True
    T: float = math.nan
    p_terminal: float = math.nan
    log_jump: float = math.nan
    # (sigma^2 - Phi_11(Lambda, Lambda), Phi_11(a-, Lambda) - sigma^2), each divided by the jump
    lax_margins: Tuple[float, float] = (math.nan, math.nan)
    before_stop: bool = True


def _p_at(traj: CavityTrajectory, s: float) -> float:
    a, b = traj.state_at(s)
    return float(eval_R(traj.E, a, b, s))


def _lax_margins(E: StoredEnergy, a: float, b: float, ratio: float) -> Tuple[float, float]:
    """Lax margins of a jump with -Q / (b - a) = ratio."""
    _, D = eval_shock_quotients(E, a, b)
    return float(D) - ratio, ratio


def _no_connection(traj: CavityTrajectory) -> NoConnectionError:
    msg = (
        f"p stays positive up to T={traj.T:.12g} (stop={traj.stop_reason}, "
        f"b - a = {traj.gap[-1]:.3g}, Q = {traj.Q[-1]:.3g})"
    )
    if traj.E.d <= 3:
        msg += f"; a continuous connection cannot occur for d={traj.E.d}, so the terminal layer was not resolved"
    return NoConnectionError(msg)


def find_connection(traj: CavityTrajectory) -> ConnectionResult:
    E, tol = traj.E, traj.cfg.tol
    positive = traj.p > 0.0
    if not positive[0]:
        raise NoConnectionError(f"p does not start positive (p(s0)={traj.p[0]:.6g})")
    changes = np.flatnonzero(positive[:-1] != positive[1:])
    if changes.size > 1:
        raise MultipleRootsError(
            f"p changes sign {changes.size} times, at s={', '.join(f'{traj.s[i]:.9g}' for i in changes[:5])}"
        )

    if changes.size == 0:
        if E.d >= 4 and (traj.stop_reason == "diagonal" or traj.gap[-1] <= tol.eps_ab):
            A, B, T = float(traj.a[-1]), float(traj.b[-1]), traj.T
            result = ConnectionResult(
                sigma=T,
                Lambda=B,
                a_minus=A,
                jump=float(traj.gap[-1]),
                kind="sonic",
                lax_ok=False,
                residual=abs(traj.terminal_p),
                sigma_ge_nu=T >= E.nu - tol.f_tol,
                T=T,
                p_terminal=traj.terminal_p,
                log_jump=math.log(traj.gap[-1]),
                before_stop=False,
            )
            logger.info("find_connection: sonic connection at T=%.12g", T)
            return result
        raise _no_connection(traj)

    i = int(changes[0])
    if traj.segment[i + 1] == 0:
        lo, hi = float(traj.s[i]), float(traj.s[i + 1])
        sigma = refine_root(lambda s: _p_at(traj, s), lo, hi, x_tol=1e-14 * max(1.0, hi), f_tol=tol.f_tol * 1e-3)
        a_minus, Lambda = traj.state_at(sigma)
        gap = Lambda - a_minus
        Q = sigma * sigma - float(eval_phi11(E, a_minus, Lambda))
        residual = abs(_p_at(traj, sigma))
        h = 1e-6 * sigma
        left, right = max(sigma - h, traj.s[0]), min(sigma + h, traj.s[-1])
        dp_ds = (_p_at(traj, right) - _p_at(traj, left)) / (right - left)
        log_jump = math.log(gap)
        before_stop = sigma < traj.T
    else:
        arc = traj.segments[1]
        lo = float(traj.param[i]) if traj.segment[i] == 1 else 0.0
        hi = float(traj.param[i + 1])

        def sign_at(t: float) -> float:
            return connection_sign(E, arc.dense(t))

        tau = refine_root(sign_at, lo, hi, x_tol=1e-14 * max(1.0, hi))
        y = arc.dense(tau)
        sigma, a_minus, Lambda, gap, Q = layer_state(y)
        K, _ = eval_shock_quotients(E, a_minus, Lambda)
        residual = abs(-Q - gap * float(K))
        # At a zero of p, dp/ds equals the tau-derivative of connection_sign.
        h = 1e-6 * max(1.0, tau)
        left, right = max(tau - h, float(arc.t[0])), min(tau + h, float(arc.t[-1]))
        dp_ds = (sign_at(right) - sign_at(left)) / (right - left)
        log_jump = float(y[2])
        before_stop = tau < float(arc.t[-1])

    lax_margins = _lax_margins(E, a_minus, Lambda, -Q / gap)
    lax_ok = lax_margins[0] > 0.0 and lax_margins[1] > 0.0
    first_family_ok = lax_margins[0] < 0.0 and lax_margins[1] < 0.0

    result = ConnectionResult(
        sigma=sigma,
        Lambda=Lambda,
        a_minus=a_minus,
        jump=gap,
        kind="shock",
        lax_ok=lax_ok,
        residual=residual,
        dp_ds=dp_ds,
        first_family_ok=first_family_ok,
        sigma_ge_nu=sigma >= E.nu - tol.f_tol,
        T=traj.T,
        p_terminal=traj.terminal_p,
        log_jump=log_jump,
        lax_margins=lax_margins,
        before_stop=before_stop,
    )
    if not lax_ok:
        logger.warning("connection at sigma=%.12g violates the Lax inequalities: margins %s", sigma, lax_margins)
    logger.info(
        "find_connection: shock at sigma=%.12g Lambda=%.12g jump=%.6g |p|=%.2g",
        sigma, Lambda, gap, residual,
    )
    return result


# ----------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class DpIdentity:
    s: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray


def dp_identity(traj: CavityTrajectory, stride: int = 1) -> DpIdentity:
    """Both sides of p' + p (a' - b')/(a - b) = closed form < 0 on the first segment.

    The left side differentiates p along the dense output; the right side
    is the closed-form expression in (a, b, s).
    """
    E = traj.E
    d = E.d
    rhs_fn = radial_rhs(E, dynamic=True)
    mask = (traj.segment == 0) & (traj.s >= 10 * traj.start.s0) & (traj.Q < -traj.cfg.tol.sonic_switch)
    idx = np.flatnonzero(mask)[::stride]
    idx = idx[(idx > 0) & (idx < len(traj.s) - 1)]
    s, a, b, p = traj.s[idx], traj.a[idx], traj.b[idx], traj.p[idx]

    lhs = np.empty(len(idx))
    for k, si in enumerate(s):
        h = 1e-6 * si
        dp = (_p_at(traj, si + h) - _p_at(traj, si - h)) / (2 * h)
        _, da, db = rhs_fn(si, np.array([si, a[k], b[k]]))
        lhs[k] = dp + p[k] * (da - db) / (a[k] - b[k])

    v = a * b ** (d - 1)
    g1a, g1b = np.asarray(E.g.d1(a)), np.asarray(E.g.d1(b))
    quotient = (g1a - g1b) / (a - b) - b ** (d - 2) * np.asarray(E.h.d1(v))
    phi12_bb = b ** (d - 2) * np.asarray(E.h.d1(b**d)) + b ** (2 * d - 2) * np.asarray(E.h.d2(b**d))
    closed = -(d - 1) / s * (quotient + phi12_bb) - (s**2 + eval_phi11(E, b, b)) / s
    return DpIdentity(s=s, lhs=lhs, rhs=np.asarray(closed))


@dataclass(frozen=True)
class RescaledArc:
    """(psi, delta)(xi) = (phi(phi0 xi)/phi0, v(phi0 xi)) with the exact start prepended."""

    xi: np.ndarray
    psi: np.ndarray
    delta: np.ndarray
    phi0: float


def rescale(traj: CavityTrajectory) -> RescaledArc:
    phi0 = traj.cfg.phi0
    xi = np.concatenate([[0.0], traj.s / phi0])
    psi = np.concatenate([[1.0], traj.phi / phi0])
    delta = np.concatenate([[traj.cfg.v0], traj.v])
    return RescaledArc(xi=xi, psi=psi, delta=delta, phi0=phi0)


def rescaled_state(traj: CavityTrajectory, xi: float) -> Tuple[float, float]:
    """(psi, delta) at xi using the dense output; xi = 0 returns the exact start."""
    if xi == 0.0:
        return 1.0, float(traj.cfg.v0)
    s = traj.cfg.phi0 * xi
    a, b = traj.state_at(s)
    return xi * b, a * b ** (traj.E.d - 1)
