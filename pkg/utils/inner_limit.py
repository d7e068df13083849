"""The phi0 -> 0 limiting profile, the critical stretch and equilibrium curves.

The inner system is the radial equilibrium system of elastostatics written
in the rescaled variable xi = s/phi0:

    a0' = -((d - 1)/xi) (a0 - b0) P(a0, b0) / Phi_11(a0, b0)
    b0' = (a0 - b0)/xi

started from the cavity series with phi0 = 1. The pair (a0, b0) brackets
the critical stretch Lambda0 from both sides for every xi.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from utils.cavity_solver import (
    Boundary,
    SolverTolerances,
    StressFree,
    radial_rhs,
    require_solvable,
    series_values,
)
from utils.errors import CavitationError, H6Violation, OutOfRangeError, SlowConvergenceWarning
from utils.ode_engine import Event, IvpProblem, SampledArc, integrate, refine_root
from utils.stored_energy import StoredEnergy, check_hypotheses, chi, chi_prime

logger = logging.getLogger(__name__)

SUBDIVISIONS = 8


@dataclass(frozen=True)
class Representation:
    value: float
    tail: float
    uncertainty: float


@dataclass
class InnerSolution:
    E: StoredEnergy
    v0: float
    xi: np.ndarray
    a0: np.ndarray
    b0: np.ndarray
    arc: SampledArc
    xi_max: float
    converged: bool
    psi0: np.ndarray = field(init=False)
    delta0: np.ndarray = field(init=False)
    Lambda0_repr1: Optional[float] = None
    repr1_uncertainty: float = math.nan
    Lambda0_repr2: Optional[float] = None
    repr2_uncertainty: float = math.nan

    def __post_init__(self):
        self.psi0 = self.xi * self.b0
        self.delta0 = self.a0 * self.b0 ** (self.E.d - 1)

    @property
    def bracket(self) -> Tuple[float, float]:
        return float(self.a0[-1]), float(self.b0[-1])

    @property
    def Lambda0(self) -> float:
        lo, hi = self.bracket
        return 0.5 * (lo + hi)

    @property
    def half_width(self) -> float:
        lo, hi = self.bracket
        return 0.5 * (hi - lo)

    @property
    def xi0(self) -> float:
        return float(self.xi[0])

    def state_at(self, xi: float) -> Tuple[float, float]:
        if not self.xi[0] <= xi <= self.xi[-1]:
            raise OutOfRangeError(f"xi={xi:.17g} outside [{self.xi[0]:.6g}, {self.xi[-1]:.6g}]")
        y = self.arc.dense(xi)
        return float(y[1]), float(y[2])

    def psi_delta_at(self, xi: float) -> Tuple[float, float]:
        """(psi0, delta0) at xi; xi = 0 gives the exact initial data (1, v0)."""
        if xi == 0.0:
            return 1.0, self.v0
        a, b = self.state_at(xi)
        return xi * b, a * b ** (self.E.d - 1)

    def columns(self) -> Dict[str, np.ndarray]:
        return {"xi": self.xi, "psi0": self.psi0, "delta0": self.delta0, "a0": self.a0, "b0": self.b0}


def _refined_grid(t: np.ndarray, n: int = SUBDIVISIONS) -> np.ndarray:
    frac = np.arange(n) / n
    inner = (t[:-1, None] + np.diff(t)[:, None] * frac).ravel()
    return np.append(inner, t[-1])


def _tail_estimate(xi: np.ndarray, cumulative: np.ndarray) -> float:
    """Remaining integral beyond xi[-1], fitting F(xi) = F_inf - c/xi on the last decade."""
    window = xi >= xi[-1] / 10.0
    if window.sum() < 3:
        return 0.0
    slope, intercept = np.polyfit(1.0 / xi[window], cumulative[window], 1)
    return float(intercept - cumulative[-1])


def _quadrature(xi: np.ndarray, integrand: np.ndarray) -> Tuple[float, float, float]:
    """(integral, tail, trapezoid error estimate) on a grid refined from the steps."""
    total = float(trapezoid(integrand, xi))
    coarse = float(trapezoid(integrand[::2], xi[::2])) if len(xi) % 2 == 1 else total
    running = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(xi))])
    tail = _tail_estimate(xi, running)
    return total, tail, abs(total - coarse) / 3.0


def _dense_states(sol: InnerSolution) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = _refined_grid(sol.arc.t)
    y = sol.arc.dense(grid)
    return grid, y[:, 1], y[:, 2]


def repr1_integrand(E: StoredEnergy, xi, a, b):
    """(1 - d) D0 / (psi0 f0), the xi-derivative of delta0 = a b^(d-1)."""
    d = E.d
    f0 = np.asarray(E.h.d2(a * b ** (d - 1))) + np.asarray(E.g.d2(a)) * b ** (2 - 2 * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        gq = np.asarray(E.g.d1(a)) - np.asarray(E.g.d1(b))
    D0 = b ** (1 - d) * (-a * (a - b) * np.asarray(E.g.d2(a)) + b * gq)
    return (1 - d) * D0 / (xi * b * f0)


def repr2_integrand(E: StoredEnergy, xi, a, b):
    """((d - 1)/xi) b^(1-d) (g'(b) - a g'(a)/b), the xi-derivative of the radial Cauchy stress."""
    d = E.d
    return (d - 1) / xi * b ** (1 - d) * (np.asarray(E.g.d1(b)) - a * np.asarray(E.g.d1(a)) / b)


def lambda0_repr1(sol: InnerSolution, E: Optional[StoredEnergy] = None) -> Representation:
    E = E or sol.E
    d = E.d
    xi, a, b = _dense_states(sol)
    integral, tail, err = _quadrature(xi, repr1_integrand(E, xi, a, b))
    power = float(sol.delta0[0]) + integral + tail
    value = power ** (1.0 / d)
    # d(x^(1/d)) = x^(1/d - 1)/d dx
    uncertainty = (abs(tail) + err) * value / (d * power)
    logger.info("repr1: Lambda0=%.12g tail=%.3g uncertainty=%.3g", value, tail, uncertainty)
    return Representation(value=value, tail=tail, uncertainty=uncertainty)


def chi_inverse(E: StoredEnergy, y: float, guess: Tuple[float, float] = (0.5, 2.0)) -> float:
    lo, hi = guess

    def f(x):
        return float(chi(E, x)) - y

    for _ in range(200):
        if f(lo) < 0.0 < f(hi):
            break
        if f(lo) >= 0.0:
            lo /= 2.0
        if f(hi) <= 0.0:
            hi *= 2.0
    grid = np.geomspace(lo, hi, 64)
    if np.any(np.asarray(chi_prime(E, grid)) <= 0.0):
        bad = grid[np.asarray(chi_prime(E, grid)) <= 0.0][0]
        raise H6Violation(f"chi' <= 0 at x={bad:.6g} inside the inversion bracket [{lo:.6g}, {hi:.6g}]")
    return refine_root(f, lo, hi, x_tol=1e-15)


def lambda0_repr2(sol: InnerSolution, E: Optional[StoredEnergy] = None) -> Representation:
    E = E or sol.E
    if not check_hypotheses(E).verdicts["H6"].ok:
        raise H6Violation(f"chi is not strictly increasing for {E.describe()}")
    d = E.d
    xi, a, b = _dense_states(sol)
    integral, tail, err = _quadrature(xi, repr2_integrand(E, xi, a, b))
    a_start, b_start = float(sol.a0[0]), float(sol.b0[0])
    T_start = b_start ** (1 - d) * float(E.g.d1(a_start)) + float(E.h.d1(sol.delta0[0]))
    target = T_start + integral + tail
    value = chi_inverse(E, target, guess=sol.bracket)
    uncertainty = (abs(tail) + err) / float(chi_prime(E, value))
    logger.info("repr2: Lambda0=%.12g tail=%.3g uncertainty=%.3g", value, tail, uncertainty)
    return Representation(value=value, tail=tail, uncertainty=uncertainty)


@dataclass(frozen=True)
class LowerBound:
    name: str
    value: float
    applicable: bool
    holds: Optional[bool]


def lower_bounds(sol: InnerSolution) -> List[LowerBound]:
    """Lower bounds on Lambda0: v0^(1/d) under H8, chi^-1(h'(v0)) under H6 and H7."""
    E = sol.E
    report = check_hypotheses(E)
    out = []
    root = sol.v0 ** (1.0 / E.d)
    ok = report.passes("H8")
    out.append(LowerBound("v0^(1/d)", root, ok, sol.bracket[0] > root if ok else None))
    if report.passes("H6", "H7"):
        bound = chi_inverse(E, float(E.h.d1(sol.v0)))
        out.append(LowerBound("chi^-1(h'(v0))", bound, True, sol.bracket[0] > bound))
    else:
        out.append(LowerBound("chi^-1(h'(v0))", math.nan, False, None))
    return out


def solve_inner(
    E: StoredEnergy,
    v0: float,
    xi_max: Optional[float] = None,
    tol: SolverTolerances = SolverTolerances(),
    representations: bool = True,
) -> InnerSolution:
    require_solvable(E)
    if not v0 > 0.0:
        raise OutOfRangeError(f"v0 must be positive, got {v0}")
    xi_max = tol.xi_max if xi_max is None else xi_max
    xi0 = tol.s0_factor * min(1.0, E.nu)
    start = series_values(E, 1.0, v0, xi0)
    logger.info("solve_inner: v0=%.6g xi0=%.3g xi_max=%.3g", v0, xi0, xi_max)

    def narrow(t, y):
        return y[2] - y[1] - tol.bracket_tol

    arc = integrate(
        IvpProblem(
            rhs=radial_rhs(E, dynamic=False),
            t0=xi0,
            y0=[xi0, start.a0, start.b0],
            t_max=xi_max,
            events=[Event(narrow, direction=-1, name="bracket")],
            controls=tol.controls(),
        )
    )
    width = float(arc.y[-1, 2] - arc.y[-1, 1])
    converged = width <= tol.bracket_tol * (1 + 1e-6)
    if not converged:
        warnings.warn(
            f"inner bracket width {width:.3g} above {tol.bracket_tol:g} at xi_max={xi_max:g}",
            SlowConvergenceWarning,
            stacklevel=2,
        )
    sol = InnerSolution(
        E=E,
        v0=v0,
        xi=arc.t.copy(),
        a0=arc.y[:, 1].copy(),
        b0=arc.y[:, 2].copy(),
        arc=arc,
        xi_max=float(arc.t[-1]),
        converged=converged,
    )
    logger.info(
        "solve_inner: bracket [%.12g, %.12g] at xi=%.6g (%d samples)",
        sol.bracket[0], sol.bracket[1], sol.xi_max, len(sol.xi),
    )
    if representations:
        r1 = lambda0_repr1(sol)
        sol.Lambda0_repr1, sol.repr1_uncertainty = r1.value, r1.uncertainty
        try:
            r2 = lambda0_repr2(sol)
            sol.Lambda0_repr2, sol.repr2_uncertainty = r2.value, r2.uncertainty
        except H6Violation as exc:
            logger.info("repr2 skipped: %s", exc)
    return sol


# ----------------------------------------------------------------------------
# Equilibrium elastostatics


@dataclass(frozen=True)
class EquilibriumCurvePoint:
    phi0: float
    lam: float
    status: str = "ok"


@dataclass
class EquilibriumCurve:
    points: List[EquilibriumCurvePoint]

    @property
    def phi0(self) -> np.ndarray:
        return np.array([p.phi0 for p in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def columns(self) -> Dict[str, np.ndarray]:
        return {"phi0": self.phi0, "lambda": self.lam}


def equilibrium_arc(
    E: StoredEnergy, phi0: float, boundary: Boundary = StressFree(), tol: SolverTolerances = SolverTolerances()
) -> SampledArc:
    """Equilibrium trajectory (s, a, b) on [s0, 1] for cavity radius phi0."""
    if not phi0 > 0.0:
        raise OutOfRangeError(f"phi0 must be positive, got {phi0}")
    v0 = boundary.v0(E, phi0)
    s0 = tol.s0_factor * min(1.0, phi0, E.nu)
    start = series_values(E, phi0, v0, s0)
    return integrate(
        IvpProblem(
            rhs=radial_rhs(E, dynamic=False),
            t0=s0,
            y0=[s0, start.a0, start.b0],
            t_max=1.0,
            controls=tol.controls(),
        )
    )


def solve_equilibrium(
    E: StoredEnergy, phi0: float, boundary: Boundary = StressFree(), tol: SolverTolerances = SolverTolerances()
) -> EquilibriumCurvePoint:
    require_solvable(E)
    arc = equilibrium_arc(E, phi0, boundary, tol)
    lam = float(arc.y[-1, 2])
    logger.debug("solve_equilibrium: phi0=%.6g lambda=%.12g", phi0, lam)
    return EquilibriumCurvePoint(phi0=phi0, lam=lam)


def solve_equilibrium_curve(
    E: StoredEnergy,
    boundary: Boundary,
    grid: Sequence[float],
    tol: SolverTolerances = SolverTolerances(),
) -> EquilibriumCurve:
    points = []
    for phi0 in sorted(grid):
        try:
            points.append(solve_equilibrium(E, phi0, boundary, tol))
        except CavitationError as exc:
            logger.warning("equilibrium point phi0=%.6g failed: %s", phi0, exc)
            points.append(EquilibriumCurvePoint(phi0=phi0, lam=math.nan, status=exc.code))
    logger.info("solve_equilibrium_curve: %d points", len(points))
    return EquilibriumCurve(points)
