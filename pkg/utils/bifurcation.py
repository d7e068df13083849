"""Sweeps over the cavity speed and checks of the small-speed limits."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from utils.cavity_solver import (
    Boundary,
    CavityConfig,
    CavityTrajectory,
    SolverTolerances,
    StressFree,
    find_connection,
    rescaled_state,
    solve_cavity,
)
from utils.errors import CavitationError, GridViolation, HypothesisViolation, OutOfRangeError
from utils.inner_limit import EquilibriumCurve, InnerSolution, solve_equilibrium_curve, solve_inner
from utils.stored_energy import StoredEnergy, check_hypotheses, eval_phi11

logger = logging.getLogger(__name__)

LIMIT_WINDOW = 0.2
EXTRAPOLATION_TOL = 1e-3


@dataclass(frozen=True)
class CurvePoint:
    phi0: float
    v0: float
    Lambda: float
    sigma: float
    jump: float
    kind: str
    status: str = "ok"
    lax_ok: bool = False
    T: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class BifurcationCurve:
    E: StoredEnergy
    boundary: Boundary
    points: List[CurvePoint]
    equilibrium: EquilibriumCurve
    inner: InnerSolution
    sigma0: float
    trajectories: Dict[float, CavityTrajectory] = field(default_factory=dict, repr=False)

    @property
    def Lambda0(self) -> float:
        return self.inner.Lambda0

    def good(self) -> List[CurvePoint]:
        return [p for p in self.points if p.ok]

    @property
    def ok_fraction(self) -> float:
        return len(self.good()) / len(self.points) if self.points else 0.0

    def columns(self) -> Dict[str, list]:
        return {
            "phi0": [p.phi0 for p in self.points],
            "Lambda": [p.Lambda for p in self.points],
            "sigma": [p.sigma for p in self.points],
            "jump": [p.jump for p in self.points],
            "kind": [p.kind for p in self.points],
            "status": [p.status for p in self.points],
        }


def _solve_point(args) -> Tuple[CurvePoint, Optional[CavityTrajectory]]:
    E, boundary, phi0, tol, keep = args
    v0 = math.nan
    try:
        cfg = CavityConfig(E=E, phi0=phi0, boundary=boundary, tol=tol)
        v0 = cfg.v0
        traj = solve_cavity(cfg)
        conn = find_connection(traj)
    except CavitationError as exc:
        logger.warning("sweep point phi0=%.6g failed: %s", phi0, exc)
        return CurvePoint(phi0, v0, math.nan, math.nan, math.nan, "", status=exc.code), None
    point = CurvePoint(
        phi0=phi0,
        v0=v0,
        Lambda=conn.Lambda,
        sigma=conn.sigma,
        jump=conn.jump,
        kind=conn.kind,
        lax_ok=conn.lax_ok,
        T=traj.T,
    )
    return point, (traj if keep else None)


def sweep(
    E: StoredEnergy,
    boundary: Boundary,
    phi0_grid: Sequence[float],
    tol: SolverTolerances = SolverTolerances(),
    threads: int = 1,
    keep_trajectories: bool = False,
    progress: bool = False,
) -> BifurcationCurve:
    report = check_hypotheses(E)
    failed = [n for n in ("H0", "H1", "H2", "H3", "H4", "H5") if not report.verdicts[n].ok]
    if failed:
        raise HypothesisViolation(f"sweep needs H0-H5; {failed[0]} fails: {report.verdicts[failed[0]].witness}")
    grid = sorted(float(x) for x in phi0_grid)
    if not grid:
        raise OutOfRangeError("empty phi0 grid")
    logger.info("sweep: %d points in [%.4g, %.4g] (%s, threads=%d)", len(grid), grid[0], grid[-1], E.describe(), threads)

    tasks = [(E, boundary, phi0, tol, keep_trajectories) for phi0 in grid]
    bar = dict(total=len(tasks), desc="sweep", unit="pt", disable=not progress)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(tqdm(pool.map(_solve_point, tasks), **bar))
    else:
        results = [_solve_point(t) for t in tqdm(tasks, **bar)]

    points = [r[0] for r in results]
    trajectories = {r[0].phi0: r[1] for r in results if r[1] is not None}

    inner = solve_inner(E, boundary.v0(E, 0.0), tol=tol)
    sigma0 = math.sqrt(float(eval_phi11(E, inner.Lambda0, inner.Lambda0)))
    equilibrium = solve_equilibrium_curve(E, boundary, grid, tol)
    curve = BifurcationCurve(
        E=E,
        boundary=boundary,
        points=points,
        equilibrium=equilibrium,
        inner=inner,
        sigma0=sigma0,
        trajectories=trajectories,
    )
    logger.info(
        "sweep: %d/%d points ok, Lambda0=%.10g sigma0=%.10g",
        len(curve.good()), len(points), inner.Lambda0, sigma0,
    )
    return curve


# ----------------------------------------------------------------------------
# Extrapolation to phi0 = 0


def extrapolate_to_zero(phi0: Sequence[float], values: Sequence[float]) -> Tuple[float, str]:
    """Aitken delta-squared on the three smallest phi0, linear Richardson as fallback."""
    order = np.argsort(phi0)[:3][::-1]
    x = np.asarray(values, dtype=float)[order]
    h = np.asarray(phi0, dtype=float)[order]
    if len(x) < 2:
        raise OutOfRangeError("extrapolation needs at least two samples")
    if len(x) == 3:
        d1, d2 = x[1] - x[0], x[2] - x[1]
        if d1 != 0.0 and 0.0 < d2 / d1 < 1.0:
            return float(x[2] - d2 * d2 / (d2 - d1)), "aitken"
    # Error linear in phi0 through the two smallest samples.
    ha, hb, xa, xb = h[-2], h[-1], x[-2], x[-1]
    return float((ha * xb - hb * xa) / (ha - hb)), "richardson"


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class LimitsReport:
    checks: List[Check]
    Lambda_extrapolated: float
    lambda_extrapolated: float
    method: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [
            f"Lambda(0+) extrapolated = {self.Lambda_extrapolated:.17g} ({self.method})",
            f"lambda(0+) extrapolated = {self.lambda_extrapolated:.17g}",
        ]
        for c in self.checks:
            status = "pass" if c.passed else "fail"
            lines.append(f"{c.name}: {status} margin={c.margin:.6g} {c.detail}".rstrip())
        return "\n".join(lines) + "\n"


def _strictly_decreasing(values: np.ndarray) -> Tuple[bool, float]:
    steps = -np.diff(values)
    return bool(np.all(steps > 0)), float(steps.min()) if steps.size else math.nan


def _solution_v(traj: CavityTrajectory, sigma: float, Lambda: float, s: float) -> float:
    """v of the weak solution: cavitating arc below sigma, uniform stretch above."""
    if s >= sigma:
        return Lambda ** traj.E.d
    if s < traj.s[0]:
        return float(traj.v[0])
    a, b = traj.state_at(s)
    return a * b ** (traj.E.d - 1)


def verify_limits(curve: BifurcationCurve) -> LimitsReport:
    small = sorted((p for p in curve.good() if p.phi0 <= LIMIT_WINDOW), key=lambda p: -p.phi0)
    if len(small) < 4:
        raise OutOfRangeError(f"limit checks need 4 converged points with phi0 <= {LIMIT_WINDOW}, got {len(small)}")
    E = curve.E
    Lambda0, sigma0 = curve.Lambda0, curve.sigma0
    lo, hi = curve.inner.bracket
    phi0 = np.array([p.phi0 for p in small])
    Lam = np.array([p.Lambda for p in small])
    checks: List[Check] = []

    ok, margin = _strictly_decreasing(np.abs(Lam - Lambda0))
    checks.append(Check("stretch_converges", ok, margin, "|Lambda - Lambda0| decreasing"))

    ok, margin = _strictly_decreasing(np.abs(np.array([p.sigma for p in small]) - sigma0))
    checks.append(Check("shock_speed_converges", ok, margin, f"sigma0={sigma0:.12g}"))

    jumps = np.array([p.jump for p in small])
    ok, margin = _strictly_decreasing(jumps)
    checks.append(Check("shock_strength_vanishes", ok and jumps[-1] > 0, margin, f"jump(min phi0)={jumps[-1]:.6g}"))

    Lambda_x, method = extrapolate_to_zero(phi0, Lam)
    inside = lo - EXTRAPOLATION_TOL <= Lambda_x <= hi + EXTRAPOLATION_TOL
    checks.append(Check("stretch_intercept", inside, EXTRAPOLATION_TOL - abs(Lambda_x - Lambda0), method))

    eq = {p.phi0: p.lam for p in curve.equilibrium.points if p.status == "ok"}
    eq_phi = [x for x in phi0 if x in eq]
    lam_x = math.nan
    if len(eq_phi) >= 2:
        lam_x, eq_method = extrapolate_to_zero(eq_phi, [eq[x] for x in eq_phi])
        gap = abs(lam_x - Lambda0)
        checks.append(Check("equilibrium_intercept", gap <= EXTRAPOLATION_TOL, EXTRAPOLATION_TOL - gap, eq_method))

    if isinstance(curve.boundary, StressFree):
        spread = float(np.ptp([p.v0 for p in small]))
        checks.append(Check("constant_boundary_volume", spread == 0.0, -spread, "V(phi0) - V(0) = 0"))

    smallest = small[-1]
    traj = curve.trajectories.get(smallest.phi0)
    if traj is not None:
        keep = traj.s < smallest.sigma
        s, a, b = traj.s[keep], traj.a[keep], traj.b[keep]
        cap = smallest.phi0 / s
        upper_l = cap - (b - smallest.Lambda)
        upper_ab = cap - (b - a)
        lower = np.minimum(b - smallest.Lambda, b - a)
        env_ok = bool(np.all(upper_l > 0) and np.all(upper_ab > 0) and np.all(lower > 0))
        checks.append(
            Check(
                "envelope",
                env_ok,
                float(min(upper_l.min(), upper_ab.min(), lower.min())),
                f"phi0={smallest.phi0:g}, {keep.sum()} samples",
            )
        )

        target = Lambda0**E.d
        converging = True
        worst = math.inf
        for frac in (0.25, 0.5, 0.75):
            s_check = frac * sigma0
            errs = []
            for p in small:
                tr = curve.trajectories.get(p.phi0)
                if tr is None:
                    continue
                errs.append(abs(_solution_v(tr, p.sigma, p.Lambda, s_check) - target))
            if len(errs) >= 2:
                dec, m = _strictly_decreasing(np.array(errs))
                converging &= dec
                worst = min(worst, m)
        checks.append(Check("volume_ratio_converges", converging, worst, f"v -> Lambda0^d = {target:.10g}"))

    report = LimitsReport(checks=checks, Lambda_extrapolated=Lambda_x, lambda_extrapolated=lam_x, method=method)
    logger.info("verify_limits: %s", "pass" if report.passed else "fail")
    return report


# ----------------------------------------------------------------------------
# Rescaling convergence


def epsilon_tau(E: StoredEnergy, tau: float) -> float:
    nu = E.nu
    return nu / (2.0 * (1.0 + nu + 1.0 / nu + tau))


@dataclass(frozen=True)
class RescalingPoint:
    phi0: float
    sup_distance: float
    sup_squared: float
    flagged: bool


@dataclass
class RescalingReport:
    tau: float
    eps_tau: float
    points: List[RescalingPoint]
    order: float

    def to_text(self) -> str:
        lines = [f"tau = {self.tau:g}", f"eps_tau = {self.eps_tau:.6g}", f"fitted order = {self.order:.6g}"]
        for p in self.points:
            flag = " (phi0 >= eps_tau)" if p.flagged else ""
            lines.append(f"phi0={p.phi0:.6g} sup_distance={p.sup_distance:.6e} sup_squared={p.sup_squared:.6e}{flag}")
        return "\n".join(lines) + "\n"


def rescaling_distance(traj: CavityTrajectory, inner: InnerSolution, tau: float, samples: int = 400) -> float:
    """sup over [0, tau] of |(psi, delta) - (psi0, delta0)|."""
    phi0 = traj.cfg.phi0
    xi_lo = max(inner.xi0, traj.s[0] / phi0)
    xi_hi = min(tau, inner.xi[-1])
    grid = np.concatenate([[0.0], np.geomspace(xi_lo, xi_hi, samples)])
    worst = 0.0
    for xi in grid:
        psi, delta = rescaled_state(traj, xi)
        psi0, delta0 = inner.psi_delta_at(xi)
        worst = max(worst, math.hypot(psi - psi0, delta - delta0))
    return worst


def verify_rescaling(
    E: StoredEnergy,
    boundary: Boundary,
    tau: float,
    phi0_grid: Sequence[float],
    tol: SolverTolerances = SolverTolerances(),
    strict: bool = False,
) -> RescalingReport:
    eps = epsilon_tau(E, tau)
    inner = solve_inner(E, boundary.v0(E, 0.0), tol=tol, representations=False)
    if inner.xi[-1] < tau:
        raise GridViolation(f"inner solution ends at xi={inner.xi[-1]:.6g} before tau={tau:g}")
    points = []
    for phi0 in sorted(phi0_grid, reverse=True):
        flagged = phi0 >= eps
        if flagged and strict:
            raise GridViolation(f"phi0={phi0:g} is not below eps_tau={eps:.6g}")
        traj = solve_cavity(CavityConfig(E=E, phi0=phi0, boundary=boundary, tol=tol))
        if traj.T / phi0 <= tau:
            raise GridViolation(f"rescaled interval [0, {traj.T / phi0:.6g}] does not contain [0, {tau:g}]")
        dist = rescaling_distance(traj, inner, tau)
        points.append(RescalingPoint(phi0=phi0, sup_distance=dist, sup_squared=dist * dist, flagged=flagged))
        logger.info("verify_rescaling: phi0=%.6g sup distance %.6e", phi0, dist)
    if len(points) >= 2:
        order = float(np.polyfit(np.log([p.phi0 for p in points]), np.log([p.sup_distance for p in points]), 1)[0])
    else:
        order = math.nan
    if any(p.flagged for p in points):
        logger.warning("verify_rescaling: grid has phi0 >= eps_tau=%.4g; checked the rescaled interval instead", eps)
    return RescalingReport(tau=tau, eps_tau=eps, points=points, order=order)


# ----------------------------------------------------------------------------
# Cavity family


@dataclass(frozen=True)
class FamilyCurve:
    phi0: float
    s: np.ndarray
    v: np.ndarray
    sigma: float
    step_measure: float


def figure_one_family(
    E: StoredEnergy,
    boundary: Boundary,
    phi0_grid: Sequence[float],
    tol: SolverTolerances = SolverTolerances(),
    s_measure: float = 0.05,
) -> List[FamilyCurve]:
    """v(s) up to the shock for each phi0, with v(s_measure) - v(0+) as the step measure."""
    family = []
    for phi0 in sorted(phi0_grid):
        traj = solve_cavity(CavityConfig(E=E, phi0=phi0, boundary=boundary, tol=tol))
        conn = find_connection(traj)
        keep = traj.s <= conn.sigma
        a, b = traj.state_at(min(s_measure, conn.sigma))
        v_measure = a * b ** (E.d - 1)
        family.append(
            FamilyCurve(
                phi0=phi0,
                s=traj.s[keep],
                v=traj.v[keep],
                sigma=conn.sigma,
                step_measure=v_measure - traj.cfg.v0,
            )
        )
    return family
