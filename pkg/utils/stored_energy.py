"""Separable isotropic stored energies Phi = sum g(v_i) + h(v_1 ... v_d).

The solver only ever evaluates Phi on radial states (a, b, ..., b), so every
helper here takes the pair (a, b) and the dimension stored on the energy.
All evaluators accept floats or numpy arrays; floats come back as floats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from utils.errors import BracketError, DomainError

logger = logging.getLogger(__name__)

TERM_KINDS = ("power", "inverse_power", "quadratic", "log_entropy")
FAMILIES = ("power_sum", "inverse_power_sum", "quadratic", "log_entropy", "custom")

# Below this relative gap |a - b| / max(a, b) the difference quotients in P
# and R are evaluated as averages of the derivative along [a, b].
GAP_QUADRATURE = 1e-2

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

GRID_BOUNDS = (1e-6, 1e6)
GRID_POINTS = 241

H_BRACKET_START = (0.5, 2.0)
H_BRACKET_EXPANSIONS = 200

NU_FLOOR = 1e-8


def _scalar_or_array(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _falling(alpha: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= alpha - i
    return out


def _signed_inf(x: float) -> float:
    return math.copysign(math.inf, x)


def _power_limit(factor: float, exponent: float, shift: float, at: str) -> float:
    """Limit of factor * (x + shift)**exponent as x -> 0+ or x -> inf."""
    if factor == 0.0:
        return 0.0
    if at == "inf":
        if abs(exponent) < 1e-12:
            return factor
        return _signed_inf(factor) if exponent > 0 else 0.0
    if shift > 0.0:
        return factor * shift ** exponent
    if abs(exponent) < 1e-12:
        return factor
    return 0.0 if exponent > 0 else _signed_inf(factor)


# Limits of (x - 1) ln x and its first three derivatives.
_LOG_ENTROPY_LIMITS = {
    "zero": (math.inf, -math.inf, math.inf, -math.inf),
    "inf": (math.inf, math.inf, 0.0, 0.0),
}


@dataclass(frozen=True)
class Term:
    """One summand of a scalar model.

    power:          c (x + shift)^exponent
    inverse_power:  c (x + shift)^(-exponent)
    quadratic:      c x^2 / 2
    log_entropy:    c (x - 1) ln x
    """

    kind: str
    coefficient: float
    exponent: float = 0.0
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise DomainError(f"unknown term kind {self.kind!r}")
        if self.shift < 0.0:
            raise DomainError(f"term shift must be >= 0, got {self.shift}")

    def _as_power(self) -> Tuple[float, float, float]:
        """(coefficient, exponent, shift) for the kinds that are pure powers."""
        if self.kind == "power":
            return self.coefficient, self.exponent, self.shift
        if self.kind == "inverse_power":
            return self.coefficient, -self.exponent, self.shift
        return 0.5 * self.coefficient, 2.0, 0.0

    def derivative(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        if self.kind == "log_entropy":
            c = self.coefficient
            with np.errstate(divide="ignore", invalid="ignore"):
                if order == 0:
                    return c * (x - 1.0) * np.log(x)
                if order == 1:
                    return c * (np.log(x) + 1.0 - 1.0 / x)
                if order == 2:
                    return c * (1.0 / x + 1.0 / x**2)
                return c * (-1.0 / x**2 - 2.0 / x**3)
        c, alpha, shift = self._as_power()
        factor = c * _falling(alpha, order)
        if factor == 0.0:
            return np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return factor * np.power(x + shift, alpha - order)

    def limit(self, order: int, at: str) -> float:
        if self.kind == "log_entropy":
            return self.coefficient * _LOG_ENTROPY_LIMITS[at][order]
        c, alpha, shift = self._as_power()
        return _power_limit(c * _falling(alpha, order), alpha - order, shift, at)

    def growth_limit(self, k: int) -> float:
        """lim_{x->inf} of the first derivative divided by x**k."""
        if self.kind == "log_entropy":
            return _signed_inf(self.coefficient) if k == 0 else 0.0
        c, alpha, _ = self._as_power()
        return _power_limit(c * alpha, alpha - 1.0 - k, 0.0, "inf")


def _sum_limits(values: Iterable[float]) -> Optional[float]:
    values = list(values)
    has_pos = any(v == math.inf for v in values)
    has_neg = any(v == -math.inf for v in values)
    if has_pos and has_neg:
        return None
    return float(sum(values))


@dataclass(frozen=True)
class ScalarModel:
    """A family of scalar functions (g or h) given as a sum of terms."""

    kind: str
    terms: Tuple[Term, ...]

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise DomainError(f"unknown family {self.kind!r}")
        if not self.terms:
            raise DomainError(f"family {self.kind!r} needs at least one coefficient row")
        for term in self.terms:
            _check_term_constraints(self.kind, term)

    @classmethod
    def power_sum(cls, rows: Sequence[Sequence[float]]) -> "ScalarModel":
        return cls("power_sum", tuple(Term("power", *map(float, r)) for r in rows))

    @classmethod
    def inverse_power_sum(cls, rows: Sequence[Sequence[float]]) -> "ScalarModel":
        return cls("inverse_power_sum", tuple(Term("inverse_power", *map(float, r)) for r in rows))

    @classmethod
    def quadratic(cls, coefficient: float = 1.0) -> "ScalarModel":
        return cls("quadratic", (Term("quadratic", float(coefficient)),))

    @classmethod
    def log_entropy(cls, coefficient: float = 1.0) -> "ScalarModel":
        return cls("log_entropy", (Term("log_entropy", float(coefficient)),))

    @classmethod
    def custom(cls, rows: Sequence[Tuple[str, Sequence[float]]]) -> "ScalarModel":
        return cls("custom", tuple(Term(kind, *map(float, values)) for kind, values in rows))

    def __call__(self, x, order: int = 0):
        total = sum(term.derivative(x, order) for term in self.terms)
        return _scalar_or_array(total)

    def d1(self, x):
        return self(x, 1)

    def d2(self, x):
        return self(x, 2)

    def d3(self, x):
        return self(x, 3)

    def limit(self, order: int, at: str) -> Optional[float]:
        """Closed-form limit of the order-th derivative, None if undecidable termwise."""
        return _sum_limits(term.limit(order, at) for term in self.terms)

    def growth_limit(self, k: int) -> Optional[float]:
        return _sum_limits(term.growth_limit(k) for term in self.terms)


def _check_term_constraints(family: str, term: Term) -> None:
    expected = {
        "power_sum": "power",
        "inverse_power_sum": "inverse_power",
        "quadratic": "quadratic",
        "log_entropy": "log_entropy",
    }.get(family)
    if expected is not None and term.kind != expected:
        raise DomainError(f"family {family!r} cannot hold a {term.kind!r} term")
    if family == "custom":
        return
    if term.coefficient <= 0.0:
        raise DomainError(f"{family}: coefficients must be positive, got {term.coefficient}")
    if family == "power_sum" and not 1.0 <= term.exponent <= 2.0:
        raise DomainError(f"power_sum: exponent must lie in [1, 2], got {term.exponent}")
    if family == "inverse_power_sum" and term.exponent <= 0.0:
        raise DomainError(f"inverse_power_sum: exponent must be positive, got {term.exponent}")


@dataclass(frozen=True)
class RadialState:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise DomainError(f"radial state needs a > 0 and b > 0, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class Derivatives:
    phi1: float
    phi2: float
    phi11: float
    phi12: float
    phi111: float
    phi112: float


@dataclass(frozen=True)
class StoredEnergy:
    g: ScalarModel
    h: ScalarModel
    d: int
    gamma: float = field(init=False)
    gamma0: float = field(init=False)
    nu: float = field(init=False)
    H: float = field(init=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.d}")
        gamma = self.g.growth_limit(self.d - 2)
        if gamma is None:
            gamma = math.nan
        gamma0 = gamma if self.d >= 3 else gamma - float(self.g.d1(0.0))
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "gamma0", float(gamma0))
        object.__setattr__(self, "nu", _nu_estimate(self))
        try:
            H = _invert_h_prime(self.h, 0.0)
        except BracketError:
            logger.warning("h' has no zero inside the expansion limit; H left undefined")
            H = math.nan
        object.__setattr__(self, "H", H)

    def describe(self) -> str:
        return f"d={self.d} g={self.g.kind} h={self.h.kind}"


def reference_energy(d: int = 3) -> StoredEnergy:
    """g(x) = x^2/2, h(x) = (x - 1) ln x."""
    return StoredEnergy(ScalarModel.quadratic(1.0), ScalarModel.log_entropy(1.0), d)


def _nu_estimate(E: StoredEnergy) -> float:
    if E.g.kind == "quadratic":
        return math.sqrt(sum(t.coefficient for t in E.g.terms))
    x = np.geomspace(*GRID_BOUNDS, GRID_POINTS)
    with np.errstate(all="ignore"):
        diag = np.asarray(E.g.d2(x)) + x ** (2 * E.d - 2) * np.asarray(E.h.d2(x**E.d))
    diag = diag[np.isfinite(diag)]
    if diag.size == 0:
        return NU_FLOOR
    return max(math.sqrt(max(float(diag.min()), 0.0)), NU_FLOOR)


def _validate(E: StoredEnergy, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DomainError(f"radial state outside a > 0, b > 0: a={a}, b={b}")
    return a, b, a * b ** (E.d - 1)


def eval_phi(E: StoredEnergy, a, b):
    a, b, v = _validate(E, a, b)
    return _scalar_or_array(E.g(a) + (E.d - 1) * E.g(b) + E.h(v))


def eval_stresses(E: StoredEnergy, a, b) -> Tuple[float, float]:
    """Principal values (Phi_1, Phi_2) of the radial Piola-Kirchhoff stress."""
    a, b, v = _validate(E, a, b)
    d = E.d
    hp = np.asarray(E.h.d1(v))
    phi1 = np.asarray(E.g.d1(a)) + b ** (d - 1) * hp
    phi2 = np.asarray(E.g.d1(b)) + a * b ** (d - 2) * hp
    return _scalar_or_array(phi1), _scalar_or_array(phi2)


def eval_phi11(E: StoredEnergy, a, b):
    a, b, v = _validate(E, a, b)
    return _scalar_or_array(np.asarray(E.g.d2(a)) + b ** (2 * E.d - 2) * np.asarray(E.h.d2(v)))


def eval_derivatives(E: StoredEnergy, st: RadialState) -> Derivatives:
    a, b, v = _validate(E, st.a, st.b)
    d = E.d
    h1, h2, h3 = (float(E.h(v, k)) for k in (1, 2, 3))
    if not all(map(math.isfinite, (h1, h2, h3))):
        raise DomainError(f"h is not evaluable at v = a b^(d-1) = {float(v)}")
    a, b, v = float(a), float(b), float(v)
    return Derivatives(
        phi1=float(E.g.d1(a)) + b ** (d - 1) * h1,
        phi2=float(E.g.d1(b)) + a * b ** (d - 2) * h1,
        phi11=float(E.g.d2(a)) + b ** (2 * d - 2) * h2,
        phi12=b ** (d - 2) * h1 + a * b ** (2 * d - 3) * h2,
        phi111=float(E.g.d3(a)) + b ** (3 * d - 3) * h3,
        phi112=b ** (2 * d - 3) * (2.0 * h2 + v * h3),
    )


def eval_phi111(E: StoredEnergy, a, b):
    a, b, v = _validate(E, a, b)
    return _scalar_or_array(np.asarray(E.g.d3(a)) + b ** (3 * E.d - 3) * np.asarray(E.h.d3(v)))


def eval_phi112(E: StoredEnergy, a, b):
    a, b, v = _validate(E, a, b)
    d = E.d
    return _scalar_or_array(b ** (2 * d - 3) * (2.0 * np.asarray(E.h.d2(v)) + v * np.asarray(E.h.d3(v))))


def _near_diagonal(a, b):
    return np.abs(a - b) <= GAP_QUADRATURE * np.maximum(a, b)


def _segment_average(fn, a, b, weight=None):
    """Mean of fn(x, b) over x = b + r (a - b), r in [0, 1], optionally weighted by weight(r)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    w = _GL_WEIGHTS if weight is None else _GL_WEIGHTS * weight(_GL_NODES)
    with np.errstate(all="ignore"):
        values = fn(b + _GL_NODES * (a - b), b)
    return np.sum(values * w, axis=-1)


def _g_quotient(E: StoredEnergy, a, b):
    """(g'(a) - g'(b)) / (a - b), and g''(b) on the diagonal."""
    near = _near_diagonal(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (np.asarray(E.g.d1(a)) - np.asarray(E.g.d1(b))) / (a - b)
    averaged = _segment_average(lambda x, _: np.asarray(E.g.d2(x)), a, b)
    return np.where(near, averaged, closed)


def eval_P(E: StoredEnergy, st_or_a, b=None):
    """P = Phi_12 + (Phi_1 - Phi_2)/(a - b), continuous up to the diagonal."""
    a, b = _unpack(st_or_a, b)
    a, b, v = _validate(E, a, b)
    d = E.d
    return _scalar_or_array(_g_quotient(E, a, b) + a * b ** (2 * d - 3) * np.asarray(E.h.d2(v)))


def eval_Q(E: StoredEnergy, a, b, s):
    """Q = s^2 - Phi_11(a, b); negative below the sonic curve."""
    return _scalar_or_array(np.asarray(s, dtype=float) ** 2 - np.asarray(eval_phi11(E, a, b)))


def eval_shock_quotients(E: StoredEnergy, a, b) -> Tuple[float, float]:
    """(K, D) with K = (Phi_11(a,b) - S(a,b)) / (b - a) and D = (Phi_11(a,b) - Phi_11(b,b)) / (b - a).

    S is the Rankine-Hugoniot quotient (Phi_1(a,b) - Phi_1(b,b)) / (a - b).
    Both stay finite on the diagonal, where K = -Phi_111(b,b)/2 and
    D = -Phi_111(b,b); a softening energy has 0 < K < D.
    """
    a, b, v = _validate(E, a, b)
    d = E.d
    near = _near_diagonal(a, b)
    vb = b**d
    phi11 = np.asarray(E.g.d2(a)) + b ** (2 * d - 2) * np.asarray(E.h.d2(v))
    with np.errstate(divide="ignore", invalid="ignore"):
        hq = (np.asarray(E.h.d1(v)) - np.asarray(E.h.d1(vb))) / (v - vb)
        S = _g_quotient(E, a, b) + b ** (2 * d - 2) * hq
        K_closed = (phi11 - S) / (b - a)
        D_closed = (phi11 - np.asarray(eval_phi11(E, b, b))) / (b - a)

    def phi111(x, bb):
        return np.asarray(E.g.d3(x)) + bb ** (3 * d - 3) * np.asarray(E.h.d3(x * bb ** (d - 1)))

    K_avg = -_segment_average(phi111, a, b, weight=lambda r: r)
    D_avg = -_segment_average(phi111, a, b)
    K = np.where(near, K_avg, K_closed)
    D = np.where(near, D_avg, D_closed)
    return _scalar_or_array(K), _scalar_or_array(D)


def eval_R(E: StoredEnergy, a, b, s):
    """Rankine-Hugoniot residual (Phi_1(a,b) - Phi_1(b,b))/(a - b) - s^2 = -Q - (b - a) K."""
    a, b, _ = _validate(E, a, b)
    K, _ = eval_shock_quotients(E, a, b)
    s = np.asarray(s, dtype=float)
    return _scalar_or_array(np.asarray(eval_phi11(E, a, b)) - (b - a) * np.asarray(K) - s**2)


def _unpack(st_or_a, b):
    if isinstance(st_or_a, RadialState):
        return st_or_a.a, st_or_a.b
    return st_or_a, b


def chi(E: StoredEnergy, x):
    """chi(x) = Phi_1(x, x) x^(1-d) = h'(x^d) + g'(x) x^(1-d)."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(np.asarray(E.h.d1(x**E.d)) + np.asarray(E.g.d1(x)) * x ** (1 - E.d))


def chi_prime(E: StoredEnergy, x):
    x = np.asarray(x, dtype=float)
    d = E.d
    return _scalar_or_array(
        d * x ** (d - 1) * np.asarray(E.h.d2(x**d))
        + np.asarray(E.g.d2(x)) * x ** (1 - d)
        + (1 - d) * np.asarray(E.g.d1(x)) * x ** (-d)
    )


@dataclass(frozen=True)
class CharacteristicSpeeds:
    """Eigenstructure of the radial first-order system in (a, v, b)."""

    speeds: Tuple[float, float, float]
    right: Tuple[Tuple[float, float, float], ...]
    left: Tuple[Tuple[float, float, float], ...]


def characteristic_speeds(E: StoredEnergy, st: RadialState) -> CharacteristicSpeeds:
    der = eval_derivatives(E, st)
    c = math.sqrt(der.phi11)
    k = (E.d - 1) * der.phi12
    return CharacteristicSpeeds(
        speeds=(c, -c, 0.0),
        right=((1.0, c, 0.0), (1.0, -c, 0.0), (k, 0.0, -der.phi11)),
        left=((c, 1.0, k / c), (c, -1.0, k / c), (0.0, 0.0, 1.0)),
    )


def _invert_h_prime(h: ScalarModel, y: float, tol: float = 1e-14) -> float:
    def f(x):
        return float(h.d1(x)) - y

    lo, hi = H_BRACKET_START
    flo, fhi = f(lo), f(hi)
    for _ in range(H_BRACKET_EXPANSIONS):
        if flo * fhi <= 0.0:
            break
        if flo > 0.0:
            lo /= 2.0
            flo = f(lo)
        else:
            hi *= 2.0
            fhi = f(hi)
    else:
        raise BracketError(f"h'(x) = {y} has no bracketed root; last bracket [{lo:g}, {hi:g}]")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    return brentq(f, lo, hi, xtol=tol * max(1.0, lo), rtol=4 * np.finfo(float).eps, maxiter=500)


def h_prime_inverse(E: StoredEnergy, y: float, tol: float = 1e-14) -> float:
    return _invert_h_prime(E.h, float(y), tol)


# ----------------------------------------------------------------------------
# Hypothesis checks


@dataclass(frozen=True)
class Verdict:
    status: str  # pass | fail | not-applicable
    witness: str = ""
    sampled: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class HypothesisReport:
    energy: str
    verdicts: Dict[str, Verdict]
    gamma: float
    gamma0: float
    H: float
    nu: float
    grid: Tuple[float, float, int]

    def passes(self, *names: str) -> bool:
        return all(self.verdicts[n].ok for n in names)

    @property
    def solvable(self) -> bool:
        return self.passes("H0", "H1", "H2", "H3", "H4")

    def to_text(self) -> str:
        lo, hi, n = self.grid
        lines = [
            f"energy: {self.energy}",
            f"grid: log-spaced [{lo:g}, {hi:g}], {n} points",
            f"gamma = {self.gamma:.17g}",
            f"gamma0 = {self.gamma0:.17g}",
            f"H = {self.H:.17g}",
            f"nu = {self.nu:.17g}",
        ]
        for name, verdict in self.verdicts.items():
            how = "sampled" if verdict.sampled else "closed-form"
            line = f"{name}: {verdict.status} ({how})"
            if verdict.witness:
                line += f" witness: {verdict.witness}"
            lines.append(line)
        return "\n".join(lines) + "\n"


def _first_violation(x: np.ndarray, ok: np.ndarray, label: str) -> str:
    bad = np.flatnonzero(~ok)
    return f"{label} at x={x[bad[0]]:.6g}" if bad.size else ""


def _grid_verdict(x: np.ndarray, values: np.ndarray, predicate, label: str) -> Verdict:
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values) & predicate(values)
    witness = _first_violation(x, ok, label)
    return Verdict("fail" if witness else "pass", witness, sampled=True)


def _limit_is(model: ScalarModel, order: int, at: str, target: float, x: np.ndarray) -> Tuple[bool, bool]:
    """(holds, sampled) for lim of the order-th derivative at 0+ or inf being target (+-inf)."""
    closed = model.limit(order, at)
    if closed is not None:
        return closed == target, False
    # Two outer decades of the grid, ordered toward the endpoint.
    span = x[:41][::-1] if at == "zero" else x[-41:]
    vals = np.asarray(model(span, order), dtype=float)
    steps = np.diff(vals)
    trend = np.all(steps > 0) if target > 0 else np.all(steps < 0)
    return bool(trend and np.sign(vals[-1]) == np.sign(target)), True


def check_hypotheses(E: StoredEnergy) -> HypothesisReport:
    lo, hi = GRID_BOUNDS
    x = np.geomspace(lo, hi, GRID_POINTS)
    d = E.d
    g, h = E.g, E.h
    verdicts: Dict[str, Verdict] = {}

    with np.errstate(all="ignore"):
        g_at_zero = [g.limit(k, "zero") for k in range(4)]
        g_grid = [np.asarray(g(x, k), dtype=float) for k in range(4)]
        h_grid = [np.asarray(h(x, k), dtype=float) for k in range(4)]

        bad = [k for k, v in enumerate(g_at_zero) if v is None or not math.isfinite(v)]
        if bad:
            verdicts["H0"] = Verdict("fail", f"g^({bad[0]})(0) is not finite")
        else:
            nonfinite = [f"g^({k})" for k in range(4) if not np.all(np.isfinite(g_grid[k]))]
            nonfinite += [f"h^({k})" for k in range(4) if not np.all(np.isfinite(h_grid[k]))]
            verdicts["H0"] = Verdict("fail" if nonfinite else "pass", ", ".join(nonfinite), sampled=bool(nonfinite))

        g2_ok = g_at_zero[2] is not None and g_at_zero[2] > 0
        v = _grid_verdict(x, g_grid[2], lambda y: y > 0, "g''<=0")
        if v.ok and not g2_ok:
            v = Verdict("fail", "g''(0)<=0", sampled=True)
        if v.ok:
            v = _grid_verdict(x, h_grid[2], lambda y: y > 0, "h''<=0")
        if v.ok:
            at0, s0 = _limit_is(h, 0, "zero", math.inf, x)
            atinf, s1 = _limit_is(h, 0, "inf", math.inf, x)
            if not at0:
                v = Verdict("fail", "h does not blow up at 0+", sampled=s0)
            elif not atinf:
                v = Verdict("fail", "h does not blow up at infinity", sampled=s1)
        verdicts["H1"] = v

        v = _grid_verdict(x, g_grid[3], lambda y: y <= 0, "g'''>0")
        if v.ok and g_at_zero[3] is not None and g_at_zero[3] > 0:
            v = Verdict("fail", "g'''(0)>0", sampled=True)
        if v.ok:
            v = _grid_verdict(x, h_grid[3], lambda y: y < 0, "h'''>=0")
        verdicts["H2"] = v

        if math.isfinite(E.gamma) and E.gamma >= 0:
            verdicts["H3"] = Verdict("pass", f"gamma={E.gamma:g}")
        else:
            verdicts["H3"] = Verdict("fail", f"g'(x)/x^{d - 2} -> {E.gamma:g} (unbounded or negative)")

        at0, s0 = _limit_is(h, 1, "zero", -math.inf, x)
        atinf, s1 = _limit_is(h, 1, "inf", math.inf, x)
        if at0 and atinf:
            verdicts["H4"] = Verdict("pass", sampled=s0 or s1)
        else:
            side = "0+ (h' -> -inf)" if not at0 else "infinity (h' -> +inf)"
            verdicts["H4"] = Verdict("fail", f"limit fails at {side}", sampled=s0 or s1)

        diag = g_grid[2] + x ** (2 * d - 2) * np.asarray(h(x**d, 2), dtype=float)
        v = _grid_verdict(x, diag, lambda y: y >= E.nu**2 * (1 - 1e-12), "Phi11(x,x)<nu^2")
        if v.ok:
            v = Verdict("pass", f"min Phi11(x,x)={np.nanmin(diag):.6g}, nu={E.nu:.6g}", sampled=True)
        verdicts["H5"] = v

        weighted = np.asarray(h(x, 2), dtype=float) * x ** (2.0 - 2.0 / d)
        tail = weighted[-41:]
        verdicts["H5'"] = Verdict(
            "pass" if np.nanmax(tail) > NU_FLOOR else "fail",
            f"h''(x)x^(2-2/d) at x={x[-1]:g}: {weighted[-1]:.6g}",
            sampled=True,
        )

        v = _grid_verdict(x, np.asarray(chi_prime(E, x), dtype=float), lambda y: y > 0, "chi'<=0")
        if v.ok:
            hx = h_grid[1][:41] * x[:41]
            if not np.nanmax(hx) < 0:
                v = Verdict("fail", f"h'(x)x >= 0 near 0+ (max {np.nanmax(hx):.6g})", sampled=True)
        verdicts["H6"] = v

        verdicts["H7"] = _grid_verdict(x, g_grid[2] * x + g_grid[1], lambda y: y >= -1e-14, "(g'x)'<0")
        verdicts["H8"] = _grid_verdict(x, g_grid[3] * x + g_grid[2], lambda y: y >= -1e-14, "(g''x)'<0")

        # Baker-Ericksen on neighbouring grid pairs: (x g'(x) - y g'(y))/(x - y) > 0.
        xg = x * g_grid[1]
        be = np.diff(xg) / np.diff(x)
        verdicts["BE"] = _grid_verdict(x[:-1], be, lambda y: y > 0, "Baker-Ericksen quotient<=0")

    report = HypothesisReport(
        energy=E.describe(),
        verdicts=verdicts,
        gamma=E.gamma,
        gamma0=E.gamma0,
        H=E.H,
        nu=E.nu,
        grid=(lo, hi, GRID_POINTS),
    )
    logger.info("hypotheses for %s: %s", E.describe(), {k: v.status for k, v in verdicts.items()})
    return report
