import numpy as np
import pytest

from utils.cavity_solver import StressFree
from utils.errors import OutOfRangeError, SlowConvergenceWarning
from utils.inner_limit import (
    chi_inverse,
    lambda0_repr1,
    lambda0_repr2,
    lower_bounds,
    repr1_integrand,
    solve_equilibrium,
    solve_equilibrium_curve,
    solve_inner,
)
from utils.stored_energy import chi


def test_bracket_converges(inner_solution):
    sol = inner_solution
    assert sol.converged
    assert 2 * sol.half_width <= 1e-5 * (1 + 1e-6)
    assert sol.Lambda0 > 1.0
    assert sol.xi0 == pytest.approx(1e-3)


def test_bracket_contains_the_critical_stretch(inner_solution):
    sol = inner_solution
    assert np.all(sol.a0 < sol.Lambda0)
    assert np.all(sol.b0 > sol.Lambda0)
    assert np.all(np.diff(sol.a0) > 0)
    assert np.all(np.diff(sol.b0) < 0)


def test_profile_bounds(inner_solution):
    sol = inner_solution
    xi = sol.xi
    assert np.all(sol.psi0 > np.maximum(1.0, sol.Lambda0 * xi))
    assert np.all(sol.psi0 < 1.0 + sol.Lambda0 * xi)


def test_bracket_width_decays(inner_solution):
    sol = inner_solution
    width = sol.b0 - sol.a0
    at_one = float(np.interp(1.0, sol.xi, width))
    beyond = sol.xi >= 1.0
    assert np.all(width[beyond] * sol.xi[beyond] <= at_one * (1 + 1e-6))


def test_volume_ratio_tends_to_the_cube(energy, inner_solution):
    sol = inner_solution
    lam = sol.Lambda0
    assert abs(sol.delta0[-1] - lam**energy.d) <= energy.d * lam ** (energy.d - 1) * 2 * sol.half_width
    assert np.all(sol.delta0 > 0)


def test_integrand_decays_fast(energy, inner_solution):
    sol = inner_solution
    far = sol.xi >= 0.1 * sol.xi[-1]
    xi, a, b = sol.xi[far], sol.a0[far], sol.b0[far]
    values = np.abs(repr1_integrand(energy, xi, a, b))
    slope = np.polyfit(np.log(xi), np.log(values), 1)[0]
    assert slope < -1.7


def test_first_representation(inner_solution):
    sol = inner_solution
    rep = lambda0_repr1(sol)
    assert rep.value == pytest.approx(sol.Lambda0_repr1)
    assert abs(rep.value - sol.Lambda0) <= sol.half_width + 2 * rep.uncertainty + 1e-9


def test_second_representation(inner_solution):
    sol = inner_solution
    rep = lambda0_repr2(sol)
    assert sol.Lambda0_repr2 == pytest.approx(rep.value)
    assert abs(rep.value - sol.Lambda0) <= 5 * sol.half_width + 2 * rep.uncertainty + 1e-9


def test_lower_bounds(energy, inner_solution):
    bounds = {b.name: b for b in lower_bounds(inner_solution)}
    root = bounds["v0^(1/d)"]
    assert root.applicable and root.holds
    assert root.value == pytest.approx(1.0)
    stress = bounds["chi^-1(h'(v0))"]
    assert stress.applicable and stress.holds
    assert chi(energy, stress.value) == pytest.approx(0.0, abs=1e-12)


def test_chi_inverse(energy):
    assert chi_inverse(energy, 1.0) == pytest.approx(1.0, abs=1e-12)
    x = chi_inverse(energy, 3.0)
    assert chi(energy, x) == pytest.approx(3.0, rel=1e-12)


def test_psi_delta_at_zero_is_exact(inner_solution):
    assert inner_solution.psi_delta_at(0.0) == (1.0, inner_solution.v0)
    with pytest.raises(OutOfRangeError):
        inner_solution.state_at(10 * inner_solution.xi[-1])


def test_slow_convergence_warns(energy):
    with pytest.warns(SlowConvergenceWarning):
        sol = solve_inner(energy, energy.H, xi_max=2.0, representations=False)
    assert not sol.converged
    assert sol.xi[-1] == pytest.approx(2.0)


def test_equilibrium_matches_the_inner_profile(energy, inner_solution):
    for phi0 in (0.2, 0.5):
        assert inner_solution.xi[-1] > 1.0 / phi0
        lam = solve_equilibrium(energy, phi0).lam
        _, b0 = inner_solution.state_at(1.0 / phi0)
        assert lam == pytest.approx(b0, abs=1e-7)


def test_equilibrium_curve_is_increasing_and_starts_at_the_critical_stretch(energy, inner_solution):
    grid = [0.02, 0.1, 0.3, 0.6, 1.0]
    curve = solve_equilibrium_curve(energy, StressFree(), grid)
    assert [p.status for p in curve.points] == ["ok"] * len(grid)
    assert np.all(np.diff(curve.lam) > 0)
    assert np.all(curve.lam > inner_solution.Lambda0)
    assert abs(curve.lam[0] - inner_solution.Lambda0) < 1e-2
    assert list(curve.columns()) == ["phi0", "lambda"]


def test_equilibrium_rejects_non_positive_radius(energy):
    with pytest.raises(OutOfRangeError):
        solve_equilibrium(energy, 0.0)
