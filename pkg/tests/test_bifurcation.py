import math

import numpy as np
import pytest

from utils.bifurcation import (
    epsilon_tau,
    extrapolate_to_zero,
    figure_one_family,
    sweep,
    verify_limits,
    verify_rescaling,
)
from utils.cavity_solver import StressFree
from utils.errors import GridViolation, HypothesisViolation, OutOfRangeError
from utils.stored_energy import ScalarModel, StoredEnergy, eval_phi11

GRID = [0.025, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]


@pytest.fixture(scope="module")
def curve(energy):
    return sweep(energy, StressFree(), GRID, keep_trajectories=True)


def test_epsilon_tau(energy):
    assert epsilon_tau(energy, 2.0) == pytest.approx(0.1)
    assert epsilon_tau(energy, 0.0) == pytest.approx(1.0 / 6.0)


def test_extrapolation_of_a_geometric_sequence():
    phi0 = [0.2, 0.1, 0.05]
    values = [1.0 + 0.5**k for k in (2, 3, 4)]
    value, method = extrapolate_to_zero(phi0, values)
    assert method == "aitken"
    assert value == pytest.approx(1.0, abs=1e-12)


def test_extrapolation_falls_back_to_linear():
    value, method = extrapolate_to_zero([0.1, 0.2], [2.1, 2.2])
    assert method == "richardson"
    assert value == pytest.approx(2.0)
    with pytest.raises(OutOfRangeError):
        extrapolate_to_zero([0.1], [1.0])


def test_sweep_refuses_energies_without_a_speed_floor():
    E = StoredEnergy(ScalarModel.quadratic(), ScalarModel.log_entropy(), 2)
    with pytest.raises(HypothesisViolation):
        sweep(E, StressFree(), [0.5])


@pytest.mark.slow
def test_dynamic_curve_is_an_increasing_shock_branch(energy, curve):
    assert curve.ok_fraction == 1.0
    good = curve.good()
    assert [p.phi0 for p in good] == GRID
    assert all(p.kind == "shock" and p.jump > 0 and p.lax_ok for p in good)
    assert all(p.sigma >= energy.nu for p in good)
    Lam = np.array([p.Lambda for p in good])
    assert np.all(np.diff(Lam) > 0)
    assert np.all(Lam > curve.Lambda0)
    assert curve.sigma0 == pytest.approx(math.sqrt(eval_phi11(energy, curve.Lambda0, curve.Lambda0)))


@pytest.mark.slow
def test_dynamic_curve_lies_above_equilibrium_near_the_origin(curve):
    eq = {p.phi0: p.lam for p in curve.equilibrium.points}
    for p in curve.good():
        if p.phi0 <= 0.2:
            assert p.Lambda >= eq[p.phi0]


@pytest.mark.slow
def test_small_speed_limits(curve):
    report = verify_limits(curve)
    checks = {c.name: c for c in report.checks}
    for name in (
        "stretch_converges",
        "shock_speed_converges",
        "shock_strength_vanishes",
        "constant_boundary_volume",
        "envelope",
        "stretch_intercept",
        "equilibrium_intercept",
        "volume_ratio_converges",
    ):
        assert checks[name].passed, checks[name]
    lo, hi = curve.inner.bracket
    assert lo - 1e-3 <= report.Lambda_extrapolated <= hi + 1e-3
    assert abs(report.lambda_extrapolated - curve.Lambda0) <= 1e-3
    assert "Lambda(0+) extrapolated" in report.to_text()


@pytest.mark.slow
def test_curve_columns(curve):
    cols = curve.columns()
    assert list(cols) == ["phi0", "Lambda", "sigma", "jump", "kind", "status"]
    assert cols["kind"] == ["shock"] * len(GRID)


@pytest.mark.slow
def test_rescaled_profiles_converge(energy):
    report = verify_rescaling(energy, StressFree(), 2.0, [0.2, 0.1, 0.05, 0.025])
    dist = [p.sup_distance for p in report.points]
    assert [p.phi0 for p in report.points] == [0.2, 0.1, 0.05, 0.025]
    assert all(later < earlier for earlier, later in zip(dist, dist[1:]))
    assert report.points[0].flagged
    assert not report.points[-1].flagged
    assert 1.7 <= report.order <= 2.3


def test_rescaling_strict_grid(energy):
    with pytest.raises(GridViolation):
        verify_rescaling(energy, StressFree(), 2.0, [0.5], strict=True)


@pytest.mark.slow
def test_cavity_family(energy):
    family = figure_one_family(energy, StressFree(), [0.1, 1.0])
    assert [f.phi0 for f in family] == [0.1, 1.0]
    for f in family:
        assert f.s[-1] <= f.sigma
        assert np.all(np.diff(f.v) > 0)
    assert family[0].step_measure > family[1].step_measure
