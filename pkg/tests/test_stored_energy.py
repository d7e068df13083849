import math

import numpy as np
import pytest
from scipy.integrate import quad

from utils.errors import DomainError
from utils.stored_energy import (
    RadialState,
    ScalarModel,
    StoredEnergy,
    characteristic_speeds,
    check_hypotheses,
    chi,
    eval_derivatives,
    eval_P,
    eval_phi,
    eval_phi11,
    eval_phi111,
    eval_phi112,
    eval_Q,
    eval_R,
    eval_shock_quotients,
    eval_stresses,
    h_prime_inverse,
)


def h_prime(x):
    return math.log(x) + 1.0 - 1.0 / x


def test_reference_values_on_the_unit_state(energy):
    der = eval_derivatives(energy, RadialState(1.0, 1.0))
    assert der.phi11 == pytest.approx(3.0, rel=1e-14)
    assert der.phi111 == pytest.approx(-3.0, rel=1e-14)
    assert der.phi1 == der.phi2
    assert eval_phi(energy, 1.0, 1.0) == pytest.approx(1.5)


def test_stresses_are_symmetric_on_the_diagonal(energy, energy_d2):
    for E in (energy, energy_d2):
        for b in (0.3, 1.0, 2.7):
            phi1, phi2 = eval_stresses(E, b, b)
            assert abs(phi1 - phi2) <= 1e-12 * max(1.0, abs(phi1))


def test_P_examples(energy):
    assert eval_P(energy, RadialState(0.5, 1.0)) == pytest.approx(4.0, rel=1e-13)
    for b in (0.5, 1.0, 1.7):
        assert eval_P(energy, b, b) == pytest.approx(eval_phi11(energy, b, b), rel=1e-13)
    for eps in (1e-2, 1e-3, 1e-4):
        assert abs(eval_P(energy, 1.0 - eps, 1.0 + eps) - 3.0) <= 20 * eps


def test_P_difference_quotient_limit(energy):
    b = 1.3
    der = eval_derivatives(energy, RadialState(b, b))
    limit = 0.5 * (der.phi112 - der.phi111)
    errors = []
    for eps in (1e-4, 1e-5):
        a = b - eps
        quotient = (eval_P(energy, a, b) - eval_phi11(energy, a, b)) / (a - b)
        errors.append(abs(quotient - limit))
    assert errors[1] < 1e-2
    assert errors[1] < 0.2 * errors[0] + 1e-8


def test_Q_examples(energy):
    assert abs(eval_Q(energy, 1.0, 1.0, math.sqrt(3.0))) < 1e-14
    assert eval_Q(energy, 1.0, 2.0, 0.0) == pytest.approx(-6.0, rel=1e-14)
    assert eval_Q(energy, 0.7, 1.1, 0.0) < 0


def test_R_examples(energy):
    expected = 1.0 + 2.0 * (h_prime(1.0) - h_prime(0.5))
    assert eval_R(energy, 0.5, 1.0, 0.0) == pytest.approx(expected, rel=1e-13)
    b = 1.4
    s = math.sqrt(eval_phi11(energy, b, b))
    assert abs(eval_R(energy, b, b, s)) < 1e-13


def test_R_is_continuous_at_the_diagonal(energy):
    b, s = 1.2, 0.8
    on_diagonal = eval_R(energy, b, b, s)
    gaps = [abs(eval_R(energy, b - eps, b, s) - on_diagonal) for eps in (1e-3, 1e-5, 1e-8)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-6


def test_third_derivatives_match_eval_derivatives(energy, energy_d2):
    for E in (energy, energy_d2):
        for a, b in ((0.4, 1.3), (1.0, 1.0), (2.2, 0.7)):
            der = eval_derivatives(E, RadialState(a, b))
            assert eval_phi111(E, a, b) == pytest.approx(der.phi111, rel=1e-12)
            assert eval_phi112(E, a, b) == pytest.approx(der.phi112, rel=1e-12)


def test_shock_quotients_on_the_diagonal(energy):
    for b in (0.5, 1.0, 1.7):
        K, D = eval_shock_quotients(energy, b, b)
        phi111 = eval_phi111(energy, b, b)
        assert K == pytest.approx(-0.5 * phi111, rel=1e-12)
        assert D == pytest.approx(-phi111, rel=1e-12)


@pytest.mark.parametrize("gap", [0.3, 0.02, 0.005, 1e-7])
def test_shock_quotients_match_their_integrals(energy, gap):
    b = 1.2
    a = b - gap
    K, D = eval_shock_quotients(energy, a, b)
    K_ref = -quad(lambda r: r * eval_phi111(energy, b - r * gap, b), 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0]
    D_ref = -quad(lambda r: eval_phi111(energy, b - r * gap, b), 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0]
    assert K == pytest.approx(K_ref, rel=1e-9)
    assert D == pytest.approx(D_ref, rel=1e-9)


def test_softening_energy_orders_the_quotients(energy, energy_d2):
    rng = np.random.default_rng(3)
    for E in (energy, energy_d2):
        b = rng.uniform(0.5, 2.5, size=200)
        a = b * rng.uniform(0.05, 1.0, size=200)
        K, D = eval_shock_quotients(E, a, b)
        assert np.all(K > 0.0)
        assert np.all(K < D)
        s = rng.uniform(0.0, 2.0, size=200)
        assert np.allclose(eval_R(E, a, b, s), -eval_Q(E, a, b, s) - (b - a) * K, rtol=1e-12, atol=1e-12)


def test_evaluators_accept_arrays(energy):
    a = np.array([0.5, 1.0, 1.5])
    b = np.array([1.0, 1.0, 2.0])
    q = eval_Q(energy, a, b, 0.0)
    assert q.shape == (3,)
    assert q[1] == pytest.approx(-3.0)
    assert isinstance(eval_P(energy, 0.5, 1.0), float)


def test_derivatives_match_finite_differences(energy):
    rng = np.random.default_rng(7)
    d = energy.d
    for a, b in rng.uniform(0.3, 3.0, size=(1000, 2)):
        der = eval_derivatives(energy, RadialState(a, b))
        ha, hb = 1e-6 * a, 1e-6 * b

        phi1_fd = (eval_phi(energy, a + ha, b) - eval_phi(energy, a - ha, b)) / (2 * ha)
        phi2_fd = (eval_phi(energy, a, b + hb) - eval_phi(energy, a, b - hb)) / (2 * hb) / (d - 1)
        assert abs(phi1_fd - der.phi1) <= 1e-6 * max(1.0, abs(der.phi1))
        assert abs(phi2_fd - der.phi2) <= 1e-6 * max(1.0, abs(der.phi2))

        def first(x, y):
            return eval_stresses(energy, x, y)[0]

        phi11_fd = (first(a + ha, b) - first(a - ha, b)) / (2 * ha)
        phi12_fd = (first(a, b + hb) - first(a, b - hb)) / (2 * hb) / (d - 1)
        assert abs(phi11_fd - der.phi11) <= 1e-5 * max(1.0, abs(der.phi11))
        assert abs(phi12_fd - der.phi12) <= 1e-5 * max(1.0, abs(der.phi12))


def test_third_derivatives_match_finite_differences(energy):
    rng = np.random.default_rng(11)
    d = energy.d
    for a, b in rng.uniform(0.4, 2.5, size=(200, 2)):
        der = eval_derivatives(energy, RadialState(a, b))
        ha, hb = 1e-5 * a, 1e-5 * b
        phi111_fd = (eval_phi11(energy, a + ha, b) - eval_phi11(energy, a - ha, b)) / (2 * ha)
        phi112_fd = (eval_phi11(energy, a, b + hb) - eval_phi11(energy, a, b - hb)) / (2 * hb) / (d - 1)
        assert abs(phi111_fd - der.phi111) <= 1e-5 * max(1.0, abs(der.phi111))
        assert abs(phi112_fd - der.phi112) <= 1e-5 * max(1.0, abs(der.phi112))


def test_sign_structure_under_softening(energy):
    grid = np.geomspace(0.05, 20.0, 25)
    for b in grid:
        for a in grid[grid <= b]:
            der = eval_derivatives(energy, RadialState(a, b))
            assert der.phi11 > 0
            assert der.phi111 < 0
            assert eval_P(energy, a, b) > 0


def test_domain_errors(energy):
    with pytest.raises(DomainError):
        RadialState(0.0, 1.0)
    with pytest.raises(DomainError):
        eval_P(energy, -1.0, 1.0)
    with pytest.raises(DomainError):
        StoredEnergy(ScalarModel.quadratic(), ScalarModel.log_entropy(), 1)


def test_family_constraints():
    with pytest.raises(DomainError):
        ScalarModel.power_sum([(1.0, 3.0, 0.0)])
    with pytest.raises(DomainError):
        ScalarModel.inverse_power_sum([(-1.0, 1.0, 1.0)])
    with pytest.raises(DomainError):
        ScalarModel.custom([("cubic", (1.0,))])
    with pytest.raises(DomainError):
        ScalarModel("quadratic", ())


def test_h_prime_inverse(energy):
    assert h_prime_inverse(energy, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert h_prime_inverse(energy, h_prime(2.0)) == pytest.approx(2.0, rel=1e-13)
    x = h_prime_inverse(energy, 5.0)
    assert abs(h_prime(x) - 5.0) <= 1e-10
    assert h_prime_inverse(energy, -40.0) > 0


def test_cached_constants(energy):
    assert energy.gamma == 1.0
    assert energy.gamma0 == 1.0
    assert energy.H == pytest.approx(1.0, abs=1e-12)
    assert energy.nu == 1.0


def test_reference_energy_passes_every_hypothesis(energy):
    report = check_hypotheses(energy)
    for name in ("H0", "H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "H5'", "BE"):
        assert report.verdicts[name].ok, (name, report.verdicts[name])
    assert report.solvable
    assert report.gamma == 1.0
    assert report.grid == (1e-6, 1e6, 241)
    text = report.to_text()
    assert "gamma = 1" in text
    assert "nu = 1" in text


def test_quadratic_g_in_the_plane_violates_H3():
    E = StoredEnergy(ScalarModel.quadratic(), ScalarModel.log_entropy(), 2)
    report = check_hypotheses(E)
    assert not report.verdicts["H3"].ok
    assert "unbounded" in report.verdicts["H3"].witness
    assert not report.solvable


def test_bounded_g_in_the_plane(energy_d2):
    report = check_hypotheses(energy_d2)
    assert report.verdicts["H3"].ok
    assert energy_d2.gamma == 0.0
    assert energy_d2.gamma0 == pytest.approx(1.0)
    assert float(energy_d2.g.d1(0.5)) < 0
    assert report.solvable


def test_H4_fails_without_logarithmic_blow_up():
    E = StoredEnergy(ScalarModel.quadratic(), ScalarModel.power_sum([(1.0, 2.0, 0.0)]), 3)
    report = check_hypotheses(E)
    assert not report.verdicts["H4"].ok
    assert not report.verdicts["H1"].ok
    assert math.isnan(E.H)


def test_chi_and_characteristic_speeds(energy):
    assert chi(energy, 1.0) == pytest.approx(1.0)
    lam = 1.7
    phi1, _ = eval_stresses(energy, lam, lam)
    assert chi(energy, lam) == pytest.approx(lam ** (1 - energy.d) * phi1, rel=1e-14)
    speeds = characteristic_speeds(energy, RadialState(1.0, 1.0))
    assert speeds.speeds[0] == pytest.approx(math.sqrt(3.0))
    assert speeds.speeds[1] == pytest.approx(-math.sqrt(3.0))
    assert speeds.speeds[2] == 0.0
