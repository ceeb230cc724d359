import math

import numpy as np
import pytest

from helpers import commuting_pair, noncommuting_pair
from qdiv.azrenyi import fidelity, sandwiched_renyi
from qdiv.channels import random_state, random_unitary
from qdiv.fdiv import classical_f_div, eta, g_s, power, relative_entropy, renyi_alpha, renyi_from_quasi, standard_f_div
from qdiv.measured import (
    Measurement,
    apply_measurement,
    measured_projective_opt,
    measured_renyi,
    pinched_ladder,
    pinsker_certificate,
    renyi_chain_report,
    variational_measured_renyi,
)

PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])
MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]])


# measurements ----------------------------------------------------------------------


def test_measurement_flags():
    M = Measurement.from_basis(random_unitary(3, 0))
    assert M.projective and M.rank_one and M.outcomes == 3
    coarse = Measurement.from_projections([np.diag([1.0, 1.0, 0.0]), np.diag([0.0, 0.0, 1.0])])
    assert coarse.projective and not coarse.rank_one
    trine = Measurement(np.array([np.eye(2) / 3] * 3))
    assert not trine.projective


@pytest.mark.parametrize(
    "effects",
    [np.array([np.diag([1.0, 0.0])]), np.array([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])]), np.ones((2, 2))],
    ids=["incomplete", "negative", "bad-shape"],
)
def test_measurement_validation(effects):
    with pytest.raises(ValueError):
        Measurement(effects)


def test_apply_measurement_in_eigenbasis():
    rho = random_state(3, seed=3)
    M = Measurement.from_basis(rho.eigenvectors)
    np.testing.assert_allclose(apply_measurement(M, rho), rho.eigenvalues, atol=1e-12)


def test_apply_trivial_measurement():
    rho = 2.5 * random_state(2, seed=1).matrix
    assert apply_measurement(Measurement(np.array([np.eye(2)])), rho) == pytest.approx([2.5])


def test_apply_measurement_plus_minus():
    M = Measurement.from_projections([PLUS, MINUS])
    np.testing.assert_allclose(apply_measurement(M, np.diag([1.0, 0.0])), [0.5, 0.5])


def test_apply_measurement_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_measurement(Measurement.from_basis(np.eye(2)), np.eye(3) / 3)


@pytest.mark.parametrize("f", [eta(), power(0.5), g_s(1.0)], ids=lambda f: f.name)
def test_refinement_never_decreases(f):
    rng = np.random.default_rng(2)
    rho, sigma = random_state(3, seed=rng), random_state(3, seed=rng)
    for _ in range(5):
        U = random_unitary(3, rng)
        P = [U[:, :2] @ U[:, :2].conj().T, U[:, 2:] @ U[:, 2:].conj().T]
        W = random_unitary(3, rng)
        half = [np.outer(W[:, k], W[:, k].conj()) / 2 for k in range(3)]
        M = Measurement(np.array([p / 2 for p in P] + half))
        fine = M.refine()
        assert fine.rank_one
        coarse = classical_f_div(f, apply_measurement(M, rho), apply_measurement(M, sigma))
        refined = classical_f_div(f, apply_measurement(fine, rho), apply_measurement(fine, sigma))
        assert refined >= coarse - 1e-12


# projective optimizer ----------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3])
def test_projective_commuting_reaches_standard(dim):
    rho, sigma = commuting_pair(5, dim=dim)
    res = measured_projective_opt(eta(), rho, sigma, restarts=2)
    assert res.value == pytest.approx(relative_entropy(rho, sigma), abs=1e-8)


def test_projective_noncommuting_strictly_below_standard(qubit_pair):
    rho, sigma = qubit_pair
    res = measured_projective_opt(eta(), rho, sigma)
    assert res.value < relative_entropy(rho, sigma) - 1e-4
    assert res.grid_value is not None
    assert res.value >= res.grid_value - 1e-12


def test_projective_equal_arguments():
    rho = random_state(3, seed=4)
    assert measured_projective_opt(g_s(1.0), rho, rho, restarts=2).value == pytest.approx(0.0, abs=1e-12)


def test_projective_value_matches_returned_measurement(qutrit_pair):
    rho, sigma = qutrit_pair
    res = measured_projective_opt(power(0.5), rho, sigma, restarts=4)
    M = res.argument
    assert M.projective and M.rank_one
    value = classical_f_div(power(0.5), apply_measurement(M, rho), apply_measurement(M, sigma))
    assert value == pytest.approx(res.value, abs=1e-12)
    assert res.stationarity < 1e-6


def test_projective_infinite_witness():
    res = measured_projective_opt(eta(), PLUS, np.diag([1.0, 0.0]))
    assert res.value == math.inf


@pytest.mark.parametrize("seed", range(3))
def test_isometry_monotonicity(seed):
    rho, sigma = noncommuting_pair(seed)
    V = random_unitary(3, seed)[:, :2]
    base = measured_projective_opt(eta(), rho, sigma).value
    lifted = measured_projective_opt(eta(), V @ rho @ V.conj().T, V @ sigma @ V.conj().T, restarts=8, seed=seed)
    assert lifted.value >= base - 1e-7


# variational formula --------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.5, 2.5])
def test_variational_commuting_attains_classical(alpha):
    rho, sigma = commuting_pair(6, dim=3)
    res = variational_measured_renyi(alpha, rho, sigma)
    assert res.value == pytest.approx(standard_f_div(power(alpha), rho, sigma), abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_variational_agrees_with_projective_at_two(seed):
    rho, sigma = noncommuting_pair(100 + seed)
    var = variational_measured_renyi(2.0, rho, sigma)
    proj = measured_projective_opt(power(2.0), rho, sigma)
    assert var.value == pytest.approx(proj.value, abs=1e-4)


def test_variational_half_is_fidelity(qubit_pair):
    rho, sigma = qubit_pair
    assert measured_renyi(0.5, rho, sigma) == pytest.approx(-2 * math.log(fidelity(rho, sigma)), abs=1e-6)


@pytest.mark.parametrize("alpha", [0.6, 1.5, 3.0])
def test_variational_below_sandwiched(alpha, qutrit_pair):
    rho, sigma = qutrit_pair
    q_star = math.exp((alpha - 1) * sandwiched_renyi(alpha, rho, sigma))
    sign = -1.0 if alpha < 1 else 1.0
    value = variational_measured_renyi(alpha, rho, sigma).value
    assert value <= sign * q_star + 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_variational_dominates_single_measurements(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = random_state(3, seed=rng), random_state(3, seed=rng)
    value = variational_measured_renyi(1.5, rho, sigma).value
    for _ in range(5):
        M = Measurement.from_basis(random_unitary(3, rng))
        single = classical_f_div(power(1.5), apply_measurement(M, rho), apply_measurement(M, sigma))
        assert single <= value + 1e-9


def test_variational_result_fields(qubit_pair):
    res = variational_measured_renyi(0.3, *qubit_pair)
    assert res.stationarity < 1e-5
    assert res.argument.is_invertible
    assert "omega_real" in res.to_dict()


@pytest.mark.parametrize("alpha", [0.0, 1.0, -2.0])
def test_variational_rejects_bad_order(alpha, qubit_pair):
    with pytest.raises(ValueError):
        variational_measured_renyi(alpha, *qubit_pair)


# Pinsker ---------------------------------------------------------------------------------


def test_pinsker_equal_states():
    rho = random_state(2, seed=3).matrix
    res = pinsker_certificate(eta(), rho, rho)
    assert res.lhs == pytest.approx(0.0, abs=1e-15) and res.passed


def test_pinsker_diagonal_example():
    res = pinsker_certificate(eta(), np.diag([0.9, 0.1]), np.diag([0.5, 0.5]))
    assert res.lhs == pytest.approx(0.32)
    assert res.rhs == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2))
    assert res.passed


@pytest.mark.parametrize("seed", range(5))
def test_pinsker_random_qubits(seed):
    rho, sigma = noncommuting_pair(seed)
    assert pinsker_certificate(g_s(1.0), rho, sigma).passed


def test_pinsker_requires_normalized_function(qubit_pair):
    with pytest.raises(ValueError):
        pinsker_certificate(power(0.5), *qubit_pair)
    assert pinsker_certificate(power(0.5).normalized(), *qubit_pair).passed


# Renyi chain -------------------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 2.0])
def test_chain_commuting_all_equal(alpha):
    rho, sigma = commuting_pair(12)
    report = renyi_chain_report(alpha, rho, sigma, restarts=2)
    assert report.passed
    for v in (report.d_star, report.d_projective, report.d_variational, *report.ladder):
        assert v == pytest.approx(report.d_standard, abs=1e-8)


def test_chain_noncommuting_strict_at_two(qubit_pair):
    report = renyi_chain_report(2.0, *qubit_pair)
    assert report.passed
    assert report.d_measured < report.d_star - 1e-4
    assert report.d_star < report.d_standard - 1e-4
    assert [name for name, _ in report.ordered()] == ["measured", "sandwiched", "standard"]


def test_chain_relative_entropy_case(qubit_pair):
    report = renyi_chain_report(1.0, *qubit_pair)
    assert report.passed
    assert report.d_measured < report.d_standard - 1e-4


def test_ladder_is_non_decreasing_and_bounded(qubit_pair):
    rho, sigma = qubit_pair
    ladder = pinched_ladder(1.5, rho, sigma, n_max=3)
    assert len(ladder) == 3
    assert all(b >= a - 1e-10 for a, b in zip(ladder, ladder[1:]))
    assert ladder[-1] <= sandwiched_renyi(1.5, rho, sigma) + 1e-10


def test_ladder_single_copy_is_sigma_eigenbasis():
    rho, sigma = noncommuting_pair(31)
    w, V = np.linalg.eigh(sigma)
    M = Measurement.from_basis(V)
    p, q = apply_measurement(M, rho), apply_measurement(M, sigma)
    expected = renyi_from_quasi(2.0, classical_f_div(power(2.0), p, q), 1.0)
    assert pinched_ladder(2.0, rho, sigma, n_max=1)[0] == pytest.approx(expected)


def test_chain_report_serializes(qubit_pair):
    d = renyi_chain_report(0.5, *qubit_pair, restarts=2).to_dict()
    assert {"sandwiched", "standard", "measured", "ladder", "checks", "gaps"} <= set(d)
    assert renyi_alpha(0.5, *qubit_pair) == pytest.approx(d["standard"])
