import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import commuting_pair, noncommuting_pair, random_psd
from qdiv.channels import random_state
from qdiv.extended import INF
from qdiv.fdiv import (
    NotOperatorConvexError,
    bs_relative_entropy,
    build_function,
    classical_f_div,
    eta,
    f_delta,
    f_s,
    g_s,
    maximal_f_div,
    mu_atoms,
    power,
    quad,
    relative_entropy,
    renyi_alpha,
    standard_f_div,
    tilde_f_div,
)
from qdiv.operators import OperatorError

PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])
GRID = np.geomspace(1e-3, 1e3, 41)

BUILTINS = [eta(), power(0.5), power(1.5), power(2.0), f_s(1.0), g_s(1.0), g_s(5.0), quad(), f_delta(0.2)]
OPERATOR_CONVEX = [f for f in BUILTINS if f.operator_convex]


def _ids(fs):
    return [f.name for f in fs]


# function objects ---------------------------------------------------------------


@pytest.mark.parametrize(
    "spec, f0, finf",
    [
        ("eta", 0.0, INF),
        ("power:0.5", 0.0, 0.0),
        ("power:2", 0.0, INF),
        ("fs:2", 0.0, 0.0),
        ("gs:4", 0.25, 1.0),
        ("fdelta:0.1", 1.1, INF),
    ],
)
def test_builtin_endpoints(spec, f0, finf):
    f = build_function(spec)
    assert f.f_at_0 == pytest.approx(f0)
    assert f.fprime_at_inf == finf


def test_power_half_is_negative_square_root():
    f = build_function("power", 0.5)
    np.testing.assert_allclose(f(GRID), -np.sqrt(GRID))


@pytest.mark.parametrize(
    "f, fpp",
    [(eta(), 1.0), (power(0.5), -1.0 * 0.5 * -0.5), (power(3.0), 6.0), (g_s(1.0), 1.0), (g_s(3.0), 0.5)],
    ids=["eta", "power:0.5", "power:3", "gs:1", "gs:3"],
)
def test_second_derivative_at_one_is_exact(f, fpp):
    assert f.second_derivative_at_1 == fpp
    h = 1e-4
    numeric = (f(1 + h) - 2 * f(1.0) + f(1 - h)) / h**2
    assert float(numeric) == pytest.approx(fpp, rel=1e-5)


@pytest.mark.parametrize("f", BUILTINS + [mu_atoms([(1.0, 2.0), (3.0, 0.5)], a=0.1)], ids=lambda f: f.name[:12])
def test_analytic_derivative_matches_differences(f):
    h = 1e-6 * GRID
    numeric = (f(GRID + h) - f(GRID - h)) / (2 * h)
    np.testing.assert_allclose(f.deriv(GRID), numeric, rtol=1e-5, atol=1e-8)


def test_single_atom_mu_representation():
    f = build_function("mu-atoms:[(1.0, 1.0)]")
    np.testing.assert_allclose(f(GRID), GRID / 2 - GRID / (GRID + 1), atol=1e-14)
    assert f.support_size == 1


@pytest.mark.parametrize("f", [f for f in BUILTINS if f.representation is not None], ids=lambda f: f.name)
def test_representation_reproduces_function(f):
    np.testing.assert_allclose(f.representation(GRID), f(GRID), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("f", BUILTINS, ids=_ids(BUILTINS))
def test_transpose_is_involution_and_swaps_endpoints(f):
    ft = f.transpose()
    assert ft.f_at_0 == f.fprime_at_inf
    assert ft.fprime_at_inf == f.f_at_0
    assert ft.operator_convex == f.operator_convex
    np.testing.assert_allclose(ft.transpose()(GRID), f(GRID), rtol=1e-10, atol=1e-12)


def test_transpose_examples():
    np.testing.assert_allclose(eta().transpose()(GRID), -np.log(GRID), atol=1e-12)
    assert eta().transpose().f_at_0 == INF
    np.testing.assert_allclose(quad().transpose()(GRID), 1 / GRID, rtol=1e-12)


@pytest.mark.parametrize("spec", ["power:0", "power:-1", "fs:0", "gs:-2", "fdelta:0", "bogus", "power", "power:x"])
def test_build_function_rejects_bad_specs(spec):
    with pytest.raises(ValueError):
        build_function(spec)


# standard divergence -------------------------------------------------------------


@pytest.mark.parametrize("f", [f.normalized() for f in BUILTINS], ids=_ids(BUILTINS))
def test_standard_vanishes_on_equal_arguments(f, qutrit_pair):
    rho, _ = qutrit_pair
    assert standard_f_div(f, rho, rho) == pytest.approx(0.0, abs=1e-12)


def test_standard_commuting_example():
    value = standard_f_div(eta(), np.diag([0.6, 0.4]), np.diag([0.5, 0.5]))
    assert value == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8), abs=1e-14)


def test_relative_entropy_infinite_on_support_violation():
    assert standard_f_div(eta(), PLUS, np.diag([1.0, 0.0])) == INF
    assert relative_entropy(PLUS, np.diag([1.0, 0.0])) == INF


def test_standard_boundary_terms_with_finite_endpoints():
    g = g_s(1.0)
    rho, sigma = np.diag([0.5, 0.5, 0.0]), np.diag([0.0, 0.5, 0.5])
    expected = g.fprime_at_inf * 0.5 + 0.5 * float(g(np.array([1.0]))[0]) + g.f_at_0 * 0.5
    assert standard_f_div(g, rho, sigma) == pytest.approx(expected)


@pytest.mark.parametrize("f", OPERATOR_CONVEX, ids=_ids(OPERATOR_CONVEX))
def test_standard_transpose_symmetry(f, qubit_pair):
    rho, sigma = qubit_pair
    assert standard_f_div(f.transpose(), rho, sigma) == pytest.approx(standard_f_div(f, sigma, rho), abs=1e-9)
    assert maximal_f_div(f.transpose(), rho, sigma) == pytest.approx(maximal_f_div(f, sigma, rho), abs=1e-9)


@pytest.mark.parametrize("lam", [0.1, 2.0, 17.0])
@pytest.mark.parametrize("f", [eta(), g_s(2.0), power(0.5)], ids=lambda f: f.name)
def test_homogeneity(f, lam, qutrit_pair):
    rho, sigma = qutrit_pair
    assert standard_f_div(f, lam * rho, lam * sigma) == pytest.approx(lam * standard_f_div(f, rho, sigma), rel=1e-9)
    assert maximal_f_div(f, lam * rho, lam * sigma) == pytest.approx(lam * maximal_f_div(f, rho, sigma), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([eta(), power(0.5), g_s(1.0), f_s(2.0), quad()]))
def test_joint_subadditivity(seed, f):
    rng = np.random.default_rng(seed)
    rhos = [random_psd(3, rng) for _ in range(2)]
    sigmas = [random_psd(3, rng) for _ in range(2)]
    lhs = standard_f_div(f, sum(rhos), sum(sigmas))
    rhs = sum(standard_f_div(f, r, s) for r, s in zip(rhos, sigmas))
    assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_standard_dominated_by_maximal(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_state(dim, seed=rng)
    sigma = random_state(dim, seed=rng)
    for f in OPERATOR_CONVEX:
        assert standard_f_div(f, rho, sigma) <= maximal_f_div(f, rho, sigma) + 1e-9


def test_standard_continuity_with_finite_endpoints(rng):
    g = g_s(1.0)
    rho, sigma = np.diag([0.5, 0.5, 0.0]), np.diag([0.0, 0.3, 0.7])
    base = standard_f_div(g, rho, sigma)
    for eps in (1e-6, 1e-8):
        K, L = eps * random_psd(3, rng), eps * random_psd(3, rng, rank=1)
        assert standard_f_div(g, rho + K, sigma + L) == pytest.approx(base, abs=1e-4)


def test_standard_rejects_dimension_mismatch():
    with pytest.raises(OperatorError):
        standard_f_div(eta(), np.eye(2), np.eye(3))


# maximal divergence --------------------------------------------------------------


@pytest.mark.parametrize("f", OPERATOR_CONVEX, ids=_ids(OPERATOR_CONVEX))
def test_maximal_equals_standard_on_commuting_pairs(f):
    rho, sigma = commuting_pair(3, dim=3)
    assert maximal_f_div(f, rho, sigma) == pytest.approx(standard_f_div(f, rho, sigma), abs=1e-9)


def test_quadratic_maximal_equals_standard(qutrit_pair):
    rho, sigma = qutrit_pair
    oracle = np.trace(rho @ rho @ np.linalg.inv(sigma)).real
    assert maximal_f_div(quad(), rho, sigma) == pytest.approx(oracle, rel=1e-10)
    assert standard_f_div(quad(), rho, sigma) == pytest.approx(oracle, rel=1e-10)


def test_belavkin_staszewski_exceeds_umegaki(qubit_pair):
    rho, sigma = qubit_pair
    assert bs_relative_entropy(rho, sigma) > relative_entropy(rho, sigma) + 1e-6


def test_maximal_requires_operator_convexity(qubit_pair):
    with pytest.raises(NotOperatorConvexError):
        maximal_f_div(power(3.0), *qubit_pair)


def test_maximal_infinite_on_support_violation():
    assert maximal_f_div(eta(), PLUS, np.diag([1.0, 0.0])) == INF


def test_maximal_with_finite_endpoints_and_unrelated_supports():
    g = g_s(1.0)
    rho, sigma = np.diag([1.0, 0.0]), PLUS
    value = maximal_f_div(g, rho, sigma)
    assert math.isfinite(value)
    assert value >= standard_f_div(g, rho, sigma) - 1e-9


# ratio-type divergence -------------------------------------------------------------


def test_tilde_equals_standard_on_commuting_pairs():
    rho, sigma = commuting_pair(4, dim=3)
    f = f_delta(0.3)
    assert tilde_f_div(f, rho, sigma) == pytest.approx(standard_f_div(f, rho, sigma), abs=1e-12)


def test_tilde_on_equal_arguments(qubit_pair):
    _, sigma = qubit_pair
    f = g_s(2.0).shifted(0.5)
    assert tilde_f_div(f, sigma, sigma) == pytest.approx(f.value_at_1 * np.trace(sigma).real)


def test_tilde_needs_invertible_arguments():
    with pytest.raises(OperatorError):
        tilde_f_div(eta(), np.diag([1.0, 0.0]), np.eye(2))


# Renyi wrappers ----------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 2.0, 3.0])
def test_renyi_of_state_with_itself(alpha, qubit_pair):
    rho, _ = qubit_pair
    assert renyi_alpha(alpha, rho, rho) == pytest.approx(0.0, abs=1e-12)


def test_renyi_increasing_in_alpha():
    rho, sigma = noncommuting_pair(21)
    values = [renyi_alpha(a, rho, sigma) for a in (0.3, 0.5, 0.7, 0.9)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_renyi_at_one_is_normalized_relative_entropy(qubit_pair):
    rho, sigma = qubit_pair
    assert renyi_alpha(1.0, 2 * rho, sigma) == pytest.approx(relative_entropy(2 * rho, sigma) / 2)


def test_renyi_rejects_nonpositive_order(qubit_pair):
    with pytest.raises(ValueError):
        renyi_alpha(0.0, *qubit_pair)


def test_renyi_infinite_when_support_violated():
    assert renyi_alpha(2.0, PLUS, np.diag([1.0, 0.0])) == INF


# classical divergence ------------------------------------------------------------------


@pytest.mark.parametrize(
    "p, q, expected",
    [
        ([0.3, 0.7], [0.3, 0.7], 0.0),
        ([1.0, 0.0], [0.5, 0.5], math.log(2)),
        ([1.0, 0.0], [0.0, 1.0], INF),
    ],
)
def test_classical_eta(p, q, expected):
    assert classical_f_div(eta(), p, q) == pytest.approx(expected)


def test_classical_length_mismatch():
    with pytest.raises(ValueError):
        classical_f_div(eta(), [1.0], [0.5, 0.5])
