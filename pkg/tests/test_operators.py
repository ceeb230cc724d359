import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import PAULI, min_eig, random_hermitian, random_psd
from qdiv.config import Tolerances
from qdiv.extended import INF, ExtendedRealError, ext, ext_mul, ext_sum
from qdiv.fdiv import eta, f_s, g_s, power, quad
from qdiv.operators import (
    NumericalInstabilityError,
    OperatorError,
    PerspectiveUndefinedError,
    PowerMean,
    PsdOperator,
    bkm_kernel,
    func_calculus,
    geometric_mean,
    hermitian,
    inverse_sqrt_kernel,
    lmul,
    monotone_metric_form,
    operator_connection,
    operator_perspective,
    relative_modular,
    rmul,
    scalar_perspective,
    spectral_decompose,
    support_perspective,
    support_projection,
    unvec,
    vec,
)

PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])


# extended reals and tolerances ------------------------------------------------


def test_zero_times_infinity_is_zero():
    assert ext_mul(0.0, INF) == 0.0
    assert ext_mul(2.0, INF) == INF
    assert ext_sum([1.0, INF, 3.0]) == INF


@pytest.mark.parametrize("bad", [-math.inf, math.nan])
def test_extended_real_rejects_negative_infinity_and_nan(bad):
    with pytest.raises(ExtendedRealError):
        ext(bad)


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        Tolerances(psd_tol=0.0)


# validation --------------------------------------------------------------------


def test_hermitian_symmetrizes_small_asymmetry():
    A = np.array([[1.0, 1e-12], [0.0, 2.0]])
    H = hermitian(A)
    np.testing.assert_allclose(H, H.conj().T)


@pytest.mark.parametrize(
    "matrix",
    [
        np.array([[1.0, 1.0], [0.0, 1.0]]),
        np.ones((2, 3)),
        np.array([[np.nan, 0.0], [0.0, 1.0]]),
    ],
)
def test_hermitian_rejects_invalid_input(matrix):
    with pytest.raises(OperatorError):
        hermitian(matrix)


def test_psd_rejects_negative_eigenvalue():
    with pytest.raises(OperatorError):
        PsdOperator(np.diag([1.0, -1e-3]))


def test_psd_clips_rounding_negatives():
    A = PsdOperator(np.diag([1.0, -1e-12]))
    assert A.rank == 1
    assert A.eigenvalues.min() == 0.0


def test_vec_is_column_stacking():
    X = np.arange(4.0).reshape(2, 2)
    np.testing.assert_array_equal(vec(X), [0.0, 2.0, 1.0, 3.0])
    np.testing.assert_array_equal(unvec(vec(X), 2), X)


def test_left_right_multiplication_superoperators(rng):
    A, B, X = (random_hermitian(3, rng) for _ in range(3))
    np.testing.assert_allclose(lmul(A)(X), A @ X, atol=1e-12)
    np.testing.assert_allclose(rmul(B)(X), X @ B, atol=1e-12)


def test_superoperator_matches_action_on_matrix_units():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    S = lmul(A)
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = 1.0
            np.testing.assert_allclose(S(E), A @ E)


# spectral decomposition -----------------------------------------------------


@pytest.mark.parametrize(
    "A, values, projectors",
    [
        (np.diag([1.0, 1.0, 0.0]), [1.0, 0.0], [np.diag([1.0, 1.0, 0.0]), np.diag([0.0, 0.0, 1.0])]),
        (np.eye(3), [1.0], [np.eye(3)]),
        (PLUS, [1.0, 0.0], [PLUS, np.array([[0.5, -0.5], [-0.5, 0.5]])]),
    ],
)
def test_spectral_decompose_examples(A, values, projectors):
    sd = spectral_decompose(A)
    np.testing.assert_allclose(sd.eigenvalues, values, atol=1e-12)
    for P, Q in zip(sd.projectors, projectors):
        np.testing.assert_allclose(P, Q, atol=1e-12)


def test_spectral_decompose_merges_close_eigenvalues():
    sd = spectral_decompose(np.diag([1.0, 1.0 + 1e-11, 0.5]))
    assert sd.multiplicities == [2, 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_spectral_reconstruction_and_orthogonality(dim, seed):
    A = random_hermitian(dim, np.random.default_rng(seed))
    sd = spectral_decompose(A)
    assert np.linalg.norm(sd.reconstruct() - A) <= 1e-10 * max(np.linalg.norm(A), 1.0)
    Ps = sd.projectors
    np.testing.assert_allclose(sum(Ps), np.eye(dim), atol=1e-10)
    for i, P in enumerate(Ps):
        for j, Q in enumerate(Ps):
            np.testing.assert_allclose(P @ Q, P if i == j else 0 * P, atol=1e-10)


# functional calculus --------------------------------------------------------


@pytest.mark.parametrize(
    "A, f, expected",
    [
        (np.diag([4.0, 0.0]), np.sqrt, np.diag([2.0, 0.0])),
        (np.diag([2.0, 0.0]), lambda x: 1 / x, np.diag([0.5, 0.0])),
        (PLUS, np.square, PLUS),
    ],
)
def test_func_calculus_examples(A, f, expected):
    np.testing.assert_allclose(func_calculus(f, A), expected, atol=1e-12)


def test_func_calculus_reports_overflow():
    with pytest.raises(OverflowError), np.errstate(over="ignore"):
        func_calculus(lambda x: np.exp(1e4 * x), np.diag([1.0, 0.5]))


@pytest.mark.parametrize(
    "A, expected",
    [
        (np.diag([3.0, 0.0, 1.0]), np.diag([1.0, 0.0, 1.0])),
        (np.zeros((2, 2)), np.zeros((2, 2))),
        (PLUS, PLUS),
    ],
)
def test_support_projection(A, expected):
    np.testing.assert_allclose(support_projection(A), expected, atol=1e-12)


def test_power_zero_is_support_and_inverse_is_generalized():
    A = PsdOperator(np.diag([2.0, 0.0, 4.0]))
    np.testing.assert_allclose(A.power(0), np.diag([1.0, 0.0, 1.0]))
    np.testing.assert_allclose(A.inv(), np.diag([0.5, 0.0, 0.25]))


# relative modular operator ---------------------------------------------------


def test_relative_modular_single_cluster():
    rm = relative_modular(np.eye(2) / 2, np.eye(2) / 2)
    np.testing.assert_allclose(rm.spectrum, [1.0])
    np.testing.assert_allclose(rm.table, [[2.0]])


def test_relative_modular_ratio_spectrum():
    rm = relative_modular(np.diag([0.6, 0.4]), np.diag([0.5, 0.5]))
    np.testing.assert_allclose(sorted(rm.spectrum), [0.8, 1.2])


def test_relative_modular_overlap_table():
    rm = relative_modular(PLUS, np.diag([1.0, 0.0]))
    assert rm.table[0, 0] == pytest.approx(0.5)
    assert rm.zero_sector["rho_support_sigma_kernel"] == pytest.approx(0.5)


def test_relative_modular_table_marginals(qutrit_pair):
    rho, sigma = qutrit_pair
    rm = relative_modular(rho, sigma)
    assert np.all(rm.table >= 0)
    np.testing.assert_allclose(rm.table.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(rm.table.sum(axis=0), 1.0, atol=1e-10)
    S = rm.superoperator
    X = np.arange(9.0).reshape(3, 3)
    np.testing.assert_allclose(S(X), rho @ X @ np.linalg.inv(sigma), atol=1e-10)


def test_relative_modular_dimension_mismatch():
    with pytest.raises(OperatorError):
        relative_modular(np.eye(2), np.eye(3))


# perspectives ----------------------------------------------------------------


@pytest.mark.parametrize("x, y, expected", [(0.0, 5.0, 0.0), (3.0, 0.0, INF), (2.0, 1.0, 2 * math.log(2)), (0.0, 0.0, 0.0)])
def test_scalar_perspective_eta(x, y, expected):
    assert scalar_perspective(eta(), x, y) == pytest.approx(expected)


@pytest.mark.parametrize("f", [eta(), power(0.5), g_s(2.0), quad()], ids=lambda f: f.name)
def test_perspective_of_equal_arguments(f, rng):
    B = random_psd(3, rng)
    np.testing.assert_allclose(operator_perspective(f, B, B), f.value_at_1 * B, atol=1e-10)


@pytest.mark.parametrize("f", [eta(), power(1.5), f_s(1.0), g_s(0.5)], ids=lambda f: f.name)
def test_perspective_transpose_symmetry(f, rng):
    A, B = random_psd(2, rng), random_psd(2, rng)
    np.testing.assert_allclose(
        operator_perspective(f.transpose(), A, B), operator_perspective(f, B, A), atol=1e-9
    )


def test_perspective_support_case_example():
    A = np.diag([1.0, 0.0])
    np.testing.assert_allclose(operator_perspective(eta(), A, np.eye(2)), np.zeros((2, 2)), atol=1e-12)


def test_perspective_undefined_reports_failed_containment():
    with pytest.raises(PerspectiveUndefinedError, match="A\\^0 <= B\\^0 fails"):
        operator_perspective(eta(), np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


@pytest.mark.parametrize("f", [eta(), power(0.5), power(2.0), g_s(1.0), f_s(3.0)], ids=lambda f: f.name)
def test_perspective_joint_convexity(f, rng):
    A1, A2, B1, B2 = (random_psd(3, rng) for _ in range(4))
    t = 0.37
    lhs = t * operator_perspective(f, A1, B1) + (1 - t) * operator_perspective(f, A2, B2)
    rhs = operator_perspective(f, t * A1 + (1 - t) * A2, t * B1 + (1 - t) * B2)
    assert min_eig(lhs - rhs) >= -1e-9


def _perspective_cases():
    e1 = np.diag([1.0, 0.0, 0.0])
    P12 = np.diag([1.0, 1.0, 0.0])
    psi = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
    A_mixed = np.diag([0.5, 0.3, 0.0]) + 0.1 * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    return [
        ("equal supports", eta(), A_mixed, P12 * 0.7 + 0.1 * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])),
        ("both endpoints finite", g_s(1.0), e1 + 0.2 * np.diag([0, 1.0, 0]), np.outer(psi, psi)),
        ("f(0+) finite, A in B", power(1.5), e1 * 0.6, P12 * 0.5),
        ("f'(inf) finite, B in A", power(0.5), P12 * 0.5, e1 * 0.4),
    ]


@pytest.mark.parametrize("label, f, A, B", _perspective_cases(), ids=[c[0] for c in _perspective_cases()])
def test_perspective_matches_regularized_limit(label, f, A, B):
    closed = operator_perspective(f, A, B)
    R = random_psd(3, np.random.default_rng(5))
    values = [
        support_perspective(f, f.f_at_0, PsdOperator(A + 10.0**-n * R), PsdOperator(B + 10.0**-n * R))
        for n in (5, 6, 7)
    ]
    # geometric-rate extrapolation of the regularized sequence
    d1 = np.linalg.norm(values[1] - values[0])
    d2 = np.linalg.norm(values[2] - values[1])
    ratio = d2 / d1 if d1 > 0 else 0.0
    assert ratio < 1
    limit = values[2] + (values[2] - values[1]) * ratio / (1 - ratio)
    assert np.linalg.norm(limit - closed) < 1e-4


# connections -------------------------------------------------------------------


def test_geometric_mean_of_equal_operators(rng):
    A = random_psd(3, rng)
    np.testing.assert_allclose(geometric_mean(A, A), A, atol=1e-10)


def test_geometric_mean_commuting():
    np.testing.assert_allclose(geometric_mean(np.diag([1.0, 4.0]), np.diag([4.0, 1.0])), 2 * np.eye(2), atol=1e-12)


def test_parallel_sum_connection_on_identity():
    h = f_s(2.0)
    # -f_s(x) (1 + s) = x (1 + s) / (x + s) is the parallel-sum kernel
    kernel = type(
        "Kernel",
        (),
        {
            "f_at_0": 0.0,
            "fprime_at_inf": 0.0,
            "connection_atoms": (0.0, 0.0, ((2.0, 1.0),)),
            "__call__": lambda self, x: -h(x) * 3.0,
        },
    )()
    np.testing.assert_allclose(operator_connection(kernel, np.eye(2), np.eye(2)), np.eye(2), atol=1e-12)


def test_connection_monotone_in_arguments(rng):
    A, B, C = (random_psd(3, rng) for _ in range(3))
    lo = geometric_mean(A, B, 0.3)
    hi = geometric_mean(A + C, B, 0.3)
    assert min_eig(hi - lo) >= -1e-9


def test_connection_regularized_branch_agrees_with_parallel_sum():
    # neither support contains the other, so the two-epsilon fallback runs
    class Harmonic:
        f_at_0 = 0.0
        fprime_at_inf = 0.0

        def __call__(self, x):
            x = np.asarray(x, dtype=float)
            return 2 * x / (x + 1)

        def transpose(self):
            return self

    atoms = Harmonic()
    atoms.connection_atoms = (0.0, 0.0, ((1.0, 1.0),))
    A = np.diag([1.0, 1.0, 0.0]) + 0.3 * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    B = np.diag([0.0, 2.0, 3.0])
    np.testing.assert_allclose(
        operator_connection(Harmonic(), A, B), operator_connection(atoms, A, B), atol=1e-6
    )


def test_connection_rejects_unbounded_kernel():
    h = PowerMean(0.5)
    h.f_at_0 = INF
    with pytest.raises(ValueError):
        operator_connection(h, np.eye(2), np.eye(2))


def test_connection_instability_is_reported():
    class Steep:
        f_at_0 = 0.0
        fprime_at_inf = 0.0

        def __call__(self, x):
            return np.asarray(x) ** 0.02

        def transpose(self):
            return PowerMean(0.98)

    with pytest.raises(NumericalInstabilityError):
        operator_connection(Steep(), np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


# monotone metrics ----------------------------------------------------------------


def test_metric_form_vanishes_at_zero():
    assert monotone_metric_form(inverse_sqrt_kernel, np.eye(2) / 2, np.zeros((2, 2))) == 0.0


def test_metric_form_maximally_mixed_pauli():
    # sum_{jk} kappa(1) / (1/2) |Z_jk|^2 = 2 Tr Z^2 = 4
    assert monotone_metric_form(inverse_sqrt_kernel, np.eye(2) / 2, PAULI[2]) == pytest.approx(4.0)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_bkm_metric_at_maximally_mixed(d, rng):
    X = random_hermitian(d, rng)
    X -= np.trace(X) / d * np.eye(d)
    value = monotone_metric_form(bkm_kernel, np.eye(d) / d, X)
    assert value == pytest.approx(d * np.trace(X @ X).real)


@pytest.mark.parametrize("kappa", [bkm_kernel, inverse_sqrt_kernel])
def test_metric_form_is_nonnegative(kappa, rng):
    sigma = random_psd(3, rng)
    for _ in range(5):
        assert monotone_metric_form(kappa, sigma, random_hermitian(3, rng)) >= 0


def test_metric_form_needs_invertible_reference():
    with pytest.raises(OperatorError):
        monotone_metric_form(bkm_kernel, np.diag([1.0, 0.0]), PAULI[0])
