import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from app.services.dictionary import Dictionary, build_gaussian, frame_bounds, null_space_basis
from app.services.sparse_norms import (
    SparsityNormOracle,
    approx_norm,
    approx_seminorm,
    best_k_term_exhaustive,
    best_k_term_greedy,
    interpolation_norm,
    interpolation_terms,
    jackson_ratios,
    k_functional,
    min_l1_representation,
    min_l2_representation,
    min_ltau_representation,
    quasi_norm_power,
    random_range_signals,
    sigma_profile,
    sparsity_norm,
    sparsity_norm_evaluator,
    theorem1_equivalence_check,
    thresholded_profile,
)
from app.utils.errors import CapExceededError, DomainError, NotInRangeError


def _orthonormal(m, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((m, m)))
    return Dictionary(atoms=q, label="orthonormal")


# --- best k-term ---

def test_single_atom_is_one_term_exact(gaussian_4x8):
    f = gaussian_4x8.atoms[:, 5]
    best = best_k_term_exhaustive(gaussian_4x8, f, 1)
    assert best.support == [5]
    assert best.residual == pytest.approx(0.0, abs=1e-12)


def test_dc_signal_uses_dc_atom(dirac_dc4):
    best = best_k_term_exhaustive(dirac_dc4, np.full(4, 0.5), 1)
    assert best.support == [4]
    assert best.residual == pytest.approx(0.0, abs=1e-12)


def test_m_terms_reach_zero(gaussian_4x8, rng):
    f = rng.standard_normal(4)
    assert best_k_term_exhaustive(gaussian_4x8, f, 4).residual == pytest.approx(0.0, abs=1e-10)


def test_zero_terms_is_signal_norm(gaussian_4x8):
    f = np.array([3.0, 4.0, 0.0, 0.0])
    assert best_k_term_exhaustive(gaussian_4x8, f, 0).residual == pytest.approx(5.0)


def test_k_term_cap(gaussian_4x8):
    with pytest.raises(CapExceededError):
        best_k_term_exhaustive(gaussian_4x8, np.ones(4), 4, cap=10)


def test_k_term_rejects_wrong_length(gaussian_4x8):
    with pytest.raises(DomainError):
        best_k_term_exhaustive(gaussian_4x8, np.ones(3), 1)


def test_greedy_recovers_single_atom(gaussian_4x8):
    greedy = best_k_term_greedy(gaussian_4x8, 2.0 * gaussian_4x8.atoms[:, 3], 1)
    assert greedy.support == [3]
    assert greedy.residual == pytest.approx(0.0, abs=1e-12)
    assert not greedy.exact


def test_greedy_never_beats_exhaustive(gaussian_4x8, rng):
    f = rng.standard_normal(4)
    for k in range(5):
        exact = best_k_term_exhaustive(gaussian_4x8, f, k).residual
        assert best_k_term_greedy(gaussian_4x8, f, k).residual >= exact - 1e-12


def test_greedy_never_beats_exhaustive_on_random_instances():
    rng = np.random.default_rng(99)
    for trial in range(200):
        m = int(rng.integers(2, 7))
        N = int(rng.integers(m, 11))
        dictionary = Dictionary(atoms=rng.standard_normal((m, N)))
        f = rng.standard_normal(m)
        k = int(rng.integers(1, m + 1))
        exact = best_k_term_exhaustive(dictionary, f, k).residual
        assert best_k_term_greedy(dictionary, f, k).residual >= exact - 1e-10 * max(1.0, np.linalg.norm(f))


@pytest.mark.parametrize("alpha", [-3.0, 0.5, 2.0])
def test_sigma_profile_is_homogeneous(gaussian_4x8, rng, alpha):
    f = rng.standard_normal(4)
    scaled = sigma_profile(gaussian_4x8, alpha * f, 4)
    assert_allclose(scaled, abs(alpha) * np.array(sigma_profile(gaussian_4x8, f, 4)), rtol=1e-10, atol=1e-10)


def test_greedy_matches_exhaustive_on_orthonormal_basis(rng):
    basis = _orthonormal(6, seed=1)
    f = rng.standard_normal(6)
    for k in range(7):
        greedy = best_k_term_greedy(basis, f, k).residual
        assert greedy == pytest.approx(best_k_term_exhaustive(basis, f, k).residual, abs=1e-12)


def test_sigma_profile_shape_and_monotonicity(dirac_dc4, rng):
    f = rng.standard_normal(4)
    profile = sigma_profile(dirac_dc4, f, kmax=8)
    assert len(profile) == 9
    assert profile[0] == pytest.approx(np.linalg.norm(f))
    assert all(a >= b for a, b in zip(profile, profile[1:]))
    assert profile[5:] == [profile[5]] * 4


# --- approximation norms ---

def test_approx_norm_of_single_atom_is_its_norm(dirac_dc4):
    f = 3.0 * dirac_dc4.atoms[:, 0]
    assert approx_norm(dirac_dc4, f, s=1.0, q=1.0, kmax=8) == pytest.approx(3.0, abs=1e-12)


def test_approx_norm_of_zero(dirac_dc4):
    assert approx_norm(dirac_dc4, np.zeros(4), s=1.0, q=1.0, kmax=8) == 0.0


def test_full_and_dyadic_seminorms_are_comparable(dirac_dc9, rng):
    f = rng.standard_normal(9)
    dyadic = approx_seminorm(dirac_dc9, f, 0.5, 1.0, 8, form="dyadic")
    full = approx_seminorm(dirac_dc9, f, 0.5, 1.0, 8, form="full")
    assert 0.0 < dyadic
    assert 0.0 < full
    with pytest.raises(DomainError):
        approx_seminorm(dirac_dc9, f, 0.5, 1.0, 8, form="weekly")


def test_approx_norm_needs_two_levels(dirac_dc4):
    with pytest.raises(DomainError):
        approx_norm(dirac_dc4, np.ones(4), 1.0, 1.0, kmax=1)


# --- minimum-norm representations ---

def test_unique_representation_when_kernel_is_trivial(rng):
    basis = _orthonormal(5, seed=2)
    f = rng.standard_normal(5)
    representation = min_ltau_representation(basis, f, 0.5)
    assert representation.exact
    assert_allclose(basis.atoms @ representation.coefficients, f, atol=1e-12)


def test_dirac_dc_l1_minimizer_of_first_dirac(dirac_dc4):
    representation = min_ltau_representation(dirac_dc4, np.eye(4)[0], 1.0)
    assert_allclose(representation.coefficients, np.eye(5)[0], atol=1e-12)
    assert representation.norm_value == pytest.approx(1.0)
    assert representation.support == [0]
    assert not representation.tied


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_vertex_oracle_against_null_line_scan(tau):
    rng = np.random.default_rng(2024)
    for trial in range(100):
        N = int(rng.integers(3, 11))
        dictionary = Dictionary(atoms=rng.standard_normal((N - 1, N)))
        z = null_space_basis(dictionary).basis[:, 0]
        f = rng.standard_normal(N - 1)
        c0 = np.linalg.pinv(dictionary.atoms) @ f
        value = min_ltau_representation(dictionary, f, tau).norm_value ** tau
        breakpoints = -c0 / z
        span = 2.0 * np.abs(breakpoints).max() + 1.0
        grid = np.linspace(-span, span, 100_001)
        scan = quasi_norm_power(c0[None, :] + grid[:, None] * z[None, :], tau).min()
        assert value <= scan + 1e-9
        # the scan refined with the kink positions attains the vertex value
        refined = quasi_norm_power(c0[None, :] + breakpoints[:, None] * z[None, :], tau).min()
        assert value == pytest.approx(min(scan, refined), rel=1e-6)


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_vertex_oracle_against_plane_scan(tau):
    rng = np.random.default_rng(7)
    for trial in range(20):
        dictionary = Dictionary(atoms=rng.standard_normal((4, 6)))
        Z = null_space_basis(dictionary).basis
        f = rng.standard_normal(4)
        representation = min_ltau_representation(dictionary, f, tau)
        c0 = np.linalg.pinv(dictionary.atoms) @ f
        grid = np.linspace(-6.0, 6.0, 241)
        a, b = np.meshgrid(grid, grid)
        shifts = a.ravel()[:, None] * Z[:, 0] + b.ravel()[:, None] * Z[:, 1]
        scan = quasi_norm_power(c0 + shifts, tau).min()
        assert representation.norm_value ** tau <= scan + 1e-9
        assert_allclose(dictionary.atoms @ representation.coefficients, f, atol=1e-9)


def test_vertex_oracle_batched_norms_match_single(gaussian_4x8):
    oracle = SparsityNormOracle(gaussian_4x8)
    signals = random_range_signals(gaussian_4x8, 5, seed=3)
    batched = oracle.norms(signals, 0.5)
    assert_allclose(batched, [oracle.norm(f, 0.5) for f in signals], rtol=1e-12)


def test_vertex_cap(gaussian_4x8):
    with pytest.raises(CapExceededError):
        SparsityNormOracle(gaussian_4x8, cap=3)
    with pytest.raises(CapExceededError):
        min_ltau_representation(gaussian_4x8, gaussian_4x8.atoms[:, 0], 0.5, cap=3)


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_min_ltau_ignores_atom_order_and_signs(gaussian_4x8, rng, tau):
    order = rng.permutation(8)
    signs = rng.choice([-1.0, 1.0], size=8)
    moved = Dictionary(atoms=gaussian_4x8.atoms[:, order] * signs)
    for f in random_range_signals(gaussian_4x8, 10, seed=11):
        base = min_ltau_representation(gaussian_4x8, f, tau)
        other = min_ltau_representation(moved, f, tau)
        assert other.norm_value == pytest.approx(base.norm_value, rel=1e-9)
        if not base.tied:
            assert_allclose(other.coefficients * signs, base.coefficients[order], atol=1e-9)


def test_l1_falls_back_to_linear_program_above_vertex_cap():
    dictionary = build_gaussian(8, 16, seed=3)
    signals = random_range_signals(dictionary, 4, seed=9)
    for f in signals:
        linear_program = min_ltau_representation(dictionary, f, 1.0, cap=4)
        vertex = min_ltau_representation(dictionary, f, 1.0, cap=8)
        assert not linear_program.exact
        assert vertex.exact
        assert linear_program.norm_value == pytest.approx(vertex.norm_value, rel=1e-7)
    fallback = sparsity_norm_evaluator(dictionary, 1.0, cap=4)(signals)
    assert_allclose(fallback, sparsity_norm_evaluator(dictionary, 1.0, cap=8)(signals), rtol=1e-7)
    with pytest.raises(CapExceededError):
        sparsity_norm_evaluator(dictionary, 0.5, cap=4)


def test_signal_outside_range():
    dictionary = Dictionary(atoms=np.ones((2, 3)))
    with pytest.raises(NotInRangeError):
        min_ltau_representation(dictionary, np.array([1.0, -1.0]), 1.0)


def test_min_l2_on_orthonormal_basis(rng):
    basis = _orthonormal(5, seed=4)
    f = rng.standard_normal(5)
    representation = min_l2_representation(basis, f)
    assert_allclose(representation.coefficients, basis.atoms.T @ f, atol=1e-12)
    assert representation.norm_value == pytest.approx(np.linalg.norm(f))


def test_min_l2_respects_dual_frame_bound():
    dictionary = build_gaussian(8, 16, seed=5)
    A = frame_bounds(dictionary).A
    for f in random_range_signals(dictionary, 200, seed=6):
        norm = min_l2_representation(dictionary, f).norm_value
        assert norm <= A ** -0.5 * np.linalg.norm(f) * (1.0 + 1e-10)


def test_min_l2_needs_full_row_rank():
    with pytest.raises(DomainError):
        min_l2_representation(Dictionary(atoms=np.ones((2, 3))), np.ones(2))


def test_basis_pursuit_agrees_with_vertex_oracle(dirac_dc9, rng):
    f = rng.standard_normal(9)
    linear_program = min_l1_representation(dirac_dc9, f)
    assert linear_program.norm_value == pytest.approx(sparsity_norm(dirac_dc9, f, 1.0), rel=1e-7)


def test_sparsity_norm_domain(dirac_dc4):
    with pytest.raises(DomainError):
        sparsity_norm(dirac_dc4, np.ones(4), 1.5)
    with pytest.raises(DomainError):
        sparsity_norm_evaluator(dirac_dc4, 3.0)


def test_sparsity_norm_evaluator_l2_branch(dirac_dc4, rng):
    F = rng.standard_normal((3, 4))
    values = sparsity_norm_evaluator(dirac_dc4, 2.0)(F)
    assert_allclose(values, [sparsity_norm(dirac_dc4, f, 2.0) for f in F], rtol=1e-10)


def test_thresholded_profile_dominates_sigma(dirac_dc4, rng):
    f = rng.standard_normal(4)
    rows = thresholded_profile(dirac_dc4, f, 1.0, kmax=5)
    assert rows[0].threshold_error == pytest.approx(np.linalg.norm(f))
    assert rows[-1].threshold_error == pytest.approx(0.0, abs=1e-10)
    assert all(row.threshold_error >= row.sigma - 1e-12 for row in rows)


def test_jackson_ratios_are_bounded(dirac_dc9, rng):
    ratios = jackson_ratios(dirac_dc9, rng.standard_normal(9), 1.0, kmax=6)
    assert len(ratios) == 6
    assert all(0.0 <= r < 10.0 for r in ratios)


# --- K-functional ---

def test_k_functional_of_zero(dirac_dc4):
    value = k_functional(dirac_dc4, np.zeros(4), t=0.3, p=1.0)
    assert value.value == 0.0
    assert value.certified


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_k_functional_limits(dirac_dc9, rng, p):
    f = rng.standard_normal(9)
    best = sparsity_norm(dirac_dc9, f, p)
    large = k_functional(dirac_dc9, f, t=1e6 * np.linalg.norm(f) / best, p=p)
    assert large.value == pytest.approx(np.linalg.norm(f), rel=1e-6)
    small_t = 1e-6
    small = k_functional(dirac_dc9, f, t=small_t, p=p)
    assert small.value <= small_t * best + 1e-7


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_k_functional_is_certified(gaussian_4x8, rng, p):
    f = rng.standard_normal(4)
    for t in (0.05, 0.3, 1.0):
        value = k_functional(gaussian_4x8, f, t, p)
        assert value.certified
        assert value.lower_bound <= value.value * (1.0 + 1e-9)
        achieved = np.linalg.norm(f - gaussian_4x8.atoms @ value.coefficients)
        achieved += t * np.sum(np.abs(value.coefficients) ** p) ** (1.0 / p)
        assert achieved == pytest.approx(value.value, rel=1e-9)


def _k_functional_dual(atoms, f, t):
    """max <f, y> over ||y|| <= 1 and |Phi^T y| <= t."""
    constraints = [
        {"type": "ineq", "fun": lambda y: 1.0 - y @ y, "jac": lambda y: -2.0 * y},
        {"type": "ineq", "fun": lambda y: t - atoms.T @ y, "jac": lambda y: -atoms.T},
        {"type": "ineq", "fun": lambda y: t + atoms.T @ y, "jac": lambda y: atoms.T},
    ]
    result = minimize(lambda y: -(f @ y), np.zeros(f.size), jac=lambda y: -f, constraints=constraints,
                      method="SLSQP", options={"ftol": 1e-14, "maxiter": 1000})
    return -result.fun


def test_k_functional_l1_matches_dual_solve(gaussian_4x8, rng):
    f = rng.standard_normal(4)
    value = k_functional(gaussian_4x8, f, 0.3, 1.0)
    assert value.certified
    assert value.value == pytest.approx(1.5644950896, rel=1e-6)
    for t in (0.05, 0.3, 0.7, 1.0):
        value = k_functional(gaussian_4x8, f, t, 1.0)
        assert value.value == pytest.approx(_k_functional_dual(gaussian_4x8.atoms, f, t), rel=1e-6)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_k_functional_is_nondecreasing_and_concave_in_t(gaussian_4x8, dirac_dc4, rng, p):
    ts = np.linspace(0.05, 2.0, 40)
    for dictionary in (gaussian_4x8, dirac_dc4):
        f = rng.standard_normal(4)
        values = np.array([k_functional(dictionary, f, t, p).value for t in ts])
        slack = 5e-6 * values.max()
        assert np.all(np.diff(values) >= -slack)
        assert np.all(values[:-2] + values[2:] - 2.0 * values[1:-1] <= slack)


def test_k_functional_flags_are_python_bools(gaussian_4x8, rng):
    f = rng.standard_normal(4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for p in (1.0, 2.0):
            value = k_functional(gaussian_4x8, f, 0.3, p)
            assert type(value.certified) is bool


def test_k_functional_quasi_norm_is_an_upper_bound(dirac_dc4, rng):
    f = rng.standard_normal(4)
    value = k_functional(dirac_dc4, f, t=0.5, p=0.5)
    assert not value.certified
    assert value.value <= np.linalg.norm(f) + 1e-12


def test_k_functional_domain(dirac_dc4):
    with pytest.raises(DomainError):
        k_functional(dirac_dc4, np.ones(4), t=0.0, p=1.0)
    with pytest.raises(DomainError):
        k_functional(dirac_dc4, np.ones(4), t=1.0, p=1.5)


def test_interpolation_norm_properties(dirac_dc4, rng):
    f = rng.standard_normal(4)
    assert interpolation_norm(dirac_dc4, np.zeros(4), 0.5, 1.0, 1.0, 4) == 0.0
    values = [interpolation_norm(dirac_dc4, f, 0.5, 1.0, 1.0, J) for J in (1, 2, 3, 4)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    scaled = interpolation_norm(dirac_dc4, -3.0 * f, 0.5, 1.0, 1.0, 4)
    assert scaled == pytest.approx(3.0 * values[-1], rel=1e-6)
    assert len(interpolation_terms(dirac_dc4, f, 1.0, 4)) == 5


def test_interpolation_norm_domain(dirac_dc4):
    with pytest.raises(DomainError):
        interpolation_norm(dirac_dc4, np.ones(4), 1.0, 1.0, 1.0, 3)
    with pytest.raises(DomainError):
        interpolation_terms(dirac_dc4, np.ones(4), 1.0, 0)


# --- norm equivalence harness ---

def test_equivalence_ratios_are_stable(dirac_dc9):
    short = theorem1_equivalence_check(dirac_dc9, 1.0, sample_count=50, kmax=8, seed=1)
    long = theorem1_equivalence_check(dirac_dc9, 1.0, sample_count=50, kmax=16, seed=1)
    assert np.all(np.isfinite(short.ratios))
    assert 0.0 < short.min_ratio <= short.max_ratio
    assert not short.flagged
    assert long.max_ratio / long.min_ratio == pytest.approx(short.max_ratio / short.min_ratio, rel=0.01)


def test_equivalence_ratio_is_scale_invariant(dirac_dc4):
    f = random_range_signals(dirac_dc4, 1, seed=9)[0]
    ratio = approx_norm(dirac_dc4, f, 0.5, 1.0, 4) / sparsity_norm(dirac_dc4, f, 1.0)
    doubled = approx_norm(dirac_dc4, 2 * f, 0.5, 1.0, 4) / sparsity_norm(dirac_dc4, 2 * f, 1.0)
    assert doubled == pytest.approx(ratio, rel=1e-10)
