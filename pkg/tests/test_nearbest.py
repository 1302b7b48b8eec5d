from itertools import product

import numpy as np
import pytest

from app.services.dictionary import Dictionary, NullSpaceBasis, dictionary_from_null_vector, null_space_basis
from app.services.nearbest import (
    SignPattern,
    condition_l1,
    condition_ltau,
    dirac_dc_case1_threshold,
    dirac_dc_case2_condition,
    dirac_dc_case2_max_epsilon,
    l1_optimality_condition,
    lambda_partition,
    max_feasible_epsilon,
    near_best_factor,
    sup_f_given_a,
)
from app.services.sparse_norms import random_range_signals
from app.utils.errors import CapExceededError, DomainError

DC4_NULL = np.array([1.0, 1.0, 1.0, 1.0, -2.0])


def _basis(z):
    z = np.asarray(z, dtype=float)
    return NullSpaceBasis(basis=z[:, None], d=1, tol=1e-12, rank=z.size - 1)


def test_sign_pattern_validation():
    assert SignPattern(s=[1, 0, -1]).Lambda == [0, 2]
    with pytest.raises(ValueError):
        SignPattern(s=[2, 0])


def test_lambda_partition():
    partition = lambda_partition([1, -1, 1, 0], [2.0, 3.0, 0.0, 1.0])
    assert partition.plus == [0]
    assert partition.minus == [1]
    assert partition.zero_on_Lambda == [2]
    assert partition.complement == [3]
    with pytest.raises(DomainError):
        lambda_partition([1, 0], [1.0, 2.0, 3.0])


def test_l1_optimality_on_dirac_dc(dirac_dc4):
    Z = null_space_basis(dirac_dc4)
    assert l1_optimality_condition([0, 0, 0, 0, 0], Z).holds
    assert l1_optimality_condition([1, 1, 0, 0, 0], Z).holds
    failing = l1_optimality_condition([1, 1, 1, 1, 1], Z)
    assert not failing.holds
    assert failing.certified
    assert failing.worst_margin > 0


def test_l1_optimality_with_sampled_kernel_vectors(gaussian_4x8):
    Z = null_space_basis(gaussian_4x8)
    check = l1_optimality_condition([1, 0, 0, 0, 0, 0, 0, 0], Z, samples=50, seed=1)
    assert not check.certified


def test_sup_f_given_a_examples():
    assert sup_f_given_a(0.0, 0.3, 0.5) == 0.0
    assert sup_f_given_a(-1.0, 0.25, 0.5) == pytest.approx(0.5)
    assert sup_f_given_a(1.0, 0.25, 0.5) == pytest.approx(-(0.75 ** 0.5))
    with pytest.raises(DomainError):
        sup_f_given_a(1.0, 0.0, 0.5)


@pytest.mark.parametrize("a", [-2.0, -0.5, 0.5, 2.0])
@pytest.mark.parametrize("eps", [0.1, 0.25, 0.5])
@pytest.mark.parametrize("tau", [0.25, 0.5, 0.75])
def test_sup_f_given_a_matches_grid(a, eps, tau):
    c = np.concatenate([np.linspace(0.0, 100.0, 1_000_001)[1:], [abs(a)]])
    grid = np.max(eps ** (1.0 - tau) * c ** tau - np.abs(c + a) ** tau)
    assert sup_f_given_a(a, eps, tau) == pytest.approx(grid, abs=1e-4)


def test_condition_ltau_examples():
    assert condition_ltau([1, 0, 0, 0, 0], DC4_NULL, 0.1, 0.5)
    assert condition_ltau([0, 0, 1], [1.0, 2.0, 0.0], 0.9, 0.5)
    with pytest.raises(DomainError):
        condition_ltau([1, 0, 0, 0, 0], DC4_NULL, 0.0, 0.5)


def test_condition_ltau_is_monotone_in_eps(rng):
    z = rng.standard_normal(6)
    grid = np.linspace(0.01, 1.0, 100)
    for s in product((-1, 0, 1), repeat=6):
        verdicts = [condition_ltau(s, z, eps, 0.5) for eps in grid]
        # once it fails it keeps failing
        if False in verdicts:
            first = verdicts.index(False)
            assert not any(verdicts[first:])


def test_condition_l1_fails_on_concentrated_pattern():
    assert not condition_l1([1, 0, 0], [5.0, 1.0, 1.0])
    assert condition_l1([0, 0, 1], [5.0, 1.0, 0.0])


@pytest.mark.parametrize("N", [4, 6, 8])
def test_condition_l1_matches_optimality_condition(N):
    z = np.random.default_rng(N).standard_normal(N)
    Z = null_space_basis(dictionary_from_null_vector(z))
    for s in product((-1, 0, 1), repeat=N):
        expected = l1_optimality_condition(s, Z).holds
        assert condition_l1(s, z) == expected
        assert condition_l1(s, -z) == expected
        # orientation symmetry: flip z and swap the roles of Lambda+ and Lambda-
        assert condition_l1([-v for v in s], -z) == expected


def test_condition_ltau_orientation_symmetry():
    z = np.random.default_rng(3).standard_normal(5)
    for s in product((-1, 0, 1), repeat=5):
        flipped = [-v for v in s]
        assert condition_ltau(s, z, 0.3, 0.5) == condition_ltau(flipped, -z, 0.3, 0.5)
        assert condition_ltau(s, z, 0.3, 0.5) == condition_ltau(flipped, z, 0.3, 0.5)


# --- epsilon search and Dirac + DC ---

def test_dirac_dc9_epsilon_dominates_case_thresholds(dirac_dc9):
    search = max_feasible_epsilon(null_space_basis(dirac_dc9), 0.5, tol=1e-6)
    assert not search.vacuous
    assert search.epsilon >= 0.330
    assert search.epsilon >= dirac_dc_case1_threshold(3, 0.5) - 1e-3
    assert search.epsilon == pytest.approx(dirac_dc_case2_max_epsilon(3, 0.5), abs=1e-3)
    assert search.near_best_constant == pytest.approx(search.epsilon ** -0.5)


def test_epsilon_search_is_scale_invariant():
    z = np.random.default_rng(5).standard_normal(7)
    base = max_feasible_epsilon(_basis(z), 0.5)
    scaled = max_feasible_epsilon(_basis(3.0 * z), 0.5)
    flipped = max_feasible_epsilon(_basis(-z), 0.5)
    assert scaled.epsilon == pytest.approx(base.epsilon, abs=2e-6)
    assert flipped.epsilon == pytest.approx(base.epsilon, abs=2e-6)


def test_epsilon_search_agrees_with_pattern_scan():
    z = DC4_NULL
    search = max_feasible_epsilon(_basis(z), 0.5, tol=1e-7)
    admissible = [s for s in product((-1, 0, 1), repeat=5) if condition_l1(s, z)]
    assert all(condition_ltau(s, z, search.epsilon, 0.5) for s in admissible)
    assert search.epsilon < 1.0
    assert not all(condition_ltau(s, z, min(1.0, search.epsilon + 1e-5), 0.5) for s in admissible)


def test_epsilon_search_vacuous_case():
    search = max_feasible_epsilon(_basis([1.0, 0.0]), 0.5)
    assert search.vacuous
    assert search.epsilon == 1.0
    assert search.admissible_patterns == 0


def test_epsilon_search_domain(gaussian_4x8, dirac_dc9):
    with pytest.raises(DomainError):
        max_feasible_epsilon(null_space_basis(gaussian_4x8), 0.5)
    with pytest.raises(DomainError):
        max_feasible_epsilon(null_space_basis(dirac_dc9), 1.0)
    with pytest.raises(CapExceededError):
        max_feasible_epsilon(null_space_basis(dirac_dc9), 0.5, pattern_cap=10)


def test_case1_threshold():
    assert dirac_dc_case1_threshold(3, 0.5) == pytest.approx(0.3307, abs=1e-4)
    assert dirac_dc_case1_threshold(10 ** 7, 0.5) == pytest.approx(0.5, abs=1e-3)
    values = [dirac_dc_case1_threshold(p, 0.5) for p in range(2, 40)]
    assert all(a < b for a, b in zip(values, values[1:]))
    with pytest.raises(DomainError):
        dirac_dc_case1_threshold(1, 0.5)


def test_case2_condition():
    assert not dirac_dc_case2_condition(3, 0.5, 0.5)
    eps_max = dirac_dc_case2_max_epsilon(3, 0.5)
    assert eps_max == pytest.approx(0.38348, abs=1e-5)
    assert dirac_dc_case2_condition(3, 0.5, eps_max - 1e-9)
    assert not dirac_dc_case2_condition(3, 0.5, eps_max + 1e-6)
    verdicts = [dirac_dc_case2_condition(3, 0.5, eps) for eps in np.linspace(0.01, 1.0, 200)]
    assert verdicts == sorted(verdicts, reverse=True)


# --- near-best factor ---

def test_near_best_factor_trivial_kernel(rng):
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    factor = near_best_factor(Dictionary(atoms=q), rng.standard_normal(4), 0.5)
    assert factor.C_observed == pytest.approx(1.0)


def test_near_best_factor_coinciding_minimizers(dirac_dc9):
    assert near_best_factor(dirac_dc9, np.eye(9)[2], 0.5).C_observed == pytest.approx(1.0)


def test_near_best_factor_respects_guarantee(dirac_dc9):
    search = max_feasible_epsilon(null_space_basis(dirac_dc9), 0.5)
    bound = search.epsilon ** (0.5 - 1.0) + 1e-6
    for f in random_range_signals(dirac_dc9, 50, seed=8):
        factor = near_best_factor(dirac_dc9, f, 0.5)
        assert 1.0 - 1e-9 <= factor.C_observed <= bound
