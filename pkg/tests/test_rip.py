import math

import numpy as np
import pytest

from app.services.dictionary import Dictionary, build_dirac_dc, build_gaussian
from app.services.rip import (
    bernstein_constant_from_rip,
    lrip_constant,
    rip_constant,
    rip_report,
    sign_magnitude_grid,
    verify_lemma_ripbineq,
)
from app.utils.errors import DomainError


def test_orthonormal_basis_is_an_isometry():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 5)))
    for k in range(1, 6):
        level = rip_constant(Dictionary(atoms=q), k)
        assert level.delta_lower == pytest.approx(0.0, abs=1e-12)
        assert level.delta_upper == pytest.approx(0.0, abs=1e-12)


def test_unit_columns_have_zero_first_order_constant(dirac_dc4):
    assert lrip_constant(dirac_dc4, 1).delta == pytest.approx(0.0, abs=1e-12)


def test_dirac_dc_pairs(dirac_dc4):
    level = rip_constant(dirac_dc4, 2)
    assert level.delta_lower == pytest.approx(0.5)
    assert level.delta_upper == pytest.approx(0.5)
    assert 4 in level.worst_support_lower
    assert level.certified


def test_full_support_uses_whole_matrix(dirac_dc4):
    level = rip_constant(dirac_dc4, 5)
    # five atoms in R^4 are dependent
    assert level.delta_lower == pytest.approx(1.0)
    assert level.delta_upper == pytest.approx(1.0)


def test_rip_sampling_over_cap():
    dictionary = build_gaussian(8, 16, seed=1)
    sampled = rip_constant(dictionary, 6, cap=100, seed=3)
    exact = rip_constant(dictionary, 6)
    assert not sampled.certified
    assert sampled.delta_lower <= exact.delta_lower + 1e-12


def test_rip_report_levels(dirac_dc9):
    report = rip_report(dirac_dc9, kmax=4)
    assert [level.k for level in report.per_k] == [1, 2, 3, 4]
    assert report.certified
    lowers = [level.delta_lower for level in report.per_k]
    assert all(a <= b + 1e-12 for a, b in zip(lowers, lowers[1:]))


def test_rip_rejects_bad_k(dirac_dc4):
    with pytest.raises(DomainError):
        rip_constant(dirac_dc4, 0)
    with pytest.raises(DomainError):
        rip_report(dirac_dc4, kmax=0)


def test_bernstein_constant_from_rip():
    assert bernstein_constant_from_rip(0.25, 0.75, 0.5, 1.0) == pytest.approx(2.0 * math.sqrt(2.0))
    assert bernstein_constant_from_rip(0.25, 0.5, 0.3, 2.0) == pytest.approx(2.0)
    assert bernstein_constant_from_rip(1.0, 0.0, 1.0 - 1e-12, 0.5) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(DomainError):
        bernstein_constant_from_rip(1.0, 1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        bernstein_constant_from_rip(0.0, 0.1, 0.5, 1.0)


def test_sign_magnitude_grid():
    grid = sign_magnitude_grid(3)
    assert grid.shape == (3 * 36, 3)
    assert np.all(grid[:, 0] > 0)
    assert np.unique(grid, axis=0).shape[0] == grid.shape[0]


def test_lemma_constants_on_dirac_dc4(dirac_dc4):
    verdict = verify_lemma_ripbineq(dirac_dc4, 1.0, 0.4, trials=100, seed=1)
    assert verdict.k_kappa == 2
    assert verdict.delta == pytest.approx(0.5)
    assert verdict.A == pytest.approx(1.0)
    assert verdict.C == pytest.approx(math.sqrt(2.5))
    assert verdict.violations == 0


def test_lemma_constants_on_dirac_dc9(dirac_dc9):
    verdict = verify_lemma_ripbineq(dirac_dc9, 1.0, 0.5, trials=100, seed=1)
    assert verdict.k_kappa == 5
    assert verdict.delta == pytest.approx(2.0 / 3.0)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("kappa", [0.25, 0.5])
def test_lemma_holds_on_dirac_dc4(dirac_dc4, tau, kappa):
    verdict = verify_lemma_ripbineq(dirac_dc4, tau, kappa, trials=10_000, seed=5)
    assert verdict.hypotheses_met
    assert verdict.violations == 0
    assert verdict.dual_frame_violations == 0
    assert verdict.worst_ratio_to_bound <= 1.0 + 1e-8


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("kappa", [0.25, 0.5])
def test_lemma_holds_on_dirac_dc9(dirac_dc9, tau, kappa):
    verdict = verify_lemma_ripbineq(dirac_dc9, tau, kappa, trials=2000, seed=6)
    assert verdict.violations == 0
    assert verdict.dual_frame_violations == 0
    assert verdict.checked > 2000


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("kappa", [0.25, 0.5])
def test_lemma_holds_on_gaussian_dictionaries(seed, tau, kappa):
    dictionary = build_gaussian(8, 16, seed)
    verdict = verify_lemma_ripbineq(dictionary, tau, kappa, trials=40, seed=seed, vertex_cap=8)
    assert verdict.hypotheses_met
    assert verdict.violations == 0
    assert verdict.dual_frame_violations == 0
    # the sign/magnitude grid is too large here; random vectors only
    assert not verdict.certified


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("kappa", [0.25, 0.5])
def test_lemma_holds_on_twenty_gaussian_dictionaries(seed, tau, kappa):
    dictionary = build_gaussian(8, 16, seed)
    verdict = verify_lemma_ripbineq(dictionary, tau, kappa, trials=10_000, seed=seed, vertex_cap=8)
    assert verdict.violations == 0
    assert verdict.dual_frame_violations == 0
    assert verdict.worst_ratio_to_bound <= 1.0 + 1e-8


@pytest.mark.parametrize("dictionary", [build_dirac_dc(9), build_gaussian(6, 10, seed=2)], ids=["dirac-dc9", "gaussian-6x10"])
def test_rip_constants_ignore_atom_order(dictionary):
    order = np.random.default_rng(4).permutation(dictionary.N)
    shuffled = Dictionary(atoms=dictionary.atoms[:, order])
    for k in range(1, 5):
        level, moved = rip_constant(dictionary, k), rip_constant(shuffled, k)
        assert moved.delta_lower == pytest.approx(level.delta_lower, abs=1e-12)
        assert moved.delta_upper == pytest.approx(level.delta_upper, abs=1e-12)


def test_lemma_hypotheses_unmet_without_lower_frame_bound():
    verdict = verify_lemma_ripbineq(Dictionary(atoms=np.ones((2, 3))), 1.0, 0.5, trials=10)
    assert not verdict.hypotheses_met
    assert verdict.C is None
    assert verdict.checked == 0
