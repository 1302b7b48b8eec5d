"""Restricted isometry constants by support enumeration, and the check that a
lower RIP plus a lower frame bound imply a Bernstein inequality.
"""
import math
from itertools import product
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from app import config
from app.services.dictionary import Dictionary, frame_bounds
from app.services.sparse_norms import sparsity_norm_evaluator
from app.utils.combinatorics import supports_of_size
from app.utils.errors import DomainError
from app.utils.logger import log_rows_preview, logger

SVD_BLOCK = 8192
GRID_MAGNITUDES = (1.0, 0.5, 0.25)
LEMMA_SLACK = 1e-8


class LripResult(BaseModel):
    k: int
    delta: float
    support: List[int]
    certified: bool


class RipLevel(BaseModel):
    k: int
    delta_lower: float
    delta_upper: float
    worst_support_lower: List[int]
    worst_support_upper: List[int]
    certified: bool


class RipReport(BaseModel):
    per_k: List[RipLevel]
    certified: bool


class LemmaVerdict(BaseModel):
    tau: float
    kappa: float
    k_kappa: int
    A: float
    delta: float
    r: float
    C: Optional[float]
    hypotheses_met: bool
    checked: int
    violations: int
    worst_ratio_to_bound: float
    worst_support: List[int]
    worst_coefficients: List[float]
    dual_frame_checked: int
    dual_frame_violations: int
    certified: bool


def _extreme_singular_values(dictionary: Dictionary, supports: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Squared smallest and largest singular values of Phi_I for every support row."""
    k = supports.shape[1]
    lows, highs = [], []
    for start in range(0, supports.shape[0], SVD_BLOCK):
        rows = supports[start:start + SVD_BLOCK]
        s = np.linalg.svd(dictionary.atoms[:, rows].transpose(1, 0, 2), compute_uv=False)
        # a wide block (k > m) has a kernel
        lows.append(s[:, -1] ** 2 if k <= dictionary.m else np.zeros(rows.shape[0]))
        highs.append(s[:, 0] ** 2)
    return np.concatenate(lows), np.concatenate(highs)


def _first_extreme(values: np.ndarray, largest: bool) -> int:
    target = values.max() if largest else values.min()
    close = np.abs(values - target) <= 1e-12 * max(1.0, abs(target))
    return int(np.flatnonzero(close)[0])


def _supports(dictionary: Dictionary, k: int, cap: Optional[int], seed: int) -> Tuple[np.ndarray, bool]:
    if not 1 <= k <= dictionary.N:
        raise DomainError(f"k must lie in [1, {dictionary.N}], got {k}")
    cap = config.SUPPORT_CAP if cap is None else cap
    return supports_of_size(dictionary.N, k, cap, config.SAMPLED_SUPPORTS, seed)


def rip_constant(dictionary: Dictionary, k: int, cap: Optional[int] = None, seed: int = 0) -> RipLevel:
    """Two-sided constants 1 - min sigma_min(Phi_I)^2 and max sigma_max(Phi_I)^2 - 1 over |I| = k."""
    supports, exact = _supports(dictionary, k, cap, seed)
    lows, highs = _extreme_singular_values(dictionary, supports)
    i_low, i_high = _first_extreme(lows, largest=False), _first_extreme(highs, largest=True)
    return RipLevel(
        k=k,
        delta_lower=float(1.0 - lows[i_low]),
        delta_upper=float(highs[i_high] - 1.0),
        worst_support_lower=supports[i_low].tolist(),
        worst_support_upper=supports[i_high].tolist(),
        certified=exact,
    )


def lrip_constant(dictionary: Dictionary, k: int, cap: Optional[int] = None, seed: int = 0) -> LripResult:
    level = rip_constant(dictionary, k, cap, seed)
    return LripResult(k=k, delta=level.delta_lower, support=level.worst_support_lower, certified=level.certified)


def rip_report(dictionary: Dictionary, kmax: int, cap: Optional[int] = None, seed: int = 0) -> RipReport:
    levels = [rip_constant(dictionary, k, cap, seed) for k in range(1, min(kmax, dictionary.N) + 1)]
    if not levels:
        raise DomainError(f"kmax must be at least 1, got {kmax}")
    log_rows_preview("RIP levels", [level.model_dump() for level in levels])
    return RipReport(per_k=levels, certified=all(level.certified for level in levels))


def bernstein_constant_from_rip(A: float, delta: float, kappa: float, tau: float) -> float:
    """max{(1 - delta)^(-1/2), A^(-1/2) kappa^(1/2 - 1/tau)}."""
    if not A > 0:
        raise DomainError(f"lower frame bound must be positive, got {A}")
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"delta must lie in [0,1), got {delta}")
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0,1), got {kappa}")
    if not 0.0 < tau <= 2.0:
        raise DomainError(f"tau must lie in (0,2], got {tau}")
    return max((1.0 - delta) ** -0.5, A ** -0.5 * kappa ** (0.5 - 1.0 / tau))


def sign_magnitude_grid(k: int) -> np.ndarray:
    """Coefficient patterns with entries in {+-1, +-1/2, +-1/4}, first entry positive."""
    signed = GRID_MAGNITUDES + tuple(-x for x in GRID_MAGNITUDES)
    return np.array([(first,) + rest for first in GRID_MAGNITUDES for rest in product(signed, repeat=k - 1)])


def verify_lemma_ripbineq(
    dictionary: Dictionary,
    tau: float,
    kappa: float,
    trials: int,
    seed: int = 0,
    cap: Optional[int] = None,
    vertex_cap: Optional[int] = None,
    grid_kmax: int = 4,
    grid_cap: Optional[int] = None,
) -> LemmaVerdict:
    """Check ||Phi c||_{l_tau(Phi)} <= C k^r ||Phi c|| over k-sparse c, r = 1/tau - 1/2.

    A and delta(ceil(kappa N)) are measured; C comes from bernstein_constant_from_rip.
    Tested vectors: every support (or a sample) with a sign/magnitude grid up to grid_kmax,
    plus `trials` Gaussian vectors on random supports. Vectors with k > kappa N are
    also checked against the dual-frame bound ||c_l2|| <= A^(-1/2) ||f||.
    """
    grid_cap = config.SPARSE_GRID_CAP if grid_cap is None else grid_cap
    N = dictionary.N
    r = 1.0 / tau - 0.5
    A = frame_bounds(dictionary).A
    k_kappa = min(N, max(1, math.ceil(kappa * N - 1e-12)))
    delta = lrip_constant(dictionary, k_kappa, cap, seed).delta

    def verdict(**fields) -> LemmaVerdict:
        base = dict(tau=tau, kappa=kappa, k_kappa=k_kappa, A=A, delta=delta, r=r)
        return LemmaVerdict(**base, **fields)

    if A <= 1e-12 or delta >= 1.0:
        logger.warning(f"⚠ Lemma hypotheses unmet on {dictionary.label}: A={A:.3g}, delta={delta:.3g}")
        return verdict(
            C=None, hypotheses_met=False, checked=0, violations=0, worst_ratio_to_bound=0.0,
            worst_support=[], worst_coefficients=[], dual_frame_checked=0, dual_frame_violations=0, certified=False,
        )
    C = bernstein_constant_from_rip(A, delta, kappa, tau)
    evaluate = sparsity_norm_evaluator(dictionary, tau, vertex_cap)
    pinv = np.linalg.pinv(dictionary.atoms)

    # (support, coefficients) blocks grouped by sparsity level
    batches: List[Tuple[int, np.ndarray, np.ndarray]] = []
    certified = True
    grid_levels = range(1, min(grid_kmax, N) + 1)
    level_supports = {k: _supports(dictionary, k, cap, seed + k) for k in grid_levels}
    grid_total = sum(rows.shape[0] * 3 * 6 ** (k - 1) for k, (rows, _) in level_supports.items())
    if grid_total <= grid_cap:
        for k, (rows, exact) in level_supports.items():
            certified &= exact
            grid = sign_magnitude_grid(k)
            supports = np.repeat(rows, grid.shape[0], axis=0)
            batches.append((k, supports, np.tile(grid, (rows.shape[0], 1))))
    else:
        certified = False
        logger.warning(f"Sign/magnitude grid of {grid_total} vectors exceeds cap {grid_cap}; random vectors only")
    if N > grid_kmax:
        certified = False

    rng = np.random.default_rng(seed)
    levels = rng.integers(1, N + 1, size=trials)
    for k in np.unique(levels):
        count = int(np.sum(levels == k))
        supports = np.sort(np.argsort(rng.random((count, N)), axis=1)[:, :k], axis=1)
        batches.append((int(k), supports, rng.standard_normal((count, int(k)))))

    checked = violations = dual_checked = dual_violations = 0
    worst, worst_support, worst_coefficients = -np.inf, [], []
    for k, supports, coefficients in batches:
        signals = np.einsum("mpk,pk->pm", dictionary.atoms[:, supports], coefficients)
        norms = np.linalg.norm(signals, axis=1)
        usable = norms > 1e-12 * np.linalg.norm(coefficients, axis=1)
        if not np.any(usable):
            continue
        units = signals[usable] / norms[usable, None]
        bound = C * k ** r
        values = evaluate(units)
        checked += units.shape[0]
        violations += int(np.sum(values > bound + LEMMA_SLACK))
        i = int(np.argmax(values))
        if values[i] / bound > worst:
            worst = float(values[i] / bound)
            worst_support = supports[usable][i].tolist()
            worst_coefficients = coefficients[usable][i].tolist()
        if k > kappa * N:
            dual = np.linalg.norm(units @ pinv.T, axis=1)
            dual_checked += units.shape[0]
            dual_violations += int(np.sum(dual > A ** -0.5 * (1.0 + 1e-9)))

    if violations or dual_violations:
        logger.error(
            f"Lemma check on {dictionary.label}: {violations} violations, {dual_violations} dual-frame violations"
        )
    logger.info(f"Lemma check on {dictionary.label}: tau={tau:g}, C={C:.6g}, {checked} checked, worst ratio {worst:.6g}")
    return verdict(
        C=C,
        hypotheses_met=True,
        checked=checked,
        violations=violations,
        worst_ratio_to_bound=worst if checked else 0.0,
        worst_support=worst_support,
        worst_coefficients=worst_coefficients,
        dual_frame_checked=dual_checked,
        dual_frame_violations=dual_violations,
        certified=certified,
    )
