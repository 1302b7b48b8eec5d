"""Bernstein-type constants of dictionaries and of their null vectors.

Finite-dimensional surrogates: suprema over m run over 1 <= m < nnz(z), since
levels with an identically zero complement carry no information; such levels
are reported as excluded instead of returning +inf silently.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app import config
from app.services.dictionary import Dictionary, PerturbedNullVector, null_space_basis
from app.services.sparse_norms import sparsity_norm_evaluator
from app.utils.combinatorics import complement_mask, sample_subsets, subset_array, supports_of_size
from app.utils.errors import DomainError
from app.utils.logger import log_rows_preview, logger

LAMBDA_GRID_SIZE = 200_001
WITNESS_MULTIPLIERS = np.geomspace(1e-2, 1e2, 17)


class BernsteinLevel(BaseModel):
    m: int
    worst_ratio: float
    support: List[int]
    coefficients: List[float]
    certified: bool


class BernsteinReport(BaseModel):
    tau: float
    r: float
    per_m: List[BernsteinLevel]
    sup_ratio: float
    certified: bool


class PropAResult(BaseModel):
    value: float
    holds: bool
    per_m: List[float]
    excluded_m: List[int]
    certified: bool


class C1Result(BaseModel):
    value: float
    per_m: List[float]
    excluded_m: List[int]
    degenerate: bool


class C2Result(BaseModel):
    value: float
    witness_support: List[int]
    certified: bool


class BzValue(BaseModel):
    grid_value: float
    closed_form: float
    printed_form: float
    lambda_star: Optional[float]
    attained: bool


class SandwichReport(BaseModel):
    c1: float
    b_sup: float
    b_sup_closed_form: float
    b_sup_enumerated: Optional[float]
    witness_support: List[int]
    lower_holds: bool
    upper_holds: bool
    holds: bool
    excluded_m: List[int]


class NullVectorStats(BaseModel):
    z: List[float]
    head_l1: List[float]
    sigma_l1: List[float]
    sigma_l2: List[float]
    gamma: List[float]
    C1: float
    C2: float
    tail_constant: float
    sigma_ratio_sup: float
    certified: bool


class DivergenceRow(BaseModel):
    ell: int
    m_ell: int
    lhs1: float
    lhs2: float
    lower_bound: float
    holds: bool


def _as_vector(z: Sequence[float]) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise DomainError("null vector must be a finite, non-empty vector")
    return z


def _signs(x: np.ndarray) -> np.ndarray:
    """sign with sign(0) = +1."""
    return np.where(x >= 0, 1.0, -1.0)


def sorted_magnitudes(z: Sequence[float]) -> np.ndarray:
    return np.sort(np.abs(_as_vector(z)))[::-1]


def head_and_tails(z: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For m = 0 ... N: ||z_m||_1, sigma_m(z)_1 and sigma_m(z)_2 (m largest entries kept)."""
    a = sorted_magnitudes(z)
    head = np.concatenate([[0.0], np.cumsum(a)])
    tail1 = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
    tail2 = np.sqrt(np.concatenate([np.cumsum((a ** 2)[::-1])[::-1], [0.0]]))
    return head, tail1, tail2


# --- gamma ratios ---

def gamma_ratio(z: Sequence[float], I: Sequence[int]) -> float:
    """||z_{I^c}||_1 / ||z_{I^c}||_2, +inf when the complement vanishes."""
    z = _as_vector(z)
    mask = np.ones(z.size, dtype=bool)
    mask[list(I)] = False
    rest = np.abs(z[mask])
    l2 = np.linalg.norm(rest)
    if l2 == 0.0:
        return math.inf
    return float(rest.sum() / l2)


def _gamma_rows(a: np.ndarray, rows: np.ndarray) -> np.ndarray:
    kept = a[None, :] * complement_mask(a.size, rows)
    l1 = kept.sum(axis=1)
    l2 = np.linalg.norm(kept, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(l2 > 0, l1 / np.where(l2 > 0, l2, 1.0), np.inf)


def gamma_m(z: Sequence[float], m: int, cap: Optional[int] = None, seed: int = 0) -> Tuple[float, bool]:
    """sup over |I| <= m of gamma_I; the flag is True when the supremum is exact."""
    z = _as_vector(z)
    cap = config.SUPPORT_CAP if cap is None else cap
    a = np.abs(z)
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    if m >= np.count_nonzero(z):
        return math.inf, True
    total = sum(math.comb(z.size, j) for j in range(m + 1))
    if total <= cap:
        best = max(float(_gamma_rows(a, subset_array(z.size, j)).max()) for j in range(m + 1))
        return best, True
    logger.warning(f"gamma_m: {total} supports exceed cap {cap}; sampling")
    rng = np.random.default_rng(seed)
    best = float(_gamma_rows(a, np.empty((1, 0), dtype=np.intp))[0])
    for j in range(1, m + 1):
        rows = sample_subsets(z.size, j, config.SAMPLED_SUPPORTS, rng)
        best = max(best, float(_gamma_rows(a, rows).max()))
    top = np.sort(np.argsort(-a, kind="stable")[:m])[None, :]
    best = max(best, float(_gamma_rows(a, top)[0]))
    return best, False


def prop_a_sufficient(z: Sequence[float], mmax: int, cap: Optional[int] = None) -> PropAResult:
    """sup_{1 <= m <= mmax, m < nnz} gamma_m^z / sqrt(m)."""
    z = _as_vector(z)
    nnz = np.count_nonzero(z)
    levels = range(1, min(mmax, z.size) + 1)
    per_m, excluded, certified = [], [], True
    for m in levels:
        if m >= nnz:
            excluded.append(m)
            continue
        value, exact = gamma_m(z, m, cap)
        per_m.append(value / math.sqrt(m))
        certified &= exact
    value = max(per_m) if per_m else 0.0
    holds = bool(per_m) and math.isfinite(value)
    return PropAResult(value=value, holds=holds, per_m=per_m, excluded_m=excluded, certified=certified)


# --- C1, C2 and the one-dimensional kernel functional ---

def c1_constant(z: Sequence[float], mmax: int) -> C1Result:
    """sup_m ||z_m||_1 / (sqrt(m) sigma_m(z)_2) over 1 <= m <= mmax with sigma_m(z)_2 > 0."""
    z = _as_vector(z)
    if not np.any(z):
        raise DomainError("C1 is undefined for the zero vector")
    head, _, tail2 = head_and_tails(z)
    per_m, excluded = [], []
    for m in range(1, min(mmax, z.size) + 1):
        if tail2[m] == 0.0:
            excluded.append(m)
            continue
        per_m.append(float(head[m] / (math.sqrt(m) * tail2[m])))
    if not per_m:
        logger.warning("C1: no admissible level (z has a single nonzero entry)")
    return C1Result(value=max(per_m, default=0.0), per_m=per_m, excluded_m=excluded, degenerate=not per_m)


def _c2_rows(a: np.ndarray, rows: np.ndarray) -> np.ndarray:
    mask = complement_mask(a.size, rows)
    rest = a[None, :] * mask
    inside = a[None, :] * ~mask
    l2 = np.linalg.norm(rest, axis=1)
    numerator = np.minimum(inside.sum(axis=1), rest.sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        values = numerator / (math.sqrt(rows.shape[1]) * np.where(l2 > 0, l2, 1.0))
    return np.where(l2 > 0, values, -np.inf)


def c2_constant(z: Sequence[float], mmax: int, cap: Optional[int] = None, seed: int = 0) -> C2Result:
    """sup over 1 <= |I| <= mmax of min(||z_I||_1, ||z_{I^c}||_1) / (sqrt(|I|) ||z_{I^c}||_2).

    For a fixed I the ratio decreases in m >= |I|, so the level is m = |I|.
    Supports with a vanishing complement are skipped.
    """
    z = _as_vector(z)
    cap = config.SUPPORT_CAP if cap is None else cap
    a = np.abs(z)
    sizes = range(1, min(mmax, z.size) + 1)
    total = sum(math.comb(z.size, j) for j in sizes)
    exhaustive = total <= cap
    rng = np.random.default_rng(seed)
    best, witness = -math.inf, []
    for j in sizes:
        if exhaustive:
            rows = subset_array(z.size, j)
        else:
            prefix = np.arange(j)[None, :]
            top = np.sort(np.argsort(-a, kind="stable")[:j])[None, :]
            rows = np.vstack([prefix, top, sample_subsets(z.size, j, config.SAMPLED_SUPPORTS, rng)])
        values = _c2_rows(a, rows)
        i = int(np.argmax(values))
        if values[i] > best:
            best, witness = float(values[i]), rows[i].tolist()
    if not exhaustive:
        logger.warning(f"C2: {total} supports exceed cap {cap}; value is a sampled lower bound")
    return C2Result(value=max(best, 0.0), witness_support=witness, certified=exhaustive)


def b_z_support_value(z: Sequence[float], I: Sequence[int], grid_size: int = LAMBDA_GRID_SIZE) -> BzValue:
    """sup over lambda >= 0 of (s1 + lambda m) / (sqrt(m) sqrt(t^2 + lambda^2 m)).

    The family is c = -[z_I + lambda sign(z_I) 1_I] with s1 = ||z_I||_1,
    t = ||z_{I^c}||_2 and m = |I|. The grid value is returned together with
    the closed form sqrt(1 + s1^2 / (m t^2)) (maximizer lambda* = t^2 / s1) and
    the form with the lambda^2 m^2 denominator.
    """
    z = _as_vector(z)
    I = sorted(set(int(i) for i in I))
    m = len(I)
    if m == 0:
        raise DomainError("the support I must be non-empty")
    mask = np.ones(z.size, dtype=bool)
    mask[I] = False
    s1 = float(np.abs(z[I]).sum())
    t = float(np.linalg.norm(z[mask]))
    if t == 0.0:
        raise DomainError("z vanishes off I: degenerate complement")

    scale = t / math.sqrt(m)
    lambdas = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, grid_size) * scale])
    ratios = (s1 + lambdas * m) / (math.sqrt(m) * np.sqrt(t ** 2 + lambdas ** 2 * m))
    closed_form = math.sqrt(1.0 + s1 ** 2 / (m * t ** 2))
    printed_form = math.sqrt((s1 ** 2 / t ** 2 + 1.0) / m)
    if s1 == 0.0:
        # increasing towards 1 as lambda -> infinity, never attained
        return BzValue(grid_value=1.0, closed_form=closed_form, printed_form=printed_form, lambda_star=None, attained=False)
    return BzValue(
        grid_value=float(ratios.max()),
        closed_form=closed_form,
        printed_form=printed_form,
        lambda_star=t ** 2 / s1,
        attained=True,
    )


def sandwich_check(z: Sequence[float], mmax: int, cap: Optional[int] = None, tol: float = 1e-8) -> SandwichReport:
    """C1 <= B_sup <= C1 + 1 with B_sup the supremum of the per-support functional.

    B_sup is the largest lambda-grid value of b_z_support_value over the
    candidate supports: for each level the m largest entries, plus the
    closed-form maximizer among all supports when the enumeration fits under
    the cap. The closed form is reported alongside as a cross-check.
    """
    z = _as_vector(z)
    cap = config.SUPPORT_CAP if cap is None else cap
    c1 = c1_constant(z, mmax)
    _, _, tail2 = head_and_tails(z)
    order = np.argsort(-np.abs(z), kind="stable")
    levels = [m for m in range(1, min(mmax, z.size) + 1) if tail2[m] > 0]
    if not levels:
        raise DomainError("sandwich check needs at least one level with a nonzero complement")
    supports = {m: [sorted(order[:m].tolist())] for m in levels}

    enumerated = None
    total = sum(math.comb(z.size, m) for m in levels)
    if total <= cap:
        a = np.abs(z)
        enumerated = 0.0
        for m in levels:
            rows = subset_array(z.size, m)
            mask = complement_mask(z.size, rows)
            s1 = (a[None, :] * ~mask).sum(axis=1)
            t = np.linalg.norm(a[None, :] * mask, axis=1)
            closed = np.full(rows.shape[0], -np.inf)
            admissible = t > 0
            closed[admissible] = np.sqrt(1.0 + s1[admissible] ** 2 / (m * t[admissible] ** 2))
            i = int(np.argmax(closed))
            enumerated = max(enumerated, float(closed[i]))
            if rows[i].tolist() not in supports[m]:
                supports[m].append(rows[i].tolist())

    b_sup, closed_sup, witness = -math.inf, -math.inf, []
    for m in levels:
        for I in supports[m]:
            value = b_z_support_value(z, I)
            closed_sup = max(closed_sup, value.closed_form)
            if value.grid_value > b_sup:
                b_sup, witness = value.grid_value, I

    lower_holds = bool(c1.value <= b_sup + tol * max(1.0, b_sup))
    upper_holds = bool(b_sup <= c1.value + 1.0 + tol * max(1.0, b_sup))
    if not (lower_holds and upper_holds):
        logger.error(f"Sandwich violated: C1={c1.value:.10g}, B_sup={b_sup:.10g}")
    return SandwichReport(
        c1=c1.value,
        b_sup=b_sup,
        b_sup_closed_form=closed_sup,
        b_sup_enumerated=enumerated,
        witness_support=witness,
        lower_holds=lower_holds,
        upper_holds=upper_holds,
        holds=lower_holds and upper_holds,
        excluded_m=c1.excluded_m,
    )


def tail_dominance_constant(z: Sequence[float]) -> float:
    """max_k sum_{j >= k} |z_j| / |z_k| in the given order, up to the last nonzero entry."""
    a = np.abs(_as_vector(z))
    nonzero = np.flatnonzero(a)
    if nonzero.size == 0:
        raise DomainError("tail dominance is undefined for the zero vector")
    head = a[: nonzero[-1] + 1]
    if np.any(head == 0.0):
        return math.inf
    tails = np.cumsum(head[::-1])[::-1]
    return float((tails / head).max())


def null_vector_stats(z: Sequence[float], mmax: int, cap: Optional[int] = None) -> NullVectorStats:
    """Head and tail norms, gamma_m, C1 and C2 for a single kernel vector.

    The tail-dominance constant is taken over the magnitudes of z sorted in
    descending order, not over z in its stored order.
    """
    z = _as_vector(z)
    if not np.any(z):
        raise DomainError("null-vector statistics need a nonzero vector")
    head, tail1, tail2 = head_and_tails(z)
    top = min(mmax, z.size)
    gammas, certified = [], True
    for m in range(top + 1):
        value, exact = gamma_m(z, m, cap)
        gammas.append(value)
        certified &= exact
    ratios = [tail1[m] / (math.sqrt(m) * tail2[m]) for m in range(1, top + 1) if tail2[m] > 0]
    c2 = c2_constant(z, mmax, cap)
    sorted_z = sorted_magnitudes(z)
    stats = NullVectorStats(
        z=z.tolist(),
        head_l1=head[: top + 1].tolist(),
        sigma_l1=tail1[: top + 1].tolist(),
        sigma_l2=tail2[: top + 1].tolist(),
        gamma=gammas,
        C1=c1_constant(z, mmax).value,
        C2=c2.value,
        tail_constant=tail_dominance_constant(sorted_z),
        sigma_ratio_sup=float(max(ratios, default=0.0)),
        certified=certified and c2.certified,
    )
    return stats


def divergence_witness(pz: PerturbedNullVector) -> List[DivergenceRow]:
    """Per retained block, the l1/l2 growth of the perturbed vector beyond m_l."""
    blocks = pz.block_boundaries
    if len(blocks) < 3:
        raise DomainError("divergence witness needs at least two retained blocks")
    a = np.abs(pz.z_tilde)
    rows = []
    for ell in range(len(blocks) - 1):
        m_ell = blocks[ell]
        inside, rest = a[:m_ell], a[m_ell:]
        rest_l2_sq = float(np.sum(rest ** 2))
        lhs1 = float(rest.sum() ** 2 / (m_ell * rest_l2_sq))
        lhs2 = float(inside.sum() ** 2 / (m_ell * rest_l2_sq))
        lower = blocks[ell + 1] / m_ell - 1.0
        rows.append(
            DivergenceRow(
                ell=ell, m_ell=m_ell, lhs1=lhs1, lhs2=lhs2, lower_bound=lower, holds=lhs1 >= lower * (1.0 - 1e-12)
            )
        )
    log_rows_preview("divergence witness", [row.model_dump() for row in rows])
    return rows


# --- empirical Bernstein ratio of a dictionary ---

def bernstein_ratio_empirical(
    dictionary: Dictionary,
    tau: float,
    mmax: int,
    trials: int,
    seed: int = 0,
    cap: Optional[int] = None,
    vertex_cap: Optional[int] = None,
) -> BernsteinReport:
    """Lower bounds on sup ||Phi_I c||_{l_tau(Phi)} / (m^r ||Phi_I c||), r = 1/tau - 1/2.

    Draws per support: `trials` Gaussian coefficient vectors, and for every
    null-basis vector z the extremal families c = -z_I and
    c = -[z_I + lambda sign(z_I) 1_I].
    """
    cap = config.SUPPORT_CAP if cap is None else cap
    r = 1.0 / tau - 0.5
    evaluate = sparsity_norm_evaluator(dictionary, tau, vertex_cap)
    Z = null_space_basis(dictionary).basis
    atoms = dictionary.atoms
    levels, all_exact = [], True
    for m in range(1, min(mmax, dictionary.N) + 1):
        supports, exact = supports_of_size(dictionary.N, m, cap, config.SAMPLED_SUPPORTS, seed + m)
        all_exact &= exact
        # trial-major draws: a larger `trials` extends every support's draw set
        rng = np.random.default_rng([seed, m])
        draws = [rng.standard_normal((trials, supports.shape[0], m)).transpose(1, 0, 2)]
        for z in Z.T:
            z_I = z[supports]
            rest = np.linalg.norm(z[None, :] * complement_mask(dictionary.N, supports), axis=1)
            s1 = np.abs(z_I).sum(axis=1)
            scale = rest / math.sqrt(m)
            with np.errstate(divide="ignore", invalid="ignore"):
                lambda_star = np.where(s1 > 0, rest ** 2 / np.where(s1 > 0, s1, 1.0), scale)
            lambdas = np.hstack([np.zeros((supports.shape[0], 1)), lambda_star[:, None], scale[:, None] * WITNESS_MULTIPLIERS])
            family = -(z_I[:, None, :] + lambdas[:, :, None] * _signs(z_I)[:, None, :])
            draws.append(family)
        coefficients = np.concatenate(draws, axis=1)
        signals = np.einsum("ask,spk->spa", atoms[:, supports], coefficients)
        count = coefficients.shape[1]
        flat_signals = signals.reshape(-1, dictionary.m)
        flat_coefficients = coefficients.reshape(-1, m)
        signal_norms = np.linalg.norm(flat_signals, axis=1)
        usable = signal_norms > 1e-10 * np.maximum(np.linalg.norm(flat_coefficients, axis=1), np.finfo(float).tiny)
        ratios = np.full(flat_signals.shape[0], -np.inf)
        ratios[usable] = evaluate(flat_signals[usable]) / (m ** r * signal_norms[usable])
        best = int(np.argmax(ratios))
        levels.append(
            BernsteinLevel(
                m=m,
                worst_ratio=float(ratios[best]),
                support=supports[best // count].tolist(),
                coefficients=flat_coefficients[best].tolist(),
                certified=exact,
            )
        )
    if not levels:
        raise DomainError(f"mmax must be at least 1, got {mmax}")
    log_rows_preview("Bernstein levels", [{"m": lv.m, "ratio": lv.worst_ratio} for lv in levels])
    return BernsteinReport(
        tau=tau,
        r=r,
        per_m=levels,
        sup_ratio=max(lv.worst_ratio for lv in levels),
        certified=all_exact,
    )
