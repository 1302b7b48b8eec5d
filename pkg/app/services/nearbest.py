"""When is the minimum-l1 representation also a near-best l_tau representation?

Sign patterns s in {-1, 0, +1}^N are tested against null vectors z. The
support Lambda of s splits into Lambda+ (s_k z_k > 0), Lambda- (s_k z_k < 0)
and the entries of Lambda where z vanishes, which belong to neither side.
"""
import math
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, field_validator

from app import config
from app.services.dictionary import Dictionary, NullSpaceBasis
from app.services.sparse_norms import SparsityNormOracle, quasi_norm_power
from app.utils.errors import CapExceededError, DomainError
from app.utils.logger import logger

CONDITION_TOL = 1e-12
PATTERN_BLOCK = 1 << 16


class SignPattern(BaseModel):
    s: List[int]

    @field_validator("s")
    @classmethod
    def _validate_signs(cls, value):
        if any(v not in (-1, 0, 1) for v in value):
            raise ValueError("sign patterns take values in {-1, 0, +1}")
        return value

    @property
    def Lambda(self) -> List[int]:
        return [k for k, v in enumerate(self.s) if v != 0]

    def array(self) -> np.ndarray:
        return np.array(self.s, dtype=float)


class LambdaPartition(BaseModel):
    plus: List[int]
    minus: List[int]
    zero_on_Lambda: List[int]
    complement: List[int]


class OptimalityCheck(BaseModel):
    holds: bool
    certified: bool
    worst_margin: float


class EpsilonSearch(BaseModel):
    epsilon: float
    near_best_constant: float
    tau: float
    vacuous: bool
    admissible_patterns: int
    front_size: int
    tol: float


class NearBestFactor(BaseModel):
    C_observed: float
    c_l1: List[float]
    c_tau: List[float]
    l1_tied: bool


PatternLike = Union[SignPattern, Sequence[int]]


def _pattern(s: PatternLike) -> np.ndarray:
    if isinstance(s, SignPattern):
        return s.array()
    return SignPattern(s=[int(v) for v in s]).array()


def _pair(s: PatternLike, z: Sequence[float]):
    s = _pattern(s)
    z = np.asarray(z, dtype=float).ravel()
    if s.size != z.size:
        raise DomainError(f"sign pattern has length {s.size}, null vector has length {z.size}")
    return s, z


def lambda_partition(s: PatternLike, z: Sequence[float]) -> LambdaPartition:
    s, z = _pair(s, z)
    agreement = s * z
    on = s != 0
    return LambdaPartition(
        plus=np.flatnonzero(on & (agreement > 0)).tolist(),
        minus=np.flatnonzero(on & (agreement < 0)).tolist(),
        zero_on_Lambda=np.flatnonzero(on & (z == 0)).tolist(),
        complement=np.flatnonzero(~on).tolist(),
    )


def _split_powers(s: np.ndarray, z: np.ndarray, tau: float):
    """sum |z|^tau over Lambda+, over Lambda-, and over everything."""
    agreement = s * z
    powers = np.abs(z) ** tau
    return powers[agreement > 0].sum(), powers[agreement < 0].sum(), powers.sum()


def l1_optimality_condition(
    s: PatternLike, Z: NullSpaceBasis, samples: int = 0, seed: int = 0
) -> OptimalityCheck:
    """|<s, z>| <= ||z restricted off Lambda||_1 for kernel vectors z.

    With d = 1 the check at +-z_0 is exact (both sides are 1-homogeneous);
    with d > 1 the basis vectors and `samples` random unit kernel vectors are
    checked, which can only refute.
    """
    s = _pattern(s)
    if s.size != Z.basis.shape[0]:
        raise DomainError(f"sign pattern has length {s.size}, kernel lives in R^{Z.basis.shape[0]}")
    if Z.d == 0:
        return OptimalityCheck(holds=True, certified=True, worst_margin=0.0)
    vectors = Z.basis.T
    if Z.d > 1 and samples > 0:
        rng = np.random.default_rng(seed)
        mixes = rng.standard_normal((samples, Z.d))
        mixes /= np.linalg.norm(mixes, axis=1, keepdims=True)
        vectors = np.vstack([vectors, mixes @ Z.basis.T])
    off = s == 0
    lhs = np.abs(vectors @ s)
    rhs = np.abs(vectors[:, off]).sum(axis=1)
    margins = lhs - rhs
    holds = bool(np.all(margins <= CONDITION_TOL * np.abs(vectors).sum(axis=1)))
    return OptimalityCheck(holds=holds, certified=Z.d == 1, worst_margin=float(margins.max()))


def sup_f_given_a(a: float, eps: float, tau: float) -> float:
    """sup over c > 0 of eps^(1-tau) c^tau - |c + a|^tau."""
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0,1], got {eps}")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0,1), got {tau}")
    if a < 0:
        return eps ** (1.0 - tau) * abs(a) ** tau
    # at eps = 1 the closed form gives -0.0; normalize the sign of zero
    return -((1.0 - eps) ** (1.0 - tau)) * abs(a) ** tau + 0.0


def _ltau_coefficients(eps: float, tau: float):
    return 1.0 + eps ** (1.0 - tau), 1.0 - (1.0 - eps) ** (1.0 - tau)


def condition_ltau(s: PatternLike, z: Sequence[float], eps: float, tau: float) -> bool:
    """||z||_tau^tau >= [1 + eps^(1-tau)] max(P, M) + [1 - (1-eps)^(1-tau)] min(P, M).

    P and M are the tau-sums of z over Lambda+ and Lambda-.
    """
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0,1], got {eps}")
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"tau must lie in (0,1], got {tau}")
    s, z = _pair(s, z)
    plus, minus, total = _split_powers(s, z, tau)
    high, low = _ltau_coefficients(eps, tau)
    rhs = high * max(plus, minus) + low * min(plus, minus)
    return bool(total >= rhs - CONDITION_TOL * max(total, 1.0))


def condition_l1(s: PatternLike, z: Sequence[float]) -> bool:
    """max(||z_{Lambda+}||_1, ||z_{Lambda-}||_1) <= ||z||_1 / 2."""
    s, z = _pair(s, z)
    plus, minus, total = _split_powers(s, z, 1.0)
    return bool(max(plus, minus) <= total / 2.0 + CONDITION_TOL * max(total, 1.0))


def _pattern_block(N: int, start: int, stop: int) -> np.ndarray:
    """Rows of {-1, 0, +1}^N for base-3 indices start ... stop - 1."""
    index = np.arange(start, stop, dtype=np.int64)[:, None]
    digits = (index // (3 ** np.arange(N, dtype=np.int64))[None, :]) % 3
    return digits - 1


def _pareto_front(points: np.ndarray) -> np.ndarray:
    """Rows (X, Y) not dominated componentwise by another row."""
    points = np.unique(points, axis=0)
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    front, best_y = [], -np.inf
    for x, y in points[order]:
        if y > best_y:
            front.append((x, y))
            best_y = y
    return np.array(front).reshape(-1, 2)


def max_feasible_epsilon(
    Z: NullSpaceBasis, tau: float, pattern_cap: Optional[int] = None, tol: float = 1e-6
) -> EpsilonSearch:
    """Largest eps such that every l1-admissible pattern also passes condition_ltau.

    Both conditions depend on a pattern only through (P, M) up to swapping,
    and are unchanged when z -> -z, so one orientation of z_0 suffices and only
    the Pareto front of (max, min) tau-sums has to be kept. Feasibility is
    monotone in eps, which makes bisection valid.
    """
    pattern_cap = config.PATTERN_CAP if pattern_cap is None else pattern_cap
    if Z.d != 1:
        raise DomainError(f"certified epsilon search needs a one-dimensional kernel, got d = {Z.d}")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0,1), got {tau}")
    z = Z.basis[:, 0]
    N = z.size
    total_patterns = 3 ** N
    if total_patterns > pattern_cap:
        raise CapExceededError(f"3^{N} = {total_patterns} sign patterns exceed the cap {pattern_cap}")

    a1, at = np.abs(z), np.abs(z) ** tau
    total1, total_tau = a1.sum(), at.sum()
    fronts, admissible = [], 0
    for start in range(0, total_patterns, PATTERN_BLOCK):
        agreement = _pattern_block(N, start, min(start + PATTERN_BLOCK, total_patterns)) * np.sign(z)[None, :]
        plus, minus = agreement > 0, agreement < 0
        p1, m1 = plus @ a1, minus @ a1
        ok = np.maximum(p1, m1) <= total1 / 2.0 + CONDITION_TOL * max(total1, 1.0)
        pt, mt = plus[ok] @ at, minus[ok] @ at
        points = np.column_stack([np.maximum(pt, mt), np.minimum(pt, mt)])
        points = points[points[:, 0] > 0]
        admissible += points.shape[0]
        if points.shape[0]:
            fronts.append(_pareto_front(points))

    if not fronts:
        logger.warning("⚠ No nonzero sign pattern satisfies the l1 condition; epsilon = 1 by vacuity")
        return EpsilonSearch(
            epsilon=1.0, near_best_constant=1.0, tau=tau, vacuous=True, admissible_patterns=0, front_size=0, tol=tol
        )
    front = _pareto_front(np.vstack(fronts))

    def feasible(eps: float) -> bool:
        high, low = _ltau_coefficients(eps, tau)
        rhs = high * front[:, 0] + low * front[:, 1]
        return bool(np.all(total_tau >= rhs - CONDITION_TOL * max(total_tau, 1.0)))

    if feasible(1.0):
        lo = 1.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
    constant = lo ** (tau - 1.0) if lo > 0 else math.inf
    logger.info(f"Epsilon search: {admissible} admissible patterns, front of {front.shape[0]}, eps*={lo:.6g}")
    return EpsilonSearch(
        epsilon=lo,
        near_best_constant=constant,
        tau=tau,
        vacuous=False,
        admissible_patterns=admissible,
        front_size=int(front.shape[0]),
        tol=tol,
    )


# --- Dirac + DC closed forms ---

def _check_case(p: int, tau: float):
    if p < 2:
        raise DomainError(f"p must be at least 2, got {p}")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0,1), got {tau}")


def dirac_dc_case1_threshold(p: int, tau: float) -> float:
    """1 / (1 + (1 + 2 (1 - p^(tau-1)) / (p-1))^(1/(1-tau)))."""
    _check_case(p, tau)
    inner = 1.0 + 2.0 * (1.0 - p ** (tau - 1.0)) / (p - 1.0)
    return 1.0 / (1.0 + inner ** (1.0 / (1.0 - tau)))


def _case2_rhs(p: int, tau: float) -> float:
    return (p + 1.0) / (p + 1.0 + 2.0 * (p ** (tau - 1.0) - 1.0))


def dirac_dc_case2_condition(p: int, tau: float, eps: float) -> bool:
    """((1 - eps) / eps)^(1-tau) >= (p+1) / (p + 1 + 2 (p^(tau-1) - 1))."""
    _check_case(p, tau)
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0,1], got {eps}")
    return bool(((1.0 - eps) / eps) ** (1.0 - tau) >= _case2_rhs(p, tau))


def dirac_dc_case2_max_epsilon(p: int, tau: float) -> float:
    _check_case(p, tau)
    return 1.0 / (1.0 + _case2_rhs(p, tau) ** (1.0 / (1.0 - tau)))


def near_best_factor(
    dictionary: Dictionary, f: Sequence[float], tau: float, cap: Optional[int] = None
) -> NearBestFactor:
    """(||c_l1||_tau / ||c_tau||_tau)^tau for the exact l1 and l_tau minimizers."""
    oracle = SparsityNormOracle(dictionary, cap=cap)
    c_l1 = oracle.representation(f, 1.0)
    c_tau = oracle.representation(f, tau)
    best = c_tau.norm_value ** tau
    ratio = float(quasi_norm_power(c_l1.coefficients, tau) / best) if best > 0 else 1.0
    if c_l1.tied:
        logger.warning("⚠ The l1 minimizer is not unique; factor uses the lexicographically first vertex")
    return NearBestFactor(
        C_observed=ratio,
        c_l1=c_l1.coefficients.tolist(),
        c_tau=c_tau.coefficients.tolist(),
        l1_tied=c_l1.tied,
    )
