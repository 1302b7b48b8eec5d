"""Best k-term approximation, sparsity norms, K-functionals and the norm
equivalence harness.

The minimum-l_tau oracle (tau <= 1) relies on ||c||_tau^tau being concave on
every orthant: its minimum over the affine solution set {c : Phi c = f} is
attained at a point with at least d = dim ker(Phi) vanishing coordinates. For
every size-d coordinate set S whose null-basis block Z_S is invertible the
unique solution with c_S = 0 is a candidate, and the best candidate is the
exact minimizer.
"""
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq, linprog, minimize_scalar

from app import config
from app.services.dictionary import Dictionary, NullSpaceBasis, frame_bounds, null_space_basis
from app.utils.combinatorics import complement_mask, iter_subset_chunks, subset_array
from app.utils.errors import CapExceededError, DomainError, NotInRangeError
from app.utils.logger import log_sequence_preview, logger

TIE_RTOL = 1e-12
CERTIFICATE_RTOL = 1e-6
# signals x candidates x N floats materialized at once by the batched oracle
ORACLE_BLOCK = 2_000_000


class KTermApproximation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    k: int
    support: List[int]
    coefficients: np.ndarray
    residual: float
    exact: bool = True

    def full_coefficients(self, N: int) -> np.ndarray:
        c = np.zeros(N)
        c[self.support] = self.coefficients
        return c


class SparseRepresentation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: np.ndarray
    tau: float
    norm_value: float
    exact: bool
    tied: bool = False

    @property
    def support(self) -> List[int]:
        return np.flatnonzero(self.coefficients).tolist()


class KFunctionalValue(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t: float
    p: float
    value: float
    certified: bool
    lower_bound: Optional[float] = None
    coefficients: np.ndarray
    method: str


class ThresholdRow(BaseModel):
    k: int
    threshold_error: float
    sigma: float


class EquivalenceReport(BaseModel):
    tau: float
    r: float
    kmax: int
    J: int
    sample_count: int
    seed: int
    ratios: List[float]
    min_ratio: float
    max_ratio: float
    spread: float
    flagged: bool


def quasi_norm_power(c: np.ndarray, tau: float) -> np.ndarray:
    """sum_j |c_j|^tau along the last axis."""
    return np.sum(np.abs(c) ** tau, axis=-1)


def lp_norm(c: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(c) ** p) ** (1.0 / p))


def _as_signal(dictionary: Dictionary, f: Sequence[float]) -> np.ndarray:
    f = np.asarray(f, dtype=float).ravel()
    if f.size != dictionary.m:
        raise DomainError(f"signal has length {f.size}, dictionary has m = {dictionary.m}")
    if not np.all(np.isfinite(f)):
        raise DomainError("signal must be finite")
    return f


def _first_within(values: np.ndarray, scale: float) -> int:
    """Index of the first entry within the tie tolerance of the minimum."""
    low = values.min()
    return int(np.flatnonzero(values <= low + TIE_RTOL * max(scale, abs(low)))[0])


# --- best k-term approximation ---

def best_k_term_exhaustive(
    dictionary: Dictionary, f: Sequence[float], k: int, cap: Optional[int] = None
) -> KTermApproximation:
    """Global least-squares minimizer over all size-k supports."""
    f = _as_signal(dictionary, f)
    cap = config.KTERM_CAP if cap is None else cap
    N = dictionary.N
    if not 0 <= k <= N:
        raise DomainError(f"k must lie in [0, {N}], got {k}")
    if k == 0:
        return KTermApproximation(k=0, support=[], coefficients=np.empty(0), residual=float(np.linalg.norm(f)))
    total = math.comb(N, k)
    if total > cap:
        raise CapExceededError(f"C({N},{k}) = {total} supports exceeds the k-term cap {cap}")

    atoms = dictionary.atoms
    scale = float(np.linalg.norm(f))
    best_residual, best_support, best_coef = np.inf, None, None
    for rows in iter_subset_chunks(N, k):
        blocks = atoms[:, rows].transpose(1, 0, 2)
        coefs = np.linalg.pinv(blocks) @ f
        residuals = np.linalg.norm(f - np.einsum("cmk,ck->cm", blocks, coefs), axis=1)
        i = _first_within(residuals, scale)
        if residuals[i] < best_residual - TIE_RTOL * max(scale, 1.0):
            best_residual, best_support, best_coef = float(residuals[i]), rows[i], coefs[i]
    return KTermApproximation(
        k=k, support=best_support.tolist(), coefficients=np.array(best_coef), residual=best_residual
    )


def best_k_term_greedy(dictionary: Dictionary, f: Sequence[float], k: int) -> KTermApproximation:
    """Orthogonal matching pursuit with a full least-squares re-projection per step."""
    f = _as_signal(dictionary, f)
    if not 0 <= k <= min(dictionary.m, dictionary.N):
        raise DomainError(f"greedy k must lie in [0, min(m, N)], got {k}")
    atoms = dictionary.atoms
    column_norms = np.linalg.norm(atoms, axis=0)
    residual = f.copy()
    support: List[int] = []
    coef = np.empty(0)
    scale = float(np.linalg.norm(f))
    for _ in range(k):
        if np.linalg.norm(residual) <= config.RANGE_TOL * scale:
            break
        correlations = np.abs(atoms.T @ residual) / column_norms
        correlations[support] = -np.inf
        support.append(int(np.argmax(correlations)))
        coef, *_ = np.linalg.lstsq(atoms[:, support], f, rcond=None)
        residual = f - atoms[:, support] @ coef
    order = np.argsort(support)
    return KTermApproximation(
        k=k,
        support=[support[i] for i in order],
        coefficients=np.asarray(coef)[order],
        residual=float(np.linalg.norm(residual)),
        exact=False,
    )


def sigma_profile(
    dictionary: Dictionary, f: Sequence[float], kmax: int, cap: Optional[int] = None
) -> List[float]:
    """sigma_0 ... sigma_kmax; levels beyond N repeat sigma_N."""
    f = _as_signal(dictionary, f)
    if kmax < 0:
        raise DomainError(f"kmax must be nonnegative, got {kmax}")
    sigmas = [best_k_term_exhaustive(dictionary, f, k, cap).residual for k in range(min(kmax, dictionary.N) + 1)]
    sigmas += [sigmas[-1]] * (kmax + 1 - len(sigmas))
    # exact minimizers are nonincreasing; remove rounding wiggles
    profile = np.minimum.accumulate(np.array(sigmas)).tolist()
    log_sequence_preview("sigma profile", profile)
    return profile


def dyadic_levels(kmax: int) -> int:
    return int(math.floor(math.log2(kmax)))


def approx_seminorm(
    dictionary: Dictionary,
    f: Sequence[float],
    s: float,
    q: float,
    kmax: int,
    form: str = "dyadic",
    cap: Optional[int] = None,
) -> float:
    """Truncated approximation-space seminorm.

    dyadic: (sum_{j=0}^{J} [2^{js} sigma_{2^j}]^q)^{1/q}, J = floor(log2 kmax)
    full:   (sum_{k=1}^{kmax} [k^s sigma_k]^q / k)^{1/q}
    """
    if kmax < 1:
        raise DomainError(f"kmax must be at least 1, got {kmax}")
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}")
    sigmas = np.array(sigma_profile(dictionary, f, kmax, cap))
    if form == "dyadic":
        levels = 2 ** np.arange(dyadic_levels(kmax) + 1)
        terms = levels.astype(float) ** s * sigmas[levels]
        return float(np.sum(terms ** q) ** (1.0 / q))
    if form == "full":
        ks = np.arange(1, kmax + 1, dtype=float)
        return float(np.sum((ks ** s * sigmas[1:]) ** q / ks) ** (1.0 / q))
    raise DomainError(f"unknown seminorm form {form!r}")


def approx_norm(
    dictionary: Dictionary, f: Sequence[float], s: float, q: float, kmax: int, cap: Optional[int] = None
) -> float:
    """||f|| plus the dyadic approximation seminorm."""
    if kmax < 2:
        raise DomainError(f"kmax must be at least 2, got {kmax}")
    f = _as_signal(dictionary, f)
    return float(np.linalg.norm(f)) + approx_seminorm(dictionary, f, s, q, kmax, "dyadic", cap)


# --- minimum-norm representations ---

class SparsityNormOracle:
    """Exact minimum-l_tau representations for one dictionary, tau in (0, 1].

    The vertex maps c0 -> c0 - Z inv(Z_S) c0_S are precomputed once, so many
    signals can be evaluated in a single batch.
    """

    def __init__(
        self,
        dictionary: Dictionary,
        null_basis: Optional[NullSpaceBasis] = None,
        cap: Optional[int] = None,
        range_tol: Optional[float] = None,
    ):
        self.dictionary = dictionary
        self.null_basis = null_basis if null_basis is not None else null_space_basis(dictionary)
        self.cap = config.VERTEX_CAP if cap is None else cap
        self.range_tol = config.RANGE_TOL if range_tol is None else range_tol
        d = self.null_basis.d
        if d > self.cap:
            raise CapExceededError(f"null-space dimension {d} exceeds the vertex cap {self.cap}")
        self.pinv = np.linalg.pinv(dictionary.atoms)
        self.subsets, self.maps = self._vertex_maps()
        self.mask = complement_mask(dictionary.N, self.subsets)
        logger.info(
            f"Vertex oracle for {dictionary.label}: d={d}, {self.subsets.shape[0]} admissible "
            f"subsets out of C({dictionary.N},{d}) = {math.comb(dictionary.N, d)}"
        )

    @property
    def d(self) -> int:
        return self.null_basis.d

    def _vertex_maps(self) -> Tuple[np.ndarray, np.ndarray]:
        N, d = self.dictionary.N, self.d
        if d == 0:
            return np.empty((1, 0), dtype=np.intp), np.zeros((1, N, 0))
        Z = self.null_basis.basis
        subsets = subset_array(N, d)
        blocks = Z[subsets]
        singular = np.linalg.svd(blocks, compute_uv=False)
        invertible = singular[:, -1] > 1e-10
        subsets = subsets[invertible]
        maps = Z[None, :, :] @ np.linalg.inv(blocks[invertible])
        return subsets, maps

    def _particular(self, F: np.ndarray) -> np.ndarray:
        """Minimum-l2 solutions (rows), checking that every signal is in range."""
        C0 = F @ self.pinv.T
        residuals = np.linalg.norm(C0 @ self.dictionary.atoms.T - F, axis=1)
        scales = np.maximum(np.linalg.norm(F, axis=1), np.finfo(float).tiny)
        bad = np.flatnonzero(residuals > self.range_tol * np.maximum(scales, 1.0))
        if bad.size:
            raise NotInRangeError(
                f"signal {int(bad[0])} is not in range(Phi): residual {residuals[bad[0]]:.3g}"
            )
        return C0

    def _candidates_for(self, C0: np.ndarray) -> np.ndarray:
        """(P, S, N) vertex candidates with c_S set to exactly zero."""
        shifts = np.einsum("snd,psd->psn", self.maps, C0[:, self.subsets])
        candidates = (C0[:, None, :] - shifts) * self.mask[None]
        scale = np.abs(C0).max(axis=1, keepdims=True)[:, :, None]
        candidates[np.abs(candidates) <= 1e-13 * scale] = 0.0
        return candidates

    def candidates(self, f: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """Admissible subsets and the corresponding candidate representations."""
        f = _as_signal(self.dictionary, f)
        C0 = self._particular(f[None, :])
        return self.subsets, self._candidates_for(C0)[0]

    @staticmethod
    def _check_tau(tau: float):
        if not 0.0 < tau <= 1.0:
            raise DomainError(f"the vertex oracle needs tau in (0,1], got {tau}")

    def representation(self, f: Sequence[float], tau: float) -> SparseRepresentation:
        self._check_tau(tau)
        _, candidates = self.candidates(f)
        powers = quasi_norm_power(candidates, tau)
        best = _first_within(powers, 1.0)
        c = candidates[best]
        close = np.flatnonzero(powers <= powers[best] + TIE_RTOL * max(1.0, powers[best]))
        # distinct subsets may produce the same vector; only distinct minimizers tie
        spread = np.abs(candidates[close] - c).max(axis=1)
        tied = bool(np.any(spread > 1e-9 * max(1.0, np.abs(c).max())))
        return SparseRepresentation(
            coefficients=c, tau=tau, norm_value=float(powers[best] ** (1.0 / tau)), exact=True, tied=tied
        )

    def norm(self, f: Sequence[float], tau: float) -> float:
        return self.representation(f, tau).norm_value

    def norms(self, F: np.ndarray, tau: float) -> np.ndarray:
        """||f||_{l_tau(Phi)} for every row of F."""
        self._check_tau(tau)
        F = np.atleast_2d(np.asarray(F, dtype=float))
        C0 = self._particular(F)
        per_signal = max(1, self.subsets.shape[0] * self.dictionary.N)
        batch = max(1, ORACLE_BLOCK // per_signal)
        values = np.empty(F.shape[0])
        for start in range(0, F.shape[0], batch):
            candidates = self._candidates_for(C0[start:start + batch])
            values[start:start + batch] = quasi_norm_power(candidates, tau).min(axis=1) ** (1.0 / tau)
        return values


def min_ltau_representation(
    dictionary: Dictionary, f: Sequence[float], tau: float, cap: Optional[int] = None
) -> SparseRepresentation:
    """Vertex enumeration when d fits under the cap, basis pursuit for tau = 1 otherwise."""
    basis = null_space_basis(dictionary)
    if _needs_linear_program(basis, tau, cap):
        return min_l1_representation(dictionary, f)
    return SparsityNormOracle(dictionary, null_basis=basis, cap=cap).representation(f, tau)


def _needs_linear_program(basis: NullSpaceBasis, tau: float, cap: Optional[int]) -> bool:
    cap = config.VERTEX_CAP if cap is None else cap
    if tau != 1.0 or basis.d <= cap:
        return False
    logger.warning(f"⚠ null-space dimension {basis.d} exceeds the vertex cap {cap}; solving tau = 1 by linear programming")
    return True


def _require_full_row_rank(dictionary: Dictionary):
    singular_values = np.linalg.svd(dictionary.atoms, compute_uv=False)
    threshold = max(dictionary.m, dictionary.N) * np.finfo(float).eps * singular_values[0]
    if singular_values.size < dictionary.m or singular_values[-1] <= threshold:
        raise DomainError(f"{dictionary.label}: Phi Phi^T is rank deficient, no canonical dual frame")


def min_l2_representation(dictionary: Dictionary, f: Sequence[float]) -> SparseRepresentation:
    """Canonical dual-frame coefficients Phi^T (Phi Phi^T)^{-1} f."""
    f = _as_signal(dictionary, f)
    atoms = dictionary.atoms
    _require_full_row_rank(dictionary)
    c = atoms.T @ np.linalg.solve(atoms @ atoms.T, f)
    return SparseRepresentation(coefficients=c, tau=2.0, norm_value=float(np.linalg.norm(c)), exact=True)


def _basis_pursuit(atoms: np.ndarray, f: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """min ||c||_1 s.t. Phi c = f as a linear program over c = u - v.

    Returns the primal solution and the equality multipliers, or None when the
    program is infeasible.
    """
    m, N = atoms.shape
    result = linprog(
        np.ones(2 * N),
        A_eq=np.hstack([atoms, -atoms]),
        b_eq=f,
        bounds=(0, None),
        method="highs",
    )
    if not result.success:
        logger.warning(f"Basis pursuit failed: {result.message}")
        return None
    c = result.x[:N] - result.x[N:]
    return c, np.asarray(result.eqlin.marginals)


def min_l1_representation(dictionary: Dictionary, f: Sequence[float]) -> SparseRepresentation:
    """Minimum-l1 representation by linear programming (no null-space cap)."""
    f = _as_signal(dictionary, f)
    solved = _basis_pursuit(dictionary.atoms, f)
    if solved is None:
        raise NotInRangeError("basis pursuit has no feasible point for this signal")
    c, _ = solved
    return SparseRepresentation(coefficients=c, tau=1.0, norm_value=float(np.abs(c).sum()), exact=False)


def sparsity_norm(dictionary: Dictionary, f: Sequence[float], tau: float, cap: Optional[int] = None) -> float:
    if 0.0 < tau <= 1.0:
        return min_ltau_representation(dictionary, f, tau, cap).norm_value
    if tau == 2.0:
        return min_l2_representation(dictionary, f).norm_value
    raise DomainError(f"sparsity norms are available for tau in (0,1] or tau = 2, got {tau}")


def sparsity_norm_evaluator(
    dictionary: Dictionary, tau: float, cap: Optional[int] = None
) -> Callable[[np.ndarray], np.ndarray]:
    """Batched ||f||_{l_tau(Phi)} over the rows of a matrix, built once per dictionary."""
    if tau == 2.0:
        _require_full_row_rank(dictionary)
        pinv = np.linalg.pinv(dictionary.atoms)
        return lambda F: np.linalg.norm(np.atleast_2d(F) @ pinv.T, axis=1)
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"sparsity norms are available for tau in (0,1] or tau = 2, got {tau}")
    basis = null_space_basis(dictionary)
    if _needs_linear_program(basis, tau, cap):
        return lambda F: np.array([min_l1_representation(dictionary, f).norm_value for f in np.atleast_2d(F)])
    oracle = SparsityNormOracle(dictionary, null_basis=basis, cap=cap)
    return lambda F: oracle.norms(F, tau)


def _representation(dictionary: Dictionary, f: np.ndarray, tau: float, cap: Optional[int]) -> SparseRepresentation:
    if tau == 2.0:
        return min_l2_representation(dictionary, f)
    return min_ltau_representation(dictionary, f, tau, cap)


def thresholded_profile(
    dictionary: Dictionary, f: Sequence[float], tau: float, kmax: int, cap: Optional[int] = None
) -> List[ThresholdRow]:
    """Keep the k largest coefficients of the minimum-l_tau representation."""
    f = _as_signal(dictionary, f)
    c = _representation(dictionary, f, tau, cap).coefficients
    order = np.argsort(-np.abs(c), kind="stable")
    sigmas = sigma_profile(dictionary, f, kmax)
    rows = []
    for k in range(kmax + 1):
        kept = np.zeros_like(c)
        kept[order[:k]] = c[order[:k]]
        error = float(np.linalg.norm(f - dictionary.atoms @ kept))
        rows.append(ThresholdRow(k=k, threshold_error=error, sigma=sigmas[k]))
    return rows


def jackson_ratios(
    dictionary: Dictionary, f: Sequence[float], tau: float, kmax: int, cap: Optional[int] = None
) -> List[float]:
    """sigma_k k^{1/tau - 1/2} / ||f||_{l_tau(Phi)} for k = 1 ... kmax."""
    f = _as_signal(dictionary, f)
    norm = sparsity_norm(dictionary, f, tau, cap)
    sigmas = np.array(sigma_profile(dictionary, f, kmax))
    if norm == 0.0:
        return [0.0] * kmax
    ks = np.arange(1, kmax + 1, dtype=float)
    return (sigmas[1:] * ks ** (1.0 / tau - 0.5) / norm).tolist()


# --- K-functional ---

def _dual_lower_bound(atoms: np.ndarray, f: np.ndarray, t: float, p: float, direction: np.ndarray) -> float:
    """<y, f> for y = direction scaled into {||y|| <= 1, ||Phi^T y||_q <= t}."""
    dual_order = np.inf if p == 1.0 else 2.0
    size = max(np.linalg.norm(direction), np.linalg.norm(atoms.T @ direction, ord=dual_order) / t)
    if size == 0.0:
        return 0.0
    return abs(float(direction @ f)) / float(size)


def _soft_threshold(x: np.ndarray, level: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def _lasso_polish(atoms: np.ndarray, f: np.ndarray, lam: float, c: np.ndarray) -> Optional[np.ndarray]:
    """Exact lasso solution on the support and signs of c, or None if it violates the KKT conditions."""
    support = np.flatnonzero(c)
    if support.size == 0:
        return c if np.abs(atoms.T @ f).max() <= lam else None
    if support.size > atoms.shape[0]:
        return None
    sub = atoms[:, support]
    signs = np.sign(c[support])
    try:
        c_S = np.linalg.solve(sub.T @ sub, sub.T @ f - lam * signs)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(c_S) != signs):
        return None
    polished = np.zeros_like(c)
    polished[support] = c_S
    if np.abs(atoms.T @ (f - atoms @ polished)).max() > lam * (1.0 + 1e-10):
        return None
    return polished


def _lasso(atoms: np.ndarray, f: np.ndarray, lam: float, step: float,
           gap_rtol: float = 1e-13, max_iter: int = 20_000, polish_every: int = 20) -> np.ndarray:
    """argmin 1/2 ||f - Phi c||^2 + lam ||c||_1, started from c = 0.

    FISTA with function-value restarts and step 1/B. Every `polish_every`
    iterations the current support is solved exactly and returned once it
    satisfies the KKT conditions; otherwise the loop stops on the duality gap.
    """
    c = np.zeros(atoms.shape[1])
    y = c.copy()
    momentum = 1.0
    objective = np.inf
    for iteration in range(1, max_iter + 1):
        c_next = _soft_threshold(y - step * (atoms.T @ (atoms @ y - f)), step * lam)
        residual = f - atoms @ c_next
        objective_next = 0.5 * float(residual @ residual) + lam * float(np.abs(c_next).sum())
        if objective_next > objective:
            # restart from the last iterate with a plain gradient step
            momentum, y = 1.0, c.copy()
            continue
        momentum_next = (1.0 + math.sqrt(1.0 + 4.0 * momentum ** 2)) / 2.0
        y = c_next + ((momentum - 1.0) / momentum_next) * (c_next - c)
        c, momentum, objective = c_next, momentum_next, objective_next
        if iteration % polish_every:
            continue
        polished = _lasso_polish(atoms, f, lam, c)
        if polished is not None:
            return polished
        correlation = float(np.abs(atoms.T @ residual).max())
        dual = residual * min(1.0, lam / correlation) if correlation > 0 else residual
        dual_value = float(f @ dual) - 0.5 * float(dual @ dual)
        if objective - dual_value <= gap_rtol * max(objective, np.finfo(float).tiny):
            break
    return c


def _k_polish(atoms: np.ndarray, f: np.ndarray, t: float, c: np.ndarray) -> Optional[np.ndarray]:
    """Exact minimizer of ||f - Phi c|| + t ||c||_1 on the support and signs of c.

    On a fixed support the residual is a + lam b with a = (I - P_S) f orthogonal
    to b = Phi_S G^{-1} s, so lam = t ||r|| has the closed form
    t ||a|| / sqrt(1 - t^2 ||b||^2). None when the signs or the off-support
    conditions fail.
    """
    support = np.flatnonzero(c)
    if support.size == 0 or support.size > atoms.shape[0]:
        return None
    sub = atoms[:, support]
    signs = np.sign(c[support])
    gram = sub.T @ sub
    try:
        least_squares = np.linalg.solve(gram, sub.T @ f)
        drift = np.linalg.solve(gram, signs)
    except np.linalg.LinAlgError:
        return None
    a = f - sub @ least_squares
    b = sub @ drift
    denominator = 1.0 - t ** 2 * float(b @ b)
    norm_a = float(np.linalg.norm(a))
    if denominator <= 0.0 or norm_a <= 1e-12 * float(np.linalg.norm(f)):
        return None
    lam = t * norm_a / math.sqrt(denominator)
    c_S = least_squares - lam * drift
    if np.any(np.sign(c_S) != signs):
        return None
    polished = np.zeros_like(c)
    polished[support] = c_S
    if np.abs(atoms.T @ (f - atoms @ polished)).max() > lam * (1.0 + 1e-9):
        return None
    return polished


def _k_functional_l1(dictionary: Dictionary, f: np.ndarray, t: float) -> KFunctionalValue:
    """Minimize over the lasso path: at the optimum lam = t ||f - Phi c(lam)||."""
    atoms = dictionary.atoms
    norm_f = float(np.linalg.norm(f))
    step = 1.0 / frame_bounds(dictionary).B
    lambda_max = float(np.abs(atoms.T @ f).max())

    def objective(c: np.ndarray) -> float:
        return float(np.linalg.norm(f - atoms @ c) + t * np.abs(c).sum())

    candidates = [(norm_f, np.zeros(dictionary.N))]
    directions = [f]
    solved = _basis_pursuit(atoms, f)
    if solved is not None:
        c_l1, multipliers = solved
        candidates.append((objective(c_l1), c_l1))
        directions.append(multipliers)

    def gap(lam: float) -> float:
        return t * float(np.linalg.norm(f - atoms @ _lasso(atoms, f, lam, step))) - lam

    low = 1e-8 * lambda_max
    if lambda_max > 0 and gap(lambda_max) < 0 and gap(low) > 0:
        root = brentq(gap, low, lambda_max, xtol=1e-12 * lambda_max)
        c_root = _lasso(atoms, f, root, step)
        found = [c_root]
        exact = _k_polish(atoms, f, t, c_root)
        if exact is not None:
            found.append(exact)
        for c in found:
            candidates.append((objective(c), c))
            directions.append(f - atoms @ c)

    value, c_best = min(candidates, key=lambda item: item[0])
    lower = float(max(_dual_lower_bound(atoms, f, t, 1.0, y) for y in directions))
    certified = bool(value - lower <= CERTIFICATE_RTOL * max(1.0, value))
    if not certified:
        logger.warning(f"⚠ K-functional at t={t:g}: duality gap {value - lower:.3g} above tolerance")
    return KFunctionalValue(
        t=t, p=1.0, value=value, certified=certified, lower_bound=lower, coefficients=c_best, method="lasso-path"
    )


def _k_functional_l2(dictionary: Dictionary, f: np.ndarray, t: float) -> KFunctionalValue:
    atoms = dictionary.atoms
    U, s, Vt = np.linalg.svd(atoms, full_matrices=False)
    beta = U.T @ f
    outside = f - U @ beta

    def ridge(log_mu: float) -> np.ndarray:
        return Vt.T @ (s / (s ** 2 + math.exp(log_mu)) * beta)

    def objective(c: np.ndarray) -> float:
        return float(np.linalg.norm(f - atoms @ c) + t * np.linalg.norm(c))

    scale = math.log(max(s[0], np.finfo(float).tiny) ** 2)
    grid = np.linspace(scale - 60.0, scale + 60.0, 241)
    values = [objective(ridge(x)) for x in grid]
    i = int(np.argmin(values))
    refined = minimize_scalar(
        lambda x: objective(ridge(x)),
        bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
        method="bounded",
        options={"xatol": 1e-12},
    )
    positive = s > max(atoms.shape) * np.finfo(float).eps * s[0]
    c_min = Vt.T[:, positive] @ (beta[positive] / s[positive])
    candidates = [
        (float(np.linalg.norm(f)), np.zeros(dictionary.N)),
        (objective(c_min), c_min),
        (values[i], ridge(grid[i])),
        (objective(ridge(refined.x)), ridge(refined.x)),
    ]
    value, c_best = min(candidates, key=lambda item: item[0])
    directions = [f, f - atoms @ c_best, U[:, positive] @ (beta[positive] / s[positive] ** 2)]
    if np.any(outside):
        directions.append(outside)
    lower = float(max(_dual_lower_bound(atoms, f, t, 2.0, y) for y in directions))
    certified = bool(value - lower <= CERTIFICATE_RTOL * max(1.0, value))
    return KFunctionalValue(
        t=t, p=2.0, value=value, certified=certified, lower_bound=lower, coefficients=c_best, method="ridge-path"
    )


def _k_functional_quasi(
    dictionary: Dictionary, f: np.ndarray, t: float, p: float, kcap: Optional[int], cap: Optional[int]
) -> KFunctionalValue:
    atoms = dictionary.atoms
    pool = [np.zeros((1, dictionary.N))]
    try:
        pool.append(SparsityNormOracle(dictionary, cap=cap).candidates(f)[1])
    except (CapExceededError, NotInRangeError) as e:
        logger.warning(f"K-functional: vertex candidates skipped ({e})")
    kcap = min(dictionary.m, dictionary.N) if kcap is None else min(kcap, dictionary.m, dictionary.N)
    for k in range(1, kcap + 1):
        try:
            pool.append(best_k_term_exhaustive(dictionary, f, k).full_coefficients(dictionary.N)[None, :])
        except CapExceededError as e:
            logger.warning(f"K-functional: stopping k-term candidates at k={k} ({e})")
            break
    candidates = np.vstack(pool)
    residuals = np.linalg.norm(f[None, :] - candidates @ atoms.T, axis=1)
    values = residuals + t * quasi_norm_power(candidates, p) ** (1.0 / p)
    best = int(np.argmin(values))
    return KFunctionalValue(
        t=t, p=p, value=float(values[best]), certified=False, coefficients=candidates[best], method="candidate-set"
    )


def k_functional(
    dictionary: Dictionary,
    f: Sequence[float],
    t: float,
    p: float,
    kcap: Optional[int] = None,
    cap: Optional[int] = None,
) -> KFunctionalValue:
    """K(f, t) = inf_c ||f - Phi c|| + t ||c||_p.

    p = 1 and p = 2 are solved and certified by a dual feasible point; p < 1
    returns the best of a finite candidate set, an upper bound only.
    """
    f = _as_signal(dictionary, f)
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if not (0.0 < p <= 1.0 or p == 2.0):
        raise DomainError(f"K-functional is available for p in (0,1] or p = 2, got {p}")
    if not np.any(f):
        return KFunctionalValue(
            t=t, p=p, value=0.0, certified=True, lower_bound=0.0, coefficients=np.zeros(dictionary.N), method="zero"
        )
    if p == 1.0:
        return _k_functional_l1(dictionary, f, t)
    if p == 2.0:
        return _k_functional_l2(dictionary, f, t)
    return _k_functional_quasi(dictionary, f, t, p, kcap, cap)


def interpolation_terms(
    dictionary: Dictionary, f: Sequence[float], p: float, J: int, cap: Optional[int] = None
) -> List[KFunctionalValue]:
    """K(f, 2^{-j}) for j = 0 ... J."""
    if J < 1:
        raise DomainError(f"J must be at least 1, got {J}")
    return [k_functional(dictionary, f, 2.0 ** -j, p, cap=cap) for j in range(J + 1)]


def interpolation_norm(
    dictionary: Dictionary,
    f: Sequence[float],
    theta: float,
    q: float,
    p: float,
    J: int,
    cap: Optional[int] = None,
) -> float:
    """(sum_{j=0}^{J} [2^{j theta} K(f, 2^{-j})]^q)^{1/q}."""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0,1), got {theta}")
    if q <= 0:
        raise DomainError(f"q must be positive, got {q}")
    values = np.array([term.value for term in interpolation_terms(dictionary, f, p, J, cap)])
    weights = 2.0 ** (theta * np.arange(J + 1))
    return float(np.sum((weights * values) ** q) ** (1.0 / q))


# --- norm equivalence harness ---

def random_range_signals(dictionary: Dictionary, count: int, seed: int) -> np.ndarray:
    """Rows Phi c with standard Gaussian c."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, dictionary.N)) @ dictionary.atoms.T


def theorem1_equivalence_check(
    dictionary: Dictionary,
    tau: float,
    sample_count: int,
    kmax: int,
    seed: int = 0,
    cap: Optional[int] = None,
) -> EquivalenceReport:
    """Ratios ||f||_{A^r_tau} / ||f||_{l_tau(Phi)} with r = 1/tau - 1/2 on random f."""
    if sample_count < 1:
        raise DomainError(f"sample_count must be positive, got {sample_count}")
    r = 1.0 / tau - 0.5
    signals = random_range_signals(dictionary, sample_count, seed)
    norms = sparsity_norm_evaluator(dictionary, tau, cap)(signals)
    approx = np.array([approx_norm(dictionary, f, r, tau, kmax) for f in signals])
    ratios = approx / norms
    spread = float(ratios.max() / ratios.min())
    flagged = spread > config.SPREAD_FACTOR
    if flagged:
        logger.warning(f"⚠ Norm ratio spread {spread:.3g} exceeds {config.SPREAD_FACTOR:g}")
    return EquivalenceReport(
        tau=tau,
        r=r,
        kmax=kmax,
        J=dyadic_levels(kmax),
        sample_count=sample_count,
        seed=seed,
        ratios=ratios.tolist(),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        spread=spread,
        flagged=flagged,
    )
