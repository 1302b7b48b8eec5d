"""Closed-form probabilistic bounds for Gaussian dictionaries, and a Monte-Carlo
consistency check against measured constants.

Quantities that underflow near R = 1 (t(R) decays like exp(-1/log R)) are
evaluated through their logarithms.
"""
import math
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel

from app.services.dictionary import build_gaussian, frame_bounds
from app.services.rip import lrip_constant
from app.utils.errors import DomainError
from app.utils.logger import logger

C_CONST = 8.0 * math.sqrt(2.0) * math.e
R0 = (1.0 + 4.0 / C_CONST) ** 2
DEFAULT_TAUS = (0.5, 1.0, 2.0)


class GaussianBoundSet(BaseModel):
    m: int
    N: int
    k: int
    eps_rip: float
    eps_frame: float
    eta: float
    lrip_fail_prob: float
    frame_A_lb: float
    frame_B_ub: float
    frame_fail_prob: float
    lrip_vacuous: bool
    frame_lower_vacuous: bool


class FrameBoundEstimate(BaseModel):
    A_lb: float
    B_ub: float
    fail_prob: float
    vacuous: bool


class RedundancyConstants(BaseModel):
    R: float
    t_R: float
    log_t_R: float
    gamma_R: float
    m_R: float
    c_const: float
    R0: float
    eta_at_t_R: float
    bernstein_bounds: Dict[str, float]

    def bernstein_bound(self, tau: float) -> float:
        return bernstein_constant_gaussian(self.R, tau)


class JointFailureBound(BaseModel):
    R: float
    m: int
    beta: float
    gamma: float
    probability: float
    vacuous: bool


class MonteCarloReport(BaseModel):
    m: int
    N: int
    k: int
    eps_rip: float
    eps_frame: float
    trials: int
    seed: int
    eta: float
    lrip_violations: int
    lrip_bound: float
    lrip_threshold: float
    lrip_ok: bool
    frame_lower_violations: int
    frame_upper_violations: int
    frame_bound: float
    frame_threshold: float
    frame_ok: bool
    certified: bool


def _clamp_probability(value: float) -> float:
    return min(1.0, max(0.0, value))


def _binomial_threshold(p: float, trials: int) -> float:
    return p + 3.0 * math.sqrt(p * (1.0 - p) / trials)


# --- lemma-level bounds ---

def eta(k: int, m: int, N: int, eps: float) -> float:
    """sqrt(k/m) (1 + (1 + eps) sqrt(2 (1 + log(N/k))))."""
    if not 1 <= k <= N or m < 1:
        raise DomainError(f"eta needs 1 <= k <= N and m >= 1, got k={k}, m={m}, N={N}")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")
    return math.sqrt(k / m) * (1.0 + (1.0 + eps) * math.sqrt(2.0 * (1.0 + math.log(N / k))))


def lrip_failure_probability(k: int, N: int, eps: float) -> float:
    """exp(-2 eps k (1 + log(N/k)))."""
    if not 1 <= k <= N:
        raise DomainError(f"need 1 <= k <= N, got k={k}, N={N}")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")
    return _clamp_probability(math.exp(-2.0 * eps * k * (1.0 + math.log(N / k))))


def frame_bound_estimates(m: int, N: int, eps: float) -> FrameBoundEstimate:
    """(sqrt(N/m) - 1 - eps)^2 and (sqrt(N/m) + 1 + eps)^2, each failing with prob exp(-eps^2 m / 2)."""
    if not N > m >= 1:
        raise DomainError(f"frame estimates need N > m >= 1, got m={m}, N={N}")
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps}")
    root = math.sqrt(N / m)
    lower = root - 1.0 - eps
    vacuous = lower <= 0.0
    if vacuous:
        logger.warning(f"⚠ Lower frame bound is vacuous for N/m={N / m:g}, eps={eps:g}")
    return FrameBoundEstimate(
        A_lb=max(lower, 0.0) ** 2,
        B_ub=(root + 1.0 + eps) ** 2,
        fail_prob=_clamp_probability(math.exp(-eps ** 2 * m / 2.0)),
        vacuous=vacuous,
    )


def gaussian_bound_set(m: int, N: int, k: int, eps_rip: float, eps_frame: float) -> GaussianBoundSet:
    value = eta(k, m, N, eps_rip)
    frame = frame_bound_estimates(m, N, eps_frame)
    return GaussianBoundSet(
        m=m,
        N=N,
        k=k,
        eps_rip=eps_rip,
        eps_frame=eps_frame,
        eta=value,
        lrip_fail_prob=lrip_failure_probability(k, N, eps_rip),
        frame_A_lb=frame.A_lb,
        frame_B_ub=frame.B_ub,
        frame_fail_prob=frame.fail_prob,
        lrip_vacuous=value >= 1.0,
        frame_lower_vacuous=frame.vacuous,
    )


# --- redundancy constants ---

def _check_redundancy(R: float):
    if not R > 1.0:
        raise DomainError(f"redundancy R must exceed 1, got {R}")


def log_t_of_R(R: float) -> float:
    _check_redundancy(R)
    L = math.log(R)
    return -(1.0 + 1.0 / L) * math.log(C_CONST ** 2 * (1.0 + L))


def eta_at_t(R: float, t: float) -> float:
    """sqrt(t) (1 + 2 sqrt(2) sqrt(log(e R / t))), with t = k/m."""
    _check_redundancy(R)
    if not 0.0 < t < 1.0:
        raise DomainError(f"t must lie in (0,1), got {t}")
    return _eta_from_log_t(R, math.log(t))


def _eta_from_log_t(R: float, log_t: float) -> float:
    return math.exp(0.5 * log_t) * (1.0 + 2.0 * math.sqrt(2.0) * math.sqrt(1.0 + math.log(R) - log_t))


def t_of_R(R: float) -> float:
    """[c^2 (1 + log R)]^(-1 - 1/log R) with c = 8 sqrt(2) e."""
    log_t = log_t_of_R(R)
    guarantee = _eta_from_log_t(R, log_t)
    if guarantee > 0.5:
        logger.error(f"eta(t(R)) = {guarantee:.6g} exceeds 1/2 at R = {R:g}")
    return math.exp(log_t)


def gamma_of_R(R: float) -> float:
    """min(2 t(R) (1 + log R), (sqrt(R) - 1)^2 / 8, 1/2)."""
    L = math.log(R) if R > 1.0 else 0.0
    return min(2.0 * t_of_R(R) * (1.0 + L), (math.sqrt(R) - 1.0) ** 2 / 8.0, 0.5)


def m_of_R(R: float) -> float:
    """2 / t(R); +inf once t(R) underflows."""
    log_m = math.log(2.0) - log_t_of_R(R)
    return math.exp(log_m) if log_m < 709.0 else math.inf


def bernstein_constant_gaussian(R: float, tau: float) -> float:
    """max(2, 2 (sqrt(R) - 1)^(-1) [t(R) / (2R)]^(1/2 - 1/tau))."""
    _check_redundancy(R)
    if not 0.0 < tau <= 2.0:
        raise DomainError(f"tau must lie in (0,2], got {tau}")
    log_branch = (
        math.log(2.0)
        - math.log(math.sqrt(R) - 1.0)
        + (0.5 - 1.0 / tau) * (log_t_of_R(R) - math.log(2.0 * R))
    )
    if log_branch > 709.0:
        return math.inf
    return max(2.0, math.exp(log_branch))


def redundancy_constants(R: float) -> RedundancyConstants:
    log_t = log_t_of_R(R)
    return RedundancyConstants(
        R=R,
        t_R=t_of_R(R),
        log_t_R=log_t,
        gamma_R=gamma_of_R(R),
        m_R=m_of_R(R),
        c_const=C_CONST,
        R0=R0,
        eta_at_t_R=_eta_from_log_t(R, log_t),
        bernstein_bounds={f"{tau:g}": bernstein_constant_gaussian(R, tau) for tau in DEFAULT_TAUS},
    )


def joint_failure_bound(R: float, m: int) -> JointFailureBound:
    """beta exp(-gamma(R) m) with beta = e^2 R^2 + 2."""
    _check_redundancy(R)
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    beta = math.e ** 2 * R ** 2 + 2.0
    gamma = gamma_of_R(R)
    raw = beta * math.exp(-gamma * m)
    if raw >= 1.0:
        logger.warning(f"⚠ Joint failure bound {raw:.3g} is vacuous at R={R:g}, m={m}")
    return JointFailureBound(R=R, m=m, beta=beta, gamma=gamma, probability=_clamp_probability(raw), vacuous=raw >= 1.0)


# --- Monte-Carlo consistency ---

def monte_carlo_consistency(
    m: int,
    N: int,
    k: int,
    eps: float,
    trials: int,
    seed: int = 0,
    eps_frame: Optional[float] = None,
    cap: Optional[int] = None,
) -> MonteCarloReport:
    """Observed failure frequencies of the Gaussian bounds; trial i uses seed + i.

    A soft statistical check: each frequency is compared with its bound plus
    three binomial standard deviations.
    """
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    eps_frame = eps if eps_frame is None else eps_frame
    bounds = gaussian_bound_set(m, N, k, eps, eps_frame)
    root = math.sqrt(N / m)
    lrip_violations = lower_violations = upper_violations = 0
    certified = True
    for trial in range(trials):
        dictionary = build_gaussian(m, N, seed + trial)
        lrip = lrip_constant(dictionary, k, cap, seed + trial)
        certified &= lrip.certified
        if math.sqrt(max(1.0 - lrip.delta, 0.0)) < 1.0 - bounds.eta:
            lrip_violations += 1
        frame = frame_bounds(dictionary)
        if not bounds.frame_lower_vacuous and math.sqrt(frame.A) < root - 1.0 - eps_frame:
            lower_violations += 1
        if math.sqrt(frame.B) > root + 1.0 + eps_frame:
            upper_violations += 1

    lrip_threshold = _binomial_threshold(bounds.lrip_fail_prob, trials)
    frame_threshold = _binomial_threshold(bounds.frame_fail_prob, trials)
    lrip_ok = lrip_violations / trials <= lrip_threshold
    frame_ok = max(lower_violations, upper_violations) / trials <= frame_threshold
    logger.info(
        f"Monte-Carlo ({trials} trials): LRIP violations {lrip_violations}, "
        f"frame violations {lower_violations}/{upper_violations}"
    )
    return MonteCarloReport(
        m=m,
        N=N,
        k=k,
        eps_rip=eps,
        eps_frame=eps_frame,
        trials=trials,
        seed=seed,
        eta=bounds.eta,
        lrip_violations=lrip_violations,
        lrip_bound=bounds.lrip_fail_prob,
        lrip_threshold=lrip_threshold,
        lrip_ok=lrip_ok,
        frame_lower_violations=lower_violations,
        frame_upper_violations=upper_violations,
        frame_bound=bounds.frame_fail_prob,
        frame_threshold=frame_threshold,
        frame_ok=frame_ok,
        certified=certified,
    )
