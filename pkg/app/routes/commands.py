"""Subcommand handlers: parsed arguments in, ReportEnvelope out.

Handlers are registered by name with the ``command`` decorator; ``dispatch``
resolves the dictionary / signal sources shared by all of them.
"""
import math
from argparse import Namespace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from app.routes.reports import ReportEnvelope
from app.services.bernstein import (
    bernstein_ratio_empirical,
    c1_constant,
    c2_constant,
    divergence_witness,
    null_vector_stats,
    prop_a_sufficient,
    sandwich_check,
)
from app.services.dictionary import (
    Dictionary,
    build_dirac_dc,
    build_dirac_geometric,
    build_gaussian,
    dictionary_from_null_vector,
    frame_bounds,
    load_matrix,
    load_vector,
    null_space_basis,
    perturb_null_vector,
    quasi_normalization_report,
)
from app.services.gaussian_bounds import (
    gaussian_bound_set,
    joint_failure_bound,
    monte_carlo_consistency,
    redundancy_constants,
)
from app.services.nearbest import (
    dirac_dc_case1_threshold,
    dirac_dc_case2_max_epsilon,
    max_feasible_epsilon,
    near_best_factor,
)
from app.services.rip import rip_report, verify_lemma_ripbineq
from app.services.sparse_norms import (
    best_k_term_greedy,
    interpolation_norm,
    interpolation_terms,
    jackson_ratios,
    k_functional,
    min_l2_representation,
    min_ltau_representation,
    random_range_signals,
    sigma_profile,
    thresholded_profile,
)
from app.utils.errors import DomainError
from app.utils.logger import logger

Handler = Callable[[Namespace], Tuple[Any, bool]]
COMMANDS: Dict[str, Handler] = {}

DEFAULT_GAMMA_GRID = (1.28, 1.5, 2.0, 4.0, 10.0, 100.0, 1e3, 1e6, 1e12)
DEFAULT_BLOCKS = (2, 4, 16, 256)
# parsed options that describe output, not the computation
_NOT_PARAMETERS = {"command", "format"}


def command(name: str):
    def register(handler: Handler) -> Handler:
        COMMANDS[name] = handler
        return handler

    return register


# --- shared sources ---

def resolve_dictionary(args: Namespace) -> Dictionary:
    if args.matrix:
        return load_matrix(args.matrix)
    if args.dirac_dc is not None:
        return build_dirac_dc(args.dirac_dc)
    if args.dirac_geo is not None:
        n, a = args.dirac_geo
        return build_dirac_geometric(int(n), a)
    if args.gaussian is not None:
        m, N = args.gaussian
        return build_gaussian(m, N, args.seed)
    if args.null_vector:
        return dictionary_from_null_vector(load_vector(args.null_vector))
    raise DomainError(
        f"{args.command} needs a dictionary: --matrix, --dirac-dc, --dirac-geo, --gaussian or --null-vector"
    )


def resolve_signal(args: Namespace, dictionary: Dictionary) -> np.ndarray:
    if args.signal:
        return load_vector(args.signal)
    return random_range_signals(dictionary, 1, args.seed)[0]


def resolve_null_vector(args: Namespace) -> np.ndarray:
    """--null-vector as given, otherwise the kernel vector of a dictionary with d = 1."""
    if args.null_vector:
        return load_vector(args.null_vector)
    basis = null_space_basis(resolve_dictionary(args), args.rank_tol)
    if basis.d != 1:
        raise DomainError(f"a single null vector needs null-space dimension 1, got {basis.d}")
    return basis.basis[:, 0]


def _default(value, fallback):
    return fallback if value is None else value


def _parameters(args: Namespace) -> Dict[str, Any]:
    return {key: value for key, value in sorted(vars(args).items()) if key not in _NOT_PARAMETERS and value is not None}


def dispatch(args: Namespace) -> ReportEnvelope:
    handler = COMMANDS[args.command]
    logger.info(f"Running {args.command}")
    results, certified = handler(args)
    return ReportEnvelope(
        command=args.command,
        parameters=_parameters(args),
        results=results,
        certified=bool(certified),
        seed=args.seed,
    )


# --- dictionary geometry ---

@command("frame-bounds")
def frame_bounds_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    results = {
        "label": dictionary.label,
        "m": dictionary.m,
        "N": dictionary.N,
        "frame_bounds": frame_bounds(dictionary),
        "quasi_normalization": quasi_normalization_report(dictionary),
    }
    return results, True


@command("nullspace")
def nullspace_command(args: Namespace):
    basis = null_space_basis(resolve_dictionary(args), args.rank_tol)
    results = {"d": basis.d, "rank": basis.rank, "tol": basis.tol, "vectors": [v.tolist() for v in basis.vectors()]}
    return results, True


# --- approximation and norms ---

@command("sigma-profile")
def sigma_profile_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    f = resolve_signal(args, dictionary)
    kmax = _default(args.kmax, dictionary.N)
    results: Dict[str, Any] = {
        "f": f,
        "sigma": sigma_profile(dictionary, f, kmax, args.cap),
        "greedy": [best_k_term_greedy(dictionary, f, k).residual for k in range(min(kmax, dictionary.m, dictionary.N) + 1)],
    }
    if args.tau is not None and kmax >= 1:
        results["thresholded"] = thresholded_profile(dictionary, f, args.tau, kmax, args.vertex_cap)
        results["jackson"] = jackson_ratios(dictionary, f, args.tau, kmax, args.vertex_cap)
    return results, True


@command("ltau-norm")
def ltau_norm_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    f = resolve_signal(args, dictionary)
    tau = _default(args.tau, 1.0)
    if tau == 2.0:
        representation = min_l2_representation(dictionary, f)
    else:
        representation = min_ltau_representation(dictionary, f, tau, args.vertex_cap)
    results = {
        "f": f,
        "tau": tau,
        "norm": representation.norm_value,
        "coefficients": representation.coefficients,
        "support": representation.support,
        "tied": representation.tied,
    }
    return results, representation.exact


@command("kfunctional")
def kfunctional_command(args: Namespace):
    if args.t is None:
        raise DomainError("kfunctional needs --t")
    dictionary = resolve_dictionary(args)
    f = resolve_signal(args, dictionary)
    value = k_functional(dictionary, f, args.t, _default(args.p, 1.0), cap=args.vertex_cap)
    return {"f": f, "k_functional": value}, value.certified


@command("interp-norm")
def interp_norm_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    f = resolve_signal(args, dictionary)
    theta, q, J, p = _default(args.theta, 0.5), _default(args.q, 1.0), _default(args.J, 6), _default(args.p, 1.0)
    terms = interpolation_terms(dictionary, f, p, J, args.vertex_cap)
    results = {
        "f": f,
        "theta": theta,
        "q": q,
        "J": J,
        "norm": interpolation_norm(dictionary, f, theta, q, p, J, args.vertex_cap),
        "terms": terms,
    }
    return results, all(term.certified for term in terms)


# --- Bernstein constants and null vectors ---

@command("bernstein-report")
def bernstein_report_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    report = bernstein_ratio_empirical(
        dictionary,
        _default(args.tau, 1.0),
        _default(args.kmax, min(dictionary.N, 4)),
        _default(args.trials, 20),
        args.seed,
        args.cap,
        vertex_cap=args.vertex_cap,
    )
    return report, report.certified


@command("prop-a")
def prop_a_command(args: Namespace):
    z = resolve_null_vector(args)
    mmax = _default(args.kmax, z.size)
    result = prop_a_sufficient(z, mmax, args.cap)
    stats = null_vector_stats(z, mmax, args.cap)
    return {"prop_a": result, "stats": stats}, result.certified and stats.certified


@command("prop-b")
def prop_b_command(args: Namespace):
    z = resolve_null_vector(args)
    mmax = _default(args.kmax, z.size)
    c2 = c2_constant(z, mmax, args.cap, args.seed)
    results = {
        "c1": c1_constant(z, mmax),
        "c2": c2,
        "sandwich": sandwich_check(z, mmax, args.cap, _default(args.tol, 1e-8)),
    }
    return results, c2.certified


@command("example1")
def example1_command(args: Namespace):
    if args.null_vector:
        z = load_vector(args.null_vector)
    else:
        z = 0.5 ** np.arange(1, _default(args.length, 256) + 1)
    perturbed = perturb_null_vector(
        z,
        _default(args.eps, 2.0),
        _default(args.p, 1.0),
        _default(args.beta, 2.0),
        _default(args.blocks, DEFAULT_BLOCKS),
    )
    rows = divergence_witness(perturbed)
    results = {
        "perturbation": perturbed,
        "m0": perturbed.m0,
        "rows": rows,
        "increasing": all(a.lhs1 < b.lhs1 for a, b in zip(rows, rows[1:])),
        "holds": all(row.holds for row in rows),
    }
    return results, True


# --- RIP ---

@command("rip-report")
def rip_report_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    report = rip_report(dictionary, _default(args.kmax, min(dictionary.N, 4)), args.cap, args.seed)
    return report, report.certified


@command("verify-rip-bernstein")
def verify_rip_bernstein_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    verdict = verify_lemma_ripbineq(
        dictionary,
        _default(args.tau, 1.0),
        _default(args.kappa, 0.5),
        _default(args.trials, 200),
        args.seed,
        args.cap,
        vertex_cap=args.vertex_cap,
    )
    return verdict, verdict.certified and verdict.violations == 0


# --- Gaussian dictionaries ---

@command("gaussian-constants")
def gaussian_constants_command(args: Namespace):
    R: Optional[List[float]] = args.R
    if not R and args.gaussian is None:
        raise DomainError("gaussian-constants needs --R or --gaussian M,N")
    results: Dict[str, Any] = {}
    certified = True
    if R:
        results["redundancy"] = [redundancy_constants(value) for value in R]
        if args.m is not None:
            results["joint_failure"] = [joint_failure_bound(value, args.m) for value in R]
    if args.gaussian is not None:
        m, N = args.gaussian
        k, eps = _default(args.kmax, 2), _default(args.eps, 1.0)
        results["bounds"] = gaussian_bound_set(m, N, k, eps, eps)
        if args.trials:
            report = monte_carlo_consistency(m, N, k, eps, args.trials, args.seed, cap=args.cap)
            results["monte_carlo"] = report
            certified = report.certified and report.lrip_ok and report.frame_ok
    return results, certified


@command("gamma-table")
def gamma_table_command(args: Namespace):
    rows = []
    for R in args.R or DEFAULT_GAMMA_GRID:
        constants = redundancy_constants(R)
        row: Dict[str, Any] = {
            "R": R,
            "log_t": constants.log_t_R,
            "t": constants.t_R,
            "gamma": constants.gamma_R,
            "m": constants.m_R,
            "eta_at_t": constants.eta_at_t_R,
        }
        if args.m is not None:
            row["joint_failure"] = joint_failure_bound(R, args.m).probability
        rows.append(row)
    return {"rows": rows}, True


# --- near-best l1 minimizers ---

def _dirac_dc_side(args: Namespace, tau: float) -> Optional[Dict[str, float]]:
    """Closed-form thresholds when the dictionary is Dirac+DC with a square dimension p^2."""
    if args.dirac_dc is None or not 0.0 < tau < 1.0:
        return None
    p = math.isqrt(args.dirac_dc)
    if p * p != args.dirac_dc or p < 2:
        return None
    return {
        "p": p,
        "case1_threshold": dirac_dc_case1_threshold(p, tau),
        "case2_max_epsilon": dirac_dc_case2_max_epsilon(p, tau),
    }


@command("nearbest-epsilon")
def nearbest_epsilon_command(args: Namespace):
    tau = _default(args.tau, 0.5)
    basis = null_space_basis(resolve_dictionary(args), args.rank_tol)
    search = max_feasible_epsilon(basis, tau, args.cap, _default(args.tol, 1e-6))
    results: Dict[str, Any] = {"search": search}
    closed_forms = _dirac_dc_side(args, tau)
    if closed_forms is not None:
        results["dirac_dc"] = closed_forms
    return results, True


@command("nearbest-factor")
def nearbest_factor_command(args: Namespace):
    dictionary = resolve_dictionary(args)
    f = resolve_signal(args, dictionary)
    factor = near_best_factor(dictionary, f, _default(args.tau, 0.5), args.vertex_cap)
    return {"f": f, "factor": factor}, not factor.l1_tied
