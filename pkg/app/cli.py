"""Command-line front-end: ``run(argv)`` parses, dispatches and prints one report.

Exit codes: 0 on success, 1 on a computation error (a structured error report
is printed), 2 on a usage error.
"""
import argparse
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app import config
from app.routes.commands import COMMANDS, dispatch
from app.routes.reports import ErrorReport, render, render_json
from app.utils.errors import SparsityError
from app.utils.logger import logger


def _int_pair(text: str) -> Tuple[int, int]:
    try:
        first, second = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'M,N', got {text!r}")
    return first, second


def _geo_pair(text: str) -> Tuple[int, float]:
    try:
        n, a = text.split(",")
        return int(n), float(a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'N,A' with integer N and real A, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_argument_group("dictionary source").add_mutually_exclusive_group()
    source.add_argument("--matrix", metavar="PATH", help="whitespace-separated m x N matrix file")
    source.add_argument("--dirac-dc", type=int, metavar="M", help="[I_M | 1/sqrt(M)]")
    source.add_argument("--dirac-geo", type=_geo_pair, metavar="N,A", help="[I_N | g] with g_k = -A^k")
    source.add_argument("--gaussian", type=_int_pair, metavar="M,N", help="Gaussian M x N, entries N(0, 1/M)")
    source.add_argument("--null-vector", metavar="PATH", help="kernel vector z; the dictionary is z's orthogonal complement")

    numeric = common.add_argument_group("numeric options")
    numeric.add_argument("--tau", type=float)
    numeric.add_argument("--eps", type=float)
    numeric.add_argument("--kmax", type=int)
    numeric.add_argument("--cap", type=int, help="enumeration cap of the command's main search")
    numeric.add_argument("--vertex-cap", type=int, help="largest null-space dimension for the vertex oracle")
    numeric.add_argument("--tol", type=float, help="tolerance of the command's own check or bisection")
    numeric.add_argument("--rank-tol", type=float, help="relative singular-value cutoff for the null space")
    numeric.add_argument("--trials", type=int)
    numeric.add_argument("--seed", type=int, default=0)
    numeric.add_argument("--signal", metavar="PATH", help="signal f; default is Phi c for Gaussian c under --seed")
    numeric.add_argument("--format", choices=("json", "csv"), default="json")
    return common


# command-specific flags: dest -> add_argument arguments
_FLAGS: Dict[str, Tuple[Sequence[str], dict]] = {
    "t": (("--t",), dict(type=float, help="K-functional parameter t > 0")),
    "p": (("--p",), dict(type=float)),
    "theta": (("--theta",), dict(type=float)),
    "q": (("--q",), dict(type=float)),
    "J": (("--J",), dict(type=int, help="number of dyadic levels")),
    "kappa": (("--kappa",), dict(type=float)),
    "beta": (("--beta",), dict(type=float)),
    "blocks": (("--blocks",), dict(type=_int_list, metavar="M0,M1,...")),
    "length": (("--length",), dict(type=int, help="truncation length of the default geometric null vector")),
    "R": (("--R",), dict(type=float, nargs="+", help="redundancy N/m")),
    "m": (("--m",), dict(type=int, help="rows m for the joint failure bound")),
}

_COMMAND_FLAGS: Dict[str, Sequence[str]] = {
    "frame-bounds": (),
    "nullspace": (),
    "sigma-profile": (),
    "ltau-norm": (),
    "kfunctional": ("t", "p"),
    "interp-norm": ("theta", "q", "p", "J"),
    "bernstein-report": (),
    "prop-a": (),
    "prop-b": (),
    "example1": ("p", "beta", "blocks", "length"),
    "rip-report": (),
    "verify-rip-bernstein": ("kappa",),
    "gaussian-constants": ("R", "m"),
    "gamma-table": ("R", "m"),
    "nearbest-epsilon": (),
    "nearbest-factor": (),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsity", description="Sparse approximation constants and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.TOOL_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common_parser()
    for name in COMMANDS:
        sub = subparsers.add_parser(name, parents=[common])
        own = _COMMAND_FLAGS[name]
        for dest in own:
            flags, options = _FLAGS[dest]
            sub.add_argument(*flags, dest=dest, **options)
        sub.set_defaults(**{dest: None for dest in _FLAGS if dest not in own})
    return parser


def run(argv: Optional[Sequence[str]] = None, write: Callable[[str], None] = print) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else 2

    try:
        report = dispatch(args)
    except (SparsityError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        write(render_json(ErrorReport(command=args.command, error=type(e).__name__, message=str(e))))
        return 1
    write(render(report, args.format))
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))
