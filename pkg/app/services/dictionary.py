"""Finite dictionaries: construction, spectral analysis and matrix files.

A dictionary is an m x N real matrix whose columns are the atoms. Everything
here is a pure function of its inputs (plus a seed for the Gaussian builder).
"""
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.linalg import null_space

from app.utils.errors import DomainError, MatrixFormatError
from app.utils.logger import logger

PathLike = Union[str, Path]

QUASI_NORM_RANGE = (0.1, 10.0)


class Dictionary(BaseModel):
    """Dense m x N matrix of atoms with a short label."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    atoms: np.ndarray
    label: str = "custom"

    @field_validator("atoms", mode="before")
    @classmethod
    def _validate_atoms(cls, value):
        atoms = np.array(value, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise DomainError(f"atoms must be a non-empty 2-d matrix, got shape {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("atoms must be finite")
        if np.any(np.linalg.norm(atoms, axis=0) == 0.0):
            raise DomainError("every atom must have a strictly positive norm")
        atoms.setflags(write=False)
        return atoms

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def N(self) -> int:
        return self.atoms.shape[1]


class FrameBounds(BaseModel):
    A: float
    B: float


class NullSpaceBasis(BaseModel):
    """Orthonormal basis of ker(Phi), one basis vector per column."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    basis: np.ndarray
    d: int
    tol: float
    rank: int

    def vectors(self) -> List[np.ndarray]:
        return [self.basis[:, i] for i in range(self.d)]


class QuasiNormalization(BaseModel):
    min_norm: float
    max_norm: float
    ok: bool


class PerturbedNullVector(BaseModel):
    """Block-constant perturbation of a null vector (finite truncation)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    z_tilde: np.ndarray
    block_boundaries: List[int]
    gamma_values: List[float]
    C_step3: float
    p: float
    beta: float
    epsilon: float
    m0_required: int
    distance_p: float

    @property
    def m0(self) -> int:
        return self.block_boundaries[0]


def frame_bounds(dictionary: Dictionary) -> FrameBounds:
    """A and B are the squared extreme singular values over the m row directions."""
    singular_values = np.linalg.svd(dictionary.atoms, compute_uv=False)
    B = float(singular_values[0] ** 2)
    # fewer than m singular values means Phi^T has a kernel
    A = float(singular_values[dictionary.m - 1] ** 2) if singular_values.size >= dictionary.m else 0.0
    return FrameBounds(A=A, B=B)


def default_rank_tol(dictionary: Dictionary) -> float:
    return max(dictionary.m, dictionary.N) * np.finfo(float).eps


def null_space_basis(dictionary: Dictionary, tol: Optional[float] = None) -> NullSpaceBasis:
    """Orthonormal kernel basis; ``tol`` is relative to the largest singular value."""
    if tol is None:
        tol = default_rank_tol(dictionary)
    if tol <= 0:
        raise DomainError(f"rank tolerance must be positive, got {tol}")
    basis = null_space(dictionary.atoms, rcond=tol)
    d = basis.shape[1]
    if d == 1:
        # fix the sign so that the first significant entry is positive
        column = basis[:, 0]
        lead = np.flatnonzero(np.abs(column) > 1e-12 * np.abs(column).max())[0]
        if column[lead] < 0:
            basis = -basis
    basis.setflags(write=False)
    return NullSpaceBasis(basis=basis, d=d, tol=float(tol), rank=dictionary.N - d)


def build_dirac_plus_atom(g: Sequence[float], label: Optional[str] = None) -> Dictionary:
    """[I_n | g]: the Dirac basis augmented by one extra atom."""
    g = np.asarray(g, dtype=float).ravel()
    atoms = np.hstack([np.eye(g.size), g[:, None]])
    dictionary = Dictionary(atoms=atoms, label=label or f"dirac-plus-atom-{g.size}")
    quasi_normalization_report(dictionary)
    return dictionary


def build_dirac_dc(m: int) -> Dictionary:
    if m < 1:
        raise DomainError(f"Dirac+DC needs m >= 1, got {m}")
    return build_dirac_plus_atom(np.full(m, 1.0 / np.sqrt(m)), label=f"dirac-dc-{m}")


def build_dirac_geometric(n: int, a: float) -> Dictionary:
    """[I_n | g] with g_k = -a^k; the extra atom is deliberately left unnormalized."""
    if n < 1:
        raise DomainError(f"Dirac+geometric needs n >= 1, got {n}")
    if not 0.0 < a < 1.0:
        raise DomainError(f"geometric ratio must lie in (0,1), got {a}")
    g = -(a ** np.arange(1, n + 1, dtype=float))
    return build_dirac_plus_atom(g, label=f"dirac-geometric-{n}-{a:g}")


def build_gaussian(m: int, N: int, seed: int) -> Dictionary:
    """i.i.d. N(0, 1/m) entries, reproducible from the seed."""
    if m < 1 or N < 1:
        raise DomainError(f"Gaussian dictionary needs m, N >= 1, got {m}x{N}")
    rng = np.random.default_rng(seed)
    atoms = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, N))
    return Dictionary(atoms=atoms, label=f"gaussian-{m}x{N}-seed{seed}")


def dictionary_from_null_vector(z: Sequence[float]) -> Dictionary:
    """(N-1) x N tight frame whose kernel is span{z}."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 2:
        raise DomainError("a one-dimensional kernel needs at least two coefficients")
    if not np.any(z):
        raise DomainError("null vector must be nonzero")
    rows = null_space(z[None, :]).T
    return Dictionary(atoms=rows, label=f"null-vector-{z.size}")


def quasi_normalization_report(dictionary: Dictionary) -> QuasiNormalization:
    norms = np.linalg.norm(dictionary.atoms, axis=0)
    low, high = QUASI_NORM_RANGE
    ok = bool(norms.min() >= low and norms.max() <= high)
    if not ok:
        logger.warning(
            f"⚠ {dictionary.label}: column norms span [{norms.min():.3g}, {norms.max():.3g}], "
            f"outside [{low}, {high}]"
        )
    return QuasiNormalization(min_norm=float(norms.min()), max_norm=float(norms.max()), ok=ok)


def perturb_null_vector(
    z: Sequence[float],
    epsilon: float,
    p: float,
    beta: float,
    blocks: Sequence[int],
) -> PerturbedNullVector:
    """Replace the tail of z by block plateaus gamma_l = C (m_{l+1} - m_l)^(-beta).

    ``blocks`` is (m_0, m_1, ...); positions are 1-based as in the construction,
    entry j of z lives at index j - 1. Entries beyond the last block are zero.
    """
    z = np.asarray(z, dtype=float).ravel()
    blocks = [int(b) for b in blocks]
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0,1], got {p}")
    if beta <= 1.0 / p:
        raise DomainError(f"beta must exceed 1/p = {1.0 / p:g}, got {beta}")
    if len(blocks) < 2:
        raise DomainError("blocks must hold m_0 and at least one block end")
    if blocks[0] < 2:
        raise DomainError(f"m_0 must be at least 2, got {blocks[0]}")
    widths = np.diff(blocks)
    if np.any(widths <= 0):
        raise DomainError(f"blocks must be strictly increasing, got {blocks}")
    ratios = np.array(blocks[1:], dtype=float) / np.array(blocks[:-1], dtype=float)
    if np.any(np.diff(ratios) <= 0):
        raise DomainError(f"block ratios m_(l+1)/m_l must strictly increase, got {ratios.tolist()}")
    if z.size < blocks[-1]:
        raise DomainError(f"truncation of length {z.size} cannot host blocks up to {blocks[-1]}")

    magnitudes = np.abs(z) ** p
    tails = np.cumsum(magnitudes[::-1])[::-1]
    # step 1: smallest m_0 >= 2 whose p-tail sum_{j >= m_0} is below epsilon / 2
    admissible = np.flatnonzero(tails[1:] < epsilon / 2.0)
    m0_required = int(admissible[0]) + 2 if admissible.size else z.size + 1
    m0 = blocks[0]
    if m0 < m0_required:
        raise DomainError(f"step 1 requires m_0 >= {m0_required}, blocks start at {m0}")

    # step 3: C^p * sum_l width_l^(1 - beta p) = sum_{j > m_0} |z_j|^p
    rhs = float(magnitudes[m0:].sum())
    if rhs == 0.0:
        raise DomainError("normalization equation has zero right-hand side (z vanishes beyond m_0)")
    widths = widths.astype(float)
    C = (rhs / float(np.sum(widths ** (1.0 - beta * p)))) ** (1.0 / p)
    gammas = C * widths ** (-beta)

    # step 4
    z_tilde = np.zeros_like(z)
    z_tilde[:m0] = z[:m0]
    for gamma, lo, hi in zip(gammas, blocks[:-1], blocks[1:]):
        z_tilde[lo:hi] = gamma

    distance = float(np.sum(np.abs(z - z_tilde) ** p))
    if not distance < epsilon:
        raise DomainError(f"perturbation distance {distance:.6g} is not below epsilon {epsilon:g}")
    logger.info(
        f"Perturbed null vector: m0={m0} (required {m0_required}), {len(gammas)} blocks, "
        f"C={C:.6g}, ||z - z~||_p^p={distance:.3g}"
    )
    z_tilde.setflags(write=False)
    return PerturbedNullVector(
        z_tilde=z_tilde,
        block_boundaries=blocks,
        gamma_values=gammas.tolist(),
        C_step3=float(C),
        p=float(p),
        beta=float(beta),
        epsilon=float(epsilon),
        m0_required=m0_required,
        distance_p=distance,
    )


def save_matrix(dictionary: Dictionary, path: PathLike) -> None:
    """UTF-8 text: "m N" then m rows of shortest round-trip decimals."""
    lines = [f"{dictionary.m} {dictionary.N}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in dictionary.atoms]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix(path: PathLike) -> Dictionary:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFormatError(f"{path}: empty matrix file")
    header = lines[0].split()
    try:
        if len(header) != 2:
            raise ValueError
        m, N = int(header[0]), int(header[1])
    except ValueError:
        raise MatrixFormatError(f"{path}: line 1: expected header 'm N', got {lines[0]!r}")
    if m < 1 or N < 1:
        raise MatrixFormatError(f"{path}: line 1: dimensions must be positive, got {m} {N}")
    body = lines[1:]
    if len(body) != m:
        raise MatrixFormatError(f"{path}: header announces {m} rows, found {len(body)}")
    atoms = np.empty((m, N))
    for line_number, line in enumerate(body, start=2):
        fields = line.split()
        if len(fields) != N:
            raise MatrixFormatError(
                f"{path}: line {line_number}: expected {N} values, found {len(fields)}"
            )
        try:
            atoms[line_number - 2] = [float(x) for x in fields]
        except ValueError as e:
            raise MatrixFormatError(f"{path}: line {line_number}: {e}")
    return Dictionary(atoms=atoms, label=path.stem)


def save_vector(values: Sequence[float], path: PathLike) -> None:
    Path(path).write_text(" ".join(repr(float(x)) for x in np.ravel(values)) + "\n", encoding="utf-8")


def load_vector(path: PathLike) -> np.ndarray:
    """Whitespace-separated decimals, possibly over several lines."""
    path = Path(path)
    values: List[float] = []
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        for field in line.split():
            try:
                values.append(float(field))
            except ValueError:
                raise MatrixFormatError(f"{path}: line {line_number}: not a number: {field!r}")
    if not values:
        raise MatrixFormatError(f"{path}: empty vector file")
    return np.array(values)
