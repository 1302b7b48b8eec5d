"""Support enumeration shared by the exact oracles.

Supports are returned as integer arrays of shape (count, k) in lexicographic
order, so that an argmin/argmax over rows breaks ties towards the
lexicographically smallest support.
"""
from itertools import combinations, islice
from math import comb
from typing import Iterator, Tuple

import numpy as np

from app.utils.logger import logger


def subset_array(n: int, k: int) -> np.ndarray:
    if k == 0:
        return np.empty((1, 0), dtype=np.intp)
    if k > n:
        return np.empty((0, k), dtype=np.intp)
    rows = np.fromiter(
        (i for subset in combinations(range(n), k) for i in subset),
        dtype=np.intp,
        count=comb(n, k) * k,
    )
    return rows.reshape(-1, k)


def sample_subsets(n: int, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if k == 0:
        return np.empty((1, 0), dtype=np.intp)
    draws = np.stack([np.sort(rng.choice(n, size=k, replace=False)) for _ in range(count)])
    return np.unique(draws, axis=0)


def supports_of_size(
    n: int, k: int, cap: int, samples: int, seed: int = 0
) -> Tuple[np.ndarray, bool]:
    """All size-k supports when C(n,k) <= cap, otherwise a seeded sample.

    The flag is True when the enumeration is exhaustive.
    """
    total = comb(n, k)
    if total <= cap:
        return subset_array(n, k), True
    logger.warning(f"C({n},{k}) = {total} exceeds cap {cap}; sampling {samples} supports")
    rng = np.random.default_rng(seed)
    return sample_subsets(n, k, samples, rng), False


def complement_mask(n: int, rows: np.ndarray) -> np.ndarray:
    """Boolean (count, n) mask that is True off each support."""
    mask = np.ones((rows.shape[0], n), dtype=bool)
    if rows.shape[1]:
        np.put_along_axis(mask, rows, False, axis=1)
    return mask


def iter_subset_chunks(n: int, k: int, chunk: int = 4096) -> Iterator[np.ndarray]:
    """Lexicographic size-k subsets of range(n) in (<= chunk, k) blocks."""
    if k == 0:
        yield np.empty((1, 0), dtype=np.intp)
        return
    subsets = combinations(range(n), k)
    while True:
        block = list(islice(subsets, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)
