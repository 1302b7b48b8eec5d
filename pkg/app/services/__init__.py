from .dictionary import Dictionary, frame_bounds, null_space_basis
from .sparse_norms import SparsityNormOracle, k_functional, sigma_profile

__all__ = [
    "Dictionary",
    "frame_bounds",
    "null_space_basis",
    "SparsityNormOracle",
    "k_functional",
    "sigma_profile",
]
