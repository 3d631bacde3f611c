"""Apply few-mode operators to multi-mode states without full kron products.

States and density matrices over an n-mode space (uniform cutoff c) are
reshaped to rank-n / rank-2n tensors with one length-c axis per mode; a
k-mode operator is contracted onto the chosen axes.  This keeps the cost at
O(c^(n+k)) per application instead of the O(c^(2n)) of a dense full-space
matrix product, which is what makes the higher-cutoff gate checks and the
density-matrix propagation affordable.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .fock import HilbertSpace


def _contract(op: np.ndarray, tensor: np.ndarray, axes: tuple[int, ...], cutoff: int) -> np.ndarray:
    k = len(axes)
    if op.shape != (cutoff ** k, cutoff ** k):
        raise InvalidArgument("operator dimension does not match the addressed modes")
    op_t = op.reshape((cutoff,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(tuple(range(k, 2 * k)), axes))
    return np.moveaxis(out, tuple(range(k)), axes)


def apply_to_vector(op: np.ndarray, psi: np.ndarray, modes, space: HilbertSpace) -> np.ndarray:
    """op acting on the listed modes of a state vector."""
    modes = tuple(modes)
    c = space.cutoff
    tensor = psi.reshape((c,) * space.n_modes)
    return _contract(op, tensor, modes, c).reshape(-1)


def apply_left(op: np.ndarray, rho: np.ndarray, modes, space: HilbertSpace) -> np.ndarray:
    """A @ rho with A acting on the listed modes."""
    modes = tuple(modes)
    c, n = space.cutoff, space.n_modes
    tensor = rho.reshape((c,) * (2 * n))
    return _contract(op, tensor, modes, c).reshape(space.dim, space.dim)


def apply_right_dag(op: np.ndarray, rho: np.ndarray, modes, space: HilbertSpace) -> np.ndarray:
    """rho @ A^dag with A acting on the listed modes."""
    modes = tuple(modes)
    c, n = space.cutoff, space.n_modes
    tensor = rho.reshape((c,) * (2 * n))
    shifted = tuple(m + n for m in modes)
    return _contract(op.conj(), tensor, shifted, c).reshape(space.dim, space.dim)


def sandwich(op: np.ndarray, rho: np.ndarray, modes, space: HilbertSpace) -> np.ndarray:
    """A @ rho @ A^dag with A acting on the listed modes."""
    return apply_right_dag(op, apply_left(op, rho, modes, space), modes, space)


def pair_space_matrix(op_a: np.ndarray, op_b: np.ndarray) -> np.ndarray:
    """kron(op_a, op_b) for building two-mode operators at pair level."""
    return np.kron(op_a, op_b)
