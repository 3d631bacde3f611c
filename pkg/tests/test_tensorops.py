"""Contraction helpers checked against explicit kron-product oracles."""
import numpy as np
import pytest

from fockscan.fock import HilbertSpace
from fockscan.tensorops import apply_left, apply_right_dag, apply_to_vector, sandwich


def _embed(op, modes, space):
    """Dense oracle: kron-embed a k-mode operator onto the full space."""
    c, n = space.cutoff, space.n_modes
    perm = list(modes) + [m for m in range(n) if m not in modes]
    big = np.kron(op, np.eye(c ** (n - len(modes)), dtype=complex))
    # permute tensor axes so `modes` land in the leading slots
    t = big.reshape((c,) * (2 * n))
    inv = np.argsort(perm)
    t = np.transpose(t, list(inv) + [n + i for i in inv])
    return t.reshape(space.dim, space.dim)


@pytest.mark.parametrize("n_modes,cutoff,modes", [
    (2, 3, (0,)), (2, 3, (1,)), (3, 3, (1,)),
    (3, 3, (0, 2)), (3, 3, (2, 0)), (4, 2, (1, 3)),
])
def test_vector_application_matches_dense(n_modes, cutoff, modes):
    space = HilbertSpace(n_modes, cutoff)
    rng = np.random.default_rng(hash((n_modes, cutoff, modes)) % 2 ** 32)
    k = len(modes)
    op = rng.normal(size=(cutoff ** k, cutoff ** k)) + 1j * rng.normal(size=(cutoff ** k,) * 2)
    psi = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    dense = _embed(op, modes, space)
    assert np.allclose(apply_to_vector(op, psi, modes, space), dense @ psi, atol=1e-12)


@pytest.mark.parametrize("modes", [(0,), (1,), (0, 1), (1, 0)])
def test_rho_applications_match_dense(modes):
    space = HilbertSpace(2, 3)
    rng = np.random.default_rng(5)
    k = len(modes)
    op = rng.normal(size=(3 ** k, 3 ** k)) + 1j * rng.normal(size=(3 ** k,) * 2)
    rho = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    dense = _embed(op, modes, space)
    assert np.allclose(apply_left(op, rho, modes, space), dense @ rho, atol=1e-12)
    assert np.allclose(apply_right_dag(op, rho, modes, space), rho @ dense.conj().T, atol=1e-12)
    assert np.allclose(sandwich(op, rho, modes, space), dense @ rho @ dense.conj().T, atol=1e-12)


def test_dimension_mismatch_rejected():
    space = HilbertSpace(2, 3)
    with pytest.raises(Exception):
        apply_to_vector(np.eye(4), np.zeros(9), (0,), space)
