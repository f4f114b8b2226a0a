"""Two-site reduced states, logarithmic negativity and spin-spin correlations."""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation, SiteBoundsError
from .pauli import bit_position, single_site_matrix

_PAULIS = tuple(single_site_matrix(a) for a in "xyz")


def _register_size(rho: np.ndarray) -> int:
    return int(rho.shape[0]).bit_length() - 1


def _check_pair(i: int, j: int, L: int) -> None:
    if i == j:
        raise SiteBoundsError(f"pair sites must differ, got ({i}, {j})")
    if not (1 <= i <= L and 1 <= j <= L):
        raise SiteBoundsError(f"pair ({i}, {j}) outside [1, {L}]")
    if i > j:
        raise SiteBoundsError(f"pair must be ordered i < j, got ({i}, {j})")


def reduced_two_qubit_state(rho: np.ndarray, i: int, j: int) -> np.ndarray:
    """Partial trace onto sites (i, j), site i in the first tensor slot.

    Only the 4 * 2^L entries whose row and column agree outside the pair are read.
    """
    L = _register_size(rho)
    _check_pair(i, j, L)
    pi, pj = bit_position(i, L), bit_position(j, L)
    idx = np.arange(1 << L, dtype=np.int64)
    rest = idx[((idx >> pi) & 1 == 0) & ((idx >> pj) & 1 == 0)]
    offs = [(a << pi) | (b << pj) for a in (0, 1) for b in (0, 1)]
    out = np.empty((4, 4), dtype=complex)
    for r, ro in enumerate(offs):
        rows = rest | ro
        for c, co in enumerate(offs):
            out[r, c] = rho[rows, rest | co].sum()
    return out


def reduced_one_qubit_state(rho: np.ndarray, i: int) -> np.ndarray:
    L = _register_size(rho)
    if not 1 <= i <= L:
        raise SiteBoundsError(f"site {i} outside [1, {L}]")
    p = bit_position(i, L)
    idx = np.arange(1 << L, dtype=np.int64)
    rest = idx[(idx >> p) & 1 == 0]
    out = np.empty((2, 2), dtype=complex)
    for a in (0, 1):
        for b in (0, 1):
            out[a, b] = rho[rest | (a << p), rest | (b << p)].sum()
    return out


def check_two_qubit_state(sigma: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-7) -> None:
    sigma = np.asarray(sigma)
    if sigma.shape != (4, 4):
        raise ContractViolation(f"two-qubit state must be 4x4, got {sigma.shape}")
    if np.abs(sigma - sigma.conj().T).max() > herm_tol:
        raise ContractViolation("two-qubit state is not Hermitian")
    if abs(np.trace(sigma) - 1.0) > trace_tol:
        raise ContractViolation(f"two-qubit state has trace {np.trace(sigma).real:.12g}")
    if np.linalg.eigvalsh(0.5 * (sigma + sigma.conj().T)).min() < -eig_tol:
        raise ContractViolation("two-qubit state has a negative eigenvalue")


def partial_transpose(sigma: np.ndarray) -> np.ndarray:
    """Transpose on the second qubit: out[(a,b),(c,d)] = sigma[(a,d),(c,b)]."""
    return sigma.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def logarithmic_negativity(sigma: np.ndarray, *, ppt_tol: float = 1e-10, validate: bool = True) -> float:
    """log2 of the trace norm of the partial transpose; exactly 0 for PPT input."""
    sigma = np.asarray(sigma, dtype=complex)
    if validate:
        check_two_qubit_state(sigma)
    pt = partial_transpose(sigma)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    if ev.min() >= -ppt_tol:
        return 0.0
    return max(0.0, float(np.log2(np.abs(ev).sum())))


def two_site_correlation(sigma: np.ndarray) -> float:
    """sum_a <s_a s_a> - <s^1> . <s^2> for a 4x4 two-qubit state."""
    total = 0.0
    bloch1 = np.empty(3)
    bloch2 = np.empty(3)
    eye = np.eye(2)
    for k, s in enumerate(_PAULIS):
        total += float(np.real(np.trace(sigma @ np.kron(s, s))))
        bloch1[k] = np.real(np.trace(sigma @ np.kron(s, eye)))
        bloch2[k] = np.real(np.trace(sigma @ np.kron(eye, s)))
    return total - float(bloch1 @ bloch2)


def pair_correlation(rho: np.ndarray, i: int, j: int) -> float:
    """C_ij = <sigma^i . sigma^j> - <sigma^i> . <sigma^j> (Bloch-vector dot product)."""
    if i > j:
        i, j = j, i
    return two_site_correlation(reduced_two_qubit_state(rho, i, j))
