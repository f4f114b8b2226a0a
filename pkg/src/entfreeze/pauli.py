"""Sparse Pauli-string operators and matrix-free kernels acting on density matrices.

Sites are numbered 1..L. Site ``s`` lives on bit ``L - s`` of the computational
index, so site 1 is the most significant bit and site L is bit 0; this is the
ordering produced by ``kron(op_1, op_2, ..., op_L)``. Bit value 0 is spin up
(sigma_z = +1).

Every single-site factor maps a basis state ``|b>`` to ``f(b) |b ^ flip>``,
so a whole string acts as ``P|b> = w[b] |b ^ mask>``. Applying it to a dense
matrix is then a row (or column) permutation plus a diagonal rescaling, and the
full ``2^L x 2^L`` operator is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import ContractViolation, InvalidOperatorError, NumericalIntegrityError, ShapeError, SiteBoundsError

AXES = ("x", "y", "z", "plus", "minus")

# axis -> (flips the bit, amplitude on input bit 0, amplitude on input bit 1)
_ACTION = {
    "x": (True, 1.0 + 0j, 1.0 + 0j),
    "y": (True, 1j, -1j),
    "z": (False, 1.0 + 0j, -1.0 + 0j),
    "plus": (True, 0j, 1.0 + 0j),  # sigma+ = (sx + i sy)/2 = |0><1|
    "minus": (True, 1.0 + 0j, 0j),  # sigma- = (sx - i sy)/2 = |1><0|
}
_ADJOINT_AXIS = {"x": "x", "y": "y", "z": "z", "plus": "minus", "minus": "plus"}

_SINGLE = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def single_site_matrix(axis: str) -> np.ndarray:
    """2x2 matrix of a single-site factor (copy)."""
    return _SINGLE[axis].copy()


def bit_position(site: int, L: int) -> int:
    return L - site


@dataclass(frozen=True)
class PauliString:
    """coefficient * prod_k sigma_{axis_k}^{site_k}, factors sorted by site."""

    factors: tuple[tuple[int, str], ...]
    coefficient: complex
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise SiteBoundsError(f"register size must be >= 1, got {self.L}")
        sites = [s for s, _ in self.factors]
        if len(set(sites)) != len(sites):
            raise InvalidOperatorError(f"duplicate site in factors {self.factors}")
        for s, a in self.factors:
            if a not in _ACTION:
                raise InvalidOperatorError(f"unknown axis {a!r}; expected one of {AXES}")
            if not 1 <= s <= self.L:
                raise SiteBoundsError(f"site {s} outside [1, {self.L}]")
        c = complex(self.coefficient)
        if not (np.isfinite(c.real) and np.isfinite(c.imag)):
            raise InvalidOperatorError(f"non-finite coefficient {c}")
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "factors", tuple(sorted((int(s), a) for s, a in self.factors)))

    @property
    def dim(self) -> int:
        return 1 << self.L

    @property
    def flip_mask(self) -> int:
        m = 0
        for s, a in self.factors:
            if _ACTION[a][0]:
                m |= 1 << bit_position(s, self.L)
        return m

    @property
    def label(self) -> tuple[tuple[int, str], ...]:
        return self.factors

    def weights(self) -> np.ndarray:
        """Amplitudes w[b] with P|b> = w[b] |b ^ flip_mask>."""
        idx = np.arange(self.dim, dtype=np.int64)
        w = np.full(self.dim, self.coefficient, dtype=complex)
        for s, a in self.factors:
            _, f0, f1 = _ACTION[a]
            bit = (idx >> bit_position(s, self.L)) & 1
            w *= np.where(bit == 0, f0, f1)
        return w

    def adjoint(self) -> "PauliString":
        return PauliString(
            tuple((s, _ADJOINT_AXIS[a]) for s, a in self.factors), self.coefficient.conjugate(), self.L
        )

    def scaled(self, factor: complex) -> "PauliString":
        return PauliString(self.factors, self.coefficient * factor, self.L)

    def to_dense(self) -> np.ndarray:
        """Dense matrix; intended for oracles and small registers only."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        idx = np.arange(self.dim)
        out[idx ^ self.flip_mask, idx] = self.weights()
        return out


def embed_pauli(factors: Iterable[tuple[int, str]], coefficient: complex, L: int) -> PauliString:
    """Build a canonical (site-sorted) string on an L-site register."""
    return PauliString(tuple((int(s), str(a)) for s, a in factors), coefficient, L)


@dataclass(frozen=True)
class OperatorSum:
    """Sum of Pauli strings on a common register.

    ``hermitian=True`` is a claim that gets checked at construction.
    """

    terms: tuple[PauliString, ...]
    L: int
    hermitian: bool = False
    _tol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.L != self.L:
                raise ShapeError(f"term on {t.L} sites inside a sum on {self.L} sites")
        if self.hermitian and not self.is_hermitian():
            raise ContractViolation("OperatorSum marked Hermitian differs from its adjoint")

    @property
    def dim(self) -> int:
        return 1 << self.L

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if other.L != self.L:
            raise ShapeError("cannot add operators on different registers")
        return OperatorSum(self.terms + other.terms, self.L, self.hermitian and other.hermitian)

    def scaled(self, factor: float) -> "OperatorSum":
        herm = self.hermitian and float(np.imag(factor)) == 0.0
        return OperatorSum(tuple(t.scaled(factor) for t in self.terms), self.L, herm)

    def adjoint(self) -> "OperatorSum":
        return OperatorSum(tuple(t.adjoint() for t in self.terms), self.L)

    def canonical(self, tol: float = 0.0) -> dict[tuple[tuple[int, str], ...], complex]:
        """Merge identical strings; drop coefficients with modulus <= tol."""
        merged: dict[tuple[tuple[int, str], ...], complex] = {}
        for t in self.terms:
            merged[t.factors] = merged.get(t.factors, 0j) + t.coefficient
        return {k: v for k, v in sorted(merged.items()) if abs(v) > tol}

    def is_hermitian(self, tol: float | None = None) -> bool:
        tol = self._tol if tol is None else tol
        a = self.canonical()
        b = self.adjoint().canonical()
        for k in set(a) | set(b):
            if abs(a.get(k, 0j) - b.get(k, 0j)) > tol:
                return False
        return True

    @cached_property
    def groups(self) -> tuple[np.ndarray, np.ndarray]:
        """Terms bucketed by flip mask: (masks[G], weights[G, dim])."""
        buckets: dict[int, np.ndarray] = {}
        for t in self.terms:
            m = t.flip_mask
            if m in buckets:
                buckets[m] = buckets[m] + t.weights()
            else:
                buckets[m] = t.weights()
        if not buckets:
            return np.zeros(0, dtype=np.int64), np.zeros((0, self.dim), dtype=complex)
        masks = np.array(sorted(buckets), dtype=np.int64)
        weights = np.ascontiguousarray(np.stack([buckets[int(m)] for m in masks]))
        return masks, weights

    def to_dense(self) -> np.ndarray:
        """Dense matrix; used for exact diagonalization (thermal states, oracles)."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        idx = np.arange(self.dim)
        masks, weights = self.groups
        for m, w in zip(masks, weights):
            out[idx ^ m, idx] += w
        return out


def operator_sum(terms: Sequence[PauliString], L: int, hermitian: bool = False) -> OperatorSum:
    return OperatorSum(tuple(terms), L, hermitian)


def _check_square(rho: np.ndarray, dim: int) -> None:
    if rho.ndim != 2 or rho.shape != (dim, dim):
        raise ShapeError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")


def apply_string(term: PauliString, side: str, rho: np.ndarray) -> np.ndarray:
    """Return ``term @ rho`` (side='left') or ``rho @ term`` (side='right')."""
    _check_square(rho, term.dim)
    w = term.weights()
    perm = np.arange(term.dim, dtype=np.int64) ^ term.flip_mask
    if side == "left":
        # (P rho)[r, :] = w[r ^ m] rho[r ^ m, :]
        return w[perm][:, None] * rho[perm, :]
    if side == "right":
        # (rho P)[:, c] = w[c] rho[:, c ^ m]
        return rho[:, perm] * w[None, :]
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@numba.njit(cache=True, nogil=True)
def _grouped_left(masks, weights, rho, out):
    dim = rho.shape[0]
    ng = masks.shape[0]
    for r in range(dim):
        for c in range(dim):
            out[r, c] = 0.0
        for g in range(ng):
            src = r ^ masks[g]
            w = weights[g, src]
            if w != 0:
                for c in range(dim):
                    out[r, c] += w * rho[src, c]


@numba.njit(cache=True, nogil=True)
def _grouped_right(masks, weights, rho, out):
    dim = rho.shape[0]
    ng = masks.shape[0]
    for r in range(dim):
        for c in range(dim):
            out[r, c] = 0.0
        for g in range(ng):
            m = masks[g]
            for c in range(dim):
                w = weights[g, c]
                if w != 0:
                    out[r, c] += w * rho[r, c ^ m]


def apply_sum(op: OperatorSum, side: str, rho: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """``op @ rho`` or ``rho @ op`` with one pass per distinct flip mask."""
    _check_square(rho, op.dim)
    rho = np.ascontiguousarray(rho, dtype=complex)
    if out is None:
        out = np.empty_like(rho)
    masks, weights = op.groups
    if side == "left":
        _grouped_left(masks, weights, rho, out)
    elif side == "right":
        _grouped_right(masks, weights, rho, out)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return out


def trace_product(op: OperatorSum, rho: np.ndarray) -> complex:
    """tr(op @ rho) in O(dim) per flip mask."""
    _check_square(rho, op.dim)
    idx = np.arange(op.dim, dtype=np.int64)
    masks, weights = op.groups
    total = 0j
    for m, w in zip(masks, weights):
        # tr(P rho) = sum_b w[b] rho[b, b ^ m]
        total += complex(np.sum(w * rho[idx, idx ^ m]))
    return total


def expectation(rho: np.ndarray, op: OperatorSum, imag_tol: float = 1e-10) -> float:
    """Real expectation value tr(rho op) of a Hermitian operator."""
    if not (op.hermitian or op.is_hermitian()):
        raise ContractViolation("expectation requires a Hermitian operator")
    val = trace_product(op, rho)
    if abs(val.imag) > imag_tol:
        raise NumericalIntegrityError(f"imaginary residue {val.imag:.3e} in expectation value")
    return float(val.real)
