"""Spin-chain Hamiltonians, ATXY phase labels and quenched-disorder sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, PhaseClassificationError, SpecError
from .pauli import OperatorSum, PauliString, embed_pauli

VARIANTS = ("atxy", "txy", "txxz", "txyz", "heisenberg", "j1j2")
BOUNDARIES = ("open", "periodic")


def _as_site_list(value, L: int, name: str) -> tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * L
    vals = tuple(float(v) for v in value)
    if len(vals) != L:
        raise SpecError(f"{name} has {len(vals)} entries, expected L = {L}")
    return vals


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of H_S. Fields h1, h2 are in units of J, per site or one scalar for all.

    ``j2`` is only read by the ``j1j2`` variant, where ``J`` plays the role
    of the nearest-neighbour coupling J1.
    """

    L: int
    J: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0
    h1: tuple[float, ...] = field(default=())
    h2: tuple[float, ...] = field(default=())
    boundary: str = "open"
    variant: str = "atxy"
    j2: float = 0.0

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 1:
            raise SpecError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        h1 = 0.0 if np.ndim(self.h1) and not len(self.h1) else self.h1
        h2 = 0.0 if np.ndim(self.h2) and not len(self.h2) else self.h2
        object.__setattr__(self, "h1", _as_site_list(h1, self.L, "h1"))
        object.__setattr__(self, "h2", _as_site_list(h2, self.L, "h2"))
        for name in ("J", "gamma", "delta", "j2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise SpecError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not all(math.isfinite(v) for v in self.h1 + self.h2):
            raise SpecError("fields must be finite")
        if self.J <= 0:
            raise SpecError(f"J must be > 0, got {self.J}")
        if self.boundary not in BOUNDARIES:
            raise SpecError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.boundary == "periodic" and self.L < 3:
            raise SpecError("periodic boundary needs L >= 3")
        if self.variant not in VARIANTS:
            raise SpecError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self._check_variant()

    def _check_variant(self):
        v = self.variant
        no_h2 = all(x == 0.0 for x in self.h2)
        problems = []
        if v == "atxy" and self.delta != 0.0:
            problems.append("atxy requires delta = 0")
        if v in ("txy", "txxz", "txyz", "heisenberg") and not no_h2:
            problems.append(f"{v} requires h2 = 0")
        if v == "txy" and self.delta != 0.0:
            problems.append("txy requires delta = 0")
        if v in ("txxz", "heisenberg") and self.gamma != 0.0:
            problems.append(f"{v} requires gamma = 0")
        if v == "heisenberg" and self.delta != 1.0:
            problems.append("heisenberg requires delta = 1")
        if v == "j1j2" and self.L < 3:
            problems.append("j1j2 requires L >= 3")
        if problems:
            raise SpecError("; ".join(problems))

    @classmethod
    def uniform(cls, L: int, *, h1: float = 0.0, h2: float = 0.0, **kw) -> "ChainSpec":
        return cls(L=L, h1=(float(h1),) * L, h2=(float(h2),) * L, **kw)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "J": self.J, "gamma": self.gamma, "delta": self.delta,
            "h1": list(self.h1), "h2": list(self.h2), "boundary": self.boundary,
            "variant": self.variant, "j2": self.j2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        d = dict(d)
        d["h1"] = tuple(d.get("h1", ()))
        d["h2"] = tuple(d.get("h2", ()))
        return cls(**d)


@dataclass(frozen=True)
class DisorderSpec:
    target: str  # "h1" or "h2"
    mean: float
    std: float
    realizations: int
    base_seed: int = 0

    def __post_init__(self):
        if self.target not in ("h1", "h2"):
            raise SpecError(f"disorder target must be 'h1' or 'h2', got {self.target!r}")
        if not self.std >= 0:
            raise SpecError(f"disorder std must be >= 0, got {self.std}")
        if self.realizations < 1:
            raise SpecError(f"realizations must be >= 1, got {self.realizations}")
        if not 0 <= self.base_seed < 2**64:
            raise SpecError("base_seed must be a 64-bit unsigned integer")


def nn_bonds(L: int, boundary: str) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(1, L)]
    if boundary == "periodic":
        bonds.append((L, 1))
    return bonds


def j1j2_bonds(L: int, boundary: str) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(nearest, next-nearest) bonds; open chains drop bonds that leave the chain."""
    if boundary == "periodic":
        nn = [(i, i % L + 1) for i in range(1, L + 1)]
        nnn = [(i, (i + 1) % L + 1) for i in range(1, L + 1)]
    else:
        nn = [(i, i + 1) for i in range(1, L)]
        nnn = [(i, i + 2) for i in range(1, L - 1)]
    return nn, nnn


def _pair(i: int, j: int, axis: str, coeff: float, L: int) -> PauliString:
    return embed_pauli([(i, axis), (j, axis)], coeff, L)


def build_hamiltonian(spec: ChainSpec) -> OperatorSum:
    """H_S of the anisotropic XY/XYZ family with uniform plus staggered field.

    Bond (i, i+1): J/4 [(1+g) XX + (1-g) YY] + J*delta/4 ZZ.
    Site i: J/2 [h1_i + (-1)^i h2_i] Z, so site 1 feels -h2.
    """
    if spec.variant == "j1j2":
        return build_j1j2(spec.L, spec.J, spec.j2, spec.boundary)
    L, J, g = spec.L, spec.J, spec.gamma
    terms: list[PauliString] = []
    for i, j in nn_bonds(L, spec.boundary):
        for axis, c in (("x", J * (1 + g) / 4), ("y", J * (1 - g) / 4), ("z", J * spec.delta / 4)):
            if c != 0.0:
                terms.append(_pair(i, j, axis, c, L))
    for i in range(1, L + 1):
        c = 0.5 * J * (spec.h1[i - 1] + (-1) ** i * spec.h2[i - 1])
        if c != 0.0:
            terms.append(embed_pauli([(i, "z")], c, L))
    return OperatorSum(tuple(terms), L, hermitian=True)


def build_j1j2(L: int, J1: float, J2: float, boundary: str = "open") -> OperatorSum:
    """J1 sum_i s_i . s_{i+1} + J2 sum_i s_i . s_{i+2}."""
    if L < 3:
        raise SpecError(f"J1-J2 chain needs L >= 3, got {L}")
    if boundary not in BOUNDARIES:
        raise SpecError(f"boundary must be one of {BOUNDARIES}")
    nn, nnn = j1j2_bonds(L, boundary)
    terms = []
    for bonds, c in ((nn, J1), (nnn, J2)):
        for i, j in bonds:
            terms.extend(_pair(i, j, a, c, L) for a in "xyz")
    return OperatorSum(tuple(terms), L, hermitian=True)


PHASES = ("PM-I", "PM-II", "AFM", "boundary")


def classify_phase(h1_over_J: float, h2_over_J: float, gamma: float) -> str:
    """Thermodynamic-limit ATXY phase of (h1/J, h2/J) at anisotropy gamma.

    Points within a relative 1e-12 of either critical curve are labelled
    ``"boundary"``.
    """
    if gamma == 0:
        raise ParameterError("phase classification needs gamma != 0")
    a, b, g2 = h1_over_J**2, h2_over_J**2, gamma**2
    tol = 1e-12 * max(1.0, a, b)
    d1 = a - (b + 1.0)  # > 0: PM-I side
    d2 = b - (a + g2)  # > 0: PM-II side
    if abs(d1) <= tol or abs(d2) <= tol:
        return "boundary"
    pm1, pm2 = d1 > 0, d2 > 0
    if pm1 and pm2:
        raise PhaseClassificationError(f"({h1_over_J}, {h2_over_J}, {gamma}) satisfies both PM conditions")
    if pm1:
        return "PM-I"
    if pm2:
        return "PM-II"
    return "AFM"


def disorder_rng(base_seed: int, realization_index: int) -> np.random.Generator:
    """Counter-based stream: depends only on (base_seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(realization_index)]))


def sample_disorder(spec: ChainSpec, disorder: DisorderSpec, realization_index: int) -> ChainSpec:
    if not 0 <= realization_index < disorder.realizations:
        raise IndexError(f"realization {realization_index} outside [0, {disorder.realizations})")
    if disorder.std == 0:
        fields = np.full(spec.L, float(disorder.mean))
    else:
        rng = disorder_rng(disorder.base_seed, realization_index)
        fields = rng.normal(disorder.mean, disorder.std, size=spec.L)
    return replace(spec, **{disorder.target: tuple(float(x) for x in fields)})


# Specimen points of the three ATXY phases used throughout the examples.
PHASE_POINTS = {
    "PM-I": {"h1": 1.2, "h2": 0.0, "gamma": 0.8},
    "PM-II": {"h1": 0.0, "h2": 1.2, "gamma": 0.8},
    "AFM": {"h1": 0.2, "h2": 0.2, "gamma": 0.8},
}


def atxy_point(phase: str, L: int, **kw) -> ChainSpec:
    p = PHASE_POINTS[phase]
    return ChainSpec.uniform(L, h1=p["h1"], h2=p["h2"], gamma=p["gamma"], variant="atxy", **kw)
