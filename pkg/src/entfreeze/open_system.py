"""Door dissipators, the Lindblad right-hand side, and a collision-model oracle.

Units are dimensionless: hbar = J = 1, time is Jt/hbar, the coupling k is
k/(hbar J) and the bath enters only through the product B*beta_E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ParameterError, ResourceError, ShapeError, SiteBoundsError, SpecError
from .pauli import OperatorSum, apply_sum, embed_pauli

NOISE_KINDS = ("lrqi", "dephasing", "none")


def bath_populations(beta_E_B: float) -> tuple[float, float]:
    """(p0, p1) of the bath qubit diag(p0, p1), p0 the sigma_z = +1 level.

    p0 = exp(-x)/Z, p1 = exp(+x)/Z with x = B*beta_E.
    """
    x = float(beta_E_B)
    e = math.exp(-2.0 * abs(x))
    lo, hi = e / (1.0 + e), 1.0 / (1.0 + e)
    return (lo, hi) if x >= 0 else (hi, lo)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "lrqi"
    doors: tuple[tuple[int, int], ...] = ((1, 1),)
    k: float = 1.0
    beta_E_B: float = 10.0
    omega_c: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise SpecError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        doors = tuple((int(d), int(r)) for d, r in self.doors)
        object.__setattr__(self, "doors", doors)
        sites = [d for d, _ in doors]
        if len(set(sites)) != len(sites):
            raise SpecError(f"door sites must be distinct, got {sites}")
        if any(d < 1 for d in sites):
            raise SpecError("door sites are 1-based")
        if any(r < 1 for _, r in doors):
            raise SpecError("door multiplicities must be positive integers")
        if not self.k > 0:
            raise SpecError(f"k must be > 0, got {self.k}")
        if not self.omega_c > 0:
            raise SpecError(f"omega_c must be > 0, got {self.omega_c}")
        if self.kind == "dephasing" and not 0 < self.s <= 2:
            raise SpecError(f"Ohmicity s must lie in (0, 2], got {self.s}")
        if not math.isfinite(self.beta_E_B):
            raise SpecError("beta_E_B must be finite")

    @property
    def populations(self) -> tuple[float, float]:
        return bath_populations(self.beta_E_B)

    def check_register(self, L: int) -> None:
        for d, _ in self.doors:
            if d > L:
                raise SiteBoundsError(f"door site {d} outside [1, {L}]")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "doors": [list(d) for d in self.doors], "k": self.k,
            "beta_E_B": self.beta_E_B, "omega_c": self.omega_c, "s": self.s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        d = dict(d)
        d["doors"] = tuple(tuple(x) for x in d.get("doors", ()))
        return cls(**d)


def _register_size(rho: np.ndarray) -> int:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"density matrix must be square, got {rho.shape}")
    L = int(rho.shape[0]).bit_length() - 1
    if 1 << L != rho.shape[0]:
        raise ShapeError(f"dimension {rho.shape[0]} is not a power of two")
    return L


@numba.njit(cache=True, nogil=True)
def _lrqi_kernel(rho, out, bit, gain_up, gain_dn, coh):
    # gain_up = 4k p0 (down -> up), gain_dn = 4k p1 (up -> down), coh = 2k(p0 + p1)
    n = rho.shape[0]
    m = 1 << bit
    for r in range(n):
        a = (r >> bit) & 1
        for c in range(n):
            b = (c >> bit) & 1
            if a != b:
                out[r, c] -= coh * rho[r, c]
            elif a == 0:
                out[r, c] += gain_up * rho[r ^ m, c ^ m] - gain_dn * rho[r, c]
            else:
                out[r, c] += gain_dn * rho[r ^ m, c ^ m] - gain_up * rho[r, c]


@numba.njit(cache=True, nogil=True)
def _dephasing_kernel(rho, out, bit, rate):
    n = rho.shape[0]
    for r in range(n):
        a = (r >> bit) & 1
        for c in range(n):
            if a != ((c >> bit) & 1):
                out[r, c] -= 2.0 * rate * rho[r, c]


def _door_bit(door: int, L: int) -> int:
    if not 1 <= door <= L:
        raise SiteBoundsError(f"door site {door} outside [1, {L}]")
    return L - door


def _add_lrqi(out: np.ndarray, rho: np.ndarray, door: int, L: int, k: float, p0: float, p1: float, scale: float):
    # Block form of 2k[p0(2 s+ r s- - {s- s+, r}) + p1(2 s- r s+ - {s+ s-, r})] with s+ = |0><1|.
    _lrqi_kernel(rho, out, _door_bit(door, L), 4.0 * k * p0 * scale, 4.0 * k * p1 * scale, 2.0 * k * (p0 + p1) * scale)


def _add_dephasing(out: np.ndarray, rho: np.ndarray, door: int, L: int, rate: float):
    _dephasing_kernel(rho, out, _door_bit(door, L), float(rate))


def _check_populations(p0: float, p1: float) -> None:
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-12:
        raise ParameterError(f"bath populations must be non-negative and sum to 1, got ({p0}, {p1})")


def lrqi_dissipator(rho: np.ndarray, door: int, k: float, p0: float, p1: float) -> np.ndarray:
    """Repeated-interaction dissipator on one door; sigma+- = (sx +- i sy)/2.

    Relaxation of the door's up level runs at 4 k p1, excitation at 4 k p0.
    """
    _check_populations(p0, p1)
    L = _register_size(rho)
    rho = np.ascontiguousarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    _add_lrqi(out, rho, door, L, k, p0, p1, 1.0)
    return out


def dephasing_rate(t: float, s: float, omega_c: float) -> float:
    """Zero-temperature dephasing rate of an Ohmic-family bath at time t."""
    if s <= 0:
        raise ParameterError(f"Ohmicity s must be > 0, got {s}")
    if t < 0:
        raise ParameterError(f"time must be >= 0, got {t}")
    x = omega_c * t
    return omega_c * (1.0 + x * x) ** (-s / 2.0) * math.sin(s * math.atan(x)) * math.gamma(s)


def dephasing_dissipator(rho: np.ndarray, door: int, rate: float) -> np.ndarray:
    """rate * (sz rho sz - rho) on the door site."""
    if rate < 0:
        raise ParameterError(f"negative dephasing rate {rate} (non-Markovian regime not supported)")
    L = _register_size(rho)
    rho = np.ascontiguousarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    _add_dephasing(out, rho, door, L, rate)
    return out


def add_dissipators(out: np.ndarray, rho: np.ndarray, t: float, noise: NoiseSpec, L: int) -> np.ndarray:
    """out += sum_d r_d D_d(rho)."""
    if noise.kind == "none":
        return out
    if noise.kind == "lrqi":
        p0, p1 = noise.populations
        for d, r in noise.doors:
            _add_lrqi(out, rho, d, L, noise.k, p0, p1, float(r))
    else:
        rate = dephasing_rate(t, noise.s, noise.omega_c)
        for d, r in noise.doors:
            _add_dephasing(out, rho, d, L, r * rate)
    return out


def dissipative_part(rho: np.ndarray, t: float, noise: NoiseSpec) -> np.ndarray:
    L = _register_size(rho)
    noise.check_register(L)
    rho = np.ascontiguousarray(rho, dtype=complex)
    return add_dissipators(np.zeros_like(rho), rho, t, noise, L)


@numba.njit(cache=True, nogil=True)
def _minus_i_antiherm(a, out):
    # out = -i (a - a^dagger), walked in tiles to keep the transpose cache friendly
    n = a.shape[0]
    T = 32
    for bi in range(0, n, T):
        for bj in range(0, n, T):
            for i in range(bi, min(bi + T, n)):
                for j in range(bj, min(bj + T, n)):
                    out[i, j] = -1j * (a[i, j] - a[j, i].conjugate())


def coherent_part(rho: np.ndarray, H: OperatorSum, *, hermitian_input: bool = False) -> np.ndarray:
    """-i [H, rho]. With a Hermitian rho only H rho is formed and rho H = (H rho)^dagger."""
    rho = np.ascontiguousarray(rho, dtype=complex)
    left = apply_sum(H, "left", rho)
    if hermitian_input:
        out = np.empty_like(rho)
        _minus_i_antiherm(left, out)
        return out
    right = apply_sum(H, "right", rho)
    left -= right
    left *= -1j
    return left


def liouvillian(
    rho: np.ndarray, t: float, H: OperatorSum, noise: NoiseSpec, *, hermitian_input: bool = False
) -> np.ndarray:
    """-i[H, rho] + sum_d r_d D_d(rho, t)."""
    L = _register_size(rho)
    if H.L != L:
        raise ShapeError(f"Hamiltonian acts on {H.L} sites, state on {L}")
    if t < 0:
        raise ParameterError(f"time must be >= 0, got {t}")
    noise.check_register(L)
    rho = np.ascontiguousarray(rho, dtype=complex)
    out = coherent_part(rho, H, hermitian_input=hermitian_input)
    return add_dissipators(out, rho, t, noise, L)


def _embed_on_larger(op: OperatorSum, L_new: int) -> OperatorSum:
    return OperatorSum(tuple(embed_pauli(t.factors, t.coefficient, L_new) for t in op.terms), L_new)


def collision_model_oracle(
    H_S: OperatorSum,
    door: int,
    k: float,
    beta_E_B: float,
    delta_t: float,
    n_steps: int,
    rho0: np.ndarray,
    *,
    bath_field: float = 1.0,
    max_sites: int = 6,
) -> np.ndarray:
    """Explicit repeated-interaction evolution with one fresh bath qubit per step.

    The bath qubit is appended after the system (last tensor slot). Each step
    evolves S+E exactly under H_S + B sz_E + sqrt(k/dt)(sx_d sx_E + sy_d sy_E)
    for dt and traces E out. ``bath_field`` is B; beta_E is beta_E_B / B.
    """
    L = H_S.L
    if L > max_sites:
        raise ResourceError(f"collision oracle limited to {max_sites} system sites, got {L}")
    if delta_t <= 0:
        raise ParameterError("delta_t must be > 0")
    if not 1 <= door <= L:
        raise SiteBoundsError(f"door site {door} outside [1, {L}]")
    D = 1 << L
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (D, D):
        raise ShapeError(f"rho0 has shape {rho.shape}, expected ({D}, {D})")
    env = L + 1
    g = math.sqrt(k / delta_t)
    terms = list(_embed_on_larger(H_S, env).terms) + [
        embed_pauli([(env, "z")], bath_field, env),
        embed_pauli([(door, "x"), (env, "x")], g, env),
        embed_pauli([(door, "y"), (env, "y")], g, env),
    ]
    H = OperatorSum(tuple(terms), env).to_dense()
    E, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * delta_t * E)) @ V.conj().T
    p0, p1 = bath_populations(beta_E_B)
    rho_E = np.diag([p0, p1]).astype(complex)
    for _ in range(int(n_steps)):
        joint = U @ np.kron(rho, rho_E) @ U.conj().T
        rho = np.einsum("iaja->ij", joint.reshape(D, 2, D, 2))
    return rho
