"""Thermal initial states, RK4 integration of the master equation, and trajectories."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numba
import numpy as np

from .entanglement import logarithmic_negativity, reduced_two_qubit_state, two_site_correlation
from .errors import ContractViolation, NumericalIntegrityError, ParameterError, ShapeError
from .open_system import NoiseSpec, liouvillian
from .pauli import OperatorSum
from .spin_models import ChainSpec, build_hamiltonian


HERM_TOL = 1e-10
TRACE_TOL = 1e-8
EIG_TOL = 1e-7

Pair = tuple[int, int]
Rhs = Callable[[np.ndarray, float], np.ndarray]


def positivity_certified(rho: np.ndarray, tol: float = EIG_TOL) -> bool:
    """True if rho + tol*I admits a Cholesky factorization, i.e. min eigenvalue > -tol."""
    try:
        np.linalg.cholesky(rho + tol * np.eye(rho.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])


def check_state(rho: np.ndarray, *, time: float | None = None, eigenvalues: bool | str = True) -> dict:
    """Verify the density-matrix invariants; return the measured drifts.

    ``eigenvalues`` is True (full spectrum), ``"certify"`` (Cholesky test of
    rho + 1e-7 I, spectrum only on failure) or False.
    """
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = complex(np.trace(rho))
    diag = {"hermiticity": herm, "trace_error": abs(tr - 1.0)}
    if herm > HERM_TOL:
        raise NumericalIntegrityError(f"Hermiticity drift {herm:.3e}", time=time, diagnostics=diag)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalIntegrityError(f"trace drifted to {tr.real:.12g}", time=time, diagnostics=diag)
    if eigenvalues == "certify":
        diag["positivity_certified"] = positivity_certified(rho)
        if not diag["positivity_certified"]:
            diag["min_eigenvalue"] = min_eigenvalue(rho)
    elif eigenvalues:
        diag["min_eigenvalue"] = min_eigenvalue(rho)
    if diag.get("min_eigenvalue", 0.0) < -EIG_TOL:
        raise NumericalIntegrityError(
            f"negative eigenvalue {diag['min_eigenvalue']:.3e}", time=time, diagnostics=diag
        )
    return diag


@numba.njit(cache=True, nogil=True)
def _hermitize_inplace(a):
    n = a.shape[0]
    T = 32
    drift = 0.0
    for bi in range(0, n, T):
        for bj in range(bi, n, T):
            for i in range(bi, min(bi + T, n)):
                for j in range(max(bj, i), min(bj + T, n)):
                    x = a[i, j]
                    y = a[j, i].conjugate()
                    d = abs(x - y)
                    if d > drift:
                        drift = d
                    m = 0.5 * (x + y)
                    a[i, j] = m
                    a[j, i] = m.conjugate()
    return drift


def hermitize(rho: np.ndarray) -> tuple[np.ndarray, float]:
    """In-place (rho + rho^dagger)/2; also returns max |rho - rho^dagger| before the fix."""
    rho = np.ascontiguousarray(rho, dtype=complex)
    return rho, float(_hermitize_inplace(rho))


def thermal_state(H: OperatorSum, beta_S_J: float) -> np.ndarray:
    """exp(-beta H) / tr exp(-beta H) by full eigendecomposition."""
    if beta_S_J < 0:
        raise ParameterError(f"inverse temperature must be >= 0, got {beta_S_J}")
    if not (H.hermitian or H.is_hermitian()):
        raise ContractViolation("thermal state needs a Hermitian Hamiltonian")
    D = H.dim
    if beta_S_J == 0:
        return np.eye(D, dtype=complex) / D
    E, V = np.linalg.eigh(H.to_dense())
    w = np.exp(-beta_S_J * (E - E[0]))
    w /= w.sum()
    rho = (V * w) @ V.conj().T
    rho, _ = hermitize(rho)
    return rho


def rk4_step(
    rho: np.ndarray, t: float, dt: float, rhs: Rhs, *, check: bool = True, stats: dict | None = None
) -> np.ndarray:
    """Classical RK4 with stages at t, t+dt/2, t+dt/2, t+dt; output re-Hermitized.

    Raises NumericalIntegrityError if the raw update drifts from Hermiticity or
    unit trace beyond tolerance.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    k = rhs(rho, t)
    acc = rho + (dt / 6.0) * k
    tmp = rho + (dt / 2.0) * k
    k = rhs(tmp, t + dt / 2.0)
    acc += (dt / 3.0) * k
    np.multiply(k, dt / 2.0, out=tmp)
    tmp += rho
    k = rhs(tmp, t + dt / 2.0)
    acc += (dt / 3.0) * k
    np.multiply(k, dt, out=tmp)
    tmp += rho
    k = rhs(tmp, t + dt)
    acc += (dt / 6.0) * k
    acc, drift = hermitize(acc)
    if stats is not None:
        stats["max_hermiticity_drift"] = max(stats.get("max_hermiticity_drift", 0.0), drift)
    if check:
        diag = {"hermiticity": drift}
        if drift > HERM_TOL:
            raise NumericalIntegrityError(f"Hermiticity drift {drift:.3e} in one step", time=t + dt, diagnostics=diag)
        tr = np.trace(acc).real
        if abs(tr - 1.0) > TRACE_TOL:
            diag["trace_error"] = abs(tr - 1.0)
            raise NumericalIntegrityError(f"trace drifted to {tr:.12g}", time=t + dt, diagnostics=diag)
    return acc


def master_equation_rhs(H: OperatorSum, noise: NoiseSpec) -> Rhs:
    def rhs(rho: np.ndarray, t: float) -> np.ndarray:
        return liouvillian(rho, t, H, noise, hermitian_input=True)

    return rhs


def nearest_neighbor_pairs(L: int) -> list[Pair]:
    return [(i, i + 1) for i in range(1, L)]


@dataclass
class Trajectory:
    """Sampled observables of one run. Times are in units of hbar/J."""

    times: np.ndarray
    pair_ln: dict[Pair, np.ndarray]
    correlations: dict[Pair, np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = len(self.times)
        self.pair_ln = {tuple(map(int, k)): np.asarray(v, dtype=float) for k, v in self.pair_ln.items()}
        for k, v in self.pair_ln.items():
            if len(v) != n:
                raise ShapeError(f"series for pair {k} has {len(v)} samples, time grid has {n}")
            if np.any(v < 0):
                raise ContractViolation(f"negative logarithmic negativity for pair {k}")
        if self.correlations is not None:
            self.correlations = {tuple(map(int, k)): np.asarray(v, dtype=float) for k, v in self.correlations.items()}
            for k, v in self.correlations.items():
                if len(v) != n:
                    raise ShapeError(f"correlation series for pair {k} has wrong length")

    @property
    def pairs(self) -> list[Pair]:
        return sorted(self.pair_ln)

    def select(self, pairs: Iterable[Pair]) -> "Trajectory":
        pairs = [tuple(p) for p in pairs]
        corr = None if self.correlations is None else {p: self.correlations[p] for p in pairs if p in self.correlations}
        return Trajectory(self.times.copy(), {p: self.pair_ln[p].copy() for p in pairs}, corr, dict(self.metadata))

    # -- serialization ---------------------------------------------------------

    def csv_rows(self) -> list[list[str]]:
        rows = []
        for p in self.pairs:
            for t, v in zip(self.times, self.pair_ln[p]):
                rows.append([f"{t:.17g}", str(p[0]), str(p[1]), f"{v:.17g}"])
        return rows

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "pair_i", "pair_j", "ln_value"])
            w.writerows(self.csv_rows())

    @classmethod
    def from_csv(cls, path: str | Path, metadata: dict | None = None) -> "Trajectory":
        series: dict[Pair, list[tuple[float, float]]] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (int(row["pair_i"]), int(row["pair_j"]))
                series.setdefault(key, []).append((float(row["t"]), float(row["ln_value"])))
        if not series:
            raise ShapeError(f"{path} holds no samples")
        times = None
        pair_ln = {}
        for k, pts in series.items():
            ts = np.array([p[0] for p in pts])
            if times is None:
                times = ts
            elif not np.array_equal(times, ts):
                raise ShapeError(f"pair {k} sampled on a different grid in {path}")
            pair_ln[k] = np.array([p[1] for p in pts])
        return cls(times, pair_ln, None, dict(metadata or {}))

    def to_json_dict(self) -> dict:
        def enc(d):
            return None if d is None else {f"{i},{j}": [float(x) for x in v] for (i, j), v in sorted(d.items())}

        return {
            "metadata": self.metadata,
            "times": [float(t) for t in self.times],
            "pair_ln": enc(self.pair_ln),
            "correlations": enc(self.correlations),
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1, default=_json_default))

    @classmethod
    def from_json(cls, path: str | Path) -> "Trajectory":
        d = json.loads(Path(path).read_text())

        def dec(x):
            if x is None:
                return None
            return {tuple(int(s) for s in k.split(",")): np.array(v) for k, v in x.items()}

        return cls(np.array(d["times"]), dec(d["pair_ln"]), dec(d.get("correlations")), d.get("metadata", {}))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _record(rho, pairs, corr_pairs, ln_out, corr_out, col):
    for p in pairs:
        sigma = reduced_two_qubit_state(rho, *p)
        ln_out[p][col] = logarithmic_negativity(sigma, validate=False)
        if corr_out is not None and p in corr_out:
            corr_out[p][col] = two_site_correlation(sigma)
    if corr_out is not None:
        for p in corr_pairs:
            if p not in ln_out:
                corr_out[p][col] = two_site_correlation(reduced_two_qubit_state(rho, *p))


def evolve_trajectory(
    spec: ChainSpec,
    noise: NoiseSpec,
    beta_S_J: float,
    dt: float,
    t_end: float,
    stride: int = 1,
    pairs: Sequence[Pair] | None = None,
    *,
    correlations: bool | Sequence[Pair] = False,
    positivity_every: int = 1,
    seed: int | None = None,
    extra_metadata: dict | None = None,
    hamiltonian: OperatorSum | None = None,
    stop_when_unfrozen: float | None = None,
) -> Trajectory:
    """Evolve the thermal state of ``spec`` under ``noise`` and record pair observables.

    LN is recorded every ``stride`` steps (t = 0 always included). Trace and
    Hermiticity are checked every step. Positivity (min eigenvalue >= -1e-7) is
    certified at every ``positivity_every``-th recorded sample; the full
    spectrum is computed at the first and last samples. ``correlations`` may be True (use
    ``pairs``) or an explicit list of pairs for C_ij.

    ``stop_when_unfrozen=delta`` ends the run at the first recorded sample at
    which every pair with nonzero initial LN has left the band LN(0) +- delta.
    """
    if not t_end > 0:
        raise ParameterError(f"t_end must be > 0, got {t_end}")
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if stride < 1 or positivity_every < 1:
        raise ParameterError("stride and positivity_every must be >= 1")
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ParameterError(f"t_end = {t_end} is not a multiple of dt = {dt}")
    L = spec.L
    noise.check_register(L)
    pairs = [tuple(p) for p in (pairs if pairs is not None else nearest_neighbor_pairs(L))]
    for i, j in pairs:
        if not 1 <= i < j <= L:
            raise ParameterError(f"invalid pair ({i}, {j}) for L = {L}")
    if correlations is True:
        corr_pairs = list(pairs)
    elif correlations:
        corr_pairs = [tuple(p) for p in correlations]
    else:
        corr_pairs = []

    H = hamiltonian if hamiltonian is not None else build_hamiltonian(spec)
    rho = thermal_state(H, beta_S_J)
    rhs = master_equation_rhs(H, noise)

    record_steps = list(range(0, n_steps + 1, stride))
    # rounded so that grid times print as the decimal step counts they represent
    times = np.round(np.array(record_steps, dtype=float) * dt, 12)
    ln = {p: np.empty(len(times)) for p in pairs}
    corr = {p: np.empty(len(times)) for p in corr_pairs} if corr_pairs else None

    stats = {
        "max_trace_error": 0.0,
        "max_hermiticity_drift": 0.0,
        "positivity_checks": 0,
        "min_eigenvalue_sampled": math.inf,
    }
    last_col = len(times) - 1

    def sample(col: int, t: float):
        if col in (0, last_col):
            mode: bool | str = True
        elif col % positivity_every == 0:
            mode = "certify"
        else:
            mode = False
        diag = check_state(rho, time=t, eigenvalues=mode)
        stats["max_trace_error"] = max(stats["max_trace_error"], diag["trace_error"])
        stats["positivity_checks"] += mode is not False
        if "min_eigenvalue" in diag:
            stats["min_eigenvalue_sampled"] = min(stats["min_eigenvalue_sampled"], diag["min_eigenvalue"])
        _record(rho, pairs, corr_pairs, ln, corr, col)

    sample(0, 0.0)
    watch = {p for p in pairs if ln[p][0] > 1e-9} if stop_when_unfrozen is not None else set()
    col = 1
    for step in range(1, n_steps + 1):
        t0 = (step - 1) * dt
        rho = rk4_step(rho, t0, dt, rhs, stats=stats)
        if step % stride == 0:
            sample(col, step * dt)
            col += 1
            if watch:
                watch = {p for p in watch if abs(ln[p][col - 1] - ln[p][0]) <= stop_when_unfrozen}
                if not watch:
                    break
    if col < len(times):
        times = times[:col]
        ln = {p: v[:col] for p, v in ln.items()}
        if corr is not None:
            corr = {p: v[:col] for p, v in corr.items()}
        final = check_state(rho, time=float(times[-1]), eigenvalues=True)
        stats["min_eigenvalue_sampled"] = min(stats["min_eigenvalue_sampled"], final["min_eigenvalue"])

    metadata = {
        "chain": spec.to_dict(),
        "noise": noise.to_dict(),
        "beta_S_J": beta_S_J,
        "dt": dt,
        "t_end": t_end,
        "t_stop": float(times[-1]),
        "stride": stride,
        "seed": seed,
        "integrity": stats,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    return Trajectory(times, ln, corr, metadata)
