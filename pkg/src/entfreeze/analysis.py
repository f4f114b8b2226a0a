"""Freezing terminals, parabolic fits, Lieb-Robinson estimates and disorder averages."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AnalysisInputError, ComparisonError, FitError, InfeasibleError, ParameterError
from .evolution import Pair, Trajectory

DEFAULT_DELTA = 1e-5
ZERO_LN = 1e-9


def freezing_terminal(
    times: Sequence[float], values: Sequence[float], delta: float = DEFAULT_DELTA, t_l: float | None = None
) -> float | None:
    """Last sampled time up to which |LN(t) - LN(0)| <= delta holds at every sample.

    Returns None when LN(0) is zero (freezing undefined) and 0.0 when the very
    first sample after t = 0 already violates the bound.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0 or values.size == 0:
        raise AnalysisInputError("empty series")
    if times.shape != values.shape:
        raise AnalysisInputError("times and values differ in length")
    if not delta > 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    if values[0] <= ZERO_LN:
        return None
    if t_l is not None:
        keep = times <= t_l * (1 + 1e-12) + 1e-12
        times, values = times[keep], values[keep]
    bad = np.flatnonzero(np.abs(values - values[0]) > delta)
    if bad.size == 0:
        return float(times[-1])
    first = bad[0]
    return float(times[first - 1]) if first > 0 else 0.0


@dataclass(frozen=True)
class PairFreeze:
    initial_ln: float
    tau_F: float | None
    frozen: bool


@dataclass
class FreezeReport:
    """Per-pair freezing terminals of one trajectory."""

    pairs: dict[Pair, PairFreeze]
    delta: float
    t_l: float
    resolution: float
    L: int | None = None
    doors: tuple[int, ...] = ()
    label: str = ""

    def tau(self, pair: Pair) -> float | None:
        return self.pairs[tuple(pair)].tau_F

    def nn_taus(self) -> dict[int, float | None]:
        return {i: pf.tau_F for (i, j), pf in sorted(self.pairs.items()) if j == i + 1}

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "L": self.L,
            "doors": list(self.doors),
            "delta": self.delta,
            "t_l": self.t_l,
            "resolution": self.resolution,
            "pairs": [
                {"i": i, "j": j, "initial_ln": pf.initial_ln, "tau_F": pf.tau_F, "frozen": pf.frozen}
                for (i, j), pf in sorted(self.pairs.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FreezeReport":
        pairs = {
            (p["i"], p["j"]): PairFreeze(p["initial_ln"], p["tau_F"], p["frozen"]) for p in d["pairs"]
        }
        return cls(pairs, d["delta"], d["t_l"], d["resolution"], d.get("L"), tuple(d.get("doors", ())), d.get("label", ""))


def freeze_report(
    traj: Trajectory, delta: float = DEFAULT_DELTA, t_l: float | None = None, *, L: int | None = None,
    doors: Iterable[int] | None = None, label: str = "",
) -> FreezeReport:
    times = traj.times
    if len(times) < 2:
        raise AnalysisInputError("trajectory needs at least two samples")
    t_l = float(times[-1]) if t_l is None else float(t_l)
    resolution = float(times[1] - times[0])
    meta = traj.metadata or {}
    if L is None:
        L = meta.get("chain", {}).get("L")
    if doors is None:
        doors = [d for d, _ in meta.get("noise", {}).get("doors", [])]
    pairs = {}
    for p, series in traj.pair_ln.items():
        tau = freezing_terminal(times, series, delta, t_l)
        frozen = tau is not None and tau >= resolution * (1 - 1e-9)
        pairs[p] = PairFreeze(float(series[0]), tau, bool(frozen))
    return FreezeReport(pairs, float(delta), t_l, resolution, L, tuple(int(d) for d in doors), label)


@dataclass(frozen=True)
class FreezeFit:
    """tau_F(i) = a i^2 + b i + c with OLS standard errors."""

    a: float
    b: float
    c: float
    se_a: float
    se_b: float
    se_c: float
    domain: tuple[int, ...]
    residuals: tuple[float, ...] = field(default=(), compare=False)

    def __call__(self, i):
        i = np.asarray(i, dtype=float)
        return self.a * i**2 + self.b * i + self.c

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain"] = list(self.domain)
        d["residuals"] = list(self.residuals)
        return d


def fit_quadratic(xs: Sequence[float], ys: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """OLS fit y = a x^2 + b x + c; returns (coef, standard errors, residuals)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(np.unique(x)) < 3:
        raise FitError(f"need at least 3 distinct abscissae, got {sorted(set(x.tolist()))}")
    X = np.column_stack([x**2, x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(x) - 3
    if dof > 0:
        s2 = float(resid @ resid) / dof
        se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    else:
        se = np.full(3, np.nan)
    return coef, se, resid


def fit_freeze_parabola(points: Iterable[tuple[int, float | None]], i_min: int = 5) -> FreezeFit:
    pts = sorted((int(i), float(t)) for i, t in points if i >= i_min and t is not None)
    if len({i for i, _ in pts}) < 3:
        raise FitError(f"need >= 3 distinct sites with i >= {i_min}, got {[i for i, _ in pts]}")
    coef, se, resid = fit_quadratic([i for i, _ in pts], [t for _, t in pts])
    return FreezeFit(*map(float, coef), *map(float, se), tuple(i for i, _ in pts), tuple(map(float, resid)))


def minimum_chain_length(tau_required: float, fit: FreezeFit) -> int:
    """Smallest L whose last pair (L-1, L) reaches tau_required on the fitted parabola."""
    a, b, c = fit.a, fit.b, fit.c
    if not a > 0:
        raise ParameterError(f"minimum chain length needs a convex fit (a > 0), got a = {a}")
    disc = b * b - 4 * a * (c - tau_required)
    if disc < 0:
        raise InfeasibleError(f"tau = {tau_required} is below the fitted minimum")
    i_m = (-b + math.sqrt(disc)) / (2 * a)
    if i_m < 2:
        i_m = 2.0
    # guard against i_m = 10 coming out as 10.000000000000002
    return int(math.ceil(i_m - 1e-9)) + 1


def lr_freezing_bound(i: int, v: float) -> float:
    """Lieb-Robinson estimate |i - 2| / v of the freezing terminal of pair (i, i+1)."""
    if not v > 0:
        raise ParameterError(f"Lieb-Robinson velocity must be > 0, got {v}")
    return abs(i - 2) / v


def _check_comparable(reports: Sequence[FreezeReport]) -> None:
    deltas = {r.delta for r in reports}
    res = {round(r.resolution, 12) for r in reports}
    if len(deltas) > 1:
        raise ComparisonError(f"reports use different delta: {sorted(deltas)}")
    if len(res) > 1:
        raise ComparisonError(f"reports use different sampling grids: {sorted(res)}")


def scale_invariance_report(
    reports: Mapping[int, FreezeReport], tolerance: float | None = None
) -> dict[Pair, str]:
    """Verdict per NN pair common to all sizes: invariant / non-invariant / undefined."""
    if len(reports) < 2:
        raise AnalysisInputError("need reports for at least two system sizes")
    reps = list(reports.values())
    _check_comparable(reps)
    resolution = reps[0].resolution
    if tolerance is None:
        tolerance = 2 * resolution
    if tolerance < resolution * (1 - 1e-9):
        raise ParameterError("tolerance must be at least one grid step")
    doors = set().union(*(r.doors for r in reps))
    common = set.intersection(*({p for p in r.pairs if p[1] == p[0] + 1} for r in reps))
    verdicts = {}
    for p in sorted(common):
        entries = [r.pairs[p] for r in reps]
        if p[0] in doors or p[1] in doors or any(e.tau_F is None for e in entries):
            verdicts[p] = "undefined"
            continue
        taus = [e.tau_F for e in entries]
        verdicts[p] = "invariant" if max(taus) - min(taus) <= tolerance + 1e-12 else "non-invariant"
    return verdicts


def quenched_average(trajectories: Sequence[Trajectory]) -> Trajectory:
    """Pointwise mean of the pair-LN series over disorder realizations."""
    if not trajectories:
        raise AnalysisInputError("no trajectories to average")
    ref = trajectories[0]
    for tr in trajectories[1:]:
        if len(tr.times) != len(ref.times) or not np.allclose(tr.times, ref.times, rtol=0, atol=1e-12):
            raise ComparisonError("trajectories are sampled on different time grids")
        if set(tr.pair_ln) != set(ref.pair_ln):
            raise ComparisonError("trajectories record different pairs")
    mean = {p: np.mean([tr.pair_ln[p] for tr in trajectories], axis=0) for p in ref.pair_ln}
    corr = None
    if all(tr.correlations for tr in trajectories):
        corr = {p: np.mean([tr.correlations[p] for tr in trajectories], axis=0) for p in ref.correlations}
    meta = {k: v for k, v in ref.metadata.items() if k not in ("chain", "seed", "realization")}
    meta["realizations"] = len(trajectories)
    meta["base_seed"] = ref.metadata.get("base_seed")
    return Trajectory(ref.times.copy(), mean, corr, meta)


def hierarchy_check(report: FreezeReport) -> tuple[bool, tuple[int, int] | None]:
    """tau_F^{i,i+1} non-decreasing in i over i = 2..L-1.

    Returns (ok, first violation (j, i) with j < i and tau_j > tau_i). A pair
    whose freezing is undefined (LN^0 = 0) counts as tau_F = 0.
    """
    taus = report.nn_taus()
    L = report.L if report.L is not None else (max(taus) + 1 if taus else 0)
    needed = list(range(2, L))
    missing = [i for i in needed if i not in taus]
    if not needed or missing:
        raise AnalysisInputError(f"report lacks nearest-neighbour pairs {missing or needed}")
    prev_i, prev = None, None
    for i in needed:
        t = taus[i] if taus[i] is not None else 0.0
        if prev is not None and t < prev:
            return False, (prev_i, i)
        prev_i, prev = i, t
    return True, None


# -- export -------------------------------------------------------------------


def write_tau_table(reports: Mapping[int, FreezeReport] | Sequence[FreezeReport], path: str | Path) -> None:
    reps = list(reports.values()) if isinstance(reports, Mapping) else list(reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "i", "tau_F", "frozen", "initial_ln"])
        for r in reps:
            for (i, j), pf in sorted(r.pairs.items()):
                if j != i + 1:
                    continue
                tau = "" if pf.tau_F is None else f"{pf.tau_F:.17g}"
                w.writerow([r.L, i, tau, int(pf.frozen), f"{pf.initial_ln:.17g}"])


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True))
