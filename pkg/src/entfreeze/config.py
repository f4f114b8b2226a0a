"""Experiment configuration: YAML documents validated with pydantic.

Unknown keys are rejected everywhere. See README.md for the schema.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import EntfreezeError
from .open_system import NoiseSpec
from .spin_models import ChainSpec, DisorderSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChainConfig(_Strict):
    L: Union[int, list[int]]
    variant: Literal["atxy", "txy", "txxz", "txyz", "heisenberg", "j1j2"] = "atxy"
    J: float = Field(1.0, gt=0)
    gamma: float = 0.0
    delta: float = 0.0
    h1: Union[float, list[float]] = 0.0
    h2: Union[float, list[float]] = 0.0
    boundary: Literal["open", "periodic"] = "open"
    j2: float = 0.0

    @field_validator("L")
    @classmethod
    def _sizes(cls, v):
        sizes = v if isinstance(v, list) else [v]
        if not sizes:
            raise ValueError("at least one chain length is required")
        bad = [n for n in sizes if n < 2]
        if bad:
            raise ValueError(f"chain lengths must be >= 2, got {bad}")
        if len(set(sizes)) != len(sizes):
            raise ValueError("chain lengths must be distinct")
        return v

    @property
    def sizes(self) -> list[int]:
        return list(self.L) if isinstance(self.L, list) else [self.L]

    def spec(self, L: int) -> ChainSpec:
        h1 = self.h1 if isinstance(self.h1, list) else [self.h1] * L
        h2 = self.h2 if isinstance(self.h2, list) else [self.h2] * L
        return ChainSpec(
            L=L, J=self.J, gamma=self.gamma, delta=self.delta, h1=tuple(h1), h2=tuple(h2),
            boundary=self.boundary, variant=self.variant, j2=self.j2,
        )


class NoiseConfig(_Strict):
    kind: Literal["lrqi", "dephasing", "none"] = "lrqi"
    doors: list[tuple[int, int]] = [(1, 1)]
    k: float = Field(1.0, gt=0)
    beta_E_B: float = 10.0
    omega_c: float = Field(1.0, gt=0)
    s: float = Field(1.0, gt=0, le=2)
    # sweep: for each n, doors are sites 1..n with multiplicity 1 (overrides `doors`)
    door_counts: Optional[list[int]] = None

    @field_validator("door_counts")
    @classmethod
    def _counts(cls, v):
        if v is not None and (not v or min(v) < 1):
            raise ValueError("door_counts must be a non-empty list of positive integers")
        return v

    def spec(self, door_count: int | None = None) -> NoiseSpec:
        doors = tuple((d, 1) for d in range(1, door_count + 1)) if door_count else tuple(self.doors)
        return NoiseSpec(self.kind, doors, self.k, self.beta_E_B, self.omega_c, self.s)


class DisorderConfig(_Strict):
    target: Literal["h1", "h2"]
    mean: float
    std: float = Field(ge=0)
    realizations: int = Field(ge=1)
    base_seed: Optional[int] = Field(None, ge=0, lt=2**64)

    def spec(self, fallback_seed: int) -> DisorderSpec:
        seed = self.base_seed if self.base_seed is not None else fallback_seed
        return DisorderSpec(self.target, self.mean, self.std, self.realizations, seed)


class AnalysisConfig(_Strict):
    delta: float = Field(1e-5, gt=0)
    t_l: Optional[float] = Field(None, gt=0)
    i_min: int = Field(5, ge=1)
    lr_velocity: Optional[float] = Field(None, gt=0)
    tolerance: Optional[float] = Field(None, gt=0)


class ExperimentConfig(_Strict):
    name: str = "experiment"
    chain: ChainConfig
    noise: NoiseConfig = NoiseConfig()
    beta_S_J: float = Field(20.0, ge=0)
    dt: float = Field(0.01, gt=0)
    t_end: float = Field(gt=0)
    stride: int = Field(1, ge=1)
    pairs: Union[Literal["all-nearest-neighbor"], list[tuple[int, int]]] = "all-nearest-neighbor"
    correlations: bool = False
    disorder: Optional[DisorderConfig] = None
    analysis: AnalysisConfig = AnalysisConfig()
    output_dir: str = "runs/experiment"
    base_seed: int = Field(0, ge=0, lt=2**64)
    max_jobs: Optional[int] = Field(None, ge=1)
    positivity_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = []
        sizes = self.chain.sizes
        for name in ("h1", "h2"):
            v = getattr(self.chain, name)
            if isinstance(v, list) and any(len(v) != n for n in sizes):
                problems.append(f"chain.{name}: per-site list has {len(v)} entries but L = {sizes}")
        if not problems:
            for n in sizes:
                try:
                    self.chain.spec(n)
                except EntfreezeError as exc:
                    problems.append(f"chain (L = {n}): {exc}")
        try:
            counts = self.noise.door_counts or [None]
            for c in counts:
                self.noise.spec(c)
        except EntfreezeError as exc:
            problems.append(f"noise: {exc}")
        max_door = max(self.noise.door_counts) if self.noise.door_counts else max((d for d, _ in self.noise.doors), default=0)
        if max_door > min(sizes):
            problems.append(f"noise.doors: door site {max_door} exceeds smallest L = {min(sizes)}")
        if isinstance(self.pairs, list):
            for i, j in self.pairs:
                if not (1 <= i < j <= min(sizes)):
                    problems.append(f"pairs: ({i}, {j}) invalid for L = {min(sizes)}")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            problems.append(f"t_end = {self.t_end} is not a whole number of steps dt = {self.dt}")
        if self.analysis.tolerance is not None and self.analysis.tolerance < self.stride * self.dt * (1 - 1e-9):
            problems.append("analysis.tolerance is below the sampling resolution stride*dt")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    # -- helpers ------------------------------------------------------------

    def pairs_for(self, L: int) -> list[tuple[int, int]]:
        if self.pairs == "all-nearest-neighbor":
            return [(i, i + 1) for i in range(1, L)]
        return [tuple(p) for p in self.pairs]

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


class ConfigError(EntfreezeError, ValueError):
    """Configuration failed validation; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        msg = err["msg"]
        out.append(f"{loc}: {msg}" if loc else msg)
    return out


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"YAML syntax: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["top level of the config must be a mapping"])
    return parse_config(data)
