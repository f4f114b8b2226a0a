"""Named desk-scale experiment presets."""

from __future__ import annotations

from .config import ExperimentConfig, parse_config
from .spin_models import PHASE_POINTS


def _atxy(phase: str, L):
    p = PHASE_POINTS[phase]
    return {"L": L, "variant": "atxy", "gamma": p["gamma"], "h1": p["h1"], "h2": p["h2"]}


def _base(name: str, chain: dict, t_end: float, **extra) -> dict:
    cfg = {
        "name": name,
        "chain": chain,
        "noise": {"kind": "lrqi", "doors": [[1, 1]], "k": 1.0, "beta_E_B": 10.0},
        "beta_S_J": 20.0,
        "dt": 0.01,
        "t_end": t_end,
        "stride": 1,
        "pairs": "all-nearest-neighbor",
        "output_dir": f"runs/{name}",
    }
    cfg.update(extra)
    return cfg


def _fig3(name: str, phase: str, extended: bool) -> dict:
    sizes = list(range(6, 12)) if extended else [6, 7, 8]
    # the last pair of an L = 11 chain unfreezes near t = 6 in the PM phases
    t_end = 8.0 if extended else 6.0
    return _base(
        name, _atxy(phase, sizes), t_end, correlations=True,
        positivity_every=10 if extended else 1,
    )


def _preset_dicts(extended: bool) -> dict[str, dict]:
    return {
        "fig2a": _base("fig2a", _atxy("PM-II", 8), 20.0),
        "fig2b": _base(
            "fig2b", _atxy("PM-II", 8), 20.0,
            noise={"kind": "dephasing", "doors": [[1, 1]], "s": 1.0, "omega_c": 1.0},
        ),
        "fig2c": _base("fig2c", {"L": 8, "variant": "txxz", "gamma": 0.0, "delta": 1.5, "h1": 0.1}, 20.0),
        "fig3a": _fig3("fig3a", "PM-I", extended),
        "fig3b": _fig3("fig3b", "PM-II", extended),
        "fig3c": _fig3("fig3c", "AFM", extended),
        "fig4": _base(
            "fig4", _atxy("PM-II", 8), 10.0,
            disorder={"target": "h2", "mean": 1.2, "std": 0.3, "realizations": 50},
            base_seed=2018,
        ),
        "fig5": _base(
            "fig5", _atxy("PM-I", 11), 8.0,
            noise={"kind": "lrqi", "door_counts": list(range(1, 11)), "k": 1.0, "beta_E_B": 10.0},
            pairs=[[10, 11]],
            positivity_every=10,
        ),
    }


PRESET_NAMES = ("fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4", "fig5")


class UnknownPresetError(KeyError):
    def __str__(self):
        return f"unknown preset {self.args[0]!r}; available: {', '.join(PRESET_NAMES)}"


def preset_dict(name: str, *, extended: bool = False) -> dict:
    presets = _preset_dicts(extended)
    if name not in presets:
        raise UnknownPresetError(name)
    return presets[name]


def preset_experiment(name: str, *, extended: bool = False) -> ExperimentConfig:
    """Fully populated configuration for a named preset.

    ``extended`` widens the fig3 size sweep from L = 6..8 to L = 6..11.
    """
    return parse_config(preset_dict(name, extended=extended))
