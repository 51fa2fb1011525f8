"""Run configuration: every tunable of a simulate/detect/evaluate run in one JSON file.

The file has one object per section; omitted keys keep their defaults and
unknown keys are rejected::

    {
      "master_seed": 0,
      "chirp":    {"f_min": 7000, "f_max": 17000, "duration": 0.01,
                   "sample_rate": 192000, "sound_speed": 1500},
      "affinity": {"alpha": 0.1, "beta": 1, "tau": 1, "body_size": 0.6,
                   "v_max": 2, "t_pri": 0.7, "value_bins": 16, "skip_threshold": 14},
      "scenario": {"n_pings": 20, "t_pri": 0.7, "segment_duration": 0.09, "sigma_n": 2,
                   "scr_db": -9, "valid_fraction": 1, "impulse_taps": 100, "additive": false},
      "detector": {"eta_mf": 5e-6, "eta_c": 20, "eta_h": 4.5, "eps": 1, "k_max": 10,
                   "n_bins": 100, "seed": 0},
      "clutter":  {"scatterer_rate": 250, "scatterer_scale": 1, "noise_power": 0.05},
      "evaluation": {"gate": 0.5},
      "grid":     {"scr_db": [-12, -9, -6], "valid_fraction": [1.0],
                   "affinity": [[0.1, 1, 1]], "eta_c": [20], "eta_h": [4.5],
                   "n_target": 300, "n_clutter": 1000}
    }
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace

from .errors import ParameterError
from .evaluate import GATE, SimulationSetup, SweepGrid
from .graphbuild import AffinityParams
from .pipeline import DetectorConfig
from .signalproc import ChirpSpec
from .simulate import ScenarioConfig


@dataclass(frozen=True)
class ClutterConfig:
    scatterer_rate: float = 250.0
    scatterer_scale: float = 1.0
    noise_power: float = 0.05


@dataclass(frozen=True)
class EvaluationConfig:
    gate: float = GATE


_DEFAULT_GRID = SweepGrid(scr_db=(-12.0, -9.0, -6.0))


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    chirp: ChirpSpec = ChirpSpec()
    affinity: AffinityParams = AffinityParams()
    scenario: ScenarioConfig = ScenarioConfig()
    detector: DetectorConfig = DetectorConfig()
    clutter: ClutterConfig = ClutterConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    grid: SweepGrid = field(default_factory=lambda: _DEFAULT_GRID)

    def __post_init__(self):
        if self.affinity.t_pri != self.scenario.t_pri:
            raise ParameterError("affinity.t_pri and scenario.t_pri must agree")

    @property
    def setup(self) -> SimulationSetup:
        return SimulationSetup(
            chirp=self.chirp,
            scenario=self.scenario,
            detector=self.detector,
            gate=self.evaluation.gate,
            clutter_rate=self.clutter.scatterer_rate,
            clutter_scale=self.clutter.scatterer_scale,
            clutter_noise_power=self.clutter.noise_power,
        )

    def to_dict(self) -> dict:
        out = {"master_seed": self.master_seed}
        for f in fields(self):
            if f.name != "master_seed":
                out[f.name] = dataclasses.asdict(getattr(self, f.name))
        out["grid"]["affinity"] = [list(a) for a in self.grid.affinity]
        for k in ("scr_db", "valid_fraction", "eta_c", "eta_h"):
            out["grid"][k] = list(out["grid"][k])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ParameterError("config must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        kwargs = {}
        for name, value in d.items():
            if name == "master_seed":
                kwargs[name] = int(value)
                continue
            if not isinstance(value, dict):
                raise ParameterError(f"config section {name!r} must be an object")
            current = getattr(base, name)
            allowed = {f.name for f in fields(current)}
            bad = set(value) - allowed
            if bad:
                raise ParameterError(f"unknown keys in {name!r}: {sorted(bad)}")
            try:
                if name == "grid":
                    kwargs[name] = SweepGrid.from_dict({**current.to_dict(), **value})
                else:
                    kwargs[name] = replace(current, **value)
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"bad value in {name!r}: {exc}") from exc
        if "affinity" in kwargs and "scenario" not in kwargs:
            kwargs["scenario"] = replace(base.scenario, t_pri=kwargs["affinity"].t_pri)
        elif "scenario" in kwargs and "affinity" not in kwargs:
            kwargs["affinity"] = replace(base.affinity, t_pri=kwargs["scenario"].t_pri)
        return cls(**kwargs)


def load_config(path) -> RunConfig:
    from .io import read_json

    return RunConfig.from_dict(read_json(path))


def save_config(path, config: RunConfig) -> None:
    from .io import write_json

    write_json(path, config.to_dict())
