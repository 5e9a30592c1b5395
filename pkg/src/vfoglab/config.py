"""Run configuration: one JSON document with a section per pipeline stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from . import scenarios
from .fogsim import CostParams, FogNetwork, ObstacleRegion, SimConfig
from .models import CostModelConfig, FogModelConfig
from .nncore import TrainConfig
from .traces import TraceGenConfig


def desk_fog_model():
    return FogModelConfig(train=TrainConfig(max_epochs=300, patience=30, lr=3e-3, batch_size=64))


def desk_cost_model():
    return CostModelConfig(train=TrainConfig(max_epochs=60, patience=10, lr=3e-3, batch_size=64))


@dataclass
class RoutingConfig:
    buffer_radius_m: float = 100.0
    cost_threshold: float = 0.9
    smooth: bool = True


@dataclass
class EvalConfig:
    knn_k_classify: int = 4
    knn_k_regress: int = 6
    bucket_s: int = 3600
    urban_polygons: list = field(default_factory=lambda: [list(scenarios.URBAN_POLYGON)])


@dataclass
class ObstacleExperimentConfig:
    traces: TraceGenConfig = field(default_factory=scenarios.obstacle_trace_config)
    fogs: list = field(default_factory=lambda: scenarios.obstacle_fog_network().to_list())
    cost: CostParams = field(default_factory=CostParams)
    obstacle: dict | None = field(default_factory=lambda: scenarios.tunnel_obstacle().to_dict())
    fog_model: FogModelConfig = field(default_factory=lambda: FogModelConfig(
        train=TrainConfig(max_epochs=400, patience=40, lr=3e-3, batch_size=64)))
    probe_step_m: float = 100.0
    probe_margin_m: float = 300.0
    # (lat_min, lon_min, lat_max, lon_max); None = obstacle bounding box
    probe_region: list | None = None
    probe_time: int | None = None

    @property
    def network(self):
        return FogNetwork.from_list(self.fogs)

    @property
    def obstacle_region(self):
        return ObstacleRegion.from_dict(self.obstacle) if self.obstacle else None


@dataclass
class TransitionExperimentConfig:
    traces: TraceGenConfig = field(default_factory=scenarios.transition_trace_config)
    separation_m: float = 2000.0
    radius_m: float = 5000.0
    speed_mps: float = 10.0
    sample_s: int = 1
    length_m: float = 1200.0
    fog_model: FogModelConfig = field(default_factory=lambda: FogModelConfig(
        train=TrainConfig(max_epochs=300, patience=30, lr=3e-3, batch_size=64)))


@dataclass
class RunConfig:
    seed: int = 0
    epoch_weekday: int = 0
    traces: TraceGenConfig = field(default_factory=scenarios.desk_trace_config)
    sim: SimConfig = field(default_factory=scenarios.desk_sim_config)
    fog_model: FogModelConfig = field(default_factory=desk_fog_model)
    cost_model: CostModelConfig = field(default_factory=desk_cost_model)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    obstacle_experiment: ObstacleExperimentConfig = field(default_factory=ObstacleExperimentConfig)
    transition_experiment: TransitionExperimentConfig = field(default_factory=TransitionExperimentConfig)

    def to_dict(self):
        return {
            "seed": self.seed,
            "epoch_weekday": self.epoch_weekday,
            "traces": self.traces.to_dict(),
            "sim": self.sim.to_dict(),
            "fog_model": self.fog_model.to_dict(),
            "cost_model": self.cost_model.to_dict(),
            "routing": asdict(self.routing),
            "eval": {**asdict(self.eval),
                     "urban_polygons": [[list(v) for v in poly] for poly in self.eval.urban_polygons]},
            "obstacle_experiment": _obstacle_to_dict(self.obstacle_experiment),
            "transition_experiment": _transition_to_dict(self.transition_experiment),
        }

    @classmethod
    def from_dict(cls, data):
        cfg = cls()
        if "seed" in data:
            cfg.seed = int(data["seed"])
        if "epoch_weekday" in data:
            cfg.epoch_weekday = int(data["epoch_weekday"])
        if "traces" in data:
            cfg.traces = TraceGenConfig.from_dict({**cfg.traces.to_dict(), **data["traces"]})
        if "sim" in data:
            cfg.sim = SimConfig.from_dict({**cfg.sim.to_dict(), **data["sim"]})
        if "fog_model" in data:
            cfg.fog_model = FogModelConfig.from_dict(_merge(cfg.fog_model.to_dict(), data["fog_model"]))
        if "cost_model" in data:
            cfg.cost_model = CostModelConfig.from_dict(_merge(cfg.cost_model.to_dict(), data["cost_model"]))
        if "routing" in data:
            cfg.routing = RoutingConfig(**{**asdict(cfg.routing), **data["routing"]})
        if "eval" in data:
            cfg.eval = EvalConfig(**{**asdict(cfg.eval), **data["eval"]})
        if "obstacle_experiment" in data:
            cfg.obstacle_experiment = _obstacle_from_dict(
                _merge(_obstacle_to_dict(cfg.obstacle_experiment), data["obstacle_experiment"]))
        if "transition_experiment" in data:
            cfg.transition_experiment = _transition_from_dict(
                _merge(_transition_to_dict(cfg.transition_experiment), data["transition_experiment"]))
        for m in (cfg.fog_model, cfg.cost_model):
            m.epoch_weekday = cfg.epoch_weekday
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _obstacle_to_dict(c):
    return {"traces": c.traces.to_dict(), "fogs": c.fogs, "cost": c.cost.to_dict(), "obstacle": c.obstacle,
            "fog_model": c.fog_model.to_dict(), "probe_step_m": c.probe_step_m,
            "probe_margin_m": c.probe_margin_m, "probe_region": c.probe_region, "probe_time": c.probe_time}


def _obstacle_from_dict(d):
    return ObstacleExperimentConfig(
        TraceGenConfig.from_dict(d["traces"]), d["fogs"], CostParams(**d["cost"]), d["obstacle"],
        FogModelConfig.from_dict(d["fog_model"]), d["probe_step_m"], d["probe_margin_m"],
        d["probe_region"], d["probe_time"])


def _transition_to_dict(c):
    return {"traces": c.traces.to_dict(), "separation_m": c.separation_m, "radius_m": c.radius_m,
            "speed_mps": c.speed_mps, "sample_s": c.sample_s, "length_m": c.length_m,
            "fog_model": c.fog_model.to_dict()}


def _transition_from_dict(d):
    return TransitionExperimentConfig(
        TraceGenConfig.from_dict(d["traces"]), d["separation_m"], d["radius_m"], d["speed_mps"],
        d["sample_s"], d["length_m"], FogModelConfig.from_dict(d["fog_model"]))
