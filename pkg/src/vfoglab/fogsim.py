"""Fog network simulator.

Vehicles stay associated with the nearest in-range fog (zero hysteresis),
each trace point produces one service event, and the event cost grows with
vehicle/fog distance and the fog's instantaneous load. Obstacle regions
force null coverage.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geo

NO_COVERAGE = -1

REGION_TAGS = ("urban", "suburban")

RECORD_FIELDS = ("vehicle_id", "t", "vlat", "vlon", "fog_id", "flat", "flon", "dist_m", "cost_ms", "no_coverage")


@dataclass(frozen=True)
class FogNode:
    fog_id: int
    lat: float
    lon: float
    coverage_radius_m: float
    base_cost_ms: float = 10.0
    region_tag: str = "urban"

    def __post_init__(self):
        if self.coverage_radius_m <= 0:
            raise ValueError(f"fog {self.fog_id}: coverage radius must be positive")
        if self.base_cost_ms < 0:
            raise ValueError(f"fog {self.fog_id}: negative base cost")
        if self.region_tag not in REGION_TAGS:
            raise ValueError(f"fog {self.fog_id}: unknown region tag {self.region_tag!r}")


class FogNetwork:
    """Static set of fog sites labelled 0..F-1."""

    def __init__(self, nodes):
        nodes = sorted(nodes, key=lambda n: n.fog_id)
        if not nodes:
            raise ValueError("fog network is empty")
        if [n.fog_id for n in nodes] != list(range(len(nodes))):
            raise ValueError("fog ids must be unique and contiguous from 0")
        self.nodes = tuple(nodes)
        self.lats = np.array([n.lat for n in nodes])
        self.lons = np.array([n.lon for n in nodes])
        self.radii = np.array([n.coverage_radius_m for n in nodes])
        self.base_costs = np.array([n.base_cost_ms for n in nodes])

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, fog_id):
        return self.nodes[fog_id]

    def to_list(self):
        return [asdict(n) for n in self.nodes]

    @classmethod
    def from_list(cls, items):
        return cls([FogNode(**d) for d in items])


@dataclass
class CostParams:
    k_distance: float = 0.02     # ms per meter
    k_load: float = 1.0          # multiplies load_fraction * base_cost
    sigma_ms: float = 1.0
    capacity: int = 10           # vehicles at which load_fraction reaches 1
    min_cost_ms: float = 0.1

    def to_dict(self):
        return asdict(self)


@dataclass
class ObstacleRegion:
    """Null-coverage patch; `active_interval` = (t_start, t_end) inclusive or None."""

    vertices: list
    active_interval: tuple | None = None
    polygon: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = [tuple(map(float, v)) for v in self.vertices]
        self.polygon = geo.make_polygon(self.vertices)
        if self.active_interval is not None:
            a, b = self.active_interval
            if b < a:
                raise ValueError("obstacle interval ends before it starts")
            self.active_interval = (a, b)

    @classmethod
    def rectangle(cls, lat_min, lon_min, lat_max, lon_max, active_interval=None):
        return cls(geo.rectangle(lat_min, lon_min, lat_max, lon_max), active_interval)

    def covers(self, lat, lon, t):
        inside = geo.contains([self.polygon], lat, lon)
        if self.active_interval is not None:
            t = np.atleast_1d(np.asarray(t))
            inside &= (t >= self.active_interval[0]) & (t <= self.active_interval[1])
        return inside

    def to_dict(self):
        return {"vertices": [list(v) for v in self.vertices],
                "active_interval": list(self.active_interval) if self.active_interval else None}

    @classmethod
    def from_dict(cls, data):
        interval = data.get("active_interval")
        return cls(data["vertices"], tuple(interval) if interval else None)


@dataclass
class InteractionRecord:
    vehicle_id: str
    t: int
    vlat: float
    vlon: float
    fog_id: int | None
    flat: float | None
    flon: float | None
    dist_m: float | None
    cost_ms: float | None
    no_coverage: bool

    def __post_init__(self):
        if self.no_coverage != (self.fog_id is None) or self.no_coverage != (self.cost_ms is None):
            raise ValueError("no_coverage must coincide with a missing fog and cost")

    def to_json(self):
        return json.dumps({k: getattr(self, k) for k in RECORD_FIELDS})

    @classmethod
    def from_json(cls, line):
        data = json.loads(line)
        missing = [k for k in RECORD_FIELDS if k not in data]
        if missing:
            raise ValueError(f"record missing fields {missing}")
        return cls(**{k: data[k] for k in RECORD_FIELDS})


# ------------------------------------------------------------------ association


def nearest_fogs(lats, lons, network):
    """Vectorised nearest in-range fog. Returns (fog_ids, distance to nearest fog)."""
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    d = geo.haversine_m(lats[:, None], lons[:, None], network.lats[None, :], network.lons[None, :])
    idx = np.argmin(d, axis=1)  # first minimum -> smaller fog id on ties
    dist = d[np.arange(len(lats)), idx]
    ids = np.where(dist <= network.radii[idx], idx, NO_COVERAGE)
    return ids.astype(np.int64), dist


def nearest_fog(lat, lon, network):
    """Nearest fog id if within its coverage radius, else NO_COVERAGE."""
    ids, _ = nearest_fogs([lat], [lon], network)
    return int(ids[0])


def associate_trajectory(trajectory, network):
    """Serving fog per trace point under the distance handover rule."""
    ids, _ = nearest_fogs(trajectory.lats, trajectory.lons, network)
    return [int(i) for i in ids]


# ----------------------------------------------------------------------- costs


def service_cost(distance_m, load_fraction, rng=None, base_cost_ms=10.0, params=None):
    """Latency of one service request in milliseconds.

    ``base + k_d*distance + k_l*load*base + N(0, sigma^2)``, clamped below at
    ``params.min_cost_ms``. A noise draw is consumed whenever rng is given.
    """
    params = params or CostParams()
    if distance_m < 0:
        raise ValueError(f"negative distance {distance_m}")
    if not 0.0 <= load_fraction <= 1.0:
        raise ValueError(f"load_fraction {load_fraction} outside [0, 1]")
    cost = base_cost_ms + params.k_distance * distance_m + params.k_load * load_fraction * base_cost_ms
    if rng is not None:
        cost += rng.normal(0.0, params.sigma_ms)
    elif params.sigma_ms > 0:
        raise ValueError("rng required when sigma_ms > 0")
    return max(cost, params.min_cost_ms)


def mean_service_cost(distance_m, load_fraction, base_cost_ms=10.0, params=None):
    """Noise-free cost (the mean when the clamp is inactive)."""
    params = params or CostParams()
    return base_cost_ms + params.k_distance * distance_m + params.k_load * load_fraction * base_cost_ms


# ------------------------------------------------------------------ simulation


def simulate(trajectories, network, cost_params=None, obstacles=(), seed=0):
    """One InteractionRecord per trace point, ordered by vehicle then time.

    Load is reduced sequentially in time order: at timestamp t every vehicle
    reporting at t first updates its association, then costs are drawn for
    those events in vehicle order. A vehicle stops counting toward load after
    its last trace point.
    """
    params = cost_params or CostParams()
    if params.capacity <= 0:
        raise ValueError("capacity must be positive")
    if not trajectories:
        return []
    vids = [traj.vehicle_id for traj in trajectories]
    if len(set(vids)) != len(vids):
        raise ValueError("duplicate vehicle ids across trajectories")

    lengths = [len(traj) for traj in trajectories]
    veh = np.repeat(np.arange(len(trajectories)), lengths)
    ts = np.concatenate([traj.timestamps for traj in trajectories])
    lats = np.concatenate([traj.lats for traj in trajectories])
    lons = np.concatenate([traj.lons for traj in trajectories])
    last = np.zeros(len(ts), dtype=bool)
    last[np.cumsum(lengths) - 1] = True

    fog_ids, dists = nearest_fogs(lats, lons, network)
    blocked = np.zeros(len(ts), dtype=bool)
    for obs in obstacles:
        blocked |= obs.covers(lats, lons, ts)
    fog_ids[blocked] = NO_COVERAGE

    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, params.sigma_ms, size=len(ts)) if params.sigma_ms > 0 else np.zeros(len(ts))

    order = np.lexsort((veh, ts))
    costs = np.full(len(ts), np.nan)
    assigned = {}
    counts = np.zeros(len(network), dtype=np.int64)
    k = 0
    n = len(order)
    while k < n:
        j = k
        t = ts[order[k]]
        while j < n and ts[order[j]] == t:
            j += 1
        group = order[k:j]
        for e in group:
            prev = assigned.pop(veh[e], None)
            if prev is not None:
                counts[prev] -= 1
            if fog_ids[e] != NO_COVERAGE:
                assigned[veh[e]] = fog_ids[e]
                counts[fog_ids[e]] += 1
        for e in group:
            f = fog_ids[e]
            if f == NO_COVERAGE:
                continue
            load = min(1.0, counts[f] / params.capacity)
            base = network.base_costs[f]
            c = base + params.k_distance * dists[e] + params.k_load * load * base + noise[e]
            costs[e] = max(c, params.min_cost_ms)
        for e in group:
            if last[e]:
                prev = assigned.pop(veh[e], None)
                if prev is not None:
                    counts[prev] -= 1
        k = j

    records = []
    for e in range(len(ts)):
        f = int(fog_ids[e])
        vid = vids[veh[e]]
        if f == NO_COVERAGE:
            records.append(InteractionRecord(vid, int(ts[e]), float(lats[e]), float(lons[e]),
                                             None, None, None, None, None, True))
        else:
            records.append(InteractionRecord(vid, int(ts[e]), float(lats[e]), float(lons[e]), f,
                                             float(network.lats[f]), float(network.lons[f]),
                                             float(dists[e]), float(costs[e]), False))
    return records


# ------------------------------------------------------------------------- I/O


def write_records(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def read_records(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(InteractionRecord.from_json(line))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from None
    return out


@dataclass
class SimConfig:
    network: FogNetwork
    cost: CostParams = field(default_factory=CostParams)
    obstacles: list = field(default_factory=list)

    def to_dict(self):
        return {"fogs": self.network.to_list(), "cost": self.cost.to_dict(),
                "obstacles": [o.to_dict() for o in self.obstacles]}

    @classmethod
    def from_dict(cls, data):
        return cls(FogNetwork.from_list(data["fogs"]),
                   CostParams(**data.get("cost", {})),
                   [ObstacleRegion.from_dict(o) for o in data.get("obstacles", [])])

    @classmethod
    def from_json(cls, path):
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def coverage_fraction(records):
    if not records:
        return math.nan
    return sum(not r.no_coverage for r in records) / len(records)
