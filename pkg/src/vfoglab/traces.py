"""Mobility traces: CSV ingestion and a seeded synthetic grid generator.

Trace CSV layout (UTF-8, LF, header required)::

    vehicle_id,timestamp_s,lat,lon,occupied

Occupied taxis report every second, free ones every 15 seconds; the
generator reproduces that sampling with a two-state occupancy chain.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import geo

CSV_HEADER = ["vehicle_id", "timestamp_s", "lat", "lon", "occupied"]


class TraceFormatError(ValueError):
    """Raised for malformed trace rows; carries the 1-based line number."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TracePoint:
    vehicle_id: str
    timestamp: int
    lat: float
    lon: float
    occupied: bool

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"position out of range: ({self.lat}, {self.lon})")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class Trajectory:
    vehicle_id: str
    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("trajectory must be non-empty")
        for a, b in zip(pts, pts[1:]):
            if b.timestamp <= a.timestamp:
                raise ValueError(f"{self.vehicle_id}: timestamps not strictly increasing")
        if any(p.vehicle_id != self.vehicle_id for p in pts):
            raise ValueError(f"{self.vehicle_id}: mixed vehicle ids")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def lats(self):
        return np.array([p.lat for p in self.points])

    @property
    def lons(self):
        return np.array([p.lon for p in self.points])

    @property
    def timestamps(self):
        return np.array([p.timestamp for p in self.points], dtype=np.int64)


# --------------------------------------------------------------------------- I/O


def _open_text(source, mode):
    if isinstance(source, (str, os.PathLike)):
        if not str(source):
            raise ValueError("empty path")
        return open(source, mode, encoding="utf-8", newline=""), True
    return source, False


def parse_traces(source):
    """Read a trace CSV into trajectories.

    Trajectories keep the order in which vehicles first appear; points are
    time-sorted and a repeated (vehicle, timestamp) keeps the last row.
    """
    fh, owned = _open_text(source, "r")
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [h.strip() for h in header] != CSV_HEADER:
            raise TraceFormatError(1, f"expected header {','.join(CSV_HEADER)}")
        rows = {}
        order = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            point = _parse_row(row, line)
            if point.vehicle_id not in rows:
                rows[point.vehicle_id] = {}
                order.append(point.vehicle_id)
            rows[point.vehicle_id][point.timestamp] = point
    finally:
        if owned:
            fh.close()
    return [
        Trajectory(vid, tuple(rows[vid][t] for t in sorted(rows[vid])))
        for vid in order
    ]


def _parse_row(row, line):
    if len(row) != len(CSV_HEADER):
        raise TraceFormatError(line, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
    vid, ts, lat, lon, occ = (c.strip() for c in row)
    if not vid:
        raise TraceFormatError(line, "empty vehicle_id")
    try:
        ts_i = int(ts)
        lat_f = float(lat)
        lon_f = float(lon)
    except ValueError as exc:
        raise TraceFormatError(line, str(exc)) from None
    if occ not in ("0", "1"):
        raise TraceFormatError(line, f"occupied must be 0 or 1, got {occ!r}")
    if not (math.isfinite(lat_f) and math.isfinite(lon_f)):
        raise TraceFormatError(line, "non-finite coordinate")
    try:
        return TracePoint(vid, ts_i, lat_f, lon_f, occ == "1")
    except ValueError as exc:
        raise TraceFormatError(line, str(exc)) from None


def write_traces(trajectories, dest):
    fh, owned = _open_text(dest, "w")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for traj in trajectories:
            for p in traj.points:
                writer.writerow([p.vehicle_id, p.timestamp, repr(p.lat), repr(p.lon), int(p.occupied)])
    finally:
        if owned:
            fh.close()


def traces_to_csv(trajectories):
    buf = io.StringIO()
    write_traces(trajectories, buf)
    return buf.getvalue()


def normalize_epoch(trajectories):
    """Shift all timestamps so the earliest point of the dataset sits at t=0."""
    if not trajectories:
        return []
    t0 = min(traj.points[0].timestamp for traj in trajectories)
    return [
        Trajectory(traj.vehicle_id, tuple(replace(p, timestamp=p.timestamp - t0) for p in traj.points))
        for traj in trajectories
    ]


# --------------------------------------------------------------------- generator


@dataclass
class TraceGenConfig:
    lat_min: float = 31.10
    lat_max: float = 31.20
    lon_min: float = 121.40
    lon_max: float = 121.52
    grid_spacing_m: float = 250.0
    n_vehicles: int = 20
    duration_s: int = 28_800
    # active span per vehicle, placed uniformly inside the duration; None = whole duration
    shift_s: int | None = None
    mean_speed_mps: float = 10.0
    speed_sd_mps: float = 2.0
    max_speed_mps: float = 16.0
    min_speed_mps: float = 2.0
    urban_polygon: list | None = None
    urban_bias: float = 0.5
    p_occupied_to_free: float = 0.002
    p_free_to_occupied: float = 0.004
    p_initial_occupied: float = 0.5
    occupied_interval_s: int = 1
    free_interval_s: int = 15

    def validate(self):
        if self.n_vehicles <= 0:
            raise ValueError("n_vehicles must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("empty map bounds")
        if self.grid_spacing_m <= 0:
            raise ValueError("grid_spacing_m must be positive")
        if not 0 < self.min_speed_mps <= self.max_speed_mps:
            raise ValueError("speed bounds invalid")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("urban_polygon") is not None:
            data["urban_polygon"] = [tuple(v) for v in data["urban_polygon"]]
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class _RoadGrid:
    lats: np.ndarray
    lons: np.ndarray
    urban_nodes: list = field(default_factory=list)

    @classmethod
    def build(cls, cfg):
        lat_c = 0.5 * (cfg.lat_min + cfg.lat_max)
        m_lat, m_lon = geo.meters_per_degree(lat_c)
        lats = np.arange(cfg.lat_min, cfg.lat_max + 1e-12, cfg.grid_spacing_m / m_lat)
        lons = np.arange(cfg.lon_min, cfg.lon_max + 1e-12, cfg.grid_spacing_m / m_lon)
        grid = cls(lats, lons)
        if cfg.urban_polygon:
            poly = geo.make_polygon(cfg.urban_polygon)
            ii, jj = np.meshgrid(np.arange(len(lats)), np.arange(len(lons)), indexing="ij")
            inside = geo.contains([poly], lats[ii.ravel()], lons[jj.ravel()])
            grid.urban_nodes = [(int(i), int(j)) for i, j, k in zip(ii.ravel(), jj.ravel(), inside) if k]
        return grid


def _segment_length(lat_a, lon_a, lat_b, lon_b):
    # grid legs run along a meridian or a parallel; arc length along the leg
    if lon_a == lon_b:
        return geo.EARTH_RADIUS_M * abs(math.radians(lat_b - lat_a))
    return geo.EARTH_RADIUS_M * math.cos(math.radians(lat_a)) * abs(math.radians(lon_b - lon_a))


class _Driver:
    """Moves one vehicle along Manhattan routes between random intersections."""

    def __init__(self, grid, cfg, rng):
        self.grid = grid
        self.cfg = cfg
        self.rng = rng
        self.node = (int(rng.integers(len(grid.lats))), int(rng.integers(len(grid.lons))))
        self.lat = float(grid.lats[self.node[0]])
        self.lon = float(grid.lons[self.node[1]])
        self.legs = []
        self.speed = cfg.mean_speed_mps

    def _pick_destination(self):
        g = self.grid
        while True:
            if g.urban_nodes and self.rng.random() < self.cfg.urban_bias:
                dest = g.urban_nodes[int(self.rng.integers(len(g.urban_nodes)))]
            else:
                dest = (int(self.rng.integers(len(g.lats))), int(self.rng.integers(len(g.lons))))
            if dest != self.node or (len(g.lats) == 1 and len(g.lons) == 1):
                return dest

    def _new_trip(self):
        dest = self._pick_destination()
        i0, j0 = self.node
        i1, j1 = dest
        corner = (i1, j0) if self.rng.random() < 0.5 else (i0, j1)
        self.legs = [n for n in (corner, dest) if n != self.node]
        self.speed = float(np.clip(
            self.rng.normal(self.cfg.mean_speed_mps, self.cfg.speed_sd_mps),
            self.cfg.min_speed_mps, self.cfg.max_speed_mps,
        ))
        self.dest = dest

    def advance(self, dt):
        remaining = float(dt)
        while remaining > 0.0:
            if not self.legs:
                self._new_trip()
                if not self.legs:
                    return
            tgt = self.legs[0]
            t_lat = float(self.grid.lats[tgt[0]])
            t_lon = float(self.grid.lons[tgt[1]])
            length = _segment_length(self.lat, self.lon, t_lat, t_lon)
            need = length / self.speed
            if need <= remaining:
                self.lat, self.lon = t_lat, t_lon
                self.node = tgt
                self.legs.pop(0)
                remaining -= need
            else:
                frac = remaining * self.speed / length
                self.lat += frac * (t_lat - self.lat)
                self.lon += frac * (t_lon - self.lon)
                remaining = 0.0


def synthesize_traces(gen_config, seed):
    """Generate one trajectory per vehicle, deterministic in (config, seed)."""
    cfg = gen_config
    cfg.validate()
    grid = _RoadGrid.build(cfg)
    children = np.random.SeedSequence(seed).spawn(cfg.n_vehicles)
    out = []
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        vid = f"v{k:03d}"
        if cfg.shift_s is None or cfg.shift_s >= cfg.duration_s:
            start, end = 0, cfg.duration_s
        else:
            start = int(rng.integers(0, cfg.duration_s - cfg.shift_s + 1))
            end = start + cfg.shift_s
        driver = _Driver(grid, cfg, rng)
        occupied = bool(rng.random() < cfg.p_initial_occupied)
        t = start
        points = []
        while t <= end:
            points.append(TracePoint(vid, t, driver.lat, driver.lon, occupied))
            flip = cfg.p_occupied_to_free if occupied else cfg.p_free_to_occupied
            if rng.random() < flip:
                occupied = not occupied
            dt = cfg.occupied_interval_s if occupied else cfg.free_interval_s
            driver.advance(dt)
            t += dt
        out.append(Trajectory(vid, tuple(points)))
    return out
