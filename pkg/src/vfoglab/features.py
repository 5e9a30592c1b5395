"""Turn interaction records into learning matrices.

Positions become unit-sphere Cartesian coordinates, time of day becomes a
sine/cosine pair plus a day-of-week one-hot, and every real-valued column is
min-max scaled with statistics from the training split only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

LAYOUT_VERSION = 1
SECONDS_PER_DAY = 86_400
DEFAULT_WINDOW = 10

REAL_FEATURES = ("dev_x", "dev_y", "dev_z", "fog_x", "fog_y", "fog_z", "dist_m", "cost_ms")
DOW_FEATURES = tuple(f"dow_{k}" for k in range(7))
FOG_FEATURES = ("dev_x", "dev_y", "dev_z") + DOW_FEATURES + ("sin_t", "cos_t")
STEP_FEATURES = ("dev_x", "dev_y", "dev_z", "fog_x", "fog_y", "fog_z", "dist_m", "sin_t", "cos_t") + DOW_FEATURES + ("cost",)


# -------------------------------------------------------------------- encodings


def geo_to_cartesian(lat_deg, lon_deg):
    """Unit-sphere (x, y, z) for a latitude/longitude in degrees."""
    lat = np.asarray(lat_deg, dtype=float)
    lon = np.asarray(lon_deg, dtype=float)
    if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0) or not (
        np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))
    ):
        raise ValueError("latitude/longitude out of range")
    phi = np.radians(lat)
    lam = np.radians(lon)
    x = np.cos(phi) * np.cos(lam)
    y = np.cos(phi) * np.sin(lam)
    z = np.sin(phi)
    if x.ndim == 0:
        return float(x), float(y), float(z)
    return x, y, z


def time_features(timestamp_s, epoch_weekday=0):
    """(sin_t, cos_t, dow_onehot) for seconds since the dataset epoch."""
    ts = np.asarray(timestamp_s)
    if np.any(ts < 0):
        raise ValueError("timestamp must be non-negative")
    seconds = np.mod(ts, SECONDS_PER_DAY)
    angle = 2.0 * np.pi * seconds / SECONDS_PER_DAY
    dow = (epoch_weekday + ts // SECONDS_PER_DAY) % 7
    onehot = np.eye(7)[np.asarray(dow, dtype=np.int64)]
    if ts.ndim == 0:
        return float(np.sin(angle)), float(np.cos(angle)), onehot
    return np.sin(angle), np.cos(angle), onehot


def _unit(v):
    # sin/cos rescaled from [-1, 1] to [0, 1]
    return 0.5 * (np.asarray(v) + 1.0)


# ----------------------------------------------------------------------- scaler


@dataclass
class FeatureScaler:
    names: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.names = tuple(self.names)
        self.mins = np.asarray(self.mins, dtype=float)
        self.maxs = np.asarray(self.maxs, dtype=float)
        if np.any(self.maxs < self.mins):
            raise ValueError("scaler max < min")

    def _cols(self, names):
        names = self.names if names is None else tuple(names)
        idx = [self.names.index(n) for n in names]
        return self.mins[idx], self.maxs[idx]

    def transform(self, values, names=None):
        """Scale columns to [0, 1]; constant features map to 0, out-of-range values clamp."""
        lo, hi = self._cols(names)
        values = np.asarray(values, dtype=float)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (values - lo) / safe, 0.0)
        return np.clip(out, 0.0, 1.0)

    def inverse_transform(self, scaled, names=None):
        lo, hi = self._cols(names)
        return lo + np.asarray(scaled, dtype=float) * (hi - lo)

    def scale(self, name, value):
        return self.transform(value, [name])

    def unscale(self, name, value):
        return self.inverse_transform(value, [name])

    def to_dict(self):
        return {"names": list(self.names), "min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["names"], data["min"], data["max"])


def apply_scaler(scaler, value_row, names=None):
    return scaler.transform(value_row, names)


def raw_matrix(records):
    """Unscaled REAL_FEATURES per record; fog columns, distance and cost are NaN without coverage."""
    n = len(records)
    out = np.full((n, len(REAL_FEATURES)), np.nan)
    if n == 0:
        return out
    vlat = np.array([r.vlat for r in records])
    vlon = np.array([r.vlon for r in records])
    out[:, 0], out[:, 1], out[:, 2] = geo_to_cartesian(vlat, vlon)
    cov = np.array([not r.no_coverage for r in records])
    if cov.any():
        flat = np.array([r.flat for r, c in zip(records, cov) if c])
        flon = np.array([r.flon for r, c in zip(records, cov) if c])
        fx, fy, fz = geo_to_cartesian(flat, flon)
        out[cov, 3], out[cov, 4], out[cov, 5] = fx, fy, fz
        out[cov, 6] = [r.dist_m for r, c in zip(records, cov) if c]
        out[cov, 7] = [r.cost_ms for r, c in zip(records, cov) if c]
    return out


def fit_scaler(training_records):
    """Per-feature min/max over the training records (NaN entries ignored)."""
    if len(training_records) == 0:
        raise ValueError("cannot fit scaler on an empty training set")
    raw = raw_matrix(training_records)
    mins = np.empty(raw.shape[1])
    maxs = np.empty(raw.shape[1])
    for j in range(raw.shape[1]):
        col = raw[:, j]
        col = col[~np.isnan(col)]
        # a column with no finite values (all rows uncovered) stays degenerate at 0
        mins[j], maxs[j] = (col.min(), col.max()) if col.size else (0.0, 0.0)
    return FeatureScaler(REAL_FEATURES, mins, maxs)


# ----------------------------------------------------------------- fog dataset


@dataclass(frozen=True)
class FogSample:
    features: np.ndarray
    target: np.ndarray


@dataclass
class FogDataset:
    X: np.ndarray
    labels: np.ndarray
    n_classes: int
    lats: np.ndarray
    lons: np.ndarray
    timestamps: np.ndarray

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return FogSample(self.X[i], self.targets[i])

    @property
    def targets(self):
        return np.eye(self.n_classes)[self.labels]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return FogDataset(self.X[idx], self.labels[idx], self.n_classes,
                          self.lats[idx], self.lons[idx], self.timestamps[idx])


def fog_features(scaler, lats, lons, timestamps, epoch_weekday=0):
    """Fog-classifier input rows; only the trajectory point and time are needed."""
    x, y, z = geo_to_cartesian(np.atleast_1d(lats), np.atleast_1d(lons))
    dev = scaler.transform(np.column_stack([x, y, z]), ("dev_x", "dev_y", "dev_z"))
    s, c, dow = time_features(np.atleast_1d(np.asarray(timestamps, dtype=np.int64)), epoch_weekday)
    return np.column_stack([dev, dow, _unit(s), _unit(c)])


def fog_label(record, n_fogs):
    return n_fogs if record.no_coverage else int(record.fog_id)


def build_fog_dataset(records, scaler, n_fogs, epoch_weekday=0):
    """One sample per record; uncovered records map to the extra class n_fogs."""
    lats = np.array([r.vlat for r in records], dtype=float)
    lons = np.array([r.vlon for r in records], dtype=float)
    ts = np.array([r.t for r in records], dtype=np.int64)
    labels = np.array([fog_label(r, n_fogs) for r in records], dtype=np.int64)
    if len(records) == 0:
        X = np.zeros((0, len(FOG_FEATURES)))
    else:
        X = fog_features(scaler, lats, lons, ts, epoch_weekday)
    return FogDataset(X, labels, n_fogs + 1, lats, lons, ts)


# ---------------------------------------------------------------- cost windows


@dataclass(frozen=True)
class CostWindow:
    steps: np.ndarray     # (window, len(STEP_FEATURES))
    mask: np.ndarray      # (window,) 1 = real step
    target: float         # scaled cost at the next step


@dataclass
class CostWindowSet:
    X: np.ndarray          # (N, window, D)
    mask: np.ndarray       # (N, window)
    y: np.ndarray          # (N,) scaled target cost
    target_index: np.ndarray   # index of the target record in the input list
    vehicle_ids: np.ndarray
    timestamps: np.ndarray
    lats: np.ndarray
    lons: np.ndarray

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i):
        return CostWindow(self.X[i], self.mask[i], float(self.y[i]))

    @property
    def window(self):
        return self.X.shape[1]

    @property
    def last_step(self):
        """Most recent step of each window: the feature row a windowless model sees."""
        return self.X[:, -1, :]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return CostWindowSet(self.X[idx], self.mask[idx], self.y[idx], self.target_index[idx],
                             self.vehicle_ids[idx], self.timestamps[idx], self.lats[idx], self.lons[idx])


def record_order(records):
    """Indices of records sorted by vehicle id, then time (stable)."""
    return sorted(range(len(records)), key=lambda i: (records[i].vehicle_id, records[i].t))


def window_spans(records, window=DEFAULT_WINDOW):
    """(target index, step indices) per window, ordered by vehicle then time.

    Steps are the up-to-`window` records preceding the target for the same
    vehicle; windows whose target has no coverage are dropped.
    """
    order = record_order(records)
    spans = []
    start = 0
    while start < len(order):
        vid = records[order[start]].vehicle_id
        end = start
        while end < len(order) and records[order[end]].vehicle_id == vid:
            end += 1
        for pos in range(start + 1, end):
            tgt = order[pos]
            if records[tgt].no_coverage:
                continue
            spans.append((tgt, order[max(start, pos - window):pos]))
        start = end
    return spans


def step_matrix(records, scaler, epoch_weekday=0):
    """Scaled per-record step vectors and validity (0 for uncovered records)."""
    raw = raw_matrix(records)
    valid = ~np.isnan(raw[:, 7]) if len(records) else np.zeros(0, dtype=bool)
    stepv = np.zeros((len(records), len(STEP_FEATURES)))
    if not len(records):
        return stepv, valid
    scaled = scaler.transform(np.nan_to_num(raw), REAL_FEATURES)
    ts = np.array([r.t for r in records], dtype=np.int64)
    s, c, dow = time_features(ts, epoch_weekday)
    stepv[:, 0:7] = scaled[:, 0:7]
    stepv[:, 7] = _unit(s)
    stepv[:, 8] = _unit(c)
    stepv[:, 9:16] = dow
    stepv[:, 16] = scaled[:, 7]
    stepv[~valid] = 0.0
    return stepv, valid


def build_cost_windows(records, scaler, window=DEFAULT_WINDOW, epoch_weekday=0, spans=None):
    """Sliding windows (stride 1) over each vehicle, left zero-padded to `window` steps."""
    if spans is None:
        spans = window_spans(records, window)
    stepv, valid = step_matrix(records, scaler, epoch_weekday)
    n = len(spans)
    X = np.zeros((n, window, len(STEP_FEATURES)))
    mask = np.zeros((n, window))
    y = np.zeros(n)
    tgt_idx = np.zeros(n, dtype=np.int64)
    for k, (tgt, steps) in enumerate(spans):
        off = window - len(steps)
        if steps:
            X[k, off:] = stepv[steps]
            mask[k, off:] = valid[steps]
        tgt_idx[k] = tgt
    if n:
        y = scaler.transform(np.array([records[i].cost_ms for i in tgt_idx]), ["cost_ms"])
    return CostWindowSet(
        X, mask, np.asarray(y, dtype=float), tgt_idx,
        np.array([records[i].vehicle_id for i in tgt_idx], dtype=object),
        np.array([records[i].t for i in tgt_idx], dtype=np.int64),
        np.array([records[i].vlat for i in tgt_idx], dtype=float),
        np.array([records[i].vlon for i in tgt_idx], dtype=float),
    )


# ------------------------------------------------------------------- splitting


def split_indices(n, ratios=(0.7, 0.15, 0.15), seed=0, strata=None):
    """Deterministic shuffled train/val/test index arrays, optionally stratified."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    groups = [np.arange(n)] if strata is None else [
        np.flatnonzero(np.asarray(strata) == c) for c in np.unique(strata)
    ]
    parts = ([], [], [])
    for members in groups:
        members = rng.permutation(members)
        n_train = int(round(len(members) * ratios[0]))
        n_val = min(int(round(len(members) * ratios[1])), len(members) - n_train)
        parts[0].append(members[:n_train])
        parts[1].append(members[n_train:n_train + n_val])
        parts[2].append(members[n_train + n_val:])
    return tuple(rng.permutation(np.concatenate(p)).astype(np.int64) if p else np.zeros(0, np.int64)
                 for p in parts)


def split_dataset(samples, ratios=(0.7, 0.15, 0.15), seed=0, strata=None):
    idx = split_indices(len(samples), ratios, seed, strata)
    if hasattr(samples, "subset"):
        return tuple(samples.subset(i) for i in idx)
    return tuple([samples[j] for j in i] for i in idx)


# --------------------------------------------------------------- serialization


def layout_document(scaler, window=DEFAULT_WINDOW, epoch_weekday=0):
    return {
        "version": LAYOUT_VERSION,
        "scaler": scaler.to_dict(),
        "fog_features": list(FOG_FEATURES),
        "step_features": list(STEP_FEATURES),
        "window": int(window),
        "epoch_weekday": int(epoch_weekday),
    }


def load_layout(doc):
    if doc.get("version") != LAYOUT_VERSION:
        raise ValueError(f"unsupported feature layout version {doc.get('version')!r}")
    if tuple(doc["fog_features"]) != FOG_FEATURES or tuple(doc["step_features"]) != STEP_FEATURES:
        raise ValueError("feature layout does not match this build")
    return FeatureScaler.from_dict(doc["scaler"]), int(doc["window"]), int(doc["epoch_weekday"])


def dumps_layout(scaler, window=DEFAULT_WINDOW, epoch_weekday=0):
    return json.dumps(layout_document(scaler, window, epoch_weekday), sort_keys=True)
