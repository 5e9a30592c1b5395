"""Proactive handover planning along a known trajectory.

The fog classifier is queried point by point. A transition is declared at
index i when the three points before i agree on fog A and i plus the two
after agree on fog B. Each transition gets a buffer zone (the stretch of
trajectory within `buffer_radius_m` of the transition point) in which
requests go to both fogs. Predicted no-coverage or high-cost stretches
become low-coverage intervals with offload points on either side.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import features, geo
from .fogsim import NO_COVERAGE, InteractionRecord

WINDOW_SIDE = 3


@dataclass
class TransitionPoint:
    index: int
    lat: float
    lon: float
    from_fog: int
    to_fog: int
    timestamp: int


@dataclass
class Segment:
    start: int
    end: int  # inclusive
    fog_id: int


@dataclass
class BufferZone:
    transition_index: int
    entry_index: int
    from_fog: int
    to_fog: int
    entry_lat: float
    entry_lon: float
    entry_timestamp: int


@dataclass
class LowCoverageInterval:
    start: int
    end: int  # inclusive
    reason: str
    offload_before: int | None
    offload_after: int | None
    start_timestamp: int
    end_timestamp: int


class TransitionList(list):
    """List of TransitionPoint plus the classes the detector actually ran on."""

    too_short = False
    classes = None


@dataclass
class RoutePlan:
    vehicle_id: str
    segments: list
    transitions: list
    buffers: list
    low_coverage: list
    predicted_fog: list
    effective_fog: list
    predicted_cost_scaled: list | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "vehicle_id": self.vehicle_id,
            "segments": [asdict(s) for s in self.segments],
            "transitions": [asdict(t) for t in self.transitions],
            "buffers": [asdict(b) for b in self.buffers],
            "low_coverage": [asdict(i) for i in self.low_coverage],
            "predicted_fog": list(self.predicted_fog),
            "effective_fog": list(self.effective_fog),
            "predicted_cost_scaled": self.predicted_cost_scaled,
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    def to_table(self):
        def fog(f):
            return "NONE" if f == NO_COVERAGE else f"fog {f}"

        lines = [f"route plan for {self.vehicle_id}: {len(self.effective_fog)} points"]
        lines.append(f"{'kind':<12}{'start':>7}{'end':>7}  detail")
        for s in self.segments:
            lines.append(f"{'segment':<12}{s.start:>7}{s.end:>7}  served by {fog(s.fog_id)}")
        for b in self.buffers:
            lines.append(f"{'buffer':<12}{b.entry_index:>7}{b.transition_index:>7}  "
                         f"duplicate to {fog(b.from_fog)} + {fog(b.to_fog)}")
        for t in self.transitions:
            lines.append(f"{'handover':<12}{t.index:>7}{t.index:>7}  {fog(t.from_fog)} -> {fog(t.to_fog)} "
                         f"at ({t.lat:.6f}, {t.lon:.6f}) t={t.timestamp}")
        for i in self.low_coverage:
            lines.append(f"{'low-cov':<12}{i.start:>7}{i.end:>7}  {i.reason}; offload at "
                         f"{i.offload_before} / {i.offload_after}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)


# -------------------------------------------------------------------- queries


def predict_along(trajectory, fog_predictor):
    """Predicted fog id per trajectory point (NO_COVERAGE for the extra class)."""
    classes = fog_predictor.predict_classes(trajectory.lats, trajectory.lons, trajectory.timestamps)
    return np.where(classes == fog_predictor.n_fogs, NO_COVERAGE, classes).astype(np.int64)


def smooth_flicker(classes):
    """Replace isolated single-sample labels whose two neighbours agree."""
    c = np.asarray(classes).copy()
    if len(c) < 3:
        return c
    src = np.asarray(classes)
    flick = (src[:-2] == src[2:]) & (src[1:-1] != src[:-2])
    c[1:-1][flick] = src[:-2][flick]
    return c


def detect_transitions(predicted_classes, trajectory, smooth=True, no_coverage=NO_COVERAGE):
    """Transition points under the three-before / three-after rule."""
    raw = np.asarray(predicted_classes)
    c = smooth_flicker(raw) if smooth else raw.copy()
    out = TransitionList()
    out.classes = c
    n = len(c)
    if n < 2 * WINDOW_SIDE + 1:
        out.too_short = True
        return out
    pts = trajectory.points
    last_seen = {}
    for i in range(WINDOW_SIDE, n - WINDOW_SIDE + 1):
        a = c[i - 1]
        b = c[i]
        if a == b or a == no_coverage or b == no_coverage:
            continue
        if np.all(c[i - WINDOW_SIDE:i] == a) and np.all(c[i:i + WINDOW_SIDE] == b):
            key = (int(a), int(b))
            if key in last_seen and i - last_seen[key] < 2 * WINDOW_SIDE:
                continue
            last_seen[key] = i
            p = pts[i]
            out.append(TransitionPoint(i, p.lat, p.lon, int(a), int(b), p.timestamp))
    return out


# ------------------------------------------------------------------ cost rollout


def rollout_costs(trajectory, fog_ids, cost_predictor, observed_costs_ms=None):
    """Scaled cost forecast per point, feeding each forecast back as history.

    `observed_costs_ms` (optional, leading points) replaces forecasts where known.
    """
    net = cost_predictor.network
    W = cost_predictor.window
    recs = []
    for p, f in zip(trajectory.points, fog_ids):
        if f == NO_COVERAGE:
            recs.append(InteractionRecord(p.vehicle_id, p.timestamp, p.lat, p.lon,
                                          None, None, None, None, None, True))
        else:
            node = net[int(f)]
            d = float(geo.haversine_m(p.lat, p.lon, node.lat, node.lon))
            recs.append(InteractionRecord(p.vehicle_id, p.timestamp, p.lat, p.lon, int(f),
                                          node.lat, node.lon, d, 0.0, False))
    stepv, valid = features.step_matrix(recs, cost_predictor.scaler, cost_predictor.epoch_weekday)
    cost_col = features.STEP_FEATURES.index("cost")
    n = len(recs)
    preds = np.zeros(n)
    X = np.zeros((1, W, stepv.shape[1]))
    M = np.zeros((1, W))
    for j in range(n):
        lo = max(0, j - W)
        k = j - lo
        X[:] = 0.0
        M[:] = 0.0
        if k:
            X[0, W - k:] = stepv[lo:j]
            M[0, W - k:] = valid[lo:j]
        preds[j] = cost_predictor.predict_scaled(X, M)[0]
        if observed_costs_ms is not None and j < len(observed_costs_ms):
            obs = cost_predictor.scaler.transform(observed_costs_ms[j], ["cost_ms"])
            stepv[j, cost_col] = float(obs) if valid[j] else 0.0
        elif valid[j]:
            stepv[j, cost_col] = float(np.clip(preds[j], 0.0, 1.0))
    return preds


# ----------------------------------------------------------------------- plans


def _runs(mask):
    runs = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _check_models(fog_predictor, cost_predictor):
    if fog_predictor is None or not hasattr(fog_predictor, "predict_classes"):
        raise ValueError("a trained fog predictor is required")
    if cost_predictor is None:
        return
    a, b = fog_predictor.network, cost_predictor.network
    if len(a) != len(b) or not (np.allclose(a.lats, b.lats) and np.allclose(a.lons, b.lons)):
        raise ValueError("fog and cost predictors were trained on different fog networks")


def plan_route(trajectory, fog_predictor, cost_predictor=None, buffer_radius_m=100.0,
               cost_threshold=0.9, smooth=True, observed_costs_ms=None):
    """Segments, handovers, duplication buffers and low-coverage warnings."""
    _check_models(fog_predictor, cost_predictor)
    predicted = predict_along(trajectory, fog_predictor)
    transitions = detect_transitions(predicted, trajectory, smooth)
    eff = transitions.classes
    n = len(eff)
    warnings = []
    if transitions.too_short:
        warnings.append(f"trajectory has {n} points; at least {2 * WINDOW_SIDE + 1} needed for handover detection")

    if transitions:
        first_fog = transitions[0].from_fog
    else:
        covered = [int(c) for c in eff if c != NO_COVERAGE]
        first_fog = Counter(covered).most_common(1)[0][0] if covered else NO_COVERAGE
    bounds = [0] + [t.index for t in transitions] + [n]
    fogs = [first_fog] + [t.to_fog for t in transitions]
    segments = [Segment(bounds[k], bounds[k + 1] - 1, fogs[k]) for k in range(len(fogs))]

    pts = trajectory.points
    lats, lons = trajectory.lats, trajectory.lons
    buffers = []
    for k, t in enumerate(transitions):
        floor = bounds[k]
        entry = t.index
        j = t.index - 1
        while j >= floor and geo.haversine_m(lats[j], lons[j], t.lat, t.lon) <= buffer_radius_m:
            entry = j
            j -= 1
        p = pts[entry]
        buffers.append(BufferZone(t.index, entry, t.from_fog, t.to_fog, p.lat, p.lon, p.timestamp))

    cost = None
    low = eff == NO_COVERAGE
    high = np.zeros(n, dtype=bool)
    if cost_predictor is not None and n:
        cost = rollout_costs(trajectory, eff, cost_predictor, observed_costs_ms)
        high = (cost > cost_threshold) & ~low
    intervals = []
    for s, e in _runs(low | high):
        kinds = {("no_coverage" if low[i] else "high_cost") for i in range(s, e + 1)}
        reason = "+".join(sorted(kinds))
        intervals.append(LowCoverageInterval(
            s, e, reason, s - 1 if s > 0 else None, e + 1 if e + 1 < n else None,
            pts[s].timestamp, pts[e].timestamp))

    return RoutePlan(trajectory.vehicle_id, segments, list(transitions), buffers, intervals,
                     [int(c) for c in predicted], [int(c) for c in eff],
                     None if cost is None else [float(c) for c in cost], warnings)
