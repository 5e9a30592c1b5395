"""Metrics, baselines and experiment harnesses for the two predictors."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import geo

# Published figures from a different (unavailable) dataset; annotations only.
REFERENCE_VALUES = {
    "fog_accuracy_ffnn": 0.992,
    "fog_accuracy_knn4": 0.9842,
    "fog_accuracy_urban": 0.9834,
    "fog_accuracy_suburban": 0.9965,
    "cost_mae_lstm": 0.0346,
    "cost_mae_ffnn": 0.0518,
    "cost_mae_knn6": 0.0517,
    "cost_mae_urban": 0.028,
    "cost_mae_suburban": 0.041,
    "cost_mae_cumulative": 0.034,
}


# ---------------------------------------------------------------- classification


@dataclass
class ConfusionMatrix:
    """Rows are actual classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def to_list(self):
        return self.counts.astype(int).tolist()

    def to_csv(self, labels=None):
        n = self.counts.shape[0]
        labels = labels or [str(k) for k in range(n)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["actual\\predicted"] + list(labels))
        for lab, row in zip(labels, self.counts):
            w.writerow([lab] + [int(v) for v in row])
        return buf.getvalue()


def accuracy_and_confusion(predictions, labels, n_classes=None):
    pred = np.asarray(predictions, dtype=np.int64)
    lab = np.asarray(labels, dtype=np.int64)
    if pred.shape != lab.shape:
        raise ValueError("predictions and labels differ in length")
    if n_classes is None:
        n_classes = int(max(pred.max(initial=-1), lab.max(initial=-1)) + 1)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (lab, pred), 1)
    cm = ConfusionMatrix(counts)
    return cm.accuracy, cm


def mae(predictions, targets):
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError("predictions and targets differ in length")
    return float(np.mean(np.abs(p - t)))


def pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2:
        return float("nan")
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / denom) if denom > 0 else float("nan")


# ------------------------------------------------------------------------- KNN


def knn_indices(train_X, queries, k, chunk=32):
    """Indices of the k nearest training rows per query (Euclidean).

    Equal distances resolve toward the smaller training index.
    """
    train_X = np.asarray(train_X, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if len(train_X) == 0:
        raise ValueError("empty training set")
    k = min(int(k), len(train_X))
    if k <= 0:
        raise ValueError("k must be positive")
    out = np.empty((len(queries), k), dtype=np.int64)
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        diff = q[:, None, :] - train_X[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        for r in range(len(q)):
            row = d2[r]
            kth = np.partition(row, k - 1)[k - 1]
            cand = np.flatnonzero(row <= kth)
            cand = cand[np.lexsort((cand, row[cand]))]
            out[s + r] = cand[:k]
    return out


def knn_classify(train_X, train_y, queries, k=4, n_classes=None):
    """Majority vote of the k nearest neighbours; vote ties go to the smallest class."""
    train_y = np.asarray(train_y, dtype=np.int64)
    idx = knn_indices(train_X, queries, k)
    n_classes = n_classes or int(train_y.max()) + 1
    votes = np.zeros((len(idx), n_classes), dtype=np.int64)
    for j in range(idx.shape[1]):
        np.add.at(votes, (np.arange(len(idx)), train_y[idx[:, j]]), 1)
    return votes.argmax(axis=1)


def knn_regress(train_X, train_y, queries, k=6):
    """Mean target of the k nearest neighbours."""
    train_y = np.asarray(train_y, dtype=float)
    idx = knn_indices(train_X, queries, k)
    return train_y[idx].mean(axis=1)


# ---------------------------------------------------------------- segregation


def region_of(lats, lons, urban_polygons):
    """Array of "urban"/"suburban" labels by polygon containment."""
    polys = [p if hasattr(p, "area") else geo.make_polygon(p) for p in (urban_polygons or [])]
    inside = geo.contains(polys, lats, lons) if polys else np.zeros(len(np.atleast_1d(lats)), bool)
    return np.where(inside, "urban", "suburban")


def _metric(kind, pred, target):
    if len(pred) == 0:
        return None
    if kind == "accuracy":
        return float(np.mean(np.asarray(pred) == np.asarray(target)))
    return mae(pred, target)


def segregate_regions(lats, lons, predictions, targets, urban_polygons, metric="accuracy"):
    """Per-region and pooled metric; the pooled row is recomputed, not averaged."""
    pred = np.asarray(predictions)
    tgt = np.asarray(targets)
    regions = region_of(lats, lons, urban_polygons)
    report = {}
    for name in ("urban", "suburban"):
        sel = regions == name
        report[name] = {"count": int(sel.sum()), "value": _metric(metric, pred[sel], tgt[sel])}
    report["cumulative"] = {"count": int(len(pred)), "value": _metric(metric, pred, tgt)}
    report["metric"] = metric
    return report


# ------------------------------------------------------------------- temporal


def temporal_curve(timestamps, actual, predicted, bucket_s=3600):
    """Mean actual/predicted per time bucket; empty buckets are omitted."""
    ts = np.asarray(timestamps, dtype=np.int64)
    act = np.asarray(actual, dtype=float)
    prd = np.asarray(predicted, dtype=float)
    buckets = ts // int(bucket_s)
    rows = []
    for b in np.unique(buckets):
        sel = buckets == b
        rows.append({
            "bucket_start_s": int(b * bucket_s),
            "mean_actual": float(act[sel].mean()),
            "mean_predicted": float(prd[sel].mean()),
            "count": int(sel.sum()),
        })
    return rows


def curve_correlation(rows):
    return pearson([r["mean_actual"] for r in rows], [r["mean_predicted"] for r in rows])


def curve_to_csv(rows, region=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "bucket_start_s", "mean_actual", "mean_predicted", "count"])
    for r in rows:
        w.writerow([r.get("region", region or "all"), r["bucket_start_s"], repr(r["mean_actual"]),
                    repr(r["mean_predicted"]), r["count"]])
    return buf.getvalue()


# ------------------------------------------------------------------- obstacle


def probe_grid(region, step_m):
    """Cell-centred probe lattice over (lat_min, lon_min, lat_max, lon_max).

    Returns (lats, lons, rows, cols) flattened in row-major order.
    """
    lat_min, lon_min, lat_max, lon_max = region
    m_lat, m_lon = geo.meters_per_degree(0.5 * (lat_min + lat_max))
    n_rows = max(1, int(round((lat_max - lat_min) * m_lat / step_m)))
    n_cols = max(1, int(round((lon_max - lon_min) * m_lon / step_m)))
    lats = lat_min + (np.arange(n_rows) + 0.5) * step_m / m_lat
    lons = lon_min + (np.arange(n_cols) + 0.5) * step_m / m_lon
    rr, cc = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    return lats[rr.ravel()], lons[cc.ravel()], rr.ravel(), cc.ravel()


def _expanded_bounds(polygon, margin_m):
    lon_min, lat_min, lon_max, lat_max = polygon.bounds
    m_lat, m_lon = geo.meters_per_degree(0.5 * (lat_min + lat_max))
    return (lat_min - margin_m / m_lat, lon_min - margin_m / m_lon,
            lat_max + margin_m / m_lat, lon_max + margin_m / m_lon)


def obstacle_experiment(fog_network, obstacle, pipeline_config, seed=0):
    """Inject `obstacle`, train the fog classifier, probe a lattice around it.

    Reports the fraction of interior probes predicted no-coverage and the
    largest lattice (Chebyshev) distance from the obstacle interior at which
    an otherwise covered probe is still predicted no-coverage.
    """
    from . import fogsim, models, traces
    from .seeding import derive_seed

    cfg = pipeline_config
    trajs = traces.normalize_epoch(traces.synthesize_traces(cfg.traces, derive_seed(seed, "traces")))
    obstacles = [obstacle] if obstacle is not None else []
    records = fogsim.simulate(trajs, fog_network, cfg.cost, obstacles, derive_seed(seed, "sim"))
    predictor, train_report = models.train_fog_predictor(records, fog_network, cfg.fog_model, seed,
                                                         min_classes=1)
    if cfg.probe_region is not None:
        region = tuple(cfg.probe_region)
    elif obstacle is not None:
        region = _expanded_bounds(obstacle.polygon, cfg.probe_margin_m)
    else:
        raise ValueError("probe_region is required when no obstacle is given")
    t_probe = cfg.probe_time
    if t_probe is None:
        t_probe = int(np.median([r.t for r in records]))
    lats, lons, rows, cols = probe_grid(region, cfg.probe_step_m)
    ts = np.full(len(lats), t_probe, dtype=np.int64)
    pred = predictor.predict_classes(lats, lons, ts)
    pred_nc = pred == predictor.no_coverage_class
    interior = obstacle.covers(lats, lons, ts) if obstacle is not None else np.zeros(len(lats), bool)
    uncovered, _ = fogsim.nearest_fogs(lats, lons, fog_network)
    truth_nc = interior | (uncovered == fogsim.NO_COVERAGE)

    recall = float(pred_nc[interior].mean()) if interior.any() else None
    false_nc = pred_nc & ~truth_nc
    overshoot = 0
    if false_nc.any() and interior.any():
        ir, ic = rows[interior], cols[interior]
        for r, c in zip(rows[false_nc], cols[false_nc]):
            overshoot = max(overshoot, int(np.min(np.maximum(np.abs(ir - r), np.abs(ic - c)))))
    elif false_nc.any():
        overshoot = None
    return {
        "n_records": len(records),
        "n_no_coverage_records": int(sum(r.no_coverage for r in records)),
        "probe_step_m": cfg.probe_step_m,
        "probe_time": int(t_probe),
        "n_probes": int(len(lats)),
        "n_interior": int(interior.sum()),
        "interior_recall": recall,
        "false_no_coverage": int(false_nc.sum()),
        "max_overshoot_steps": overshoot,
        "fog_test_accuracy": train_report.get("test_accuracy"),
        "probes": [
            {"row": int(r), "col": int(c), "lat": float(a), "lon": float(b),
             "interior": bool(i), "predicted_no_coverage": bool(p)}
            for r, c, a, b, i, p in zip(rows, cols, lats, lons, interior, pred_nc)
        ],
    }
