"""End-to-end runs shared by the CLI, the scripts and the acceptance suite."""

from __future__ import annotations

import numpy as np

from . import evaluation, features, fogsim, geo, models, routing, scenarios, traces
from .seeding import derive_seed


def generate_traces(cfg):
    return traces.normalize_epoch(traces.synthesize_traces(cfg.traces, derive_seed(cfg.seed, "traces")))


def simulate_records(cfg, trajectories):
    return fogsim.simulate(trajectories, cfg.sim.network, cfg.sim.cost, cfg.sim.obstacles,
                           derive_seed(cfg.seed, "sim"))


def train_models(cfg, records):
    """Fit both predictors; returns (ModelBundle, {"fog": report, "cost": report})."""
    net = cfg.sim.network
    fog, fog_report = models.train_fog_predictor(records, net, cfg.fog_model, cfg.seed)
    cost, cost_report = models.train_cost_predictor(records, net, cfg.cost_model, cfg.seed)
    meta = {"seed": cfg.seed, "fog_split": list(cfg.fog_model.split), "cost_split": list(cfg.cost_model.split),
            "window": cfg.cost_model.window, "epoch_weekday": cfg.epoch_weekday}
    return models.ModelBundle(fog, cost, meta), {"fog": fog_report, "cost": cost_report}


def _region_curves(ts, lats, lons, actual, predicted, polygons, bucket_s):
    regions = evaluation.region_of(lats, lons, polygons)
    curves = {}
    for name in ("urban", "suburban"):
        sel = regions == name
        if sel.any():
            curves[name] = evaluation.temporal_curve(ts[sel], actual[sel], predicted[sel], bucket_s)
    curves["all"] = evaluation.temporal_curve(ts, actual, predicted, bucket_s)
    return curves


def evaluate_models(cfg, records, bundle):
    """Held-out metrics, KNN baselines, region segregation and temporal curves."""
    seed = bundle.meta.get("seed", cfg.seed)
    polygons = cfg.eval.urban_polygons
    out = {}

    fog = bundle.fog
    n_fogs = fog.n_fogs
    tr, _, te = models.fog_split(records, n_fogs, cfg.fog_model.split, seed)
    ds = features.build_fog_dataset(records, fog.scaler, n_fogs, fog.epoch_weekday)
    d_tr, d_te = ds.subset(tr), ds.subset(te)
    pred = fog.net.predict(d_te.X).argmax(axis=1)
    acc, cm = evaluation.accuracy_and_confusion(pred, d_te.labels, n_fogs + 1)
    knn = evaluation.knn_classify(d_tr.X, d_tr.labels, d_te.X, cfg.eval.knn_k_classify, n_fogs + 1)
    out["fog"] = {
        "test_size": len(d_te),
        "test_accuracy": acc,
        "confusion_matrix": cm.to_list(),
        "class_labels": fog.class_labels(),
        f"knn{cfg.eval.knn_k_classify}_test_accuracy": float(np.mean(knn == d_te.labels)),
        "regions": evaluation.segregate_regions(d_te.lats, d_te.lons, pred, d_te.labels, polygons, "accuracy"),
        "reference": {k: v for k, v in evaluation.REFERENCE_VALUES.items() if k.startswith("fog")},
    }

    cost = bundle.cost
    spans = features.window_spans(records, cost.window)
    ctr, _, cte = models.cost_split(spans, cfg.cost_model.split, seed)
    windows = features.build_cost_windows(records, cost.scaler, cost.window, cost.epoch_weekday, spans)
    w_tr, w_te = windows.subset(ctr), windows.subset(cte)
    pred_s = cost.predict_scaled(w_te.X, w_te.mask)
    knn_r = evaluation.knn_regress(w_tr.last_step, w_tr.y, w_te.last_step, cfg.eval.knn_k_regress)
    actual_ms = cost.to_ms(w_te.y)
    pred_ms = cost.to_ms(pred_s)
    curves = _region_curves(w_te.timestamps, w_te.lats, w_te.lons, actual_ms, pred_ms, polygons, cfg.eval.bucket_s)
    out["cost"] = {
        "test_size": len(w_te),
        "test_mae_scaled": evaluation.mae(pred_s, w_te.y),
        "test_mae_ms": evaluation.mae(pred_ms, actual_ms),
        f"knn{cfg.eval.knn_k_regress}_test_mae_scaled": evaluation.mae(knn_r, w_te.y),
        "regions": evaluation.segregate_regions(w_te.lats, w_te.lons, pred_s, w_te.y, polygons, "mae"),
        "temporal": curves,
        "temporal_pearson": {k: evaluation.curve_correlation(v) for k, v in curves.items()},
        "reference": {k: v for k, v in evaluation.REFERENCE_VALUES.items() if k.startswith("cost")},
    }
    return out


# ----------------------------------------------------------------- experiments


def straight_trajectory(start, heading_east_m, speed_mps, sample_s, t0=0, vehicle_id="probe"):
    """Constant-speed east-west line starting at `start`, `heading_east_m` long."""
    n = int(abs(heading_east_m) // (speed_mps * sample_s)) + 1
    direction = 1.0 if heading_east_m >= 0 else -1.0
    pts = []
    for k in range(n):
        lat, lon = geo.offset(start[0], start[1], 0.0, direction * k * speed_mps * sample_s)
        pts.append(traces.TracePoint(vehicle_id, int(t0 + k * sample_s), float(lat), float(lon), True))
    return traces.Trajectory(vehicle_id, tuple(pts))


def transition_experiment(cfg, seed):
    """Train on a two-fog map, drive a probe straight across the bisector."""
    tcfg = cfg
    net = scenarios.two_fog_network(tcfg.separation_m, tcfg.radius_m)
    trajs = traces.normalize_epoch(traces.synthesize_traces(tcfg.traces, derive_seed(seed, "traces")))
    records = fogsim.simulate(trajs, net, fogsim.CostParams(), [], derive_seed(seed, "sim"))
    predictor, report = models.train_fog_predictor(records, net, tcfg.fog_model, seed)
    mid_lat = 0.5 * (net.lats[0] + net.lats[1])
    mid_lon = 0.5 * (net.lons[0] + net.lons[1])
    start = geo.offset(mid_lat, mid_lon, 0.0, -tcfg.length_m / 2)
    t0 = int(np.median([r.t for r in records]))
    probe = straight_trajectory(start, tcfg.length_m, tcfg.speed_mps, tcfg.sample_s, t0)
    truth = fogsim.associate_trajectory(probe, net)
    true_idx = next(i for i in range(1, len(truth)) if truth[i] != truth[i - 1])
    plan = routing.plan_route(probe, predictor, None, 100.0)
    found = [t.index for t in plan.transitions]
    return {
        "fog_test_accuracy": report.get("test_accuracy"),
        "trajectory_points": len(probe),
        "true_crossing_index": int(true_idx),
        "transition_indices": found,
        "n_transitions": len(found),
        "offset_samples": [int(i - true_idx) for i in found],
        "plan": plan.to_dict(),
    }


def temporal_experiment(cfg, eval_report):
    cost = eval_report["cost"]
    return {"temporal": cost["temporal"], "temporal_pearson": cost["temporal_pearson"],
            "bucket_s": cfg.eval.bucket_s}
