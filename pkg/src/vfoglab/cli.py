"""Command-line entry point: ``vfoglab <command> [options]``.

Every command reads an optional JSON run config, applies flag overrides on
top of it and writes plain files under ``--out``. Reports carry a
``header`` object; its ``generated_at`` field is the only part that changes
between identical reruns.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys

import numpy as np

from . import __version__, evaluation, experiments, fogsim, models, routing, traces
from .config import RunConfig
from .fogsim import ObstacleRegion


class CliError(Exception):
    """User-facing failure; reported as one line on stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ------------------------------------------------------------------ file helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(path, command, cfg, body):
    header = {
        "tool": "vfoglab",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean({"header": header, "body": body}), fh, indent=1, sort_keys=True)
        fh.write("\n")


def strip_header_timestamp(report):
    """Copy of a parsed report without the wall-clock field."""
    out = json.loads(json.dumps(report))
    out.get("header", {}).pop("generated_at", None)
    return out


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _out(args, name):
    return os.path.join(args.out, name)


def _input(args, attr, default_name):
    path = getattr(args, attr, None) or _out(args, default_name)
    if not os.path.exists(path):
        raise CliError(f"input file not found: {path}")
    return path


def _load_trajectories(path):
    try:
        trajs = traces.parse_traces(path)
    except traces.TraceFormatError as exc:
        raise CliError(f"{path}: {exc}") from None
    if not trajs:
        raise CliError(f"{path}: no trace rows")
    return trajs


def _load_records(path):
    try:
        records = fogsim.read_records(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: malformed records ({exc})") from None
    if not records:
        raise CliError(f"{path}: no records")
    return records


def _load_bundle(args):
    try:
        return models.load_bundle(_input(args, "bundle", "bundle.json"))
    except models.BundleError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------------- config


def resolve_config(args):
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "n_vehicles", None) is not None:
        cfg.traces.n_vehicles = args.n_vehicles
    if getattr(args, "duration_s", None) is not None:
        cfg.traces.duration_s = args.duration_s
    if getattr(args, "obstacle", None):
        try:
            box = [float(v) for v in args.obstacle.split(",")]
        except ValueError:
            raise CliError("--obstacle expects lat_min,lon_min,lat_max,lon_max") from None
        if len(box) != 4:
            raise CliError("--obstacle expects lat_min,lon_min,lat_max,lon_max")
        cfg.sim.obstacles = list(cfg.sim.obstacles) + [ObstacleRegion.rectangle(*box)]
    if getattr(args, "fog_epochs", None) is not None:
        cfg.fog_model.train.max_epochs = args.fog_epochs
    if getattr(args, "cost_epochs", None) is not None:
        cfg.cost_model.train.max_epochs = args.cost_epochs
    if getattr(args, "buffer_radius_m", None) is not None:
        cfg.routing.buffer_radius_m = args.buffer_radius_m
    if getattr(args, "cost_threshold", None) is not None:
        cfg.routing.cost_threshold = args.cost_threshold
    cfg.traces.validate()
    return cfg


# -------------------------------------------------------------------- commands


def cmd_gen_traces(cfg, args):
    trajs = experiments.generate_traces(cfg)
    path = _out(args, "traces.csv")
    traces.write_traces(trajs, path)
    print(f"wrote {sum(len(t.points) for t in trajs)} points for {len(trajs)} vehicles to {path}")


def cmd_simulate(cfg, args):
    trajs = _load_trajectories(_input(args, "traces", "traces.csv"))
    records = experiments.simulate_records(cfg, trajs)
    path = _out(args, "records.jsonl")
    fogsim.write_records(records, path)
    print(f"wrote {len(records)} records to {path} (coverage {fogsim.coverage_fraction(records):.4f})")


def cmd_train(cfg, args):
    records = _load_records(_input(args, "records", "records.jsonl"))
    bundle, reports = experiments.train_models(cfg, records)
    path = _out(args, "bundle.json")
    models.save_bundle(bundle, path)
    write_report(_out(args, "train_report.json"), "train", cfg, {"config": cfg.to_dict(), **reports})
    print(f"fog test accuracy {reports['fog'].get('test_accuracy', float('nan')):.4f}; "
          f"cost test MAE (scaled) {reports['cost'].get('test_mae_scaled', float('nan')):.4f}; "
          f"bundle at {path}")


def _write_eval_files(args, report):
    cm = evaluation.ConfusionMatrix(np.asarray(report["fog"]["confusion_matrix"]))
    _write_text(_out(args, "confusion.csv"), cm.to_csv(report["fog"]["class_labels"]))
    text = None
    for region, rows in report["cost"]["temporal"].items():
        block = evaluation.curve_to_csv(rows, region)
        text = block if text is None else text + block.split("\n", 1)[1]
    _write_text(_out(args, "temporal.csv"), text or "")


def cmd_eval(cfg, args):
    records = _load_records(_input(args, "records", "records.jsonl"))
    bundle = _load_bundle(args)
    if bundle.fog is None or bundle.cost is None:
        raise CliError("evaluation needs a bundle with both fog and cost models")
    report = experiments.evaluate_models(cfg, records, bundle)
    write_report(_out(args, "eval_report.json"), "eval", cfg, report)
    _write_eval_files(args, report)
    k = cfg.eval.knn_k_classify
    print(f"fog accuracy {report['fog']['test_accuracy']:.4f} (knn{k} {report['fog'][f'knn{k}_test_accuracy']:.4f}); "
          f"cost MAE {report['cost']['test_mae_scaled']:.4f}")


def cmd_route(cfg, args):
    trajs = _load_trajectories(_input(args, "trajectory", "trajectory.csv"))
    if args.vehicle:
        picked = [t for t in trajs if t.vehicle_id == args.vehicle]
        if not picked:
            raise CliError(f"vehicle {args.vehicle!r} not in trajectory file")
        traj = picked[0]
    elif len(trajs) == 1:
        traj = trajs[0]
    else:
        raise CliError(f"trajectory file holds {len(trajs)} vehicles; choose one with --vehicle")
    bundle = _load_bundle(args)
    if bundle.fog is None:
        raise CliError("bundle has no fog predictor")
    try:
        plan = routing.plan_route(traj, bundle.fog, bundle.cost, cfg.routing.buffer_radius_m,
                                  cfg.routing.cost_threshold, cfg.routing.smooth)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    path = _out(args, "route_plan.json")
    _write_text(path, plan.to_json() + "\n")
    print(plan.to_table())


def cmd_experiment(cfg, args):
    name = args.name
    if name == "transition":
        body = experiments.transition_experiment(cfg.transition_experiment, cfg.seed)
        print(f"true crossing at sample {body['true_crossing_index']}; detected {body['transition_indices']}")
    elif name == "obstacle":
        ocfg = cfg.obstacle_experiment
        body = evaluation.obstacle_experiment(ocfg.network, ocfg.obstacle_region, ocfg, cfg.seed)
        print(f"interior recall {body['interior_recall']}; max overshoot {body['max_overshoot_steps']} steps")
    else:
        records = _load_records(_input(args, "records", "records.jsonl"))
        bundle = _load_bundle(args)
        report = experiments.evaluate_models(cfg, records, bundle)
        body = experiments.temporal_experiment(cfg, report)
        _write_eval_files(args, report)
        print("hourly Pearson r: " + ", ".join(f"{k} {v:.3f}" for k, v in body["temporal_pearson"].items()))
    write_report(_out(args, f"experiment_{name}.json"), f"experiment {name}", cfg, body)


COMMANDS = {
    "gen-traces": cmd_gen_traces,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "route": cmd_route,
    "experiment": cmd_experiment,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON (sections per stage)")
    common.add_argument("--seed", type=int, help="seed for all randomness (overrides config)")
    common.add_argument("--out", default="out", help="output directory (default: out)")

    p = _Parser(prog="vfoglab", description="Vehicular fog handover simulation and prediction.")
    p.add_argument("--version", action="version", version=f"vfoglab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-traces", parents=[common], help="synthesize vehicle traces")
    g.add_argument("--n-vehicles", type=int)
    g.add_argument("--duration-s", type=int)

    s = sub.add_parser("simulate", parents=[common], help="run the fog interaction simulator")
    s.add_argument("--traces", help="trace CSV (default: OUT/traces.csv)")
    s.add_argument("--obstacle", help="extra no-coverage box lat_min,lon_min,lat_max,lon_max")

    t = sub.add_parser("train", parents=[common], help="train fog and cost predictors")
    t.add_argument("--records", help="records JSONL (default: OUT/records.jsonl)")
    t.add_argument("--fog-epochs", type=int)
    t.add_argument("--cost-epochs", type=int)

    e = sub.add_parser("eval", parents=[common], help="evaluate a bundle on held-out data")
    e.add_argument("--records")
    e.add_argument("--bundle", help="model bundle (default: OUT/bundle.json)")

    r = sub.add_parser("route", parents=[common], help="plan handovers along a trajectory")
    r.add_argument("--trajectory", help="trace CSV with the planned path")
    r.add_argument("--vehicle", help="vehicle id when the file holds several")
    r.add_argument("--bundle")
    r.add_argument("--buffer-radius-m", type=float)
    r.add_argument("--cost-threshold", type=float)

    x = sub.add_parser("experiment", parents=[common], help="canned experiments")
    x.add_argument("name", choices=["transition", "obstacle", "temporal"])
    x.add_argument("--records")
    x.add_argument("--bundle")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except (CliError, OSError, ValueError, KeyError, TypeError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"vfoglab: error: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, CliError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
