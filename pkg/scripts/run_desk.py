"""Desk-scale pipeline: traces, simulation, training and evaluation in one go.

    python scripts/run_desk.py --seed 0 --out runs/desk
"""

import argparse
import json
import os
import time

from vfoglab import cli, experiments, fogsim, models, traces
from vfoglab.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    cfg.seed = args.seed
    os.makedirs(args.out, exist_ok=True)

    t0 = time.time()
    trajs = experiments.generate_traces(cfg)
    traces.write_traces(trajs, os.path.join(args.out, "traces.csv"))
    records = experiments.simulate_records(cfg, trajs)
    fogsim.write_records(records, os.path.join(args.out, "records.jsonl"))
    print(f"{len(records)} records, coverage {fogsim.coverage_fraction(records):.4f} ({time.time() - t0:.1f}s)")

    bundle, train_reports = experiments.train_models(cfg, records)
    models.save_bundle(bundle, os.path.join(args.out, "bundle.json"))
    cli.write_report(os.path.join(args.out, "train_report.json"), "train", cfg, train_reports)
    print(f"trained ({time.time() - t0:.1f}s)")

    report = experiments.evaluate_models(cfg, records, bundle)
    cli.write_report(os.path.join(args.out, "eval_report.json"), "eval", cfg, report)
    summary = {
        "fog_test_accuracy": report["fog"]["test_accuracy"],
        "fog_knn4_test_accuracy": report["fog"]["knn4_test_accuracy"],
        "cost_test_mae_scaled": report["cost"]["test_mae_scaled"],
        "cost_baseline_ffnn_mae_scaled": train_reports["cost"].get("baseline_ffnn_test_mae_scaled"),
        "cost_knn6_test_mae_scaled": report["cost"]["knn6_test_mae_scaled"],
        "temporal_pearson": report["cost"]["temporal_pearson"],
    }
    print(json.dumps(summary, indent=1))
    print(f"done in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
