"""Two fogs, one straight drive across their bisector; where is the handover?"""

import argparse

from vfoglab import experiments
from vfoglab.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    for seed in args.seeds:
        rep = experiments.transition_experiment(cfg.transition_experiment, seed)
        print(f"seed {seed}: fog acc {rep['fog_test_accuracy']:.4f}, true crossing {rep['true_crossing_index']}, "
              f"detected {rep['transition_indices']} (offsets {rep['offset_samples']})")


if __name__ == "__main__":
    main()
