"""Tunnel obstacle run: recall of the no-coverage class on a probe lattice.

Prints the lattice as rows of characters: '#' interior predicted no-coverage,
'o' interior missed, '!' exterior predicted no-coverage, '.' exterior covered.
"""

import argparse
import json

from vfoglab import evaluation
from vfoglab.config import RunConfig


def render(probes):
    n_rows = max(p["row"] for p in probes) + 1
    n_cols = max(p["col"] for p in probes) + 1
    grid = [["?"] * n_cols for _ in range(n_rows)]
    for p in probes:
        if p["interior"]:
            ch = "#" if p["predicted_no_coverage"] else "o"
        else:
            ch = "!" if p["predicted_no_coverage"] else "."
        grid[p["row"]][p["col"]] = ch
    return "\n".join("".join(r) for r in reversed(grid))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write the full report here")
    args = ap.parse_args()
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    ocfg = cfg.obstacle_experiment
    rep = evaluation.obstacle_experiment(ocfg.network, ocfg.obstacle_region, ocfg, args.seed)
    print(render(rep["probes"]))
    print({k: v for k, v in rep.items() if k != "probes"})
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rep, fh, indent=1)


if __name__ == "__main__":
    main()
