"""Orientation chosen by free rectangular boxes of aspect k1 : k2."""

import argparse
from pathlib import Path

from hardrods.experiments import ScanSettings, domain_experiment, metadata, write_csv, write_json
from hardrods.renewal import parse_max_length


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=float, default=0.1)
    ap.add_argument("--N", default="inf")
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--shapes", default="3x1,1x3,2x1,1x2,1x1")
    ap.add_argument("--sweeps", type=int, default=3000)
    ap.add_argument("--burnin", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--chains", type=int, default=4)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    settings = ScanSettings(args.sweeps, args.burnin, args.seed, args.chains, args.workers)
    rows, verdicts = [], []
    for shape in args.shapes.split(","):
        k1, k2 = (int(v) for v in shape.split("x"))
        v = domain_experiment(k1, k2, args.n, args.q, parse_max_length(args.N), settings)
        print(f"k1={k1} k2={k2} box {v.width}x{v.height}: E[m] = {v.m[0]:+.4f} +/- {v.m[1]:.4f} -> {v.verdict}")
        rows += v.rows
        verdicts.append({"k1": k1, "k2": k2, "m": list(v.m), "verdict": v.verdict})
    write_csv(rows, out / "domains.csv")
    write_json(metadata("scripts/domains.py", vars(args), {"verdicts": verdicts}), out / "domains.meta.json")


if __name__ == "__main__":
    main()
