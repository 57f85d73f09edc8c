"""tau_hat(k) and xi_hat(k) in the horizontal state on an L x L torus."""

import argparse
from pathlib import Path

from hardrods.experiments import ScanSettings, metadata, tension_experiment, write_csv, write_json
from hardrods.renewal import parse_max_length


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=float, default=0.1)
    ap.add_argument("--N", default="inf")
    ap.add_argument("--L", type=int, default=128)
    ap.add_argument("--ks", default="4,8,12,16,20,24")
    ap.add_argument("--sweeps", type=int, default=4000)
    ap.add_argument("--burnin", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--chains", type=int, default=2)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    ks = tuple(int(k) for k in args.ks.split(","))
    settings = ScanSettings(args.sweeps, args.burnin, args.seed, args.chains, args.workers)
    run = tension_experiment(args.q, parse_max_length(args.N), args.L, ks, settings)

    print(f"{'k':>3} {'tau_hat':>9} {'se':>8} {'xi_hat':>9} {'se':>8}")
    for tau, xi in run.estimates:
        print(f"{tau.k:3d} {tau.rate:9.4f} {tau.rate_stderr:8.4f} {xi.rate:9.4f} {xi.rate_stderr:8.4f}")
    write_csv(run.rows, out / "surface_tension.csv")
    ests = [{"tau": t.to_json(), "xi": x.to_json()} for t, x in run.estimates]
    write_json(metadata("scripts/surface_tension.py", vars(args), {"estimates": ests}),
               out / "surface_tension.meta.json")


if __name__ == "__main__":
    main()
