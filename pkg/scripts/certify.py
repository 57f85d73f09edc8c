"""Smallest certified N for uniform rod weights, with every certificate written to JSON."""

import argparse
from pathlib import Path

from hardrods.experiments import metadata, write_json
from hardrods.renewal import certify_uniform, find_certified_N


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", default="0.1,0.2,0.3,0.4,0.45", help="geometric parameters to scan")
    ap.add_argument("--nmax", type=int, default=200)
    ap.add_argument("--Nlimit", type=int, default=2000)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    for q in (float(v) for v in args.q.split(",")):
        N, _ = find_certified_N(q, args.nmax, args.Nlimit)
        if N is None:
            print(f"q={q}: no N <= {args.Nlimit} certified")
            report[str(q)] = None
            continue
        certs = certify_uniform(q, N, args.nmax)
        status = " ".join(f"{k}={'PASS' if c.passed else 'FAIL'}" for k, c in certs.items())
        print(f"q={q}: N* = {N}  {status}  min|D| = {certs['denominator'].observed:.4f}")
        report[str(q)] = {"N_star": N, "certificates": {k: c.to_json() for k, c in certs.items()}}
    write_json(metadata("scripts/certify.py", vars(args), {"results": report}), out / "certify.json")


if __name__ == "__main__":
    main()
