"""Command-line front end: ``hardrods {renewal,exact,sample,scan,domains,tension}``.

Exit codes: 0 success (failing certificates included), 2 invalid flags or an
oversized exact query, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .experiments import (
    ScanSettings,
    config_flags,
    domain_experiment,
    metadata,
    phase_scan,
    run_chains,
    stream_rows,
    summary_rows,
    tension_experiment,
    write_csv,
    write_json,
)
from .lattice import Boundary, LatticeGeometry
from .oracles import TooLarge, coloring_partition, origin_marginals, tiling_partition
from .renewal import (
    ActivityProfile,
    INFINITE,
    bound_residuals,
    check_a1,
    check_a2,
    check_denominator_bound,
    geometric_params,
    normalized_weights,
    parse_max_length,
    renewal_sequence,
    required_dps,
    residual_table,
    truncated_geometric,
    uniform_rod_params,
)
from .samplers import Kernel, SamplerConfig, UpdateRule

EXIT_USAGE = 2
EXIT_IO = 3
OUTPUT_FLAGS = {"out", "meta", "stream", "snapshots", "json"}


class IOFailure(Exception):
    pass


def parse_range(text: str) -> list[float]:
    """``a:b:c`` (inclusive within 1e-12), ``a,b,c`` or a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"empty or ill-formed range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-12)) + 1
        out = [round(start + i * step, 12) for i in range(count)]
        if abs(out[-1] + step - stop) <= 1e-12:
            out.append(round(stop, 12))
        return out
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _max_length(text: str):
    try:
        N = parse_max_length(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"N must be an integer or 'inf', got {text!r}") from None
    if N is not INFINITE and N < 2:
        raise argparse.ArgumentTypeError("N must be >= 2 or 'inf'")
    return N


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return v


def _ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(k) for k in text.split(",") if k)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("k must be >= 1")
    return ks


# ------------------------------------------------------------------ parser


def _sampling_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--N", type=_max_length, default=INFINITE, help="max rod length or 'inf'")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], default=None,
                   help="split_merge or coloring (default: coloring)")
    p.add_argument("--rule", choices=[r.value for r in UpdateRule], default=None,
                   help="site update for the coloring kernel (default: heat_bath)")
    p.add_argument("--cluster", action=argparse.BooleanOptionalAction, default=None,
                   help="Wolff moves (coloring kernel, N=inf only; default on when allowed)")
    p.add_argument("--sweeps", type=_positive_int, default=2000)
    p.add_argument("--burnin", type=_nonneg_int, default=500)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--chains", type=_positive_int, default=1)
    p.add_argument("--workers", type=_positive_int, default=1, help="threads; never changes the output")
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.add_argument("--meta", help="metadata JSON path (default: <out>.meta.json)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardrods", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("renewal", help="renewal sequence, residual bounds and certificates")
    r.add_argument("--q", type=_positive_float, required=True,
                   help="geometric parameter of the uniform-rod weights, 0 < q < 1")
    r.add_argument("--fugacity", action="store_true",
                   help="read --q as the lattice fugacity and use the tilted model weights")
    r.add_argument("--N", type=_max_length, default=INFINITE)
    r.add_argument("--nmax", type=_nonneg_int, default=200)
    r.add_argument("--alpha", type=_positive_float, default=0.01)
    r.add_argument("--samples", type=_positive_int, default=4096)
    r.add_argument("--radii", type=_positive_int, default=8)
    r.add_argument("--out", help="CSV table path (stdout when omitted)")
    r.add_argument("--json", help="certificates JSON path (default: <out>.json)")

    e = sub.add_parser("exact", help="exact enumeration on a tiny box")
    e.add_argument("--w", type=_positive_int, required=True)
    e.add_argument("--h", type=_positive_int, required=True)
    e.add_argument("--q", type=_positive_float, default=0.5)
    e.add_argument("--N", type=_max_length, default=INFINITE)
    e.add_argument("--boundary", choices=[b.value for b in Boundary], default="free")
    e.add_argument("--json", help="write the report as JSON")

    common = _sampling_flags()
    s = sub.add_parser("sample", parents=[common], help="run chains and summarize observables")
    s.add_argument("--q", type=_positive_float, required=True)
    s.add_argument("--w", type=_positive_int, required=True)
    s.add_argument("--h", type=_positive_int, required=True)
    s.add_argument("--boundary", choices=[b.value for b in Boundary], default="torus")
    s.add_argument("--init", choices=["vacant", "H", "V", "random"], default="random")
    s.add_argument("--stream", help="per-sweep observable CSV")
    s.add_argument("--snapshots", help="JSON file with the final tiling of each chain")

    sc = sub.add_parser("scan", parents=[common], help="order parameter versus q")
    sc.add_argument("--q", type=parse_range, required=True, help="start:stop:step or a,b,c")
    sc.add_argument("--w", type=_positive_int, default=64)
    sc.add_argument("--h", type=_positive_int, default=64)
    sc.add_argument("--boundary", choices=[b.value for b in Boundary], default="torus")
    sc.add_argument("--inits", default="random,H", help="comma list of initial conditions")

    d = sub.add_parser("domains", parents=[common], help="orientation selected by a free rectangular box")
    d.add_argument("--k1", type=_positive_int, required=True)
    d.add_argument("--k2", type=_positive_int, required=True)
    d.add_argument("--n", type=_positive_int, required=True)
    d.add_argument("--q", type=_positive_float, required=True)
    d.add_argument("--z", type=_positive_float, default=2.0, help="error bars required for a verdict")

    t = sub.add_parser("tension", parents=[common], help="tau_hat and xi_hat in the horizontal state")
    t.add_argument("--q", type=_positive_float, required=True)
    t.add_argument("--L", type=_positive_int, default=128)
    t.add_argument("--ks", type=_ks, default=(8, 16, 24))
    return parser


# ------------------------------------------------------------------ output helpers


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _emit_json(obj: dict, path: str | None):
    if path is None:
        return
    try:
        write_json(obj, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _meta_path(args) -> str | None:
    if getattr(args, "meta", None):
        return args.meta
    if getattr(args, "out", None):
        return args.out + ".meta.json"
    return None


def replay_flags(args: argparse.Namespace) -> dict:
    """Flags that determine the output, in a JSON-friendly form."""
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in OUTPUT_FLAGS or k == "workers" or v is None:
            continue
        if isinstance(v, tuple):
            v = list(v)
        elif v is INFINITE:
            v = "inf"
        out[k] = v
    return out


def flags_to_argv(flags: dict) -> list[str]:
    """Rebuild a command line from ``replay_flags`` output."""
    argv = [flags["command"]]
    for k, v in flags.items():
        if k == "command":
            continue
        opt = "--" + k
        if isinstance(v, bool):
            if k == "fugacity":
                if v:
                    argv.append(opt)
            else:
                argv.append(opt if v else "--no-" + k)
            continue
        if isinstance(v, list):
            v = ",".join(fmt_flag(x) for x in v)
        argv += [opt, fmt_flag(v)]
    return argv


def fmt_flag(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


# ------------------------------------------------------------------ commands


def cmd_renewal(args) -> int:
    N = args.N
    if args.fugacity:
        weights = normalized_weights(ActivityProfile(args.q, N))
    else:
        if not args.q < 1:
            raise ValueError("the geometric parameter needs 0 < q < 1 (use --fugacity for a lattice fugacity)")
        weights = truncated_geometric(args.q, None if N is INFINITE else N)
    params = None
    if weights.has_reference:
        q_geo = weights.q
        params = geometric_params(q_geo) if weights.is_geometric else uniform_rod_params(q_geo, N, args.alpha)
    dps = required_dps(weights, params, args.nmax) if params is not None else None
    seq = renewal_sequence(weights, args.nmax, dps=dps)
    rows = residual_table(seq, params)
    certs = []
    if params is not None:
        certs = [check_a1(weights, params), check_a2(params),
                 check_denominator_bound(weights, params, args.samples, args.radii), bound_residuals(seq, params)]
    # a row passes only when the bound is both satisfied and backed by A1 and A2
    certified = len(certs) > 0 and certs[0].passed and certs[1].passed
    header = ("n", "g_n", "g", "r_n", "bound", "inequality", "pass")
    for row in rows:
        holds = row.pop("pass")
        row["bound"] = "" if row["bound"] is None else row["bound"]
        row["inequality"] = "" if holds is None else ("true" if holds else "false")
        row["pass"] = "" if holds is None else ("PASS" if holds and certified else "FAIL")
    _emit(write_csv(rows, None, header), args.out)
    report = metadata("renewal", {"command": "renewal", **replay_flags(args)},
                      {"weights": weights.describe(), "certificates": [c.to_json() for c in certs]})
    json_path = args.json or (args.out + ".json" if args.out else None)
    _emit_json(report, json_path)
    for c in certs:
        print(f"# {c.name}: {'PASS' if c.passed else 'FAIL'} observed={c.observed} bound={c.bound}",
              file=sys.stderr if args.out is None else sys.stdout)
    return 0


def cmd_exact(args) -> int:
    geo = LatticeGeometry(args.w, args.h, Boundary(args.boundary))
    profile = ActivityProfile(args.q, args.N)
    z_t = tiling_partition(geo, profile)
    z_c = coloring_partition(geo, profile)
    m = origin_marginals(geo, profile)
    resid = abs(z_t - z_c) / z_t
    print(f"Z_tilings   = {z_t:.17g}")
    print(f"Z_colorings = {z_c:.17g}")
    print(f"P(0 horizontal) = {m['horizontal']:.6f}")
    print(f"P(0 vertical)   = {m['vertical']:.6f}")
    print(f"P(0 vacancy)    = {m['vacancy']:.6f}")
    print(f"identity residual = {resid:.3e}")
    _emit_json({"Z_tilings": z_t, "Z_colorings": z_c, "marginals": m, "identity_residual": resid,
                "geometry": geo.to_json(), "q": args.q, "N": str(args.N)}, args.json)
    return 0


def _settings(args, default_kernel: Kernel = Kernel.COLORING, inits=("random",)) -> ScanSettings:
    return ScanSettings(args.sweeps, args.burnin, args.seed, args.chains, args.workers,
                        Kernel(args.kernel) if args.kernel else default_kernel, tuple(inits))


def _sample_config(args) -> SamplerConfig:
    geo = LatticeGeometry(args.w, args.h, Boundary(args.boundary))
    profile = ActivityProfile(args.q, args.N)
    kernel = Kernel(args.kernel) if args.kernel else Kernel.COLORING
    if kernel is Kernel.COLORING:
        rule = UpdateRule(args.rule) if args.rule else UpdateRule.HEAT_BATH
        cluster = (not profile.bounded) if args.cluster is None else args.cluster
    else:
        if args.cluster:
            raise ValueError("--cluster needs the coloring kernel")
        rule, cluster = UpdateRule.METROPOLIS, False
    return SamplerConfig(geo, profile, args.sweeps, args.burnin, args.seed, kernel, rule, cluster, args.init)


def cmd_sample(args) -> int:
    cfg = _sample_config(args)
    res = run_chains(cfg, args.chains, args.workers)
    _emit(write_csv(summary_rows(cfg, res), None), args.out)
    if args.stream:
        header, rows = stream_rows(res)
        _emit(write_csv(rows, None, header), args.stream)
    if args.snapshots:
        snaps = [{"chain": r.chain, "tiling": r.final_tiling().to_json()} for r in res]
        _emit_json({"schema": 1, "snapshots": snaps}, args.snapshots)
    _emit_json(metadata("sample", {"command": "sample", **replay_flags(args)}, {"config": config_flags(cfg)}),
               _meta_path(args))
    return 0


def cmd_scan(args) -> int:
    geo = LatticeGeometry(args.w, args.h, Boundary(args.boundary))
    inits = tuple(i for i in args.inits.split(",") if i)
    points = phase_scan(args.q, args.N, geo, _settings(args, inits=inits))
    rows = [r for p in points for r in p.rows]
    _emit(write_csv(rows, None), args.out)
    _emit_json(metadata("scan", {"command": "scan", **replay_flags(args)}), _meta_path(args))
    return 0


def cmd_domains(args) -> int:
    v = domain_experiment(args.k1, args.k2, args.n, args.q, args.N, _settings(args), args.z)
    _emit(write_csv(v.rows, None), args.out)
    mean, se = v.m
    print(f"# box {v.width}x{v.height}: E[m] = {mean:.6f} +/- {se:.6f} -> {v.verdict}",
          file=sys.stderr if args.out is None else sys.stdout)
    _emit_json(metadata("domains", {"command": "domains", **replay_flags(args)},
                        {"verdict": v.verdict, "m": list(v.m), "box": [v.width, v.height]}), _meta_path(args))
    return 0


def cmd_tension(args) -> int:
    run = tension_experiment(args.q, args.N, args.L, args.ks, _settings(args))
    _emit(write_csv(run.rows, None), args.out)
    ests = [{"tau": t.to_json(), "xi": x.to_json()} for t, x in run.estimates]
    for t, x in run.estimates:
        print(f"# k={t.k}: tau_hat={t.rate:.6f}+/-{t.rate_stderr:.6f} xi_hat={x.rate:.6f}+/-{x.rate_stderr:.6f}",
              file=sys.stderr if args.out is None else sys.stdout)
    _emit_json(metadata("tension", {"command": "tension", **replay_flags(args)}, {"estimates": ests}),
               _meta_path(args))
    return 0


COMMANDS = {
    "renewal": cmd_renewal,
    "exact": cmd_exact,
    "sample": cmd_sample,
    "scan": cmd_scan,
    "domains": cmd_domains,
    "tension": cmd_tension,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except IOFailure as exc:
        print(f"hardrods: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TooLarge, ValueError) as exc:
        print(f"hardrods: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
