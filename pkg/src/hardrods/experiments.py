"""Experiment drivers and their CSV / JSON outputs."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .lattice import Boundary, LatticeGeometry
from .observables import OBS_NAMES, series_estimate, surface_tension_estimates
from .renewal import ActivityProfile
from .samplers import RNG_ID, ChainResult, Kernel, SamplerConfig, UpdateRule, run_chain

CSV_HEADER = ("q", "N", "L1", "L2", "boundary", "sweeps", "seed", "kernel", "init", "observable", "mean", "stderr")
SCHEMA_VERSION = 1


def fmt(x) -> str:
    """Full-precision text for a number (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def run_chains(config: SamplerConfig, chains: int = 1, workers: int = 1) -> list[ChainResult]:
    """Independent chains 0..chains-1; results do not depend on ``workers``."""
    if workers <= 1 or chains <= 1:
        return [run_chain(config, c) for c in range(chains)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run_chain(config, c), range(chains)))


def summarize(results: Sequence[ChainResult]) -> dict[str, tuple[float, float]]:
    """Mean and error bar of each per-sweep observable, plus |m|."""
    out = {}
    for j, name in enumerate(OBS_NAMES):
        out[name] = series_estimate([r.obs[:, j] for r in results])
    out["abs_m"] = series_estimate([np.abs(r.obs[:, 3]) for r in results])
    return out


def summary_rows(config: SamplerConfig, results: Sequence[ChainResult], extra: dict | None = None) -> list[dict]:
    geo = config.geometry
    base = {
        "q": config.profile.q,
        "N": str(config.profile.N),
        "L1": geo.width,
        "L2": geo.height,
        "boundary": geo.boundary.value,
        "sweeps": config.sweeps,
        "seed": config.seed,
        "kernel": config.kernel.value,
        "init": config.init,
    }
    rows = []
    stats = summarize(results)
    if extra:
        stats.update(extra)
    for name, (mean, se) in stats.items():
        rows.append({**base, "observable": name, "mean": mean, "stderr": se})
    return rows


def write_csv(rows: Iterable[dict], path: str | Path | None, header: Sequence[str] = CSV_HEADER) -> str:
    """RFC 4180 CSV (CRLF line ends); returns the text and writes it when ``path`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[h] if isinstance(r[h], str) else fmt(r[h]) for h in header])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def stream_rows(results: Sequence[ChainResult]) -> tuple[tuple[str, ...], list[dict]]:
    """Per-sweep observables of every chain."""
    header = ("chain", "sweep") + OBS_NAMES
    rows = []
    for r in results:
        for i, vals in enumerate(r.obs):
            rows.append({"chain": r.chain, "sweep": i, **dict(zip(OBS_NAMES, vals))})
    return header, rows


def git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def metadata(command: str, flags: dict, extra: dict | None = None) -> dict:
    meta = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "flags": flags,
        "rng": RNG_ID,
        "version": __version__,
        "numpy": np.__version__,
        "git_revision": git_revision(),
    }
    if extra:
        meta.update(extra)
    return meta


def write_json(obj: dict, path: str | Path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


# ------------------------------------------------------------------ phase scan


@dataclass(frozen=True)
class ScanSettings:
    sweeps: int = 2000
    burnin: int = 500
    seed: int = 0
    chains: int = 1
    workers: int = 1
    kernel: Kernel = Kernel.COLORING
    inits: tuple[str, ...] = ("random", "H")


def scan_config(q: float, N, geometry: LatticeGeometry, settings: ScanSettings, init: str) -> SamplerConfig:
    profile = ActivityProfile(q, N)
    kernel = Kernel(settings.kernel)
    coloring = kernel is Kernel.COLORING
    return SamplerConfig(
        geometry,
        profile,
        settings.sweeps,
        settings.burnin,
        settings.seed,
        kernel,
        UpdateRule.HEAT_BATH if coloring else UpdateRule.METROPOLIS,
        cluster=coloring and not profile.bounded,
        init=init,
    )


@dataclass(frozen=True)
class ScanPoint:
    q: float
    init: str
    abs_m: tuple[float, float]
    m: tuple[float, float]
    origin_horizontal: tuple[float, float]
    config: SamplerConfig
    rows: tuple[dict, ...]


def phase_scan(q_list: Sequence[float], N, geometry: LatticeGeometry, settings: ScanSettings = ScanSettings()
               ) -> list[ScanPoint]:
    """E|m|, E[m] and E[origin horizontal] per q, for each initial condition."""
    points = []
    for q in q_list:
        for init in settings.inits:
            cfg = scan_config(q, N, geometry, settings, init)
            res = run_chains(cfg, settings.chains, settings.workers)
            s = summarize(res)
            points.append(ScanPoint(q, init, s["abs_m"], s["m"], s["origin_horizontal"], cfg,
                                    tuple(summary_rows(cfg, res))))
    return points


# ------------------------------------------------------------------ domains


@dataclass(frozen=True)
class DomainVerdict:
    k1: int
    k2: int
    n: int
    width: int
    height: int
    m: tuple[float, float]
    z: float
    rows: tuple[dict, ...]

    @property
    def verdict(self) -> str:
        mean, se = self.m
        if mean - self.z * se > 0:
            return "horizontal"
        if mean + self.z * se < 0:
            return "vertical"
        return "undecided"


def domain_box(k1: int, k2: int, n: int) -> LatticeGeometry:
    """Free box with 2 k1 n + 1 columns and 2 k2 n + 1 rows."""
    return LatticeGeometry(2 * k1 * n + 1, 2 * k2 * n + 1, Boundary.FREE)


def domain_experiment(k1: int, k2: int, n: int, q: float, N, settings: ScanSettings = ScanSettings(),
                      z: float = 2.0) -> DomainVerdict:
    """Sign of E[m] on the free box; symmetric (random) starts so the boundary decides."""
    geo = domain_box(k1, k2, n)
    cfg = scan_config(q, N, geo, settings, "random")
    res = run_chains(cfg, settings.chains, settings.workers)
    s = summarize(res)
    return DomainVerdict(k1, k2, n, geo.width, geo.height, s["m"], z, tuple(summary_rows(cfg, res)))


# ------------------------------------------------------------------ surface tension


@dataclass(frozen=True)
class TensionRun:
    config: SamplerConfig
    estimates: tuple
    rows: tuple[dict, ...]


def tension_experiment(q: float, N, L: int, ks: Sequence[int], settings: ScanSettings = ScanSettings()
                       ) -> TensionRun:
    """tau_hat(k), xi_hat(k) on an L x L torus sampled in the horizontal state.

    Single-site heat bath from the all-H coloring (no cluster moves, so the
    chain stays in the horizontal phase); empty probabilities are averaged
    conditionally on the coloring.
    """
    geo = LatticeGeometry(L, L, Boundary.TORUS)
    cfg = SamplerConfig(geo, ActivityProfile(q, N), settings.sweeps, settings.burnin, settings.seed,
                        Kernel.COLORING, UpdateRule.HEAT_BATH, cluster=False, init="H", ks=tuple(ks))
    res = run_chains(cfg, settings.chains, settings.workers)
    est = surface_tension_estimates(res)
    extra = {}
    for tau, xi in est:
        extra[f"tau_{tau.k}"] = (tau.rate, tau.rate_stderr)
        extra[f"xi_{xi.k}"] = (xi.rate, xi.rate_stderr)
        extra[f"p_empty_v_{tau.k}"] = (tau.p_empty, tau.p_stderr)
        extra[f"p_empty_h_{xi.k}"] = (xi.p_empty, xi.p_stderr)
    return TensionRun(cfg, tuple(est), tuple(summary_rows(cfg, res, extra)))


def config_flags(config: SamplerConfig) -> dict:
    d = dataclasses.asdict(config)
    d["geometry"] = config.geometry.to_json()
    d["profile"] = {"q": config.profile.q, "N": str(config.profile.N)}
    d["kernel"] = config.kernel.value
    d["rule"] = config.rule.value
    d["ks"] = list(config.ks)
    return d
