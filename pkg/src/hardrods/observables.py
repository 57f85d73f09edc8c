"""Per-sample observables, dual segments and the statistics built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import Orientation, RodTiling, rod_counts

OBS_NAMES = ("horiz_frac", "vert_frac", "vacancy_frac", "m", "origin_horizontal")


@dataclass(frozen=True)
class ObservableRecord:
    horiz_frac: float
    vert_frac: float
    vacancy_frac: float
    m: float
    rod_length_histogram: dict[int, int]
    origin_horizontal: bool


def measure(tiling: RodTiling) -> ObservableRecord:
    """Site fractions by rod orientation; vacancies count in neither."""
    geo = tiling.geometry
    n = geo.n_sites
    nh = sum(r.length for r in tiling.rods if r.orientation is Orientation.H)
    nv = sum(r.length for r in tiling.rods if r.orientation is Orientation.V)
    nvac = n - nh - nv
    origin = tiling.rods[int(tiling.site_to_rod[0])].orientation is Orientation.H
    return ObservableRecord(nh / n, nv / n, nvac / n, (nh - nv) / n, dict(sorted(rod_counts(tiling).items())), origin)


@dataclass(frozen=True)
class DualSegment:
    """k dual points starting at (x + 1/2, y + 1/2), stacked along y (``V``) or x (``H``)."""

    orientation: Orientation
    length: int
    x: int
    y: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("dual segment length must be >= 1")
        if self.orientation is Orientation.NONE:
            raise ValueError("dual segments are horizontal or vertical")

    def crossing_bonds(self, tiling_geometry) -> list[int]:
        """Sites s whose +x (for V) or +y (for H) bond a rod must use to meet the segment.

        A horizontal rod through (x, y) and (x + 1, y) meets the vertical
        segment exactly when y0 < y < y0 + k (open squares around each site).
        """
        geo = tiling_geometry
        k = self.length
        if self.orientation is Orientation.V:
            cells = [(self.x, self.y + j) for j in range(1, k)]
            if not geo.torus and not (0 <= self.x <= geo.width - 2 and 0 <= self.y and self.y + k - 1 <= geo.height - 2):
                raise ValueError(f"{self} is not inside the dual box")
        else:
            cells = [(self.x + j, self.y) for j in range(1, k)]
            if not geo.torus and not (0 <= self.y <= geo.height - 2 and 0 <= self.x and self.x + k - 1 <= geo.width - 2):
                raise ValueError(f"{self} is not inside the dual box")
        return [geo.site(cx % geo.width, cy % geo.height) for cx, cy in cells]


def segment_empty(tiling: RodTiling, J: DualSegment) -> bool:
    """True when no rod of length >= 2 meets the dual segment."""
    hl, vl = tiling.to_links()
    links = hl if J.orientation is Orientation.V else vl
    return not any(links[s] for s in J.crossing_bonds(tiling.geometry))


# ------------------------------------------------------------------ statistics


def batch_means(x: np.ndarray, n_batches: int = 32) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    b = min(n_batches, n)
    if b < 2:
        return mean, math.nan
    size = n // b
    means = x[: size * b].reshape(b, size).mean(axis=1)
    return mean, float(means.std(ddof=1) / math.sqrt(b))


def pooled(estimates: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Equal-weight combination of independent chain estimates."""
    m = np.array([e[0] for e in estimates])
    s = np.array([e[1] for e in estimates])
    k = m.size
    if k == 1:
        return float(m[0]), float(s[0])
    se_within = math.sqrt(float(np.sum(s**2))) / k
    se_between = float(m.std(ddof=1) / math.sqrt(k))
    return float(m.mean()), max(se_within, se_between)


def series_estimate(series: Sequence[np.ndarray], n_batches: int = 32) -> tuple[float, float]:
    return pooled([batch_means(x, n_batches) for x in series])


def wilson_interval(p: float, n_eff: float, z: float = 2.0) -> tuple[float, float]:
    """Wilson score interval for a proportion with an effective sample size."""
    if not n_eff > 0 or math.isnan(p):
        return 0.0, 1.0
    denom = 1.0 + z * z / n_eff
    centre = (p + z * z / (2 * n_eff)) / denom
    half = z * math.sqrt(p * (1 - p) / n_eff + z * z / (4 * n_eff * n_eff)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class TensionEstimate:
    k: int
    p_empty: float
    p_stderr: float
    rate: float
    rate_stderr: float
    interval: tuple[float, float]
    degenerate: bool

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "p_empty": self.p_empty,
            "p_stderr": self.p_stderr,
            "rate": self.rate,
            "rate_stderr": self.rate_stderr,
            "interval": list(self.interval),
            "degenerate": self.degenerate,
        }


def _rate(k: int, series: Sequence[np.ndarray], z: float) -> TensionEstimate:
    p, se = series_estimate(series)
    if not p > 0:
        return TensionEstimate(k, p, se, math.inf, math.nan, (math.nan, math.inf), True)
    rate = -math.log(p) / k
    rate_se = se / (k * p)
    n_eff = p * (1 - p) / se**2 if se > 0 else math.inf
    lo, hi = wilson_interval(p, n_eff, z) if math.isfinite(n_eff) else (p, p)
    interval = (-math.log(hi) / k if hi > 0 else math.inf, -math.log(lo) / k if lo > 0 else math.inf)
    return TensionEstimate(k, p, se, rate, rate_se, interval, False)


def surface_tension_estimates(results: Sequence, ks: Sequence[int] | None = None, z: float = 2.0
                              ) -> list[tuple[TensionEstimate, TensionEstimate]]:
    """(tau_hat(k), xi_hat(k)) with tau from J^v_k and xi from J^h_k.

    ``results`` are chain results that recorded empty probabilities for
    ``config.ks``; error bars are batch means propagated through the log.
    """
    recorded = list(results[0].config.ks)
    ks = recorded if ks is None else list(ks)
    out = []
    for k in ks:
        i = recorded.index(k)
        tau = _rate(k, [r.pv[:, i] for r in results], z)
        xi = _rate(k, [r.ph[:, i] for r in results], z)
        out.append((tau, xi))
    return out
