"""Markov chains for the hard-rod measure and the exact segment filler.

Two kernels target the same measure:

* split/merge Metropolis on rod tilings (any N);
* single-site flips on vacancy-split colorings, with rods filled in exactly
  segment by segment whenever a sample is measured.  For N = inf the coloring
  weight is an Ising weight times a boundary factor, so Wolff cluster moves
  are added with that factor handled by an acceptance step.

Randomness comes from ``numpy.random.Generator(PCG64)``; every draw is made in
Python and handed to the compiled loops, so a seed fixes the whole stream.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import (
    Coloring,
    LatticeGeometry,
    Orientation,
    RodTiling,
    SegmentTables,
    H,
    V,
)
from .renewal import ActivityProfile

RNG_ID = "numpy.random.PCG64"
QC = 1.0 / (2.0 + 2.0 * math.sqrt(2.0))
BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))
N_OBS = 5  # horiz_frac, vert_frac, vacancy_frac, m, origin_horizontal


def beta_of_q(q: float) -> float:
    """Inverse temperature with exp(-4 beta) = q / (1 + q)."""
    if not q > 0:
        raise ValueError("fugacity must be positive")
    return 0.25 * math.log1p(1.0 / q)


@dataclass(frozen=True)
class IsingMap:
    beta: float
    qc: float = QC
    betac: float = BETA_C

    @classmethod
    def from_q(cls, q: float) -> "IsingMap":
        return cls(beta_of_q(q))

    @property
    def bond_ratio(self) -> float:
        """exp(-2 beta): weight of one unit of contour."""
        return math.exp(-2.0 * self.beta)


def make_rng(seed: int | np.random.SeedSequence, chain: int = 0) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(ss.spawn(chain + 1)[chain]))


class Kernel(enum.Enum):
    SPLIT_MERGE = "split_merge"
    COLORING = "coloring"


class UpdateRule(enum.Enum):
    METROPOLIS = "metropolis"
    HEAT_BATH = "heat_bath"


def valid_bonds(geometry: LatticeGeometry) -> np.ndarray:
    """Bond ids: s for the +x bond at s, n + s for the +y bond."""
    n = geometry.n_sites
    out = [s for s in range(n) if geometry.right(s) is not None]
    out += [n + s for s in range(n) if geometry.down(s) is not None]
    return np.asarray(out, dtype=np.int64)


def _caps(geometry: LatticeGeometry, profile: ActivityProfile) -> tuple[int, int]:
    ch = profile.max_length(geometry.rod_cap(Orientation.H))
    cv = profile.max_length(geometry.rod_cap(Orientation.V))
    return max(ch, 1), max(cv, 1)


def _log_weights(geometry: LatticeGeometry, profile: ActivityProfile) -> np.ndarray:
    return profile.log_model_weights(max(geometry.width, geometry.height) + 1)


# ------------------------------------------------------------------ filling


@dataclass
class _FillTables:
    tables: SegmentTables
    f: np.ndarray
    g: np.ndarray
    K: int
    unbounded: bool
    qg: float

    @classmethod
    def build(cls, profile: ActivityProfile, max_len: int) -> "_FillTables":
        t = SegmentTables(profile, max(max_len, 2))
        Kmax = profile.max_length(t.max_len)
        return cls(t, t.f, t.g, int(Kmax), not profile.bounded, t.weights.q)


@functools.lru_cache(maxsize=64)
def _cached_fill_tables(profile: ActivityProfile, n: int) -> _FillTables:
    return _FillTables.build(profile, n)


def fill_segment(n: int, orientation: Orientation, profile: ActivityProfile, rng: np.random.Generator,
                 cyclic: bool = False) -> list[int]:
    """Exact sample of the rod lengths filling a segment of n sites, in order along it.

    For a cyclic segment the first entry is the rod covering the segment's
    first site, listed from its own first site.
    """
    if n < 1:
        raise ValueError("segment length must be >= 1")
    ft = _cached_fill_tables(profile, n)
    line = np.arange(n, dtype=np.int64)
    links = np.zeros(n, dtype=np.uint8)
    u = rng.random(2 * n + 4)
    if cyclic:
        K.fill_ring(line, n, links, ft.f, ft.g, ft.tables.ring[n], ft.K, u, 0, np.empty(n, dtype=np.int64))
    else:
        K.fill_open(line, n, links, ft.f, ft.g, ft.K, ft.unbounded, ft.qg, u, 0)
    return _lengths_from_links(links, cyclic)


def _lengths_from_links(links: np.ndarray, cyclic: bool) -> list[int]:
    n = links.size
    start = 0
    if cyclic and n > 1:
        # first site of the rod covering site 0
        while links[(start - 1) % n] and start > -n:
            start -= 1
    out, k = [], 1
    for i in range(n):
        j = (start + i) % n
        if i < n - 1 and links[j]:
            k += 1
        else:
            out.append(k)
            k = 1
    return out


# ------------------------------------------------------------------ chains


@dataclass
class Batch:
    obs: np.ndarray
    pv: np.ndarray
    ph: np.ndarray
    codes: np.ndarray


def _empty_batch(n_sweeps: int, n_ks: int, codes: bool, measure: bool) -> Batch:
    m = n_sweeps if measure else 0
    return Batch(
        np.zeros((m, N_OBS)),
        np.zeros((m, n_ks)),
        np.zeros((m, n_ks)),
        np.zeros(m if codes else 0, dtype=np.int64),
    )


class SplitMergeChain:
    """Metropolis split/merge moves on the link representation of a tiling."""

    def __init__(self, geometry: LatticeGeometry, profile: ActivityProfile, tiling: RodTiling | None = None,
                 ks: tuple[int, ...] = (), record_codes: bool = False):
        self.geometry = geometry
        self.profile = profile
        tiling = tiling or RodTiling.all_vacant(geometry)
        self.hl, self.vl = tiling.to_links()
        self.bonds = valid_bonds(geometry)
        self.logw = _log_weights(geometry, profile)
        self.cap_h, self.cap_v = _caps(geometry, profile)
        self.ks = np.asarray(ks, dtype=np.int64)
        self.record_codes = record_codes
        self.hist = np.zeros(max(geometry.width, geometry.height) + 2, dtype=np.int64)
        self.accepted = 0
        self.proposed = 0

    def tiling(self) -> RodTiling:
        return RodTiling.from_links(self.geometry, self.hl, self.vl)

    def step(self, rng: np.random.Generator, moves: int = 1) -> int:
        geo = self.geometry
        if self.bonds.size == 0:
            return 0
        idx = rng.integers(0, self.bonds.size, moves)
        u = rng.random(moves)
        acc = K.sm_steps(self.hl, self.vl, geo.width, geo.height, geo.torus, self.bonds, self.logw,
                         self.cap_h, self.cap_v, idx, u)
        self.accepted += acc
        self.proposed += moves
        return acc

    def run(self, rng: np.random.Generator, sweeps: int, measure: bool) -> Batch:
        geo = self.geometry
        n = geo.n_sites
        out = _empty_batch(sweeps, self.ks.size, self.record_codes, measure)
        if self.bonds.size == 0:
            idx = np.zeros(sweeps * n, dtype=np.int64)
            u = np.full(sweeps * n, 2.0)
            bonds = np.zeros(1, dtype=np.int64)
        else:
            idx = rng.integers(0, self.bonds.size, sweeps * n)
            u = rng.random(sweeps * n)
            bonds = self.bonds
        K.sm_run(self.hl, self.vl, geo.width, geo.height, geo.torus, bonds, self.logw, self.cap_h, self.cap_v,
                 idx, u, n, measure, out.obs, self.ks, out.pv, out.ph, out.codes, self.hist)
        self.proposed += sweeps * n
        return out


class ColoringChain:
    """Single-site flips on colorings (optionally Wolff moves for N = inf)."""

    def __init__(self, geometry: LatticeGeometry, profile: ActivityProfile, colors: np.ndarray | None = None,
                 rule: UpdateRule = UpdateRule.METROPOLIS, cluster: bool = False,
                 ks: tuple[int, ...] = (), record_codes: bool = False):
        if cluster and profile.bounded:
            raise ValueError("cluster moves are exact only for N = inf")
        self.geometry = geometry
        self.profile = profile
        self.rule = UpdateRule(rule)
        self.cluster = cluster
        self.color = np.zeros(geometry.n_sites, dtype=np.uint8) if colors is None else np.array(colors, dtype=np.uint8)
        L = max(geometry.width, geometry.height)
        self.fill = _FillTables.build(profile, L)
        t = self.fill.tables
        self.log_z = t.log_z
        w, h = geometry.width, geometry.height
        self.log_ring_h = float(t.log_ring[w])
        self.log_ring_v = float(t.log_ring[h])
        self.ring_h = float(t.ring[w])
        self.ring_v = float(t.ring[h])
        self.ring_break_h = float(t.ring_break[w]) if w >= 2 else 1.0
        self.ring_break_v = float(t.ring_break[h]) if h >= 2 else 1.0
        q = profile.q
        self.p_add = 1.0 - math.sqrt(q / (1.0 + q))
        self.half_log_qg = 0.5 * math.log(q / (1.0 + q))
        self.ring_corr_h = self.log_ring_h - w * math.log1p(q)
        self.ring_corr_v = self.log_ring_v - h * math.log1p(q)
        self.ks = np.asarray(ks, dtype=np.int64)
        self.record_codes = record_codes
        self.hist = np.zeros(L + 2, dtype=np.int64)
        self.hl = np.zeros(geometry.n_sites, dtype=np.uint8)
        self.vl = np.zeros(geometry.n_sites, dtype=np.uint8)
        self.cluster_flips = 0

    @property
    def fill_draws(self) -> int:
        geo = self.geometry
        return 2 * geo.n_sites + 2 * (geo.width + geo.height) + 8

    def coloring(self) -> Coloring:
        return Coloring(self.geometry, self.color.copy())

    def flip_logratio(self, s: int) -> float:
        geo = self.geometry
        return float(K.flip_logratio(self.color, s, geo.width, geo.height, geo.torus, self.log_z,
                                     self.log_ring_h, self.log_ring_v))

    def step(self, rng: np.random.Generator, flips: int = 1) -> int:
        geo = self.geometry
        sites = rng.integers(0, geo.n_sites, flips)
        u = rng.random(flips)
        rule = 0 if self.rule is UpdateRule.METROPOLIS else 1
        return K.coloring_steps(self.color, geo.width, geo.height, geo.torus, self.log_z, self.log_ring_h,
                                self.log_ring_v, sites, u, rule)

    def fill_tiling(self, rng: np.random.Generator) -> RodTiling:
        geo = self.geometry
        L = max(geo.width, geo.height) + 1
        ft = self.fill
        K.fill_coloring(self.color, geo.width, geo.height, geo.torus, self.hl, self.vl, ft.f, ft.g,
                        self.ring_h, self.ring_v, ft.K, ft.unbounded, ft.qg, rng.random(self.fill_draws),
                        np.empty(L, dtype=np.int64), np.empty(L, dtype=np.int64))
        return RodTiling.from_links(geo, self.hl, self.vl)

    def run(self, rng: np.random.Generator, sweeps: int, measure: bool) -> Batch:
        geo = self.geometry
        n = geo.n_sites
        out = _empty_batch(sweeps, self.ks.size, self.record_codes, measure)
        sites = rng.integers(0, n, sweeps * n)
        u_site = rng.random(sweeps * n)
        if self.cluster:
            seeds = rng.integers(0, n, sweeps)
            wbuf = rng.random(sweeps * 4 * n)
            wacc = rng.random(sweeps)
        else:
            seeds = np.zeros(0, dtype=np.int64)
            wbuf = np.zeros(0)
            wacc = np.zeros(0)
        fill_u = rng.random(sweeps * self.fill_draws) if measure else np.zeros(0)
        ft = self.fill
        rule = 0 if self.rule is UpdateRule.METROPOLIS else 1
        self.cluster_flips += K.coloring_run(
            self.color, geo.width, geo.height, geo.torus, self.log_z, self.log_ring_h, self.log_ring_v, rule,
            sites, u_site, self.cluster, self.p_add, seeds, wbuf, wacc,
            self.half_log_qg, self.ring_corr_h, self.ring_corr_v,
            measure, fill_u, ft.f, ft.g, self.ring_h, self.ring_v, self.ring_break_h, self.ring_break_v,
            ft.K, ft.unbounded, ft.qg,
            out.obs, self.ks, out.pv, out.ph, out.codes, self.hist, self.hl, self.vl)
        return out


@dataclass(frozen=True)
class SamplerConfig:
    geometry: LatticeGeometry
    profile: ActivityProfile
    sweeps: int
    burnin: int = 0
    seed: int = 0
    kernel: Kernel = Kernel.SPLIT_MERGE
    rule: UpdateRule = UpdateRule.METROPOLIS
    cluster: bool = False
    init: str = "vacant"  # vacant | H | V | random
    ks: tuple[int, ...] = ()
    record_codes: bool = False
    batch: int = 0  # sweeps per compiled call; 0 picks a size from the box

    def __post_init__(self):
        if self.sweeps <= 0:
            raise ValueError("sweeps must be positive")
        if self.burnin < 0:
            raise ValueError("burnin must be non-negative")
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        object.__setattr__(self, "rule", UpdateRule(self.rule))
        if self.init not in ("vacant", "H", "V", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.cluster and (self.kernel is not Kernel.COLORING or self.profile.bounded):
            raise ValueError("cluster moves need the coloring kernel and N = inf")

    def batch_size(self) -> int:
        if self.batch > 0:
            return self.batch
        per = self.geometry.n_sites * (8 if self.cluster else 4) + 16
        return int(max(1, min(4096, (1 << 21) // per)))


@dataclass
class ChainResult:
    config: SamplerConfig
    chain: int
    obs: np.ndarray
    pv: np.ndarray
    ph: np.ndarray
    codes: np.ndarray
    hist: np.ndarray
    stats: dict = field(default_factory=dict)
    final_links: tuple[np.ndarray, np.ndarray] | None = None

    def final_tiling(self) -> RodTiling:
        """Tiling at the last measured sweep."""
        return RodTiling.from_links(self.config.geometry, *self.final_links)


def _initial_colors(geometry: LatticeGeometry, init: str, rng: np.random.Generator) -> np.ndarray:
    n = geometry.n_sites
    if init == "H":
        return np.full(n, H, dtype=np.uint8)
    if init == "V":
        return np.full(n, V, dtype=np.uint8)
    return rng.integers(0, 2, n).astype(np.uint8)


def make_chain(config: SamplerConfig, rng: np.random.Generator):
    geo, prof = config.geometry, config.profile
    if config.kernel is Kernel.SPLIT_MERGE:
        tiling = None
        if config.init != "vacant":
            colors = ColoringChain(geo, prof)
            colors.color[:] = _initial_colors(geo, config.init, rng)
            tiling = colors.fill_tiling(rng)
        return SplitMergeChain(geo, prof, tiling, config.ks, config.record_codes)
    init = "random" if config.init == "vacant" else config.init
    return ColoringChain(geo, prof, _initial_colors(geo, init, rng), config.rule, config.cluster,
                         config.ks, config.record_codes)


def run_chain(config: SamplerConfig, chain: int = 0) -> ChainResult:
    """Run one chain; the stream depends only on (config, chain)."""
    rng = make_rng(config.seed, chain)
    mc = make_chain(config, rng)
    B = config.batch_size()
    done = 0
    while done < config.burnin:
        step = min(B, config.burnin - done)
        mc.run(rng, step, measure=False)
        done += step
    parts = []
    done = 0
    while done < config.sweeps:
        step = min(B, config.sweeps - done)
        parts.append(mc.run(rng, step, measure=True))
        done += step
    stats = {}
    if isinstance(mc, ColoringChain) and config.cluster:
        stats["cluster_flips"] = int(mc.cluster_flips)
    return ChainResult(
        config,
        chain,
        np.concatenate([p.obs for p in parts]),
        np.concatenate([p.pv for p in parts]),
        np.concatenate([p.ph for p in parts]),
        np.concatenate([p.codes for p in parts]),
        mc.hist.copy(),
        stats,
        (mc.hl.copy(), mc.vl.copy()),
    )


# ------------------------------------------------------------------ single steps


def split_merge_step(tiling: RodTiling, profile: ActivityProfile, rng: np.random.Generator) -> RodTiling:
    chain = SplitMergeChain(tiling.geometry, profile, tiling)
    chain.step(rng, 1)
    return chain.tiling()


def coloring_step(coloring: Coloring, profile: ActivityProfile, rng: np.random.Generator,
                  rule: UpdateRule = UpdateRule.METROPOLIS) -> Coloring:
    chain = ColoringChain(coloring.geometry, profile, coloring.colors, rule)
    chain.step(rng, 1)
    return chain.coloring()


def sample_n_infinity(geometry: LatticeGeometry, q: float, rng: np.random.Generator, sweeps: int = 200,
                      cluster: bool = True, colors: np.ndarray | None = None) -> RodTiling:
    """Ising heat bath (plus Wolff moves) at beta_of_q(q), then exact filling of every segment."""
    profile = ActivityProfile(q)
    if colors is None:
        colors = rng.integers(0, 2, geometry.n_sites).astype(np.uint8)
    chain = ColoringChain(geometry, profile, colors, UpdateRule.HEAT_BATH, cluster)
    chain.run(rng, sweeps, measure=False)
    return chain.fill_tiling(rng)
