"""Exhaustive ground truth for tiny systems.

Everything here enumerates: tilings, colorings, spin configurations and
explicit transition matrices.  Sizes are capped so a slip in a test cannot
hang the suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import (
    LatticeGeometry,
    Orientation,
    Rod,
    RodTiling,
    H,
    V,
    z1d,
    z1d_ring,
)
from .renewal import ActivityProfile

MAX_TILING_SITES = 20
MAX_COLORING_SITES = 20
MAX_STATES = 50_000


class TooLarge(ValueError):
    """The requested system is beyond exhaustive enumeration."""


@dataclass(frozen=True)
class _Placement:
    mask: int
    weight: float
    rod: Rod


class _Enumerator:
    """Tilings as: take the first uncovered site, choose the rod that covers it."""

    def __init__(self, geometry: LatticeGeometry, profile: ActivityProfile):
        if geometry.n_sites > MAX_TILING_SITES:
            raise TooLarge(f"{geometry.n_sites} sites exceeds the enumeration limit {MAX_TILING_SITES}")
        self.geometry = geometry
        self.full = (1 << geometry.n_sites) - 1
        self.covering: list[list[_Placement]] = [[] for _ in range(geometry.n_sites)]
        for s in range(geometry.n_sites):
            x, y = geometry.coords(s)
            self._add(Rod(x, y, Orientation.NONE, 1), profile)
            for o in (Orientation.H, Orientation.V):
                top = profile.max_length(geometry.rod_cap(o))
                for k in range(2, top + 1):
                    self._add(Rod(x, y, o, k), profile)
        self._z = lru_cache(maxsize=None)(self._partition)

    def _add(self, rod: Rod, profile: ActivityProfile):
        sites = self.geometry.rod_sites(rod.x, rod.y, rod.orientation, rod.length)
        if sites is None:
            return
        mask = 0
        for s in sites:
            mask |= 1 << s
        pl = _Placement(mask, profile.model_weight(rod.length), rod)
        for s in sites:
            self.covering[s].append(pl)

    @staticmethod
    def _first_free(mask: int) -> int:
        free = ~mask
        return (free & -free).bit_length() - 1

    def _partition(self, mask: int) -> float:
        if mask == self.full:
            return 1.0
        s = self._first_free(mask)
        total = 0.0
        for pl in self.covering[s]:
            if pl.mask & mask == 0:
                total += pl.weight * self._z(mask | pl.mask)
        return total

    def partition(self) -> float:
        return self._z(0)

    def walk(self, mask: int = 0, rods: tuple = (), weight: float = 1.0) -> Iterator[tuple[tuple[Rod, ...], float]]:
        if mask == self.full:
            yield rods, weight
            return
        s = self._first_free(mask)
        for pl in self.covering[s]:
            if pl.mask & mask == 0:
                yield from self.walk(mask | pl.mask, rods + (pl.rod,), weight * pl.weight)

    def first_rod_marginals(self) -> dict[Orientation, float]:
        """Probability of each orientation for the rod covering site 0."""
        out = {o: 0.0 for o in Orientation}
        for pl in self.covering[0]:
            out[pl.rod.orientation] += pl.weight * self._z(pl.mask)
        Z = self.partition()
        return {o: v / Z for o, v in out.items()}


def enumerate_tilings(geometry: LatticeGeometry, profile: ActivityProfile) -> tuple[float, Iterator[tuple[RodTiling, float]]]:
    """Partition function and a lazy iterator over (tiling, weight)."""
    en = _Enumerator(geometry, profile)

    def it():
        for rods, w in en.walk():
            yield RodTiling(geometry, rods), w

    return en.partition(), it()


def tiling_partition(geometry: LatticeGeometry, profile: ActivityProfile) -> float:
    return _Enumerator(geometry, profile).partition()


def tiling_distribution(geometry: LatticeGeometry, profile: ActivityProfile) -> dict[bytes, float]:
    """Probability of each tiling keyed by ``RodTiling.key()``."""
    Z, it = enumerate_tilings(geometry, profile)
    return {t.key(): w / Z for t, w in it}


def origin_marginals(geometry: LatticeGeometry, profile: ActivityProfile) -> dict[str, float]:
    m = _Enumerator(geometry, profile).first_rod_marginals()
    return {"horizontal": m[Orientation.H], "vertical": m[Orientation.V], "vacancy": m[Orientation.NONE]}


def marginal_horizontal_origin(geometry: LatticeGeometry, profile: ActivityProfile) -> float:
    """P(site 0 lies in a horizontal rod of length >= 2)."""
    return origin_marginals(geometry, profile)["horizontal"]


def marginal_vertical_origin(geometry: LatticeGeometry, profile: ActivityProfile) -> float:
    return origin_marginals(geometry, profile)["vertical"]


def marginal_vacancy_origin(geometry: LatticeGeometry, profile: ActivityProfile) -> float:
    return origin_marginals(geometry, profile)["vacancy"]


# ------------------------------------------------------------------ colorings


def _all_colorings(n: int) -> np.ndarray:
    if n > MAX_COLORING_SITES:
        raise TooLarge(f"2^{n} colorings is too many")
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _line_weights(L: int, target: int, cyclic: bool, profile: ActivityProfile) -> np.ndarray:
    """Product of 1D partition functions of the ``target`` runs, for every pattern of a line."""
    out = np.empty(1 << L)
    for code in range(1 << L):
        line = [(code >> i) & 1 for i in range(L)]
        if all(c == target for c in line):
            out[code] = z1d_ring(L, profile) if cyclic else z1d(L, profile)
            continue
        if cyclic:
            start = next(i for i, c in enumerate(line) if c != target)
            line = line[start:] + line[:start]
        w = 1.0
        for is_target, grp in itertools.groupby(line):
            if is_target == target:
                w *= z1d(len(list(grp)), profile)
        out[code] = w
    return out


def coloring_weights(geometry: LatticeGeometry, profile: ActivityProfile) -> np.ndarray:
    """coloring_weight for all 2^n colorings; index bit s is the color of site s."""
    w, h = geometry.width, geometry.height
    C = _all_colorings(geometry.n_sites).reshape(-1, h, w).astype(np.int64)
    row_w = _line_weights(w, H, geometry.torus, profile)
    col_w = _line_weights(h, V, geometry.torus, profile)
    out = np.ones(C.shape[0])
    pw = 1 << np.arange(w)
    ph = 1 << np.arange(h)
    for y in range(h):
        out *= row_w[C[:, y, :] @ pw]
    for x in range(w):
        out *= col_w[C[:, :, x] @ ph]
    return out


def coloring_partition(geometry: LatticeGeometry, profile: ActivityProfile) -> float:
    return float(np.sum(coloring_weights(geometry, profile)))


# ------------------------------------------------------------------ Ising


def contour_lengths(geometry: LatticeGeometry) -> np.ndarray:
    """Number of unequal nearest-neighbour pairs for every spin configuration."""
    S = _all_colorings(geometry.n_sites)
    length = np.zeros(S.shape[0], dtype=np.int64)
    for s in range(geometry.n_sites):
        for t in (geometry.right(s), geometry.down(s)):
            if t is not None and t != s:
                length += S[:, s] != S[:, t]
    return length


def ising_partition(geometry: LatticeGeometry, beta: float) -> float:
    """Sum over spin configurations of exp(-2 beta |contour|)."""
    length = contour_lengths(geometry)
    if math.isinf(beta):
        return float(np.sum(length == 0))
    return float(np.sum(np.exp(-2.0 * beta * length)))


# ------------------------------------------------------------------ chain checks


@dataclass(frozen=True)
class StationarityReport:
    kernel: str
    n_states: int
    max_deviation: float
    irreducible: bool
    aperiodic: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.irreducible and self.aperiodic and self.max_deviation <= self.tolerance

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel,
            "n_states": self.n_states,
            "max_deviation": self.max_deviation,
            "irreducible": self.irreducible,
            "aperiodic": self.aperiodic,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _stationary(P: np.ndarray) -> np.ndarray:
    """Least-squares solution of pi P = pi, sum pi = 1."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def split_merge_matrix(geometry: LatticeGeometry, profile: ActivityProfile) -> tuple[np.ndarray, np.ndarray, list[RodTiling]]:
    """Explicit transition matrix of one split/merge proposal, and the target measure."""
    from . import _kernels as K
    from .samplers import _caps, _log_weights, valid_bonds

    Z, it = enumerate_tilings(geometry, profile)
    states, mu = [], []
    for t, w in it:
        states.append(t)
        mu.append(w / Z)
    if len(states) > MAX_STATES:
        raise TooLarge(f"{len(states)} states")
    index = {t.key(): i for i, t in enumerate(states)}
    bonds = valid_bonds(geometry)
    logw = _log_weights(geometry, profile)
    cap_h, cap_v = _caps(geometry, profile)
    n = len(states)
    P = np.zeros((n, n))
    for i, t in enumerate(states):
        hl, vl = t.to_links()
        for b in bonds:
            kind, lr = K.sm_bond_move(hl, vl, geometry.width, geometry.height, geometry.torus, b, logw, cap_h, cap_v)
            if kind == 0:
                continue
            a = min(1.0, math.exp(lr))
            h2, v2 = hl.copy(), vl.copy()
            K.sm_apply(h2, v2, geometry.width, geometry.height, b, kind)
            j = index[h2.tobytes() + v2.tobytes()]
            P[i, j] += a / bonds.size
        P[i, i] += 1.0 - P[i].sum()
    return P, np.asarray(mu), states


def coloring_matrix(geometry: LatticeGeometry, profile: ActivityProfile, rule: str = "metropolis") -> tuple[np.ndarray, np.ndarray]:
    """Explicit matrix of one single-site coloring update and the coloring marginal."""
    from .samplers import ColoringChain, UpdateRule

    weights = coloring_weights(geometry, profile)
    n = geometry.n_sites
    if weights.size > MAX_STATES:
        raise TooLarge(f"{weights.size} states")
    chain = ColoringChain(geometry, profile, rule=UpdateRule(rule))
    P = np.zeros((weights.size, weights.size))
    for code in range(weights.size):
        chain.color[:] = (code >> np.arange(n)) & 1
        for s in range(n):
            d = chain.flip_logratio(s)
            if chain.rule is UpdateRule.METROPOLIS:
                a = min(1.0, math.exp(d))
            else:
                a = 1.0 / (1.0 + math.exp(-d))
            P[code, code ^ (1 << s)] += a / n
        P[code, code] += 1.0 - P[code].sum()
    return P, weights / weights.sum()


def chain_stationarity_check(geometry: LatticeGeometry, profile: ActivityProfile, kernel: str = "split_merge",
                             tolerance: float = 1e-10) -> StationarityReport:
    """Stationary law of the explicit kernel matrix versus the exact target.

    ``kernel`` is "split_merge", "coloring", "coloring_heat_bath" or
    "identity" (a negative control that must fail).
    """
    if kernel == "coloring":
        P, mu = coloring_matrix(geometry, profile, "metropolis")
    elif kernel == "coloring_heat_bath":
        P, mu = coloring_matrix(geometry, profile, "heat_bath")
    elif kernel in ("split_merge", "identity"):
        P, mu, _ = split_merge_matrix(geometry, profile)
        if kernel == "identity":
            P = np.eye(mu.size)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    pi = _stationary(P)
    ncomp, _ = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    irreducible = ncomp == 1
    aperiodic = irreducible and bool(np.any(np.diag(P) > 0))
    return StationarityReport(kernel, mu.size, float(np.max(np.abs(pi - mu))), irreducible, aperiodic, tolerance)
