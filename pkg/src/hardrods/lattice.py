"""Boxes, rod tilings, vacancy-split colorings and their weights.

Sites are indexed row-major from (0, 0): ``s = y * width + x``.  Horizontal
rods grow in +x, vertical rods in +y.  A tiling is also stored as two link
arrays: ``hl[s] = 1`` when s and its +x neighbour belong to one horizontal
rod, ``vl[s] = 1`` likewise for +y.  On a torus rods may cross the seam but
never close on themselves: a rod is at most ``L - 1`` long along an axis of
length ``L``.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .renewal import ActivityProfile, NormalizedWeights, normalized_weights, renewal_sequence

H, V = 0, 1


class Boundary(enum.Enum):
    FREE = "free"
    TORUS = "torus"


class Orientation(enum.Enum):
    H = "h"
    V = "v"
    NONE = "none"


@dataclass(frozen=True)
class LatticeGeometry:
    width: int
    height: int
    boundary: Boundary = Boundary.FREE

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("box dimensions must be >= 1")
        if isinstance(self.boundary, str):
            object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def site(self, x: int, y: int) -> int:
        return y * self.width + x

    def coords(self, s: int) -> tuple[int, int]:
        return s % self.width, s // self.width

    def right(self, s: int) -> int | None:
        x, y = self.coords(s)
        if x + 1 < self.width:
            return s + 1
        return self.site(0, y) if self.torus and self.width > 1 else None

    def down(self, s: int) -> int | None:
        x, y = self.coords(s)
        if y + 1 < self.height:
            return s + self.width
        return self.site(x, 0) if self.torus and self.height > 1 else None

    def rod_cap(self, orientation: Orientation) -> int:
        """Longest rod that fits along the axis without closing on itself."""
        L = self.width if orientation is Orientation.H else self.height
        return L - 1 if self.torus else L

    def rod_sites(self, x: int, y: int, orientation: Orientation, length: int) -> list[int] | None:
        if length == 1:
            return [self.site(x, y)]
        dx, dy = (1, 0) if orientation is Orientation.H else (0, 1)
        out = []
        for j in range(length):
            xx, yy = x + j * dx, y + j * dy
            if self.torus:
                xx, yy = xx % self.width, yy % self.height
            elif xx >= self.width or yy >= self.height:
                return None
            out.append(self.site(xx, yy))
        if len(set(out)) != len(out):
            return None
        return out

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "boundary": self.boundary.value}

    @classmethod
    def from_json(cls, d: dict) -> "LatticeGeometry":
        return cls(int(d["width"]), int(d["height"]), Boundary(d["boundary"]))

    def rotated(self) -> "LatticeGeometry":
        return LatticeGeometry(self.height, self.width, self.boundary)


@dataclass(frozen=True)
class Rod:
    x: int
    y: int
    orientation: Orientation
    length: int


@dataclass(frozen=True, eq=False)
class RodTiling:
    """A partition of the box into rods; vacancies are 1-rods without orientation."""

    geometry: LatticeGeometry
    rods: tuple[Rod, ...]

    def __post_init__(self):
        geo = self.geometry
        owner = np.full(geo.n_sites, -1, dtype=np.int64)
        for i, rod in enumerate(self.rods):
            if rod.length < 1:
                raise ValueError(f"rod {rod} has non-positive length")
            if (rod.length == 1) != (rod.orientation is Orientation.NONE):
                raise ValueError(f"rod {rod}: vacancies and only vacancies carry no orientation")
            if rod.length > 1 and rod.length > geo.rod_cap(rod.orientation):
                raise ValueError(f"rod {rod} does not fit (would wrap or leave the box)")
            if not (0 <= rod.x < geo.width and 0 <= rod.y < geo.height):
                raise ValueError(f"rod {rod} anchored outside the box")
            sites = geo.rod_sites(rod.x, rod.y, rod.orientation, rod.length)
            if sites is None:
                raise ValueError(f"rod {rod} leaves the box")
            for s in sites:
                if owner[s] != -1:
                    raise ValueError(f"site {geo.coords(s)} covered twice")
                owner[s] = i
        if np.any(owner < 0):
            missing = geo.coords(int(np.argmin(owner)))
            raise ValueError(f"site {missing} not covered")
        object.__setattr__(self, "_owner", owner)

    @property
    def site_to_rod(self) -> np.ndarray:
        return self._owner

    @classmethod
    def all_vacant(cls, geometry: LatticeGeometry) -> "RodTiling":
        return cls(geometry, tuple(Rod(x, y, Orientation.NONE, 1) for y in range(geometry.height) for x in range(geometry.width)))

    def to_links(self) -> tuple[np.ndarray, np.ndarray]:
        geo = self.geometry
        hl = np.zeros(geo.n_sites, dtype=np.uint8)
        vl = np.zeros(geo.n_sites, dtype=np.uint8)
        for rod in self.rods:
            if rod.length < 2:
                continue
            sites = geo.rod_sites(rod.x, rod.y, rod.orientation, rod.length)
            arr = hl if rod.orientation is Orientation.H else vl
            for s in sites[:-1]:
                arr[s] = 1
        return hl, vl

    @classmethod
    def from_links(cls, geometry: LatticeGeometry, hl, vl) -> "RodTiling":
        hl = np.asarray(hl, dtype=np.uint8)
        vl = np.asarray(vl, dtype=np.uint8)
        geo = geometry
        rods = []
        for s in range(geo.n_sites):
            x, y = geo.coords(s)
            left = geo.site((x - 1) % geo.width, y) if (x > 0 or geo.torus) and geo.width > 1 else None
            up = geo.site(x, (y - 1) % geo.height) if (y > 0 or geo.torus) and geo.height > 1 else None
            in_h = hl[s] or (left is not None and hl[left])
            in_v = vl[s] or (up is not None and vl[up])
            if in_h and in_v:
                raise ValueError(f"site {(x, y)} linked both ways")
            if not in_h and not in_v:
                rods.append(Rod(x, y, Orientation.NONE, 1))
            elif in_h and not (left is not None and hl[left]):
                k, t = 1, s
                while hl[t]:
                    t = geo.right(t)
                    k += 1
                    if k > geo.width:
                        raise ValueError("horizontal rod closes on itself")
                rods.append(Rod(x, y, Orientation.H, k))
            elif in_v and not (up is not None and vl[up]):
                k, t = 1, s
                while vl[t]:
                    t = geo.down(t)
                    k += 1
                    if k > geo.height:
                        raise ValueError("vertical rod closes on itself")
                rods.append(Rod(x, y, Orientation.V, k))
        return cls(geometry, tuple(rods))

    def key(self) -> bytes:
        hl, vl = self.to_links()
        return hl.tobytes() + vl.tobytes()

    def to_json(self) -> dict:
        return {
            "geometry": self.geometry.to_json(),
            "rods": [{"x": r.x, "y": r.y, "dir": r.orientation.value, "len": r.length} for r in self.rods],
        }

    @classmethod
    def from_json(cls, d: dict | str) -> "RodTiling":
        if isinstance(d, str):
            d = json.loads(d)
        geo = LatticeGeometry.from_json(d["geometry"])
        rods = tuple(Rod(int(r["x"]), int(r["y"]), Orientation(r["dir"]), int(r["len"])) for r in d["rods"])
        return cls(geo, rods)

    def rotated(self) -> "RodTiling":
        """Quarter turn (x, y) -> (h-1-y, x); horizontal rods become vertical."""
        geo = self.geometry
        new = geo.rotated()
        hl, vl = self.to_links()
        nhl = np.zeros_like(hl)
        nvl = np.zeros_like(vl)
        for s in range(geo.n_sites):
            x, y = geo.coords(s)
            if hl[s]:
                nvl[new.site(geo.height - 1 - y, x)] = 1
            if vl[s]:
                xx = (geo.height - 2 - y) % geo.height
                nhl[new.site(xx, x)] = 1
        return RodTiling.from_links(new, nhl, nvl)


def rod_counts(tiling: RodTiling) -> Counter:
    """N_k: number of k-rods (k = 1 counts vacancies)."""
    return Counter(rod.length for rod in tiling.rods)


def log_tiling_weight(tiling: RodTiling, profile: ActivityProfile) -> float:
    counts = rod_counts(tiling)
    if profile.bounded and any(k > profile.N for k in counts):
        return -math.inf
    n1 = counts.get(1, 0)
    rest = sum(c for k, c in counts.items() if k >= 2)
    return n1 * math.log(2.0 * profile.q) + rest * math.log(profile.q)


def tiling_weight(tiling: RodTiling, profile: ActivityProfile) -> float:
    """(2q)**N_1 * q**(sum_{k>=2} N_k), or 0 if some rod is longer than N."""
    lw = log_tiling_weight(tiling, profile)
    return 0.0 if lw == -math.inf else math.exp(lw)


@dataclass(frozen=True, eq=False)
class Coloring:
    geometry: LatticeGeometry
    colors: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.colors, dtype=np.uint8).ravel()
        if c.size != self.geometry.n_sites:
            raise ValueError("coloring size does not match the box")
        if np.any(c > 1):
            raise ValueError("colors must be H (0) or V (1)")
        object.__setattr__(self, "colors", c)

    @classmethod
    def uniform(cls, geometry: LatticeGeometry, color: int) -> "Coloring":
        return cls(geometry, np.full(geometry.n_sites, color, dtype=np.uint8))

    def grid(self) -> np.ndarray:
        return self.colors.reshape(self.geometry.height, self.geometry.width)

    def rotated(self) -> "Coloring":
        """Quarter turn with H and V swapped."""
        g = self.grid()
        rot = np.rot90(g, k=-1)
        return Coloring(self.geometry.rotated(), 1 - rot)

    def to_json(self) -> dict:
        rows = ["".join("HV"[c] for c in row) for row in self.grid()]
        return {"geometry": self.geometry.to_json(), "colors": rows}

    @classmethod
    def from_json(cls, d: dict) -> "Coloring":
        geo = LatticeGeometry.from_json(d["geometry"])
        arr = np.array([[0 if ch == "H" else 1 for ch in row] for row in d["colors"]], dtype=np.uint8)
        return cls(geo, arr.ravel())


@dataclass(frozen=True)
class Segment:
    orientation: Orientation
    x: int
    y: int
    length: int
    cyclic: bool = False


def _runs(line: np.ndarray, target: int, cyclic: bool) -> list[tuple[int, int, bool]]:
    """(start, length, wraps_fully) for maximal runs of ``target``."""
    L = line.size
    if np.all(line == target):
        return [(0, L, cyclic)]
    out = []
    if cyclic:
        start0 = int(np.nonzero(line != target)[0][0]) + 1
        order = [(start0 + i) % L for i in range(L)]
    else:
        order = list(range(L))
    i = 0
    while i < L:
        if line[order[i]] == target:
            j = i
            while j < L and line[order[j]] == target:
                j += 1
            out.append((order[i], j - i, False))
            i = j
        else:
            i += 1
    return out


def segments_of(coloring: Coloring) -> tuple[Segment, ...]:
    """Maximal H runs along rows and V runs along columns.

    On a torus a row that is entirely H (column entirely V) is one cyclic segment.
    """
    geo = coloring.geometry
    grid = coloring.grid()
    segs = []
    for y in range(geo.height):
        for start, n, cyc in _runs(grid[y], H, geo.torus):
            segs.append(Segment(Orientation.H, start, y, n, cyc))
    for x in range(geo.width):
        for start, n, cyc in _runs(grid[:, x], V, geo.torus):
            segs.append(Segment(Orientation.V, x, start, n, cyc))
    return tuple(segs)


def z1d(n: int, profile: ActivityProfile, cap: int | None = None) -> float:
    """Open-segment partition function: compositions of n, parts <= min(N, cap), weight q each."""
    K = profile.max_length(cap)
    Z = [1.0]
    for m in range(1, n + 1):
        top = m if K is None else min(m, K)
        Z.append(profile.q * sum(Z[m - k] for k in range(1, top + 1)))
    return Z[n]


def z1d_ring(L: int, profile: ActivityProfile) -> float:
    """Ring of L sites filled by rods of length <= min(N, L-1).

    Conditioning on the rod that covers a marked site: it has length k and k
    possible placements, and the remaining L-k sites form an open segment.
    """
    K = profile.max_length(max(L - 1, 1))
    return sum(k * profile.q * z1d(L - k, profile) for k in range(1, K + 1))


def coloring_weight(coloring: Coloring, profile: ActivityProfile) -> float:
    """Product over segments of the 1D partition functions (split vacancies weigh q)."""
    w = 1.0
    for seg in segments_of(coloring):
        w *= z1d_ring(seg.length, profile) if seg.cyclic else z1d(seg.length, profile)
    return w


class SegmentTables:
    """Log partition functions and break probabilities for segments up to ``max_len``.

    Built from the renewal sequence of the tilted weights, so nothing
    overflows: log Z(n) = log g_n - n log s.
    """

    def __init__(self, profile: ActivityProfile, max_len: int):
        self.profile = profile
        self.max_len = max_len
        self.weights: NormalizedWeights = normalized_weights(profile)
        self.log_s = math.log(self.weights.tilt)
        self.f = self.weights.f_array(max_len)
        self.g = renewal_sequence(self.weights, max_len).g
        n = np.arange(max_len + 1)
        self.log_z = np.log(self.g) - n * self.log_s
        self.ring = np.zeros(max_len + 1)
        for L in range(1, max_len + 1):
            K = profile.max_length(max(L - 1, 1))
            k = np.arange(1, K + 1)
            self.ring[L] = float(np.sum(k * self.f[k] * self.g[L - k]))
        with np.errstate(divide="ignore"):
            self.log_ring = np.log(self.ring) - n * self.log_s
        self.ring_break = np.zeros(max_len + 1)
        for L in range(2, max_len + 1):
            full = self.f[L] if (profile.max_length() is None or L <= profile.N) else 0.0
            self.ring_break[L] = (self.g[L] - full) / self.ring[L]

    @property
    def unbounded(self) -> bool:
        return not self.profile.bounded

    def break_probability(self, i: int, n: int) -> float:
        """P(no rod across the bond after the i-th site of an open segment of length n)."""
        return self.g[i] * self.g[n - i] / self.g[n]


def log_coloring_weight(coloring: Coloring, profile: ActivityProfile, tables: SegmentTables | None = None) -> float:
    geo = coloring.geometry
    if tables is None:
        tables = SegmentTables(profile, max(geo.width, geo.height))
    total = 0.0
    for seg in segments_of(coloring):
        total += tables.log_ring[seg.length] if seg.cyclic else tables.log_z[seg.length]
    return total


def tiling_coloring(tiling: RodTiling, vacancy_colors: np.ndarray | None = None) -> Coloring:
    """The coloring induced by a tiling once each vacancy is assigned a species."""
    geo = tiling.geometry
    colors = np.zeros(geo.n_sites, dtype=np.uint8)
    vac = 0
    for rod in tiling.rods:
        sites = geo.rod_sites(rod.x, rod.y, rod.orientation, rod.length)
        if rod.orientation is Orientation.NONE:
            colors[sites[0]] = 0 if vacancy_colors is None else vacancy_colors[vac]
            vac += 1
        else:
            colors[sites] = H if rod.orientation is Orientation.H else V
    return Coloring(geo, colors)
