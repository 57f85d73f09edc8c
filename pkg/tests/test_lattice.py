import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardrods.lattice import (
    H,
    V,
    Boundary,
    Coloring,
    LatticeGeometry,
    Orientation,
    Rod,
    RodTiling,
    SegmentTables,
    coloring_weight,
    log_coloring_weight,
    log_tiling_weight,
    rod_counts,
    segments_of,
    tiling_coloring,
    tiling_weight,
    z1d,
    z1d_ring,
)
from hardrods.renewal import INFINITE, ActivityProfile, normalized_weights, renewal_sequence

FREE, TORUS = Boundary.FREE, Boundary.TORUS


def box(w, h, boundary=FREE):
    return LatticeGeometry(w, h, boundary)


def all_colorings(geo):
    for bits in itertools.product((H, V), repeat=geo.n_sites):
        yield Coloring(geo, np.array(bits, dtype=np.uint8))


# ------------------------------------------------------------------ geometry and tilings


def test_geometry_rejects_empty():
    with pytest.raises(ValueError):
        LatticeGeometry(0, 3)


def test_row_major_indexing():
    geo = box(4, 3)
    assert geo.site(1, 2) == 9 and geo.coords(9) == (1, 2)
    assert geo.right(3) is None and geo.down(9) is None
    t = box(4, 3, TORUS)
    assert t.right(3) == 0 and t.down(9) == 1


def test_torus_rod_cap():
    t = box(5, 3, TORUS)
    assert t.rod_cap(Orientation.H) == 4 and t.rod_cap(Orientation.V) == 2
    with pytest.raises(ValueError):
        RodTiling(box(2, 1, TORUS), (Rod(0, 0, Orientation.H, 2),))


def test_rod_counts_examples():
    assert rod_counts(RodTiling.all_vacant(box(3, 3))) == {1: 9}
    one = RodTiling(box(2, 1), (Rod(0, 0, Orientation.H, 2),))
    assert rod_counts(one) == {2: 1}
    mixed = RodTiling(box(2, 2), (Rod(0, 0, Orientation.V, 2), Rod(1, 0, Orientation.NONE, 1), Rod(1, 1, Orientation.NONE, 1)))
    counts = rod_counts(mixed)
    assert counts[1] == 2 and counts[2] == 1
    assert sum(k * c for k, c in counts.items()) == 4


def test_invalid_tilings_rejected():
    geo = box(2, 2)
    with pytest.raises(ValueError):
        RodTiling(geo, (Rod(0, 0, Orientation.H, 2),))  # sites uncovered
    with pytest.raises(ValueError):
        RodTiling(geo, (Rod(0, 0, Orientation.H, 2), Rod(0, 0, Orientation.V, 2), Rod(1, 1, Orientation.NONE, 1)))
    with pytest.raises(ValueError):
        RodTiling(box(1, 1), (Rod(0, 0, Orientation.H, 1),))
    with pytest.raises(ValueError):
        RodTiling(box(2, 1), (Rod(0, 0, Orientation.H, 3),))


def test_tiling_weight_examples():
    prof = ActivityProfile(0.5, 2)
    assert tiling_weight(RodTiling.all_vacant(box(2, 1)), prof) == pytest.approx(1.0)
    assert tiling_weight(RodTiling(box(2, 1), (Rod(0, 0, Orientation.H, 2),)), prof) == pytest.approx(0.5)
    long_rod = RodTiling(box(3, 1), (Rod(0, 0, Orientation.H, 3),))
    assert tiling_weight(long_rod, prof) == 0.0
    assert log_tiling_weight(long_rod, prof) == -math.inf


def test_log_weight_large_system():
    geo = box(100, 100)
    lw = log_tiling_weight(RodTiling.all_vacant(geo), ActivityProfile(0.3))
    assert lw == pytest.approx(10_000 * math.log(0.6))


def random_tiling(geo, rng, N=4):
    """Greedy random tiling (row-major, rods right or down when room)."""
    taken = np.zeros(geo.n_sites, dtype=bool)
    rods = []
    for s in range(geo.n_sites):
        if taken[s]:
            continue
        x, y = geo.coords(s)
        options = [(Orientation.NONE, 1)]
        for orient in (Orientation.H, Orientation.V):
            for k in range(2, min(N, geo.rod_cap(orient)) + 1):
                sites = geo.rod_sites(x, y, orient, k)
                if sites is not None and not taken[sites].any():
                    options.append((orient, k))
        orient, k = options[rng.integers(len(options))]
        sites = geo.rod_sites(x, y, orient, k)
        taken[sites] = True
        rods.append(Rod(x, y, orient, k))
    return RodTiling(geo, tuple(rods))


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1))
def test_tiling_invariants(w, h, boundary, seed):
    geo = box(w, h, boundary)
    t = random_tiling(geo, np.random.default_rng(seed))
    counts = rod_counts(t)
    assert sum(k * c for k, c in counts.items()) == geo.n_sites
    hl, vl = t.to_links()
    back = RodTiling.from_links(geo, hl, vl)
    assert back.key() == t.key()
    assert RodTiling.from_json(t.to_json()).key() == t.key()
    r = t.rotated()
    assert rod_counts(r) == counts
    assert r.rotated().rotated().rotated().key() == t.key()
    prof = ActivityProfile(0.7, 4)
    assert log_tiling_weight(r, prof) == pytest.approx(log_tiling_weight(t, prof))


# ------------------------------------------------------------------ colorings and segments


def test_segments_all_h():
    segs = segments_of(Coloring.uniform(box(4, 4), H))
    assert len(segs) == 4
    assert all(s.orientation is Orientation.H and s.length == 4 and not s.cyclic for s in segs)


def test_segments_checkerboard():
    segs = segments_of(Coloring(box(2, 2), np.array([0, 1, 1, 0])))
    assert len(segs) == 4 and all(s.length == 1 for s in segs)


def test_segments_one_h_row():
    # top row H, rest V on a 3x3 free box; frozen by hand decomposition
    col = Coloring(box(3, 3), np.array([0, 0, 0, 1, 1, 1, 1, 1, 1]))
    segs = segments_of(col)
    hs = [s for s in segs if s.orientation is Orientation.H]
    vs = [s for s in segs if s.orientation is Orientation.V]
    assert [(s.length, s.y) for s in hs] == [(3, 0)]
    assert sorted(s.length for s in vs) == [2, 2, 2]
    assert all(s.y == 1 for s in vs)


def test_segments_torus_cyclic_and_wrapping_run():
    geo = box(4, 2, TORUS)
    col = Coloring(geo, np.array([0, 0, 0, 0, 0, 1, 0, 0]))
    segs = segments_of(col)
    row0 = [s for s in segs if s.orientation is Orientation.H and s.y == 0]
    assert len(row0) == 1 and row0[0].cyclic and row0[0].length == 4
    row1 = [s for s in segs if s.orientation is Orientation.H and s.y == 1]
    assert len(row1) == 1 and row1[0].length == 3 and row1[0].x == 2 and not row1[0].cyclic


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1))
def test_segments_partition_sites(w, h, boundary, seed):
    geo = box(w, h, boundary)
    col = Coloring(geo, np.random.default_rng(seed).integers(0, 2, geo.n_sites))
    cover = np.zeros(geo.n_sites, dtype=int)
    for s in segments_of(col):
        for j in range(s.length):
            if s.orientation is Orientation.H:
                site = geo.site((s.x + j) % w, s.y)
                assert col.colors[site] == H
            else:
                site = geo.site(s.x, (s.y + j) % h)
                assert col.colors[site] == V
            cover[site] += 1
    assert np.all(cover == 1)


def test_z1d_examples():
    for N in (2, 5, INFINITE):
        assert z1d(1, ActivityProfile(0.37, N)) == pytest.approx(0.37)
    assert z1d(3, ActivityProfile(1.0)) == pytest.approx(4.0)
    assert z1d(3, ActivityProfile(0.5, 2)) == pytest.approx(0.625)
    assert z1d(0, ActivityProfile(0.5)) == 1.0


@given(st.floats(0.05, 5.0), st.integers(1, 25))
def test_z1d_closed_form_infinite(q, n):
    assert z1d(n, ActivityProfile(q)) == pytest.approx(q * (1 + q) ** (n - 1), rel=1e-12)


def test_z1d_matches_renewal():
    q = 0.8
    w = normalized_weights(ActivityProfile(q))
    g = renewal_sequence(w, 30).g
    for n in range(31):
        assert z1d(n, ActivityProfile(q)) == pytest.approx((1 + q) ** n * g[n], rel=1e-12)


def ring_brute(L, q, N):
    """Direct sum over ring tilings: links on the L bonds of a cycle, no full ring."""
    total = 0.0
    cap = max(L - 1, 1) if N is INFINITE else min(N, max(L - 1, 1))
    for links in itertools.product((0, 1), repeat=L):
        if all(links):
            continue
        # rods = runs of linked bonds + 1; count rods and check length
        start = links.index(0) + 1
        lengths, run = [], 1
        for j in range(L):
            if links[(start + j) % L]:
                run += 1
            else:
                lengths.append(run)
                run = 1
        if max(lengths) <= cap:
            total += q ** len(lengths)
    return total


@pytest.mark.parametrize("L,q,N", [(1, 0.5, 3), (2, 0.5, INFINITE), (5, 0.3, 3), (6, 1.2, INFINITE), (7, 0.4, 2)])
def test_ring_partition_function(L, q, N):
    assert z1d_ring(L, ActivityProfile(q, N)) == pytest.approx(ring_brute(L, q, N), rel=1e-12)


def test_coloring_weight_1x2():
    geo = box(2, 1)
    for q in (0.1, 0.5, 2.0):
        prof = ActivityProfile(q)
        total = sum(coloring_weight(c, prof) for c in all_colorings(geo))
        assert total == pytest.approx(q + 4 * q * q, rel=1e-14)


@given(st.integers(1, 5), st.integers(1, 5), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1),
       st.floats(0.05, 3.0), st.sampled_from([2, 3, 6, INFINITE]))
def test_rotation_invariance(w, h, boundary, seed, q, N):
    geo = box(w, h, boundary)
    col = Coloring(geo, np.random.default_rng(seed).integers(0, 2, geo.n_sites))
    prof = ActivityProfile(q, N)
    assert coloring_weight(col.rotated(), prof) == pytest.approx(coloring_weight(col, prof), rel=1e-12)


@given(st.integers(1, 7), st.integers(1, 7), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1),
       st.floats(0.05, 3.0), st.sampled_from([2, 3, 6, INFINITE]))
def test_log_weight_matches_direct(w, h, boundary, seed, q, N):
    geo = box(w, h, boundary)
    col = Coloring(geo, np.random.default_rng(seed).integers(0, 2, geo.n_sites))
    prof = ActivityProfile(q, N)
    assert log_coloring_weight(col, prof) == pytest.approx(math.log(coloring_weight(col, prof)), rel=1e-11, abs=1e-11)


def test_segment_tables_break_probability():
    prof = ActivityProfile(0.4, 3)
    tab = SegmentTables(prof, 10)
    # P(no rod across bond i|i+1 in a length-n segment) by direct ratio of partition functions
    for n in range(2, 11):
        for i in range(1, n):
            direct = z1d(i, prof) * z1d(n - i, prof) / z1d(n, prof)
            assert tab.break_probability(i, n) == pytest.approx(direct, rel=1e-12)
    inf = SegmentTables(ActivityProfile(0.4), 10)
    assert inf.break_probability(3, 7) == pytest.approx(0.4 / 1.4, rel=1e-12)


def test_tiling_coloring_and_json():
    geo = box(3, 2)
    t = RodTiling(geo, (Rod(0, 0, Orientation.H, 2), Rod(2, 0, Orientation.V, 2), Rod(0, 1, Orientation.NONE, 1),
                        Rod(1, 1, Orientation.NONE, 1)))
    c = tiling_coloring(t, np.array([1, 0]))
    assert c.grid().tolist() == [[H, H, V], [V, H, V]]
    assert Coloring.from_json(c.to_json()).colors.tolist() == c.colors.tolist()
    assert c.to_json()["colors"] == ["HHV", "VHV"]
