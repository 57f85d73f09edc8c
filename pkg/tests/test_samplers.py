import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardrods import _kernels as K
from hardrods.lattice import (
    H,
    V,
    Boundary,
    Coloring,
    LatticeGeometry,
    Orientation,
    Rod,
    RodTiling,
    coloring_weight,
    log_coloring_weight,
    tiling_weight,
    z1d_ring,
)
from hardrods.observables import series_estimate
from hardrods.oracles import marginal_horizontal_origin, tiling_distribution
from hardrods.renewal import INFINITE, ActivityProfile
from hardrods.samplers import (
    BETA_C,
    QC,
    ColoringChain,
    IsingMap,
    Kernel,
    SamplerConfig,
    SplitMergeChain,
    UpdateRule,
    beta_of_q,
    coloring_step,
    fill_segment,
    make_rng,
    run_chain,
    sample_n_infinity,
    split_merge_step,
    valid_bonds,
)

FREE, TORUS = Boundary.FREE, Boundary.TORUS


def box(w, h, boundary=FREE):
    return LatticeGeometry(w, h, boundary)


# ------------------------------------------------------------------ Ising map


def test_beta_examples():
    assert beta_of_q(QC) == pytest.approx(0.5 * math.log(1 + math.sqrt(2)), abs=1e-12)
    assert beta_of_q(0.1) == pytest.approx(0.25 * math.log(11), abs=1e-15)
    assert beta_of_q(0.1) == pytest.approx(0.599474, abs=1e-6)
    assert beta_of_q(1e12) < 1e-12
    with pytest.raises(ValueError):
        beta_of_q(0.0)


@given(st.floats(1e-6, 1e6))
def test_ising_map_invariant(q):
    m = IsingMap.from_q(q)
    assert math.exp(-4 * m.beta) == pytest.approx(q / (1 + q), rel=1e-15)
    assert m.bond_ratio**2 == pytest.approx(q / (1 + q), rel=1e-14)
    assert m.qc == QC and m.betac == BETA_C


def test_rng_streams():
    a = make_rng(7, 0).random(4)
    b = make_rng(7, 0).random(4)
    c = make_rng(7, 1).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# ------------------------------------------------------------------ split / merge


def move(geo, profile, tiling, bond):
    hl, vl = tiling.to_links()
    sm = SplitMergeChain(geo, profile, tiling)
    return K.sm_bond_move(hl, vl, geo.width, geo.height, geo.torus, bond, sm.logw, sm.cap_h, sm.cap_v)


@pytest.mark.parametrize("q", [0.1, 0.5, 2.0])
def test_merge_two_vacancies_ratio(q):
    geo = box(2, 1)
    kind, lr = move(geo, ActivityProfile(q, 3), RodTiling.all_vacant(geo), 0)
    assert kind == 2
    assert math.exp(lr) == pytest.approx(1 / (4 * q), rel=1e-14)


@pytest.mark.parametrize("q", [0.1, 0.5, 2.0])
def test_split_three_rod_ratio(q):
    geo = box(3, 1)
    t = RodTiling(geo, (Rod(0, 0, Orientation.H, 3),))
    kind, lr = move(geo, ActivityProfile(q, 3), t, 1)
    assert kind == 1
    assert math.exp(lr) == pytest.approx(2 * q, rel=1e-14)


def test_perpendicular_bond_rejected():
    geo = box(2, 2)
    t = RodTiling(geo, (Rod(0, 0, Orientation.V, 2), Rod(1, 0, Orientation.V, 2)))
    kind, _ = move(geo, ActivityProfile(0.5, 3), t, 0)
    assert kind == 0
    # a vacancy next to a vertical rod cannot merge horizontally either
    t2 = RodTiling(geo, (Rod(0, 0, Orientation.V, 2), Rod(1, 0, Orientation.NONE, 1), Rod(1, 1, Orientation.NONE, 1)))
    assert move(geo, ActivityProfile(0.5, 3), t2, 0)[0] == 0


def test_merge_respects_N():
    geo = box(3, 1)
    t = RodTiling(geo, (Rod(0, 0, Orientation.H, 2), Rod(2, 0, Orientation.NONE, 1)))
    assert move(geo, ActivityProfile(0.5, 2), t, 1)[0] == 0
    assert move(geo, ActivityProfile(0.5, 3), t, 1)[0] == 2


@given(st.integers(1, 5), st.integers(1, 5), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1),
       st.sampled_from([2, 3, INFINITE]))
@settings(max_examples=40)
def test_moves_are_exact_weight_ratios(w, h, boundary, seed, N):
    geo = box(w, h, boundary)
    prof = ActivityProfile(0.6, N)
    rng = make_rng(seed)
    t = RodTiling.all_vacant(geo)
    for _ in range(30):
        new = split_merge_step(t, prof, rng)
        assert tiling_weight(new, prof) > 0
        t = new
    bonds = valid_bonds(geo)
    for b in bonds:
        kind, lr = move(geo, prof, t, int(b))
        if kind == 0:
            continue
        hl, vl = t.to_links()
        K.sm_apply(hl, vl, w, h, int(b), kind)
        other = RodTiling.from_links(geo, hl, vl)
        assert lr == pytest.approx(math.log(tiling_weight(other, prof) / tiling_weight(t, prof)), abs=1e-12)


# ------------------------------------------------------------------ coloring flips


@pytest.mark.parametrize("boundary", [FREE, TORUS])
@pytest.mark.parametrize("N", [2, 3, INFINITE])
def test_flip_logratio_matches_weights(boundary, N):
    geo = box(3, 3, boundary)
    prof = ActivityProfile(0.45, N)
    rng = np.random.default_rng(3)
    for _ in range(20):
        colors = rng.integers(0, 2, geo.n_sites).astype(np.uint8)
        chain = ColoringChain(geo, prof, colors)
        for s in range(geo.n_sites):
            flipped = colors.copy()
            flipped[s] ^= 1
            direct = math.log(coloring_weight(Coloring(geo, flipped), prof) / coloring_weight(Coloring(geo, colors), prof))
            assert chain.flip_logratio(s) == pytest.approx(direct, abs=1e-12)


def test_isolated_h_flip():
    # H at the centre, V elsewhere
    geo = box(3, 3)
    colors = np.ones(9, dtype=np.uint8)
    colors[4] = H
    prof = ActivityProfile(0.5)
    chain = ColoringChain(geo, prof, colors)
    q = 0.5
    # centre column goes from V-runs (1, 1) plus an H run of 1 to one V run of 3
    expected = math.log(q * (1 + q) ** 2 / (q * q * q))
    assert chain.flip_logratio(4) == pytest.approx(expected, abs=1e-12)


def test_all_h_two_by_two_flip():
    geo = box(2, 2)
    q = 0.5
    chain = ColoringChain(geo, ActivityProfile(q), np.zeros(4, dtype=np.uint8))
    # row 0 becomes a single H site and column 0 a single V site: q * q * q(1+q) over (q(1+q))^2
    expected = math.log(q / (1 + q))
    assert chain.flip_logratio(0) == pytest.approx(expected, abs=1e-12)


def test_coloring_step_changes_at_most_one_site():
    geo = box(4, 4)
    prof = ActivityProfile(0.4, 3)
    rng = make_rng(1)
    c = Coloring.uniform(geo, H)
    for _ in range(50):
        new = coloring_step(c, prof, rng)
        assert np.sum(new.colors != c.colors) <= 1
        c = new


def ising_length(geo, colors):
    total = 0
    for s in range(geo.n_sites):
        for t in (geo.right(s), geo.down(s)):
            if t is not None and t != s:
                total += colors[s] != colors[t]
    return total


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([FREE, TORUS]), st.integers(0, 2**32 - 1),
       st.floats(0.05, 3.0))
def test_weight_is_ising_plus_extra(w, h, boundary, seed, q):
    geo = box(w, h, boundary)
    prof = ActivityProfile(q)
    colors = np.random.default_rng(seed).integers(0, 2, geo.n_sites).astype(np.uint8)
    chain = ColoringChain(geo, prof, colors)
    extra = K.log_weight_extra(colors, w, h, geo.torus, chain.half_log_qg, chain.ring_corr_h, chain.ring_corr_v)
    qg = q / (1 + q)
    lhs = log_coloring_weight(Coloring(geo, colors), prof)
    rhs = geo.n_sites * math.log1p(q) + 0.5 * ising_length(geo, colors) * math.log(qg) + extra
    assert lhs == pytest.approx(rhs, abs=1e-10)


# ------------------------------------------------------------------ segment filling


def test_fill_single_site():
    rng = make_rng(0)
    for N in (2, INFINITE):
        assert fill_segment(1, Orientation.H, ActivityProfile(0.3, N), rng) == [1]


def freq(samples, target):
    return sum(s == target for s in samples) / len(samples)


def test_fill_two_sites_infinite():
    q = 0.7
    rng = make_rng(11)
    n = 40_000
    p = freq([fill_segment(2, Orientation.H, ActivityProfile(q), rng) for _ in range(n)], [1, 1])
    exact = q / (1 + q)
    assert abs(p - exact) < 4 * math.sqrt(exact * (1 - exact) / n)


def test_fill_three_sites_N2():
    rng = make_rng(12)
    n = 40_000
    samples = [fill_segment(3, Orientation.V, ActivityProfile(0.5, 2), rng) for _ in range(n)]
    assert all(max(s) <= 2 and sum(s) == 3 for s in samples)
    p = freq(samples, [1, 1, 1])
    assert abs(p - 0.2) < 4 * math.sqrt(0.2 * 0.8 / n)
    p12 = freq(samples, [1, 2])
    assert abs(p12 - 0.4) < 4 * math.sqrt(0.24 / n)


def test_fill_ring_distribution():
    # ring of 4 sites, N = 3: probability that the marked site is a vacancy
    q, L = 0.8, 4
    prof = ActivityProfile(q, 3)
    rng = make_rng(13)
    n = 40_000
    samples = [fill_segment(L, Orientation.H, prof, rng, cyclic=True) for _ in range(n)]
    assert all(sum(s) == L and max(s) <= 3 for s in samples)
    # the marked site is covered by a k-rod with probability k q Z_open(L-k) / Z_ring
    from hardrods.lattice import z1d

    for k in (1, 2, 3):
        exact = k * q * z1d(L - k, prof) / z1d_ring(L, prof)
        p = sum(s[0] == k for s in samples) / n
        assert abs(p - exact) < 4 * math.sqrt(exact * (1 - exact) / n)


def test_fill_rejects_empty():
    with pytest.raises(ValueError):
        fill_segment(0, Orientation.H, ActivityProfile(0.5), make_rng(0))


# ------------------------------------------------------------------ chains


def test_config_validation():
    geo = box(3, 3)
    with pytest.raises(ValueError):
        SamplerConfig(geo, ActivityProfile(0.5), sweeps=0)
    with pytest.raises(ValueError):
        SamplerConfig(geo, ActivityProfile(0.5), sweeps=10, burnin=-1)
    with pytest.raises(ValueError):
        SamplerConfig(geo, ActivityProfile(0.5, 3), 10, kernel=Kernel.COLORING, cluster=True)
    with pytest.raises(ValueError):
        SamplerConfig(geo, ActivityProfile(0.5), 10, kernel=Kernel.SPLIT_MERGE, cluster=True)


@pytest.mark.parametrize("kernel,cluster", [(Kernel.SPLIT_MERGE, False), (Kernel.COLORING, False), (Kernel.COLORING, True)])
def test_determinism(kernel, cluster):
    cfg = SamplerConfig(box(6, 5, TORUS), ActivityProfile(0.3), 300, 50, seed=42, kernel=kernel,
                        rule=UpdateRule.HEAT_BATH, cluster=cluster, init="random", ks=(2, 3), batch=37)
    a, b = run_chain(cfg, 1), run_chain(cfg, 1)
    assert np.array_equal(a.obs, b.obs) and np.array_equal(a.pv, b.pv)
    assert a.obs.tobytes() == b.obs.tobytes()
    c = run_chain(cfg, 0)
    assert not np.array_equal(a.obs, c.obs)


def test_observable_partition_of_unity():
    cfg = SamplerConfig(box(5, 4), ActivityProfile(0.5, 3), 200, kernel=Kernel.COLORING)
    obs = run_chain(cfg).obs
    assert np.allclose(obs[:, 0] + obs[:, 1] + obs[:, 2], 1.0, atol=1e-12)
    assert np.allclose(obs[:, 3], obs[:, 0] - obs[:, 1], atol=1e-12)


def tiling_codes(geo, profile):
    """Exact probability of each link code (bit s: +x link at s, bit n+s: +y link)."""
    n = geo.n_sites
    out = {}
    for key, p in tiling_distribution(geo, profile).items():
        bits = np.frombuffer(key, dtype=np.uint8)
        out[int(sum(int(b) << i for i, b in enumerate(bits)))] = p
    assert all(c < 1 << (2 * n) for c in out)
    return out


@pytest.mark.slow
@pytest.mark.parametrize("geo,N", [(box(2, 1), 2), (box(2, 2), 2), (box(2, 2), INFINITE)])
def test_coloring_sampler_tiling_distribution(geo, N):
    prof = ActivityProfile(0.5, N)
    exact = tiling_codes(geo, prof)
    cfg = SamplerConfig(geo, prof, 1_000_000, 100, seed=5, kernel=Kernel.COLORING, record_codes=True)
    codes = run_chain(cfg).codes
    assert set(np.unique(codes)) <= set(exact)
    for code, p in exact.items():
        est, se = series_estimate([(codes == code).astype(float)])
        assert abs(est - p) <= 4 * se + 1e-12, (code, est, p, se)


@pytest.mark.slow
@pytest.mark.parametrize("q", [0.3, 1.0])
def test_samplers_agree_on_4x4(q):
    geo, prof = box(4, 4), ActivityProfile(q, 4)
    exact = marginal_horizontal_origin(geo, prof)
    est = {}
    for kernel in (Kernel.SPLIT_MERGE, Kernel.COLORING):
        cfg = SamplerConfig(geo, prof, 200_000, 1000, seed=9, kernel=kernel)
        est[kernel] = series_estimate([run_chain(cfg).obs[:, 4]])
    (a, sa), (b, sb) = est.values()
    assert abs(a - b) <= 4 * math.hypot(sa, sb)
    assert abs(a - exact) <= 4 * sa and abs(b - exact) <= 4 * sb


def test_sample_n_infinity_small_box():
    geo = box(2, 2)
    q = 0.5
    rng = make_rng(21)
    n = 4000
    hits = 0
    for _ in range(n):
        t = sample_n_infinity(geo, q, rng, sweeps=3)
        hits += any(r.orientation is Orientation.H and 0 in geo.rod_sites(r.x, r.y, r.orientation, r.length)
                    for r in t.rods)
    exact = marginal_horizontal_origin(geo, ActivityProfile(q))
    assert abs(hits / n - exact) < 4 * math.sqrt(exact * (1 - exact) / n)


def test_sample_n_infinity_high_q_is_disordered():
    geo = box(8, 8, TORUS)
    t = sample_n_infinity(geo, 1e6, make_rng(2), sweeps=5)
    assert t.geometry == geo
    h = sum(r.length for r in t.rods if r.orientation is Orientation.H)
    v = sum(r.length for r in t.rods if r.orientation is Orientation.V)
    assert abs(h - v) < 40
