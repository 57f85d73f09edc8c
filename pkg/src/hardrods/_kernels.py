"""Compiled inner loops for the samplers.

All randomness is drawn outside (numpy PCG64) and passed in as arrays, so a
chain is a pure function of its seed.  Link arrays follow the convention of
``lattice``: ``hl[s]`` joins s to its +x neighbour, ``vl[s]`` to its +y one.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _right(s, w, h, torus):
    x = s % w
    if x + 1 < w:
        return s + 1
    if torus and w > 1:
        return s - x
    return -1


@njit(cache=True, inline="always")
def _left(s, w, h, torus):
    x = s % w
    if x > 0:
        return s - 1
    if torus and w > 1:
        return s + w - 1
    return -1


@njit(cache=True, inline="always")
def _down(s, w, h, torus):
    y = s // w
    if y + 1 < h:
        return s + w
    if torus and h > 1:
        return s % w
    return -1


@njit(cache=True, inline="always")
def _up(s, w, h, torus):
    y = s // w
    if y > 0:
        return s - w
    if torus and h > 1:
        return s + (h - 1) * w
    return -1


@njit(cache=True)
def _extent_h(hl, s, w, h, torus):
    a = 0
    t = s
    while a <= w:
        l = _left(t, w, h, torus)
        if l < 0 or hl[l] == 0:
            break
        a += 1
        t = l
    b = 0
    t = s
    while hl[t] != 0 and b <= w:
        t = _right(t, w, h, torus)
        b += 1
    return a, b


@njit(cache=True)
def _extent_v(vl, s, w, h, torus):
    a = 0
    t = s
    while a <= h:
        u = _up(t, w, h, torus)
        if u < 0 or vl[u] == 0:
            break
        a += 1
        t = u
    b = 0
    t = s
    while vl[t] != 0 and b <= h:
        t = _down(t, w, h, torus)
        b += 1
    return a, b


@njit(cache=True)
def sm_bond_move(hl, vl, w, h, torus, bond, logw, cap_h, cap_v):
    """Proposal at one bond: returns (kind, log weight ratio).

    kind 0: no admissible move, 1: split the rod through the bond,
    2: merge the two collinear rods meeting at the bond.
    """
    n = w * h
    if bond < n:
        s = bond
        t = _right(s, w, h, torus)
        if t < 0 or t == s:
            return 0, 0.0
        if hl[s] != 0:
            a, b = _extent_h(hl, s, w, h, torus)
            left = a + 1
            total = a + 1 + b
            return 1, logw[left] + logw[total - left] - logw[total]
        us = _up(s, w, h, torus)
        ut = _up(t, w, h, torus)
        if vl[s] != 0 or (us >= 0 and vl[us] != 0):
            return 0, 0.0
        if vl[t] != 0 or (ut >= 0 and vl[ut] != 0):
            return 0, 0.0
        a, _ = _extent_h(hl, s, w, h, torus)
        _, b = _extent_h(hl, t, w, h, torus)
        la = a + 1
        lb = b + 1
        if la + lb > cap_h:
            return 0, 0.0
        return 2, logw[la + lb] - logw[la] - logw[lb]
    s = bond - n
    t = _down(s, w, h, torus)
    if t < 0 or t == s:
        return 0, 0.0
    if vl[s] != 0:
        a, b = _extent_v(vl, s, w, h, torus)
        top = a + 1
        total = a + 1 + b
        return 1, logw[top] + logw[total - top] - logw[total]
    ls = _left(s, w, h, torus)
    lt = _left(t, w, h, torus)
    if hl[s] != 0 or (ls >= 0 and hl[ls] != 0):
        return 0, 0.0
    if hl[t] != 0 or (lt >= 0 and hl[lt] != 0):
        return 0, 0.0
    a, _ = _extent_v(vl, s, w, h, torus)
    _, b = _extent_v(vl, t, w, h, torus)
    la = a + 1
    lb = b + 1
    if la + lb > cap_v:
        return 0, 0.0
    return 2, logw[la + lb] - logw[la] - logw[lb]


@njit(cache=True)
def sm_apply(hl, vl, w, h, bond, kind):
    n = w * h
    val = 0 if kind == 1 else 1
    if bond < n:
        hl[bond] = val
    else:
        vl[bond - n] = val


@njit(cache=True)
def sm_steps(hl, vl, w, h, torus, bonds, logw, cap_h, cap_v, bond_idx, u):
    acc = 0
    for i in range(u.size):
        b = bonds[bond_idx[i]]
        kind, lr = sm_bond_move(hl, vl, w, h, torus, b, logw, cap_h, cap_v)
        if kind != 0 and (lr >= 0.0 or u[i] < math.exp(lr)):
            sm_apply(hl, vl, w, h, b, kind)
            acc += 1
    return acc


# ---------------------------------------------------------------- measurement


@njit(cache=True)
def measure_links(hl, vl, w, h, torus, hist):
    """Counts of sites in horizontal rods, vertical rods, vacancies; rod histogram."""
    n = w * h
    nh = 0
    nv = 0
    for s in range(n):
        l = _left(s, w, h, torus)
        u = _up(s, w, h, torus)
        inh = hl[s] != 0 or (l >= 0 and hl[l] != 0)
        inv = vl[s] != 0 or (u >= 0 and vl[u] != 0)
        if inh:
            nh += 1
            if not (l >= 0 and hl[l] != 0):
                _, b = _extent_h(hl, s, w, h, torus)
                if b + 1 < hist.size:
                    hist[b + 1] += 1
        elif inv:
            nv += 1
            if not (u >= 0 and vl[u] != 0):
                _, b = _extent_v(vl, s, w, h, torus)
                if b + 1 < hist.size:
                    hist[b + 1] += 1
        else:
            hist[1] += 1
    l0 = _left(0, w, h, torus)
    origin_h = 1.0 if (hl[0] != 0 or (l0 >= 0 and hl[l0] != 0)) else 0.0
    return nh, nv, n - nh - nv, origin_h


@njit(cache=True)
def encode_links(hl, vl):
    n = hl.size
    code = 0
    for s in range(n):
        if hl[s] != 0:
            code |= 1 << s
        if vl[s] != 0:
            code |= 1 << (n + s)
    return code


@njit(cache=True)
def empty_probability(bh, bv, w, h, torus, ks, out_v, out_h):
    """Average over anchors of prod of no-crossing probabilities along J^v_k and J^h_k.

    J^v_k anchored at dual point (x+1/2, y0+1/2) is crossed exactly by the
    horizontal bonds (x, y)-(x+1, y) for y0 < y < y0 + k; J^h_k symmetrically.
    On a free box only anchors with the whole segment inside the dual box count.
    """
    for ik in range(ks.size):
        k = ks[ik]
        total = 0.0
        cnt = 0
        xmax = w if torus else w - 1
        ymax = h if torus else h - k
        for x in range(xmax):
            for y0 in range(ymax):
                prod = 1.0
                for j in range(1, k):
                    y = (y0 + j) % h
                    prod *= bh[y * w + x]
                total += prod
                cnt += 1
        out_v[ik] = total / cnt if cnt > 0 else np.nan
        total = 0.0
        cnt = 0
        ymax = h if torus else h - 1
        xmax = w if torus else w - k
        for y in range(ymax):
            for x0 in range(xmax):
                prod = 1.0
                for j in range(1, k):
                    x = (x0 + j) % w
                    prod *= bv[y * w + x]
                total += prod
                cnt += 1
        out_h[ik] = total / cnt if cnt > 0 else np.nan


@njit(cache=True, nogil=True)
def sm_run(hl, vl, w, h, torus, bonds, logw, cap_h, cap_v, bond_idx, u, steps_per_sweep,
           measure, obs, ks, pv, ph, codes, hist):
    n = w * h
    n_sweeps = u.size // steps_per_sweep
    bh = np.empty(n)
    bv = np.empty(n)
    for sw in range(n_sweeps):
        lo = sw * steps_per_sweep
        hi = lo + steps_per_sweep
        sm_steps(hl, vl, w, h, torus, bonds, logw, cap_h, cap_v, bond_idx[lo:hi], u[lo:hi])
        if measure:
            nh, nv, nvac, oh = measure_links(hl, vl, w, h, torus, hist)
            obs[sw, 0] = nh / n
            obs[sw, 1] = nv / n
            obs[sw, 2] = nvac / n
            obs[sw, 3] = (nh - nv) / n
            obs[sw, 4] = oh
            if ks.size > 0:
                for s in range(n):
                    bh[s] = 1.0 - hl[s]
                    bv[s] = 1.0 - vl[s]
                empty_probability(bh, bv, w, h, torus, ks, pv[sw], ph[sw])
            if codes.size > 0:
                codes[sw] = encode_links(hl, vl)


# ---------------------------------------------------------------- colorings


@njit(cache=True)
def _row_runs(color, w, torus, s):
    """H-runs immediately left (a) and right (b) of s in its row; full=True if the rest is all H."""
    x = s % w
    row0 = s - x
    a = 0
    while a < w - 1:
        xx = x - a - 1
        if xx < 0:
            if not torus:
                break
            xx += w
        if color[row0 + xx] != 0:
            break
        a += 1
    if torus and a == w - 1:
        return a, 0, True
    b = 0
    while b < w - 1 - a:
        xx = x + b + 1
        if xx >= w:
            if not torus:
                break
            xx -= w
        if color[row0 + xx] != 0:
            break
        b += 1
    return a, b, False


@njit(cache=True)
def _col_runs(color, w, h, torus, s):
    """V-runs immediately above (a) and below (b) s in its column."""
    x = s % w
    y = s // w
    a = 0
    while a < h - 1:
        yy = y - a - 1
        if yy < 0:
            if not torus:
                break
            yy += h
        if color[yy * w + x] != 1:
            break
        a += 1
    if torus and a == h - 1:
        return a, 0, True
    b = 0
    while b < h - 1 - a:
        yy = y + b + 1
        if yy >= h:
            if not torus:
                break
            yy -= h
        if color[yy * w + x] != 1:
            break
        b += 1
    return a, b, False


@njit(cache=True, inline="always")
def _line_term(a, b, full, member, log_z, log_ring_L):
    if member:
        if full:
            return log_ring_L
        return log_z[a + 1 + b]
    return log_z[a] + log_z[b]


@njit(cache=True)
def flip_logratio(color, s, w, h, torus, log_z, log_ring_h, log_ring_v):
    """log W(after flipping s) - log W(before), from the <= 2 affected lines."""
    a, b, fr = _row_runs(color, w, torus, s)
    c, d, fc = _col_runs(color, w, h, torus, s)
    row_h = _line_term(a, b, fr, True, log_z, log_ring_h)
    row_v = _line_term(a, b, fr, False, log_z, log_ring_h)
    col_v = _line_term(c, d, fc, True, log_z, log_ring_v)
    col_h = _line_term(c, d, fc, False, log_z, log_ring_v)
    as_h = row_h + col_h
    as_v = row_v + col_v
    if color[s] == 0:
        return as_v - as_h
    return as_h - as_v


@njit(cache=True)
def coloring_steps(color, w, h, torus, log_z, log_ring_h, log_ring_v, sites, u, rule):
    """rule 0: Metropolis flip; rule 1: heat bath."""
    acc = 0
    for i in range(u.size):
        s = sites[i]
        d = flip_logratio(color, s, w, h, torus, log_z, log_ring_h, log_ring_v)
        if rule == 0:
            ok = d >= 0.0 or u[i] < math.exp(d)
        else:
            if d >= 0.0:
                ok = u[i] * (1.0 + math.exp(-d)) < 1.0
            else:
                e = math.exp(d)
                ok = u[i] * (1.0 + e) < e
        if ok:
            color[s] = 1 - color[s]
            acc += 1
    return acc


@njit(cache=True)
def log_weight_extra(color, w, h, torus, half_log_qg, ring_corr_h, ring_corr_v):
    """Part of log W (N = inf) not carried by the Ising contour term.

    Free box: each segment end on the box boundary costs one factor sqrt(q/(1+q)).
    Torus: a full H row or V column contributes its ring correction.
    """
    total = 0.0
    if torus:
        for y in range(h):
            full = True
            for x in range(w):
                if color[y * w + x] != 0:
                    full = False
                    break
            if full:
                total += ring_corr_h
        for x in range(w):
            full = True
            for y in range(h):
                if color[y * w + x] != 1:
                    full = False
                    break
            if full:
                total += ring_corr_v
        return total
    ends = 0
    for y in range(h):
        if color[y * w] == 0:
            ends += 1
        if color[y * w + w - 1] == 0:
            ends += 1
    for x in range(w):
        if color[x] == 1:
            ends += 1
        if color[(h - 1) * w + x] == 1:
            ends += 1
    return ends * half_log_qg


@njit(cache=True)
def wolff_move(color, w, h, torus, p_add, seed, ubuf, u_accept, half_log_qg, ring_corr_h, ring_corr_v, stack, mark):
    """One cluster flip for N = inf; bond part exact, remaining weight by acceptance."""
    n = w * h
    before = log_weight_extra(color, w, h, torus, half_log_qg, ring_corr_h, ring_corr_v)
    c0 = color[seed]
    top = 0
    stack[top] = seed
    top += 1
    mark[seed] = 1
    size = 1
    ptr = 0
    while top > 0:
        top -= 1
        s = stack[top]
        for d in range(4):
            if d == 0:
                t = _right(s, w, h, torus)
            elif d == 1:
                t = _left(s, w, h, torus)
            elif d == 2:
                t = _down(s, w, h, torus)
            else:
                t = _up(s, w, h, torus)
            if t < 0 or t == s:
                continue
            if mark[t] == 0 and color[t] == c0:
                r = ubuf[ptr]
                ptr += 1
                if r < p_add:
                    mark[t] = 1
                    stack[top] = t
                    top += 1
                    size += 1
            elif mark[t] == 0:
                pass
    for s in range(n):
        if mark[s] != 0:
            color[s] = 1 - c0
    after = log_weight_extra(color, w, h, torus, half_log_qg, ring_corr_h, ring_corr_v)
    d = after - before
    accepted = d >= 0.0 or u_accept < math.exp(d)
    for s in range(n):
        if mark[s] != 0:
            if not accepted:
                color[s] = c0
            mark[s] = 0
    return size if accepted else 0


# ---------------------------------------------------------------- segment filling


@njit(cache=True)
def fill_open(line, n, links, f, g, K, unbounded, qg, u, ptr):
    """Exact sample of the rods filling an open segment; sets links along ``line``."""
    for i in range(n):
        links[line[i]] = 0
    if n <= 1:
        return ptr
    if unbounded:
        for i in range(n - 1):
            if u[ptr] >= qg:
                links[line[i]] = 1
            ptr += 1
        return ptr
    m = n
    while m > 0:
        r = u[ptr] * g[m]
        ptr += 1
        top = m if m < K else K
        acc = 0.0
        k = top
        for kk in range(1, top + 1):
            acc += f[kk] * g[m - kk]
            if r < acc:
                k = kk
                break
        for j in range(m - k, m - 1):
            links[line[j]] = 1
        m -= k
    return ptr


@njit(cache=True)
def fill_ring(line, L, links, f, g, ring_L, K, u, ptr, scratch):
    """Exact sample for a ring of L sites (no rod longer than L-1)."""
    for i in range(L):
        links[line[i]] = 0
    top = L - 1 if L > 1 else 1
    if K < top:
        top = K
    r = u[ptr] * ring_L
    ptr += 1
    acc = 0.0
    k = top
    for kk in range(1, top + 1):
        acc += kk * f[kk] * g[L - kk]
        if r < acc:
            k = kk
            break
    j = int(u[ptr] * k)
    ptr += 1
    if j >= k:
        j = k - 1
    start = (L - j) % L
    for i in range(k - 1):
        links[line[(start + i) % L]] = 1
    rest = L - k
    for i in range(rest):
        scratch[i] = line[(start + k + i) % L]
    ptr = fill_open(scratch, rest, links, f, g, K, False, 0.0, u, ptr)
    return ptr


@njit(cache=True)
def fill_coloring(color, w, h, torus, hl, vl, f, g, ring_h, ring_v, K, unbounded, qg, u, line, scratch):
    """Fill every segment of a coloring; returns the number of uniforms used."""
    ptr = 0
    for s in range(w * h):
        hl[s] = 0
        vl[s] = 0
    for y in range(h):
        row0 = y * w
        nh = 0
        first_v = -1
        for x in range(w):
            if color[row0 + x] == 0:
                nh += 1
            elif first_v < 0:
                first_v = x
        if nh == 0:
            continue
        if torus and nh == w:
            for i in range(w):
                line[i] = row0 + i
            ptr = fill_ring(line, w, hl, f, g, ring_h, K, u, ptr, scratch)
            continue
        start = first_v + 1 if torus else 0
        i = 0
        while i < w:
            x = start + i
            if torus:
                x = x % w
            elif x >= w:
                break
            if color[row0 + x] == 0:
                m = 0
                while i + m < w:
                    xx = start + i + m
                    if torus:
                        xx = xx % w
                    elif xx >= w:
                        break
                    if color[row0 + xx] != 0:
                        break
                    line[m] = row0 + xx
                    m += 1
                ptr = fill_open(line, m, hl, f, g, K, unbounded, qg, u, ptr)
                i += m
            else:
                i += 1
    for x in range(w):
        nv = 0
        first_h = -1
        for y in range(h):
            if color[y * w + x] == 1:
                nv += 1
            elif first_h < 0:
                first_h = y
        if nv == 0:
            continue
        if torus and nv == h:
            for i in range(h):
                line[i] = i * w + x
            ptr = fill_ring(line, h, vl, f, g, ring_v, K, u, ptr, scratch)
            continue
        start = first_h + 1 if torus else 0
        i = 0
        while i < h:
            y = start + i
            if torus:
                y = y % h
            elif y >= h:
                break
            if color[y * w + x] == 1:
                m = 0
                while i + m < h:
                    yy = start + i + m
                    if torus:
                        yy = yy % h
                    elif yy >= h:
                        break
                    if color[yy * w + x] != 1:
                        break
                    line[m] = yy * w + x
                    m += 1
                ptr = fill_open(line, m, vl, f, g, K, unbounded, qg, u, ptr)
                i += m
            else:
                i += 1
    return ptr


@njit(cache=True)
def break_probabilities(color, w, h, torus, g, ring_break_h, ring_break_v, unbounded, qg, bh, bv):
    """P(bond carries no rod | coloring) for every +x bond (bh) and +y bond (bv)."""
    n = w * h
    for s in range(n):
        bh[s] = 1.0
        bv[s] = 1.0
    for y in range(h):
        row0 = y * w
        nh = 0
        first_v = -1
        for x in range(w):
            if color[row0 + x] == 0:
                nh += 1
            elif first_v < 0:
                first_v = x
        if nh == 0:
            continue
        if torus and nh == w:
            for x in range(w):
                bh[row0 + x] = ring_break_h
            continue
        start = first_v + 1 if torus else 0
        i = 0
        while i < w:
            x = (start + i) % w if torus else start + i
            if color[row0 + x] == 0:
                m = 0
                while i + m < w:
                    xx = (start + i + m) % w if torus else start + i + m
                    if color[row0 + xx] != 0:
                        break
                    m += 1
                for j in range(m - 1):
                    xx = (start + i + j) % w if torus else start + i + j
                    if unbounded:
                        bh[row0 + xx] = qg
                    else:
                        bh[row0 + xx] = g[j + 1] * g[m - j - 1] / g[m]
                i += m
            else:
                i += 1
    for x in range(w):
        nv = 0
        first_h = -1
        for y in range(h):
            if color[y * w + x] == 1:
                nv += 1
            elif first_h < 0:
                first_h = y
        if nv == 0:
            continue
        if torus and nv == h:
            for y in range(h):
                bv[y * w + x] = ring_break_v
            continue
        start = first_h + 1 if torus else 0
        i = 0
        while i < h:
            y = (start + i) % h if torus else start + i
            if color[y * w + x] == 1:
                m = 0
                while i + m < h:
                    yy = (start + i + m) % h if torus else start + i + m
                    if color[yy * w + x] != 1:
                        break
                    m += 1
                for j in range(m - 1):
                    yy = (start + i + j) % h if torus else start + i + j
                    if unbounded:
                        bv[yy * w + x] = qg
                    else:
                        bv[yy * w + x] = g[j + 1] * g[m - j - 1] / g[m]
                i += m
            else:
                i += 1


@njit(cache=True, nogil=True)
def coloring_run(color, w, h, torus, log_z, log_ring_h, log_ring_v, rule,
                 sites, u_site, cluster, p_add, wolff_seed, wolff_buf, wolff_acc,
                 half_log_qg, ring_corr_h, ring_corr_v,
                 measure, fill_u, f, g, ring_h, ring_v, ring_break_h, ring_break_v, K, unbounded, qg,
                 obs, ks, pv, ph, codes, hist, hl, vl):
    n = w * h
    n_sweeps = u_site.size // n
    stack = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.uint8)
    L = max(w, h) + 1
    line = np.empty(L, dtype=np.int64)
    scratch = np.empty(L, dtype=np.int64)
    bh = np.empty(n)
    bv = np.empty(n)
    fill_stride = fill_u.size // n_sweeps if n_sweeps > 0 else 0
    wstride = wolff_buf.size // n_sweeps if n_sweeps > 0 else 0
    flips = 0
    for sw in range(n_sweeps):
        lo = sw * n
        coloring_steps(color, w, h, torus, log_z, log_ring_h, log_ring_v, sites[lo:lo + n], u_site[lo:lo + n], rule)
        if cluster:
            wl = sw * wstride
            if wolff_move(color, w, h, torus, p_add, wolff_seed[sw], wolff_buf[wl:wl + wstride], wolff_acc[sw],
                          half_log_qg, ring_corr_h, ring_corr_v, stack, mark) > 0:
                flips += 1
        if measure:
            fl = sw * fill_stride
            fill_coloring(color, w, h, torus, hl, vl, f, g, ring_h, ring_v, K, unbounded, qg,
                          fill_u[fl:fl + fill_stride], line, scratch)
            nh, nv, nvac, oh = measure_links(hl, vl, w, h, torus, hist)
            obs[sw, 0] = nh / n
            obs[sw, 1] = nv / n
            obs[sw, 2] = nvac / n
            obs[sw, 3] = (nh - nv) / n
            obs[sw, 4] = oh
            if ks.size > 0:
                break_probabilities(color, w, h, torus, g, ring_break_h, ring_break_v, unbounded, qg, bh, bv)
                empty_probability(bh, bv, w, h, torus, ks, pv[sw], ph[sw])
            if codes.size > 0:
                codes[sw] = encode_links(hl, vl)
    return flips
