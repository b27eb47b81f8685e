"""Array-level kernels: link primitives, depth maintenance, the four update
rules, the event loop and the cheap per-record metrics.

Everything here operates on :class:`Arrays` with 0-based node and color
indices; node ``i < m`` is the root of color ``i``. Public, 1-based APIs live
in :mod:`multitree.graph` and :mod:`multitree.protocol`.

The true depth table ``depth`` is kept exact after every mutation by
re-walking the parent chain of each re-parented node and pushing the change
down its subtree. ``buf`` holds the buffered depths the protocol reads in
distributed mode.
"""

from typing import NamedTuple

import numpy as np

from ._jit import njit

INF = np.int64(1) << np.int64(62)
NONE = -1
SERVER = -2

# scal slots
EDGES = 0
YSUM = 1
SSUM = 2
NEED = 3

# outcome codes
R_NONE = 0
R_ADD = 1
R_INSERT = 2
R_JUMP = 3
R_LEAFSWAP = 4
R_MIX_A = 5
R_MIX_B = 6
N_CODES = 7

# rule enable bits
B_ADD = 1
B_INSERT = 2
B_JUMP = 4
B_LEAFSWAP = 8
B_MIX = 16
B_ALL = 31


class Arrays(NamedTuple):
    parent: np.ndarray  # (n, m) parent id, NONE or SERVER
    outc: np.ndarray  # (n, w) child per outgoing slot
    outk: np.ndarray  # (n, w) color per outgoing slot
    outdeg: np.ndarray  # (n,)
    dcount: np.ndarray  # (n, m) outgoing links per color
    incount: np.ndarray  # (n,) incoming links incl. the server link
    cap: np.ndarray  # (n,)
    depth: np.ndarray  # (n, m) true depth
    buf: np.ndarray  # (n, m) buffered depth
    hist: np.ndarray  # (m, n + 1) true-depth histogram, column n is INF
    scal: np.ndarray  # [edges, Y, S, K]
    stk: np.ndarray  # (n,) scratch stack


def allocate(n, m, k, caps, width=None):
    caps = np.asarray(caps, dtype=np.int64)
    w = int(max(1, caps.max() if caps.size else 1)) if width is None else int(width)
    g = Arrays(
        parent=np.full((n, m), NONE, dtype=np.int64),
        outc=np.full((n, w), NONE, dtype=np.int64),
        outk=np.full((n, w), NONE, dtype=np.int64),
        outdeg=np.zeros(n, dtype=np.int64),
        dcount=np.zeros((n, m), dtype=np.int64),
        incount=np.zeros(n, dtype=np.int64),
        cap=caps.copy(),
        depth=np.full((n, m), INF, dtype=np.int64),
        buf=np.full((n, m), INF, dtype=np.int64),
        hist=np.zeros((m, n + 1), dtype=np.int64),
        scal=np.zeros(4, dtype=np.int64),
        stk=np.zeros(n, dtype=np.int64),
    )
    g.scal[NEED] = k
    for i in range(m):
        g.parent[i, i] = SERVER
        g.incount[i] += 1
    recompute_depths(g)
    g.buf[:, :] = g.depth
    return g


def copy_arrays(g):
    return Arrays(*(a.copy() for a in g))


@njit
def sat_inc(x):
    if x >= INF - 1:
        return INF
    return x + 1


# ---------------------------------------------------------------- primitives


@njit
def link(g, u, v, i):
    s = g.outdeg[u]
    g.outc[u, s] = v
    g.outk[u, s] = i
    g.outdeg[u] = s + 1
    g.dcount[u, i] += 1
    g.parent[v, i] = u
    g.incount[v] += 1
    g.scal[EDGES] += 1
    g.scal[SSUM] += (u + 1) * (i + 1)


@njit
def unlink(g, u, v, i):
    d = g.outdeg[u]
    for s in range(d):
        if g.outc[u, s] == v and g.outk[u, s] == i:
            g.outc[u, s] = g.outc[u, d - 1]
            g.outk[u, s] = g.outk[u, d - 1]
            g.outc[u, d - 1] = NONE
            g.outk[u, d - 1] = NONE
            g.outdeg[u] = d - 1
            g.dcount[u, i] -= 1
            if g.parent[v, i] == u:
                g.parent[v, i] = NONE
            g.incount[v] -= 1
            g.scal[EDGES] -= 1
            g.scal[SSUM] -= (u + 1) * (i + 1)
            return True
    return False


@njit
def lowest_child(g, u, i, exclude):
    best = NONE
    for s in range(g.outdeg[u]):
        c = g.outc[u, s]
        if g.outk[u, s] == i and c != exclude and (best == NONE or c < best):
            best = c
    return best


# ------------------------------------------------------------ true depths


@njit
def _set_depth(g, x, i, d):
    n = g.depth.shape[0]
    old = g.depth[x, i]
    if old == d:
        return
    g.hist[i, min(old, n)] -= 1
    g.hist[i, min(d, n)] += 1
    g.scal[YSUM] += min(d, n) - min(old, n)
    g.depth[x, i] = d


@njit
def walk_depth(g, x, i):
    n = g.parent.shape[0]
    h = 0
    y = x
    for _ in range(n + 1):
        p = g.parent[y, i]
        if p == SERVER:
            return np.int64(h)
        if p == NONE:
            return INF
        y = p
        h += 1
    return INF


@njit
def refresh(g, x, i):
    """Recompute the true i-depth of ``x`` and of every node below it."""
    d = walk_depth(g, x, i)
    if d == g.depth[x, i]:
        return
    _set_depth(g, x, i, d)
    stk = g.stk
    top = 0
    for s in range(g.outdeg[x]):
        if g.outk[x, s] == i:
            stk[top] = g.outc[x, s]
            top += 1
    while top > 0:
        top -= 1
        y = stk[top]
        p = g.parent[y, i]
        nd = INF if p < 0 else sat_inc(g.depth[p, i])
        if nd == g.depth[y, i]:
            continue
        _set_depth(g, y, i, nd)
        for s in range(g.outdeg[y]):
            if g.outk[y, s] == i:
                stk[top] = g.outc[y, s]
                top += 1


@njit
def recompute_depths(g):
    n, m = g.parent.shape
    g.hist[:, :] = 0
    y = 0
    for u in range(n):
        for i in range(m):
            d = walk_depth(g, u, i)
            g.depth[u, i] = d
            g.hist[i, min(d, n)] += 1
            y += min(d, n)
    g.scal[YSUM] = y


# -------------------------------------------------------- buffered depths


@njit
def depth_update(g, u, i, inst):
    if inst:
        g.buf[u, i] = g.depth[u, i]
        return
    if u == i:
        g.buf[u, i] = 0
        return
    p = g.parent[u, i]
    if p < 0:
        g.buf[u, i] = INF
    else:
        g.buf[u, i] = sat_inc(g.buf[p, i])


@njit
def depth_update_all(g, u, inst):
    for i in range(g.parent.shape[1]):
        depth_update(g, u, i, inst)


@njit
def settle_buffers(g, inst, max_sweeps):
    """Sweep depth updates over all nodes until no buffer changes."""
    n, m = g.parent.shape
    if inst:
        g.buf[:, :] = g.depth
        return 0
    for sweep in range(max_sweeps):
        changed = False
        for u in range(n):
            for i in range(m):
                old = g.buf[u, i]
                depth_update(g, u, i, False)
                if g.buf[u, i] != old:
                    changed = True
        if not changed:
            return sweep
    return max_sweeps


# ------------------------------------------------------------------- rules


@njit
def greedy_cover(g, u, v, rules, inst, apply):
    m = g.parent.shape[1]
    if g.incount[u] >= g.scal[NEED]:
        return R_NONE, NONE, NONE, NONE, NONE, NONE, NONE
    for i in range(m):
        if g.parent[u, i] != NONE or g.parent[v, i] == NONE:
            continue
        if (rules & B_ADD) and g.outdeg[v] < g.cap[v]:
            if apply:
                link(g, v, u, i)
                refresh(g, u, i)
                depth_update(g, u, i, inst)
            return R_ADD, v, u, NONE, NONE, i, NONE
        if (rules & B_INSERT) and g.dcount[v, i] > 0 and g.outdeg[u] < g.cap[u]:
            c = lowest_child(g, v, i, NONE)
            if apply:
                unlink(g, v, c, i)
                link(g, v, u, i)
                link(g, u, c, i)
                refresh(g, u, i)
                depth_update(g, u, i, inst)
                depth_update(g, c, i, inst)
            return R_INSERT, v, u, c, NONE, i, NONE
    return R_NONE, NONE, NONE, NONE, NONE, NONE, NONE


@njit
def single_tree_balance(g, u, v, rules, inst, apply):
    m = g.parent.shape[1]
    D = g.depth if inst else g.buf
    for i in range(m):
        pu = g.parent[u, i]
        pv = g.parent[v, i]
        if pu == NONE or pv == NONE:
            continue
        if ((rules & B_JUMP) and u != i and pu != v
                and g.outdeg[v] < g.cap[v] and sat_inc(D[v, i]) < D[u, i]):
            if apply:
                unlink(g, pu, u, i)
                link(g, v, u, i)
                refresh(g, u, i)
                depth_update(g, u, i, inst)
            return R_JUMP, u, v, pu, NONE, i, NONE
        if ((rules & B_LEAFSWAP) and u != i and v != i
                and g.dcount[v, i] == 0 and g.dcount[u, i] > 0 and D[u, i] > D[v, i]
                and pu != pv and pv != u and pu != v):
            if apply:
                unlink(g, pu, u, i)
                unlink(g, pv, v, i)
                link(g, pu, v, i)
                link(g, pv, u, i)
                refresh(g, u, i)
                refresh(g, v, i)
                depth_update(g, u, i, inst)
                depth_update(g, v, i, inst)
            return R_LEAFSWAP, u, v, pu, pv, i, NONE
    return R_NONE, NONE, NONE, NONE, NONE, NONE, NONE


@njit
def mix_swap(g, uc, v, rules, inst, apply):
    if not (rules & B_MIX):
        return R_NONE, NONE, NONE, NONE, NONE, NONE, NONE
    m = g.parent.shape[1]
    D = g.depth if inst else g.buf
    for i in range(m):
        u = g.parent[uc, i]
        if u < 0 or u == v:
            continue
        for j in range(m):
            if j == i or g.dcount[v, j] == 0:
                continue
            liu = D[u, i]
            liv = D[v, i]
            lju = D[u, j]
            ljv = D[v, j]
            if liu < liv or lju > ljv:
                continue
            # both adopting parents must already reach the color they adopt
            if liv >= INF or lju >= INF:
                continue
            if liu == liv and lju == ljv:
                if (u - v) * (j - i) <= 0:
                    continue
                code = R_MIX_B
            else:
                code = R_MIX_A
            vc = lowest_child(g, v, j, u)
            if vc == NONE:
                continue
            if apply:
                unlink(g, u, uc, i)
                unlink(g, v, vc, j)
                link(g, u, vc, j)
                link(g, v, uc, i)
                refresh(g, uc, i)
                refresh(g, vc, j)
                depth_update(g, uc, i, inst)
                depth_update(g, vc, j, inst)
            return code, uc, v, u, vc, i, j
    return R_NONE, NONE, NONE, NONE, NONE, NONE, NONE


@njit
def try_rules(g, u, v, rules, inst, apply):
    r = greedy_cover(g, u, v, rules, inst, apply)
    if r[0] != R_NONE:
        return r
    r = single_tree_balance(g, u, v, rules, inst, apply)
    if r[0] != R_NONE:
        return r
    return mix_swap(g, u, v, rules, inst, apply)


@njit
def on_sample(g, u, v, rules, inst):
    depth_update_all(g, u, inst)
    depth_update_all(g, v, inst)
    return try_rules(g, u, v, rules, inst, True)


# ---------------------------------------------------------------- drivers


@njit
def advance(g, rules, inst, dts, smp, tgt, idx, t, t_stop, counts):
    """Consume pre-drawn events while their time stays <= ``t_stop``."""
    while idx < dts.shape[0]:
        tn = t + dts[idx]
        if tn > t_stop:
            break
        t = tn
        r = on_sample(g, smp[idx], tgt[idx], rules, inst)
        counts[r[0]] += 1
        idx += 1
    return idx, t


@njit
def nodes_deeper_than(g, i, thr):
    n = g.parent.shape[0]
    c = 0
    for d in range(thr + 1, n + 1):
        c += g.hist[i, d]
    return c


@njit
def advance_until_shallow(g, rules, dts, smp, tgt, idx, t, thr):
    """Event loop that stops once every node of color 0 sits at depth <= thr.

    Returns ``(idx, t, reached)``.
    """
    while idx < dts.shape[0]:
        t = t + dts[idx]
        r = on_sample(g, smp[idx], tgt[idx], rules, True)
        idx += 1
        if r[0] != R_NONE and nodes_deeper_than(g, 0, thr) == 0:
            return idx, t, True
    return idx, t, False


@njit
def find_active_pair(g, rules, inst):
    """First ordered pair (u, v) for which some rule would fire, read-only."""
    n = g.parent.shape[0]
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            r = try_rules(g, u, v, rules, inst, False)
            if r[0] != R_NONE:
                return u, v, r[0]
    return NONE, NONE, R_NONE


# ---------------------------------------------------------------- metrics


@njit
def count_cycles(g):
    n, m = g.parent.shape
    mark = np.zeros(n, dtype=np.int64)
    total = 0
    for i in range(m):
        mark[:] = 0
        for s in range(n):
            if mark[s] != 0 or g.depth[s, i] < INF:
                continue
            stamp = s + 1
            x = s
            while x >= 0 and mark[x] == 0 and g.depth[x, i] >= INF:
                mark[x] = stamp
                x = g.parent[x, i]
            if x >= 0 and mark[x] == stamp:
                total += 1
    return total


@njit
def record_row(g):
    """(fraction fully covered, max tree depth, cycles, buffered depth error)."""
    n, m = g.parent.shape
    k = g.scal[NEED]
    full = 0
    for u in range(n):
        c = 0
        for i in range(m):
            if g.depth[u, i] < INF:
                c += 1
        if c >= k:
            full += 1
    maxd = 0
    for i in range(m):
        for d in range(n - 1, -1, -1):
            if g.hist[i, d] > 0:
                if d > maxd:
                    maxd = d
                break
    err = 0
    for u in range(n):
        for i in range(m):
            a = g.depth[u, i]
            b = g.buf[u, i]
            if a < INF and b < INF:
                e = abs(a - b)
                if e > err:
                    err = e
    return full / n, maxd, count_cycles(g), err
