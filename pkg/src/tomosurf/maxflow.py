"""Maximum flow / minimum cut on directed capacitated graphs.

The solver follows the Boykov-Kolmogorov scheme: two search trees grow
from the terminals, augmenting paths are found where they touch, and
orphaned nodes are re-adopted instead of restarting the search. It is
fast on the sparse, grid-structured graphs used for surface segmentation.

Arcs leaving the source and arcs entering the sink are folded into a
per-node terminal capacity; arcs into the source or out of the sink can
never carry useful flow and are ignored by the solver (they still count
in :func:`cut_capacity`, where they are never severed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

INF = math.inf

_NONE = -1
_TERMINAL = -2
_ORPHAN = -3
_INF_DIST = 1 << 60


@dataclass(frozen=True)
class CutResult:
    """Maximum flow value and the minimum cut it certifies.

    ``source_side[i]`` is True for nodes reachable from the source in the
    final residual graph; ``arc_flow[k]`` is the net flow on the k-th arc
    pair in its ``a -> b`` direction (zero for arcs touching a terminal,
    whose flow is reported per node in ``source_flow`` / ``sink_flow``).
    """

    flow: float
    source_side: np.ndarray
    arc_flow: np.ndarray
    source_flow: np.ndarray
    sink_flow: np.ndarray
    inf_value: float

    @property
    def sink_side(self) -> np.ndarray:
        return ~self.source_side


class FlowNetwork:
    """Directed graph with a source and a sink.

    Nodes are integer handles. Each :meth:`add_arc` call registers a pair of
    mutually reverse arcs ``a -> b`` (capacity ``cap_ab``) and ``b -> a``
    (capacity ``cap_ba``). Capacities may be :data:`INF`.
    """

    def __init__(self, num_nodes: int = 2, source: int = 0, sink: int = 1):
        if num_nodes < 2:
            raise ValueError("a flow network needs at least two nodes")
        if source == sink:
            raise ValueError("source and sink must differ")
        self.num_nodes = int(num_nodes)
        self.source, self.sink = int(source), int(sink)
        for t in (self.source, self.sink):
            self._check_node(t)
        self._tails: list[np.ndarray] = []
        self._heads: list[np.ndarray] = []
        self._cap_ab: list[np.ndarray] = []
        self._cap_ba: list[np.ndarray] = []
        self._num_arcs = 0

    def _check_node(self, i):
        if np.any(np.asarray(i) < 0) or np.any(np.asarray(i) >= self.num_nodes):
            raise IndexError("invalid node handle")

    @property
    def num_arcs(self) -> int:
        """Number of arc pairs."""
        return self._num_arcs

    def add_node(self, count: int = 1) -> int:
        """Add ``count`` nodes and return the handle of the first one."""
        first = self.num_nodes
        self.num_nodes += int(count)
        return first

    def add_arc(self, a: int, b: int, cap_ab: float, cap_ba: float = 0.0) -> int:
        """Add the arc pair ``a -> b`` / ``b -> a``; return its index."""
        return int(self.add_arcs([a], [b], [cap_ab], [cap_ba])[0])

    def add_arcs(self, tails, heads, cap_ab, cap_ba=0.0) -> np.ndarray:
        """Vectorized :meth:`add_arc`; returns the new arc-pair indices."""
        tails = np.atleast_1d(np.asarray(tails, dtype=np.int64))
        heads = np.atleast_1d(np.asarray(heads, dtype=np.int64))
        cap_ab = np.broadcast_to(np.asarray(cap_ab, dtype=float), tails.shape).copy()
        cap_ba = np.broadcast_to(np.asarray(cap_ba, dtype=float), tails.shape).copy()
        if tails.shape != heads.shape:
            raise ValueError("tails and heads must have equal length")
        self._check_node(tails)
        self._check_node(heads)
        if np.any(cap_ab < 0) or np.any(cap_ba < 0) or np.any(np.isnan(cap_ab)) or np.any(np.isnan(cap_ba)):
            raise ValueError("capacities must be nonnegative")
        self._tails.append(tails)
        self._heads.append(heads)
        self._cap_ab.append(cap_ab)
        self._cap_ba.append(cap_ba)
        idx = np.arange(self._num_arcs, self._num_arcs + tails.size)
        self._num_arcs += tails.size
        return idx

    def arcs(self):
        """All arc pairs as ``(tails, heads, cap_ab, cap_ba)`` arrays."""
        if not self._tails:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0), np.zeros(0)
        return (np.concatenate(self._tails), np.concatenate(self._heads),
                np.concatenate(self._cap_ab), np.concatenate(self._cap_ba))

    def inf_value(self) -> float:
        """Finite stand-in for infinite capacities."""
        _, _, ab, ba = self.arcs()
        caps = np.concatenate([ab, ba])
        return float(caps[np.isfinite(caps)].sum()) + 1.0

    def to_dimacs(self) -> str:
        """Network in DIMACS max-flow format (1-based node ids).

        Infinite capacities are written as :meth:`inf_value`.
        """
        tails, heads, ab, ba = self.arcs()
        big = self.inf_value()
        lines = []
        for t, h, c1, c2 in zip(tails, heads, ab, ba):
            for u, w, c in ((t, h, c1), (h, t, c2)):
                if c > 0:
                    c = big if math.isinf(c) else c
                    lines.append(f"a {u + 1} {w + 1} {c:.17g}")
        head = [f"p max {self.num_nodes} {len(lines)}",
                f"n {self.source + 1} s", f"n {self.sink + 1} t"]
        return "\n".join(head + lines) + "\n"


def cut_capacity(net: FlowNetwork, source_side) -> float:
    """Total capacity of arcs from the source side to the sink side."""
    side = np.asarray(source_side, dtype=bool)
    tails, heads, ab, ba = net.arcs()
    fwd = side[tails] & ~side[heads]
    bwd = side[heads] & ~side[tails]
    return float(ab[fwd].sum() + ba[bwd].sum())


def max_flow(net: FlowNetwork) -> CutResult:
    """Maximum s-t flow and a minimum cut (minimal source side)."""
    s, t = net.source, net.sink
    tails, heads, ab, ba = net.arcs()
    big = net.inf_value()
    ab = np.where(np.isinf(ab), big, ab)
    ba = np.where(np.isinf(ba), big, ba)

    n = net.num_nodes
    flow = 0.0
    st = (tails == s) & (heads == t)
    ts_ = (tails == t) & (heads == s)
    flow += ab[st].sum() + ba[ts_].sum()
    # fold terminal arcs into per-node source / sink capacities
    cs = np.zeros(n)
    ct = np.zeros(n)
    np.add.at(cs, heads[tails == s], ab[tails == s])
    np.add.at(cs, tails[heads == s], ba[heads == s])
    np.add.at(ct, tails[heads == t], ab[heads == t])
    np.add.at(ct, heads[tails == t], ba[tails == t])
    cs[[s, t]] = 0.0
    ct[[s, t]] = 0.0
    # s -> i -> t paths saturate immediately
    flow += np.minimum(cs, ct).sum()
    tr = cs - ct

    inner = (tails != s) & (tails != t) & (heads != s) & (heads != t)
    it, ih = tails[inner], heads[inner]
    # each arc pair becomes arcs 2k (it -> ih) and 2k+1 (ih -> it)
    arc_tail = np.empty(2 * it.size, dtype=np.int64)
    arc_head = np.empty(2 * it.size, dtype=np.int64)
    arc_cap = np.empty(2 * it.size)
    arc_tail[0::2], arc_tail[1::2] = it, ih
    arc_head[0::2], arc_head[1::2] = ih, it
    arc_cap[0::2], arc_cap[1::2] = ab[inner], ba[inner]
    # CSR ordering by tail; stable sort keeps insertion order per node
    order = np.argsort(arc_tail, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(order.size)
    head = arc_head[order]
    rcap = arc_cap[order].copy()
    sister = pos[order ^ 1]
    first = np.zeros(n + 1, dtype=np.int64)
    np.add.at(first, arc_tail + 1, 1)
    first = np.cumsum(first)

    flow += _bk_maxflow(first, head, rcap, sister, tr)
    reach = _residual_reach(first, head, rcap, tr)
    reach[s] = True
    reach[t] = False

    arc_flow = np.zeros(tails.size)
    arc_flow[inner] = ab[inner] - rcap[pos[0::2]]
    source_flow = cs - np.maximum(tr, 0.0)
    sink_flow = ct - np.maximum(-tr, 0.0)
    return CutResult(float(flow), reach, arc_flow, source_flow, sink_flow, big)


@numba.njit(cache=True)
def _bk_maxflow(first, head, rcap, sister, tr):
    n = first.size - 1
    parent = np.full(n, _NONE, dtype=np.int64)
    is_sink = np.zeros(n, dtype=np.bool_)
    ts = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    in_q = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n + 1, dtype=np.int64)
    qh = 0
    qt = 0
    orphans = np.empty(n + 1, dtype=np.int64)
    m = n + 1
    flow = 0.0
    time = 0

    for i in range(n):
        if tr[i] > 0:
            parent[i] = _TERMINAL
            is_sink[i] = False
        elif tr[i] < 0:
            parent[i] = _TERMINAL
            is_sink[i] = True
        if tr[i] != 0:
            dist[i] = 1
            in_q[i] = True
            queue[qt] = i
            qt = (qt + 1) % (n + 1)

    cur = -1
    while True:
        i = cur
        if i == -1 or parent[i] == _NONE:
            i = -1
            while qh != qt:
                k = queue[qh]
                qh = (qh + 1) % (n + 1)
                in_q[k] = False
                if parent[k] != _NONE:
                    i = k
                    break
            if i == -1:
                break

        # growth
        found = -1
        if not is_sink[i]:
            for a in range(first[i], first[i + 1]):
                if rcap[a] > 0:
                    j = head[a]
                    if parent[j] == _NONE:
                        is_sink[j] = False
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not in_q[j]:
                            in_q[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % (n + 1)
                    elif is_sink[j]:
                        found = a
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
        else:
            for a in range(first[i], first[i + 1]):
                if rcap[sister[a]] > 0:
                    j = head[a]
                    if parent[j] == _NONE:
                        is_sink[j] = True
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not in_q[j]:
                            in_q[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % (n + 1)
                    elif not is_sink[j]:
                        found = sister[a]
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = sister[a]
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1

        time += 1
        if found == -1:
            cur = -1
            continue
        cur = i

        # augmentation along source-tree path + found + sink-tree path
        a = found
        bottleneck = rcap[a]
        j = head[sister[a]]
        while True:
            p = parent[j]
            if p == _TERMINAL:
                break
            if rcap[sister[p]] < bottleneck:
                bottleneck = rcap[sister[p]]
            j = head[p]
        if tr[j] < bottleneck:
            bottleneck = tr[j]
        j = head[a]
        while True:
            p = parent[j]
            if p == _TERMINAL:
                break
            if rcap[p] < bottleneck:
                bottleneck = rcap[p]
            j = head[p]
        if -tr[j] < bottleneck:
            bottleneck = -tr[j]

        rcap[sister[a]] += bottleneck
        rcap[a] -= bottleneck
        oh = 0
        no = 0
        j = head[sister[a]]
        while True:
            p = parent[j]
            if p == _TERMINAL:
                break
            rcap[p] += bottleneck
            rcap[sister[p]] -= bottleneck
            if rcap[sister[p]] <= 0:
                rcap[sister[p]] = 0.0
                parent[j] = _ORPHAN
                orphans[no] = j
                no = (no + 1) % m
            j = head[p]
        tr[j] -= bottleneck
        if tr[j] <= 0:
            tr[j] = 0.0
            parent[j] = _ORPHAN
            orphans[no] = j
            no = (no + 1) % m
        j = head[a]
        while True:
            p = parent[j]
            if p == _TERMINAL:
                break
            rcap[sister[p]] += bottleneck
            rcap[p] -= bottleneck
            if rcap[p] <= 0:
                rcap[p] = 0.0
                parent[j] = _ORPHAN
                orphans[no] = j
                no = (no + 1) % m
            j = head[p]
        tr[j] += bottleneck
        if tr[j] >= 0:
            tr[j] = 0.0
            parent[j] = _ORPHAN
            orphans[no] = j
            no = (no + 1) % m
        flow += bottleneck

        # adoption; each node sits at most once in the FIFO
        while oh != no:
            i2 = orphans[oh]
            oh = (oh + 1) % m
            d_min = _INF_DIST
            a_min = _NONE
            sink_side = is_sink[i2]
            for a0 in range(first[i2], first[i2 + 1]):
                if sink_side:
                    ok = rcap[a0] > 0
                else:
                    ok = rcap[sister[a0]] > 0
                if not ok:
                    continue
                j = head[a0]
                if is_sink[j] != sink_side or parent[j] == _NONE:
                    continue
                d = 0
                k = j
                while True:
                    if ts[k] == time:
                        d += dist[k]
                        break
                    p = parent[k]
                    d += 1
                    if p == _TERMINAL:
                        ts[k] = time
                        dist[k] = 1
                        break
                    if p == _ORPHAN:
                        d = _INF_DIST
                        break
                    k = head[p]
                if d < _INF_DIST:
                    if d < d_min:
                        a_min = a0
                        d_min = d
                    k = j
                    while ts[k] != time:
                        ts[k] = time
                        dist[k] = d
                        d -= 1
                        k = head[parent[k]]
            parent[i2] = a_min
            if a_min != _NONE:
                ts[i2] = time
                dist[i2] = d_min + 1
            else:
                for a0 in range(first[i2], first[i2 + 1]):
                    j = head[a0]
                    if is_sink[j] != sink_side or parent[j] == _NONE:
                        continue
                    if sink_side:
                        res = rcap[a0] > 0
                    else:
                        res = rcap[sister[a0]] > 0
                    if res and not in_q[j]:
                        in_q[j] = True
                        queue[qt] = j
                        qt = (qt + 1) % (n + 1)
                    p = parent[j]
                    if p != _TERMINAL and p != _ORPHAN and head[p] == i2:
                        parent[j] = _ORPHAN
                        orphans[no] = j
                        no = (no + 1) % m
    return flow


@numba.njit(cache=True)
def _residual_reach(first, head, rcap, tr):
    n = first.size - 1
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        if tr[i] > 0:
            seen[i] = True
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for a in range(first[i], first[i + 1]):
            if rcap[a] > 0:
                j = head[a]
                if not seen[j]:
                    seen[j] = True
                    stack[top] = j
                    top += 1
    return seen
