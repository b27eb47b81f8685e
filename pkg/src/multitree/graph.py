"""Colored-link overlay state and its exact oracles.

Node ids and colors are 1-based at this layer: nodes ``1..n``, colors
``1..m``, and node ``i <= m`` is the root of color ``i``. The array layer in
:mod:`multitree.kernels` is 0-based.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K

INFINITY = math.inf
SERVER = "server"


class LinkError(ValueError):
    """A primitive link mutation was called with its precondition broken."""


class StateFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GraphState:
    """Overlay graph: per-node parents/children by color, caps and depths."""

    def __init__(self, n: int, m: int, k: int, caps, width: int | None = None):
        caps = np.asarray(caps, dtype=np.int64)
        if caps.shape != (n,):
            raise ValueError(f"expected {n} degree caps, got {caps.shape}")
        if not 1 <= k <= m <= n:
            raise ValueError(f"need 1 <= K <= M <= N, got K={k} M={m} N={n}")
        self.n = n
        self.m = m
        self.k = k
        self.arrays = K.allocate(n, m, k, caps, width)

    @classmethod
    def _wrap(cls, n, m, k, arrays):
        obj = cls.__new__(cls)
        obj.n, obj.m, obj.k, obj.arrays = n, m, k, arrays
        return obj

    def copy(self) -> GraphState:
        return GraphState._wrap(self.n, self.m, self.k, K.copy_arrays(self.arrays))

    # -- read accessors (1-based)

    def _check_node(self, u):
        if not 1 <= u <= self.n:
            raise LinkError(f"node {u} out of range 1..{self.n}")

    def _check_color(self, i):
        if not 1 <= i <= self.m:
            raise LinkError(f"color {i} out of range 1..{self.m}")

    def cap(self, u: int) -> int:
        return int(self.arrays.cap[u - 1])

    @property
    def caps(self) -> np.ndarray:
        return self.arrays.cap.copy()

    def parent(self, v: int, i: int):
        """The i-parent of ``v``: a node id, ``SERVER`` or ``None``."""
        p = int(self.arrays.parent[v - 1, i - 1])
        if p == K.SERVER:
            return SERVER
        return None if p == K.NONE else p + 1

    def children(self, u: int, i: int) -> set[int]:
        g = self.arrays
        return {int(g.outc[u - 1, s]) + 1 for s in range(g.outdeg[u - 1])
                if g.outk[u - 1, s] == i - 1}

    def out_degree(self, u: int, i: int | None = None) -> int:
        if i is None:
            return int(self.arrays.outdeg[u - 1])
        return int(self.arrays.dcount[u - 1, i - 1])

    def in_degree(self, u: int) -> int:
        return int(self.arrays.incount[u - 1])

    def incoming_colors(self, u: int) -> set[int]:
        return {i + 1 for i in range(self.m) if self.arrays.parent[u - 1, i] != K.NONE}

    def is_available(self, u: int) -> bool:
        return self.in_degree(u) > 0 and self.out_degree(u) < self.cap(u)

    def buffered_depth(self, u: int, i: int):
        return _to_depth(self.arrays.buf[u - 1, i - 1])

    def set_buffered_depth(self, u: int, i: int, value) -> None:
        self.arrays.buf[u - 1, i - 1] = K.INF if value == INFINITY else int(value)

    def cached_depth(self, u: int, i: int):
        """True depth as maintained incrementally by the kernels."""
        return _to_depth(self.arrays.depth[u - 1, i - 1])

    @property
    def edge_count(self) -> int:
        return int(self.arrays.scal[K.EDGES])

    def links(self) -> list[tuple[int, int, int]]:
        """All node-to-node links as sorted ``(color, parent, child)``."""
        g = self.arrays
        out = []
        for u in range(self.n):
            for s in range(g.outdeg[u]):
                out.append((int(g.outk[u, s]) + 1, u + 1, int(g.outc[u, s]) + 1))
        out.sort()
        return out

    def _key(self):
        return (self.n, self.m, self.k, tuple(self.arrays.cap.tolist()),
                tuple(self.links()), self.arrays.buf.tobytes())

    def __eq__(self, other):
        if not isinstance(other, GraphState):
            return NotImplemented
        return self._key() == other._key()

    def __repr__(self):
        return f"GraphState(n={self.n}, m={self.m}, k={self.k}, edges={self.edge_count})"

    @classmethod
    def from_links(cls, n, m, k, caps, links, strict=True) -> GraphState:
        """Build a state from ``(color, parent, child)`` triples.

        With ``strict=False`` the links are written verbatim, so states that
        break the structural invariants can still be represented and checked.
        Buffered depths start equal to the true depths.
        """
        links = list(links)
        if strict:
            st = cls(n, m, k, caps)
            for i, u, v in links:
                build_link(st, u, v, i)
            st.arrays.buf[:, :] = st.arrays.depth
            return st
        caps = np.asarray(caps, dtype=np.int64)
        outdeg = np.zeros(n, dtype=np.int64)
        for _, u, _v in links:
            outdeg[u - 1] += 1
        width = int(max(1, caps.max(), outdeg.max() if n else 0))
        st = cls(n, m, k, caps, width=width)
        g = st.arrays
        for i, u, v in links:
            a, b, c = u - 1, v - 1, i - 1
            s = g.outdeg[a]
            g.outc[a, s] = b
            g.outk[a, s] = c
            g.outdeg[a] = s + 1
            g.dcount[a, c] += 1
            if g.parent[b, c] == K.NONE:
                g.parent[b, c] = a
            g.incount[b] += 1
            g.scal[K.EDGES] += 1
            g.scal[K.SSUM] += u * i
        K.recompute_depths(g)
        g.buf[:, :] = g.depth
        return st


def _to_depth(x):
    return INFINITY if x >= K.INF else int(x)


# ---------------------------------------------------------------- primitives


def build_link(state: GraphState, u: int, v: int, i: int) -> None:
    """Add the i-link ``u -> v``. Raises :class:`LinkError` on misuse."""
    state._check_node(u)
    state._check_node(v)
    state._check_color(i)
    if u == v:
        raise LinkError(f"self loop on node {u}")
    if state.arrays.parent[v - 1, i - 1] != K.NONE:
        raise LinkError(f"node {v} already has an incoming {i}-link")
    if state.out_degree(u) >= state.cap(u):
        raise LinkError(f"node {u} is at its degree cap {state.cap(u)}")
    g = state.arrays
    K.link(g, u - 1, v - 1, i - 1)
    K.refresh(g, v - 1, i - 1)


def remove_link(state: GraphState, u: int, v: int, i: int) -> None:
    """Remove the i-link ``u -> v``; buffered depths are left alone."""
    state._check_node(u)
    state._check_node(v)
    state._check_color(i)
    g = state.arrays
    if g.parent[v - 1, i - 1] != u - 1 or not K.unlink(g, u - 1, v - 1, i - 1):
        raise LinkError(f"no {i}-link {u} -> {v}")
    K.refresh(g, v - 1, i - 1)


# ---------------------------------------------------------------- oracles


def _children_map(state: GraphState, i: int) -> dict[int, list[int]]:
    kids: dict[int, list[int]] = {}
    for c, u, v in state.links():
        if c == i:
            kids.setdefault(u, []).append(v)
    return kids


def true_depths(state: GraphState, i: int) -> dict[int, float]:
    """Breadth-first hop counts from root ``i`` over the i-links."""
    kids = _children_map(state, i)
    depth = {u: INFINITY for u in range(1, state.n + 1)}
    depth[i] = 0
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in kids.get(u, ()):
            if depth[v] == INFINITY:
                depth[v] = depth[u] + 1
                queue.append(v)
    return depth


def all_true_depths(state: GraphState) -> np.ndarray:
    """(n, m) float array of BFS depths, ``inf`` where unreachable."""
    out = np.empty((state.n, state.m))
    for i in range(1, state.m + 1):
        d = true_depths(state, i)
        out[:, i - 1] = [d[u] for u in range(1, state.n + 1)]
    return out


@dataclass(frozen=True)
class Violation:
    node: int
    color: int | None
    rule: str


@dataclass
class Assumption1Report:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def lines(self) -> list[str]:
        if self.ok:
            return ["assumption-1: PASS"]
        out = ["assumption-1: FAIL"]
        for v in self.violations:
            where = f"node {v.node}" + (f" color {v.color}" if v.color is not None else "")
            out.append(f"  {where}: {v.rule}")
        return out


def check_assumption1(state: GraphState) -> Assumption1Report:
    """Verify in-degree, out-degree, link symmetry and per-color tree shape."""
    n, m = state.n, state.m
    g = state.arrays
    report = Assumption1Report()
    bad = report.violations
    incoming: dict[tuple[int, int], list[int]] = {}
    for r in range(1, m + 1):
        incoming[(r, r)] = [0]  # server link
    for i, u, v in state.links():
        if u == v:
            bad.append(Violation(u, i, "self loop"))
        incoming.setdefault((v, i), []).append(u)
        if state.parent(v, i) != u:
            bad.append(Violation(v, i, f"link from {u} missing from parent table"))
    for v in range(1, n + 1):
        for i in range(1, m + 1):
            p = state.parent(v, i)
            if isinstance(p, int) and p not in incoming.get((v, i), []):
                bad.append(Violation(v, i, f"parent {p} has no matching outgoing link"))
            if p == SERVER and v != i:
                bad.append(Violation(v, i, "server link on a non-root"))
    for (v, i), parents in sorted(incoming.items()):
        if len(parents) > 1:
            bad.append(Violation(v, i, f"{len(parents)} incoming {i}-links"))
    for v in range(1, n + 1):
        colors = {i for i in range(1, m + 1) if (v, i) in incoming}
        if len(colors) > state.k:
            bad.append(Violation(v, None, f"{len(colors)} incoming links exceed K={state.k}"))
        if int(g.outdeg[v - 1]) > state.cap(v):
            bad.append(Violation(v, None, f"{int(g.outdeg[v - 1])} outgoing links exceed cap {state.cap(v)}"))
    for i in range(1, m + 1):
        kids = _children_map(state, i)
        seen = {i}
        queue = deque([i])
        while queue:
            u = queue.popleft()
            for v in kids.get(u, ()):
                if v in seen:
                    bad.append(Violation(v, i, f"reachable {i}-subgraph is not a tree"))
                    continue
                seen.add(v)
                queue.append(v)
    return report


def detect_cycles(state: GraphState, i: int) -> tuple[int, list[frozenset[int]]]:
    """Directed cycles among the i-links of nodes not reached from root ``i``."""
    depth = true_depths(state, i)
    parent = {}
    for c, u, v in state.links():
        if c == i:
            parent[v] = u
    color = {}
    cycles = []
    for s in range(1, state.n + 1):
        if s in color or depth[s] != INFINITY:
            continue
        path = []
        x = s
        while x is not None and x not in color and depth[x] == INFINITY:
            color[x] = s
            path.append(x)
            x = parent.get(x)
        if x is not None and color.get(x) == s:
            cycles.append(frozenset(path[path.index(x):]))
    return len(cycles), cycles


# ---------------------------------------------------------------- text format


def dumps(state: GraphState) -> str:
    lines = [f"{state.n} {state.m} {state.k}"]
    lines += [f"{u} {state.cap(u)}" for u in range(1, state.n + 1)]
    lines += [f"{i} {u} {v}" for i, u, v in state.links()]
    return "\n".join(lines) + "\n"


def loads(text: str, strict: bool = False) -> GraphState:
    """Parse the line format written by :func:`dumps`.

    Buffered depths are not part of the format; they come back as the true
    depths.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append((lineno, [int(x) for x in line.split()]))
        except ValueError:
            raise StateFormatError(lineno, f"non-integer field in {raw!r}") from None
    last = rows[-1][0] if rows else 0
    if not rows:
        raise StateFormatError(1, "empty state file")
    lineno, head = rows[0]
    if len(head) != 3:
        raise StateFormatError(lineno, "header must be 'N M K'")
    n, m, k = head
    if not (1 <= k <= m <= n):
        raise StateFormatError(lineno, f"need 1 <= K <= M <= N, got {n} {m} {k}")
    if len(rows) < 1 + n:
        raise StateFormatError(last + 1, f"expected {n} node lines, file ends after {len(rows) - 1}")
    caps = np.zeros(n, dtype=np.int64)
    seen = set()
    for lineno, f in rows[1:1 + n]:
        if len(f) != 2:
            raise StateFormatError(lineno, "node line must be 'id cap'")
        u, c = f
        if not 1 <= u <= n or u in seen:
            raise StateFormatError(lineno, f"bad or repeated node id {u}")
        if c < 0:
            raise StateFormatError(lineno, f"negative cap {c}")
        seen.add(u)
        caps[u - 1] = c
    links = []
    for lineno, f in rows[1 + n:]:
        if len(f) != 3:
            raise StateFormatError(lineno, "link line must be 'color parent child'")
        i, u, v = f
        if not 1 <= i <= m or not 1 <= u <= n or not 1 <= v <= n:
            raise StateFormatError(lineno, f"link {i} {u} {v} out of range")
        if u == v:
            raise StateFormatError(lineno, f"self loop on node {u}")
        links.append((i, u, v))
    return GraphState.from_links(n, m, k, caps, links, strict=strict)
