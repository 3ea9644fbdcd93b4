"""Exact combinatorics of topological Markov shifts.

A shift is given by a 0/1 vertex adjacency matrix.  Points that matter for
homoclinic counting are doubly eventually periodic, so they are represented
by a finite core between two periodic tails (:class:`SymbolicPoint`).

All counts are Python ints, so nothing overflows at large n.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .census import CensusTable


class GraphError(ValueError):
    pass


class UnreachableError(GraphError):
    pass


class InadmissibleError(ValueError):
    pass


class NotHomoclinicError(ValueError):
    pass


@dataclass(frozen=True)
class ShiftGraph:
    """Directed graph on vertices ``0..k-1`` given by its adjacency matrix.

    The constructor only checks the shape; use :func:`validate_graph` for the
    structural invariants (binary entries, no dangling vertices).
    """

    adjacency: tuple
    vertex_labels: tuple | None = None

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.adjacency)
        k = len(rows)
        if k == 0 or any(len(r) != k for r in rows):
            raise GraphError("adjacency must be a non-empty square matrix")
        object.__setattr__(self, "adjacency", rows)
        if self.vertex_labels is not None:
            labels = tuple(str(s) for s in self.vertex_labels)
            if len(labels) != k:
                raise GraphError(f"expected {k} vertex labels, got {len(labels)}")
            object.__setattr__(self, "vertex_labels", labels)

    @classmethod
    def from_edges(cls, vertex_count: int, edges, labels=None) -> "ShiftGraph":
        a = [[0] * vertex_count for _ in range(vertex_count)]
        for u, v in edges:
            a[u][v] = 1
        return cls(a, labels)

    @classmethod
    def full_shift(cls, k: int = 2) -> "ShiftGraph":
        return cls([[1] * k for _ in range(k)])

    @classmethod
    def golden_mean(cls) -> "ShiftGraph":
        return cls([[1, 1], [1, 0]])

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)

    def has_edge(self, u: int, v: int) -> bool:
        return self.adjacency[u][v] != 0

    def successors(self, u: int) -> list:
        return [v for v, a in enumerate(self.adjacency[u]) if a]

    def predecessors(self, v: int) -> list:
        return [u for u in range(self.vertex_count) if self.adjacency[u][v]]

    def label(self, v: int) -> str:
        return self.vertex_labels[v] if self.vertex_labels else str(v)

    def check_vertex(self, v: int):
        if not 0 <= v < self.vertex_count:
            raise GraphError(f"vertex {v} out of range 0..{self.vertex_count - 1}")

    def is_admissible(self, word: Sequence[int]) -> bool:
        return all(self.has_edge(a, b) for a, b in zip(word, word[1:]))


def validate_graph(g: ShiftGraph) -> list:
    """Return the list of violated invariants; empty means the graph is valid."""
    out = []
    k = g.vertex_count
    for i, row in enumerate(g.adjacency):
        for j, a in enumerate(row):
            if a not in (0, 1):
                out.append(f"entry ({i},{j}) = {a} is not 0 or 1")
    for v in range(k):
        if not any(g.adjacency[v]):
            out.append(f"vertex {g.label(v)} without outgoing edge")
        if not any(g.adjacency[u][v] for u in range(k)):
            out.append(f"vertex {g.label(v)} without incoming edge")
    return out


def require_valid(g: ShiftGraph):
    problems = validate_graph(g)
    if problems:
        raise GraphError("invalid shift graph: " + "; ".join(problems))


def _reach(g: ShiftGraph, src: int, reverse=False) -> set:
    seen = {src}
    todo = [src]
    while todo:
        u = todo.pop()
        for v in (g.predecessors(u) if reverse else g.successors(u)):
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def is_irreducible(g: ShiftGraph) -> bool:
    k = g.vertex_count
    return len(_reach(g, 0)) == k and len(_reach(g, 0, reverse=True)) == k


def graph_period(g: ShiftGraph) -> int:
    """gcd of cycle lengths of an irreducible graph (BFS level differences)."""
    level = {0: 0}
    todo = deque([0])
    while todo:
        u = todo.popleft()
        for v in g.successors(u):
            if v not in level:
                level[v] = level[u] + 1
                todo.append(v)
    diffs = [level[u] + 1 - level[v] for u in level for v in g.successors(u)]
    return reduce(math.gcd, diffs, 0)


def is_mixing(g: ShiftGraph) -> bool:
    """Primitive adjacency matrix, i.e. irreducible with period 1."""
    return is_irreducible(g) and graph_period(g) == 1


# exact integer linear algebra -------------------------------------------------

def _matmul(a, b):
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def _vecmat(v, a):
    k = len(a)
    return [sum(v[i] * a[i][j] for i in range(k) if v[i]) for j in range(k)]


def matrix_power(g: ShiftGraph, n: int):
    """Exact ``A**n`` as nested lists of Python ints."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = g.vertex_count
    result = [[int(i == j) for j in range(k)] for i in range(k)]
    base = [list(r) for r in g.adjacency]
    while n:
        if n & 1:
            result = _matmul(result, base)
        n >>= 1
        if n:
            base = _matmul(base, base)
    return result


def spectral_entropy(g: ShiftGraph, rtol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """log of the Perron root of an irreducible adjacency matrix.

    Power iteration on ``I + A`` (primitive whenever ``A`` is irreducible, same
    Perron vector), stopped when the Collatz-Wielandt bracket
    ``min(Bx/x) <= rho <= max(Bx/x)`` is relatively tighter than ``rtol``.
    """
    require_valid(g)
    if not is_irreducible(g):
        raise GraphError("spectral_entropy needs an irreducible graph; components have different entropies")
    a = np.asarray(g.adjacency, dtype=float)
    b = a + np.eye(len(a))
    x = np.ones(len(a))
    lo = hi = None
    for _ in range(max_iter):
        y = b @ x
        q = y / x
        lo, hi = q.min(), q.max()
        if hi - lo <= rtol * lo:
            break
        x = y / y.max()
    else:
        raise ArithmeticError(f"power iteration did not converge, bracket [{lo}, {hi}]")
    rho = 0.5 * (lo + hi) - 1.0
    return math.log(rho)


def periodic_census(g: ShiftGraph, w0: int, n: int) -> int:
    """Number of x with sigma^n x = x and x_0 = w0, i.e. ``(A^n)[w0][w0]``."""
    g.check_vertex(w0)
    if n < 1:
        raise ValueError("n must be >= 1")
    row = [int(i == w0) for i in range(g.vertex_count)]
    a = g.adjacency
    for _ in range(n):
        row = _vecmat(row, a)
    return row[w0]


def periodic_census_table(g: ShiftGraph, w0: int, n_max: int, n_min: int = 1) -> CensusTable:
    g.check_vertex(w0)
    row = [int(i == w0) for i in range(g.vertex_count)]
    t = CensusTable(metadata={"kind": "periodic", "vertex": w0})
    for n in range(1, n_max + 1):
        row = _vecmat(row, g.adjacency)
        if n >= n_min:
            t.add(n, row[w0])
    return t


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError("mobius is defined for n >= 1")
    result, d = 1, 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            result = -result
        d += 1
    return -result if n > 1 else result


def traces(g: ShiftGraph, n: int) -> list:
    """``[trace(A^1), ..., trace(A^n)]`` exactly."""
    out = []
    p = [list(r) for r in g.adjacency]
    for m in range(1, n + 1):
        if m > 1:
            p = _matmul(p, g.adjacency)
        out.append(sum(p[i][i] for i in range(len(p))))
    return out


def prime_orbit_census(g: ShiftGraph, n: int):
    """Orbits of least period m for m <= n, by Moebius inversion of traces.

    Returns ``(per_period, cumulative)``.
    """
    require_valid(g)
    if n < 1:
        raise ValueError("n must be >= 1")
    tr = traces(g, n)
    per_period = {}
    for m in range(1, n + 1):
        s = sum(mobius(d) * tr[m // d - 1] for d in range(1, m + 1) if m % d == 0)
        q, r = divmod(s, m)
        assert r == 0, "Moebius sum not divisible by the period"
        per_period[m] = q
    return per_period, sum(per_period.values())


def connect(g: ShiftGraph, u: int, v: int) -> tuple:
    """Shortest admissible path from u to v, ties broken lexicographically.

    The path includes both endpoints.  For ``u == v`` a vertex with a
    self-loop connects to itself by the one-symbol path ``(u,)``; otherwise
    the shortest cycle through u is returned.
    """
    g.check_vertex(u)
    g.check_vertex(v)
    if u == v and g.has_edge(u, u):
        return (u,)
    # BFS over layers in discovery order with sorted successors: the first
    # path reaching a vertex is the lexicographically least shortest one.
    parent = {}
    layer = [u]
    found = False
    while layer and not found:
        nxt = []
        for a in layer:
            for b in g.successors(a):
                if b not in parent and b != u:
                    parent[b] = a
                    nxt.append(b)
                elif b == u == v and v not in parent:
                    parent[v] = a
                found = found or v in parent
                if found:
                    break
            if found:
                break
        layer = nxt
    if v not in parent:
        raise UnreachableError(f"no path from {g.label(u)} to {g.label(v)}")
    path = [v]
    while True:
        prev = parent[path[-1]]
        path.append(prev)
        if prev == u:
            break
    return tuple(reversed(path))


def _bridge(g: ShiftGraph, a: int, b: int) -> tuple:
    """Interior vertices of the shortest walk a -> ... -> b with at least one edge."""
    if g.has_edge(a, b):
        return ()
    best = None
    for s in g.successors(a):
        try:
            p = connect(g, s, b)
        except UnreachableError:
            continue
        if best is None or (len(p), p) < (len(best), best):
            best = p
    if best is None:
        raise UnreachableError(f"no path from {g.label(a)} to {g.label(b)}")
    return best[:-1]


# symbolic points --------------------------------------------------------------

def _primitive(word: tuple) -> tuple:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word[:d] * (n // d) == word:
            return word[:d]
    return word


def _rotate(word: tuple, k: int) -> tuple:
    k %= len(word)
    return word[k:] + word[:k]


@dataclass(frozen=True, eq=False)
class SymbolicPoint:
    """Bi-infinite sequence ``...LLL core RRR...``.

    The core occupies indices ``start .. start+len(core)-1``; the left period
    repeats to the left of ``start`` (its last symbol sits at ``start-1``) and
    the right period repeats from ``start+len(core)`` on.  Equality and hashing
    go through :meth:`canonical`, so representations that differ only in how
    much of the sequence is written out compare equal.
    """

    left: tuple
    core: tuple = ()
    right: tuple | None = None
    start: int = 0

    def __post_init__(self):
        left = tuple(int(s) for s in self.left)
        right = left if self.right is None else tuple(int(s) for s in self.right)
        if not left or not right:
            raise ValueError("periodic tails must be non-empty")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "core", tuple(int(s) for s in self.core))

    @classmethod
    def periodic(cls, word) -> "SymbolicPoint":
        """The periodic point ``word^inf`` with ``x_0 = word[0]``."""
        word = tuple(word)
        return cls(word, (), word, 0)

    @property
    def end(self) -> int:
        return self.start + len(self.core)

    def __getitem__(self, i: int) -> int:
        if i < self.start:
            return self.left[(i - self.start) % len(self.left)]
        if i >= self.end:
            return self.right[(i - self.end) % len(self.right)]
        return self.core[i - self.start]

    def window(self, lo: int, hi: int) -> tuple:
        """Symbols at indices ``lo .. hi-1``."""
        return tuple(self[i] for i in range(lo, hi))

    def shift(self, k: int = 1) -> "SymbolicPoint":
        """sigma^k: ``(sigma^k x)_i = x_{i+k}``."""
        return SymbolicPoint(self.left, self.core, self.right, self.start - k)

    def canonical(self) -> "SymbolicPoint":
        left, right = _primitive(self.left), _primitive(self.right)
        core, start = self.core, self.start
        # Left rotations keep left[-1] at index start-1, so left continuing
        # into the core means core[0] == left[0].
        while core and core[0] == left[0]:
            left = _rotate(left, 1)
            core = core[1:]
            start += 1
        while core and core[-1] == right[-1]:
            right = _rotate(right, -1)
            core = core[:-1]
        if not core:
            if left == right:
                m = len(left)
                word = tuple(left[(i - start) % m] for i in range(m))
                return SymbolicPoint(word, (), word, 0)
            # both tails may describe the junction region; put it leftmost
            while left[-1] == right[-1]:
                left = _rotate(left, -1)
                right = _rotate(right, -1)
                start -= 1
        return SymbolicPoint(left, core, right, start)

    def _key(self):
        c = self.canonical()
        return (c.left, c.core, c.right, c.start)

    def __eq__(self, other):
        if not isinstance(other, SymbolicPoint):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def is_periodic(self) -> bool:
        c = self.canonical()
        return not c.core and c.left == c.right

    def period_word(self) -> tuple:
        """``(x_0, ..., x_{m-1})`` for a periodic point."""
        if not self.is_periodic:
            raise ValueError("point is not periodic")
        return self.canonical().left

    def admissible(self, g: ShiftGraph) -> bool:
        seams = [(self.left[-1], self.left[0]), (self.right[-1], self.right[0])]
        block = (self.left[-1],) + self.core + (self.right[0],)
        return (all(0 <= s < g.vertex_count for s in self.left + self.core + self.right)
                and all(g.has_edge(a, b) for a, b in seams)
                and g.is_admissible(block))

    def check(self, g: ShiftGraph):
        if not self.admissible(g):
            raise InadmissibleError(f"{self} is not admissible in the graph")

    def __repr__(self):
        def w(t):
            return "".join(map(str, t)) if all(s < 10 for s in t) else " ".join(map(str, t))
        return f"SymbolicPoint(({w(self.left)})^inf [{w(self.core)}]@{self.start} ({w(self.right)})^inf)"


def _periodic_word(pbar: SymbolicPoint) -> tuple:
    if not isinstance(pbar, SymbolicPoint) or not pbar.is_periodic:
        raise ValueError("reference point must be periodic (empty core, equal tails)")
    return pbar.period_word()


def order_of(g: ShiftGraph, x: SymbolicPoint, pbar: SymbolicPoint):
    """Homoclinic orders ``(theta_s, theta_u)`` of x with respect to pbar.

    Local manifolds are ``{u : u_i = pbar_i, i >= 0}`` (stable) and
    ``{u : u_i = pbar_i, i <= 0}`` (unstable), which is the metric ball
    picture for any radius in ``[1/e, 1)``.
    """
    w = _periodic_word(pbar)
    m = len(w)
    x.check(g)
    pbar.check(g)
    c = x.canonical()
    if c == pbar:
        raise NotHomoclinicError("x equals the reference periodic point")
    lm = len(c.left) == m and all(c.left[k] == w[(k + c.start) % m] for k in range(m))
    rm = len(c.right) == m and all(c.right[k] == w[(k + c.end) % m] for k in range(m))
    if not (lm and rm):
        raise NotHomoclinicError(f"{x} is not asymptotic to {pbar} in both time directions")
    diff = [i for i in range(c.start, c.end) if c[i] != w[i % m]]
    if not diff:
        raise NotHomoclinicError("x equals the reference periodic point")
    theta_s = max(0, diff[-1] + 1)
    theta_u = max(0, 1 - diff[0])
    return theta_s, theta_u


def _reference(g: ShiftGraph, pbar: SymbolicPoint) -> tuple:
    require_valid(g)
    w = _periodic_word(pbar)
    pbar.check(g)
    return w


def homoclinic_census_table(g: ShiftGraph, pbar: SymbolicPoint, n_max: int, n_min: int = 0) -> CensusTable:
    """``#H(pbar, n)`` for ``n_min <= n <= n_max`` by path counting.

    x has orders (n, 0) iff it equals pbar on ``i <= 0`` and ``i >= n`` and
    ``x_{n-1} != pbar_{n-1}``; for n >= 2 that is a count of admissible words
    ``pbar_0, x_1, ..., x_{n-1}, pbar_n``.  n = 0, 1 force a contradiction.
    """
    w = _reference(g, pbar)
    m = len(w)
    a = g.adjacency
    k = g.vertex_count
    t = CensusTable(metadata={"kind": "homoclinic-sft", "pbar": list(w), "eps": "exp(-1)"})
    row = [int(i == w[0]) for i in range(k)]   # paths p_0 -> v of length n-1
    for n in range(0, n_max + 1):
        if n >= 2:
            row = _vecmat(row, a)
        if n < n_min:
            continue
        if n < 2:
            t.add(n, 0)
            continue
        pn, pn1 = w[n % m], w[(n - 1) % m]
        t.add(n, sum(row[v] * a[v][pn] for v in range(k) if v != pn1 and row[v]))
    return t


def homoclinic_census(g: ShiftGraph, pbar: SymbolicPoint, n: int) -> int:
    if n < 0:
        raise ValueError("n must be >= 0")
    return homoclinic_census_table(g, pbar, n, n_min=n)[n]


class Enumeration(NamedTuple):
    points: list
    truncated: bool


def enumerate_homoclinic(g: ShiftGraph, pbar: SymbolicPoint, n: int, limit: int = 10_000) -> Enumeration:
    """Members of H(pbar, n) in lexicographic order of ``x_0..x_n``, at most ``limit``."""
    w = _reference(g, pbar)
    if limit < 1:
        raise ValueError("limit must be positive")
    if n < 2:
        return Enumeration([], False)
    m = len(w)
    target, avoid = w[n % m], w[(n - 1) % m]
    # can[j]: vertices at index j that can still be completed to index n
    can = [set() for _ in range(n + 1)]
    can[n] = {target}
    can[n - 1] = {v for v in g.predecessors(target) if v != avoid}
    for j in range(n - 2, -1, -1):
        can[j] = {v for v in range(g.vertex_count) if any(s in can[j + 1] for s in g.successors(v))}
    points = []
    if w[0] not in can[0]:
        return Enumeration(points, False)
    left, right = w, _rotate(w, n)
    stack = [(w[0],)]
    truncated = False
    while stack:
        word = stack.pop()
        j = len(word) - 1
        if j == n - 1:
            if len(points) == limit:
                truncated = True
                break
            points.append(SymbolicPoint(left, word, right, 0).canonical())
            continue
        nxt = [s for s in g.successors(word[-1]) if s in can[j + 1]]
        stack.extend(word + (s,) for s in reversed(nxt))
    return Enumeration(points, truncated)


def _same_orbit(u: tuple, v: tuple) -> bool:
    return len(u) == len(v) and any(_rotate(u, k) == v for k in range(len(u)))


def _phase_bridge(g: ShiftGraph, src: int, idx: int, w: tuple) -> tuple:
    """Interior of the shortest walk from ``src`` (sitting at index ``idx``) to the
    first index j where it meets the periodic point ``w^inf`` in phase."""
    m = len(w)
    root = ("root",)
    parent = {}
    layer = [(root, src, idx % m)]
    found = None
    while layer and found is None:
        nxt = []
        for state, v, r in layer:
            for s in g.successors(v):
                st = (s, (r + 1) % m)
                if st in parent:
                    continue
                parent[st] = state
                if s == w[st[1]]:
                    found = st
                    break
                nxt.append((st, s, st[1]))
            if found:
                break
        layer = nxt
    if found is None:
        raise UnreachableError(f"cannot reach the orbit of {w} from vertex {src}")
    path = []
    st = parent[found]
    while st != root:
        path.append(st[0])
        st = parent[st]
    return tuple(reversed(path))


def build_gamma(g: ShiftGraph, pbar: SymbolicPoint, qbar: SymbolicPoint, block: Sequence[int],
                K: int, L: int) -> SymbolicPoint:
    """Homoclinic point of pbar that shadows qbar around an arbitrary block.

    Layout: ``pbar`` on indices ``<= K*m`` (K extra copies of the period
    after index 0), a shortest connector into qbar, ``q^L block q^L``, a
    shortest connector back into pbar's orbit in phase, K copies of the
    period and then pbar for good.  Index 0 is the last symbol of the left
    tail, so theta_u = 0.  For a fixed point pbar the returned point has
    ``theta_s = len(block) + offset`` with an offset independent of the
    block; for period m > 1 the offset depends on ``len(block) % m`` because
    the return connector lands in phase.
    """
    require_valid(g)
    if K < 1 or L < 1:
        raise ValueError("K and L must be positive")
    w = _reference(g, pbar)
    u = _periodic_word(qbar)
    qbar.check(g)
    if _same_orbit(w, u):
        raise ValueError("qbar lies on the orbit of pbar")
    block = tuple(int(s) for s in block)
    for s in block:
        g.check_vertex(s)
    m = len(w)
    seq = [w[j % m] for j in range(1, K * m + 1)]
    seq += _bridge(g, seq[-1], u[0])
    seq += list(u * L) + list(block) + list(u * L)
    nxt = 1 + len(seq)
    back = _phase_bridge(g, seq[-1], nxt - 1, w)
    seq += back
    j = 1 + len(seq)
    seq += [w[i % m] for i in range(j, j + K * m)]
    full = [w[0]] + seq + [w[(j + K * m) % m]]
    if not g.is_admissible(full):
        bad = next(i for i, (a, b) in enumerate(zip(full, full[1:])) if not g.has_edge(a, b))
        raise InadmissibleError(f"transition {full[bad]}->{full[bad + 1]} at index {bad} is not allowed")
    return SymbolicPoint(_rotate(w, 1), tuple(seq), _rotate(w, 1 + len(seq)), 1)


# graph documents --------------------------------------------------------------

class GraphFormatError(ValueError):
    pass


PRESETS = {
    "full2": lambda: ShiftGraph.full_shift(2),
    "full3": lambda: ShiftGraph.full_shift(3),
    "golden": ShiftGraph.golden_mean,
    "golden-mean": ShiftGraph.golden_mean,
}


def parse_graph(text: str) -> ShiftGraph:
    """Parse a graph document.

    Either ``vertices k`` followed by ``edge u v`` lines (and optional
    ``label v name`` lines), or a ``matrix`` line followed by rows of 0/1
    entries.  ``#`` starts a comment.
    """
    k = None
    edges, labels, rows = [], {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0].lower()
        try:
            if rows is not None:
                rows.append([int(p) for p in parts])
            elif head == "vertices":
                k = int(parts[1])
            elif head == "edge":
                edges.append((int(parts[1]), int(parts[2])))
            elif head == "label":
                labels[int(parts[1])] = parts[2]
            elif head == "matrix":
                rows = []
            else:
                raise GraphFormatError(f"line {lineno}: unknown directive {parts[0]!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, GraphFormatError):
                raise
            raise GraphFormatError(f"line {lineno}: cannot parse {raw.strip()!r}") from None
    if rows is not None:
        if k is not None and k != len(rows):
            raise GraphFormatError(f"matrix has {len(rows)} rows but vertices says {k}")
        a = rows
    else:
        if k is None:
            raise GraphFormatError("missing 'vertices' line")
        for u, v in edges:
            if not (0 <= u < k and 0 <= v < k):
                raise GraphFormatError(f"edge {u} {v} outside 0..{k - 1}")
        a = [[0] * k for _ in range(k)]
        for u, v in edges:
            a[u][v] = 1
    lab = None
    if labels:
        lab = [labels.get(i, str(i)) for i in range(len(a))]
    try:
        return ShiftGraph(a, lab)
    except GraphError as e:
        raise GraphFormatError(str(e)) from None


def graph_from_spec(value, base_dir=None) -> ShiftGraph:
    """Resolve a preset name, an inline matrix, or a path to a graph document."""
    import os

    if isinstance(value, (list, tuple)):
        return ShiftGraph(value)
    if isinstance(value, str):
        if value in PRESETS:
            return PRESETS[value]()
        path = value if base_dir is None else os.path.join(base_dir, value)
        if os.path.exists(path):
            with open(path) as fh:
                return parse_graph(fh.read())
        raise GraphFormatError(f"unknown graph {value!r}: not a preset ({', '.join(PRESETS)}) or a file")
    raise GraphFormatError(f"cannot interpret graph {value!r}")
