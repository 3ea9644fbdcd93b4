"""Bowen-ball statistics of finite orbit samples.

Everything here is sample-level: separated sets and covers are built from the
sample points only, so the numbers bound the sample's covering numbers and
say nothing stronger about the measure.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from .census import fmt_real
from .systems import AffineHorseshoe, EscapeError, IdentityMap, TorusAutomorphism, orbit


@dataclass
class OrbitSample:
    """Initial points plus their float orbits up to ``horizon`` iterates.

    ``law`` names how the points were drawn ("lebesgue", "bernoulli",
    "bernoulli-stratified", "bernoulli-two-sided", "list").
    """

    points: np.ndarray
    law: str
    horizon: int
    orbits: np.ndarray = field(repr=False)
    seed: int | None = None
    torus: bool = True

    def __len__(self):
        return len(self.points)

    def duplicated(self) -> "OrbitSample":
        return OrbitSample(np.concatenate([self.points, self.points]), self.law, self.horizon,
                           np.concatenate([self.orbits, self.orbits]), self.seed, self.torus)


def sample_from_points(system, points, horizon: int, law: str = "list") -> OrbitSample:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    orb = orbit(system, pts, horizon)
    if np.isnan(orb).any():
        bad = int(np.nonzero(np.isnan(orb).any(axis=(1, 2)))[0][0])
        t = int(np.nonzero(np.isnan(orb[bad]).any(axis=1))[0][0])
        raise EscapeError(t, tuple(pts[bad]))
    return OrbitSample(pts, law, horizon, orb, None, bool(getattr(system, "torus", False)))


def lebesgue_sample(system, n_points: int, horizon: int, seed: int = 0) -> OrbitSample:
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 2))
    s = sample_from_points(system, pts, horizon, "lebesgue")
    s.seed = seed
    return s


def bernoulli_sample(h: AffineHorseshoe, n_points: int, horizon: int, seed: int = 0,
                     stratified: bool = True, two_sided: bool = False, past: int = 40) -> OrbitSample:
    """Horseshoe points with Bernoulli(1/2) forward itineraries.

    The orbit is evaluated from the symbols at every time (not by float
    iteration), so the points stay on the invariant set.  With
    ``stratified`` the leading symbols are spread evenly over the sample by a
    random permutation; each point's itinerary is still uniformly
    distributed.  Without ``two_sided`` the past is the fixed point's, i.e.
    the sample lives on the local unstable leaf x = 0.
    """
    rng = np.random.default_rng(seed)
    depth = horizon + 30
    if stratified:
        levels = min(depth, max(1, int(math.floor(math.log2(max(n_points, 2))))))
        cells = 1 << levels
        reps = -(-n_points // cells)
        idx = np.concatenate([rng.permutation(cells) for _ in range(reps)])[:n_points]
        bits = np.empty((n_points, depth), dtype=np.int8)
        for j in range(levels):
            bits[:, j] = (idx >> (levels - 1 - j)) & 1
        bits[:, levels:] = rng.integers(0, 2, size=(n_points, depth - levels))
    else:
        bits = rng.integers(0, 2, size=(n_points, depth)).astype(np.int8)
    back = rng.integers(0, 2, size=(n_points, past)).astype(np.int8) if two_sided else np.zeros((n_points, past), np.int8)
    k, m = float(h.kappa), float(h.mu)
    # full symbol array: back[-1] is s_{-1}; columns [past : past+depth] are s_0 ..
    sym = np.concatenate([back, bits], axis=1).astype(float)
    wy = (m - 1) * m ** -(np.arange(depth - horizon) + 1.0)
    wx = (1 - k) * k ** np.arange(past, dtype=float)
    orb = np.empty((n_points, horizon, 2))
    for i in range(horizon):
        fut = sym[:, past + i: past + i + len(wy)]
        prev = sym[:, past + i - past: past + i][:, ::-1]  # s_{i-1}, s_{i-2}, ...
        orb[:, i, 1] = fut @ wy
        orb[:, i, 0] = prev @ wx
    law = "bernoulli" + ("-stratified" if stratified else "") + ("-two-sided" if two_sided else "")
    return OrbitSample(orb[:, 0].copy(), law, horizon, orb, seed, False)


def _dist(torus: bool, a, b):
    d = np.abs(a - b)
    if torus:
        d = np.minimum(d, 1.0 - d)
    return np.hypot(d[..., 0], d[..., 1])


def bowen_distance(system, x, y, n: int) -> float:
    """max_{0 <= i < n} d(f^i x, f^i y) in the system metric."""
    if n < 1:
        raise ValueError("n must be at least 1")
    orb = orbit(system, np.array([x, y], dtype=float), n)
    if np.isnan(orb).any():
        t = int(np.nonzero(np.isnan(orb).any(axis=(0, 2)))[0][0])
        raise EscapeError(t)
    return float(np.max(system.distance(orb[0], orb[1])))


def _neighbours(sample: OrbitSample, n: int, eps: float):
    """CSR arrays (indptr, indices) of pairs with Bowen distance < eps, self included."""
    if n > sample.horizon:
        raise ValueError(f"sample horizon {sample.horizon} is shorter than n={n}")
    N = len(sample)
    orb = sample.orbits[:, :n]
    flat = orb.reshape(N, 2 * n)
    if sample.torus:
        flat = np.where(flat >= 1.0, 0.0, flat)
        tree = cKDTree(flat, boxsize=1.0)
    else:
        tree = cKDTree(flat)
    # the sup-norm ball contains the Bowen ball; filter exactly afterwards
    pairs = tree.query_pairs(eps, p=np.inf, output_type="ndarray")
    if len(pairs):
        d = _dist(sample.torus, orb[pairs[:, 0]], orb[pairs[:, 1]]).max(axis=1)
        pairs = pairs[d < eps]
    i = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(N)]) if len(pairs) else np.arange(N)
    j = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(N)]) if len(pairs) else np.arange(N)
    M = coo_matrix((np.ones(len(i), dtype=np.int8), (i, j)), shape=(N, N)).tocsr()
    M.sort_indices()
    return M.indptr, M.indices


def max_separated(system, sample: OrbitSample, n: int, eps: float, _nb=None) -> np.ndarray:
    """Indices of a maximal (n, eps)-separated subset, chosen greedily in sample order.

    A point joins when its Bowen distance to every chosen point is >= eps,
    so every skipped point lies in the open Bowen ball of a chosen one.
    """
    indptr, indices = _nb if _nb is not None else _neighbours(sample, n, eps)
    N = len(sample)
    blocked = np.zeros(N, dtype=bool)
    chosen = []
    for i in range(N):
        if blocked[i]:
            continue
        chosen.append(i)
        blocked[indices[indptr[i]:indptr[i + 1]]] = True
    return np.asarray(chosen, dtype=np.int64)


@dataclass
class BowenCoverReport:
    n: int
    eps: float
    delta: float
    cover_size: int
    separated_size: int
    covered_fraction: float
    sample_size: int
    entropy_estimates: dict
    centers: np.ndarray = field(default=None, repr=False)

    def row(self) -> str:
        lc = math.log(self.cover_size) / self.n if self.cover_size > 0 else None
        return f"{self.n},{self.cover_size},{self.separated_size},{fmt_real(lc)}"


def _greedy_cover(indptr, indices, N: int, need: int):
    """Lazy greedy set cover, ties broken by lower sample index."""
    if need <= 0:
        return [], 0
    covered = np.zeros(N, dtype=bool)
    gains = np.diff(indptr)
    heap = [(-int(g), i) for i, g in enumerate(gains)]
    heapq.heapify(heap)
    centers = []
    ncov = 0
    while ncov < need and heap:
        negg, i = heapq.heappop(heap)
        nb = indices[indptr[i]:indptr[i + 1]]
        g = int(np.count_nonzero(~covered[nb]))
        if g == 0:
            continue
        if heap and (-g, i) > heap[0]:
            heapq.heappush(heap, (-g, i))
            continue
        centers.append(i)
        covered[nb] = True
        ncov += g
    return centers, ncov


def cover_estimate(system, sample: OrbitSample, n: int, eps: float, delta: float) -> BowenCoverReport:
    """Greedy cover by Bowen balls centred at sample points until a 1-delta fraction is covered."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    nb = _neighbours(sample, n, eps)
    N = len(sample)
    need = math.ceil((1 - delta) * N - 1e-9)
    centers, ncov = _greedy_cover(*nb, N, need)
    sep = max_separated(system, sample, n, eps, _nb=nb)
    size = len(centers)
    est = {n: (math.log(size) / n if size > 0 else 0.0)}
    return BowenCoverReport(n, eps, delta, size, len(sep), ncov / N if N else 0.0, N, est,
                            np.asarray(centers, dtype=np.int64))


@dataclass
class KatokReport:
    estimate: float
    separated_estimate: float
    n_range: tuple
    eps: float
    delta: float
    reports: list
    degenerate: bool
    law: str
    seed: int | None
    sample_size: int
    intercept: float = 0.0

    def to_csv(self) -> str:
        lines = ["n,cover_size,separated_size,log_cover_over_n"]
        lines += [r.row() for r in self.reports]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "schema": 1,
            "estimate": self.estimate,
            "separated_estimate": self.separated_estimate,
            "n_range": list(self.n_range),
            "eps": self.eps,
            "delta": self.delta,
            "degenerate": self.degenerate,
            "law": self.law,
            "seed": self.seed,
            "sample_size": self.sample_size,
            "per_n": {str(r.n): {"cover_size": r.cover_size, "separated_size": r.separated_size,
                                 "log_cover_over_n": math.log(r.cover_size) / r.n if r.cover_size else None}
                      for r in self.reports},
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"


def _slope(ns, vals):
    x = np.asarray(ns, float)
    y = np.asarray(vals, float)
    xm, ym = x.mean(), y.mean()
    s = float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())
    return s, float(ym - s * xm)


def katok_entropy(system, sample: OrbitSample, n_range, eps: float, delta: float, threads: int = 1) -> KatokReport:
    """Least-squares slope of log(cover size) over n_range, plus the separated-set slope.

    ``n_range`` is an inclusive (lo, hi) pair or an explicit list of n.  The
    per-n covers are independent and may run on ``threads`` workers; results
    are merged in n order so the report does not depend on scheduling.
    """
    ns = list(range(n_range[0], n_range[1] + 1)) if isinstance(n_range, tuple) and len(n_range) == 2 \
        else list(n_range)
    if len(ns) < 4:
        raise ValueError("katok_entropy needs at least 4 values of n")
    if max(ns) > sample.horizon:
        raise ValueError(f"sample horizon {sample.horizon} is shorter than n={max(ns)}")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(lambda n: cover_estimate(system, sample, n, eps, delta), ns))
    else:
        reps = [cover_estimate(system, sample, n, eps, delta) for n in ns]
    sizes = [r.cover_size for r in reps]
    degenerate = all(s <= 1 for s in sizes)
    if degenerate:
        est, icpt, sep_est = 0.0, 0.0, 0.0
    else:
        est, icpt = _slope(ns, [math.log(max(s, 1)) for s in sizes])
        sep_est, _ = _slope(ns, [math.log(max(r.separated_size, 1)) for r in reps])
    return KatokReport(est, sep_est, (ns[0], ns[-1]), eps, delta, reps, degenerate, sample.law,
                       sample.seed, len(sample), icpt)
