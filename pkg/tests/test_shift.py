import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homoclinic.census import CensusTable, growth_rate
from homoclinic.shift import (
    GraphError, GraphFormatError, InadmissibleError, NotHomoclinicError, ShiftGraph,
    SymbolicPoint, UnreachableError, build_gamma, connect, enumerate_homoclinic,
    homoclinic_census, homoclinic_census_table, is_irreducible, is_mixing, matrix_power,
    order_of, parse_graph, periodic_census, prime_orbit_census, spectral_entropy, traces,
    validate_graph,
)

from oracles import PHI, admissible_words, brute_homoclinic, brute_periodic, fib, necklaces

FULL2 = ShiftGraph.full_shift(2)
GOLDEN = ShiftGraph.golden_mean()
LOOP = ShiftGraph([[1]])
CYCLE2 = ShiftGraph([[0, 1], [1, 0]])
DISJOINT = ShiftGraph([[1, 0], [0, 1]])
A_INF = SymbolicPoint.periodic((0,))


def random_valid_graph(rng, k):
    while True:
        a = [[int(rng.random() < 0.55) for _ in range(k)] for _ in range(k)]
        g = ShiftGraph(a)
        if not validate_graph(g) and is_irreducible(g):
            return g


# graph structure ----------------------------------------------------------

def test_validate_examples():
    assert validate_graph(FULL2) == []
    assert validate_graph(GOLDEN) == []
    diag = validate_graph(ShiftGraph([[0, 0], [1, 1]]))
    assert "vertex 0 without outgoing edge" in diag
    assert any("not 0 or 1" in d for d in validate_graph(ShiftGraph([[2, 1], [1, 1]])))


def test_irreducible_examples():
    assert is_irreducible(FULL2)
    assert not is_irreducible(DISJOINT)
    assert is_irreducible(GOLDEN)


def test_irreducible_matches_path_enumeration():
    rng = random.Random(3)
    for _ in range(30):
        k = rng.randint(1, 4)
        g = ShiftGraph([[int(rng.random() < 0.4) for _ in range(k)] for _ in range(k)])
        reach = np.linalg.matrix_power(np.eye(k, dtype=int) + np.asarray(g.adjacency), k) > 0
        assert is_irreducible(g) == bool(reach.all())


def test_mixing_examples():
    assert is_mixing(FULL2)
    assert not is_mixing(CYCLE2)
    assert is_mixing(GOLDEN)
    a3 = matrix_power(GOLDEN, 3)
    assert all(v > 0 for row in a3 for v in row)


def test_mixing_matches_wielandt_power():
    rng = random.Random(5)
    for _ in range(40):
        k = rng.randint(1, 4)
        g = random_valid_graph(rng, k)
        primitive = all(v > 0 for row in matrix_power(g, (k - 1) ** 2 + 1) for v in row)
        assert is_mixing(g) == primitive


# entropy and periodic censuses --------------------------------------------

@pytest.mark.parametrize("g, expected", [
    (FULL2, math.log(2)),
    (GOLDEN, math.log(PHI)),
    (LOOP, 0.0),
    (CYCLE2, 0.0),
    (ShiftGraph.full_shift(3), math.log(3)),
])
def test_spectral_entropy(g, expected):
    assert spectral_entropy(g) == pytest.approx(expected, rel=1e-12, abs=1e-14)


def test_spectral_entropy_random_vs_eigvals():
    rng = random.Random(11)
    for _ in range(20):
        g = random_valid_graph(rng, rng.randint(2, 5))
        lam = max(abs(np.linalg.eigvals(np.asarray(g.adjacency, float))))
        assert spectral_entropy(g) == pytest.approx(math.log(lam), rel=1e-10, abs=1e-12)


def test_spectral_entropy_refuses_reducible():
    with pytest.raises(GraphError):
        spectral_entropy(DISJOINT)


def test_periodic_census_examples():
    assert periodic_census(FULL2, 0, 1) == 1
    assert periodic_census(FULL2, 0, 3) == 4 == brute_periodic(FULL2, 0, 3)
    assert periodic_census(GOLDEN, 0, 4) == 5 == fib(5)
    with pytest.raises(GraphError):
        periodic_census(FULL2, 2, 3)


def test_periodic_census_brute():
    rng = random.Random(2)
    for _ in range(10):
        g = random_valid_graph(rng, 3)
        for n in range(1, 7):
            for w0 in range(3):
                assert periodic_census(g, w0, n) == brute_periodic(g, w0, n)


def test_prime_orbits_examples():
    assert prime_orbit_census(FULL2, 1) == ({1: 2}, 2)
    per, cum = prime_orbit_census(FULL2, 3)
    assert per == {m: necklaces(2, m) for m in (1, 2, 3)} == {1: 2, 2: 1, 3: 2}
    assert cum == 5
    assert prime_orbit_census(LOOP, 5)[1] == 1


def test_prime_orbit_necklaces():
    per, _ = prime_orbit_census(ShiftGraph.full_shift(3), 6)
    assert [per[m] for m in range(1, 7)] == [necklaces(3, m) for m in range(1, 7)]


@pytest.mark.parametrize("g", [FULL2, GOLDEN, CYCLE2, ShiftGraph([[1, 1, 0], [0, 0, 1], [1, 1, 1]])])
def test_moebius_consistency(g):
    per, _ = prime_orbit_census(g, 20)
    tr = traces(g, 20)
    for m in range(1, 21):
        assert sum(d * per[d] for d in range(1, m + 1) if m % d == 0) == tr[m - 1]


# connectors ---------------------------------------------------------------

def _brute_connect(g, u, v):
    for length in range(0, 2 * g.vertex_count + 2):
        for w in admissible_words(g, length + 1, first=u):
            if w[-1] == v and (length > 0 or g.has_edge(u, u)):
                return w
    return None


def test_connect_examples():
    assert connect(GOLDEN, 0, 0) == (0,)
    assert connect(GOLDEN, 1, 1) == (1, 0, 1)
    with pytest.raises(UnreachableError):
        connect(DISJOINT, 0, 1)


def test_connect_matches_brute_force():
    rng = random.Random(7)
    for _ in range(25):
        g = random_valid_graph(rng, rng.randint(2, 4))
        for u in range(g.vertex_count):
            for v in range(g.vertex_count):
                assert connect(g, u, v) == _brute_connect(g, u, v)


# symbolic points and orders -----------------------------------------------

def test_order_examples():
    x = SymbolicPoint((0,), (0, 1), (0,), 0)
    assert order_of(FULL2, x, A_INF) == (2, 0)
    assert order_of(FULL2, x.shift(-1), A_INF) == (3, 0)
    with pytest.raises(NotHomoclinicError):
        order_of(FULL2, A_INF, A_INF)
    with pytest.raises(NotHomoclinicError):
        order_of(FULL2, SymbolicPoint((0,), (1,), (1,), 0), A_INF)


def test_order_periodic_reference_uses_phase():
    pbar = SymbolicPoint.periodic((0, 1))
    # differs from (01)^inf only at index 3
    x = SymbolicPoint((0, 1), (0, 1, 0, 0), (0, 1), 0)
    assert order_of(FULL2, x, pbar) == (4, 0)
    # agrees with sigma(pbar) on the right: not homoclinic to pbar itself
    y = SymbolicPoint((0, 1), (0, 0), (1, 0), 0)
    with pytest.raises(NotHomoclinicError):
        order_of(FULL2, y, pbar)


def test_shift_covariance():
    rng = random.Random(1)
    for _ in range(30):
        core = tuple(rng.randint(0, 1) for _ in range(rng.randint(1, 8))) + (1,)
        x = SymbolicPoint((0,), core, (0,), 1)
        ts, tu = order_of(FULL2, x, A_INF)
        assert tu == 0
        for k in range(0, 6):
            assert order_of(FULL2, x.shift(-k), A_INF) == (ts + k, 0)


tails = st.lists(st.integers(0, 1), min_size=1, max_size=3).map(tuple)


@given(tails, st.lists(st.integers(0, 1), max_size=6).map(tuple), tails, st.integers(-4, 4),
       st.integers(1, 3), st.integers(1, 3))
def test_canonical_idempotent_and_power_invariant(left, core, right, start, pl, pr):
    x = SymbolicPoint(left, core, right, start)
    c = x.canonical()
    assert c.canonical() == c
    assert (c.left, c.core, c.right, c.start) == (
        c.canonical().left, c.canonical().core, c.canonical().right, c.canonical().start)
    y = SymbolicPoint(left * pl, core, right * pr, start)
    assert y == x
    for i in range(start - 8, start + len(core) + 8):
        assert c[i] == x[i]


@given(tails, st.lists(st.integers(0, 1), max_size=6).map(tuple), tails, st.integers(-4, 4))
def test_canonical_absorbs_written_out_tails(left, core, right, start):
    x = SymbolicPoint(left, core, right, start)
    # write two extra periods of each tail into the core
    y = SymbolicPoint(left, left * 2 + core + right * 2, right, start - 2 * len(left))
    assert x == y and hash(x) == hash(y)


# homoclinic censuses --------------------------------------------------------

def test_census_examples_full_shift():
    assert homoclinic_census(FULL2, A_INF, 0) == 0
    assert homoclinic_census(FULL2, A_INF, 1) == 0
    assert [homoclinic_census(FULL2, A_INF, n) for n in (2, 3, 6)] == [1, 2, 16]
    for n in range(0, 8):
        assert homoclinic_census(FULL2, A_INF, n) == len(brute_homoclinic(FULL2, (0,), n))


def test_census_examples_golden():
    assert homoclinic_census(GOLDEN, A_INF, 2) == 1
    assert homoclinic_census(GOLDEN, A_INF, 4) == 2
    for n in range(2, 9):
        assert homoclinic_census(GOLDEN, A_INF, n) == matrix_power(GOLDEN, n - 1)[0][1]


def test_enumerate_examples():
    e = enumerate_homoclinic(FULL2, A_INF, 2, 10)
    assert e.points == [SymbolicPoint((0,), (0, 1), (0,), 0)] and not e.truncated
    assert enumerate_homoclinic(GOLDEN, A_INF, 2, 10).points == [SymbolicPoint((0,), (0, 1), (0,), 0)]
    assert enumerate_homoclinic(GOLDEN, A_INF, 0, 10).points == []
    t = enumerate_homoclinic(FULL2, A_INF, 8, 10)
    assert t.truncated and len(t.points) == 10


def test_census_enumeration_brute_agreement_random_graphs():
    rng = random.Random(17)
    for trial in range(12):
        k = rng.randint(1, 4)
        g = random_valid_graph(rng, k)
        # reference: a periodic orbit of period <= 2 that exists in g
        cands = [(v,) for v in range(k) if g.has_edge(v, v)]
        cands += [(u, v) for u in range(k) for v in range(k) if u != v and g.has_edge(u, v) and g.has_edge(v, u)]
        if not cands:
            continue
        word = rng.choice(cands)
        pbar = SymbolicPoint.periodic(word)
        table = homoclinic_census_table(g, pbar, 10)
        for n in range(0, 11):
            e = enumerate_homoclinic(g, pbar, n, limit=10 ** 6)
            assert not e.truncated
            assert len(e.points) == table[n]
            assert e.points == sorted(e.points, key=lambda p: p.window(0, n + 1))
            if k ** (n + 2) <= 5000:
                assert set(e.points) == brute_homoclinic(g, word, n)
            for x in e.points:
                assert order_of(g, x, pbar) == (n, 0)


def test_exp_type_ratio_periodic_mixing():
    rng = random.Random(23)
    graphs = [FULL2, GOLDEN] + [g for g in (random_valid_graph(rng, 3) for _ in range(6)) if is_mixing(g)]
    for g in graphs:
        lam = math.exp(spectral_entropy(g))
        for w0 in range(g.vertex_count):
            r = [math.exp(math.log(periodic_census(g, w0, n)) - n * math.log(lam)) for n in range(5, 61)]
            assert 0 < min(r) <= max(r) < math.inf
            d = [abs(b - a) for a, b in zip(r, r[1:])]
            tail = [x for x in d[10:] if x > 1e-13]
            # geometric decay: each block of 10 steps shrinks the increment
            for i in range(0, len(tail) - 10, 10):
                assert tail[i + 10] < tail[i] or tail[i + 10] < 1e-12


def test_mendoza_equality_symbolic():
    rng = random.Random(29)
    graphs = [FULL2, GOLDEN] + [g for g in (random_valid_graph(rng, 3) for _ in range(6)) if is_mixing(g)]
    for g in graphs:
        h = spectral_entropy(g)
        if h < 0.1:
            continue
        v = next(v for v in range(g.vertex_count) if g.has_edge(v, v)) if any(
            g.has_edge(v, v) for v in range(g.vertex_count)) else None
        if v is None:
            continue
        t = homoclinic_census_table(g, SymbolicPoint.periodic((v,)), 60, n_min=20)
        slope, _ = growth_rate(t, (20, 60))
        assert abs(slope - h) <= 2 * h / 20


# build_gamma ---------------------------------------------------------------

def test_build_gamma_full_shift_example():
    qbar = SymbolicPoint.periodic((0, 1))
    x = build_gamma(FULL2, A_INF, qbar, (1,), 1, 1)
    assert x.admissible(FULL2)
    base = build_gamma(FULL2, A_INF, qbar, (), 1, 1)
    ts0, tu0 = order_of(FULL2, base, A_INF)
    ts1, tu1 = order_of(FULL2, x, A_INF)
    assert tu0 == tu1 == 0
    assert ts1 - ts0 == 1


def test_build_gamma_offset_constant():
    rng = random.Random(31)
    qbar = SymbolicPoint.periodic((0, 1))
    offsets = set()
    for _ in range(8):
        block = tuple(rng.randint(0, 1) for _ in range(rng.randint(3, 12)))
        x = build_gamma(FULL2, A_INF, qbar, block, 2, 2)
        ts, tu = order_of(FULL2, x, A_INF)
        assert tu == 0
        offsets.add(ts - len(block))
    assert len(offsets) == 1


def test_build_gamma_golden_offset_constant():
    qbar = SymbolicPoint.periodic((1, 0))
    offsets = set()
    # blocks in P_n(b): start at b, close back to b, golden-admissible
    for n in range(2, 9):
        for w in admissible_words(GOLDEN, n, first=1):
            if GOLDEN.has_edge(w[-1], 1) and GOLDEN.has_edge(0, w[0]):
                # q^L ends with a, so block must start after a: any first symbol ok
                x = build_gamma(GOLDEN, A_INF, qbar, w, 1, 2)
                ts, tu = order_of(GOLDEN, x, A_INF)
                assert tu == 0
                offsets.add(ts - len(w))
    assert len(offsets) == 1


def test_build_gamma_inadmissible_block():
    # q = (ba)^inf, so the block is followed by q_0 = b; a block ending in b needs b->b
    with pytest.raises(InadmissibleError):
        build_gamma(GOLDEN, A_INF, SymbolicPoint.periodic((1, 0)), (1, 0, 1), 1, 1)


def test_build_gamma_same_orbit_refused():
    with pytest.raises(ValueError):
        build_gamma(FULL2, SymbolicPoint.periodic((0, 1)), SymbolicPoint.periodic((1, 0)), (0,), 1, 1)


def test_build_gamma_periodic_reference_is_homoclinic():
    g = ShiftGraph.full_shift(3)
    pbar = SymbolicPoint.periodic((0, 1))
    qbar = SymbolicPoint.periodic((2,))
    for block in [(), (2,), (2, 0), (2, 1, 2)]:
        x = build_gamma(g, pbar, qbar, block, 2, 1)
        ts, tu = order_of(g, x, pbar)
        assert tu == 0 and ts > len(block)


# growth rate ----------------------------------------------------------------

def test_growth_rate_examples():
    t = CensusTable({n: 2 ** n for n in range(1, 30)})
    assert growth_rate(t)[0] == pytest.approx(math.log(2), abs=1e-12)
    assert growth_rate(CensusTable({n: 1 for n in range(1, 10)}))[0] == 0
    h = homoclinic_census_table(FULL2, A_INF, 40)
    slope, diag = growth_rate(h, (10, 40))
    assert abs(slope - math.log(2)) < 0.01
    slope, diag = growth_rate(h, (0, 5))
    assert diag["skipped"] == [0, 1]


def test_growth_rate_too_few_points():
    with pytest.raises(ValueError):
        growth_rate(CensusTable({0: 0, 1: 0, 2: 1, 3: 2}), (0, 3))


def test_census_csv_exact_and_formatted():
    t = homoclinic_census_table(FULL2, A_INF, 60, n_min=58)
    csv = t.to_csv(h=math.log(2)).splitlines()
    assert csv[0] == "n,count,log_count_over_n,ratio_to_lambda_n"
    assert csv[-1].startswith(f"60,{2 ** 58},")
    assert csv[-1].endswith(",0.25")


# graph documents ------------------------------------------------------------

def test_parse_graph_edges_and_matrix():
    g = parse_graph("# golden mean\nvertices 2\nedge 0 0\nedge 0 1\nedge 1 0\n")
    assert g == GOLDEN
    assert parse_graph("matrix\n1 1\n1 0\n") == GOLDEN
    with pytest.raises(GraphFormatError, match="line 2"):
        parse_graph("vertices 2\nedg 0 1\n")
    with pytest.raises(GraphFormatError):
        parse_graph("vertices 2\nedge 0 5\n")
