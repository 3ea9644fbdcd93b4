"""Brute-force oracles shared by the tests.  Deliberately naive."""

import itertools
import math

from homoclinic.shift import NotHomoclinicError, SymbolicPoint, order_of


def admissible_words(g, length, first=None):
    k = g.vertex_count
    for w in itertools.product(range(k), repeat=length):
        if first is not None and w[0] != first:
            continue
        if all(g.adjacency[a][b] for a, b in zip(w, w[1:])):
            yield w


def brute_homoclinic(g, word, n, starts=(0, 1)):
    """All points with orders (n, 0) w.r.t. word^inf, found by placing every
    admissible core of length <= n+2 between the reference tails."""
    pbar = SymbolicPoint.periodic(word)
    m = len(word)
    found = set()
    for length in range(0, n + 3):
        for core in itertools.product(range(g.vertex_count), repeat=length):
            for s in starts:
                left = tuple(word[(k + s) % m] for k in range(m))
                right = tuple(word[(k + s + length) % m] for k in range(m))
                x = SymbolicPoint(left, core, right, s)
                if not x.admissible(g) or x == pbar:
                    continue
                try:
                    if order_of(g, x, pbar) == (n, 0):
                        found.add(x)
                except NotHomoclinicError:
                    pass
    return found


def brute_periodic(g, w0, n):
    """Count words w0=x_0..x_{n-1} closing admissibly back to w0."""
    return sum(1 for w in admissible_words(g, n, first=w0) if g.adjacency[w[-1]][w0])


def necklaces(k, n):
    """Primitive necklaces of length n over k letters, by enumeration."""
    seen = set()
    for w in itertools.product(range(k), repeat=n):
        rots = {w[i:] + w[:i] for i in range(n)}
        if len(rots) == n:
            seen.add(min(rots))
    return len(seen)


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


PHI = (1 + math.sqrt(5)) / 2


def brute_fixed_homoclinic(g, a, n):
    """Points x of the form a^inf x_1..x_{n-1} a^inf whose first-entry orders
    with respect to the fixed point a^inf are exactly (n, 0)."""
    found = set()
    for core in itertools.product(range(g.vertex_count), repeat=max(n - 1, 0)):
        x = SymbolicPoint((a,), core, (a,), 1)
        if not x.admissible(g) or x.is_periodic:
            continue
        if first_entry_orders(x, a) == (n, 0):
            found.add(x)
    return found


def first_entry_orders(x, a):
    """(theta_s, theta_u) of x w.r.t. a^inf straight from the definition:
    sigma^n x is in the local stable set iff x_i = a for all i >= n, and
    sigma^-n x is in the local unstable set iff x_i = a for all i <= -n."""
    lo, hi = x.start - 2, x.end + 2
    off = [i for i in range(lo, hi) if x[i] != a]
    if not off:
        return 0, 0
    return max(0, max(off) + 1), max(0, 1 - min(off))


def cat_lattice_counts(eps, n_max, matrix=((2, 1), (1, 1))):
    """Homoclinic points of the origin on the local unstable segment, binned by theta_s.

    A point t*v_u (|t| <= eps) lies on W^s(0) iff t*v_u - s*v_s = m for an
    integer vector m; then theta_s is the least n with |s| lam_s^n <= eps.
    """
    import numpy as np
    M = np.array(matrix, dtype=float)
    w, V = np.linalg.eig(M)
    iu = int(np.argmax(abs(w)))
    lam = abs(w[iu])
    B = np.column_stack([V[:, iu], V[:, 1 - iu]])
    Binv = np.linalg.inv(B)
    R = int(math.ceil(eps * lam ** n_max * 2 + 3))
    counts = [0] * (n_max + 1)
    vu = B[:, 0]
    for m1 in range(-R, R + 1):
        c = -m1 * vu[0] / vu[1]
        for m2 in range(int(math.floor(c)) - 3, int(math.ceil(c)) + 4):
            if m1 == 0 and m2 == 0:
                continue
            t, s = Binv @ np.array([m1, m2], dtype=float)
            if abs(t) > eps:
                continue
            n = max(0, math.ceil(math.log(abs(s) / eps) / math.log(lam) - 1e-12))
            if n <= n_max:
                counts[n] += 1
    return counts
