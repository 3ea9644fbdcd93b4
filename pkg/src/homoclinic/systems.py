"""Model maps of the plane and the 2-torus.

Toral automorphisms and the affine horseshoe are iterated exactly (integer
matrices, Fractions) whenever the input allows it; floats are converted to
Fractions without loss, iterated, and rounded once at the end.  Vectorized
float orbits are available separately for sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .shift import SymbolicPoint


class NonHyperbolicError(ValueError):
    pass


class EscapeError(ValueError):
    """Orbit left the domain of the map.

    ``time`` is the signed iterate index at which the point was found outside
    the branch domains (0 means the input itself was outside).
    """

    def __init__(self, time: int, point=None):
        self.time = time
        self.point = point
        super().__init__(f"orbit escaped at time {time}")


def _exact(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    return Fraction(float(v))


def _is_exact_point(x) -> bool:
    return all(isinstance(c, (Fraction, int, np.integer)) for c in x)


def _param(v) -> Fraction:
    """Parameters are kept exact; floats are read through their shortest repr so 0.2 means 1/5."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    return Fraction(repr(float(v)))


def _imatmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _imatpow(a, n):
    r = ((1, 0), (0, 1))
    while n:
        if n & 1:
            r = _imatmul(r, a)
        a = _imatmul(a, a)
        n >>= 1
    return r


# toral automorphisms --------------------------------------------------------

@dataclass(frozen=True)
class TorusAutomorphism:
    """Hyperbolic automorphism x -> A x (mod 1) of the 2-torus.

    ``lam_u`` is the eigenvalue of modulus > 1 (it may be negative), ``lam_s``
    the other one; ``v_u``/``v_s`` are unit eigenvectors with nonnegative first
    nonzero component.  ``expansion`` is ``|lam_u|``.
    """

    matrix: tuple
    lam_u: float
    lam_s: float
    v_u: np.ndarray = field(repr=False)
    v_s: np.ndarray = field(repr=False)
    name: str = "toral"

    torus = True
    certified = True

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    @property
    def inverse_matrix(self) -> tuple:
        (a, b), (c, d) = self.matrix
        det = self.det
        return ((d * det, -b * det), (-c * det, a * det))

    @property
    def expansion(self) -> float:
        return abs(self.lam_u)

    @property
    def A(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @property
    def Ainv(self) -> np.ndarray:
        return np.array(self.inverse_matrix, dtype=float)

    def power(self, k: int) -> tuple:
        if k >= 0:
            return _imatpow(self.matrix, k)
        return _imatpow(self.inverse_matrix, -k)

    def eigenframe(self) -> np.ndarray:
        """Rows are v_u, v_s: maps a vector to (unstable, stable) coordinates when orthonormal.

        For non-symmetric matrices the frame is oblique and coordinates come
        from the inverse of the column matrix [v_u v_s].
        """
        return np.linalg.inv(np.column_stack([self.v_u, self.v_s]))

    def coords(self, vec) -> np.ndarray:
        """(t, s) with vec = t v_u + s v_s."""
        return np.asarray(vec, dtype=float) @ self.eigenframe().T

    def jacobian(self, x=None) -> np.ndarray:
        return self.A

    def unstable_direction(self, x=None) -> np.ndarray:
        return self.v_u

    def stable_direction(self, x=None) -> np.ndarray:
        return self.v_s

    def eps_bound(self) -> float:
        """Largest admissible localization radius for local manifolds and balls."""
        na = float(np.linalg.norm(self.A, 2))
        ni = float(np.linalg.norm(self.Ainv, 2))
        return min(0.25, 1.0 / (1.0 + na), 1.0 / (1.0 + ni))

    def distance(self, x, y) -> np.ndarray:
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        d = np.minimum(d % 1.0, 1.0 - d % 1.0)
        return np.hypot(d[..., 0], d[..., 1])


def _unit_eigvec(a, b, c, d, lam):
    # (A - lam I) v = 0; use the better conditioned of the two rows
    r1 = (b, lam - a)
    r2 = (lam - d, c)
    v = r1 if math.hypot(*r1) >= math.hypot(*r2) else r2
    v = np.array(v, dtype=float)
    v /= np.linalg.norm(v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def make_toral(matrix, name: str = "toral") -> TorusAutomorphism:
    """Build a hyperbolic toral automorphism from a 2x2 integer matrix of determinant +-1."""
    m = np.asarray(matrix)
    if m.shape != (2, 2):
        raise ValueError("toral matrix must be 2x2")
    if not np.all(np.equal(np.mod(m, 1), 0)):
        raise ValueError("toral matrix entries must be integers")
    (a, b), (c, d) = [[int(v) for v in row] for row in m.tolist()]
    det = a * d - b * c
    if det not in (1, -1):
        raise ValueError(f"toral matrix must have determinant +-1, got {det}")
    tr = a + d
    disc = tr * tr - 4 * det
    if disc <= 0 or (det == 1 and abs(tr) <= 2) or (det == -1 and tr == 0):
        raise NonHyperbolicError(f"matrix {[[a, b], [c, d]]} is not hyperbolic (trace {tr}, det {det})")
    root = math.sqrt(disc)
    # avoid cancellation: the larger root by the sign-matched formula, the other by det/lam
    lam_u = (tr + math.copysign(root, tr)) / 2.0
    lam_s = det / lam_u
    return TorusAutomorphism(((a, b), (c, d)), lam_u, lam_s,
                             _unit_eigvec(a, b, c, d, lam_u), _unit_eigvec(a, b, c, d, lam_s), name)


def cat_map() -> TorusAutomorphism:
    return make_toral([[2, 1], [1, 1]], name="cat_map")


def periodic_points_toral(system: TorusAutomorphism, n: int) -> list:
    """All x in [0,1)^2 with A^n x = x (mod 1), as exact Fraction pairs, sorted.

    Solutions are M^{-1} z for z running over coset representatives of
    Z^2 / M Z^2, M = A^n - I; the representatives come from the Hermite form
    of M's column lattice.
    """
    if n < 1:
        raise ValueError("period must be positive")
    (p, q), (r, s) = system.power(n)
    m11, m12, m21, m22 = p - 1, q, r, s - 1
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise NonHyperbolicError("A^n - I is singular")
    # column operations that zero the bottom-left entry
    g = _xgcd(m21, m22)[0]
    # unimodular column change (m22/g, -m21/g | u, v) gives basis [[det/g, *], [0, g]]
    a_diag = abs(det) // g
    reps = [(i, j) for i in range(a_diag) for j in range(g)]
    pts = set()
    for z1, z2 in reps:
        x = Fraction(m22 * z1 - m12 * z2, det)
        y = Fraction(-m21 * z1 + m11 * z2, det)
        pts.add((x - math.floor(x), y - math.floor(y)))
    if len(pts) != abs(det):
        raise AssertionError("lattice reduction produced the wrong number of periodic points")
    return sorted(pts)


def _xgcd(a: int, b: int):
    """(g, u, v) with u a + v b = g >= 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_u, u = u, old_u - q * u
        old_v, v = v, old_v - q * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def least_period(system, p, max_period: int = 64) -> int:
    """Least k >= 1 with f^k(p) = p (exact for Fraction points)."""
    x = p
    for k in range(1, max_period + 1):
        x = apply(system, x, 1)
        if _same_point(system, x, p):
            return k
    raise ValueError(f"{p} is not periodic with period <= {max_period}")


def _same_point(system, x, y, tol=1e-12):
    if _is_exact_point(x) and _is_exact_point(y):
        if getattr(system, "torus", False):
            return all((a - b) % 1 == 0 for a, b in zip(x, y))
        return tuple(x) == tuple(y)
    if getattr(system, "torus", False):
        return float(system.distance(x, y)) <= tol
    return math.dist([float(c) for c in x], [float(c) for c in y]) <= tol


# affine horseshoe ----------------------------------------------------------

@dataclass(frozen=True)
class AffineHorseshoe:
    """Orientation-preserving affine horseshoe on the unit square.

    Horizontal strips H0 = [0,1]x[0,1/mu] and H1 = [0,1]x[1-1/mu,1] are
    mapped onto the vertical strips V0 = [0,kappa]x[0,1] and
    V1 = [1-kappa,1]x[0,1]:

        f|H0 (x, y) = (kappa x, mu y)
        f|H1 (x, y) = (1 - kappa + kappa x, mu y - mu + 1)

    The invariant Cantor set is conjugate to the full 2-shift; (0,0) and
    (1,1) are the fixed points.
    """

    kappa: Fraction = Fraction(1, 5)
    mu: Fraction = Fraction(5)
    name: str = "horseshoe"

    torus = False
    certified = True

    def __post_init__(self):
        k, m = _param(self.kappa), _param(self.mu)
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "mu", m)
        if not (0 < k < Fraction(1, 2)):
            raise ValueError(f"kappa must lie in (0, 1/2), got {k}")
        if not m > 2:
            raise ValueError(f"mu must exceed 2, got {m}")

    @property
    def expansion(self) -> float:
        return float(self.mu)

    def strip(self, y) -> int | None:
        """Index of the horizontal strip containing height y, None in the gap."""
        if 0 <= y <= 1 / self.mu:
            return 0
        if 1 - 1 / self.mu <= y <= 1:
            return 1
        return None

    def vstrip(self, x) -> int | None:
        if 0 <= x <= self.kappa:
            return 0
        if 1 - self.kappa <= x <= 1:
            return 1
        return None

    def _snap(self, v, edges, tol):
        # float inputs on a strip edge can round into the gap; pull them back
        if tol:
            for e in edges:
                if abs(v - e) <= tol:
                    return e
        return v

    def forward(self, x, y, tol=0):
        """One step of f; raises EscapeError(0) outside H0 u H1.

        ``tol`` > 0 snaps coordinates within tol of a strip edge onto it.
        """
        m = self.mu
        x = self._snap(x, (0, 1), tol)
        y = self._snap(y, (0, 1 / m, 1 - 1 / m, 1), tol)
        if not (0 <= x <= 1):
            raise EscapeError(0, (x, y))
        s = self.strip(y)
        if s is None:
            raise EscapeError(0, (x, y))
        k, m = self.kappa, self.mu
        if s == 0:
            return k * x, m * y
        return 1 - k + k * x, m * y - m + 1

    def backward(self, x, y, tol=0):
        k = self.kappa
        x = self._snap(x, (0, k, 1 - k, 1), tol)
        y = self._snap(y, (0, 1), tol)
        if not (0 <= y <= 1):
            raise EscapeError(0, (x, y))
        s = self.vstrip(x)
        if s is None:
            raise EscapeError(0, (x, y))
        k, m = self.kappa, self.mu
        if s == 0:
            return x / k, y / m
        return (x - (1 - k)) / k, y / m + 1 - 1 / m

    def jacobian(self, x=None) -> np.ndarray:
        return np.diag([float(self.kappa), float(self.mu)])

    def unstable_direction(self, x=None) -> np.ndarray:
        return np.array([0.0, 1.0])

    def stable_direction(self, x=None) -> np.ndarray:
        return np.array([1.0, 0.0])

    def eps_bound(self) -> float:
        return float(1 - self.kappa)

    def distance(self, x, y) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True)
class HenonMap:
    """(x, y) -> (1 - a x^2 + y, b x).  Exploratory only: no hyperbolicity certificate."""

    a: float = 1.4
    b: float = 0.3
    name: str = "henon"

    torus = False
    certified = False

    def __post_init__(self):
        if self.b == 0:
            raise ValueError("Henon map needs b != 0 to be invertible")

    def forward(self, x, y):
        return 1 - self.a * x * x + y, self.b * x

    def backward(self, x, y):
        xp = y / self.b
        return xp, x - 1 + self.a * xp * xp

    def jacobian(self, x) -> np.ndarray:
        return np.array([[-2.0 * self.a * float(x[0]), 1.0], [float(self.b), 0.0]])

    def unstable_direction(self, x=None) -> np.ndarray:
        return np.array([1.0, 0.0])

    def stable_direction(self, x=None) -> np.ndarray:
        return np.array([0.0, 1.0])

    def distance(self, x, y) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True)
class IdentityMap:
    """The identity on the torus (or the plane); a zero-entropy control."""

    torus: bool = True
    name: str = "identity"
    certified = False

    def forward(self, x, y):
        return x, y

    backward = forward

    def jacobian(self, x=None) -> np.ndarray:
        return np.eye(2)

    def unstable_direction(self, x=None) -> np.ndarray:
        return np.array([1.0, 0.0])

    def stable_direction(self, x=None) -> np.ndarray:
        return np.array([0.0, 1.0])

    def distance(self, x, y) -> np.ndarray:
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.torus:
            d = np.minimum(d % 1.0, 1.0 - d % 1.0)
        return np.hypot(d[..., 0], d[..., 1])


# iteration ------------------------------------------------------------------

def apply(system, x, k: int = 1):
    """k-fold application of the map (negative k iterates the inverse).

    Exact inputs (ints/Fractions) give exact outputs; float inputs are
    iterated exactly and rounded once.  Toral results lie in [0,1)^2.
    Horseshoe orbits leaving the strips raise EscapeError with the signed
    time of escape.
    """
    exact_in = _is_exact_point(x)
    if isinstance(system, TorusAutomorphism):
        (a, b), (c, d) = system.power(k)
        x0, y0 = _exact(x[0]), _exact(x[1])
        u = a * x0 + b * y0
        v = c * x0 + d * y0
        u -= math.floor(u)
        v -= math.floor(v)
        if exact_in:
            return (u, v)
        fu, fv = float(u), float(v)
        # rounding can land on 1.0 for values just below 1
        return (0.0 if fu >= 1.0 else fu, 0.0 if fv >= 1.0 else fv)
    if isinstance(system, AffineHorseshoe):
        p = (_exact(x[0]), _exact(x[1]))
        step = system.forward if k >= 0 else system.backward
        sign = 1 if k >= 0 else -1
        tol = 0 if exact_in else Fraction(1, 10 ** 12)
        for i in range(abs(k)):
            try:
                p = step(*p, tol)
            except EscapeError:
                raise EscapeError(sign * i, x) from None
        return p if exact_in else (float(p[0]), float(p[1]))
    if isinstance(system, IdentityMap):
        return tuple(x)
    step = system.forward if k >= 0 else system.backward
    p = (float(x[0]), float(x[1]))
    for _ in range(abs(k)):
        p = step(*p)
    return p


def orbit(system, points, n: int) -> np.ndarray:
    """Float orbits of shape (N, n, 2): f^0 .. f^(n-1) of each row of ``points``.

    Horseshoe iterates outside the strips become NaN from the escape on.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((len(pts), n, 2))
    if n == 0:
        return out
    cur = pts.copy()
    out[:, 0] = cur
    if isinstance(system, TorusAutomorphism):
        A = system.A
        for i in range(1, n):
            cur = np.mod(cur @ A.T, 1.0)
            cur[cur >= 1.0] = 0.0
            out[:, i] = cur
    elif isinstance(system, AffineHorseshoe):
        k, m = float(system.kappa), float(system.mu)
        lo, hi = 1.0 / m, 1.0 - 1.0 / m
        bad = ~((cur[:, 0] >= 0) & (cur[:, 0] <= 1) & (cur[:, 1] >= 0) & (cur[:, 1] <= 1))
        for i in range(1, n):
            y = cur[:, 1]
            s0 = y <= lo
            s1 = y >= hi
            bad |= ~(s0 | s1)
            nx = np.where(s0, k * cur[:, 0], 1 - k + k * cur[:, 0])
            ny = np.where(s0, m * y, m * y - m + 1)
            cur = np.column_stack([nx, ny])
            cur[bad] = np.nan
            out[:, i] = cur
    elif isinstance(system, IdentityMap):
        out[:] = cur[:, None, :]
        if system.torus:
            out %= 1.0
    else:
        for i in range(1, n):
            nx, ny = system.forward(cur[:, 0], cur[:, 1])
            cur = np.column_stack([nx, ny])
            out[:, i] = cur
    return out


# horseshoe coding -----------------------------------------------------------

def itinerary(h: AffineHorseshoe, x, n_fwd: int, n_bwd: int = 0):
    """Symbols of the strips visited.

    Returns ``(forward, backward)``: ``forward[k]`` is the strip of f^k(x) for
    0 <= k < n_fwd, and ``backward`` lists the strips of f^-n_bwd(x) ..
    f^-1(x) in time order.  Escape inside the window raises EscapeError with
    the signed escape time.
    """
    p = (_exact(x[0]), _exact(x[1]))
    fwd = []
    cur = p
    for k in range(n_fwd):
        if not (0 <= cur[0] <= 1) or h.strip(cur[1]) is None:
            raise EscapeError(k, x)
        fwd.append(h.strip(cur[1]))
        if k + 1 < n_fwd:
            cur = h.forward(*cur)
    bwd = []
    cur = p
    for k in range(1, n_bwd + 1):
        try:
            cur = h.backward(*cur)
        except EscapeError:
            raise EscapeError(-k, x) from None
        bwd.append(h.strip(cur[1]))
    return tuple(fwd), tuple(reversed(bwd))


def point_from_itinerary(h: AffineHorseshoe, s: SymbolicPoint, exact: bool = False):
    """The point of the invariant set whose itinerary is ``s`` (index 0 = present strip).

    x = sum_{j>=1} kappa^(j-1) (1-kappa) s_{-j},  y = sum_{j>=0} (mu-1) mu^-(j+1) s_j,
    with periodic tails summed as geometric series, so the result is exact
    in rationals.
    """
    if any(sym not in (0, 1) for sym in s.left + s.core + s.right):
        raise ValueError("itinerary must use symbols 0 and 1")
    k, m = h.kappa, h.mu
    # y: indices 0 .. E-1 directly, then the right tail from E on
    E = max(s.end, 0)
    y = sum(((m - 1) / m ** (j + 1) * s[j] for j in range(E)), Fraction(0))
    R = len(s.right)
    tail = sum(((m - 1) / m ** (t + 1) * s[E + t] for t in range(R)), Fraction(0))
    y += tail / m ** E / (1 - 1 / m ** R)
    # x: indices -1 .. B directly, then the left tail below B
    B = min(s.start, 0)
    x = sum((k ** (j - 1) * (1 - k) * s[-j] for j in range(1, -B + 1)), Fraction(0))
    L = len(s.left)
    tail = sum((k ** t * (1 - k) * s[B - 1 - t] for t in range(L)), Fraction(0))
    x += k ** (-B) * tail / (1 - k ** L)
    if exact:
        return (x, y)
    return (float(x), float(y))


# hyperbolicity certificates ------------------------------------------------

@dataclass
class ConeReport:
    ok: bool
    aperture: float
    min_expansion: float
    axis_expansion: float
    min_expansion_stable: float
    points_checked: int
    points_skipped: int = 0
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _min_gain(M: np.ndarray, center: float, half: float) -> float:
    """min |M v| over unit v at angle in [center-half, center+half] (closed form)."""
    Q = M.T @ M
    alpha = 0.5 * (Q[0, 0] + Q[1, 1])
    beta = 0.5 * (Q[0, 0] - Q[1, 1])
    gamma = Q[0, 1]
    # |M v(th)|^2 = alpha + beta cos 2th + gamma sin 2th
    cands = [center - half, center + half]
    phi = 0.5 * math.atan2(gamma, beta)
    for base in (phi, phi + math.pi / 2):
        for j in range(-4, 5):
            th = base + j * math.pi
            if center - half <= th <= center + half:
                cands.append(th)
    vals = [alpha + beta * math.cos(2 * t) + gamma * math.sin(2 * t) for t in cands]
    return math.sqrt(max(min(vals), 0.0))


def _angle_between_lines(u, v) -> float:
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), abs(u[0] * v[0] + u[1] * v[1]))


def _cone_maps_inside(M, e, aperture, slack=1e-12):
    # a sector narrower than pi maps to the sector spanned by the images of its edges
    th = math.atan2(e[1], e[0])
    worst = _angle_between_lines(M @ e, e)
    for sgn in (-1.0, 1.0):
        r = np.array([math.cos(th + sgn * aperture), math.sin(th + sgn * aperture)])
        worst = max(worst, _angle_between_lines(M @ r, e))
    return worst < aperture - slack, th


def cone_condition_check(system, sample_grid, aperture: float) -> ConeReport:
    """Certify invariant expanding cones at the sample points.

    The unstable cone of half-angle ``aperture`` about the system's unstable
    direction must be mapped strictly inside itself by Df with every vector
    stretched by more than 1; the stable cone likewise under Df^-1.  Sample
    points outside the map's domain (horseshoe gap) are skipped.
    """
    pts = np.atleast_2d(np.asarray(sample_grid, dtype=float))
    min_u = math.inf
    min_s = math.inf
    axis = math.inf
    failures = []
    checked = skipped = 0
    for x in pts:
        if isinstance(system, AffineHorseshoe) and system.strip(x[1]) is None:
            skipped += 1
            continue
        checked += 1
        J = system.jacobian(x)
        eu = system.unstable_direction(x)
        es = system.stable_direction(x)
        inside_u, thu = _cone_maps_inside(J, eu, aperture)
        try:
            Jinv = np.linalg.inv(J)
        except np.linalg.LinAlgError:
            failures.append((tuple(x), "singular derivative"))
            continue
        inside_s, ths = _cone_maps_inside(Jinv, es, aperture)
        gu = _min_gain(J, thu, aperture)
        gs = _min_gain(Jinv, ths, aperture)
        min_u = min(min_u, gu)
        min_s = min(min_s, gs)
        axis = min(axis, float(np.linalg.norm(J @ eu)))
        if not inside_u:
            failures.append((tuple(x), "unstable cone not mapped inside"))
        if not inside_s:
            failures.append((tuple(x), "stable cone not mapped inside"))
        if gu <= 1.0:
            failures.append((tuple(x), f"unstable expansion {gu:.6g} <= 1"))
        if gs <= 1.0:
            failures.append((tuple(x), f"stable expansion {gs:.6g} <= 1"))
    ok = checked > 0 and not failures
    return ConeReport(ok, aperture, min_u, axis, min_s, checked, skipped, failures)


SYSTEM_KINDS = ("cat_map", "toral", "horseshoe", "henon")


def system_metadata(system) -> dict:
    if isinstance(system, TorusAutomorphism):
        return {"kind": system.name, "matrix": [list(r) for r in system.matrix],
                "lambda_u": system.lam_u, "entropy": math.log(system.expansion), "certified": True}
    if isinstance(system, AffineHorseshoe):
        return {"kind": "horseshoe", "kappa": str(system.kappa), "mu": str(system.mu),
                "entropy": math.log(2), "certified": True}
    if isinstance(system, HenonMap):
        return {"kind": "henon", "a": system.a, "b": system.b, "certified": False, "label": "exploratory"}
    return {"kind": getattr(system, "name", type(system).__name__), "certified": False}
