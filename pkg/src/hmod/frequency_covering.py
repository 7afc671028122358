"""Heisenberg lattice covering of frequency space and its comparison coverings.

Cells of the structured covering are P_gamma = P . gamma = T_gamma P + gamma with
P = (-eps, 2+eps)^{2n+1} and gamma running over the even-integer lattice.
Intersection counts are exact: coordinates are scaled by the denominator of
eps so every test is integer arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .nilpotent_core import HPoint, as_vector
from .representations import Grid, plateau_1d, _smoothstep


# ----------------------------------------------------------------------------
# lattice and affine maps
# ----------------------------------------------------------------------------

def _r4_floor(radius) -> int:
    r = Fraction(radius) if not isinstance(radius, float) else Fraction(radius)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return math.floor(r ** 4)


def norm4_int(g: np.ndarray) -> np.ndarray:
    """Exact fourth power of the Koranyi norm for integer points (..., 2n+1)."""
    g = np.asarray(g, dtype=np.int64)
    r2 = np.sum(g[..., :-1] ** 2, axis=-1)
    return r2 * r2 + 16 * g[..., -1] ** 2


def lattice_ball_array(radius, n: int) -> np.ndarray:
    """Even-integer points with Koranyi norm <= radius, sorted on (c, b, a)."""
    R4 = _r4_floor(radius)
    rmax = math.isqrt(math.isqrt(R4))
    half = rmax // 2
    ev = 2 * np.arange(-half, half + 1, dtype=np.int64)
    pq = np.array(list(itertools.product(ev, repeat=2 * n)), dtype=np.int64).reshape(-1, 2 * n)
    r2 = np.sum(pq ** 2, axis=1)
    rest = R4 - r2 * r2
    keep = rest >= 0
    pq, rest = pq[keep], rest[keep]
    cmax = np.array([math.isqrt(int(x) // 16) for x in rest], dtype=np.int64)
    counts = cmax // 2 * 2 + 1
    pq_rep = np.repeat(pq, counts, axis=0)
    cs = np.concatenate([2 * np.arange(-(m // 2), m // 2 + 1) for m in cmax]) if len(cmax) else np.zeros(0, np.int64)
    pts = np.column_stack([pq_rep, cs]).astype(np.int64)
    keys = [pts[:, j] for j in range(n - 1, -1, -1)] + [pts[:, n + j] for j in range(n - 1, -1, -1)] + [pts[:, -1]]
    return pts[np.lexsort(keys)]


def lattice_ball(radius, n: int) -> list:
    return [HPoint(as_vector([int(v) for v in row])) for row in lattice_ball_array(radius, n)]


def lattice_mul(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Heisenberg product of integer point arrays (broadcasting); exact for even entries."""
    g, h = np.asarray(g, dtype=np.int64), np.asarray(h, dtype=np.int64)
    n = (g.shape[-1] - 1) // 2
    sym = np.sum(g[..., :n] * h[..., n:2 * n], axis=-1) - np.sum(g[..., n:2 * n] * h[..., :n], axis=-1)
    out = g + h
    out[..., -1] += sym // 2
    return out


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def apply(self, x):
        return self.matrix.dot(np.asarray(x)) + self.offset

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other."""
        return AffineMap(self.matrix.dot(other.matrix), self.matrix.dot(other.offset) + self.offset)

    def det(self):
        return exact_det(self.matrix)

    def __eq__(self, other) -> bool:
        return isinstance(other, AffineMap) and bool(np.all(self.matrix == other.matrix)) \
            and bool(np.all(self.offset == other.offset))


def exact_det(M: np.ndarray):
    """Determinant by fraction-exact elimination (float input is converted exactly)."""
    A = [[Fraction(x) for x in row] for row in np.asarray(M, dtype=object)]
    d, det = len(A), Fraction(1)
    for c in range(d):
        piv = next((r for r in range(c, d) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, d):
            f = A[r][c] / A[c][c]
            A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def t_matrix(g) -> np.ndarray:
    """Linear part of X -> X . g: identity with last row (b/2, -a/2, 1)."""
    coords = g.coords if isinstance(g, HPoint) else as_vector(list(g))
    d = len(coords)
    n = (d - 1) // 2
    M = np.array([[Fraction(int(i == j)) for j in range(d)] for i in range(d)], dtype=object)
    if coords.dtype != object:
        M = M.astype(float)
    M[-1, :n] = coords[n:2 * n] / 2
    M[-1, n:2 * n] = -coords[:n] / 2
    return M


def t_gamma(g) -> AffineMap:
    coords = g.coords if isinstance(g, HPoint) else as_vector(list(g))
    return AffineMap(t_matrix(coords), coords.copy())


# ----------------------------------------------------------------------------
# coverings
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Covering:
    """kind in {heisenberg, uniform, dyadic, homogeneous_dyadic}."""

    kind: str
    n: int
    eps: Fraction = Fraction(1, 4)
    radius: object = 0
    k_min: int = 0
    k_max: int | None = None

    def __post_init__(self):
        if self.kind not in ("heisenberg", "uniform", "dyadic", "homogeneous_dyadic"):
            raise ValueError(f"unknown covering kind {self.kind!r}")
        eps = Fraction(self.eps).limit_denominator(10 ** 6)
        if not 0 < eps < Fraction(1, 2):
            raise ValueError("eps must lie in (0, 1/2)")
        object.__setattr__(self, "eps", eps)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def indices(self) -> np.ndarray:
        if self.kind == "heisenberg":
            return lattice_ball_array(self.radius, self.n)
        if self.kind == "uniform":
            return box_array(self.radius, self.dim)
        top = self.k_max if self.k_max is not None else 0
        return np.arange(self.k_min, top + 1)

    def describe(self) -> dict:
        out = {"kind": self.kind, "n": self.n}
        if self.kind in ("heisenberg", "uniform"):
            out.update(eps=float(self.eps), radius=float(self.radius))
        else:
            out.update(k_min=self.k_min, k_max=self.k_max)
        return out


def heisenberg(n: int, eps=Fraction(1, 4), radius=6) -> Covering:
    return Covering("heisenberg", n, eps, radius)


def uniform(n: int, eps=Fraction(1, 4), radius=6) -> Covering:
    return Covering("uniform", n, eps, radius)


def dyadic(n: int, k_max: int | None = None) -> Covering:
    return Covering("dyadic", n, k_min=0, k_max=k_max)


def homogeneous_dyadic(n: int, k_min: int = 0, k_max: int | None = None) -> Covering:
    return Covering("homogeneous_dyadic", n, k_min=k_min, k_max=k_max)


def box_array(radius, d: int) -> np.ndarray:
    """Even-integer points k with max |k_i| <= radius."""
    half = int(math.floor(Fraction(radius))) // 2
    ev = 2 * np.arange(-half, half + 1, dtype=np.int64)
    return np.array(list(itertools.product(ev, repeat=d)), dtype=np.int64).reshape(-1, d)


def shell_bounds2(kind: str, k: int) -> tuple[Fraction, Fraction | None]:
    """Squared inner and outer radius; inner None-equivalent 0 with closed centre for B_0."""
    if kind == "dyadic" and k == 0:
        return Fraction(-1), Fraction(16)
    return Fraction(4) ** (k - 2), Fraction(4) ** (k + 2)


# ----------------------------------------------------------------------------
# exact cell geometry
# ----------------------------------------------------------------------------

def _scale(eps: Fraction) -> tuple[int, int]:
    """(S, E): coordinates are multiplied by S, and E = eps * S is an integer."""
    S = eps.denominator
    return S, eps.numerator


def cell_meets_box(gam: np.ndarray, lo: np.ndarray, hi: np.ndarray, eps: Fraction) -> np.ndarray:
    """Exact test P_gamma cap (lo, hi) != empty for integer gamma and open boxes.

    lo and hi are given in units scaled by the eps denominator (see _scale).
    """
    S, E = _scale(eps)
    gam = np.asarray(gam, dtype=np.int64)
    d = gam.shape[-1]
    m = d - 1
    n = m // 2
    g = gam * S
    ylo = np.maximum(-E, lo[..., :m] - g[..., :m])
    yhi = np.minimum(2 * S + E, hi[..., :m] - g[..., :m])
    ok = np.all(ylo < yhi, axis=-1)
    coef = np.concatenate([gam[..., n:m] // 2, -(gam[..., :n] // 2)], axis=-1)
    a, b = coef * ylo, coef * yhi
    Lmin = np.sum(np.minimum(a, b), axis=-1)
    Lmax = np.sum(np.maximum(a, b), axis=-1)
    tlo = g[..., -1] - E + Lmin
    thi = g[..., -1] + 2 * S + E + Lmax
    return ok & (tlo < hi[..., -1]) & (lo[..., -1] < thi)


def cube_box(k: np.ndarray, eps: Fraction) -> tuple[np.ndarray, np.ndarray]:
    S, E = _scale(eps)
    k = np.asarray(k, dtype=np.int64)
    return k * S - E, k * S + 2 * S + E


def _count_even(lo_s: np.ndarray, hi_s: np.ndarray, S: int, bound: np.ndarray | int) -> np.ndarray:
    """Number of even m with lo_s < m S < hi_s and |m| <= bound (all integers)."""
    jmin = np.floor_divide(lo_s, 2 * S) + 1
    jmax = -np.floor_divide(-hi_s, 2 * S) - 1
    jb = np.floor_divide(bound, 2)
    jmin = np.maximum(jmin, -jb)
    jmax = np.minimum(jmax, jb)
    return np.maximum(0, jmax - jmin + 1)


def _offsets(n: int) -> np.ndarray:
    return np.array(list(itertools.product((-2, 0, 2), repeat=2 * n)), dtype=np.int64).reshape(-1, 2 * n)


def _offset_ranges(off: np.ndarray, gam_pq: np.ndarray, S: int, E: int):
    """Range (Lmin, Lmax) of (b.y_p - a.y_q)/2 over the y-box selected by an offset."""
    n = off.shape[-1] // 2
    ylo = np.maximum(-E, off * S - E)
    yhi = np.minimum(2 * S + E, off * S + 2 * S + E)
    coef = np.concatenate([gam_pq[..., n:] // 2, -(gam_pq[..., :n] // 2)], axis=-1)
    a, b = coef * ylo, coef * yhi
    return np.sum(np.minimum(a, b), axis=-1), np.sum(np.maximum(a, b), axis=-1)


def heis_uniform_counts(gam: np.ndarray, eps: Fraction, box_radius) -> np.ndarray:
    """For each gamma: number of uniform cubes (box-truncated) meeting P_gamma."""
    S, E = _scale(eps)
    gam = np.asarray(gam, dtype=np.int64)
    d = gam.shape[1]
    n = (d - 1) // 2
    Rb = int(math.floor(Fraction(box_radius)))
    total = np.zeros(len(gam), dtype=np.int64)
    for off in _offsets(n):
        k_pq = gam[:, :2 * n] + off
        inside = np.all(np.abs(k_pq) <= Rb, axis=1)
        Lmin, Lmax = _offset_ranges(off, gam[:, :2 * n], S, E)
        tlo = gam[:, -1] * S - E + Lmin
        thi = gam[:, -1] * S + 2 * S + E + Lmax
        cnt = _count_even(tlo - 2 * S - E, thi + E, S, Rb)
        total += np.where(inside, cnt, 0)
    return total


def uniform_heis_counts(ks: np.ndarray, eps: Fraction, radius) -> np.ndarray:
    """For each cube k: number of lattice cells (Koranyi-ball truncated) meeting Q_k."""
    S, E = _scale(eps)
    ks = np.asarray(ks, dtype=np.int64)
    d = ks.shape[1]
    n = (d - 1) // 2
    R4 = _r4_floor(radius)
    total = np.zeros(len(ks), dtype=np.int64)
    for off in _offsets(n):
        g_pq = ks[:, :2 * n] - off
        r2 = np.sum(g_pq ** 2, axis=1)
        rest = R4 - r2 * r2
        ok = rest >= 0
        cmax = np.zeros(len(ks), dtype=np.int64)
        cmax[ok] = [math.isqrt(int(x) // 16) for x in rest[ok]]
        Lmin, Lmax = _offset_ranges(off, g_pq, S, E)
        lo = ks[:, -1] * S - 2 * S - 2 * E - Lmax
        hi = ks[:, -1] * S + 2 * S + 2 * E - Lmin
        cnt = _count_even(lo, hi, S, cmax)
        total += np.where(ok, cnt, 0)
    return total


def heis_uniform_members(gamma, eps: Fraction, box_radius) -> np.ndarray:
    """Cubes k (box-truncated) meeting P_gamma for a single gamma, by direct exact tests."""
    gamma = np.asarray(gamma, dtype=np.int64)
    d = len(gamma)
    n = (d - 1) // 2
    S, E = _scale(eps)
    Rb = int(math.floor(Fraction(box_radius)))
    out = []
    for off in _offsets(n):
        k_pq = gamma[:2 * n] + off
        if np.any(np.abs(k_pq) > Rb):
            continue
        Lmin, Lmax = _offset_ranges(off, gamma[None, :2 * n], S, E)
        tlo = gamma[-1] * S - E + Lmin[0]
        thi = gamma[-1] * S + 2 * S + E + Lmax[0]
        j0 = (tlo - 2 * S - E) // (2 * S) + 1
        j1 = -((-(thi + E)) // (2 * S)) - 1
        for j in range(max(j0, -(Rb // 2)), min(j1, Rb // 2) + 1):
            k = np.concatenate([k_pq, [2 * j]])
            lo, hi = cube_box(k, eps)
            assert cell_meets_box(gamma, lo, hi, eps)
            out.append(k)
    return np.array(out, dtype=np.int64).reshape(-1, d)


def cell_vertices(gam: np.ndarray, eps: Fraction) -> np.ndarray:
    """Scaled integer vertices of cl(P_gamma), shape (M, 2^d, d)."""
    S, E = _scale(eps)
    gam = np.asarray(gam, dtype=np.int64)
    d = gam.shape[1]
    n = (d - 1) // 2
    corners = np.array(list(itertools.product((-E, 2 * S + E), repeat=d)), dtype=np.int64)
    v = np.broadcast_to(corners, (len(gam),) + corners.shape).copy()
    a, b = gam[:, :n] // 2, gam[:, n:2 * n] // 2
    shear = np.einsum("mvj,mj->mv", v[:, :, :n], b) - np.einsum("mvj,mj->mv", v[:, :, n:2 * n], a)
    v[:, :, -1] += shear
    return v + (gam * S)[:, None, :]


def _qp_faces(d: int):
    return list(itertools.product((0, 1, 2), repeat=d))


def min_dist2_float(gam: np.ndarray, eps: float) -> np.ndarray:
    """min |T y + gamma|^2 over the closed box y in [-eps, 2+eps]^d, by face enumeration."""
    gam = np.asarray(gam, dtype=float)
    M, d = gam.shape
    n = (d - 1) // 2
    T = np.broadcast_to(np.eye(d), (M, d, d)).copy()
    T[:, -1, :n] = gam[:, n:2 * n] / 2
    T[:, -1, n:2 * n] = -gam[:, :n] / 2
    lo, hi = -eps, 2 + eps
    best = np.full(M, np.inf)
    for face in _qp_faces(d):
        free = [i for i, f in enumerate(face) if f == 2]
        fixed = [i for i, f in enumerate(face) if f != 2]
        yF = np.array([lo if face[i] == 0 else hi for i in fixed])
        r0 = gam + (T[:, :, fixed] @ yF if fixed else 0)
        if free:
            A = T[:, :, free]
            AtA = np.einsum("mij,mik->mjk", A, A)
            rhs = -np.einsum("mij,mi->mj", A, r0)
            yU = np.linalg.solve(AtA, rhs[..., None])[..., 0]
            feas = np.all((yU >= lo - 1e-12) & (yU <= hi + 1e-12), axis=1)
            res = r0 + np.einsum("mij,mj->mi", A, yU)
        else:
            feas = np.ones(M, bool)
            res = r0
        val = np.sum(res * res, axis=1)
        best = np.where(feas, np.minimum(best, val), best)
    return best


def _solve_exact(A, b):
    """Solve the square system A x = b over Q."""
    m = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(bb)] for row, bb in zip(A, b)]
    for c in range(m):
        piv = next(r for r in range(c, m) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(m):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][m] / M[i][i] for i in range(m)]


def min_dist2_exact(gamma, eps: Fraction) -> Fraction:
    """Exact rational version of min_dist2_float for one cell."""
    g = [Fraction(int(v)) for v in gamma]
    d = len(g)
    T = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    n = (d - 1) // 2
    for j in range(n):
        T[-1][j] = g[n + j] / 2
        T[-1][n + j] = -g[j] / 2
    lo, hi = -eps, 2 + eps
    best = None
    for face in _qp_faces(d):
        free = [i for i, f in enumerate(face) if f == 2]
        y = [lo if f == 0 else hi if f == 1 else None for f in face]
        r0 = [g[i] + sum(T[i][j] * y[j] for j in range(d) if y[j] is not None) for i in range(d)]
        if free:
            AtA = [[sum(T[i][a] * T[i][b] for i in range(d)) for b in free] for a in free]
            rhs = [-sum(T[i][a] * r0[i] for i in range(d)) for a in free]
            yU = _solve_exact(AtA, rhs)
            if any(v < lo or v > hi for v in yU):
                continue
            for a, v in zip(free, yU):
                y[a] = v
        res = [g[i] + sum(T[i][j] * y[j] for j in range(d)) for i in range(d)]
        val = sum(r * r for r in res)
        best = val if best is None or val < best else best
    return best


def cell_radius_range2(gam: np.ndarray, eps: Fraction, thresholds=()) -> tuple[np.ndarray, np.ndarray]:
    """(min, max) of |Xi|^2 over cl(P_gamma).

    The max is exact (vertex enumeration).  The min is float, recomputed in
    rational arithmetic wherever it lies within 1e-9 of one of the thresholds.
    Both are returned as float64 arrays plus exactness is guaranteed for
    comparisons against the given thresholds.
    """
    S, _ = _scale(eps)
    verts = cell_vertices(gam, eps)
    vmax = np.max(np.sum(verts.astype(object) ** 2, axis=2), axis=1)
    rmax2 = np.array([Fraction(int(v), S * S) for v in vmax], dtype=object)
    rmin2 = min_dist2_float(gam, float(eps)).astype(object)
    th = np.array([float(t) for t in thresholds])
    if len(th):
        near = np.min(np.abs(rmin2.astype(float)[:, None] - th[None, :]), axis=1) < 1e-9 * (1 + th.max())
        for i in np.nonzero(near)[0]:
            rmin2[i] = min_dist2_exact(gam[i], eps)
    return rmin2, rmax2


def _shells_meeting(rmin2, rmax2, kind: str, k_lo: int, k_hi: int) -> np.ndarray:
    """Boolean table (M, K) of shells k_lo..k_hi meeting a set whose |Xi|^2 spans (rmin2, rmax2)."""
    ks = range(k_lo, k_hi + 1)
    out = np.zeros((len(rmin2), len(ks)), dtype=bool)
    for j, k in enumerate(ks):
        in2, out2 = shell_bounds2(kind, k)
        out[:, j] = [max(a, in2) < min(b, out2) for a, b in zip(rmin2, rmax2)]
    return out


# ----------------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedValue:
    value: float
    argmax: object
    changed_in_last_shell: bool
    truncation: object
    extra: dict = field(default_factory=dict)

    def report(self) -> dict:
        arg = self.argmax.tolist() if isinstance(self.argmax, np.ndarray) else self.argmax
        return {"value": self.value, "argmax": arg, "changed_in_last_shell": self.changed_in_last_shell,
                "truncation": self.truncation, **self.extra}


def heisenberg_neighbors(n: int, eps=Fraction(1, 4), search_radius: int = 14) -> np.ndarray:
    """All delta in Gamma with P . delta meeting P (the set gamma' . gamma^{-1} over gamma')."""
    eps = Fraction(eps)
    cand = lattice_ball_array(search_radius, n)
    lo, hi = cube_box(np.zeros((1, 2 * n + 1), dtype=np.int64), eps)
    hit = cand[cell_meets_box(cand, np.broadcast_to(lo, cand.shape), np.broadcast_to(hi, cand.shape), eps)]
    far = norm4_int(hit) > 9 ** 4
    if np.any(far):
        raise AssertionError(f"intersecting lattice offsets beyond Koranyi radius 9: {hit[far][:5].tolist()}")
    edge = norm4_int(hit) > (search_radius - 2) ** 4
    if np.any(edge):
        raise AssertionError("neighbour search radius too small")
    return hit


def max_neighbor_norm(n: int, eps=Fraction(1, 4)) -> float:
    D = heisenberg_neighbors(n, eps)
    return float(np.max(norm4_int(D))) ** 0.25


def admissibility_constant(c: Covering) -> TruncatedValue:
    """sup over truncated indices of the number of intersecting members of the same covering."""
    if c.kind == "heisenberg":
        D = heisenberg_neighbors(c.n, c.eps)
        vals = {}
        for R in (c.radius - 2, c.radius):
            G = lattice_ball_array(R, c.n) if R >= 0 else np.zeros((0, c.dim), np.int64)
            R4 = _r4_floor(R) if R >= 0 else -1
            cnt = np.zeros(len(G), dtype=np.int64)
            for dlt in D:
                cnt += norm4_int(lattice_mul(dlt, G)) <= R4
            vals[R] = (int(cnt.max()) if len(cnt) else 0, G[int(np.argmax(cnt))] if len(cnt) else None)
        v, arg = vals[c.radius]
        return TruncatedValue(v, arg, v != vals[c.radius - 2][0], float(c.radius),
                              {"neighbor_count": len(D), "max_neighbor_norm": max_neighbor_norm(c.n, c.eps)})
    if c.kind == "uniform":
        res = {}
        for R in (c.radius - 2, c.radius):
            K = box_array(R, c.dim)
            Rb = int(math.floor(Fraction(R)))
            cnt = np.zeros(len(K), dtype=np.int64)
            for off in itertools.product((-2, 0, 2), repeat=c.dim):
                cnt += np.all(np.abs(K + np.array(off)) <= Rb, axis=1)
            res[R] = (int(cnt.max()), K[int(np.argmax(cnt))])
        v, arg = res[c.radius]
        return TruncatedValue(v, arg, v != res[c.radius - 2][0], float(c.radius))
    kind = c.kind
    top = c.k_max if c.k_max is not None else c.k_min + 12
    ks = list(range(c.k_min, top + 1))

    def overlap(k, j):
        a, b = shell_bounds2(kind, k), shell_bounds2(kind, j)
        return max(a[0], b[0]) < min(a[1], b[1])

    cnt = [sum(overlap(k, j) for j in ks) for k in ks]
    prev = [sum(overlap(k, j) for j in ks[:-1]) for k in ks[:-1]]
    return TruncatedValue(max(cnt), ks[int(np.argmax(cnt))], max(cnt) != max(prev), [c.k_min, top])


@dataclass(frozen=True)
class IntersectionCounts:
    n_ab: int
    argmax_ab: object
    n_ba: int
    argmax_ba: object
    per_index_a: np.ndarray | None = None
    per_index_b: np.ndarray | None = None

    def report(self) -> dict:
        conv = lambda v: v.tolist() if isinstance(v, np.ndarray) else v
        out = {"N_ab": self.n_ab, "argmax_ab": conv(self.argmax_ab),
               "N_ba": self.n_ba, "argmax_ba": conv(self.argmax_ba)}
        return out


def _argmax(values: np.ndarray, idx) -> tuple[int, object]:
    if len(values) == 0:
        return 0, None
    i = int(np.argmax(values))
    arg = idx[i]
    return int(values[i]), arg.tolist() if hasattr(arg, "tolist") else arg


def heis_shell_table(c_heis: Covering, kind: str = "dyadic"):
    """Cells in the truncation, their (min, max) squared radii and shell incidence table."""
    G = c_heis.indices()
    # thresholds are squared shell radii 4^j; collect enough of them
    rmax_f = np.max(np.sum(cell_vertices(G, c_heis.eps).astype(float) ** 2, axis=2), axis=1) \
        / float(c_heis.eps.denominator) ** 2
    top_guess = int(math.ceil(math.log(max(rmax_f.max(), 1.0), 4))) + 3
    k_lo = 0
    thresholds = [Fraction(4) ** j for j in range(k_lo - 2, top_guess + 3)]
    rmin2, rmax2 = cell_radius_range2(G, c_heis.eps, thresholds)
    table = _shells_meeting(rmin2, rmax2, kind, k_lo, top_guess)
    return G, table, list(range(k_lo, top_guess + 1))


def intersection_count(a: Covering, b: Covering, per_index: bool = False) -> IntersectionCounts:
    """N(a, b) = sup_i #{j : a_i meets b_j} and N(b, a), over the truncated index sets."""
    kinds = (a.kind, b.kind)
    if kinds == ("heisenberg", "uniform"):
        if a.eps != b.eps:
            raise ValueError("both coverings must share eps")
        G, K = a.indices(), b.indices()
        ca = heis_uniform_counts(G, a.eps, b.radius)
        cb = uniform_heis_counts(K, a.eps, a.radius)
        return IntersectionCounts(*_argmax(ca, G), *_argmax(cb, K),
                                  ca if per_index else None, cb if per_index else None)
    if kinds == ("uniform", "heisenberg") or kinds == ("dyadic", "heisenberg") \
            or kinds == ("homogeneous_dyadic", "heisenberg") or kinds == ("dyadic", "uniform"):
        r = intersection_count(b, a, per_index)
        return IntersectionCounts(r.n_ba, r.argmax_ba, r.n_ab, r.argmax_ab, r.per_index_b, r.per_index_a)
    if kinds[0] == "heisenberg" and kinds[1] in ("dyadic", "homogeneous_dyadic"):
        G, table, ks = heis_shell_table(a, kinds[1])
        if b.k_max is not None:
            sel = [i for i, k in enumerate(ks) if b.k_min <= k <= b.k_max]
            table, ks = table[:, sel], [ks[i] for i in sel]
        ca = table.sum(axis=1)
        cb = table.sum(axis=0)
        return IntersectionCounts(*_argmax(ca, G), *_argmax(cb, np.array(ks)),
                                  ca if per_index else None, cb if per_index else None)
    if kinds == ("uniform", "dyadic"):
        K = a.indices()
        S, E = _scale(a.eps)
        lo, hi = cube_box(K, a.eps)
        lo_f, hi_f = lo.astype(object), hi.astype(object)
        clamp = np.where(lo_f > 0, lo_f, np.where(hi_f < 0, hi_f, 0))
        rmin2 = np.array([Fraction(int(v), S * S) for v in np.sum(clamp ** 2, axis=1)], dtype=object)
        far = np.maximum(lo_f ** 2, hi_f ** 2)
        rmax2 = np.array([Fraction(int(v), S * S) for v in np.sum(far, axis=1)], dtype=object)
        top = int(math.ceil(math.log(float(max(rmax2)), 4))) + 3
        table = _shells_meeting(rmin2, rmax2, "dyadic", 0, top)
        ca, cb = table.sum(axis=1), table.sum(axis=0)
        return IntersectionCounts(*_argmax(ca, K), *_argmax(cb, np.arange(0, top + 1)),
                                  ca if per_index else None, cb if per_index else None)
    if a.kind == b.kind:
        adm = admissibility_constant(a)
        return IntersectionCounts(adm.value, adm.argmax, adm.value, adm.argmax)
    raise ValueError(f"no intersection test for {a.kind} vs {b.kind}")


# ----------------------------------------------------------------------------
# weights
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    s: float
    kind: str = "koranyi"

    def __post_init__(self):
        if self.kind not in ("koranyi", "euclidean", "dyadic"):
            raise ValueError(f"unknown weight kind {self.kind!r}")


def weight_eval(w: WeightSpec, at) -> np.ndarray | float:
    """Koranyi: (1+|X|_H^4)^{s/4}; euclidean: (1+|x|^2)^{s/2}; dyadic: 2^{s k}."""
    if isinstance(at, HPoint):
        at = np.asarray(at.coords, dtype=float)
    x = np.asarray(at, dtype=float)
    if w.kind == "dyadic":
        out = 2.0 ** (w.s * x)
    elif w.kind == "euclidean":
        out = (1 + np.sum(x * x, axis=-1)) ** (w.s / 2)
    else:
        r2 = np.sum(x[..., :-1] ** 2, axis=-1)
        out = (1 + r2 * r2 + 16 * x[..., -1] ** 2) ** (w.s / 4)
    return float(out) if np.ndim(out) == 0 else out


def moderateness_check(w: WeightSpec, c: Covering) -> TruncatedValue:
    """sup over intersecting index pairs of w(i)/w(j) within the truncation."""
    if c.kind != "heisenberg":
        raise ValueError("moderateness diagnostic is implemented for the heisenberg covering")
    D = heisenberg_neighbors(c.n, c.eps)
    res = {}
    for R in (c.radius / 2, c.radius):
        G = lattice_ball_array(R, c.n)
        R4 = _r4_floor(R)
        wg = weight_eval(w, G)
        best, arg = 0.0, None
        for dlt in D:
            H = lattice_mul(dlt, G)
            ok = norm4_int(H) <= R4
            ratio = np.where(ok, wg / weight_eval(w, H), 0.0)
            i = int(np.argmax(ratio))
            if ratio[i] > best:
                best, arg = float(ratio[i]), (G[i], H[i])
        res[R] = (best, arg)
    v, arg = res[c.radius]
    return TruncatedValue(v, [arg[0].tolist(), arg[1].tolist()],
                          abs(v - res[c.radius / 2][0]) > 1e-12 * v, float(c.radius),
                          {"value_half_radius": res[c.radius / 2][0]})


def weight_point_bounds(s: float, c: Covering, per_axis: int = 3) -> tuple[float, float]:
    """min and max of hv_s(Xi)/hu_s(gamma) over sample points Xi of cl(P_gamma)."""
    G = c.indices().astype(float)
    e = float(c.eps)
    ys = np.array(list(itertools.product(np.linspace(-e, 2 + e, per_axis), repeat=c.dim)))
    w = WeightSpec(s)
    lo, hi = np.inf, 0.0
    wg = weight_eval(w, G)
    for y in ys:
        r = weight_eval(w, _right_mul(y, G)) / wg
        lo, hi = min(lo, float(r.min())), max(hi, float(r.max()))
    return lo, hi


def _right_mul(y: np.ndarray, G: np.ndarray) -> np.ndarray:
    """y . gamma for a fixed y and an array of gammas."""
    n = (G.shape[1] - 1) // 2
    out = G + y
    out[:, -1] += (y[:n] @ G[:, n:2 * n].T - y[n:2 * n] @ G[:, :n].T) / 2
    return out


def structured_transition_sup(c: Covering) -> float:
    """sup over intersecting pairs of the operator 2-norm of T_gamma^{-1} T_gamma'."""
    D = heisenberg_neighbors(c.n, c.eps)
    best = 0.0
    for dlt in D:
        M = t_matrix(np.asarray(dlt, dtype=float))
        best = max(best, float(np.linalg.norm(M.astype(float), 2)))
    return best


def weight_nonequivalence_witness(s1: float, s2: float, radii, eps=Fraction(1, 4), n: int = 1) -> list:
    """sup of max(r, 1/r), r = hu_{s1}(gamma)/u_{s2}(k), over meeting pairs with gamma on the t- and p-axes."""
    out = []
    wh, we = WeightSpec(s1), WeightSpec(s2, "euclidean")
    for R in radii:
        best = 1.0
        d = 2 * n + 1
        rays = []
        for c in range(0, int(R * R / 4) + 1, 2):
            g = np.zeros(d, np.int64)
            g[-1] = c
            rays.append(g)
        for a in range(0, int(R) + 1, 2):
            g = np.zeros(d, np.int64)
            g[0] = a
            rays.append(g)
        for g in rays:
            if norm4_int(g) > _r4_floor(R):
                continue
            ks = heis_uniform_members(g, Fraction(eps), 4 * R * R)
            if not len(ks):
                continue
            r = weight_eval(wh, g.astype(float)) / weight_eval(we, ks.astype(float))
            best = max(best, float(np.max(np.maximum(r, 1 / r))))
        out.append(best)
    return out


# ----------------------------------------------------------------------------
# partitions of unity
# ----------------------------------------------------------------------------

def bump(pts: np.ndarray, eps: float) -> np.ndarray:
    """Tensor plateau: 1 on [-eps/2, 2+eps/2]^d, supported in (-eps, 2+eps)^d."""
    return np.prod(plateau_1d(pts, eps), axis=-1)


class GridTooCoarse(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Bapu:
    grid: Grid
    indices: np.ndarray
    windows: np.ndarray
    partition_sum: np.ndarray
    interior: np.ndarray
    kind: str

    def window(self, i: int) -> np.ndarray:
        return self.windows[i]

    @property
    def covered(self) -> np.ndarray:
        return self.partition_sum > 0


def _check_resolution(grid: Grid, eps: float):
    if max(grid.spacing) > eps / 2:
        raise GridTooCoarse(
            f"frequency spacing {max(grid.spacing):g} exceeds eps/2 = {eps / 2:g}; "
            "need at least 4 samples across each overlap band of width 2 eps")


def home_cells(Xi: np.ndarray) -> np.ndarray:
    """gamma with Xi . gamma^{-1} in the fundamental domain [0, 2)^{2n+1}."""
    d = Xi.shape[-1]
    n = (d - 1) // 2
    pq = 2 * np.floor(Xi[..., :2 * n] / 2)
    t = Xi[..., -1] - (np.sum(Xi[..., :n] * pq[..., n:], axis=-1) - np.sum(Xi[..., n:2 * n] * pq[..., :n], axis=-1)) / 2
    c = 2 * np.floor(t / 2)
    return np.concatenate([pq, c[..., None]], axis=-1).astype(np.int64)


def bapu_build(eps: float, lattice, grid: Grid) -> Bapu:
    """Normalized windows theta(Xi . gamma^{-1}) / sum over the given lattice points."""
    eps = float(eps)
    _check_resolution(grid, eps)
    G = np.asarray(lattice, dtype=np.int64).reshape(-1, grid.dim)
    X = grid.points()
    raw, keep = [], []
    for i, g in enumerate(G):
        Y = _right_mul_grid(X, -g.astype(float))
        b = bump(Y, eps)
        if np.any(b > 0):
            raw.append(b)
            keep.append(i)
    raw = np.array(raw) if raw else np.zeros((0,) + grid.shape)
    total = raw.sum(axis=0) if len(raw) else np.zeros(grid.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        win = np.where(total > 0, raw / np.where(total > 0, total, 1), 0.0)
    # interior: every cell containing the point belongs to the lattice set
    n = (grid.dim - 1) // 2
    D = heisenberg_neighbors(n, Fraction(eps).limit_denominator(10 ** 6))
    flat = X.reshape(-1, grid.dim)
    home = home_cells(flat)
    keys = set(map(tuple, G.tolist()))
    interior = np.ones(len(flat), dtype=bool)
    for dl in D:
        cand = lattice_mul(dl, home)
        Y = _right_mul_rows(flat, -cand.astype(float))
        inside = np.all((Y > -eps) & (Y < 2 + eps), axis=1)
        rows = np.nonzero(inside & interior)[0]
        if len(rows):
            uniq, inv = np.unique(cand[rows], axis=0, return_inverse=True)
            known = np.array([tuple(u) in keys for u in uniq.tolist()])
            interior[rows[~known[inv.ravel()]]] = False
    interior = interior.reshape(grid.shape)
    return Bapu(grid, G[keep], win, total, interior, "heisenberg")


def _right_mul_grid(X: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = (X.shape[-1] - 1) // 2
    out = X + g
    out[..., -1] += (X[..., :n] @ g[n:2 * n] - X[..., n:2 * n] @ g[:n]) / 2
    return out


def _right_mul_rows(X: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise X_i . g_i."""
    n = (X.shape[-1] - 1) // 2
    out = X + g
    out[:, -1] += (np.sum(X[:, :n] * g[:, n:2 * n], axis=1) - np.sum(X[:, n:2 * n] * g[:, :n], axis=1)) / 2
    return out


def uniform_bapu_build(eps: float, box_radius, grid: Grid) -> Bapu:
    eps = float(eps)
    _check_resolution(grid, eps)
    K = box_array(box_radius, grid.dim)
    X = grid.points()
    raw, keep = [], []
    for i, k in enumerate(K):
        b = bump(X - k, eps)
        if np.any(b > 0):
            raw.append(b)
            keep.append(i)
    raw = np.array(raw) if raw else np.zeros((0,) + grid.shape)
    total = raw.sum(axis=0) if len(raw) else np.zeros(grid.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        win = np.where(total > 0, raw / np.where(total > 0, total, 1), 0.0)
    home = 2 * np.floor(X / 2)
    Rb = float(math.floor(Fraction(box_radius)))
    interior = np.all((home - 2 >= -Rb) & (home + 2 <= Rb), axis=-1)
    return Bapu(grid, K[keep], win, total, interior, "uniform")


def chi(r: np.ndarray) -> np.ndarray:
    """Radial profile: 1 for r <= 1, 0 for r >= 3/2."""
    return _smoothstep((1.5 - np.asarray(r, dtype=float)) / 0.5)


def dyadic_windows(grid: Grid, ks, homogeneous: bool = False) -> np.ndarray:
    """Littlewood-Paley windows phi_k with supp phi_k inside the k-th shell."""
    r = np.linalg.norm(grid.points(), axis=-1)
    out = []
    for k in ks:
        outer = chi(r / 2.0 ** (k + 1))
        if k == 0 and not homogeneous:
            out.append(outer)
        else:
            out.append(outer - chi(r / 2.0 ** k))
    return np.array(out)


# ----------------------------------------------------------------------------
# picture
# ----------------------------------------------------------------------------

def covering_svg(c: Covering, planes=((0, -1), (1, -1)), size: int = 360, max_cells: int = 60) -> str:
    """Lattice points and projected cell outlines in coordinate planes, as an SVG document."""
    from scipy.spatial import ConvexHull

    if c.kind != "heisenberg":
        raise ValueError("SVG output is available for the heisenberg covering")
    G = c.indices()
    order = np.argsort(norm4_int(G), kind="stable")[:max_cells]
    S, _ = _scale(c.eps)
    V = cell_vertices(G[order], c.eps) / S
    labels = ["p1", "q1", "t"] if c.n == 1 else [f"x{i}" for i in range(c.dim)]
    panels = []
    for pi, (i, j) in enumerate(planes):
        pts = V[:, :, [i, j]]
        lo, hi = pts.reshape(-1, 2).min(0), pts.reshape(-1, 2).max(0)
        span = np.maximum(hi - lo, 1e-9)
        tr = lambda P: np.column_stack([20 + (P[:, 0] - lo[0]) / span[0] * (size - 40),
                                        size - 20 - (P[:, 1] - lo[1]) / span[1] * (size - 40)])
        items = []
        for cell in pts:
            hull = ConvexHull(cell)
            poly = tr(cell[hull.vertices])
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in poly)
            items.append(f'<polygon points="{path}" fill="none" stroke="#4a6fa5" stroke-width="0.6"/>')
        for g in tr(G[order][:, [i, j]].astype(float)):
            items.append(f'<circle cx="{g[0]:.2f}" cy="{g[1]:.2f}" r="2" fill="#b03a2e"/>')
        items.append(f'<text x="{size / 2:.0f}" y="14" font-size="12" text-anchor="middle">'
                     f'({labels[i]}, {labels[j]})</text>')
        panels.append(f'<g transform="translate({pi * size},0)">' + "".join(items) + "</g>")
    w = size * len(planes)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{size}" '
            f'viewBox="0 0 {w} {size}">' + "".join(panels) + "</svg>\n")
