"""Heisenberg group H_n and Dynin-Folland group H_{n,2} in exponential coordinates.

Every routine works on numpy arrays whose dtype is either ``object`` holding
``fractions.Fraction`` (exact path, no rounding anywhere) or ``float64``.
Points are immutable wrappers around such an array in basis order.

Basis order for h_{n,2}: u_1..u_n, v_1..v_n, w, x_1..x_n, y_1..y_n, z, s.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operands live in groups of different dimension."""


def as_vector(values) -> np.ndarray:
    """Coerce to a 1-D coordinate array.

    Lists of ints/Fractions become exact object arrays; anything containing a
    float becomes float64.  Existing arrays keep their kind.
    """
    if isinstance(values, np.ndarray):
        if values.dtype == object:
            arr = np.array([_exact(v) for v in values.ravel()], dtype=object)
            return arr.reshape(values.shape)
        if np.issubdtype(values.dtype, np.integer):
            return np.array([Fraction(int(v)) for v in values.ravel()], dtype=object).reshape(values.shape)
        return np.asarray(values, dtype=float)
    seq = list(values)
    if all(isinstance(v, (int, Rational)) and not isinstance(v, bool) for v in seq):
        return np.array([Fraction(v) for v in seq], dtype=object)
    return np.array([float(v) for v in seq], dtype=float)


def _exact(v):
    if isinstance(v, float):
        raise TypeError("float inside an exact (object) coordinate array")
    return Fraction(v)


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _dot(a: np.ndarray, b: np.ndarray):
    # np.dot on empty object arrays returns int 0; keep the number kind.
    if len(a) == 0:
        return Fraction(0) if is_exact(a) else 0.0
    return np.dot(a, b)


# ----------------------------------------------------------------------------
# H_n
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HPoint:
    """Point (p, q, t) of H_n, also used for elements of its Lie algebra."""

    coords: np.ndarray

    def __post_init__(self):
        arr = as_vector(self.coords)
        if arr.ndim != 1 or len(arr) % 2 != 1:
            raise DimensionError(f"H_n point needs 2n+1 coordinates, got shape {arr.shape}")
        object.__setattr__(self, "coords", _freeze(arr))

    @classmethod
    def from_parts(cls, p, q, t) -> "HPoint":
        p, q = as_vector(p), as_vector(q)
        t = as_vector([t])
        if len(p) != len(q):
            raise DimensionError("p and q differ in length")
        kinds = {is_exact(p) or len(p) == 0, is_exact(q) or len(q) == 0, is_exact(t)}
        if kinds == {True}:
            return cls(np.concatenate([p, q, t]).astype(object))
        return cls(np.concatenate([p, q, t]).astype(float))

    @classmethod
    def zero(cls, n: int, exact: bool = True) -> "HPoint":
        return cls(as_vector([0] * (2 * n + 1)) if exact else np.zeros(2 * n + 1))

    @property
    def n(self) -> int:
        return (len(self.coords) - 1) // 2

    @property
    def p(self) -> np.ndarray:
        return self.coords[: self.n]

    @property
    def q(self) -> np.ndarray:
        return self.coords[self.n: 2 * self.n]

    @property
    def t(self):
        return self.coords[-1]

    def __eq__(self, other) -> bool:
        return isinstance(other, HPoint) and len(self.coords) == len(other.coords) \
            and bool(np.all(self.coords == other.coords))

    def __hash__(self):
        return hash(tuple(self.coords.tolist()))

    def __neg__(self) -> "HPoint":
        return HPoint(-self.coords)

    def __repr__(self) -> str:
        return f"HPoint({self.coords.tolist()})"


def _same_n(a, b):
    if len(a.coords) != len(b.coords):
        raise DimensionError(f"dimension mismatch: {len(a.coords)} vs {len(b.coords)}")


def h_symplectic(a: HPoint, b: HPoint):
    """pq' - qp'."""
    return _dot(a.p, b.q) - _dot(a.q, b.p)


def h_mul(a: HPoint, b: HPoint) -> HPoint:
    _same_n(a, b)
    out = a.coords + b.coords
    out[-1] = out[-1] + h_symplectic(a, b) / 2
    return HPoint(out)


def h_inv(a: HPoint) -> HPoint:
    return -a


def h_bracket(a: HPoint, b: HPoint) -> HPoint:
    _same_n(a, b)
    out = a.coords * 0
    out[-1] = h_symplectic(a, b)
    return HPoint(out)


def koranyi_norm4(a: HPoint):
    """Fourth power of the Cygan-Koranyi norm; exact for rational input."""
    r2 = _dot(a.coords[:-1], a.coords[:-1])
    return r2 * r2 + 16 * a.t * a.t


def koranyi_norm(a: HPoint) -> float:
    return float(koranyi_norm4(a)) ** 0.25


def h_dilate(r, a: HPoint) -> HPoint:
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    out = a.coords * r
    out[-1] = a.t * r * r
    return HPoint(out)


def coad_h(X: HPoint, Xi) -> np.ndarray:
    """ad*_H(X)(Xi) = (t' q, -t' p, 0) where Xi = (p', q', t')."""
    Xi = as_vector(Xi) if not isinstance(Xi, HPoint) else Xi.coords
    if len(Xi) != len(X.coords):
        raise DimensionError("coad_h: dimension mismatch")
    tp = Xi[-1]
    return np.concatenate([tp * X.q, -tp * X.p, X.coords[-1:] * 0])


# ----------------------------------------------------------------------------
# H_{n,2}
# ----------------------------------------------------------------------------

def df_dim(n: int) -> int:
    return 4 * n + 3


class DFIndex:
    """Positions of the coordinate blocks of h_{n,2} in basis order."""

    def __init__(self, n: int):
        self.n = n
        self.u = slice(0, n)
        self.v = slice(n, 2 * n)
        self.w = 2 * n
        self.x = slice(2 * n + 1, 3 * n + 1)
        self.y = slice(3 * n + 1, 4 * n + 1)
        self.z = 4 * n + 1
        self.s = 4 * n + 2
        self.P = slice(0, 2 * n + 1)
        self.Q = slice(2 * n + 1, 4 * n + 2)

    def label(self, i: int) -> str:
        n = self.n
        if i < n:
            return f"u{i + 1}"
        if i < 2 * n:
            return f"v{i - n + 1}"
        if i == 2 * n:
            return "w"
        if i < 3 * n + 1:
            return f"x{i - 2 * n}"
        if i < 4 * n + 1:
            return f"y{i - 3 * n}"
        return "z" if i == 4 * n + 1 else "s"

    def index(self, label: str) -> int:
        for i in range(df_dim(self.n)):
            if self.label(i) == label:
                return i
        raise KeyError(label)


@dataclass(frozen=True, eq=False)
class DFPoint:
    """Point of H_{n,2} (or element of h_{n,2}) in exponential coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        arr = as_vector(self.coords)
        if arr.ndim != 1 or (len(arr) - 3) % 4 != 0 or len(arr) < 7:
            raise DimensionError(f"H_(n,2) point needs 4n+3 coordinates, got shape {arr.shape}")
        object.__setattr__(self, "coords", _freeze(arr))

    @classmethod
    def from_parts(cls, P: HPoint, Q: HPoint, S) -> "DFPoint":
        _same_n(P, Q)
        return cls(np.concatenate([P.coords, Q.coords, as_vector([S])]).astype(P.coords.dtype))

    @classmethod
    def zero(cls, n: int, exact: bool = True) -> "DFPoint":
        return cls(as_vector([0] * df_dim(n)) if exact else np.zeros(df_dim(n)))

    @classmethod
    def basis(cls, n: int, label: str, scale=1) -> "DFPoint":
        arr = as_vector([0] * df_dim(n))
        arr[DFIndex(n).index(label)] = Fraction(scale)
        return cls(arr)

    @property
    def n(self) -> int:
        return (len(self.coords) - 3) // 4

    @property
    def ix(self) -> DFIndex:
        return DFIndex(self.n)

    u = property(lambda self: self.coords[self.ix.u])
    v = property(lambda self: self.coords[self.ix.v])
    w = property(lambda self: self.coords[self.ix.w])
    x = property(lambda self: self.coords[self.ix.x])
    y = property(lambda self: self.coords[self.ix.y])
    z = property(lambda self: self.coords[self.ix.z])
    s = property(lambda self: self.coords[self.ix.s])

    @property
    def P(self) -> HPoint:
        return HPoint(self.coords[self.ix.P])

    @property
    def Q(self) -> HPoint:
        return HPoint(self.coords[self.ix.Q])

    @property
    def S(self):
        return self.s

    def __eq__(self, other) -> bool:
        return isinstance(other, DFPoint) and len(self.coords) == len(other.coords) \
            and bool(np.all(self.coords == other.coords))

    def __hash__(self):
        return hash(tuple(self.coords.tolist()))

    def __neg__(self) -> "DFPoint":
        return DFPoint(-self.coords)

    def __add__(self, other: "DFPoint") -> "DFPoint":
        _same_n(self, other)
        return DFPoint(self.coords + other.coords)

    def __sub__(self, other: "DFPoint") -> "DFPoint":
        _same_n(self, other)
        return DFPoint(self.coords - other.coords)

    def scale(self, c) -> "DFPoint":
        return DFPoint(self.coords * c)

    def __repr__(self) -> str:
        return f"DFPoint({self.coords.tolist()})"


def df_mul(a: DFPoint, b: DFPoint) -> DFPoint:
    """Closed-form group law of H_{n,2} in exponential coordinates."""
    _same_n(a, b)
    ix = a.ix
    out = a.coords + b.coords
    uv = _dot(a.u, b.v) - _dot(a.v, b.u)
    out[ix.w] = out[ix.w] + uv / 2
    out[ix.x] = out[ix.x] + (b.z * a.v - a.z * b.v) / 4
    out[ix.y] = out[ix.y] - (b.z * a.u - a.z * b.u) / 4
    out[ix.s] = (out[ix.s]
                 + (_dot(a.u, b.x) - _dot(a.x, b.u)) / 2
                 + (_dot(a.v, b.y) - _dot(a.y, b.v)) / 2
                 + (a.w * b.z - a.z * b.w) / 2
                 - (a.z - b.z) * uv / 8)
    return DFPoint(out)


def df_inv(a: DFPoint) -> DFPoint:
    return -a


def pairing(a: HPoint, b: HPoint):
    """Euclidean pairing <X, X'> on R^{2n+1}."""
    return _dot(a.coords, b.coords)


def df_bracket(a: DFPoint, b: DFPoint) -> DFPoint:
    """Lie bracket in the calligraphic (P, Q, S) form.

    [(P,Q,S), (P',Q',S')] = ([P,P']_H, (ad*(P)Q' - ad*(P')Q)/2, <P,Q'> - <Q,P'>)
    """
    _same_n(a, b)
    P, Q, P2, Q2 = a.P, a.Q, b.P, b.Q
    newP = h_bracket(P, P2).coords
    newQ = (coad_h(P, Q2) - coad_h(P2, Q)) / 2
    newS = pairing(P, Q2) - pairing(Q, P2)
    return DFPoint(np.concatenate([newP, newQ, np.array([newS], dtype=newP.dtype)]))


@lru_cache(maxsize=None)
def _structure_list(n: int) -> tuple:
    """Nonzero structure constants (i, j, k, c): [E_i, E_j] = c E_k, i < j listed once."""
    ix = DFIndex(n)
    half = Fraction(1, 2)
    out = []
    for j in range(n):
        u, v = ix.u.start + j, ix.v.start + j
        x, y = ix.x.start + j, ix.y.start + j
        out.append((u, v, ix.w, Fraction(1)))
        out.append((u, x, ix.s, Fraction(1)))
        out.append((u, ix.z, y, -half))
        out.append((v, y, ix.s, Fraction(1)))
        out.append((v, ix.z, x, half))
    out.append((ix.w, ix.z, ix.s, Fraction(1)))
    return tuple(out)


def structure_constants(n: int) -> np.ndarray:
    """Dense exact table C with [E_i, E_j] = sum_k C[i, j, k] E_k."""
    d = df_dim(n)
    C = np.full((d, d, d), Fraction(0), dtype=object)
    for i, j, k, c in _structure_list(n):
        C[i, j, k] += c
        C[j, i, k] -= c
    return C


def bracket_from_constants(a: DFPoint, b: DFPoint) -> DFPoint:
    """Bracket evaluated from the structure-constant list (independent of df_bracket)."""
    _same_n(a, b)
    out = a.coords * 0
    ac, bc = a.coords, b.coords
    for i, j, k, c in _structure_list(a.n):
        out[k] = out[k] + c * (ac[i] * bc[j] - ac[j] * bc[i])
    return DFPoint(out)


def bch_step3(a, b, bracket: Callable):
    """X + Y + [X,Y]/2 + ([X,[X,Y]] - [Y,[X,Y]])/12, valid for step <= 3."""
    ab = bracket(a, b)
    c = a.coords + b.coords + ab.coords / 2 \
        + (bracket(a, ab).coords - bracket(b, ab).coords) / 12
    return type(a)(c)


def bch_order4_term(a, b, bracket: Callable):
    """The -[Y,[X,[X,Y]]]/24 term; identically zero on step-3 algebras."""
    return type(a)(-bracket(b, bracket(a, bracket(a, b))).coords / 24)


def malcev_order(n: int) -> list[int]:
    """s, y_n..y_1, x_n..x_1, z, w, v_n..v_1, u_n..u_1 as basis indices."""
    ix = DFIndex(n)
    rev = lambda sl: list(range(sl.start, sl.stop))[::-1]
    return [ix.s] + rev(ix.y) + rev(ix.x) + [ix.z, ix.w] + rev(ix.v) + rev(ix.u)


def prefix_ideal_violations(n: int, order: Sequence[int] | None = None) -> list[tuple[int, int, int]]:
    """(m, i, k) where [E_i, h_m] has a component E_k outside the prefix span h_m.

    An empty list means every prefix span is an ideal (strong Malcev basis).
    """
    order = malcev_order(n) if order is None else list(order)
    C = structure_constants(n)
    d = df_dim(n)
    bad = []
    for m in range(1, d + 1):
        prefix = set(order[:m])
        for i in range(d):
            for j in prefix:
                for k in np.nonzero(C[i, j] != 0)[0]:
                    if int(k) not in prefix:
                        bad.append((m, i, int(k)))
    return bad


# ----------------------------------------------------------------------------
# split exponential coordinates ((Q, S), P) := (0, Q, S) . (P, 0, 0)
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitDFPoint:
    Q: np.ndarray
    S: object
    P: HPoint

    def __post_init__(self):
        Q = as_vector(self.Q.coords if isinstance(self.Q, HPoint) else self.Q)
        if len(Q) != len(self.P.coords):
            raise DimensionError("Q and P differ in length")
        object.__setattr__(self, "Q", _freeze(Q))

    @property
    def n(self) -> int:
        return self.P.n

    def __eq__(self, other) -> bool:
        return isinstance(other, SplitDFPoint) and self.P == other.P \
            and bool(np.all(self.Q == other.Q)) and self.S == other.S

    def __repr__(self) -> str:
        return f"SplitDFPoint(Q={self.Q.tolist()}, S={self.S}, P={self.P.coords.tolist()})"


def split(g: DFPoint) -> SplitDFPoint:
    P, Qe = g.P, g.Q.coords
    Q = Qe + coad_h(P, Qe) / 4
    S = g.s + _dot(Qe, P.coords) / 2
    return SplitDFPoint(Q, S, P)


def unsplit(sp: SplitDFPoint) -> DFPoint:
    P, Q = sp.P, sp.Q
    Qe = Q - coad_h(P, Q) / 4
    S = sp.S - _dot(Q, P.coords) / 2
    return DFPoint(np.concatenate([P.coords, Qe, np.array([S], dtype=Qe.dtype)]))


def split_mul(a: SplitDFPoint, b: SplitDFPoint) -> SplitDFPoint:
    """(Q + Q' + ad*(P)(Q')/2, S + S' + <P, Q'>, P.P')."""
    Q = a.Q + b.Q + coad_h(a.P, b.Q) / 2
    S = a.S + b.S + _dot(a.P.coords, b.Q)
    return SplitDFPoint(Q, S, h_mul(a.P, b.P))
