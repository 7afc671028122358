"""Coadjoint orbits of H_{n,2}: action, classification, kernels, polarizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg

from .nilpotent_core import (
    DFIndex,
    DFPoint,
    as_vector,
    bracket_from_constants,
    df_dim,
    is_exact,
)


@dataclass(frozen=True, eq=False)
class LinearForm:
    """F = sum of f_i X_i^* in the dual of the standard basis (same order as DFPoint)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = as_vector(self.coords)
        if arr.ndim != 1 or (len(arr) - 3) % 4 != 0:
            raise ValueError(f"linear form needs 4n+3 coefficients, got {arr.shape}")
        if not is_exact(arr) and not np.all(np.isfinite(arr)):
            raise ValueError("linear form has non-finite coefficients")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_dict(cls, n: int, coeffs: dict) -> "LinearForm":
        """Build from labels such as {'s': 1, 'x1': 2, 'y': [1, 0]}; a leading 'f_' is allowed."""
        ix = DFIndex(n)
        vals = [0] * df_dim(n)
        for key, val in coeffs.items():
            key = key[2:] if key.startswith("f_") else key
            if key in ("u", "v", "x", "y"):
                block = list(val) if isinstance(val, (list, tuple, np.ndarray)) else [val] * (n == 1)
                if len(block) != n:
                    raise ValueError(f"f_{key} needs {n} entries")
                for j, b in enumerate(block):
                    vals[ix.index(f"{key}{j + 1}")] = b
                continue
            vals[ix.index(key)] = val
        return cls(as_vector(vals))

    @classmethod
    def dual_basis(cls, n: int, label: str, scale=1) -> "LinearForm":
        return cls(DFPoint.basis(n, label, scale).coords)

    @property
    def n(self) -> int:
        return (len(self.coords) - 3) // 4

    @property
    def ix(self) -> DFIndex:
        return DFIndex(self.n)

    f_u = property(lambda self: self.coords[self.ix.u])
    f_v = property(lambda self: self.coords[self.ix.v])
    f_w = property(lambda self: self.coords[self.ix.w])
    f_x = property(lambda self: self.coords[self.ix.x])
    f_y = property(lambda self: self.coords[self.ix.y])
    f_z = property(lambda self: self.coords[self.ix.z])
    f_s = property(lambda self: self.coords[self.ix.s])

    def __call__(self, X: DFPoint):
        return np.dot(self.coords, X.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearForm) and len(self.coords) == len(other.coords) \
            and bool(np.all(self.coords == other.coords))

    def __hash__(self):
        return hash(tuple(self.coords.tolist()))

    def __repr__(self) -> str:
        return f"LinearForm({self.coords.tolist()})"


def coadjoint_action(X: DFPoint, F: LinearForm) -> LinearForm:
    """Ad*(exp X) F, written out coordinate by coordinate."""
    if len(X.coords) != len(F.coords):
        raise ValueError("dimension mismatch")
    ix = F.ix
    fu, fv, fw, fx, fy, fz, fs = F.f_u, F.f_v, F.f_w, F.f_x, F.f_y, F.f_z, F.f_s
    u, v, w, x, y, z = X.u, X.v, X.w, X.x, X.y, X.z
    out = F.coords.copy()
    out[ix.u] = fu + fw * v - (z / 2) * fy + fs * x + 3 * fs * z * v / 4
    out[ix.v] = fv - fw * u + (z / 2) * fx + fs * y - 3 * fs * z * u / 4
    out[ix.w] = fw + fs * z
    out[ix.x] = fx - fs * u
    out[ix.y] = fy - fs * v
    out[ix.z] = fz - np.dot(fx, v) / 2 + np.dot(fy, u) / 2 - fs * w
    return LinearForm(out)


# ----------------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitClass:
    case: int
    params: dict
    canonical_rep: LinearForm
    orbit_dim: int
    n: int
    input_form: LinearForm | None = field(default=None, compare=False)

    def report(self) -> dict:
        def num(v):
            return float(v) if not isinstance(v, np.ndarray) else [float(e) for e in v]
        return {
            "case": self.case,
            "params": {k: num(v) for k, v in self.params.items()},
            "canonical_rep": [float(c) for c in self.canonical_rep.coords],
            "orbit_dim": self.orbit_dim,
        }


def _default_tol(F: LinearForm) -> float:
    if is_exact(F.coords):
        return 0
    m = float(np.max(np.abs(F.coords))) if len(F.coords) else 0.0
    return 1e-12 * m


def _cleaned(F: LinearForm, tol) -> LinearForm:
    if tol == 0:
        return F
    arr = F.coords.copy()
    arr[np.abs(arr.astype(float)) <= tol] = 0
    return LinearForm(arr)


def _is_zero(a) -> bool:
    return bool(np.all(np.asarray(a) == 0))


def classify(F: LinearForm, tol=None) -> OrbitClass:
    """Sort F into one of the four orbit types and return the canonical representative."""
    tol = _default_tol(F) if tol is None else tol
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    G = _cleaned(F, tol)
    n, ix = G.n, G.ix
    zero = G.coords * 0
    if G.f_s != 0:
        rep = zero.copy()
        rep[ix.s] = G.f_s
        return OrbitClass(1, {"lambda": G.f_s}, LinearForm(rep), 2 * (2 * n + 1), n, F)
    if G.f_w != 0:
        fzp = G.f_z + (np.dot(G.f_u, G.f_x) + np.dot(G.f_v, G.f_y)) / (2 * G.f_w)
        rep = zero.copy()
        rep[ix.w], rep[ix.x], rep[ix.y], rep[ix.z] = G.f_w, G.f_x, G.f_y, fzp
        params = {"f_w": G.f_w, "f_x": G.f_x.copy(), "f_y": G.f_y.copy(), "f_z": fzp}
        return OrbitClass(2, params, LinearForm(rep), 2 * n, n, F)
    if not (_is_zero(G.f_x) and _is_zero(G.f_y)):
        uv = np.concatenate([G.f_u, G.f_v])
        d = np.concatenate([-G.f_y, G.f_x])
        uv = uv - (np.dot(uv, d) / np.dot(d, d)) * d
        rep = zero.copy()
        rep[ix.u], rep[ix.v] = uv[:n], uv[n:]
        rep[ix.x], rep[ix.y] = G.f_x, G.f_y
        params = {"f_u": uv[:n], "f_v": uv[n:], "f_x": G.f_x.copy(), "f_y": G.f_y.copy()}
        return OrbitClass(3, params, LinearForm(rep), 2, n, F)
    params = {"f_u": G.f_u.copy(), "f_v": G.f_v.copy(), "f_z": G.f_z}
    return OrbitClass(4, params, G, 0, n, F)


def orbit_membership(F: LinearForm, G: LinearForm, tol=None) -> bool:
    a, b = classify(F, tol), classify(G, tol)
    if a.case != b.case:
        return False
    diff = a.canonical_rep.coords - b.canonical_rep.coords
    if tol is None:
        tol = max(_default_tol(F), _default_tol(G))
    if tol == 0:
        return _is_zero(diff)
    return bool(np.max(np.abs(diff.astype(float))) <= tol * 10)


def affine_orbit_residual(c: OrbitClass, G: LinearForm) -> np.ndarray:
    """Residual of G against the explicit affine description of the orbit of c.

    Zero (exactly, on rational input) iff G lies in that affine subspace.
    """
    R = c.canonical_rep
    ix = R.ix
    g = G.coords
    if c.case == 1:
        return np.array([g[ix.s] - R.f_s], dtype=g.dtype)
    if c.case == 2:
        fw, fx, fy = R.f_w, R.f_x, R.f_y
        zpred = R.f_z - (np.dot(fx, G.f_u) + np.dot(fy, G.f_v)) / (2 * fw)
        return np.concatenate([
            [g[ix.w] - fw, g[ix.z] - zpred, g[ix.s]],
            G.f_x - fx, G.f_y - fy,
        ])
    if c.case == 3:
        d = np.concatenate([-R.f_y, R.f_x])
        delta = np.concatenate([G.f_u - R.f_u, G.f_v - R.f_v])
        perp = delta - (np.dot(delta, d) / np.dot(d, d)) * d
        return np.concatenate([[g[ix.w], g[ix.s]], G.f_x - R.f_x, G.f_y - R.f_y, perp])
    return g - R.coords


# ----------------------------------------------------------------------------
# subspaces
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SubspaceBasis:
    vectors: tuple

    @property
    def dim(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        return np.array([v.coords for v in self.vectors])

    def report(self) -> list:
        return [[float(c) for c in v.coords] for v in self.vectors]


def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank over Q by fraction-exact Gaussian elimination."""
    M = [[Fraction(x) for x in r] for r in rows]
    rank, ncols = 0, len(M[0]) if M else 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(M)) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for i in range(len(M)):
            if i != rank and M[i][col] != 0:
                f = M[i][col] / M[rank][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


def in_span(vec: DFPoint, basis: SubspaceBasis) -> bool:
    rows = [v.coords for v in basis.vectors]
    if not rows:
        return _is_zero(vec.coords)
    return exact_rank(rows + [vec.coords]) == exact_rank(rows)


def is_subalgebra(basis: SubspaceBasis) -> bool:
    vs = basis.vectors
    return all(in_span(bracket_from_constants(a, b), basis)
               for i, a in enumerate(vs) for b in vs[i + 1:])


def is_subordinate(F: LinearForm, basis: SubspaceBasis) -> bool:
    vs = basis.vectors
    return all(F(bracket_from_constants(a, b)) == 0
               for i, a in enumerate(vs) for b in vs[i + 1:])


def _basis(n: int, labels) -> list:
    return [DFPoint.basis(n, lab) for lab in labels]


def _labels(n: int, block: str) -> list:
    return [f"{block}{j + 1}" for j in range(n)]


def _hyperplane_basis(normal: np.ndarray) -> list:
    """Exact basis of {a : <normal, a> = 0}."""
    k = next(i for i, c in enumerate(normal) if c != 0)
    out = []
    for i in range(len(normal)):
        if i == k:
            continue
        e = as_vector([0] * len(normal))
        e[i] = Fraction(1)
        e[k] = -Fraction(normal[i]) / Fraction(normal[k])
        out.append(e)
    return out


def projective_kernel(c: OrbitClass) -> SubspaceBasis:
    """Lie algebra of the stabilizer of the canonical representative.

    Case 2 carries a tilted z-direction X_z + (f_x X_u + f_y X_v)/(2 f_w); for
    f_x = f_y = 0 this is span{X_w, X_x, X_y, X_z, X_s}.
    """
    n, R = c.n, c.canonical_rep
    if c.case == 1:
        return SubspaceBasis(tuple(_basis(n, ["s"])))
    if c.case == 2:
        vecs = _basis(n, ["w"] + _labels(n, "x") + _labels(n, "y") + ["s"])
        ix = DFIndex(n)
        tilt = DFPoint.basis(n, "z").coords.copy()
        fw = Fraction(R.f_w) if is_exact(R.coords) else R.f_w
        tilt = tilt.astype(object if is_exact(R.coords) else float)
        tilt[ix.u] = R.f_x / (2 * fw)
        tilt[ix.v] = R.f_y / (2 * fw)
        vecs.insert(1 + 2 * n, DFPoint(tilt))
        return SubspaceBasis(tuple(vecs))
    if c.case == 3:
        normal = np.concatenate([-R.f_y, R.f_x])
        ix = DFIndex(n)
        vecs = []
        for e in _hyperplane_basis(normal):
            arr = as_vector([0] * df_dim(n))
            arr[ix.u], arr[ix.v] = e[:n], e[n:]
            vecs.append(DFPoint(arr))
        vecs += _basis(n, ["w"] + _labels(n, "x") + _labels(n, "y") + ["s"])
        return SubspaceBasis(tuple(vecs))
    return SubspaceBasis(tuple(_basis(n, [DFIndex(n).label(i) for i in range(df_dim(n))])))


def planck_constant(c: OrbitClass):
    if c.case == 1:
        return c.params["lambda"]
    if c.case == 2:
        return c.params["f_w"]
    if c.case == 3:
        fx, fy = c.params["f_x"], c.params["f_y"]
        return float(np.dot(fx, fx) + np.dot(fy, fy)) ** 0.5
    raise ValueError("one-dimensional orbits (Case 4) are characters and have no Planck constant")


def polarizing_subalgebra(c: OrbitClass) -> SubspaceBasis:
    n = c.n
    xs, ys = _labels(n, "x"), _labels(n, "y")
    if c.case == 1:
        return SubspaceBasis(tuple(_basis(n, xs + ys + ["z", "s"])))
    if c.case == 2:
        R = c.canonical_rep
        ix = DFIndex(n)
        vecs = _basis(n, _labels(n, "v") + ["w"] + xs + ys)
        tilt = DFPoint.basis(n, "z").coords.copy()
        if not is_exact(R.coords):
            tilt = tilt.astype(float)
        tilt[ix.u] = R.f_x / (2 * R.f_w)
        vecs.append(DFPoint(tilt))
        vecs += _basis(n, ["s"])
        return SubspaceBasis(tuple(vecs))
    if c.case == 3:
        return SubspaceBasis(tuple(_basis(n, _labels(n, "u") + _labels(n, "v") + ["w"] + xs + ys + ["s"])))
    raise ValueError("no polarizing subalgebra is attached to Case 4 (characters)")


def linearized_action(F: LinearForm) -> np.ndarray:
    """Matrix of X -> d/de Ad*(exp eX)F at e = 0, columns indexed by basis of h_{n,2}.

    The action is affine along each single basis direction, so the column is
    the exact difference Ad*(exp E_j)F - F.
    """
    d = len(F.coords)
    cols = []
    for j in range(d):
        E = np.zeros(d)
        E[j] = 1.0
        Ff = LinearForm(F.coords.astype(float))
        cols.append((coadjoint_action(DFPoint(E), Ff).coords - Ff.coords).astype(float))
    return np.array(cols).T


def stabilizer_basis(F: LinearForm, threshold: float = 1e-10) -> np.ndarray:
    """Rows span the stabilizer algebra of F (numerical null space)."""
    return scipy.linalg.null_space(linearized_action(F), rcond=threshold).T


def same_span(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """Numerical test that the row spaces of A and B coincide."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    ra = np.linalg.matrix_rank(A, tol) if A.size else 0
    rb = np.linalg.matrix_rank(B, tol) if B.size else 0
    if ra != rb:
        return False
    if ra == 0:
        return True
    return np.linalg.matrix_rank(np.vstack([A, B]), tol) == ra
