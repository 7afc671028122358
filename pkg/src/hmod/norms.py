"""Voice transforms and the norm families on sampled fields over R^{2n+1}.

Windows passed to the voice transform and the STFT are frequency-side
functions (psi-hat).  Use ``to_frequency`` to convert a spatial Gaussian.
All quadratures are plain Riemann sums on the sampling grids.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .frequency_covering import (
    Bapu, WeightSpec, bapu_build, dyadic_windows, heis_shell_table,
    heisenberg, lattice_ball_array, uniform_bapu_build, weight_eval,
)
from .nilpotent_core import HPoint
from .representations import (
    FREQUENCY, SPATIAL, AnalyticWindow, Gaussian, Grid, SampledField, big_dot,
    fourier_transform,
)

KINDS = ("E_coorbit", "E_decomposition", "M_modulation", "B_inhomogeneous", "B_homogeneous")


class LeakageError(ValueError):
    """Too much of f-hat lies outside the region handled by the truncated covering."""

    def __init__(self, leakage: float, limit: float):
        super().__init__(f"truncation too small: leakage {leakage:.3e} exceeds {limit:.1e}")
        self.leakage = leakage
        self.limit = limit


def _exponent(x) -> float:
    x = float(x)
    if not (x >= 1 or math.isinf(x)):
        raise ValueError(f"exponent {x} outside [1, inf]")
    return x


@dataclass(frozen=True)
class NormSpec:
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0
    kind: str = "E_coorbit"
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", _exponent(self.p))
        object.__setattr__(self, "q", _exponent(self.q))
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")

    def report(self) -> dict:
        enc = lambda v: "inf" if math.isinf(v) else v
        return {"p": enc(self.p), "q": enc(self.q), "s": self.s, "kind": self.kind}


@dataclass(frozen=True, eq=False)
class NormResult:
    value: float
    breakdown: np.ndarray
    indices: list
    spec: NormSpec | None = None
    truncation: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)

    def report(self, top: int = 10) -> dict:
        order = np.argsort(-self.breakdown, kind="stable")[:top]
        conv = lambda v: v.tolist() if isinstance(v, np.ndarray) else v
        return {
            "spec": self.spec.report() if self.spec else None,
            "value": self.value,
            "terms": len(self.breakdown),
            "largest_terms": [{"index": conv(self.indices[i]), "value": float(self.breakdown[i])} for i in order],
            "truncation": self.truncation,
            "quadrature": self.quadrature,
        }


def lq_aggregate(terms: np.ndarray, q: float, weights: np.ndarray | None = None) -> float:
    """(sum weights * terms^q)^{1/q}, or the max for q = inf."""
    t = np.asarray(terms, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite samples")
    if len(t) == 0:
        return 0.0
    if math.isinf(q):
        return float(t.max())
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * t ** q) ** (1 / q))


def lp_grid(values: np.ndarray, p: float, cell: float, axes=None) -> np.ndarray:
    a = np.abs(values)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite samples")
    if math.isinf(p):
        return a.max(axis=axes)
    return (np.sum(a ** p, axis=axes) * cell) ** (1 / p)


def to_frequency(window: AnalyticWindow) -> AnalyticWindow:
    """Frequency-side version of a spatial Gaussian window."""
    if isinstance(window, Gaussian):
        return window.fourier()
    raise TypeError("only Gaussian windows have a closed-form transform")


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("HMOD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _ordered_map(fn, items, threads: int | None):
    n = _threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _spectrum(f: SampledField) -> SampledField:
    return fourier_transform(f) if f.side == SPATIAL else f


# ----------------------------------------------------------------------------
# voice transform
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VoiceTransform:
    """values[j][k] holds V(Q_k, P_j) with Q_k = -X_k / lambda, X_k the spatial grid points."""

    values: np.ndarray
    P: np.ndarray
    spatial: Grid
    lam: float
    p_weights: np.ndarray

    @property
    def q_cell(self) -> float:
        return self.spatial.cell_volume / abs(self.lam) ** self.spatial.dim

    def q_points(self) -> np.ndarray:
        return -self.spatial.points() / self.lam


def _voice_slice(F: SampledField, psi: AnalyticWindow, P: np.ndarray, Xi: np.ndarray) -> np.ndarray:
    """F^{-1}[f-hat * conj psi(. P)] on the spatial grid dual to F.grid."""
    from .representations import _transform

    prod = F.values * np.conj(psi(big_dot(Xi, P)))
    return _transform(prod, F.grid, F.grid.dual(), +1)


def voice_transform(f: SampledField, psi: AnalyticWindow, lam: float, P_list, p_weights=None) -> VoiceTransform:
    """V(Q, P) = <f-hat, exp(2 pi i lambda <Q, .>) psi(. P)> for every Q at once per P."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if not isinstance(psi, AnalyticWindow):
        raise TypeError("window must be evaluable off-grid (an AnalyticWindow)")
    F = _spectrum(f)
    Xi = F.grid.points()
    P = np.array([np.asarray(p.coords if isinstance(p, HPoint) else p, dtype=float) for p in P_list])
    P = P.reshape(-1, F.dim)
    vals = np.array([_voice_slice(F, psi, Pj, Xi) for Pj in P]).reshape((len(P),) + F.grid.shape)
    w = np.ones(len(P)) if p_weights is None else np.asarray(p_weights, dtype=float)
    return VoiceTransform(vals, P, F.grid.dual(), float(lam), w)


def voice_transform_direct(f: SampledField, psi: AnalyticWindow, lam: float, Q, P) -> complex:
    """Oracle: direct frequency quadrature of <f-hat, pi(Q, P) psi> with f-hat by a direct DFT sum."""
    F = direct_fourier(f) if f.side == SPATIAL else f
    Xi = F.grid.points()
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    integrand = F.values * np.conj(np.exp(2j * np.pi * lam * (Xi @ Q)) * psi(big_dot(Xi, P)))
    return complex(np.sum(integrand) * F.grid.cell_volume)


def direct_fourier(f: SampledField) -> SampledField:
    """O(N^{2d}) Riemann-sum Fourier transform (test oracle)."""
    dual = f.grid.dual()
    X = f.grid.points().reshape(-1, f.dim)
    Xi = dual.points().reshape(-1, f.dim)
    kernel = np.exp(-2j * np.pi * (Xi @ X.T))
    vals = kernel @ f.values.ravel() * f.grid.cell_volume
    return SampledField(dual, vals.reshape(dual.shape), FREQUENCY)


def mixed_lpq_norm(F, p: float, q: float, w: WeightSpec | None = None, q_cell: float | None = None,
                   p_weights=None, P=None) -> NormResult:
    """Inner L^p over the Q factor, outer weighted L^q over the P factor.

    F is a VoiceTransform or an array of shape (nP, ...) with q_cell given.
    """
    p, q = _exponent(p), _exponent(q)
    if isinstance(F, VoiceTransform):
        vals, q_cell, p_weights, P = F.values, F.q_cell, F.p_weights, F.P
    else:
        vals = np.asarray(F)
        if q_cell is None:
            raise ValueError("q_cell is required for raw arrays")
    axes = tuple(range(1, vals.ndim))
    inner = lp_grid(vals, p, q_cell, axes)
    pw = np.ones(len(inner)) if p_weights is None else np.asarray(p_weights, dtype=float)
    wt = np.ones(len(inner)) if (w is None or P is None) else np.asarray(weight_eval(w, np.asarray(P)))
    terms = inner * wt
    return NormResult(lq_aggregate(terms, q, pw), terms, list(range(len(terms))),
                      quadrature={"q_cell": q_cell})


def p_samples(radius, n: int, m: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Points y . gamma, y on the corner sub-grid (2/m) {0..m-1}^d of Sigma, gamma in the lattice ball.

    For even gamma these points are exactly the Cartesian grid (2/m) Z^d inside
    the truncated tiling, so the rule is a uniform lattice rule.
    """
    d = 2 * n + 1
    G = lattice_ball_array(radius, n).astype(float)
    ys = np.array(list(itertools.product(range(m), repeat=d)), dtype=float) * (2.0 / m)
    pts = np.concatenate([big_dot(ys, g) for g in G]) if len(G) else np.zeros((0, d))
    return pts, np.full(len(pts), (2.0 / m) ** d)


# ----------------------------------------------------------------------------
# coorbit norm
# ----------------------------------------------------------------------------

def coorbit_norm(f: SampledField, psi: AnalyticWindow, lam: float = 1.0, spec: NormSpec | None = None,
                 radius=6, m: int = 2, threads: int | None = None) -> NormResult:
    """Mixed L^{p,q} norm of the voice transform with weight hv_s on the P factor."""
    return coorbit_norms(f, psi, lam, [spec or NormSpec()], radius, m, threads)[0]


def coorbit_norms(f: SampledField, psi: AnalyticWindow, lam: float, specs, radius=6, m: int = 2,
                  threads: int | None = None) -> list:
    """Several coorbit norms from one pass over the P samples."""
    specs = list(specs)
    if any(sp.kind != "E_coorbit" for sp in specs):
        raise ValueError("coorbit norms need E_coorbit specs")
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    F = _spectrum(f)
    Xi = F.grid.points()
    probe = psi(Xi)
    if not np.any(np.abs(probe) > 0):
        raise ValueError("zero window")
    n = (F.dim - 1) // 2
    P, pw = p_samples(radius, n, m)
    spatial = F.grid.dual()
    q_cell = spatial.cell_volume / abs(lam) ** F.dim
    fmax = float(np.abs(F.values).max())
    tiny = 1e-10 * fmax * float(np.abs(probe).max())
    ps = sorted({sp.p for sp in specs})
    from .representations import _transform

    def inner(Pj):
        prod = F.values * np.conj(psi(big_dot(Xi, Pj)))
        if fmax == 0 or np.abs(prod).max() <= tiny:
            return [0.0] * len(ps)
        v = _transform(prod, F.grid, spatial, +1)
        return [float(lp_grid(v, p, q_cell)) for p in ps]

    table = np.array(_ordered_map(inner, list(P), threads)).reshape(len(P), len(ps))
    idx = [tuple(x) for x in P.tolist()]
    out = []
    for sp in specs:
        wt = np.asarray(weight_eval(WeightSpec(sp.s), P)) if len(P) else np.zeros(0)
        terms = table[:, ps.index(sp.p)] * wt
        out.append(NormResult(lq_aggregate(terms, sp.q, pw), terms, idx, sp,
                              {"lattice_radius": float(radius), "samples_per_cell": m ** F.dim, "lambda": lam},
                              {"q_cell": q_cell, "p_cell": float(pw[0]) if len(pw) else 0.0,
                               "grid": list(F.grid.shape)}))
    return out


def coorbit_scaling_factor(p: float, lam: float, d: int) -> float:
    """Predicted ratio value(lambda) / value(1) from the substitution Q -> -lambda Q."""
    return abs(lam) ** (-d / p) if not math.isinf(p) else 1.0


# ----------------------------------------------------------------------------
# decomposition norms
# ----------------------------------------------------------------------------

def _index_weights(bapu: Bapu, s: float) -> np.ndarray:
    idx = np.asarray(bapu.indices, dtype=float)
    if bapu.kind == "heisenberg":
        return np.asarray(weight_eval(WeightSpec(s), idx))
    if bapu.kind == "uniform":
        return np.asarray(weight_eval(WeightSpec(s, "euclidean"), idx))
    return np.asarray(weight_eval(WeightSpec(s, "dyadic"), idx))


def leakage(F: SampledField, bapu: Bapu) -> float:
    e = np.abs(F.values) ** 2
    tot = float(e.sum())
    return 0.0 if tot == 0 else float(e[~bapu.interior].sum() / tot)


def decomposition_norm(f: SampledField, bapu: Bapu, spec: NormSpec | None = None,
                       max_leakage: float = 1e-6, threads: int | None = None) -> NormResult:
    """l^q_w aggregate of ||F^{-1}(window_i f-hat)||_p over the windows of a BAPU."""
    spec = spec or NormSpec(kind="E_decomposition")
    F = _spectrum(f)
    if F.grid != bapu.grid:
        raise ValueError("field spectrum and BAPU live on different grids")
    leak = leakage(F, bapu)
    if leak > max_leakage:
        raise LeakageError(leak, max_leakage)
    spatial = F.grid.dual()
    from .representations import _transform

    def piece(i):
        prod = bapu.windows[i] * F.values
        if not np.any(prod):
            return 0.0
        return float(lp_grid(_transform(prod, F.grid, spatial, +1), spec.p, spatial.cell_volume))

    inner = np.array(_ordered_map(piece, list(range(len(bapu.indices))), threads))
    terms = inner * _index_weights(bapu, spec.s)
    idx = [v.tolist() if isinstance(v, np.ndarray) else int(v) for v in bapu.indices]
    return NormResult(lq_aggregate(terms, spec.q), terms, idx, spec,
                      {"covering": bapu.kind, "members": len(idx), "leakage": leak},
                      {"cell": spatial.cell_volume, "grid": list(F.grid.shape)})


def heisenberg_bapu_for(grid: Grid, radius=6, eps: float = 0.25) -> Bapu:
    return bapu_build(eps, lattice_ball_array(radius, (grid.dim - 1) // 2), grid)


def uniform_bapu_for(grid: Grid, eps: float = 0.25, box_radius=None) -> Bapu:
    if box_radius is None:
        reach = max(max(abs(o), abs(o + h * (N - 1))) for N, h, o in zip(grid.shape, grid.spacing, grid.origin))
        box_radius = 2 * math.ceil(reach / 2) + 4
    return uniform_bapu_build(eps, box_radius, grid)


def dyadic_bapu(grid: Grid, k_max: int | None = None, homogeneous: bool = False, k_min: int = 0) -> Bapu:
    """Littlewood-Paley windows packaged as a BAPU; interior is where they sum to 1."""
    r = np.linalg.norm(grid.points(), axis=-1)
    if k_max is None:
        k_max = max(0, int(math.ceil(math.log2(max(r.max(), 1.0)))))
    ks = np.arange(k_min, k_max + 1)
    win = dyadic_windows(grid, ks, homogeneous)
    total = win.sum(axis=0)
    interior = np.abs(total - 1) < 1e-12
    if homogeneous:
        # the origin is not part of the frequency domain of the homogeneous covering
        interior |= r == 0
    return Bapu(grid, ks, win, total, interior, "homogeneous_dyadic" if homogeneous else "dyadic")


def besov_norm(f: SampledField, spec: NormSpec, k_max: int | None = None, k_min: int | None = None,
               max_leakage: float = 1e-6, threads: int | None = None) -> NormResult:
    if spec.kind not in ("B_inhomogeneous", "B_homogeneous"):
        raise ValueError("besov_norm expects a B_* spec")
    F = _spectrum(f)
    hom = spec.kind == "B_homogeneous"
    if k_min is None:
        k_min = _auto_k_min(F) if hom else 0
    bapu = dyadic_bapu(F.grid, k_max, hom, k_min)
    return decomposition_norm(F, bapu, spec, max_leakage, threads)


def _auto_k_min(F: SampledField) -> int:
    """Smallest shell index whose inner edge is below the first nonzero frequency ring."""
    eta = min(F.grid.spacing)
    return int(math.floor(math.log2(eta))) - 2


def modulation_norm(f: SampledField, psi: AnalyticWindow | None = None, spec: NormSpec | None = None,
                    route: str = "stft", stride: int = 4, eps: float = 0.25,
                    threads: int | None = None) -> NormResult:
    """M^{p,q}_{v_s}: Euclidean STFT route, or the uniform-covering decomposition route."""
    spec = spec or NormSpec(kind="M_modulation")
    F = _spectrum(f)
    if route == "decomposition":
        return decomposition_norm(F, uniform_bapu_for(F.grid, eps), spec, threads=threads)
    if route != "stft":
        raise ValueError(f"unknown route {route!r}")
    if psi is None:
        raise ValueError("the STFT route needs a window")
    Xi = F.grid.points()
    spatial = F.grid.dual()
    sub = tuple(slice(0, None, stride) for _ in range(F.dim))
    omegas = Xi[sub].reshape(-1, F.dim)
    w_cell = float(np.prod([h * stride for h in F.grid.spacing]))
    from .representations import _transform

    def inner(om):
        prod = F.values * np.conj(psi(Xi - om))
        if not np.any(np.abs(prod) > 0):
            return 0.0
        return float(lp_grid(_transform(prod, F.grid, spatial, +1), spec.p, spatial.cell_volume))

    vals = np.array(_ordered_map(inner, list(omegas), threads))
    terms = vals * np.asarray(weight_eval(WeightSpec(spec.s, "euclidean"), omegas))
    return NormResult(lq_aggregate(terms, spec.q, np.full(len(terms), w_cell)), terms,
                      [tuple(x) for x in omegas.tolist()], spec, {"route": "stft", "stride": stride},
                      {"x_cell": spatial.cell_volume, "omega_cell": w_cell})


def modulation_cross_check(f: SampledField, psi: AnalyticWindow, spec: NormSpec, **kw) -> dict:
    a = modulation_norm(f, psi, spec, route="stft", **kw).value
    b = modulation_norm(f, psi, spec, route="decomposition").value
    return {"stft": a, "decomposition": b, "ratio": a / b if b else float("nan")}


# ----------------------------------------------------------------------------
# embedding constants
# ----------------------------------------------------------------------------

def conjugate(x: float) -> float:
    """x' with the convention x' = inf for x <= 1."""
    x = float(x)
    if x <= 1:
        return math.inf
    if math.isinf(x):
        return 1.0
    return x / (x - 1)


@dataclass(frozen=True)
class DivergenceReport:
    values: list
    radii: list
    divergent: bool

    @property
    def value(self) -> float:
        return math.inf if self.divergent else self.values[-1]

    def report(self) -> dict:
        return {"values": self.values, "radii": self.radii, "divergent": self.divergent,
                "value": "inf" if self.divergent else self.value}


def _growing(values: list, rtol: float = 1e-12) -> bool:
    return values[-1] > values[-2] * (1 + rtol)


def embedding_constant_K(s1: float, s2: float, p1: float, p2: float, q1: float, q2: float,
                         radii=(16, 32), n: int = 1) -> DivergenceReport:
    """l^{q2 (q1/q2)'} norm of the weight ratio (1+|gamma|^4)^{(s2-s1)/4} over lattice balls."""
    p1, p2, q1, q2 = map(_exponent, (p1, p2, q1, q2))
    e = q2 * conjugate(q1 / q2)
    vals = []
    for R in radii:
        G = lattice_ball_array(R, n).astype(float)
        ratio = np.asarray(weight_eval(WeightSpec(s2 - s1), G))
        vals.append(float(ratio.max()) if math.isinf(e) else float(np.sum(ratio ** e) ** (1 / e)))
    return DivergenceReport(vals, [float(r) for r in radii], _growing(vals))


@functools.lru_cache(maxsize=16)
def gamma_k_counts(radius, n: int = 1, eps=Fraction(1, 4)) -> tuple[tuple, tuple]:
    """(k, |Gamma_k|) for homogeneous shells k >= 0 that the truncation captures completely."""
    c = heisenberg(n, eps, radius)
    _, table, ks = heis_shell_table(c, "homogeneous_dyadic")
    counts = table.sum(axis=0)
    S = Fraction(eps)
    corner = float(((2 * n * (2 + S) ** 2) ** 2 + 16 * (2 + S) ** 2)) ** 0.25
    done = []
    for k, cnt in zip(ks, counts):
        rho = 2.0 ** (k + 2)
        if corner + max(rho, 2 * math.sqrt(rho)) <= float(radius):
            done.append((k, int(cnt)))
    return tuple(k for k, _ in done), tuple(c for _, c in done)


def embedding_constant_Kr(p: float, q: float, s: float, radii=(16, 32), n: int = 1) -> DivergenceReport:
    """Nested norm over homogeneous shells with r = min(p, p'), all determinants and u_0 equal to 1."""
    p, q = _exponent(p), _exponent(q)
    r = min(p, conjugate(p))
    e_in = r * conjugate(q / r)
    e_out = q * conjugate(q / q)
    vals = []
    for R in radii:
        ks, counts = gamma_k_counts(R, n)
        if not ks:
            raise ValueError(f"radius {R} captures no complete shell")
        inner = [1.0 if math.isinf(e_in) else c ** (1 / e_in) for c in counts]
        terms = np.array([2.0 ** (k * s) * v for k, v in zip(ks, inner)])
        vals.append(float(terms.max()) if math.isinf(e_out) else float(np.sum(terms ** e_out) ** (1 / e_out)))
    return DivergenceReport(vals, [float(x) for x in radii], _growing(vals))
