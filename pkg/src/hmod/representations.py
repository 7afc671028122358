"""Sampled fields and the unitary actions of H_n and H_{n,2} on them.

Fields live on uniform box grids and are treated as periodic on the box.
The Fourier transform uses the kernel exp(-2 pi i x.xi) and maps a grid with
spacing h to the centred grid with spacing 1/(N h).
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft
import scipy.ndimage

from .nilpotent_core import HPoint, SplitDFPoint, coad_h, split, DFPoint

SPATIAL, FREQUENCY = "spatial", "frequency"
MAGIC = b"HMODF1"


class GridCompatibilityError(ValueError):
    """A substitution does not map grid points to grid points."""


class FieldFormatError(ValueError):
    """Malformed field file."""


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("HMOD_THREADS", "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------------
# grids and fields
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    shape: tuple
    spacing: tuple
    origin: tuple

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if not (len(self.shape) == len(self.spacing) == len(self.origin)):
            raise ValueError("shape, spacing and origin must have equal length")
        if any(h <= 0 for h in self.spacing) or any(s < 1 for s in self.shape):
            raise ValueError("grid needs positive spacing and sample counts")

    @classmethod
    def centered(cls, shape: Sequence[int], spacing: Sequence[float]) -> "Grid":
        """Grid with origin -N h / 2 on every axis."""
        return cls(tuple(shape), tuple(spacing), tuple(-s * h / 2 for s, h in zip(shape, spacing)))

    @classmethod
    def cube(cls, d: int, N: int, half_width: float) -> "Grid":
        return cls.centered((N,) * d, (2 * half_width / N,) * d)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list:
        return [o + h * np.arange(s) for s, h, o in zip(self.shape, self.spacing, self.origin)]

    def points(self) -> np.ndarray:
        """Array of shape (*shape, d) with the coordinates of every sample."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def dual(self) -> "Grid":
        return Grid.centered(self.shape, tuple(1.0 / (s * h) for s, h in zip(self.shape, self.spacing)))


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: Grid
    values: np.ndarray
    side: str = SPATIAL

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"samples of shape {vals.shape} do not match grid {self.grid.shape}")
        if self.side not in (SPATIAL, FREQUENCY):
            raise ValueError(f"unknown side tag {self.side!r}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def lp_norm(self, p: float) -> float:
        a = np.abs(self.values)
        if np.isinf(p):
            return float(a.max())
        return float((np.sum(a ** p) * self.grid.cell_volume) ** (1.0 / p))

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values, self.side)


def sample(window, grid: Grid, side: str = SPATIAL) -> SampledField:
    return SampledField(grid, window(grid.points()), side)


def _transform(values: np.ndarray, src: Grid, dst: Grid, sign: int) -> np.ndarray:
    """Riemann-sum Fourier transform between dual grids via one FFT.

    out_m = prod(h) sum_k f_k exp(sign 2 pi i x_k xi_m), x_k = o + k h, xi_m = w + m eta.
    """
    out = np.asarray(values, dtype=complex)
    for ax in range(src.dim):
        N, h, o = src.shape[ax], src.spacing[ax], src.origin[ax]
        eta, w = dst.spacing[ax], dst.origin[ax]
        if dst.shape[ax] != N or abs(h * eta * N - 1) > 1e-9:
            raise ValueError("grids are not Fourier-dual")
        k = np.arange(N)
        shape = [1] * src.dim
        shape[ax] = N
        pre = np.exp(sign * 2j * np.pi * k * h * w).reshape(shape)
        post = (h * np.exp(sign * 2j * np.pi * o * (w + k * eta))).reshape(shape)
        if sign < 0:
            out = scipy.fft.fft(out * pre, axis=ax, workers=fft_workers()) * post
        else:
            out = scipy.fft.ifft(out * pre, axis=ax, workers=fft_workers()) * (N * post)
    return out


def fourier_transform(f: SampledField) -> SampledField:
    if f.side != SPATIAL:
        raise ValueError("forward transform expects a spatial-side field")
    dual = f.grid.dual()
    return SampledField(dual, _transform(f.values, f.grid, dual, -1), FREQUENCY)


def inverse_fourier_transform(F: SampledField, grid: Grid | None = None) -> SampledField:
    if F.side != FREQUENCY:
        raise ValueError("inverse transform expects a frequency-side field")
    grid = F.grid.dual() if grid is None else grid
    return SampledField(grid, _transform(F.values, F.grid, grid, +1), SPATIAL)


# ----------------------------------------------------------------------------
# field files
# ----------------------------------------------------------------------------

def write_field(path, f: SampledField) -> None:
    """Binary layout: magic, uint32 d, per axis (uint32 N, f64 h, f64 o), uint8 side, complex128 samples."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", f.dim))
        for N, h, o in zip(f.grid.shape, f.grid.spacing, f.grid.origin):
            fh.write(struct.pack("<Idd", N, h, o))
        fh.write(struct.pack("<B", 0 if f.side == SPATIAL else 1))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_field(path) -> SampledField:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FieldFormatError(f"cannot read field file {path}: {exc}") from exc
    buf = io.BytesIO(raw)
    try:
        if buf.read(6) != MAGIC:
            raise FieldFormatError(f"{path}: missing HMODF1 magic")
        (d,) = struct.unpack("<I", buf.read(4))
        if not 1 <= d <= 16:
            raise FieldFormatError(f"{path}: implausible dimension {d}")
        axes = [struct.unpack("<Idd", buf.read(20)) for _ in range(d)]
        (side,) = struct.unpack("<B", buf.read(1))
    except struct.error as exc:
        raise FieldFormatError(f"{path}: truncated header") from exc
    shape = tuple(a[0] for a in axes)
    body = buf.read()
    if len(body) != 16 * int(np.prod(shape)):
        raise FieldFormatError(f"{path}: expected {np.prod(shape)} samples, found {len(body) / 16:g}")
    vals = np.frombuffer(body, dtype="<c16").reshape(shape)
    grid = Grid(shape, tuple(a[1] for a in axes), tuple(a[2] for a in axes))
    return SampledField(grid, vals, SPATIAL if side == 0 else FREQUENCY)


def write_field_csv(path, f: SampledField) -> None:
    """Small-grid escape hatch: one JSON header line, then 're,im' per sample in row-major order."""
    header = {"format": "HMODF1-csv", "shape": list(f.grid.shape), "spacing": list(f.grid.spacing),
              "origin": list(f.grid.origin), "side": f.side}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for z in f.values.ravel():
            fh.write(f"{float(z.real)!r},{float(z.imag)!r}\n")


def read_field_csv(path) -> SampledField:
    try:
        with open(path) as fh:
            header = json.loads(fh.readline())
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
        grid = Grid(header["shape"], header["spacing"], header["origin"])
        vals = (rows[:, 0] + 1j * rows[:, 1]).reshape(grid.shape)
        return SampledField(grid, vals, header["side"])
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"cannot read csv field {path}: {exc}") from exc


# ----------------------------------------------------------------------------
# windows
# ----------------------------------------------------------------------------

class AnalyticWindow:
    """A function that can be evaluated at arbitrary points of shape (..., d)."""

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no analytic gradient")


@dataclass(frozen=True)
class Gaussian(AnalyticWindow):
    """A * prod exp(-pi ((x_i - c_i)/a_i)^2) * exp(2 pi i m.x)."""

    widths: tuple
    center: tuple | None = None
    modulation: tuple | None = None
    amplitude: complex = 1.0

    def __post_init__(self):
        d = len(self.widths)
        object.__setattr__(self, "widths", tuple(float(a) for a in self.widths))
        object.__setattr__(self, "center", tuple(float(c) for c in (self.center or (0.0,) * d)))
        object.__setattr__(self, "modulation", tuple(float(m) for m in (self.modulation or (0.0,) * d)))
        if any(a <= 0 for a in self.widths):
            raise ValueError("Gaussian widths must be positive")

    @classmethod
    def isotropic(cls, d: int, width: float = 1.0) -> "Gaussian":
        return cls((width,) * d)

    @property
    def dim(self) -> int:
        return len(self.widths)

    def _parts(self, pts):
        a, c, m = (np.asarray(v) for v in (self.widths, self.center, self.modulation))
        pts = np.asarray(pts, dtype=float)
        r = (pts - c) / a
        val = self.amplitude * np.exp(-np.pi * np.sum(r * r, axis=-1) + 2j * np.pi * (pts @ m))
        return val, pts, a, c, m

    def __call__(self, pts):
        return self._parts(pts)[0]

    def gradient(self, pts):
        val, pts, a, c, m = self._parts(pts)
        return val[..., None] * (-2 * np.pi * (pts - c) / a ** 2 + 2j * np.pi * m)

    def fourier(self) -> "Gaussian":
        a, c, m = (np.asarray(v) for v in (self.widths, self.center, self.modulation))
        amp = self.amplitude * np.prod(a) * np.exp(2j * np.pi * np.dot(c, m))
        return Gaussian(tuple(1 / a), tuple(m), tuple(-c), complex(amp))

    def l2_norm(self) -> float:
        return float(abs(self.amplitude) * np.prod(np.sqrt(np.asarray(self.widths) / np.sqrt(2))))


def _smoothstep(tau: np.ndarray) -> np.ndarray:
    """0 for tau <= 0, 1 for tau >= 1, C-infinity in between (exp(-1/x) construction)."""
    tau = np.clip(tau, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(tau > 0, np.exp(-1.0 / np.where(tau > 0, tau, 1.0)), 0.0)
        b = np.where(tau < 1, np.exp(-1.0 / np.where(tau < 1, 1.0 - tau, 1.0)), 0.0)
    return a / (a + b)


def plateau_1d(x: np.ndarray, eps: float) -> np.ndarray:
    """1 on [-eps/2, 2+eps/2], 0 outside (-eps, 2+eps)."""
    x = np.asarray(x, dtype=float)
    return _smoothstep((x + eps) / (eps / 2)) * _smoothstep((2 + eps - x) / (eps / 2))


@dataclass(frozen=True)
class TensorBump(AnalyticWindow):
    """Tensor product of smooth plateaus supported in (-eps, 2+eps)^d."""

    eps: float = 0.25

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.prod(plateau_1d(pts, self.eps), axis=-1).astype(complex)


@dataclass(frozen=True)
class SampledWindow(AnalyticWindow):
    """Periodic linear interpolation of a sampled field (O(h^2) error)."""

    field: SampledField
    order: int = 1

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        g = self.field.grid
        idx = [(pts[..., i] - g.origin[i]) / g.spacing[i] for i in range(g.dim)]
        coords = np.stack([c.ravel() for c in idx])
        out = np.empty(coords.shape[1], dtype=complex)
        kw = dict(order=self.order, mode="grid-wrap")
        out.real = scipy.ndimage.map_coordinates(self.field.values.real, coords, **kw)
        out.imag = scipy.ndimage.map_coordinates(self.field.values.imag, coords, **kw)
        return out.reshape(pts.shape[:-1])


# ----------------------------------------------------------------------------
# substitutions
# ----------------------------------------------------------------------------

def _gather(f: SampledField, targets: np.ndarray, what: str) -> np.ndarray:
    """Values of f at target points that must coincide with grid points (periodic wrap)."""
    g = f.grid
    idx = []
    for i in range(g.dim):
        r = (targets[..., i] - g.origin[i]) / g.spacing[i]
        k = np.rint(r)
        if np.max(np.abs(r - k), initial=0.0) > 1e-9:
            raise GridCompatibilityError(
                f"{what}: offset is not a multiple of the grid spacing on axis {i}; "
                "use analytic mode (pass an AnalyticWindow and a grid)")
        idx.append(np.mod(k.astype(np.int64), g.shape[i]))
    return f.values[tuple(idx)]


def _evaluate(f, grid: Grid | None, targets_fn, what: str):
    """Shared dispatch: returns (grid, values of f at targets)."""
    if isinstance(f, SampledField):
        grid = f.grid
        return grid, _gather(f, targets_fn(grid.points()), what)
    if isinstance(f, AnalyticWindow):
        if grid is None:
            raise ValueError("analytic mode needs an explicit grid")
        return grid, f(targets_fn(grid.points()))
    raise TypeError(f"cannot act on {type(f).__name__}")


def _side_of(f) -> str:
    return f.side if isinstance(f, SampledField) else SPATIAL


def schrodinger_apply(lam: float, g: HPoint, f, grid: Grid | None = None) -> SampledField:
    """rho_lambda(p,q,t) f(x) = exp(2 pi i lambda (t + q.x + p.q/2)) f(x + p)."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    p, q, t = (np.asarray(v, dtype=float) for v in (g.p, g.q, g.t))
    grid, vals = _evaluate(f, grid, lambda X: X + p, "schrodinger_apply")
    X = grid.points()
    phase = np.exp(2j * np.pi * lam * (t + X @ q + np.dot(p, q) / 2))
    return SampledField(grid, phase * vals, _side_of(f))


def tf_shift(q, p, f, grid: Grid | None = None) -> SampledField:
    """M_q T_p f(x) = exp(2 pi i q.x) f(x + p)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    g = HPoint(np.concatenate([p, q, [-np.dot(p, q) / 2]]))
    return schrodinger_apply(1.0, g, f, grid)


def big_dot(X: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Heisenberg product X . P applied to an array of points (..., 2n+1)."""
    n = (X.shape[-1] - 1) // 2
    out = X + P
    sym = X[..., :n] @ P[n:2 * n] - X[..., n:2 * n] @ P[:n]
    out[..., -1] += sym / 2
    return out


def generic_apply(lam: float, g: SplitDFPoint, f, grid: Grid | None = None,
                  projective: bool = False) -> SampledField:
    """pi_lambda((Q,S),P) psi(X) = exp(2 pi i lambda (S + <Q,X>)) psi(X . P).

    With projective=True the central factor exp(2 pi i lambda S) is dropped.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    P = np.asarray(g.P.coords, dtype=float)
    Q = np.asarray(g.Q, dtype=float)
    grid, vals = _evaluate(f, grid, lambda X: big_dot(X, P), "generic_apply")
    S = 0.0 if projective else float(g.S)
    phase = np.exp(2j * np.pi * lam * (S + grid.points() @ Q))
    return SampledField(grid, phase * vals, _side_of(f))


def apply_exponential(lam: float, X: DFPoint, f, grid: Grid | None = None) -> SampledField:
    """pi_lambda(exp X) via the split chart."""
    return generic_apply(lam, split(X), f, grid)


def intertwined_projective_apply(lam: float, Q, P: HPoint, f, grid: Grid | None = None) -> SampledField:
    """Fourier conjugate of the projective action: F^{-1} pi^pr(Q, P) F.

    (pi(Q,P) psi)(X) = exp(-2 pi i <Y, P>) psi(Y - ad*(P)(Y)/2),  Y = X + lambda Q.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    Q = np.asarray(Q, dtype=float)
    Pf = HPoint(np.asarray(P.coords, dtype=float))
    Pc = Pf.coords

    def targets(X):
        Y = X + lam * Q
        n = Pf.n
        shear = np.zeros_like(Y)
        shear[..., :n] = Y[..., -1:] * Pf.q
        shear[..., n:2 * n] = -Y[..., -1:] * Pf.p
        return Y - shear / 2

    grid, vals = _evaluate(f, grid, targets, "intertwined_projective_apply")
    X = grid.points()
    phase = np.exp(-2j * np.pi * ((X + lam * Q) @ Pc))
    return SampledField(grid, phase * vals, _side_of(f))


# ----------------------------------------------------------------------------
# infinitesimal actions
# ----------------------------------------------------------------------------

def _direction_vector(direction, labels: list) -> np.ndarray:
    if isinstance(direction, str):
        v = np.zeros(len(labels))
        v[labels.index(direction)] = 1.0
        return v
    if isinstance(direction, (HPoint, DFPoint)):
        return np.asarray(direction.coords, dtype=float)
    return np.asarray(direction, dtype=float)


def h_labels(n: int) -> list:
    return [f"p{j + 1}" for j in range(n)] + [f"q{j + 1}" for j in range(n)] + ["t"]


def df_labels(n: int) -> list:
    from .nilpotent_core import DFIndex, df_dim
    ix = DFIndex(n)
    return [ix.label(i) for i in range(df_dim(n))]


def derived_action(rep: str, lam: float, direction, f: AnalyticWindow, grid: Grid) -> np.ndarray:
    """d rho(X) f or d pi(X) f evaluated on the grid points."""
    X = grid.points()
    d = grid.dim
    if rep == "schrodinger":
        n = d
        c = _direction_vector(direction, h_labels(n))
        val, grad = f(X), f.gradient(X)
        out = grad @ c[:n]
        out = out + 2j * np.pi * lam * (X @ c[n:2 * n] + c[-1]) * val
        return out
    if rep == "generic":
        n = (d - 1) // 2
        c = _direction_vector(direction, df_labels(n))
        u, v, w = c[:n], c[n:2 * n], c[2 * n]
        Qc, s = c[2 * n + 1:4 * n + 2], c[-1]
        val, grad = f(X), f.gradient(X)
        p, q = X[..., :n], X[..., n:2 * n]
        dt = grad[..., -1]
        out = grad[..., :n] @ u + grad[..., n:2 * n] @ v + w * dt
        out = out + dt * ((p @ v) - (q @ u)) / 2
        out = out + 2j * np.pi * lam * (X @ Qc + s) * val
        return out
    raise ValueError(f"unknown representation family {rep!r}")


def infinitesimal_check(direction, rep: str, f: AnalyticWindow, tau: float,
                        grid: Grid, lam: float = 1.0) -> float:
    """max |(pi(exp tau X) f - f)/tau - d pi(X) f| over the grid."""
    X = grid.points()
    d = grid.dim
    if rep == "schrodinger":
        c = _direction_vector(direction, h_labels(d))
        moved = schrodinger_apply(lam, HPoint(tau * c), f, grid).values
    elif rep == "generic":
        c = _direction_vector(direction, df_labels((d - 1) // 2))
        moved = apply_exponential(lam, DFPoint(tau * c), f, grid).values
    else:
        raise ValueError(f"unknown representation family {rep!r}")
    diff = (moved - f(X)) / tau - derived_action(rep, lam, c, f, grid)
    return float(np.max(np.abs(diff)))
