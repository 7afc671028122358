"""Command-line front end: ``hmod norm | classify | covering | plot | selftest``.

Reports are single-line JSON records carrying a schema version.
Exit codes: 0 success, 2 usage or input error, 3 numerical precondition failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

SCHEMA = "hmod.report/1"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else obj.numerator
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def emit(record: dict, out: str | None) -> None:
    line = json.dumps(_jsonable({"schema": SCHEMA, **record}), sort_keys=True)
    if out:
        with open(out, "a" if os.path.exists(out) and out.endswith(".jsonl") else "w") as fh:
            fh.write(line + "\n")
    else:
        print(line)


def _number(text: str):
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise InputError(f"not a number: {text!r}") from None


def _exponent(text: str) -> float:
    if text.lower() in ("inf", "infinity", "oo"):
        return math.inf
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponent {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("exponents must lie in [1, inf]")
    return v


def _radii(text: str) -> list:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("radii must be positive")
    return vals


def _eps(text: str) -> Fraction:
    v = Fraction(text).limit_denominator(10 ** 6) if "/" in text else Fraction(float(text)).limit_denominator(10 ** 6)
    if not 0 < v < Fraction(1, 2):
        raise argparse.ArgumentTypeError("eps must lie in (0, 1/2)")
    return v


def parse_window(desc: str, d: int):
    """'gauss:W' or 'gauss:W1,W2,...' -> spatial Gaussian."""
    from .representations import Gaussian

    kind, _, arg = desc.partition(":")
    if kind != "gauss":
        raise InputError(f"unknown window kind {kind!r} (expected gauss:WIDTH)")
    try:
        widths = [float(x) for x in arg.split(",")] if arg else [1.0]
    except ValueError:
        raise InputError(f"bad window width in {desc!r}") from None
    if len(widths) == 1:
        widths = widths * d
    if len(widths) != d or any(w <= 0 for w in widths):
        raise InputError(f"window needs 1 or {d} positive widths")
    return Gaussian(tuple(widths))


def parse_form(text: str, n: int):
    """'f_s=1,f_x1=2', a full coefficient list, or '0'."""
    from .nilpotent_core import df_dim
    from .orbits import LinearForm

    text = text.strip()
    if text == "0":
        return LinearForm([0] * df_dim(n))
    parts = [p for p in text.split(",") if p.strip()]
    try:
        if all("=" in p for p in parts):
            coeffs = {}
            for p in parts:
                k, v = p.split("=", 1)
                coeffs[k.strip()] = _number(v)
            return LinearForm.from_dict(n, coeffs)
        vals = [_number(p) for p in parts]
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed form: {exc}") from None
    if len(vals) != df_dim(n):
        raise InputError(f"form needs {df_dim(n)} coefficients for n={n}, got {len(vals)}")
    return LinearForm(vals)


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def _load_field(args, grid):
    from .representations import (FieldFormatError, SampledField, read_field, read_field_csv,
                                  sample)

    if args.input:
        try:
            f = read_field_csv(args.input) if args.csv else read_field(args.input)
        except (OSError, FieldFormatError, ValueError) as exc:
            raise InputError(f"cannot read field {args.input}: {exc}") from None
        if f.dim != grid.dim:
            raise InputError(f"field has dimension {f.dim}, expected {grid.dim}")
        return f
    if args.zero:
        return SampledField(grid, np.zeros(grid.shape))
    if args.self_test_field:
        return sample(parse_window(args.window, grid.dim), grid)
    if args.field:
        return sample(parse_window(args.field, grid.dim), grid)
    raise InputError("give --input FILE, --field gauss:W, --self or --zero")


def cmd_norm(args) -> int:
    from .frequency_covering import GridTooCoarse
    from .norms import (LeakageError, NormSpec, besov_norm, coorbit_norm, decomposition_norm,
                        heisenberg_bapu_for, modulation_norm, to_frequency)
    from .representations import Grid

    d = 2 * args.n + 1
    if args.grid < 4 or args.grid & (args.grid - 1):
        raise InputError("--grid must be a power of two >= 4")
    grid = Grid.cube(d, args.grid, args.half_width)
    f = _load_field(args, grid)
    psi = parse_window(args.window, d)
    psi_hat = to_frequency(psi)
    base = {"command": "norm", "space": args.space, "n": args.n, "grid": f.grid.shape,
            "window": args.window, "lambda": args.lam}
    results = {}
    try:
        if args.space == "E":
            if args.mode in ("coorbit", "both"):
                r = coorbit_norm(f, psi_hat, args.lam, NormSpec(args.p, args.q, args.s), args.radius, args.m,
                                 args.threads)
                results["coorbit"] = r.report()
            if args.mode in ("decomposition", "both"):
                from .norms import fourier_transform
                F = fourier_transform(f) if f.side == "spatial" else f
                bapu = heisenberg_bapu_for(F.grid, args.radius, float(args.eps))
                r = decomposition_norm(F, bapu, NormSpec(args.p, args.q, args.s, "E_decomposition"),
                                       threads=args.threads)
                results["decomposition"] = r.report()
            if args.mode == "both":
                a, b = results["coorbit"]["value"], results["decomposition"]["value"]
                results["ratio"] = a / b if b else None
        elif args.space == "M":
            routes = {"coorbit": ["stft"], "decomposition": ["decomposition"]}.get(args.mode, ["stft", "decomposition"])
            for route in routes:
                r = modulation_norm(f, psi_hat, NormSpec(args.p, args.q, args.s, "M_modulation"), route=route,
                                    eps=float(args.eps), threads=args.threads)
                results[route] = r.report()
            if len(routes) == 2:
                a, b = results["stft"]["value"], results["decomposition"]["value"]
                results["ratio"] = a / b if b else None
        else:
            kind = "B_homogeneous" if args.space == "Bdot" else "B_inhomogeneous"
            results["besov"] = besov_norm(f, NormSpec(args.p, args.q, args.s, kind), threads=args.threads).report()
    except LeakageError as exc:
        emit({**base, "error": str(exc), "leakage": exc.leakage}, args.out)
        return EXIT_NUMERIC
    except GridTooCoarse as exc:
        emit({**base, "error": str(exc)}, args.out)
        return EXIT_NUMERIC
    emit({**base, "results": results}, args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    from .orbits import classify, planck_constant, polarizing_subalgebra, projective_kernel

    F = parse_form(args.form, args.n)
    c = classify(F)
    rec = {"command": "classify", "n": args.n, **c.report()}
    if c.case == 4:
        rec["planck_constant"] = None
        rec["kernel_dim"] = None
    else:
        rec["planck_constant"] = planck_constant(c)
        rec["kernel_dim"] = projective_kernel(c).dim
        rec["polarization_dim"] = polarizing_subalgebra(c).dim
    emit(rec, args.out)
    return EXIT_OK


_KINDS = {"heis": "heisenberg", "uniform": "uniform", "dyadic": "dyadic", "hdyadic": "homogeneous_dyadic"}


def _covering(kind: str, n: int, eps: Fraction, radius: float):
    from .frequency_covering import Covering

    if kind in ("heisenberg", "uniform"):
        return Covering(kind, n, eps, Fraction(radius).limit_denominator(1000))
    return Covering(kind, n)


def cmd_covering(args) -> int:
    from .frequency_covering import (WeightSpec, admissibility_constant, covering_svg, intersection_count,
                                     moderateness_check, structured_transition_sup)

    a, b = _KINDS[args.a], _KINDS[args.b]
    rows = []
    for R in args.radii:
        ca, cb = _covering(a, args.n, args.eps, R), _covering(b, args.n, args.eps, R)
        ic = intersection_count(ca, cb)
        rows.append({"radius": R, **ic.report()})
    rec = {"command": "covering", "a": a, "b": b, "n": args.n, "eps": args.eps, "table": rows}
    growth = lambda key: all(x[key] < y[key] for x, y in zip(rows, rows[1:]))
    rec["strictly_increasing"] = {"N_ab": growth("N_ab"), "N_ba": growth("N_ba")}
    last = args.radii[-1]
    for name, kind in (("a", a), ("b", b)):
        if kind == "heisenberg":
            c = _covering(kind, args.n, args.eps, min(last, 12))
            rec[f"admissibility_{name}"] = admissibility_constant(c).report()
            rec[f"moderateness_{name}"] = moderateness_check(WeightSpec(args.s), c).report()
            rec[f"transition_sup_{name}"] = structured_transition_sup(c)
        elif kind == "uniform":
            rec[f"admissibility_{name}"] = admissibility_constant(_covering(kind, args.n, args.eps, 8)).report()
    if args.svg:
        hc = _covering("heisenberg", args.n, args.eps, min(last, 6))
        with open(args.svg, "w") as fh:
            fh.write(covering_svg(hc))
        rec["svg"] = args.svg
    emit(rec, args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .frequency_covering import covering_svg, heisenberg

    svg = covering_svg(heisenberg(args.n, args.eps, Fraction(args.radius).limit_denominator(1000)))
    with open(args.output, "w") as fh:
        fh.write(svg)
    emit({"command": "plot", "svg": args.output, "radius": args.radius}, args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Fast smoke checks of the exact algebra, the covering and one norm."""
    from .frequency_covering import admissibility_constant, t_gamma, uniform
    from .nilpotent_core import DFPoint, HPoint, bch_step3, df_bracket, df_mul, h_inv, h_mul
    from .norms import NormSpec, coorbit_norm, to_frequency
    from .representations import Gaussian, Grid, sample

    rng = np.random.default_rng(args.seed)
    checks = {}
    ok = True
    n = 1
    for _ in range(20):
        a, b, c = (HPoint([Fraction(int(x)) for x in rng.integers(-9, 10, 3)]) for _ in range(3))
        ok &= h_mul(h_mul(a, b), c) == h_mul(a, h_mul(b, c)) and h_mul(a, h_inv(a)) == HPoint.zero(n)
        X, Y = (DFPoint([Fraction(int(x)) for x in rng.integers(-5, 6, 7)]) for _ in range(2))
        ok &= bch_step3(X, Y, df_bracket) == df_mul(X, Y)
    checks["algebra"] = bool(ok)
    checks["t_gamma_det"] = t_gamma([2, 4, -6]).det() == 1
    checks["uniform_N"] = admissibility_constant(uniform(1, radius=6)).value == 27
    g = Grid.cube(3, 16, 4.0)
    f = sample(Gaussian((1.0,) * 3), g)
    psi = Gaussian((0.5,) * 3)
    v = coorbit_norm(f, to_frequency(psi), 1.0, NormSpec(2, 2, 0), radius=6, m=2, threads=args.threads).value
    checks["orthogonality_rel_err"] = abs(v / (f.l2_norm() * psi.l2_norm()) - 1)
    passed = checks["algebra"] and checks["t_gamma_det"] and checks["uniform_N"] \
        and checks["orthogonality_rel_err"] < 0.02
    emit({"command": "selftest", "checks": checks, "passed": bool(passed)}, args.out)
    return EXIT_OK if passed else 1


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hmod", description="Heisenberg-modulation norms and covering diagnostics.")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: HMOD_THREADS or all cores)")
    ap.add_argument("--out", default=None, help="report file (default: stdout)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="norm of a sampled field")
    p.add_argument("--space", choices=("E", "M", "B", "Bdot"), default="E")
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--q", type=_exponent, default=2.0)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--half-width", type=float, default=4.0)
    p.add_argument("--window", default="gauss:0.5", help="spatial window, gauss:WIDTH")
    p.add_argument("--mode", choices=("coorbit", "decomposition", "both"), default="coorbit",
                   help="E: coorbit/decomposition route; M: coorbit selects the STFT route")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=6.0)
    p.add_argument("--m", type=int, default=2, help="P samples per cell axis")
    p.add_argument("--eps", type=_eps, default=Fraction(1, 4))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="HMODF1 field file")
    src.add_argument("--field", help="generate the field, gauss:WIDTH")
    src.add_argument("--self", dest="self_test_field", action="store_true", help="use the window as the field")
    src.add_argument("--zero", action="store_true", help="use the zero field")
    p.add_argument("--csv", action="store_true", help="read --input as CSV")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("classify", help="coadjoint orbit of a linear form")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--form", required=True, help="f_s=1,f_x1=2 or a full coefficient list or 0")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("covering", help="covering intersection diagnostics")
    p.add_argument("action", nargs="?", choices=("compare",), default="compare")
    p.add_argument("--a", choices=tuple(_KINDS), default="heis")
    p.add_argument("--b", choices=tuple(_KINDS), default="uniform")
    p.add_argument("--radii", type=_radii, default=[8.0, 16.0, 32.0])
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--eps", type=_eps, default=Fraction(1, 4))
    p.add_argument("--s", type=float, default=1.0, help="weight exponent for the moderateness ratio")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_covering)

    p = sub.add_parser("plot", help="SVG of lattice points and cells")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--radius", type=float, default=6.0)
    p.add_argument("--eps", type=_eps, default=Fraction(1, 4))
    p.add_argument("--output", default="covering.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="quick consistency checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            print("hmod: --threads must be positive", file=sys.stderr)
            return EXIT_INPUT
        os.environ["HMOD_THREADS"] = str(args.threads)
    if getattr(args, "n", 1) < 1:
        print("hmod: --n must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"hmod: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
