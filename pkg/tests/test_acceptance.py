"""Acceptance criteria 1-7.

Each test records one PASS/FAIL line (printed in the terminal summary) and
fails if any of its sub-checks misses its target.  Targets are never relaxed;
a sub-check that cannot be met stays red.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE, rand_df, rand_frac, rand_h

from hmod.frequency_covering import (
    WeightSpec, bapu_build, dyadic, heisenberg, intersection_count, lattice_ball_array, moderateness_check,
    t_gamma, uniform, weight_eval,
)
from hmod.nilpotent_core import (
    DFIndex, DFPoint, HPoint, SplitDFPoint, bch_step3, df_bracket, df_dim, df_inv, df_mul, h_bracket,
    h_inv, h_mul, prefix_ideal_violations, split_mul,
)
from hmod.norms import (
    NormSpec, coorbit_norm, coorbit_norms, decomposition_norm, embedding_constant_K, embedding_constant_Kr,
    heisenberg_bapu_for, modulation_norm, voice_transform, voice_transform_direct,
)
from hmod.orbits import (
    LinearForm, affine_orbit_residual, classify, coadjoint_action, in_span, is_subalgebra,
    projective_kernel, same_span, stabilizer_basis,
)
from hmod.representations import (
    FREQUENCY, Gaussian, Grid, SampledField, _smoothstep, df_labels, fourier_transform, generic_apply,
    h_labels, infinitesimal_check, intertwined_projective_apply, inverse_fourier_transform, sample,
    schrodinger_apply,
)


class Checks:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.items = []
        self.t0 = time.perf_counter()

    def add(self, name: str, ok, detail: str = ""):
        self.items.append((name, bool(ok), detail))

    def finish(self):
        elapsed = time.perf_counter() - self.t0
        self.add("runtime", elapsed < self.budget, f"{elapsed:.0f}s, budget {self.budget:.0f}s")
        failed = [f"{n} ({d})" if d else n for n, ok, d in self.items if not ok]
        passed = not failed
        if passed:
            detail = f"{self.title}: {len(self.items)} checks, {elapsed:.1f}s"
        else:
            detail = f"{self.title}: failed {'; '.join(failed)}"
        ACCEPTANCE[self.number] = (passed, detail)
        print(f"\ncriterion {self.number}: {'PASS' if passed else 'FAIL'}  {detail}")
        for name, ok, d in self.items:
            print(f"    {'ok ' if ok else 'BAD'} {name}  {d}")
        assert passed, detail


# ----------------------------------------------------------------------------
# 1. algebraic exactness
# ----------------------------------------------------------------------------

def test_criterion_1_algebra():
    C = Checks(1, "algebraic exactness", 30)
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        e_h, e_df = HPoint.zero(n), DFPoint.zero(n)
        ok = dict.fromkeys(["h assoc", "h inverse", "h bch", "h jacobi",
                            "df assoc", "df inverse", "df bch", "df jacobi"], True)
        for _ in range(1000):
            a, b, c = rand_h(rng, n), rand_h(rng, n), rand_h(rng, n)
            ab = h_mul(a, b)
            ok["h assoc"] &= h_mul(ab, c) == h_mul(a, h_mul(b, c))
            ok["h inverse"] &= h_mul(a, h_inv(a)) == e_h == h_mul(h_inv(a), a)
            ok["h bch"] &= bch_step3(a, b, h_bracket) == ab
            jac = h_bracket(a, h_bracket(b, c)).coords + h_bracket(b, h_bracket(c, a)).coords \
                + h_bracket(c, h_bracket(a, b)).coords
            ok["h jacobi"] &= all(x == 0 for x in jac)

            A, B, D = rand_df(rng, n), rand_df(rng, n), rand_df(rng, n)
            AB = df_mul(A, B)
            ok["df assoc"] &= df_mul(AB, D) == df_mul(A, df_mul(B, D))
            ok["df inverse"] &= df_mul(A, df_inv(A)) == e_df == df_mul(df_inv(A), A)
            ok["df bch"] &= bch_step3(A, B, df_bracket) == AB
            ok["df jacobi"] &= df_bracket(A, df_bracket(B, D)) + df_bracket(B, df_bracket(D, A)) \
                + df_bracket(D, df_bracket(A, B)) == e_df
        for name, good in ok.items():
            C.add(f"{name} n={n} (1000 cases)", good)
        C.add(f"strong Malcev prefixes n={n}", prefix_ideal_violations(n) == [])
    C.finish()


# ----------------------------------------------------------------------------
# 2. orbits
# ----------------------------------------------------------------------------

def random_form(rng, n, case):
    """Random rational form whose orbit lies in the given case."""
    ix = DFIndex(n)
    v = np.array([rand_frac(rng) for _ in range(df_dim(n))], dtype=object)
    if case >= 2:
        v[ix.s] = 0
    if case >= 3:
        v[ix.w] = 0
    if case == 4:
        v[ix.x] = 0
        v[ix.y] = 0
    if case == 1 and v[ix.s] == 0:
        v[ix.s] = 1
    if case == 2 and v[ix.w] == 0:
        v[ix.w] = -1
    if case == 3 and all(c == 0 for c in v[ix.x.start:ix.y.stop]):
        v[ix.x.start] = 2
    return LinearForm(v)


def kernel_fixture(n, case):
    """Projective-kernel directions as listed for Cases 1, 2 (untilted) and 4."""
    b = lambda lab: DFPoint.basis(n, lab)
    if case == 1:
        return [b("s")]
    if case == 2:
        xs = [f"x{j + 1}" for j in range(n)]
        ys = [f"y{j + 1}" for j in range(n)]
        return [b("w")] + [b(l) for l in xs + ys] + [b("z"), b("s")]
    ix = DFIndex(n)
    return [b(ix.label(i)) for i in range(df_dim(n))]


def case3_member(R, V: DFPoint) -> bool:
    """z = 0 and f_x v = f_y u."""
    return V.z == 0 and np.dot(R.f_x, V.v) == np.dot(R.f_y, V.u)


def test_criterion_2_orbits():
    C = Checks(2, "orbit suite", 60)
    rng = np.random.default_rng(2)
    for n in (1, 2):
        basis = [DFPoint.basis(n, DFIndex(n).label(i)) for i in range(df_dim(n))]
        for case in (1, 2, 3, 4):
            tag = idem = invariant = residual = True
            for _ in range(1000):
                F = random_form(rng, n, case)
                c = classify(F)
                G = coadjoint_action(rand_df(rng, n), F)
                cg = classify(G)
                tag &= c.case == case
                invariant &= cg.canonical_rep == c.canonical_rep
                residual &= all(r == 0 for r in affine_orbit_residual(c, G))
                idem &= classify(c.canonical_rep).canonical_rep == c.canonical_rep
            C.add(f"case tag n={n} c={case}", tag)
            C.add(f"idempotent n={n} c={case}", idem)
            C.add(f"Ad* invariance n={n} c={case} (1000 pairs)", invariant)
            C.add(f"affine residual n={n} c={case}", residual)

            dims = kern = closed = annih = fixture = True
            for _ in range(5):
                c = classify(random_form(rng, n, case))
                R = c.canonical_rep
                K = projective_kernel(c)
                stab = stabilizer_basis(R)
                dims &= len(stab) + c.orbit_dim == df_dim(n) == K.dim + c.orbit_dim
                kern &= same_span(stab, K.matrix().astype(float))
                closed &= is_subalgebra(K)
                annih &= all(R(df_bracket(k, y)) == 0 for k in K.vectors for y in basis)
                if case == 3:
                    fixture &= K.dim == df_dim(n) - 2 and all(case3_member(R, k) for k in K.vectors)
            C.add(f"dim stab + dim orbit = {df_dim(n)} n={n} c={case}", dims)
            C.add(f"stabilizer spans kernel n={n} c={case}", kern)
            C.add(f"kernel closed under bracket n={n} c={case}", closed)
            C.add(f"F([kernel, h]) = 0 n={n} c={case}", annih)
            if case == 3:
                C.add(f"kernel fixture n={n} c=3", fixture)

        for case, F in ((1, LinearForm.from_dict(n, {"s": 3})),
                        (2, LinearForm.from_dict(n, {"w": -2, "z": 1})),
                        (4, LinearForm.from_dict(n, {"u": [1] * n, "z": 2}))):
            K = projective_kernel(classify(F))
            want = kernel_fixture(n, case)
            C.add(f"kernel fixture n={n} c={case}", K.dim == len(want) and all(in_span(v, K) for v in want))
    C.finish()


# ----------------------------------------------------------------------------
# 3. representations
# ----------------------------------------------------------------------------

def test_criterion_3_representations():
    C = Checks(3, "representation suite", 120)
    rng = np.random.default_rng(3)
    torus = Grid.cube(3, 32, 4.0)             # period 8, spacing 1/4
    line = Grid.cube(1, 64, 4.0)              # period 8, spacing 1/8
    rand = lambda g: SampledField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))

    def torus_element():
        P = HPoint(np.array([2 * rng.integers(-1, 2), 2 * rng.integers(-1, 2), rng.integers(-8, 9) / 4]))
        return SplitDFPoint(rng.integers(-16, 17, size=3) / 8, float(rng.normal()), P)

    unit = cocycle = central = 0.0
    for lam in (1.0, -2.0):
        for _ in range(10):
            f = rand(torus)
            a, b = torus_element(), torus_element()
            unit = max(unit, abs(generic_apply(lam, a, f).l2_norm() / f.l2_norm() - 1))
            two = generic_apply(lam, a, generic_apply(lam, b, f, projective=True), projective=True).values
            one = generic_apply(lam, split_mul(a, b), f, projective=True).values
            mask = np.abs(one) > 1e-3
            ratio = two[mask] / one[mask]
            cocycle = max(cocycle, float(np.max(np.abs(ratio - ratio[0]))), abs(abs(ratio[0]) - 1))
            S = float(rng.normal())
            cen = generic_apply(lam, SplitDFPoint(np.zeros(3), S, HPoint(np.zeros(3))), f).values
            central = max(central, float(np.max(np.abs(cen - np.exp(2j * np.pi * lam * S) * f.values))))

            g = HPoint(np.array([rng.integers(-8, 9) / 8, rng.integers(-16, 17) / 8, rng.normal()]))
            h1 = rand(line)
            unit = max(unit, abs(schrodinger_apply(lam, g, h1).l2_norm() / h1.l2_norm() - 1))
    C.add("unitarity", unit <= 1e-12, f"{unit:.1e}")
    C.add("cocycle unimodular", cocycle <= 1e-12, f"{cocycle:.1e}")
    C.add("central character", central <= 1e-12, f"{central:.1e}")

    fg = Grid.centered((32,) * 3, (0.25, 0.25, 1 / 32))
    sg = fg.dual()
    f = sample(Gaussian((1.5, 1.5, 8.0), (0.2, -0.1, 0.5), (0.3, 0.1, 0.02)), sg)
    F = fourier_transform(f)
    worst = 0.0
    for lam in (1.0, 2.0, -1.0):
        for _ in range(4):
            P = HPoint(np.array([rng.integers(-4, 5) * 0.25, rng.integers(-4, 5) * 0.25,
                                 rng.integers(-8, 8) / 32]))
            Q = rng.integers(-4, 5, size=3) * np.array(sg.spacing) / lam
            conj = inverse_fourier_transform(generic_apply(lam, SplitDFPoint(Q, 0.0, P), F, projective=True), sg)
            direct = intertwined_projective_apply(lam, Q, P, f)
            worst = max(worst, float(np.max(np.abs(conj.values - direct.values)) / np.max(np.abs(f.values))))
    C.add("intertwining on 32^3", worst <= 1e-10, f"{worst:.1e}")

    ratios = []
    G1 = Gaussian((1.0,), (0.1,))
    for lab in h_labels(1):
        ratios.append(infinitesimal_check(lab, "schrodinger", G1, 1e-3, line)
                      / infinitesimal_check(lab, "schrodinger", G1, 5e-4, line))
    g3 = Grid.cube(3, 16, 2.0)
    G3 = Gaussian((1.0, 1.2, 0.9), (0.1, 0.2, -0.1))
    for lab in df_labels(1):
        ratios.append(infinitesimal_check(lab, "generic", G3, 1e-3, g3)
                      / infinitesimal_check(lab, "generic", G3, 5e-4, g3))
    C.add("Richardson ratios", all(1.8 <= r <= 2.2 for r in ratios),
          f"{len(ratios)} directions, {min(ratios):.3f}..{max(ratios):.3f}")
    C.finish()


# ----------------------------------------------------------------------------
# 4. coverings
# ----------------------------------------------------------------------------

def test_criterion_4_coverings():
    C = Checks(4, "covering suite", 180)
    G = lattice_ball_array(16, 1)
    C.add("det T_gamma = 1", all(t_gamma(g.tolist()).det() == 1 for g in G), f"{len(G)} lattice points")
    u = intersection_count(uniform(1, radius=8), uniform(1, radius=8))
    C.add("uniform self-intersection = 27", u.n_ab == u.n_ba == 27, f"{u.n_ab}")

    radii = (8, 16, 32)
    inc = lambda v: all(x < y for x, y in zip(v, v[1:]))
    hu = [intersection_count(heisenberg(1, radius=R), uniform(1, radius=R)) for R in radii]
    ab, ba = [r.n_ab for r in hu], [r.n_ba for r in hu]
    C.add("heis/uniform increasing both ways", inc(ab) and inc(ba), f"N_ab {ab}, N_ba {ba}")
    hd = [intersection_count(heisenberg(1, radius=R), dyadic(1)) for R in radii]
    pb, bp = [r.n_ab for r in hd], [r.n_ba for r in hd]
    C.add("N(P,B) constant", len(set(pb)) == 1, f"{pb}")
    C.add("N(P,B) <= 3", max(pb) <= 3, f"{pb}")
    C.add("N(B,P) increasing", inc(bp), f"{bp}")

    grid = Grid((48, 48, 48), (0.125,) * 3, (-2.0, -2.0, -2.0))
    B = bapu_build(0.25, lattice_ball_array(8, 1), grid)
    dev = float(np.max(np.abs(B.windows.sum(axis=0)[B.interior] - 1)))
    C.add("BAPU partition on interior", dev <= 1e-10 and B.interior.sum() > 0,
          f"{dev:.1e} on {int(B.interior.sum())} points")
    m1 = moderateness_check(WeightSpec(1), heisenberg(1, radius=10)).value
    m2 = moderateness_check(WeightSpec(1), heisenberg(1, radius=20)).value
    C.add("moderateness sup stable", abs(m2 / m1 - 1) <= 0.01, f"{m1:.4f} -> {m2:.4f}")
    C.finish()


# ----------------------------------------------------------------------------
# 5. norms
# ----------------------------------------------------------------------------

FAMILY = [
    ((1.0, 1.0, 1.0), (0, 0, 0), (0, 0, 0)),
    ((1.2, 1.2, 1.2), (0, 0, 0), (0, 0, 0)),
    ((0.9, 1.1, 1.3), (0, 0, 0), (0, 0, 0)),
    ((1.0, 1.0, 1.0), (0.5, -0.5, 0), (0, 0, 0)),
    ((1.1, 0.9, 1.0), (0, 0.4, 0.6), (0, 0, 0)),
    ((1.0, 1.0, 1.0), (0, 0, 0), (0.3, 0, 0)),
    ((1.2, 1.0, 1.4), (0, 0, 0), (0, -0.3, 0.2)),
    ((1.3, 1.3, 1.0), (0.3, 0, -0.3), (0.2, 0.2, 0)),
    ((1.5, 1.2, 1.2), (-0.4, 0.2, 0), (0, 0, 0.3)),
    ((1.0, 1.4, 1.1), (0, 0, 0.5), (-0.2, 0.1, -0.2)),
]
FAMILY_PS = [(p, s) for p in (1, 2) for s in (0, 1)]
PSI = Gaussian((0.5, 0.5, 0.5))
PSI_ALT = Gaussian((0.6, 0.45, 0.55), (0.1, 0, 0))


def family_norms(N: int, window=PSI, decomposition=True):
    """(coorbit, decomposition) norms of the family on an N^3 grid of half-width 4, one row per function."""
    grid = Grid.cube(3, N, 4.0)
    specs = [NormSpec(p, p, s) for p, s in FAMILY_PS]
    bapu = None
    co, de = [], []
    for w, c, m in FAMILY:
        F = fourier_transform(sample(Gaussian(w, c, m), grid))
        co.append([r.value for r in coorbit_norms(F, window.fourier(), 1.0, specs, 6, 2)])
        if decomposition:
            bapu = bapu or heisenberg_bapu_for(F.grid, 6)
            de.append([decomposition_norm(F, bapu, NormSpec(p, p, s, "E_decomposition")).value
                       for p, s in FAMILY_PS])
    return np.array(co), (np.array(de) if decomposition else None)


def single_cell_spectrum(grid, gamma, lo=0.35, hi=1.65):
    """Smooth f-hat living inside one Heisenberg cell."""
    F = fourier_transform(SampledField(grid, np.zeros(grid.shape)))
    Xi = F.grid.points()
    g = np.asarray(gamma, dtype=float)
    Y = Xi - g
    Y[..., 2] += (Xi[..., 0] * -g[1] - Xi[..., 1] * -g[0]) / 2
    w = (hi - lo) / 4
    prof = np.prod(_smoothstep((Y - lo) / w) * _smoothstep((hi - Y) / w), axis=-1)
    return SampledField(F.grid, prof, FREQUENCY)


def test_criterion_5_norms():
    C = Checks(5, "norm suite", 600)
    g32 = Grid.cube(3, 32, 4.0)
    f = sample(Gaussian((1.0, 1.0, 1.0)), g32)
    e22 = coorbit_norm(f, PSI.fourier(), 1.0, NormSpec(2, 2, 0), radius=6).value
    rel = e22 / (f.l2_norm() * PSI.l2_norm()) - 1
    C.add("E^{2,2}_0 orthogonality", abs(rel) <= 0.02, f"{rel:+.1e}")
    psi_m = Gaussian((1.0, 1.0, 1.0))
    m22 = modulation_norm(f, psi_m.fourier(), NormSpec(2, 2, 0, "M_modulation"), stride=2).value
    rel = m22 / (f.l2_norm() * psi_m.l2_norm()) - 1
    C.add("M^{2,2} orthogonality", abs(rel) <= 0.02, f"{rel:+.1e}")
    for p in (1, 2):
        a = coorbit_norm(f, PSI.fourier(), 1.0, NormSpec(p, p, 0), radius=6).value
        b = coorbit_norm(f, PSI.fourier(), 2.0, NormSpec(p, p, 0), radius=6).value
        want = 2 ** (-3 / p)
        C.add(f"lambda scaling p={p}", abs(b / a / want - 1) <= 0.05, f"{b / a:.4f} vs {want:.4f}")

    co32, de32 = family_norms(32)
    co48, de48 = family_norms(48)
    alt32, _ = family_norms(32, PSI_ALT, decomposition=False)
    r32, r48 = co32 / de32, co48 / de48
    for j, (p, s) in enumerate(FAMILY_PS):
        c1, c2 = r32[:, j].min(), r32[:, j].max()
        d1, d2 = r48[:, j].min(), r48[:, j].max()
        C.add(f"window c2/c1 p={p} s={s}", c2 / c1 <= 20, f"[{c1:.3f}, {c2:.3f}] ratio {c2 / c1:.2f}")
        drift = max(abs(d1 / c1 - 1), abs(d2 / c2 - 1))
        C.add(f"32^3 -> 48^3 p={p} s={s}", drift <= 0.25, f"{drift:.1e}")
        wr = co32[:, j] / alt32[:, j]
        C.add(f"window independence p={p} s={s}", wr.max() / wr.min() <= 10, f"{wr.max() / wr.min():.3f}")

    worst = 0.0
    for gamma in ((0, 0, 0), (0, 0, -2)):
        F = single_cell_spectrum(g32, gamma)
        B = heisenberg_bapu_for(F.grid, 6)
        fs = inverse_fourier_transform(F)
        for p, q, s in ((1, 1, 1), (2, 2, 1), (2, 1, -1)):
            v = decomposition_norm(F, B, NormSpec(p, q, s, "E_decomposition")).value
            want = weight_eval(WeightSpec(s), np.array(gamma, float)) * fs.lp_norm(p)
            worst = max(worst, abs(v / want - 1))
    C.add("single-cell decomposition", worst <= 0.01, f"{worst:.1e}")
    C.finish()


# ----------------------------------------------------------------------------
# 6. embedding constants
# ----------------------------------------------------------------------------

def test_criterion_6_embeddings():
    C = Checks(6, "embedding constants", 60)
    for s1, s2, p, q1, q2 in ((1, 1, 2, 2, 2), (1, 0, 2, 1, 2), (2, -1, 1, 2, 4), (0, -3, 2, 1, math.inf)):
        K = embedding_constant_K(s1, s2, p, p, q1, q2)
        C.add(f"K = 1 for s1={s1} s2={s2} q1={q1} q2={q2}", K.value == 1 and not K.divergent, f"{K.value}")
    for s1, s2 in ((0, 1), (1, 2.5)):
        K = embedding_constant_K(s1, s2, 2, 2, 2, 2)
        C.add(f"K divergent s1={s1} s2={s2}", K.divergent, f"{K.values[0]:.3g} -> {K.values[1]:.3g}")
    for p in (1, 2):
        for s in (0, -1):
            r = embedding_constant_Kr(p, p, s)
            C.add(f"K_r finite p=q={p} s={s}", not r.divergent and math.isfinite(r.value),
                  f"{r.values[0]:.4g} -> {r.values[1]:.4g}")
        r = embedding_constant_Kr(p, p, 1)
        C.add(f"K_r divergent p=q={p} s=1", r.divergent, f"{r.values[0]:.4g} -> {r.values[1]:.4g}")

    # ||f||_{E(p, q2, s2)} <= K ||f||_{E(p, q1, s1)} with K from embedding_constant_K
    grid = Grid.cube(3, 32, 4.0)
    pairs = (((2, 1, 1), (2, 2, 0)), ((1, 1, 1), (1, 3, 1)), ((2, 2, 1), (2, math.inf, -1)),
             ((1, 2, 0), (1, 2, -2)))
    Ks = [embedding_constant_K(s1, s2, p1, p2, q1, q2).value for (p1, q1, s1), (p2, q2, s2) in pairs]
    bapu = None
    ok, worst = True, 0.0
    for w, c, m in FAMILY:
        F = fourier_transform(sample(Gaussian(w, c, m), grid))
        bapu = bapu or heisenberg_bapu_for(F.grid, 6)
        for K, ((p1, q1, s1), (p2, q2, s2)) in zip(Ks, pairs):
            lhs = decomposition_norm(F, bapu, NormSpec(p2, q2, s2, "E_decomposition")).value
            rhs = decomposition_norm(F, bapu, NormSpec(p1, q1, s1, "E_decomposition")).value
            ok &= lhs <= K * rhs * (1 + 1e-12)
            worst = max(worst, lhs / (K * rhs))
    C.add("embedding inequality over family", ok, f"max lhs/(K rhs) = {worst:.3f}")
    C.finish()


# ----------------------------------------------------------------------------
# 7. voice transform oracle
# ----------------------------------------------------------------------------

def test_criterion_7_voice_oracle():
    C = Checks(7, "voice-transform oracle", 60)
    rng = np.random.default_rng(7)
    g = Grid.cube(3, 8, 2.0)
    f = SampledField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    psi = Gaussian((0.7, 0.9, 1.2), (0.1, 0, 0), (0.0, 0.3, 0)).fourier()
    worst = 0.0
    for i in range(20):
        lam = (1.0, -1.5, 2.0, 0.5)[i % 4]
        P = rng.normal(size=3)
        V = voice_transform(f, psi, lam, [P])
        k = tuple(rng.integers(0, 8, size=3))
        direct = voice_transform_direct(f, psi, lam, V.q_points()[k], P)
        worst = max(worst, abs(V.values[0][k] - direct) / abs(direct))
    C.add("FFT vs direct quadrature, 20 points", worst <= 1e-8, f"max rel {worst:.1e}")
    C.finish()
