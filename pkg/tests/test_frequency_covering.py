import itertools
from fractions import Fraction as Fr

import numpy as np
import pytest
from scipy.optimize import linprog

from hmod.frequency_covering import (
    GridTooCoarse, WeightSpec, admissibility_constant, bapu_build, box_array, covering_svg, dyadic,
    dyadic_windows, exact_det, heis_uniform_members, heisenberg, heisenberg_neighbors, intersection_count,
    lattice_ball, lattice_ball_array, lattice_mul, max_neighbor_norm, moderateness_check, norm4_int,
    structured_transition_sup, t_gamma, t_matrix, uniform, uniform_bapu_build, weight_eval,
    weight_nonequivalence_witness, weight_point_bounds,
)
from hmod.nilpotent_core import HPoint, h_mul, koranyi_norm
from hmod.representations import Grid

EPS = 0.25


def cells_meet_lp(A, a, B, b, eps=EPS):
    """Oracle: do the open parallelepipeds A(-eps,2+eps)^d + a and B(...)+b intersect?

    Maximise a common slack s over pairs (x, y) of box points with A x + a = B y + b.
    """
    d = len(a)
    # variables: x (d), y (d), s
    c = np.zeros(2 * d + 1)
    c[-1] = -1
    A_eq = np.hstack([A, -B, np.zeros((d, 1))])
    b_eq = np.asarray(b, float) - np.asarray(a, float)
    rows, rhs = [], []
    for i in range(2 * d):
        e = np.zeros(2 * d + 1)
        e[i], e[-1] = -1, 1
        rows.append(e.copy()); rhs.append(eps)           # -x + s <= eps
        e[i] = 1
        rows.append(e); rhs.append(2 + eps)               # x + s <= 2 + eps
    res = linprog(c, A_ub=rows, b_ub=rhs, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (2 * d) + [(None, 1)])
    return res.status == 0 and -res.fun > 1e-9


def tm(g):
    return t_matrix(np.asarray(g, dtype=float)).astype(float)


def test_lattice_ball_examples():
    assert lattice_ball_array(0, 1).tolist() == [[0, 0, 0]]
    ball = lattice_ball(2, 1)
    assert len(ball) == 5
    assert HPoint([0, 0, 2]) not in ball
    assert koranyi_norm(HPoint([0, 0, 2])) == pytest.approx(2 * np.sqrt(2))
    small, big = lattice_ball_array(4, 1), lattice_ball_array(6, 1)
    assert set(map(tuple, small.tolist())) <= set(map(tuple, big.tolist()))
    keys = [(c, b, a) for a, b, c in big.tolist()]
    assert keys == sorted(keys)


def test_lattice_ball_brute_force():
    R = 7
    rng = range(-8, 9, 2)
    brute = {g for g in itertools.product(rng, rng, range(-14, 15, 2))
             if koranyi_norm(HPoint(list(g))) <= R}
    assert brute == set(map(tuple, lattice_ball_array(R, 1).tolist()))


def test_lattice_closed_under_product(rng):
    G = lattice_ball_array(10, 2)
    for _ in range(200):
        a, b = G[rng.integers(len(G))], G[rng.integers(len(G))]
        ab = lattice_mul(a, b)
        assert np.all(ab % 2 == 0)
        assert ab.tolist() == [int(x) for x in h_mul(HPoint(a.tolist()), HPoint(b.tolist())).coords]


def test_t_gamma_examples(rng):
    e = t_gamma([0, 0, 0])
    assert np.all(e.matrix == np.eye(3)) and np.all(e.offset == 0)
    m = t_gamma([2, 0, 0]).matrix
    assert list(m[-1]) == [0, -1, 1]
    G = lattice_ball_array(12, 1)
    for _ in range(1000):
        a, b = G[rng.integers(len(G))], G[rng.integers(len(G))]
        Ta, Tb = t_gamma(a.tolist()), t_gamma(b.tolist())
        assert Ta.det() == 1
        # T_a T_b = T_{a+b} as linear parts
        assert np.all(Ta.matrix.dot(Tb.matrix) == t_matrix((a + b).tolist()))
        assert np.all(Ta.matrix.dot(t_matrix((-a).tolist())) == np.eye(3))
    assert exact_det(t_matrix([Fr(1, 3), 4, 5, Fr(7, 2), 0])) == 1


def test_t_gamma_is_right_multiplication(rng):
    for _ in range(50):
        X = HPoint([Fr(int(v), 3) for v in rng.integers(-9, 10, size=3)])
        g = [int(v) for v in 2 * rng.integers(-3, 4, size=3)]
        assert list(t_gamma(g).apply(X.coords)) == list(h_mul(X, HPoint(g)).coords)


def test_neighbors_against_lp_oracle():
    D = heisenberg_neighbors(1)
    assert len(D) == 31
    assert max_neighbor_norm(1) <= 9
    I = np.eye(3)
    found = {tuple(g) for g in lattice_ball_array(10, 1).tolist()
             if cells_meet_lp(I, np.zeros(3), tm(g), np.array(g, float))}
    assert found == set(map(tuple, D.tolist()))


def test_admissibility():
    assert admissibility_constant(uniform(1, radius=8)).value == 27
    u2 = admissibility_constant(uniform(2, radius=6))
    assert u2.value == 3 ** 5
    a = admissibility_constant(heisenberg(1, radius=12))
    assert a.value == 31 and not a.changed_in_last_shell
    assert admissibility_constant(heisenberg(1, radius=16)).value == 31
    assert admissibility_constant(dyadic(1, k_max=8)).value == 7


def test_uniform_self_intersection():
    r = intersection_count(uniform(1, radius=8), uniform(1, radius=8))
    assert r.n_ab == r.n_ba == 27


def test_heis_uniform_members_against_lp():
    I = np.eye(3)
    for g in ([0, 0, 0], [2, -4, 6], [0, 6, 0], [4, 2, -10]):
        mem = {tuple(k) for k in heis_uniform_members(np.array(g), Fr(1, 4), 40).tolist()}
        cand = set()
        for k in itertools.product(range(-12, 13, 2), range(-12, 13, 2), range(-40, 41, 2)):
            k = np.array(k)
            if np.max(np.abs(k[:2] - g[:2])) > 6:
                continue
            if cells_meet_lp(tm(g), np.array(g, float), I, k.astype(float)):
                cand.add(tuple(k.tolist()))
        assert mem == cand


@pytest.mark.parametrize("b1", [2, 6, 10, 16])
def test_heis_uniform_grows_along_q(b1):
    mem = heis_uniform_members(np.array([0, b1, 0]), Fr(1, 4), 100)
    assert len(mem) >= b1


def test_growth_dichotomy_small():
    ab = [intersection_count(heisenberg(1, radius=R), uniform(1, radius=R)) for R in (8, 16)]
    assert ab[0].n_ab < ab[1].n_ab and ab[0].n_ba < ab[1].n_ba
    dy = [intersection_count(heisenberg(1, radius=R), dyadic(1)) for R in (8, 16)]
    assert dy[0].n_ab == dy[1].n_ab
    assert dy[0].n_ba < dy[1].n_ba


def test_weight_examples(rng):
    assert weight_eval(WeightSpec(0), np.array([3.0, 4, 5])) == 1
    assert weight_eval(WeightSpec(1), HPoint([0, 0, 1])) == pytest.approx(17 ** 0.25)
    assert weight_eval(WeightSpec(2, "euclidean"), np.array([1.0, 0, 0])) == pytest.approx(2)
    assert weight_eval(WeightSpec(1, "dyadic"), 3) == 8
    with pytest.raises(ValueError):
        WeightSpec(1, "bogus")


def test_weight_submultiplicative(rng):
    a = rng.normal(size=(10_000, 3)) * rng.choice([0.3, 1, 3], size=(10_000, 1))
    b = rng.normal(size=(10_000, 3)) * rng.choice([0.3, 1, 3], size=(10_000, 1))
    ab = a + b
    ab[:, 2] += (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) / 2
    # sup of (1 + (x+y)^4) / ((1 + x^4)(1 + y^4)) is 64/15, attained at x = y, x^4 = 7/8
    for s in (1, 2, 3.5):
        C = (64 / 15) ** (s / 4)
        w, wn = WeightSpec(s), WeightSpec(-s)
        assert np.all(weight_eval(w, ab) <= C * weight_eval(w, a) * weight_eval(w, b) * (1 + 1e-12))
        assert np.all(weight_eval(wn, ab) <= C * weight_eval(wn, a) * weight_eval(w, b) * (1 + 1e-12))
    # the constant cannot be dropped for this normalisation
    e = np.array([1.0, 0, 0])
    assert weight_eval(WeightSpec(2), 2 * e) == pytest.approx(17 ** 0.5)
    assert weight_eval(WeightSpec(2), 2 * e) > weight_eval(WeightSpec(2), e) ** 2
    # (1 + |X|_H)^s is exactly submultiplicative
    nrm = lambda x: ((x[:, 0] ** 2 + x[:, 1] ** 2) ** 2 + 16 * x[:, 2] ** 2) ** 0.25
    assert np.all((1 + nrm(ab)) ** 2 <= (1 + nrm(a)) ** 2 * (1 + nrm(b)) ** 2 * (1 + 1e-12))


def test_moderateness():
    assert moderateness_check(WeightSpec(0), heisenberg(1, radius=10)).value == 1
    a = moderateness_check(WeightSpec(1), heisenberg(1, radius=10))
    b = moderateness_check(WeightSpec(1), heisenberg(1, radius=20))
    assert b.value == pytest.approx(a.value, rel=0.01)
    assert a.value == pytest.approx(4.2328, abs=1e-4)
    lo, hi = weight_point_bounds(1, heisenberg(1, radius=12))
    assert 0 < lo <= 1 <= hi < 10


def test_transition_sup():
    assert structured_transition_sup(heisenberg(1)) == pytest.approx(1.9319, abs=1e-4)


def test_weight_witness_grows():
    w = weight_nonequivalence_witness(1, 0, [4, 8, 16])
    assert w[0] < w[1] < w[2]
    w = weight_nonequivalence_witness(0, 1, [4, 8, 16])
    assert w[0] < w[1] < w[2]


def bapu_grid():
    return Grid((48, 48, 48), (0.125,) * 3, (-2.0, -2.0, -2.0))


def test_bapu_partition_and_supports():
    grid = bapu_grid()
    G = lattice_ball_array(8, 1)
    B = bapu_build(EPS, G, grid)
    assert B.interior.sum() > 1000
    assert np.max(np.abs(B.windows.sum(axis=0)[B.interior] - 1)) < 1e-10
    X = grid.points()
    for g, w in zip(B.indices[:40], B.windows[:40]):
        supp = X[w > 0]
        Y = supp.copy()
        Y -= g
        Y[:, 2] += (supp[:, 0] * -g[1] - supp[:, 1] * -g[0]) / 2
        assert np.all((Y > -EPS) & (Y < 2 + EPS))


def test_bapu_single_and_deep_interior():
    grid = bapu_grid()
    B = bapu_build(EPS, [[0, 0, 0]], grid)
    w = B.windows[0]
    assert np.all(w[B.partition_sum > 0] == 1)
    full = bapu_build(EPS, lattice_ball_array(8, 1), grid)
    X = grid.points()
    deep = np.all((X > 0.3) & (X < 1.7), axis=-1)
    i0 = [tuple(g) for g in full.indices.tolist()].index((0, 0, 0))
    assert np.all(full.windows[i0][deep] == 1)
    others = np.delete(full.windows, i0, axis=0)
    assert np.all(others[:, deep] == 0)


def test_bapu_rejects_coarse_grid():
    with pytest.raises(GridTooCoarse):
        bapu_build(EPS, [[0, 0, 0]], Grid.cube(3, 16, 4.0))


def test_uniform_bapu_and_dyadic_windows():
    grid = bapu_grid()
    U = uniform_bapu_build(EPS, 6, grid)
    assert np.max(np.abs(U.windows.sum(axis=0)[U.interior] - 1)) < 1e-12
    g = Grid.cube(3, 32, 8.0)
    W = dyadic_windows(g, range(0, 6))
    r = np.linalg.norm(g.points(), axis=-1)
    inside = r < 30
    assert np.max(np.abs(W.sum(axis=0)[inside] - 1)) < 1e-12
    # phi_k supported in 2^{k-2} < r < 2^{k+2}
    for k, w in enumerate(W):
        if k:
            assert np.all((r[w != 0] > 2.0 ** (k - 2)) & (r[w != 0] < 2.0 ** (k + 2)))


def test_svg():
    svg = covering_svg(heisenberg(1, radius=4))
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "polygon" in svg or "path" in svg
