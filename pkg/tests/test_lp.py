import numpy as np
import pytest

from drmdp.lp import (
    EQ,
    GE,
    INFEASIBLE,
    LE,
    OPTIMAL,
    UNBOUNDED,
    LpError,
    dump_lp,
    get_solver,
    make_lp,
    residuals,
    solve_lp,
    solve_lp_highs,
)


def test_simplex_face():
    lp = make_lp("max", [1, 1], [([1, 1], LE, 1)])
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.value == pytest.approx(1.0, abs=1e-9)


def test_infeasible_with_certificate():
    lp = make_lp("min", [0.0], [([1.0], LE, -1.0), ([1.0], GE, 0.0)])
    sol = solve_lp(lp)
    assert sol.status == INFEASIBLE
    assert sol.certificate is not None


def test_polygon_vertex_optimum():
    # max 2x1+3x2 s.t. x1<=2, x2<=1, x1+x2<=2.5, x>=0.
    # Vertex enumeration: (0,0)->0, (2,0)->4, (2,.5)->5.5, (1.5,1)->6, (0,1)->3.
    lp = make_lp(
        "max",
        [2, 3],
        [([1, 0], LE, 2), ([0, 1], LE, 1), ([1, 1], LE, 2.5)],
    )
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.value == pytest.approx(6.0, abs=1e-9)
    assert sol.x == pytest.approx([1.5, 1.0], abs=1e-9)


def test_unbounded():
    lp = make_lp("max", [1.0], [([-1.0], LE, 0.0)])
    assert solve_lp(lp).status == UNBOUNDED


def test_equality_and_free_vars():
    # min x + y s.t. x + y = 3, x - y >= 1, y free below
    lp = make_lp(
        "min",
        [1, 1],
        [([1, 1], EQ, 3), ([1, -1], GE, 1)],
        bounds=[(-np.inf, np.inf), (-np.inf, np.inf)],
    )
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.value == pytest.approx(3.0, abs=1e-9)


def test_bounded_variables():
    lp = make_lp("max", [1, 2], [], bounds=[(-1, 2), (0, 5)])
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.value == pytest.approx(12.0, abs=1e-9)
    assert sol.x == pytest.approx([2.0, 5.0])


def test_certificate_residuals():
    lp = make_lp(
        "max",
        [2, 3],
        [([1, 0], LE, 2), ([0, 1], LE, 1), ([1, 1], LE, 2.5)],
    )
    sol = solve_lp(lp)
    res = residuals(lp, sol)
    for name, v in res.items():
        assert v <= 1e-8, (name, v)


def test_idempotent_resolve():
    rng = np.random.default_rng(0)
    c = rng.normal(size=5)
    a = rng.normal(size=(4, 5))
    lp = make_lp("max", c, [(a[i], LE, 1.0) for i in range(4)], bounds=[(0, 1)] * 5)
    s1, s2 = solve_lp(lp), solve_lp(lp)
    assert s1.value == s2.value
    assert s1.status == s2.status
    assert np.array_equal(s1.x, s2.x)


def test_dimension_mismatch_raises():
    with pytest.raises(LpError):
        make_lp("min", [1, 2], [([1.0], LE, 0.0)])


def _random_bounded_lp(rng, n_vars, n_rows):
    c = rng.normal(size=n_vars)
    a = rng.normal(size=(n_rows, n_vars))
    b = rng.uniform(0.5, 2.0, size=n_rows)
    rows = [(a[i], LE, b[i]) for i in range(n_rows)]
    return make_lp("max", c, rows, bounds=[(0.0, rng.uniform(0.5, 3.0))] * n_vars)


def _vertex_value(lp):
    # brute-force: enumerate all basic points of the box+rows system
    from itertools import combinations

    n = lp.n_vars
    rows = [(lp.a[i], lp.b[i]) for i in range(lp.n_rows)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((-e, -lp.lb[j]))
        rows.append((e, lp.ub[j]))
    best = -np.inf
    for idx in combinations(range(len(rows)), n):
        amat = np.array([rows[i][0] for i in idx])
        bvec = np.array([rows[i][1] for i in idx])
        if abs(np.linalg.det(amat)) < 1e-10:
            continue
        x = np.linalg.solve(amat, bvec)
        if all(r[0] @ x <= r[1] + 1e-9 for r in rows):
            best = max(best, lp.c @ x)
    return best


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(30):
        lp = _random_bounded_lp(rng, rng.integers(2, 5), rng.integers(1, 4))
        sol = solve_lp(lp)
        assert sol.optimal
        assert sol.value == pytest.approx(_vertex_value(lp), abs=1e-7)
        res = residuals(lp, sol)
        assert max(res.values()) <= 1e-8


def test_highs_backend_agrees_with_simplex():
    rng = np.random.default_rng(7)
    for _ in range(20):
        lp = _random_bounded_lp(rng, 4, 3)
        s1 = solve_lp(lp)
        s2 = solve_lp_highs(lp)
        assert s1.status == s2.status == OPTIMAL
        assert s1.value == pytest.approx(s2.value, abs=1e-7)
        assert np.allclose(s1.y, s2.y, atol=1e-6) or max(residuals(lp, s2).values()) <= 1e-7


def test_highs_duals_satisfy_residuals():
    rng = np.random.default_rng(11)
    for _ in range(10):
        lp = _random_bounded_lp(rng, 4, 3)
        sol = solve_lp_highs(lp)
        assert max(residuals(lp, sol).values()) <= 1e-7


def test_get_solver_seam():
    assert get_solver("simplex") is solve_lp
    with pytest.raises(LpError):
        get_solver("nope")


def test_dump_lp_roundtrippable_text():
    lp = make_lp("max", [1, -2], [([1, 1], LE, 3), ([1, -1], EQ, 0)])
    text = dump_lp(lp)
    assert "Maximize" in text and "c0:" in text and "End" in text
