import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from hensym.core import COLD, HOT, HensInstance, Stream, Utility
from hensym.simplex import (EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LinearProgram, Row, min_utility,
                            point_satisfies, solve_lp)


def lp(n, cost, rows, lower=None, upper=None):
    return LinearProgram(tuple(f"x{k}" for k in range(n)), cost, tuple(rows), lower, upper)


def test_single_bound():
    res = solve_lp(lp(1, [1], [Row({0: 1}, GE, 3)]))
    assert res.status == OPTIMAL and res.x == (3,) and res.objective == 3


def test_facet():
    res = solve_lp(lp(2, [-1, -1], [Row({0: 1, 1: 1}, LE, 1)]))
    assert res.objective == -1 and sum(res.x) == 1


def test_infeasible():
    res = solve_lp(lp(1, [0], [Row({0: 1}, GE, 1), Row({0: 1}, LE, 0)]))
    assert res.status == INFEASIBLE


def test_unbounded():
    assert solve_lp(lp(1, [-1], [Row({0: 1}, GE, 1)])).status == UNBOUNDED


def test_free_and_upper_only_variables():
    prog = lp(2, [1, -1], [Row({0: 1, 1: 1}, GE, -4)], lower=(None, None), upper=(None, 2))
    res = solve_lp(prog)
    assert res.x == (-6, 2) and res.objective == -8


def test_equalities_and_redundancy():
    rows = [Row({0: 1, 1: 1}, EQ, 4), Row({0: 2, 1: 2}, EQ, 8), Row({0: 1}, LE, 3)]
    res = solve_lp(lp(2, [0, 1], rows))
    assert res.x == (3, 1)


def test_dump_round_trip():
    prog = lp(3, [1, F(-2, 3), 0], [Row({0: 1, 2: F(5, 7)}, GE, 2, "a"), Row({1: 1}, LE, 9)],
              lower=(0, None, 1), upper=(None, 4, F(7, 2)))
    again = LinearProgram.load(prog.dump())
    assert again == prog
    assert solve_lp(again).objective == solve_lp(prog).objective


def brute_force(prog):
    """Best vertex: every choice of n tight constraints among rows and bounds."""
    n = prog.n
    planes = [(dict(r.coeffs), r.rhs) for r in prog.rows]
    for k in range(n):
        if prog.lower[k] is not None:
            planes.append(({k: 1}, prog.lower[k]))
        if prog.upper[k] is not None:
            planes.append(({k: 1}, prog.upper[k]))
    best = None
    for combo in itertools.combinations(planes, n):
        a = [[F(c.get(k, 0)) for k in range(n)] + [F(b)] for c, b in combo]
        x = _solve(a, n)
        if x is None or prog.max_violation(x) != 0:
            continue
        v = sum(c * xv for c, xv in zip(prog.objective, x))
        best = v if best is None else min(best, v)
    return best


def _solve(a, n):
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col] / a[col][col]
                a[r] = [u - f * v for u, v in zip(a[r], a[col])]
    return [a[k][n] / a[k][k] for k in range(n)]


coef = st.fractions(min_value=-5, max_value=5, max_denominator=4)


@st.composite
def bounded_lps(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(0, 6))
    rows = []
    for _ in range(m):
        coeffs = {k: draw(coef) for k in range(n)}
        rows.append(Row(coeffs, draw(st.sampled_from([LE, GE, EQ])), draw(coef) * 2))
    upper = tuple(draw(st.fractions(min_value=1, max_value=6, max_denominator=3)) for _ in range(n))
    cost = tuple(draw(coef) for _ in range(n))
    return lp(n, cost, rows, upper=upper)


@settings(max_examples=150, deadline=None)
@given(bounded_lps())
def test_matches_vertex_enumeration(prog):
    res = solve_lp(prog)
    best = brute_force(prog)
    if best is None:
        assert res.status == INFEASIBLE
    else:
        assert res.status == OPTIMAL
        assert res.objective == best
        assert point_satisfies(prog, res.x)


def _instance(streams, dt_min=10):
    return HensInstance("t", streams, [Utility("HU", HOT, 500), Utility("CU", COLD, 0)], dt_min)


def _cascade_min(inst, qs):
    """Smallest cascade residual when the hot utility supplies ``qs`` at the top."""
    kinds = {s.id: s.kind for s in inst.streams}
    r = low = qs
    for loads in inst.table().loads:
        r += sum(v if kinds[k] == HOT else -v for k, v in loads.items())
        low = min(low, r)
    return low


class TestMinUtility:
    def test_balanced(self):
        d = min_utility(_instance([Stream("H1", HOT, 1, 200, 100), Stream("C1", COLD, 1, 90, 190)]))
        assert d.hot["HU"] == 0 and d.cold["CU"] == 0 and all(r == 0 for r in d.residuals)

    def test_forced_hot_utility(self):
        d = min_utility(_instance([Stream("H1", HOT, 1, 200, 100), Stream("C1", COLD, F(3, 2), 90, 190)]))
        assert d.hot["HU"] == 50 and d.cold["CU"] == 0

    def test_pinch(self):
        # upper interval: 20 supplied vs 100 demanded; lower: 80 vs 50
        inst = _instance([Stream("H1", HOT, F(2, 5), 200, 150), Stream("H2", HOT, F(8, 5), 150, 100),
                          Stream("C1", COLD, 2, 140, 190), Stream("C2", COLD, 1, 90, 140)])
        d = min_utility(inst)
        assert d.hot["HU"] == 80 and d.cold["CU"] == 30
        assert d.residuals == (0, 0, 0)

    @pytest.mark.parametrize("fcps", [(2, 3), (3, 2), (1, 1), (F(5, 2), F(7, 3))])
    def test_weak_duality(self, fcps):
        inst = _instance([Stream("H1", HOT, fcps[0], 200, 120), Stream("C1", COLD, fcps[1], 100, 180)])
        d = min_utility(inst)
        assert _cascade_min(inst, d.hot["HU"]) == 0
        if d.hot["HU"] > 0:
            assert _cascade_min(inst, d.hot["HU"] - F(1, 100)) < 0
