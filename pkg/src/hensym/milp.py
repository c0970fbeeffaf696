"""Transshipment MILP builders, branch-and-bound, optimum enumeration."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .core import (Cascade, HensError, IntervalProblem, MatchSolution, StructuralError,
                   ValidationError, rational)
from .simplex import (EQ, GE, LE, OPTIMAL, LinearProgram, Row, point_satisfies, resolve_bounds,
                      solve_lp, to_fraction)

FIXED = "fixed-interval"
FULL = "full"
PAIR = "pair"
PER_INTERVAL = "interval"

INFEASIBLE = "infeasible"
LIMIT = "limit"


class ResourceLimit(HensError):
    pass


@dataclass(frozen=True)
class MilpModel:
    """A built transshipment MILP plus the index maps needed to read it back.

    ``y_keys`` fixes the order of the binaries; every key is ``(hot, cold, t)``
    with ``t = 0`` for matches counted once over all intervals.
    """
    lp: LinearProgram
    scope: str
    problem: Union[IntervalProblem, Cascade]
    hot_ids: tuple
    cold_ids: tuple
    y_keys: tuple
    y_index: Mapping
    q_keys: tuple
    q_index: Mapping
    residual_keys: tuple
    residual_index: Mapping
    bigm: Mapping
    prohibited: tuple
    costed_keys: tuple
    match_index: str = PAIR

    @property
    def binary_vars(self) -> tuple:
        return tuple(self.y_index[k] for k in self.y_keys)

    @property
    def n_binaries(self) -> int:
        return len(self.y_keys)

    def solution_from_vector(self, x) -> MatchSolution:
        y = {k: int(x[self.y_index[k]]) for k in self.y_keys}
        q = {k: x[self.q_index[k]] for k in self.q_keys}
        r = {k: x[self.residual_index[k]] for k in self.residual_keys}
        return MatchSolution(y, q, r, sum(y[k] for k in self.costed_keys))

    def vector_from_solution(self, s: MatchSolution) -> tuple:
        """Inverse of ``solution_from_vector``; derived columns are recomputed."""
        x = [Fraction(0)] * self.lp.n
        for k in self.y_keys:
            x[self.y_index[k]] = Fraction(s.y[k])
        for k in self.q_keys:
            x[self.q_index[k]] = rational(s.q.get(k, 0))
        for k in self.residual_keys:
            x[self.residual_index[k]] = rational(s.residuals.get(k, 0))
        for row in self.lp.rows:
            if row.name.startswith("define"):
                # define rows: derived - sum(parts) = 0 with derived coefficient +1
                derived = next(k for k, c in row.coeffs.items() if c == 1)
                x[derived] = -sum((c * x[k] for k, c in row.coeffs.items() if k != derived), Fraction(0))
        return tuple(x)

    def pattern_bits(self, s: MatchSolution) -> int:
        return sum(1 << b for b, k in enumerate(self.y_keys) if s.y[k])


class _Builder:
    def __init__(self):
        self.names, self.cost, self.lower, self.upper, self.rows = [], [], [], [], []

    def var(self, name, cost=0, lo=0, hi=None):
        self.names.append(name)
        self.cost.append(Fraction(cost))
        self.lower.append(Fraction(lo))
        self.upper.append(None if hi is None else Fraction(hi))
        return len(self.names) - 1

    def row(self, coeffs, rel, rhs, name):
        self.rows.append(Row(coeffs, rel, rhs, name))

    def lp(self):
        return LinearProgram(tuple(self.names), tuple(self.cost), tuple(self.rows),
                             tuple(self.lower), tuple(self.upper))


def build_fixed_interval_model(p: IntervalProblem, count_utility_matches: bool = True) -> MilpModel:
    """Minimum-matches MILP for one fixed interval.

    Hot rows balance load plus entering residual against shipped heat plus the
    exiting residual; cold rows must be met exactly. Streams with nothing to
    give or take here are left out. Utility pairs enter the objective unless
    ``count_utility_matches`` is off, in which case they carry no binary.
    """
    if not isinstance(p, IntervalProblem):
        raise StructuralError("expected an IntervalProblem")
    t = p.interval.index
    hot = tuple(i for i in p.hot_ids if p.available(i) > 0)
    cold = tuple(j for j in p.cold_ids if p.cold_loads[j] > 0)
    b = _Builder()
    y_index, q_index, r_index, bigm = {}, {}, {}, {}
    prohibited, costed = [], []
    for i in hot:
        for j in cold:
            key = (i, j, t)
            q_index[key] = b.var(f"q[{i},{j},{t}]")
            if p.is_hot_utility(i) and p.is_cold_utility(j):
                prohibited.append(key)
                continue
            utility_pair = p.is_hot_utility(i) or p.is_cold_utility(j)
            if utility_pair and not count_utility_matches:
                continue
            y_index[key] = b.var(f"y[{i},{j},{t}]", cost=1, hi=1)
            bigm[key] = min(p.available(i), p.cold_loads[j])
            costed.append(key)
    for i in hot:
        r_index[(i, t)] = b.var(f"R[{i},{t}]")
    agg = b.var(f"R[{t}]")

    for i in hot:
        coeffs = {q_index[(i, j, t)]: 1 for j in cold}
        coeffs[r_index[(i, t)]] = 1
        b.row(coeffs, EQ, p.available(i), f"hot[{i}]")
    for j in cold:
        b.row({q_index[(i, j, t)]: 1 for i in hot}, EQ, p.cold_loads[j], f"cold[{j}]")
    coeffs = {agg: 1}
    coeffs.update({r_index[(i, t)]: -1 for i in hot})
    b.row(coeffs, EQ, 0, f"define_R[{t}]")
    for key in prohibited:
        b.row({q_index[key]: 1}, EQ, 0, f"prohibit[{key[0]},{key[1]}]")
    for key in y_index:
        b.row({q_index[key]: 1, y_index[key]: -bigm[key]}, LE, 0, f"bigM[{key[0]},{key[1]}]")

    y_keys = tuple(y_index)
    return MilpModel(b.lp(), FIXED, p, hot, cold, y_keys, y_index, tuple(q_index), q_index,
                     tuple(r_index), r_index, bigm, tuple(prohibited), tuple(costed))


def build_full_model(cascade: Cascade, match_index: str = PAIR,
                     count_utility_matches: bool = True) -> MilpModel:
    """Minimum-matches MILP over all intervals.

    Heat from hot stream i in interval s reaches cold stream j in interval
    t >= s through i's residuals. With ``match_index='pair'`` one binary per
    (i, j) bounds the total exchange Q_ij; with ``'interval'`` each interval
    gets its own binary on q_ijt.
    """
    if not isinstance(cascade, Cascade):
        raise ValidationError("utility duties must be fixed before building the full model (pass a Cascade)")
    if match_index not in (PAIR, PER_INTERVAL):
        raise ValueError(f"match_index must be {PAIR!r} or {PER_INTERVAL!r}")
    T = len(cascade.problems)
    hot_all, cold_all = cascade.hot_ids, cascade.cold_ids
    hu, cu = cascade.hot_utilities, cascade.cold_utilities
    cum = {i: [Fraction(0)] * (T + 1) for i in hot_all}
    for i in hot_all:
        for t in range(1, T + 1):
            cum[i][t] = cum[i][t - 1] + cascade.hot_load(i, t)
    hot = tuple(i for i in hot_all if cum[i][T] > 0)
    cold = tuple(j for j in cold_all if any(cascade.cold_load(j, t) > 0 for t in range(1, T + 1)))

    b = _Builder()
    q_index, r_index, y_index, bigm = {}, {}, {}, {}
    prohibited, costed = [], []
    for t in range(1, T + 1):
        for i in hot:
            if cum[i][t] == 0:
                continue
            for j in cold:
                if cascade.cold_load(j, t) > 0:
                    q_index[(i, j, t)] = b.var(f"q[{i},{j},{t}]")
    for i in hot:
        for t in range(1, T):
            if cum[i][t] > 0:
                r_index[(i, t)] = b.var(f"R[{i},{t}]")
    agg = {t: b.var(f"R[{t}]") for t in range(1, T)}

    def counted(i, j):
        if i in hu and j in cu:
            return False
        return count_utility_matches or not (i in hu or j in cu)

    pair_keys = []
    for i in hot:
        for j in cold:
            ts = [t for t in range(1, T + 1) if (i, j, t) in q_index]
            if not ts:
                continue
            if i in hu and j in cu:
                prohibited.extend((i, j, t) for t in ts)
                continue
            if not counted(i, j):
                continue
            reach = sum((cascade.cold_load(j, t) for t in ts), Fraction(0))
            if match_index == PAIR:
                key = (i, j, 0)
                y_index[key] = b.var(f"y[{i},{j}]", cost=1, hi=1)
                bigm[key] = min(cum[i][T], reach)
                costed.append(key)
                pair_keys.append((key, ts))
            else:
                for t in ts:
                    key = (i, j, t)
                    y_index[key] = b.var(f"y[{i},{j},{t}]", cost=1, hi=1)
                    bigm[key] = min(cum[i][t], cascade.cold_load(j, t))
                    costed.append(key)
    link = {}
    for key, ts in pair_keys:
        i, j, _ = key
        link[key] = b.var(f"Q[{i},{j}]")

    for i in hot:
        for t in range(1, T + 1):
            coeffs = {}
            if (i, t) in r_index:
                coeffs[r_index[(i, t)]] = 1
            if (i, t - 1) in r_index:
                coeffs[r_index[(i, t - 1)]] = -1
            for j in cold:
                if (i, j, t) in q_index:
                    coeffs[q_index[(i, j, t)]] = 1
            load = cascade.hot_load(i, t)
            if coeffs or load:
                b.row(coeffs, EQ, load, f"hot[{i},{t}]")
    for j in cold:
        for t in range(1, T + 1):
            load = cascade.cold_load(j, t)
            if load:
                b.row({q_index[(i, j, t)]: 1 for i in hot if (i, j, t) in q_index}, EQ, load, f"cold[{j},{t}]")
    for t in range(1, T):
        coeffs = {agg[t]: 1}
        coeffs.update({r_index[(i, t)]: -1 for i in hot if (i, t) in r_index})
        b.row(coeffs, EQ, 0, f"define_R[{t}]")
    for key, ts in pair_keys:
        i, j, _ = key
        coeffs = {link[key]: 1}
        coeffs.update({q_index[(i, j, t)]: -1 for t in ts})
        b.row(coeffs, EQ, 0, f"define_Q[{i},{j}]")
    for key in prohibited:
        b.row({q_index[key]: 1}, EQ, 0, f"prohibit[{key[0]},{key[1]},{key[2]}]")
    for key in y_index:
        i, j, t = key
        lhs = link[key] if t == 0 else q_index[key]
        b.row({lhs: 1, y_index[key]: -bigm[key]}, LE, 0, f"bigM[{i},{j},{t}]")

    return MilpModel(b.lp(), FULL, cascade, hot, cold, tuple(y_index), y_index, tuple(q_index), q_index,
                     tuple(r_index), r_index, bigm, tuple(prohibited), tuple(costed), match_index)


# ---------------------------------------------------------------- branch and bound

@dataclass(frozen=True)
class BnbResult:
    status: str
    solution: Optional[MatchSolution] = None
    objective: Optional[int] = None
    nodes: int = 0
    root_bound: Optional[Fraction] = None
    elapsed: float = 0.0
    x: Optional[tuple] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


_HALF = Fraction(1, 2)


def _integral(v: Fraction) -> bool:
    return v.denominator == 1


def no_good_row(model: MilpModel, pattern) -> Row:
    """Cut off exactly one binary assignment: sum_{on}(1-y) + sum_{off} y >= 1."""
    on = set(pattern)
    coeffs, ones = {}, 0
    for key in model.y_keys:
        v = model.y_index[key]
        if key in on:
            coeffs[v] = -1
            ones += 1
        else:
            coeffs[v] = 1
    return Row(coeffs, GE, 1 - ones, "nogood")


def solve_bnb(model: MilpModel, extra_rows: Sequence[Row] = (), cutoff=None,
              known_bound=None, node_limit: int = 10 ** 6, check_bounds: bool = True,
              lazy_rows: Sequence[Row] = ()) -> BnbResult:
    """Branch-and-bound on the LP relaxation.

    Most-fractional branching (ties: first binary in ``y_keys`` order),
    best-bound node selection with deeper nodes first on ties. Nodes whose
    bound cannot beat the incumbent, or cannot reach ``cutoff``, are pruned.
    ``known_bound`` is a proven lower bound on the optimum; the search stops
    as soon as an incumbent attains it.

    ``lazy_rows`` belong to the program but enter a node's relaxation only
    once its integral point violates them, which keeps the tableau small when
    there are many of them (no-good cuts during enumeration).
    """
    start = time.perf_counter()
    lp0 = model.lp.with_rows(extra_rows) if extra_rows else model.lp
    binaries = model.binary_vars
    bset = set(binaries)
    integral_obj = all(c.denominator == 1 for c in lp0.objective) and all(
        c == 0 for k, c in enumerate(lp0.objective) if k not in bset)

    def threshold(bound):
        return math.ceil(bound) if integral_obj else bound

    best_x, best_obj = None, None
    limit = None if cutoff is None else rational(cutoff)

    def prunable(bound):
        tb = threshold(bound)
        if limit is not None and tb > limit:
            return True
        return best_obj is not None and tb >= best_obj

    def _exact(c):
        c = rational(c)
        return c.numerator if c.denominator == 1 else c

    lazy = [(r, tuple((k, _exact(c)) for k, c in r.coeffs.items() if c), _exact(r.rhs)) for r in lazy_rows]
    lazy_vars = sorted({k for _, coeffs, _ in lazy for k, _ in coeffs})

    def violated(point):
        if not lazy:
            return []
        pt = {}
        for k in lazy_vars:
            v = point[k]
            pt[k] = int(v) if v.denominator == 1 else to_fraction(v)
        out = []
        for r, coeffs, rhs in lazy:
            a = sum(c * pt[k] for k, c in coeffs)
            if (r.relation == GE and a < rhs) or (r.relation == LE and a > rhs) or (
                    r.relation == EQ and a != rhs):
                out.append(r)
        return out

    def full_lp(fixes, added):
        lp = lp0.with_rows(added) if added else lp0
        return lp.with_bounds({v: (Fraction(a), Fraction(a)) for v, a in fixes}) if fixes else lp

    nodes = 0
    root = solve_lp(lp0, keep_state=True)
    nodes += 1
    if not root.optimal:
        return BnbResult(INFEASIBLE, nodes=nodes, elapsed=time.perf_counter() - start)
    costed = [(v, c) for v, c in enumerate(lp0.objective) if c]
    order = {v: n for n, v in enumerate(binaries)}
    heap = [(root.objective, 0, 0, (), (), root.x, root.state)]
    seq = 1

    floor = None if known_bound is None else rational(known_bound)
    while heap:
        if best_obj is not None and floor is not None and best_obj <= floor:
            break
        bound, negdepth, _, fixes, added, x, state = heapq.heappop(heap)
        if prunable(bound):
            continue
        frac = [v for v in binaries if x[v].denominator != 1]
        if not frac and lazy:
            cuts = violated(x)
            if cuts:
                added = added + tuple(cuts)
                res = resolve_bounds(state, lp0.objective, {}, rows=cuts)
                if res is None:
                    res = solve_lp(full_lp(fixes, added), keep_state=True)
                nodes += 1
                if res.optimal and not prunable(res.objective):
                    heapq.heappush(heap, (res.objective, negdepth, seq, fixes, added, res.x, res.state))
                    seq += 1
                continue
        if not frac:
            obj = to_fraction(sum((c * x[v] for v, c in costed), 0))
            if best_obj is None or obj < best_obj:
                best_x, best_obj = tuple(to_fraction(v) for v in x), obj
            continue
        fset = set(frac)
        r_obj = sum(c * (1 if v in fset else x[v]) for v, c in costed)
        if best_obj is None or r_obj < best_obj:
            rounded = [Fraction(1) if v in fset else to_fraction(xv) for v, xv in enumerate(x)]
            if (limit is None or r_obj <= limit) and point_satisfies(lp0, rounded) and not violated(rounded):
                best_x, best_obj = tuple(rounded), to_fraction(r_obj)
                if prunable(bound):
                    continue
        var = min(frac, key=lambda v: (abs(x[v] - _HALF), order[v]))
        for val in (0, 1):
            if nodes >= node_limit:
                raise ResourceLimit(f"node limit {node_limit} reached")
            child_fixes = fixes + ((var, val),)
            res = resolve_bounds(state, lp0.objective, {var: (val, val)})
            if res is None:
                res = solve_lp(full_lp(child_fixes, added), keep_state=True)
            nodes += 1
            if not res.optimal:
                continue
            if check_bounds:
                assert res.objective >= bound, "child relaxation below its parent"
            if prunable(res.objective):
                continue
            heapq.heappush(heap, (res.objective, negdepth - 1, seq, child_fixes, added, res.x, res.state))
            seq += 1
        if best_x is not None and floor is not None and best_obj <= floor:
            break

    if best_x is not None and (not point_satisfies(lp0, best_x) or violated(best_x)):
        raise RuntimeError("internal error: incumbent violates the relaxation")
    elapsed = time.perf_counter() - start
    if best_x is None or (limit is not None and best_obj > limit):
        return BnbResult(INFEASIBLE, nodes=nodes, root_bound=root.objective, elapsed=elapsed)
    if check_bounds:
        assert root.objective <= best_obj, "root relaxation above the integer optimum"
    sol = model.solution_from_vector(best_x)
    return BnbResult(OPTIMAL, sol, int(best_obj), nodes, root.objective, elapsed, best_x)


@dataclass(frozen=True)
class OptimaSet:
    objective: Optional[int]
    solutions: tuple
    complete: bool
    nodes: int = 0
    elapsed: float = 0.0

    def patterns(self) -> set:
        return {s.pattern() for s in self.solutions}

    def __len__(self):
        return len(self.solutions)


def enumerate_optima(model: MilpModel, cap: int = 1000, extra_rows: Sequence[Row] = (),
                     node_limit: int = 10 ** 6, first: Optional[BnbResult] = None) -> OptimaSet:
    """All optimal binary patterns, found by re-solving with no-good cuts.

    ``complete`` is true when the search proved no further optimum exists.
    Reaching ``cap`` triggers one more solve, so an exact fit still counts as
    complete. ``first`` may pass in an earlier solve_bnb result for the same
    model and rows.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    start = time.perf_counter()
    if first is None:
        first = solve_bnb(model, extra_rows, node_limit=node_limit)
    nodes = first.nodes
    if not first.optimal:
        return OptimaSet(None, (), True, nodes, time.perf_counter() - start)
    z = first.objective
    sols = [first.solution]
    cuts = [no_good_row(model, first.solution.pattern())]
    complete = False
    while True:
        res = solve_bnb(model, extra_rows, cutoff=z, known_bound=z, node_limit=node_limit, lazy_rows=cuts)
        nodes += res.nodes
        if not res.optimal or res.objective > z:
            complete = True
            break
        if len(sols) >= cap:
            break
        sols.append(res.solution)
        cuts.append(no_good_row(model, res.solution.pattern()))
    return OptimaSet(z, tuple(sols), complete, nodes, time.perf_counter() - start)


def count_configurations(n: int, m: int) -> int:
    """Ways to give each of m cold streams exactly one of n hot partners: n**m."""
    n, m = int(n), int(m)
    if n < 0 or m < 0:
        raise ValueError("counts must be nonnegative")
    if n == 0 and m > 0:
        raise ValueError("no hot stream to assign")
    return n ** m
