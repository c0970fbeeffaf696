"""Exact two-phase bounded-variable simplex and the minimum-utility LP."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .core import COLD, HOT, HensInstance, ValidationError, rational

try:
    from gmpy2 import mpq as _num
except ImportError:  # pragma: no cover
    _num = Fraction

LE, GE, EQ = "<=", ">=", "="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def to_fraction(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


@dataclass(frozen=True)
class Row:
    coeffs: Mapping[int, Fraction]
    relation: str
    rhs: Fraction
    name: str = ""

    def __post_init__(self):
        if self.relation not in (LE, GE, EQ):
            raise ValueError(f"bad relation {self.relation!r}")
        object.__setattr__(self, "coeffs", {int(k): rational(v) for k, v in self.coeffs.items() if v != 0})
        object.__setattr__(self, "rhs", rational(self.rhs))

    def activity(self, x) -> Fraction:
        return sum((c * x[k] for k, c in self.coeffs.items()), Fraction(0))

    def violation(self, x) -> Fraction:
        a = self.activity(x)
        if self.relation == LE:
            return max(Fraction(0), a - self.rhs)
        if self.relation == GE:
            return max(Fraction(0), self.rhs - a)
        return abs(a - self.rhs)


@dataclass(frozen=True)
class LinearProgram:
    """min c.x subject to rows and lower <= x <= upper (None = infinite)."""
    names: tuple
    objective: tuple
    rows: tuple = ()
    lower: tuple = None
    upper: tuple = None

    def __post_init__(self):
        n = len(self.names)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "objective", tuple(rational(c) for c in self.objective))
        object.__setattr__(self, "rows", tuple(self.rows))
        lo = (Fraction(0),) * n if self.lower is None else tuple(None if v is None else rational(v) for v in self.lower)
        hi = (None,) * n if self.upper is None else tuple(None if v is None else rational(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not (len(self.objective) == len(lo) == len(hi) == n):
            raise ValidationError("objective and bounds must match the variable count")
        for k, (a, b) in enumerate(zip(lo, hi)):
            if a is not None and b is not None and a > b:
                raise ValidationError(f"variable {self.names[k]}: lower bound exceeds upper bound")
        for r in self.rows:
            for k in r.coeffs:
                if not 0 <= k < n:
                    raise ValidationError(f"row {r.name!r} references undeclared variable {k}")

    @property
    def n(self) -> int:
        return len(self.names)

    def _copy(self, **changes) -> "LinearProgram":
        # skips revalidation; callers pass already-normalised data
        out = object.__new__(LinearProgram)
        for name in ("names", "objective", "rows", "lower", "upper"):
            object.__setattr__(out, name, changes.get(name, getattr(self, name)))
        return out

    def with_bounds(self, fixes: Mapping[int, tuple]) -> "LinearProgram":
        lo, hi = list(self.lower), list(self.upper)
        for k, (a, b) in fixes.items():
            a, b = rational(a), rational(b)
            if a > b:
                raise ValidationError("lower bound exceeds upper bound")
            lo[k], hi[k] = a, b
        return self._copy(lower=tuple(lo), upper=tuple(hi))

    def with_rows(self, rows: Sequence[Row]) -> "LinearProgram":
        rows = tuple(rows)
        for r in rows:
            if any(not 0 <= k < self.n for k in r.coeffs):
                raise ValidationError(f"row {r.name!r} references undeclared variable")
        return self._copy(rows=self.rows + rows)

    def max_violation(self, x) -> Fraction:
        worst = Fraction(0)
        for r in self.rows:
            worst = max(worst, r.violation(x))
        for k, v in enumerate(x):
            if self.lower[k] is not None:
                worst = max(worst, self.lower[k] - v)
            if self.upper[k] is not None:
                worst = max(worst, v - self.upper[k])
        return worst

    def dump(self) -> str:
        """Plain-text listing, one line per objective term, row and bound.

        Format::

            LP <n_vars> <n_rows>
            var <k> <name> <lower|-inf> <upper|inf> <cost>
            row <name> <relation> <rhs> : <k>*<coeff> ...
        """
        lines = [f"LP {self.n} {len(self.rows)}"]
        for k, name in enumerate(self.names):
            lo = "-inf" if self.lower[k] is None else str(self.lower[k])
            hi = "inf" if self.upper[k] is None else str(self.upper[k])
            lines.append(f"var {k} {name} {lo} {hi} {self.objective[k]}")
        for r in self.rows:
            terms = " ".join(f"{k}*{c}" for k, c in sorted(r.coeffs.items()))
            lines.append(f"row {r.name or '-'} {r.relation} {r.rhs} : {terms}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "LinearProgram":
        names, cost, lo, hi, rows = [], [], [], [], []
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0] == "LP":
                continue
            if parts[0] == "var":
                names.append(parts[2])
                lo.append(None if parts[3] == "-inf" else Fraction(parts[3]))
                hi.append(None if parts[4] == "inf" else Fraction(parts[4]))
                cost.append(Fraction(parts[5]))
            elif parts[0] == "row":
                colon = parts.index(":")
                coeffs = {}
                for term in parts[colon + 1:]:
                    k, c = term.split("*", 1)
                    coeffs[int(k)] = Fraction(c)
                name = "" if parts[1] == "-" else parts[1]
                rows.append(Row(coeffs, parts[2], Fraction(parts[3]), name))
        return cls(tuple(names), tuple(cost), tuple(rows), tuple(lo), tuple(hi))


@dataclass(frozen=True)
class LPResult:
    status: str
    x: Optional[tuple] = None
    objective: Optional[Fraction] = None
    iterations: int = 0
    state: Optional[object] = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Sparse-row tableau B^-1 A over columns with lb <= x <= ub (ub None = inf).

    Nonbasic columns sit at a bound (``at_upper`` marks the upper ones);
    ``beta`` holds basic values and ``d`` the phase-2 reduced costs.
    """

    def __init__(self, rows, lb, ub, basis, beta, max_iter):
        self.rows = rows
        self.lb = lb
        self.ub = ub
        self.basis = basis
        self.beta = beta
        self.at_upper = set()
        self.d = {}
        self.max_iter = max_iter
        self.iterations = 0

    def copy(self) -> "_Tableau":
        t = object.__new__(_Tableau)
        t.rows = [dict(r) for r in self.rows]
        t.lb, t.ub = list(self.lb), list(self.ub)
        t.basis, t.beta = list(self.basis), list(self.beta)
        t.at_upper = set(self.at_upper)
        t.d = dict(self.d)
        t.max_iter = self.max_iter
        t.iterations = 0
        return t

    def value(self, j):
        return self.ub[j] if j in self.at_upper else self.lb[j]

    def fixed(self, j) -> bool:
        return self.ub[j] is not None and self.ub[j] == self.lb[j]

    def _tick(self):
        self.iterations += 1
        if self.iterations > self.max_iter:
            raise SimplexError("iteration limit reached")

    def reduced_costs(self, cost):
        d = {j: c for j, c in cost.items() if c}
        for r, b in enumerate(self.basis):
            cb = cost.get(b)
            if cb:
                for j, a in self.rows[r].items():
                    v = d.get(j, 0) - cb * a
                    if v:
                        d[j] = v
                    else:
                        d.pop(j, None)
        for b in self.basis:
            d.pop(b, None)
        return d

    def pivot(self, r, e, d):
        row = self.rows[r]
        a = row[e]
        if a != 1:
            inv = 1 / a
            for j in row:
                row[j] *= inv
        items = tuple(row.items())
        for other in self.rows:
            f = other.get(e)
            if not f or other is row:
                continue
            for j, v in items:
                w = other.get(j)
                if w is None:
                    other[j] = -f * v
                else:
                    w -= f * v
                    if w:
                        other[j] = w
                    else:
                        del other[j]
        f = d.get(e)
        if f:
            for j, v in items:
                w = d.get(j)
                if w is None:
                    d[j] = -f * v
                else:
                    w -= f * v
                    if w:
                        d[j] = w
                    else:
                        del d[j]
        self.basis[r] = e

    def _move(self, e, delta):
        for i, row in enumerate(self.rows):
            a = row.get(e)
            if a:
                self.beta[i] -= a * delta

    def primal(self, cost, allowed):
        """Primal simplex from a feasible basis, Bland's rule."""
        d = self.reduced_costs(cost)
        basic = set(self.basis)
        while True:
            e = None
            for j in sorted(d):
                if j in basic or j not in allowed or self.fixed(j):
                    continue
                dj = d[j]
                if (dj < 0 and j not in self.at_upper) or (dj > 0 and j in self.at_upper):
                    e = j
                    break
            if e is None:
                self.d = d
                return OPTIMAL
            self._tick()
            direction = -1 if e in self.at_upper else 1
            best = None                     # (step length, variable, row)
            if self.ub[e] is not None:
                best = (self.ub[e] - self.lb[e], e, None)
            for r, row in enumerate(self.rows):
                a = row.get(e)
                if not a:
                    continue
                rate = -direction * a
                b = self.basis[r]
                if rate < 0:
                    lim = (self.beta[r] - self.lb[b]) / -rate
                elif self.ub[b] is None:
                    continue
                else:
                    lim = (self.ub[b] - self.beta[r]) / rate
                if best is None or (lim, b) < best[:2]:
                    best = (lim, b, r)
            if best is None:
                self.d = d
                return UNBOUNDED
            theta, _, r = best
            start = self.value(e)
            if theta:
                self._move(e, direction * theta)
            if r is None:
                if direction > 0:
                    self.at_upper.add(e)
                else:
                    self.at_upper.discard(e)
                continue
            leaving = self.basis[r]
            if -direction * self.rows[r][e] > 0:
                self.at_upper.add(leaving)
            else:
                self.at_upper.discard(leaving)
            self.at_upper.discard(e)
            self.pivot(r, e, d)
            self.beta[r] = start + direction * theta
            basic.discard(leaving)
            basic.add(e)

    def dual(self):
        """Dual simplex from a dual-feasible basis; smallest-index rules."""
        d = self.d
        while True:
            r, b = None, None
            for i, v in enumerate(self.basis):
                if self.beta[i] < self.lb[v] or (self.ub[v] is not None and self.beta[i] > self.ub[v]):
                    if b is None or v < b:
                        r, b = i, v
            if r is None:
                return OPTIMAL
            self._tick()
            row = self.rows[r]
            low = self.beta[r] < self.lb[b]
            target = self.lb[b] if low else self.ub[b]
            best = None
            for j, a in row.items():
                if j == b or self.fixed(j):
                    continue
                up = j not in self.at_upper
                if low:
                    ok = (a < 0) if up else (a > 0)
                else:
                    ok = (a > 0) if up else (a < 0)
                if not ok:
                    continue
                ratio = abs(d.get(j, 0) / a)
                if best is None or (ratio, j) < best:
                    best = (ratio, j)
            if best is None:
                return INFEASIBLE
            e = best[1]
            delta = (self.beta[r] - target) / row[e]
            start = self.value(e)
            self._move(e, delta)
            if not low and not self.fixed(b):
                self.at_upper.add(b)
            else:
                self.at_upper.discard(b)
            self.at_upper.discard(e)
            self.pivot(r, e, d)
            self.beta[r] = start + delta

    def values(self, ncols):
        x = [self.value(j) for j in range(len(self.lb))]
        for r, b in enumerate(self.basis):
            x[b] = self.beta[r]
        return x[:ncols]

    def set_bounds(self, j, lo, hi):
        basic = j in self.basis
        old = None if basic else self.value(j)
        self.lb[j], self.ub[j] = lo, hi
        if basic:
            return
        if self.fixed(j) or hi is None:
            self.at_upper.discard(j)
        new = self.value(j)
        if new != old:
            self._move(j, new - old)

    def add_row(self, coeffs, rel, rhs):
        """Append ``coeffs . x (rel) rhs`` with a fresh basic slack; keeps dual feasibility."""
        sign = -1 if rel == LE else 1
        s = len(self.lb)
        row = {j: -sign * c for j, c in coeffs.items() if c}
        for r, b in enumerate(self.basis):
            c = row.get(b)
            if c:
                for j, v in self.rows[r].items():
                    w = row.get(j, 0) - c * v
                    if w:
                        row[j] = w
                    else:
                        row.pop(j, None)
        row[s] = _num(1)
        act = sum((c * self.value(j) for j, c in coeffs.items() if j not in self.basis), _num(0))
        act += sum((coeffs.get(b, 0) * self.beta[r] for r, b in enumerate(self.basis)), _num(0))
        self.rows.append(row)
        self.basis.append(s)
        self.beta.append(sign * (act - rhs))
        self.lb.append(_num(0))
        self.ub.append(_num(0) if rel == EQ else None)

    def dual_feasible(self) -> bool:
        basic = set(self.basis)
        for j, dj in self.d.items():
            if j in basic or self.fixed(j):
                continue
            if (dj < 0 and j not in self.at_upper) or (dj > 0 and j in self.at_upper):
                return False
        return True


class SimplexError(RuntimeError):
    pass


class _Compiled:
    """Standard form of a row set, built once and reused while bounds change.

    Original variable k maps to columns: ``x = lo + x'`` when lo is finite,
    ``x = hi - x'`` when only hi is finite, ``x = x+ - x-`` when free.
    """

    def __init__(self, lp: LinearProgram):
        self.rows_ref = lp.rows
        self.kind = tuple(_bound_kind(lo, hi) for lo, hi in zip(lp.lower, lp.upper))
        self.cols = []
        ncol = 0
        for kind in self.kind:
            if kind == "free":
                self.cols.append(((ncol, 1), (ncol + 1, -1)))
                ncol += 2
            else:
                self.cols.append(((ncol, -1 if kind == "hi" else 1),))
                ncol += 1
        self.n_var_cols = ncol
        self.rows = []
        self.orig = []
        for r in lp.rows:
            orig = {k: _num(c) for k, c in r.coeffs.items()}
            coeffs = {}
            for k, c in orig.items():
                for col, sign in self.cols[k]:
                    coeffs[col] = coeffs.get(col, 0) + c * sign
            coeffs = {j: v for j, v in coeffs.items() if v}
            slack = None
            if r.relation != EQ:
                slack = ncol
                ncol += 1
                coeffs[slack] = _num(1 if r.relation == LE else -1)
            self.rows.append((coeffs, r.relation, _num(r.rhs), slack))
            self.orig.append((orig, r.relation, _num(r.rhs)))
        self.ncol = ncol
        self.cost = {}

    def point_ok(self, x, lower, upper) -> bool:
        for orig, rel, rhs in self.orig:
            a = sum((c * x[k] for k, c in orig.items()), _num(0))
            if (rel == EQ and a != rhs) or (rel == LE and a > rhs) or (rel == GE and a < rhs):
                return False
        for v, lo, hi in zip(x, lower, upper):
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return False
        return True


def _bound_kind(lo, hi):
    if lo is None:
        return "free" if hi is None else "hi"
    return "lo"


_cache = {}


def _compiled(lp: LinearProgram) -> _Compiled:
    kind = tuple(_bound_kind(lo, hi) for lo, hi in zip(lp.lower, lp.upper))
    key = (id(lp.rows), kind)
    comp = _cache.get(key)
    if comp is None or comp.rows_ref is not lp.rows:
        if len(_cache) > 256:
            _cache.clear()
        comp = _Compiled(lp)
        _cache[key] = comp
    return comp


def point_satisfies(lp: LinearProgram, x) -> bool:
    """Exact membership test of ``x`` in the feasible set of ``lp``."""
    x = [_num(v) for v in x]
    return _compiled(lp).point_ok(x, lp.lower, lp.upper)


@dataclass
class _State:
    comp: _Compiled
    tab: _Tableau
    const: list        # shift applied to each original variable
    ncol: int


def _column_bounds(comp, lp, k, const):
    """Bounds of the single column of a finite-lower variable, in shifted terms."""
    lo, hi = lp.lower[k], lp.upper[k]
    return _num(lo) - const[k], None if hi is None else _num(hi) - const[k]


def _finish(lp, comp, tab, const, ncol, keep_state):
    vals = tab.values(ncol)
    xq = []
    for k in range(lp.n):
        v = const[k]
        for col, sign in comp.cols[k]:
            v += sign * vals[col]
        xq.append(v)
    if not comp.point_ok(xq, lp.lower, lp.upper):
        raise SimplexError("internal error: returned point violates the LP")
    x = tuple(to_fraction(v) for v in xq)
    obj = sum((c * v for c, v in zip(lp.objective, x) if c), Fraction(0))
    state = _State(comp, tab, const, ncol) if keep_state else None
    return LPResult(OPTIMAL, x, obj, tab.iterations, state)


def _warm(lp, state, max_iter, keep_state):
    comp = state.comp
    tab = state.tab.copy()
    tab.max_iter = max_iter
    for k, kind in enumerate(comp.kind):
        if kind == "hi" and _num(lp.upper[k]) != state.const[k]:
            return None
        if kind != "lo":
            continue
        col = comp.cols[k][0][0]
        lo, hi = _column_bounds(comp, lp, k, state.const)
        if lo != tab.lb[col] or hi != tab.ub[col]:
            tab.set_bounds(col, lo, hi)
    if not tab.dual_feasible():
        return None
    if tab.dual() == INFEASIBLE:
        return LPResult(INFEASIBLE, iterations=tab.iterations)
    return _finish(lp, comp, tab, state.const, state.ncol, keep_state)


def resolve_bounds(state: _State, objective, changes: Mapping[int, tuple], max_iter: int = 100_000,
                   rows: Sequence[Row] = ()):
    """Dual-simplex re-solve after new bounds on finite-lower variables.

    A lean path for branch-and-bound: ``changes`` maps variable index to
    (lo, hi) and ``rows`` are appended to the program; values come back as
    raw exact numbers of the internal type and the point is not re-verified
    here (the caller verifies what it keeps). Returns None when the state
    cannot be reused.
    """
    comp = state.comp
    tab = state.tab.copy()
    tab.max_iter = max_iter
    const = state.const
    for k, (lo, hi) in changes.items():
        if comp.kind[k] != "lo":
            return None
        col = comp.cols[k][0][0]
        tab.set_bounds(col, _num(lo) - const[k], None if hi is None else _num(hi) - const[k])
    for r in rows:
        if any(comp.kind[k] != "lo" for k in r.coeffs):
            return None
        coeffs = {comp.cols[k][0][0]: _num(c) for k, c in r.coeffs.items() if c}
        tab.add_row(coeffs, r.relation, _num(r.rhs) - sum((_num(c) * const[k] for k, c in r.coeffs.items()),
                                                            _num(0)))
    if not tab.dual_feasible():
        return None
    if tab.dual() == INFEASIBLE:
        return LPResult(INFEASIBLE, iterations=tab.iterations)
    vals = tab.values(state.ncol)
    xq = []
    for k, cols in enumerate(comp.cols):
        v = const[k]
        for col, sign in cols:
            v += sign * vals[col]
        xq.append(v)
    obj = sum((c * v for c, v in zip(objective, xq) if c), _num(0))
    return LPResult(OPTIMAL, tuple(xq), obj, tab.iterations, _State(comp, tab, const, state.ncol))


def solve_lp(lp: LinearProgram, max_iter: int = 100_000, warm=None, keep_state: bool = False) -> LPResult:
    """Minimise ``lp`` exactly.

    Infeasible and unbounded programs come back as statuses, not exceptions.
    ``warm`` takes the state of an earlier optimal solve of an LP with the
    same rows; the new bounds are then reached by dual simplex pivots.
    """
    comp = _compiled(lp)
    if warm is not None and warm.comp is comp:
        res = _warm(lp, warm, max_iter, keep_state)
        if res is not None:
            return res
    const, lb, ub = [], [], []
    for k, kind in enumerate(comp.kind):
        lo, hi = lp.lower[k], lp.upper[k]
        if kind == "free":
            const.append(_num(0))
            lb += [_num(0), _num(0)]
            ub += [None, None]
        elif kind == "hi":
            const.append(_num(hi))
            lb.append(_num(0))
            ub.append(None)
        else:
            const.append(_num(lo))
            lb.append(_num(0))
            ub.append(None if hi is None else _num(hi - lo))
    lb += [_num(0)] * (comp.ncol - comp.n_var_cols)
    ub += [None] * (comp.ncol - comp.n_var_cols)

    rows, rhs, basis = [], [], []
    artificial = set()
    ncol = comp.ncol
    for (coeffs, rel, b0, slack), (orig, _, _) in zip(comp.rows, comp.orig):
        b = b0 - sum((c * const[k] for k, c in orig.items()), _num(0))
        if not coeffs:
            if (rel == EQ and b != 0) or (rel == LE and b < 0) or (rel == GE and b > 0):
                return LPResult(INFEASIBLE)
            continue
        if b < 0:
            row = {j: -v for j, v in coeffs.items()}
            b = -b
        else:
            row = dict(coeffs)
        if slack is not None and row[slack] == 1:
            basis.append(slack)
        else:
            row[ncol] = _num(1)
            basis.append(ncol)
            artificial.add(ncol)
            lb.append(_num(0))
            ub.append(None)
            ncol += 1
        rows.append(row)
        rhs.append(b)

    tab = _Tableau(rows, lb, ub, basis, rhs, max_iter)
    structural = set(range(comp.ncol))
    if artificial:
        tab.primal({a: _num(1) for a in artificial}, structural | artificial)
        if any(tab.beta[r] for r, b in enumerate(tab.basis) if b in artificial):
            return LPResult(INFEASIBLE, iterations=tab.iterations)
        _drive_out(tab, artificial)
        for row in tab.rows:
            for a in artificial:
                row.pop(a, None)
        tab.lb, tab.ub = tab.lb[:comp.ncol], tab.ub[:comp.ncol]
        ncol = comp.ncol

    cost = {}
    for k, c in enumerate(lp.objective):
        if c:
            for col, sign in comp.cols[k]:
                cost[col] = cost.get(col, 0) + _num(c) * sign
    if tab.primal(cost, structural) == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=tab.iterations)
    return _finish(lp, comp, tab, const, ncol, keep_state)


def _drive_out(tab, artificial):
    r = 0
    while r < len(tab.rows):
        b = tab.basis[r]
        if b not in artificial:
            r += 1
            continue
        row = tab.rows[r]
        basic = set(tab.basis)
        e = next((j for j in sorted(row) if j not in artificial and j not in basic), None)
        if e is None:
            # redundant row
            del tab.rows[r]
            del tab.basis[r]
            del tab.beta[r]
            continue
        value = tab.value(e)
        tab.at_upper.discard(e)
        tab.pivot(r, e, {})
        tab.beta[r] = value
        r += 1


# ---------------------------------------------------------------- LP stage

@dataclass(frozen=True)
class UtilityDuty:
    """Utility duties and the cascade residuals R_0..R_T."""
    hot: Mapping[str, Fraction]
    cold: Mapping[str, Fraction]
    residuals: tuple
    cost: Fraction = Fraction(0)

    def __post_init__(self):
        vals = list(self.hot.values()) + list(self.cold.values()) + list(self.residuals)
        if any(v < 0 for v in vals):
            raise ValidationError("duties and residuals must be nonnegative")
        if self.residuals and (self.residuals[0] != 0 or self.residuals[-1] != 0):
            raise ValidationError("R_0 and R_T must be zero")

    @property
    def duties(self) -> dict:
        return {**self.hot, **self.cold}


class InfeasibleError(ValidationError):
    pass


def min_utility(instance: HensInstance, costs: Optional[Mapping[str, Fraction]] = None) -> UtilityDuty:
    """Minimum-utility transshipment LP over the instance's intervals."""
    table = instance.table()
    T = len(table.intervals)
    util = list(instance.utilities)
    price = {u.id: u.cost for u in util}
    price.update({k: rational(v) for k, v in (costs or {}).items()})
    kinds = {s.id: s.kind for s in instance.streams}

    names = [f"QS[{u.id}]" if u.kind == HOT else f"QW[{u.id}]" for u in util]
    names += [f"R[{t}]" for t in range(1, T)]
    nu = len(util)
    obj = [price[u.id] for u in util] + [0] * (T - 1)
    rows = []
    for t in range(1, T + 1):
        loads = table.loads[t - 1]
        surplus = sum((v if kinds[k] == HOT else -v for k, v in loads.items()), Fraction(0))
        # R_t - R_{t-1} + QW - QS = surplus
        coeffs = {}
        if t < T:
            coeffs[nu + t - 1] = 1
        if t > 1:
            coeffs[nu + t - 2] = -1
        for k, u in enumerate(util):
            if table.utility_interval[u.id] == t:
                coeffs[k] = 1 if u.kind == COLD else -1
        rows.append(Row(coeffs, EQ, surplus, f"balance[{t}]"))
    lp = LinearProgram(tuple(names), tuple(obj), tuple(rows))
    res = solve_lp(lp)
    if res.status != OPTIMAL:
        raise InfeasibleError(f"minimum-utility LP is {res.status}")
    hot = {u.id: res.x[k] for k, u in enumerate(util) if u.kind == HOT}
    cold = {u.id: res.x[k] for k, u in enumerate(util) if u.kind == COLD}
    residuals = (Fraction(0),) + tuple(res.x[nu:]) + (Fraction(0),)
    return UtilityDuty(hot, cold, residuals, res.objective)
