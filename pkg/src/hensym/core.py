"""Streams, utilities, temperature intervals, interval balances, solution checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

if TYPE_CHECKING:
    from .milp import MilpModel

HOT = "hot"
COLD = "cold"


class HensError(Exception):
    """Base class for all package errors."""


class InvalidIntervalError(HensError, ValueError):
    pass


class StructuralError(HensError, ValueError):
    pass


class ValidationError(HensError, ValueError):
    pass


def rational(value) -> Fraction:
    """Exact conversion; floats go through their shortest repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, (str, Decimal)):
        return Fraction(str(value).strip())
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"cannot convert {value!r} to a rational")


def _opt_rational(value):
    return None if value is None else rational(value)


def _check_kind(kind):
    if kind not in (HOT, COLD):
        raise ValidationError(f"kind must be 'hot' or 'cold', got {kind!r}")


@dataclass(frozen=True)
class Stream:
    id: str
    kind: str
    fcp: Fraction
    t_in: Optional[Fraction] = None
    t_out: Optional[Fraction] = None

    def __post_init__(self):
        _check_kind(self.kind)
        object.__setattr__(self, "fcp", rational(self.fcp))
        object.__setattr__(self, "t_in", _opt_rational(self.t_in))
        object.__setattr__(self, "t_out", _opt_rational(self.t_out))
        if self.fcp < 0:
            raise ValidationError(f"stream {self.id}: fcp must be >= 0")
        if (self.t_in is None) != (self.t_out is None):
            raise ValidationError(f"stream {self.id}: give both t_in and t_out or neither")
        if self.t_in is not None:
            if self.kind == HOT and not self.t_in > self.t_out:
                raise ValidationError(f"hot stream {self.id}: t_in must exceed t_out")
            if self.kind == COLD and not self.t_in < self.t_out:
                raise ValidationError(f"cold stream {self.id}: t_in must be below t_out")

    @property
    def has_temperatures(self) -> bool:
        return self.t_in is not None

    @property
    def duty(self) -> Fraction:
        """Total heat released (hot) or absorbed (cold)."""
        if not self.has_temperatures:
            raise ValidationError(f"stream {self.id} has no temperatures")
        return self.fcp * abs(self.t_in - self.t_out)


@dataclass(frozen=True)
class Utility:
    id: str
    kind: str
    temperature: Optional[Fraction] = None
    duty: Optional[Fraction] = None
    cost: Fraction = Fraction(1)

    def __post_init__(self):
        _check_kind(self.kind)
        object.__setattr__(self, "temperature", _opt_rational(self.temperature))
        object.__setattr__(self, "duty", _opt_rational(self.duty))
        object.__setattr__(self, "cost", rational(self.cost))
        if self.duty is not None and self.duty < 0:
            raise ValidationError(f"utility {self.id}: duty must be >= 0")
        if self.cost < 0:
            raise ValidationError(f"utility {self.id}: cost must be >= 0")


@dataclass(frozen=True)
class TemperatureInterval:
    index: int
    t_hi: Optional[Fraction]
    t_lo: Optional[Fraction]
    delta_t: Optional[Fraction] = None

    def __post_init__(self):
        t_hi, t_lo = _opt_rational(self.t_hi), _opt_rational(self.t_lo)
        object.__setattr__(self, "t_hi", t_hi)
        object.__setattr__(self, "t_lo", t_lo)
        dt = _opt_rational(self.delta_t)
        if t_hi is not None and t_lo is not None:
            if not t_hi > t_lo:
                raise InvalidIntervalError(f"interval {self.index}: t_hi must exceed t_lo")
            if dt is None:
                dt = t_hi - t_lo
            elif dt != t_hi - t_lo:
                raise InvalidIntervalError(f"interval {self.index}: delta_t != t_hi - t_lo")
        if dt is not None and dt <= 0:
            raise InvalidIntervalError(f"interval {self.index}: delta_t must be positive")
        object.__setattr__(self, "delta_t", dt)


def _rational_map(mapping) -> dict:
    return {str(k): rational(v) for k, v in dict(mapping or {}).items()}


@dataclass(frozen=True)
class IntervalProblem:
    """Data of one fixed temperature interval.

    ``hot_loads`` and ``cold_loads`` hold process streams and utilities alike;
    ``hot_utilities`` / ``cold_utilities`` say which ids are utilities.
    ``delta_r`` is derived from the loads when not given, and checked when given.
    """
    interval: TemperatureInterval
    hot_loads: Mapping[str, Fraction]
    cold_loads: Mapping[str, Fraction]
    entering_residuals: Mapping[str, Fraction] = field(default_factory=dict)
    hot_utilities: frozenset = frozenset()
    cold_utilities: frozenset = frozenset()
    fcp: Mapping[str, Fraction] = field(default_factory=dict)
    delta_r: Optional[Fraction] = None

    def __post_init__(self):
        hot = _rational_map(self.hot_loads)
        cold = _rational_map(self.cold_loads)
        res = _rational_map(self.entering_residuals)
        object.__setattr__(self, "hot_loads", hot)
        object.__setattr__(self, "cold_loads", cold)
        object.__setattr__(self, "entering_residuals", res)
        object.__setattr__(self, "hot_utilities", frozenset(self.hot_utilities))
        object.__setattr__(self, "cold_utilities", frozenset(self.cold_utilities))
        object.__setattr__(self, "fcp", _rational_map(self.fcp))
        if set(hot) & set(cold):
            raise StructuralError("an id appears on both the hot and the cold side")
        for side, loads in (("hot", hot), ("cold", cold)):
            for k, v in loads.items():
                if v < 0:
                    raise StructuralError(f"negative {side} load for {k}")
        for k, v in res.items():
            if k not in hot:
                raise StructuralError(f"entering residual for unknown hot id {k}")
            if v < 0:
                raise StructuralError(f"negative entering residual for {k}")
        if not self.hot_utilities <= set(hot) or not self.cold_utilities <= set(cold):
            raise StructuralError("utility ids must be present among the loads")
        balance = sum(hot.values(), Fraction(0)) - sum(cold.values(), Fraction(0))
        if self.delta_r is None:
            object.__setattr__(self, "delta_r", balance)
        else:
            dr = rational(self.delta_r)
            if dr != balance:
                raise StructuralError(f"delta_r {dr} disagrees with the interval balance {balance}")
            object.__setattr__(self, "delta_r", dr)

    @property
    def hot_ids(self) -> list:
        return list(self.hot_loads)

    @property
    def cold_ids(self) -> list:
        return list(self.cold_loads)

    def entering(self, hot_id) -> Fraction:
        return self.entering_residuals.get(hot_id, Fraction(0))

    def available(self, hot_id) -> Fraction:
        """Heat a hot stream can hand out here: own load plus what it carries in."""
        return self.hot_loads[hot_id] + self.entering(hot_id)

    @property
    def entering_total(self) -> Fraction:
        return sum(self.entering_residuals.values(), Fraction(0))

    @property
    def exiting_total(self) -> Fraction:
        return self.entering_total + self.delta_r

    def is_hot_utility(self, i) -> bool:
        return i in self.hot_utilities

    def is_cold_utility(self, j) -> bool:
        return j in self.cold_utilities


@dataclass(frozen=True)
class MatchSolution:
    """One point of a transshipment MILP.

    Keys of ``y`` and ``q`` are ``(hot, cold, t)``; ``t`` is the interval index,
    or 0 for a match counted once over all intervals. ``residuals`` are keyed
    ``(hot, t)`` and hold the heat leaving interval ``t``.
    """
    y: Mapping
    q: Mapping
    residuals: Mapping
    objective: int

    def pattern(self) -> frozenset:
        return frozenset(k for k, v in self.y.items() if v)

    def key(self):
        return (tuple(sorted((k, int(v)) for k, v in self.y.items())),
                tuple(sorted((k, v) for k, v in self.q.items() if v)))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        if not isinstance(other, MatchSolution):
            return NotImplemented
        return self.key() == other.key() and self.objective == other.objective


# ---------------------------------------------------------------- arithmetic

def heat_load(fcp, delta_t) -> Fraction:
    fcp, delta_t = rational(fcp), rational(delta_t)
    if delta_t <= 0:
        raise InvalidIntervalError("delta_t must be positive")
    if fcp < 0:
        raise ValidationError("fcp must be >= 0")
    return fcp * delta_t


def residual_delta_from_capacities(delta_t, hot_fcps: Sequence, cold_fcps: Sequence) -> Fraction:
    """Residual change of an interval holding process streams only."""
    delta_t = rational(delta_t)
    if delta_t <= 0:
        raise InvalidIntervalError("delta_t must be positive")
    return delta_t * (sum(map(rational, hot_fcps), Fraction(0)) - sum(map(rational, cold_fcps), Fraction(0)))


def residual_delta(p: IntervalProblem) -> Fraction:
    """R_t - R_{t-1} for the interval.

    Process streams are evaluated from their capacities when every one of them
    carries an fcp and the interval has a width; utilities always use loads.
    """
    hot_proc = [i for i in p.hot_loads if i not in p.hot_utilities]
    cold_proc = [j for j in p.cold_loads if j not in p.cold_utilities]
    dt = p.interval.delta_t
    if dt is not None and all(k in p.fcp for k in hot_proc + cold_proc):
        proc = residual_delta_from_capacities(dt, [p.fcp[i] for i in hot_proc],
                                              [p.fcp[j] for j in cold_proc])
    else:
        proc = (sum((p.hot_loads[i] for i in hot_proc), Fraction(0))
                - sum((p.cold_loads[j] for j in cold_proc), Fraction(0)))
    hu = sum((p.hot_loads[i] for i in p.hot_utilities), Fraction(0))
    cu = sum((p.cold_loads[j] for j in p.cold_utilities), Fraction(0))
    return proc + hu - cu


# ---------------------------------------------------------------- intervals

@dataclass(frozen=True)
class IntervalTable:
    intervals: tuple
    loads: tuple                 # per interval: {stream id: load}, process streams only
    utility_interval: Mapping    # utility id -> interval index

    def stream_total(self, sid) -> Fraction:
        return sum((ld.get(sid, Fraction(0)) for ld in self.loads), Fraction(0))


def build_intervals(streams: Sequence[Stream], utilities: Sequence[Utility] = (), dt_min=10) -> IntervalTable:
    """Cut the shifted temperature scale at every stream endpoint.

    Cold temperatures are shifted up by ``dt_min``. The hottest hot utility
    sits in the top interval and the coldest cold utility in the bottom one;
    other utilities go to the interval holding their (shifted) temperature.
    """
    dt_min = rational(dt_min)
    if dt_min < 0:
        raise ValidationError("dt_min must be >= 0")
    streams = list(streams)
    if not streams:
        raise ValidationError("at least one stream is required")
    spans = {}
    for s in streams:
        if not s.has_temperatures:
            raise ValidationError(f"stream {s.id} has no temperatures")
        if s.kind == HOT:
            spans[s.id] = (s.t_out, s.t_in)
        else:
            spans[s.id] = (s.t_in + dt_min, s.t_out + dt_min)
    bounds = sorted({t for span in spans.values() for t in span}, reverse=True)
    if len(bounds) < 2:
        raise InvalidIntervalError("streams span no interval")
    intervals = tuple(TemperatureInterval(k + 1, hi, lo) for k, (hi, lo) in enumerate(zip(bounds, bounds[1:])))
    loads = []
    for iv in intervals:
        row = {}
        for s in streams:
            lo, hi = spans[s.id]
            if lo <= iv.t_lo and iv.t_hi <= hi:
                row[s.id] = heat_load(s.fcp, iv.delta_t)
        loads.append(row)
    table = IntervalTable(intervals, tuple(loads), {})
    for s in streams:
        if table.stream_total(s.id) != s.duty:
            raise InvalidIntervalError(f"stream {s.id} spans no interval")
    table.utility_interval.update(place_utilities(intervals, utilities, dt_min))
    return table


def place_utilities(intervals, utilities, dt_min) -> dict:
    hot = [u for u in utilities if u.kind == HOT]
    cold = [u for u in utilities if u.kind == COLD]
    top, bottom = intervals[0].index, intervals[-1].index
    out = {}

    def locate(temp):
        for iv in intervals:
            if iv.t_lo < temp <= iv.t_hi:
                return iv.index
        return top if temp > intervals[0].t_hi else bottom

    if hot:
        hottest = max(hot, key=lambda u: (u.temperature is not None, u.temperature or 0))
        for u in hot:
            out[u.id] = top if (u is hottest or u.temperature is None) else locate(u.temperature)
    if cold:
        coldest = min(cold, key=lambda u: (u.temperature is not None, u.temperature or 0))
        for u in cold:
            out[u.id] = bottom if (u is coldest or u.temperature is None) else locate(u.temperature + dt_min)
    return out


@dataclass(frozen=True)
class Cascade:
    """Ordered interval problems of a whole network, hottest first."""
    problems: tuple

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        if not self.problems:
            raise StructuralError("a cascade needs at least one interval")
        idx = [p.interval.index for p in self.problems]
        if idx != list(range(1, len(idx) + 1)):
            raise StructuralError("intervals must be numbered 1..T hottest first")

    @property
    def intervals(self):
        return tuple(p.interval for p in self.problems)

    def _ids(self, attr):
        seen = {}
        for p in self.problems:
            for k in getattr(p, attr):
                seen.setdefault(k, None)
        return list(seen)

    @property
    def hot_ids(self):
        return self._ids("hot_loads")

    @property
    def cold_ids(self):
        return self._ids("cold_loads")

    @property
    def hot_utilities(self):
        return frozenset().union(*(p.hot_utilities for p in self.problems))

    @property
    def cold_utilities(self):
        return frozenset().union(*(p.cold_utilities for p in self.problems))

    def hot_load(self, i, t) -> Fraction:
        return self.problems[t - 1].hot_loads.get(i, Fraction(0))

    def cold_load(self, j, t) -> Fraction:
        return self.problems[t - 1].cold_loads.get(j, Fraction(0))

    def surplus(self, t) -> Fraction:
        return self.problems[t - 1].delta_r

    def profile(self, sid) -> tuple:
        side = "hot_loads" if sid in self.hot_ids else "cold_loads"
        return tuple(getattr(p, side).get(sid, Fraction(0)) for p in self.problems)


@dataclass(frozen=True)
class HensInstance:
    """One synthesis problem.

    Either the streams carry temperatures and intervals are cut from them, or
    ``explicit`` holds per-interval loads directly (utility loads included).
    """
    name: str
    streams: tuple
    utilities: tuple = ()
    dt_min: Fraction = Fraction(10)
    explicit: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))
        object.__setattr__(self, "utilities", tuple(self.utilities))
        object.__setattr__(self, "dt_min", rational(self.dt_min))
        if self.explicit is not None:
            object.__setattr__(self, "explicit", tuple(self.explicit))
        ids = [s.id for s in self.streams] + [u.id for u in self.utilities]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate stream/utility id")
        if not self.streams:
            raise ValidationError("at least one stream is required")
        if self.dt_min < 0:
            raise ValidationError("dt_min must be >= 0")
        if self.explicit is None:
            for s in self.streams:
                if not s.has_temperatures:
                    raise ValidationError(f"stream {s.id} needs temperatures (no explicit loads given)")
        else:
            Cascade(self.explicit)
            known = set(ids)
            for p in self.explicit:
                for k in list(p.hot_loads) + list(p.cold_loads):
                    if k not in known:
                        raise ValidationError(f"interval {p.interval.index}: unknown id {k}")

    @property
    def hot_streams(self):
        return [s for s in self.streams if s.kind == HOT]

    @property
    def cold_streams(self):
        return [s for s in self.streams if s.kind == COLD]

    @property
    def hot_utilities(self):
        return [u for u in self.utilities if u.kind == HOT]

    @property
    def cold_utilities(self):
        return [u for u in self.utilities if u.kind == COLD]

    @property
    def duties_fixed(self) -> bool:
        return self.explicit is not None or all(u.duty is not None for u in self.utilities)

    def table(self) -> IntervalTable:
        return build_intervals(self.streams, self.utilities, self.dt_min)

    def cascade(self, duties: Optional[Mapping] = None) -> Cascade:
        """Interval problems with utility loads in place.

        ``duties`` maps utility id -> duty and overrides the duties stored on
        the utilities; every utility needs a duty from one source or the other.
        """
        if self.explicit is not None:
            return Cascade(self.explicit)
        table = self.table()
        duty = {u.id: u.duty for u in self.utilities}
        duty.update({k: rational(v) for k, v in (duties or {}).items()})
        missing = [k for k, v in duty.items() if v is None]
        if missing:
            raise ValidationError(f"utility duties missing for {missing}; run the LP stage first")
        fcp = {s.id: s.fcp for s in self.streams}
        kinds = {s.id: s.kind for s in self.streams}
        problems = []
        for iv, loads in zip(table.intervals, table.loads):
            hot = {k: v for k, v in loads.items() if kinds[k] == HOT}
            cold = {k: v for k, v in loads.items() if kinds[k] == COLD}
            hu, cu = set(), set()
            for u in self.utilities:
                if table.utility_interval[u.id] == iv.index and duty[u.id] > 0:
                    (hot if u.kind == HOT else cold)[u.id] = duty[u.id]
                    (hu if u.kind == HOT else cu).add(u.id)
            problems.append(IntervalProblem(iv, hot, cold, {}, hu, cu,
                                            {k: fcp[k] for k in loads}))
        return Cascade(problems)


# ---------------------------------------------------------------- verification

@dataclass(frozen=True)
class Violation:
    constraint: str
    magnitude: Fraction

    def __str__(self):
        return f"{self.constraint}: {self.magnitude}"


@dataclass(frozen=True)
class VerificationReport:
    violations: tuple

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.feasible


def verify_solution(model: "MilpModel", x: MatchSolution, tol=0) -> VerificationReport:
    """Check ``x`` against every constraint of ``model``, stated in stream terms.

    This re-derives the constraints from the interval data rather than reading
    the LP rows back, so it doubles as a check on the model builder.
    """
    tol = rational(tol)
    bins = set(model.y_keys)
    if set(x.y) != bins:
        raise StructuralError("solution binaries do not match the model")
    if not set(x.q) <= set(model.q_keys) or not set(x.residuals) <= set(model.residual_keys):
        raise StructuralError("solution indexes variables the model lacks")
    zero = Fraction(0)
    q = {k: rational(x.q.get(k, zero)) for k in model.q_keys}
    r = {k: rational(x.residuals.get(k, zero)) for k in model.residual_keys}
    bad = []

    def check(name, amount):
        if amount > tol:
            bad.append(Violation(name, amount))

    for k, v in x.y.items():
        if v not in (0, 1):
            bad.append(Violation(f"binary{k}", Fraction(min(abs(v), abs(v - 1)))))
    for k, v in q.items():
        check(f"q>=0{k}", -v)
    for k, v in r.items():
        check(f"R>=0{k}", -v)

    if model.scope == "fixed-interval":
        p = model.problem
        t = p.interval.index
        for i in model.hot_ids:
            out = sum((q[(i, j, t)] for j in model.cold_ids if (i, j, t) in q), zero)
            check(f"hot_balance[{i}]", abs(out + r[(i, t)] - p.available(i)))
        for j in model.cold_ids:
            got = sum((q[(i, j, t)] for i in model.hot_ids if (i, j, t) in q), zero)
            check(f"cold_balance[{j}]", abs(got - p.cold_loads[j]))
        for (i, j, tt) in model.prohibited:
            check(f"prohibited[{i},{j}]", abs(q[(i, j, tt)]))
        for key in model.y_keys:
            check(f"bigM{key}", q[key] - model.bigm[key] * x.y[key])
    else:
        _verify_full(model, q, r, x, check)

    objective = sum(int(x.y[k]) for k in model.costed_keys)
    if objective != x.objective:
        bad.append(Violation("objective", Fraction(abs(objective - x.objective))))
    return VerificationReport(tuple(bad))


def _verify_full(model, q, r, x, check):
    zero = Fraction(0)
    inst = model.problem
    periods = [iv.index for iv in inst.intervals]
    last = periods[-1]
    for i in model.hot_ids:
        for t in periods:
            load = inst.hot_load(i, t)
            prev = r.get((i, t - 1), zero)
            out = r.get((i, t), zero)
            if t == last and (i, t) in r:
                check(f"R_T=0[{i}]", abs(out))
            sent = sum((q[(i, j, t)] for j in model.cold_ids if (i, j, t) in q), zero)
            if load or prev or out or sent:
                check(f"hot_balance[{i},{t}]", abs(out - prev + sent - load))
    for j in model.cold_ids:
        for t in periods:
            got = sum((q[(i, j, t)] for i in model.hot_ids if (i, j, t) in q), zero)
            check(f"cold_balance[{j},{t}]", abs(got - inst.cold_load(j, t)))
    for (i, j, t) in model.prohibited:
        check(f"prohibited[{i},{j},{t}]", abs(q[(i, j, t)]))
    for key in model.y_keys:
        i, j, t = key
        if t == 0:
            flow = sum((q[(i, j, s)] for s in periods if (i, j, s) in q), zero)
        else:
            flow = q[key]
        check(f"bigM{key}", flow - model.bigm[key] * x.y[key])
