"""Instance files (TOML) with exact rational values.

Numbers may be TOML integers, TOML floats (read from their decimal text, never
through binary floating point) or strings holding an integer, a decimal or a
fraction such as ``"17/3"``.

Schema::

    name = "demo"
    dt_min = 10                      # optional, default 10

    [[stream]]
    id = "H1"
    kind = "hot"                     # hot | cold
    fcp = 2.5
    t_in = 400                       # t_in/t_out optional when intervals are given
    t_out = 320

    [[utility]]
    id = "HU"
    kind = "hot"
    temperature = 500                # optional
    duty = 110                       # optional; fixed when present
    cost = 1                         # optional, default 1

    [[interval]]                     # optional: explicit interval loads
    index = 1
    t_hi = 400                       # optional, with t_lo / delta_t
    t_lo = 380
    hot = { H1 = 50, HU = 110 }      # utility loads included
    cold = { C1 = 160 }
    entering = { H1 = 0 }            # optional entering residuals
"""
from __future__ import annotations

import re
from fractions import Fraction

try:
    import tomllib as _toml
except ModuleNotFoundError:         # Python < 3.11
    import tomli as _toml

from .core import (COLD, HOT, HensError, HensInstance, IntervalProblem, Stream, TemperatureInterval,
                   Utility, ValidationError, rational)


class ParseError(HensError, ValueError):
    """Malformed input; ``line`` (1-based) and ``field`` locate it when known."""

    def __init__(self, message, line=None, field=None):
        self.line, self.field = line, field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


_TOP = {"name", "dt_min", "stream", "utility", "interval"}
_STREAM = {"id", "kind", "fcp", "t_in", "t_out"}
_UTILITY = {"id", "kind", "temperature", "duty", "cost"}
_INTERVAL = {"index", "t_hi", "t_lo", "delta_t", "hot", "cold", "entering"}


class _Locator:
    """Best-effort line numbers for fields of array-of-table entries."""

    def __init__(self, text):
        self.lines = text.splitlines()

    def header(self, table, n):
        pat = re.compile(r"^\s*\[\[\s*" + re.escape(table) + r"\s*\]\]")
        hits = [k for k, s in enumerate(self.lines) if pat.match(s)]
        return hits[n] if n < len(hits) else None

    def find(self, table, n, key):
        if table is None:
            start, stop = 0, len(self.lines)
        else:
            start = self.header(table, n)
            if start is None:
                return None
            stop = len(self.lines)
            for k in range(start + 1, len(self.lines)):
                if re.match(r"^\s*\[", self.lines[k]):
                    stop = k
                    break
        pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
        for k in range(start, stop):
            if pat.match(self.lines[k]):
                return k + 1
        return None if table is None else start + 1


def _number(value, where, loc):
    if isinstance(value, bool) or not isinstance(value, (int, str, Fraction)):
        raise ParseError(f"expected a number, got {value!r}", loc(), where)
    try:
        return rational(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ParseError(f"not a rational number: {value!r}", loc(), where) from None


def parse_instance(text: str) -> HensInstance:
    """Read an instance from TOML text."""
    if not text.strip():
        raise ParseError("empty instance file", 1)
    try:
        doc = _toml.loads(text, parse_float=Fraction)
    except _toml.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"invalid TOML: {exc}", int(m.group(1)) if m else None) from None
    except (ValueError, ArithmeticError) as exc:      # inf / nan floats
        raise ParseError(f"not a finite rational number: {exc}") from None
    where = _Locator(text)

    def unknown(keys, allowed, table, n, prefix):
        for k in keys:
            if k not in allowed:
                raise ParseError(f"unknown field {k!r}", where.find(table, n, k), f"{prefix}.{k}" if prefix else k)

    unknown(doc, _TOP, None, 0, "")
    name = doc.get("name", "instance")
    if not isinstance(name, str):
        raise ParseError("name must be a string", where.find(None, 0, "name"), "name")

    def get(entry, table, n, key, required=True, kind="number"):
        path = f"{table}[{n}].{key}"
        if key not in entry:
            if required:
                raise ParseError(f"missing field {key!r}", where.header(table, n) + 1
                                 if where.header(table, n) is not None else None, path)
            return None
        v = entry[key]
        if kind == "number":
            return _number(v, path, lambda: where.find(table, n, key))
        if kind == "str" and not isinstance(v, str):
            raise ParseError(f"expected a string, got {v!r}", where.find(table, n, key), path)
        return v

    try:
        dt_min = _number(doc["dt_min"], "dt_min", lambda: where.find(None, 0, "dt_min")) \
            if "dt_min" in doc else Fraction(10)
        streams = []
        for n, e in enumerate(_entries(doc, "stream")):
            unknown(e, _STREAM, "stream", n, f"stream[{n}]")
            streams.append(Stream(get(e, "stream", n, "id", kind="str"), get(e, "stream", n, "kind", kind="str"),
                                  get(e, "stream", n, "fcp"), get(e, "stream", n, "t_in", False),
                                  get(e, "stream", n, "t_out", False)))
        utilities = []
        for n, e in enumerate(_entries(doc, "utility")):
            unknown(e, _UTILITY, "utility", n, f"utility[{n}]")
            cost = get(e, "utility", n, "cost", False)
            utilities.append(Utility(get(e, "utility", n, "id", kind="str"), get(e, "utility", n, "kind", kind="str"),
                                     get(e, "utility", n, "temperature", False), get(e, "utility", n, "duty", False),
                                     Fraction(1) if cost is None else cost))
        kinds = {s.id: s.kind for s in streams}
        kinds.update({u.id: u.kind for u in utilities})
        util_ids = {u.id for u in utilities}
        explicit = None
        if "interval" in doc:
            explicit = []
            for n, e in enumerate(_entries(doc, "interval")):
                unknown(e, _INTERVAL, "interval", n, f"interval[{n}]")
                idx = get(e, "interval", n, "index")
                if idx.denominator != 1:
                    raise ParseError("index must be an integer", where.find("interval", n, "index"),
                                     f"interval[{n}].index")
                iv = TemperatureInterval(int(idx), get(e, "interval", n, "t_hi", False),
                                         get(e, "interval", n, "t_lo", False),
                                         get(e, "interval", n, "delta_t", False))
                loads = {}
                for side in ("hot", "cold", "entering"):
                    table = get(e, "interval", n, side, side != "entering", kind="table") or {}
                    if not isinstance(table, dict):
                        raise ParseError("expected a table of id = load", where.find("interval", n, side),
                                         f"interval[{n}].{side}")
                    loads[side] = {k: _number(v, f"interval[{n}].{side}.{k}", lambda: where.find("interval", n, side))
                                   for k, v in table.items()}
                    for k in table:
                        expect = COLD if side == "cold" else HOT
                        if kinds.get(k) != expect:
                            raise ParseError(f"{k!r} is not a known {expect} stream or utility",
                                             where.find("interval", n, side), f"interval[{n}].{side}.{k}")
                fcp = {s.id: s.fcp for s in streams
                       if s.id in loads["hot"] or s.id in loads["cold"]}
                explicit.append(IntervalProblem(iv, loads["hot"], loads["cold"], loads["entering"],
                                                {k for k in loads["hot"] if k in util_ids},
                                                {k for k in loads["cold"] if k in util_ids}, fcp))
        return HensInstance(name, streams, utilities, dt_min, explicit)
    except ParseError:
        raise
    except ValidationError:
        raise
    except HensError as exc:
        raise ValidationError(str(exc)) from exc


def _entries(doc, key):
    v = doc.get(key, [])
    if not isinstance(v, list) or not all(isinstance(e, dict) for e in v):
        raise ParseError(f"{key} must be an array of tables ([[{key}]])", None, key)
    return v


def load_instance(path) -> HensInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------- emitting

def format_number(v) -> str:
    """Integers bare, everything else as a quoted exact fraction."""
    v = rational(v)
    return str(v.numerator) if v.denominator == 1 else f'"{v}"'


def _str(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _key(k) -> str:
    return k if re.fullmatch(r"[A-Za-z0-9_-]+", k) else _str(k)


def emit_instance(inst: HensInstance) -> str:
    """TOML text that parses back to an equal instance."""
    out = [f"name = {_str(inst.name)}", f"dt_min = {format_number(inst.dt_min)}"]
    for s in inst.streams:
        out += ["", "[[stream]]", f"id = {_str(s.id)}", f"kind = {_str(s.kind)}", f"fcp = {format_number(s.fcp)}"]
        if s.t_in is not None:
            out += [f"t_in = {format_number(s.t_in)}", f"t_out = {format_number(s.t_out)}"]
    for u in inst.utilities:
        out += ["", "[[utility]]", f"id = {_str(u.id)}", f"kind = {_str(u.kind)}"]
        if u.temperature is not None:
            out.append(f"temperature = {format_number(u.temperature)}")
        if u.duty is not None:
            out.append(f"duty = {format_number(u.duty)}")
        out.append(f"cost = {format_number(u.cost)}")
    for p in inst.explicit or ():
        iv = p.interval
        out += ["", "[[interval]]", f"index = {iv.index}"]
        if iv.t_hi is not None:
            out.append(f"t_hi = {format_number(iv.t_hi)}")
        if iv.t_lo is not None:
            out.append(f"t_lo = {format_number(iv.t_lo)}")
        if iv.delta_t is not None and (iv.t_hi is None or iv.t_lo is None):
            out.append(f"delta_t = {format_number(iv.delta_t)}")
        for side, loads in (("hot", p.hot_loads), ("cold", p.cold_loads), ("entering", p.entering_residuals)):
            if side == "entering" and not loads:
                continue
            body = ", ".join(f"{_key(k)} = {format_number(v)}" for k, v in loads.items())
            out.append(f"{side} = {{ {body} }}" if body else f"{side} = {{}}")
    return "\n".join(out) + "\n"
