"""Sequential run: utility LP, match MILP, optimum enumeration, symmetry analysis.

``run_pipeline`` returns one report (a plain dict of strings, ints, bools,
lists and dicts). Every exact number in it is rendered as a string once, so the
text and JSON renderings show the same digits.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .core import HensError, HensInstance, IntervalProblem, ValidationError, verify_solution
from .milp import (FIXED, FULL, PAIR, PER_INTERVAL, MilpModel,
                   build_fixed_interval_model, build_full_model, enumerate_optima, solve_bnb)
from .simplex import InfeasibleError, min_utility
from .symmetry import (BY_FCP, BY_LOAD, build_group, canonical_codes, equivalence_classes,
                       model_classes, pattern_codes, sbc_exact, symmetry_breaking_constraints,
                       verify_group_action)

TEXT = "text"
JSON = "json"

STAGES = ("lp", "model", "solve", "enumerate", "symmetry", "sbc")

SLACK_RESIDUAL = "residual"
SLACK_SCALE_CU = "scale-cu"
SLACK_NONE = "none"


@dataclass(frozen=True)
class RunConfig:
    mode: str = FIXED
    dt_min: Optional[Fraction] = None      # None: take the instance's value
    cap: int = 1000
    sbc: bool = True
    epsilon: bool = False
    format: str = TEXT
    seed: int = 0
    match_index: str = PAIR
    node_limit: int = 10 ** 6
    count_utility_matches: bool = True
    stop_after: str = "sbc"
    slack: str = SLACK_RESIDUAL

    def __post_init__(self):
        if self.mode not in (FIXED, FULL):
            raise ValueError(f"mode must be {FIXED!r} or {FULL!r}")
        if self.cap < 1:
            raise ValueError("cap must be at least 1")
        if self.dt_min is not None and Fraction(self.dt_min) < 0:
            raise ValueError("dt_min must be >= 0")
        if self.format not in (TEXT, JSON):
            raise ValueError(f"format must be {TEXT!r} or {JSON!r}")
        if self.match_index not in (PAIR, PER_INTERVAL):
            raise ValueError(f"match_index must be {PAIR!r} or {PER_INTERVAL!r}")
        if self.slack not in (SLACK_RESIDUAL, SLACK_SCALE_CU, SLACK_NONE):
            raise ValueError(f"unknown slack mode {self.slack!r}")
        if self.stop_after not in STAGES:
            raise ValueError(f"stop_after must be one of {STAGES}")


class StageError(HensError):
    """Failure of one pipeline stage; ``cause`` is the original exception."""

    def __init__(self, stage, cause, report=None):
        self.stage, self.cause, self.report = stage, cause, report
        super().__init__(f"stage {stage}: {cause}")


def num(v) -> str:
    return str(Fraction(v))


def _pattern(p) -> list:
    return sorted(f"{i}-{j}" if t == 0 else f"{i}-{j}@{t}" for i, j, t in p)


def _classes(classes) -> list:
    return [{"side": c.side, "members": list(c.members),
             "key": [num(v) for v in c.key] if isinstance(c.key, tuple) else (None if c.key is None else num(c.key))}
            for c in classes]


def _group(g) -> dict:
    return {"order": g.order, "generators": [list(x) for x in g.generators],
            "hot_classes": _classes(g.hot_classes), "cold_classes": _classes(g.cold_classes)}


def _solution(s) -> dict:
    return {"objective": s.objective, "matches": _pattern(s.pattern()),
            "q": {f"{i}-{j}@{t}": num(v) for (i, j, t), v in sorted(s.q.items()) if v}}


def _runs(config, stage):
    return STAGES.index(stage) <= STAGES.index(config.stop_after)


def _analyse(model: MilpModel, config: RunConfig, label: str, report: dict):
    """MILP stages for one model; appends to ``report['models']``.

    Returns the first optimum found (None when the stages stop before it).
    """
    best = None
    out = {"label": label, "scope": model.scope, "binaries": model.n_binaries,
           "hot": list(model.hot_ids), "cold": list(model.cold_ids)}
    report["models"].append(out)
    if model.scope == FIXED:
        p = model.problem
        out["delta_r"] = num(p.delta_r)
        if p.entering_residuals:
            out["entering"] = {k: num(v) for k, v in p.entering_residuals.items()}
    if not _runs(config, "solve"):
        return best
    stage = "solve"
    try:
        t0 = time.perf_counter()
        res = solve_bnb(model, node_limit=config.node_limit)
        out["solve"] = {"status": res.status, "nodes": res.nodes,
                        "root_bound": None if res.root_bound is None else num(res.root_bound),
                        "seconds": f"{time.perf_counter() - t0:.3f}"}
        if not res.optimal:
            raise InfeasibleError(f"{label}: no feasible match pattern")
        out["solve"]["objective"] = res.objective
        out["solve"]["solution"] = _solution(res.solution)
        out["solve"]["verified"] = verify_solution(model, res.solution, 0).feasible
        best = res.solution
        if not _runs(config, "enumerate"):
            return best
        stage = "enumerate"
        opt = enumerate_optima(model, cap=config.cap, node_limit=config.node_limit, first=res)
        out["enumerate"] = {"objective": opt.objective, "count": len(opt), "complete": opt.complete,
                            "nodes": opt.nodes, "seconds": f"{opt.elapsed:.3f}",
                            "patterns": [_pattern(s.pattern()) for s in opt.solutions]}
        if not _runs(config, "symmetry"):
            return best
        stage = "symmetry"
        local = {}
        for mode in (BY_LOAD, BY_FCP):
            hot, cold = model_classes(model, mode, config.epsilon)
            local[mode] = build_group(hot, cold)
        group = local[BY_LOAD]
        action = verify_group_action(model, group, opt)
        out["symmetry"] = {
            "by_load": _group(group), "by_fcp": _group(local[BY_FCP]),
            "verified_group": BY_LOAD,
            "action_checks": len(action.checks), "action_all_pass": action.all_pass,
            "closed": action.closed,
            "missing_images": [[sols_i, list(gen), _pattern(p)] for sols_i, gen, p in action.missing],
            "orbits": [list(o) for o in action.orbits],
        }
        if not (_runs(config, "sbc") and config.sbc):
            return best
        stage = "sbc"
        rows = symmetry_breaking_constraints(group, model)
        t0 = time.perf_counter()
        if rows:
            first_sbc = solve_bnb(model, rows, node_limit=config.node_limit)
            kept = enumerate_optima(model, cap=config.cap, extra_rows=rows, node_limit=config.node_limit,
                                    first=first_sbc)
            first_nodes = first_sbc.nodes
        else:
            kept, first_nodes = opt, res.nodes       # nothing to break
        sbc = {"rows": len(rows), "exact": sbc_exact(group), "objective": kept.objective,
               "survivors": len(kept), "complete": kept.complete, "nodes": kept.nodes,
               "first_solve_nodes": first_nodes,
               "seconds": f"{time.perf_counter() - t0:.3f}",
               "patterns": [_pattern(s.pattern()) for s in kept.solutions],
               "rows_listing": [_row(model, r) for r in rows]}
        if opt.complete and kept.complete and model.n_binaries <= 62 and group.order <= 10 ** 4:
            canon = set(canonical_codes(model, group, pattern_codes(model, opt.patterns())).tolist())
            sbc["one_per_orbit"] = set(pattern_codes(model, kept.patterns()).tolist()) == canon
        out["sbc"] = sbc
        return best
    except (HensError, AssertionError) as exc:
        raise StageError(stage, exc, report) from exc


def close_gap(p: IntervalProblem, mode: str):
    """Cover a supply shortfall of an interval nothing flows into.

    ``residual`` lets the missing heat enter with the first hot utility (or
    the first hot stream when there is none); ``scale-cu`` lowers the last cold
    utility's load. Returns the new problem and a note, or (p, None).
    """
    gap = -(p.delta_r + p.entering_total)
    if gap <= 0 or mode == SLACK_NONE:
        return p, None
    if mode == SLACK_RESIDUAL:
        hot_ids = [i for i in p.hot_ids if p.is_hot_utility(i)] or p.hot_ids
        if not hot_ids:
            return p, None
        carrier = hot_ids[0]
        ent = dict(p.entering_residuals)
        ent[carrier] = ent.get(carrier, Fraction(0)) + gap
        new = IntervalProblem(p.interval, p.hot_loads, p.cold_loads, ent, p.hot_utilities,
                              p.cold_utilities, p.fcp)
        return new, f"{num(gap)} kW enters with {carrier} as a residual"
    cus = [j for j in p.cold_ids if p.is_cold_utility(j)]
    if not cus or p.cold_loads[cus[-1]] < gap:
        raise ValidationError(f"interval {p.interval.index}: no cold utility load to scale by {num(gap)} kW")
    cold = dict(p.cold_loads)
    cold[cus[-1]] -= gap
    new = IntervalProblem(p.interval, p.hot_loads, cold, p.entering_residuals, p.hot_utilities,
                          p.cold_utilities, p.fcp)
    return new, f"{cus[-1]} scaled from {num(p.cold_loads[cus[-1]])} kW to {num(cold[cus[-1]])} kW"


def _row(model, row) -> str:
    names = model.lp.names
    terms = " ".join(f"{'+' if c > 0 else '-'} {num(abs(c))}*{names[k]}" for k, c in sorted(row.coeffs.items()))
    return f"{row.name}: {terms} {row.relation} {num(row.rhs)}"


def run_pipeline(instance: HensInstance, config: RunConfig = RunConfig()) -> dict:
    """Run every stage up to ``config.stop_after`` and return the report.

    A failing stage raises StageError carrying the partial report.
    """
    start = time.perf_counter()
    if config.dt_min is not None:
        instance = replace(instance, dt_min=Fraction(config.dt_min))
    report = {"instance": instance.name, "config": {
        "mode": config.mode, "dt_min": num(instance.dt_min), "cap": config.cap, "sbc": config.sbc,
        "epsilon": config.epsilon, "seed": config.seed, "match_index": config.match_index,
        "slack": config.slack},
        "notes": [], "lp": None, "models": []}

    stage = "lp"
    try:
        if instance.duties_fixed:
            duties = None
            report["lp"] = {"skipped": True, "duties": {u.id: num(u.duty) for u in instance.utilities
                                                         if u.duty is not None}}
        else:
            t0 = time.perf_counter()
            lp = min_utility(instance)
            duties = lp.duties
            report["lp"] = {"skipped": False, "duties": {k: num(v) for k, v in duties.items()},
                            "residuals": [num(v) for v in lp.residuals], "cost": num(lp.cost),
                            "seconds": f"{time.perf_counter() - t0:.3f}"}
        cascade = instance.cascade(duties)
        for p in cascade.problems:
            if p.entering_residuals:
                report["notes"].append(
                    f"interval {p.interval.index}: residual change {num(p.delta_r)} kW; entering residuals "
                    + ", ".join(f"{k} = {num(v)} kW" for k, v in p.entering_residuals.items()))
        if not _runs(config, "model"):
            return report
        stage = "model"
        models = []
        if config.mode == FULL:
            if any(p.entering_residuals for p in cascade.problems):
                raise ValidationError("entering residuals are only meaningful in fixed-interval mode")
            models.append(("network", build_full_model(cascade, config.match_index,
                                                       config.count_utility_matches)))
            for label, m in models:
                _analyse(m, config, label, report)
        else:
            carried = {}
            for n, p in enumerate(cascade.problems):
                if n == 0 or not carried:
                    gap = -(p.delta_r + p.entering_total)
                    if gap > 0:
                        before = p.delta_r
                        p, how = close_gap(p, config.slack)
                        report["notes"].append(
                            f"interval {p.interval.index}: supply falls {num(gap)} kW short of demand "
                            f"(residual change {num(before)} kW); slack {config.slack}"
                            + (f": {how}" if how else ""))
                if not p.entering_residuals and carried:
                    p = IntervalProblem(p.interval, p.hot_loads, p.cold_loads,
                                        {k: v for k, v in carried.items() if k in p.hot_loads and v},
                                        p.hot_utilities, p.cold_utilities, p.fcp)
                    lost = {k: v for k, v in carried.items() if k not in p.hot_loads and v}
                    if lost:
                        # a stream with no load here still carries heat down
                        hot = dict(p.hot_loads)
                        hot.update({k: Fraction(0) for k in lost})
                        ent = dict(p.entering_residuals)
                        ent.update(lost)
                        p = IntervalProblem(p.interval, hot, p.cold_loads, ent, p.hot_utilities,
                                            p.cold_utilities, p.fcp)
                stage = "model"
                m = build_fixed_interval_model(p, config.count_utility_matches)
                sol = _analyse(m, config, f"interval {p.interval.index}", report)
                carried = {} if sol is None else {i: v for (i, _), v in sol.residuals.items()}
        # global capacity classes, for comparison with the interval-local ones
        stage = "symmetry"
        if _runs(config, "symmetry"):
            fcp_hot = {s.id: s.fcp for s in instance.hot_streams}
            fcp_cold = {s.id: s.fcp for s in instance.cold_streams}
            report["global_classes"] = _classes(equivalence_classes(fcp_hot, "hot", BY_FCP, epsilon=config.epsilon)
                                                + equivalence_classes(fcp_cold, "cold", BY_FCP,
                                                                      epsilon=config.epsilon))
    except StageError:
        raise
    except (HensError, AssertionError) as exc:
        raise StageError(stage, exc, report) from exc
    report["seconds"] = f"{time.perf_counter() - start:.3f}"
    return report


# ---------------------------------------------------------------- rendering

def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False)


def render_text(report: dict) -> str:
    lines = []

    def walk(v, indent, label):
        pad = "  " * indent
        if isinstance(v, dict):
            lines.append(f"{pad}{label}:")
            for k, x in v.items():
                walk(x, indent + 1, k)
        elif isinstance(v, list) and any(isinstance(x, (dict, list)) for x in v):
            lines.append(f"{pad}{label}:")
            for n, x in enumerate(v):
                walk(x, indent + 1, f"[{n}]")
        elif isinstance(v, list):
            lines.append(f"{pad}{label}: " + ", ".join(_scalar(x) for x in v))
        else:
            lines.append(f"{pad}{label}: {_scalar(v)}")

    for k, v in report.items():
        walk(v, 0, k)
    return "\n".join(lines) + "\n"


def _scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)


def render(report: dict, fmt: str = TEXT) -> str:
    return render_json(report) if fmt == JSON else render_text(report)
