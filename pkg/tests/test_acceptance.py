"""Acceptance checks, one test per criterion.

Each test records a one-line verdict in ``RESULTS``; the conftest hook prints
them after the run, and running this file directly prints them too.
"""
import math
import os
import random
import sys
import time
from fractions import Fraction as F
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from _gen import planted_problem, random_fixed_problem  # noqa: E402
from hensym import kernels  # noqa: E402
from hensym.core import COLD, HOT, HensInstance, Stream, Utility  # noqa: E402
from hensym.io import load_instance  # noqa: E402
from hensym.milp import (build_fixed_interval_model, count_configurations, enumerate_optima,  # noqa: E402
                         solve_bnb)
from hensym.oracle import exhaustive_optima  # noqa: E402
from hensym.pipeline import RunConfig, run_pipeline  # noqa: E402
from hensym.simplex import min_utility  # noqa: E402
from hensym.symmetry import (BY_FCP, canonical_codes, model_group, pattern_codes,  # noqa: E402
                             symmetry_breaking_constraints, verify_group_action)

DATA = Path(__file__).resolve().parent.parent / "data"
RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    return ok


def test_criterion_1_configuration_count():
    t = time.perf_counter()
    ok = count_configurations(3, 3) == 27
    mismatches = [(n, m) for n in range(1, 5) for m in range(0, 5)
                  if count_configurations(n, m) != kernels.count_one_hot(n, m)]
    dt = time.perf_counter() - t
    passed = ok and not mismatches and dt < 1
    record(1, passed, f"count(3,3)={count_configurations(3, 3)}, brute-force mismatches={mismatches}, {dt:.3f}s")
    assert passed


def test_criterion_2_worst_case_tree():
    t = time.perf_counter()
    from _gen import interval_problem
    m = build_fixed_interval_model(interval_problem([10, 20, 30], [10, 20, 30]))
    res = exhaustive_optima(m)
    dt = time.perf_counter() - t
    passed = m.n_binaries == 9 and res.n_patterns == 512 and dt < 1
    record(2, passed, f"binaries={m.n_binaries}, patterns={res.n_patterns}, {dt:.3f}s")
    assert passed


def test_criterion_3_oracle_equivalence():
    rng = random.Random(20240601)
    t = time.perf_counter()
    bad, optima = [], 0
    for n in range(200):
        m = build_fixed_interval_model(random_fixed_problem(rng))
        oracle = exhaustive_optima(m)
        b = solve_bnb(m)
        e = enumerate_optima(m)
        optima += len(e)
        if b.objective != oracle.objective or e.patterns() != set(oracle.optimal_patterns) or not e.complete:
            bad.append(n)
    dt = time.perf_counter() - t
    passed = not bad and dt < 60
    record(3, passed, f"200 instances, {optima} optima, mismatches={bad}, {dt:.1f}s")
    assert passed


_C4 = []


def _criterion4_instances():
    if not _C4:
        rng = random.Random(4242)
        for _ in range(100):
            p, hs, cs = planted_problem(rng)
            _C4.append((build_fixed_interval_model(p), hs, cs))
    return _C4


def test_criterion_4_group_structure():
    t = time.perf_counter()
    failures = []
    for n, (m, hs, cs) in enumerate(_criterion4_instances()):
        g = model_group(m, BY_FCP)
        expected = math.prod(math.factorial(k) for k in hs + cs)
        opt = enumerate_optima(m)
        rep = verify_group_action(m, g, opt)
        if g.order != expected or not rep.all_pass or not rep.closed or not opt.complete:
            failures.append(n)
    dt = time.perf_counter() - t
    passed = not failures and dt < 60
    record(4, passed, f"100 planted instances, failures={failures}, {dt:.1f}s")
    assert passed


def test_criterion_5_table2_replication():
    details, ok = [], True
    # aggregate of the published loads
    agg = load_instance(DATA / "table2.toml")
    rep = run_pipeline(agg, RunConfig(cap=3))
    model = rep["models"][0]
    ok &= model["delta_r"] == "-2" and any("2 kW" in s for s in rep["notes"])
    ok &= model["solve"]["verified"] and model["binaries"] == 40
    details.append(f"aggregate: 40 binaries, objective {model['solve']['objective']}, "
                   f"enumeration complete={model['enumerate']['complete']} (cap 3)")
    # subnetwork-three analogue
    sub = load_instance(DATA / "table2_subnetwork3.toml")
    rep = run_pipeline(sub, RunConfig())
    m = rep["models"][0]
    classes = {tuple(c["members"]) for c in m["symmetry"]["by_load"]["hot_classes"]
               + m["symmetry"]["by_load"]["cold_classes"]}
    found = {("H1", "H3"), ("C1", "CU")} <= classes
    closed = m["enumerate"]["complete"] and m["symmetry"]["closed"] and m["symmetry"]["action_all_pass"]
    ok &= found and closed and m["symmetry"]["by_load"]["order"] == 4
    details.append(f"subnetwork: classes {sorted(classes)}, order {m['symmetry']['by_load']['order']}, "
                   f"{m['enumerate']['count']} optima closed={closed}")
    # conditional check on the online instance
    online = os.environ.get("HENSYM_V15", str(DATA / "Transshipment_V1_5.toml"))
    if Path(online).exists():
        inst = load_instance(online)
        r = run_pipeline(inst, RunConfig(mode="full", cap=50, sbc=False, stop_after="enumerate"))
        mm = r["models"][0]
        v15 = mm["solve"]["objective"] == 24 and mm["enumerate"]["count"] >= 10
        ok &= v15
        details.append(f"online instance: objective {mm['solve']['objective']}, {mm['enumerate']['count']} optima")
    else:
        details.append("online instance not supplied, conditional check skipped")
    record(5, ok, "; ".join(details))
    assert ok


def test_criterion_6_symmetry_breaking():
    failures, nodes_plain, nodes_sbc, survivors, optima = [], 0, 0, 0, 0
    for n, (m, hs, cs) in enumerate(_criterion4_instances()):
        g = model_group(m, BY_FCP)
        opt = enumerate_optima(m)
        rows = symmetry_breaking_constraints(g, m)
        kept = enumerate_optima(m, extra_rows=rows)
        oracle = exhaustive_optima(m)
        reps = set(canonical_codes(m, g, pattern_codes(m, oracle.optimal_patterns)).tolist())
        got = pattern_codes(m, kept.patterns()).tolist()
        if kept.objective != oracle.objective or sorted(got) != sorted(reps) or not kept.complete:
            failures.append(n)
        nodes_plain += opt.nodes
        nodes_sbc += kept.nodes
        survivors += len(kept)
        optima += len(opt)
    passed = not failures
    record(6, passed, f"failures={failures}; {optima} optima -> {survivors} survivors; "
                      f"enumeration nodes {nodes_plain} without SBC, {nodes_sbc} with")
    assert passed


def cascade_oracle(streams, dt_min):
    """Problem-table fold: surpluses over shifted intervals, cumulative minimum."""
    bounds = set()
    for kind, fcp, a, b in streams:
        s = 0 if kind == HOT else dt_min
        bounds |= {a + s, b + s}
    bounds = sorted(bounds, reverse=True)
    surplus = []
    for hi, lo in zip(bounds, bounds[1:]):
        tot = F(0)
        for kind, fcp, a, b in streams:
            s = 0 if kind == HOT else dt_min
            top, bot = max(a, b) + s, min(a, b) + s
            overlap = max(F(0), min(hi, top) - max(lo, bot))
            tot += fcp * overlap if kind == HOT else -fcp * overlap
        surplus.append(tot)
    run, low = F(0), F(0)
    for s in surplus:
        run += s
        low = min(low, run)
    qh = -low
    qc = qh + sum(surplus)
    residuals, r = [F(0)], qh
    for s in surplus:
        r += s
        residuals.append(r)
    residuals[-1] = F(0) if residuals[-1] == qc else residuals[-1]
    return qh, qc, len(surplus)


def _cascade_instances(n=20, seed=77):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        temps = [F(v) for v in rng.sample(range(20, 200, 5), 4)]
        streams = []
        for k in range(rng.randint(2, 3)):
            kind = HOT if k % 2 == 0 else COLD
            a, b = rng.sample(temps, 2)
            if (kind == HOT) != (a > b):
                a, b = b, a
            streams.append((kind, F(rng.randint(1, 8), rng.choice([1, 2])), a, b))
        dt_min = F(rng.choice([0, 5, 10]))
        qh, qc, nint = cascade_oracle(streams, dt_min)
        if not 2 <= nint <= 4:
            continue
        inst = HensInstance(f"c{len(out)}", [Stream(f"S{k}", kind, f, a, b) for k, (kind, f, a, b) in enumerate(streams)],
                            [Utility("HU", HOT, 300), Utility("CU", COLD, 0)], dt_min)
        out.append((inst, qh, qc))
    return out


def test_criterion_7_lp_stage():
    cases = _cascade_instances()
    t = time.perf_counter()
    bad = []
    for n, (inst, qh, qc) in enumerate(cases):
        d = min_utility(inst)
        if d.hot["HU"] != qh or d.cold["CU"] != qc:
            bad.append(n)
    dt = time.perf_counter() - t
    passed = not bad and dt < 5 and len(cases) == 20
    record(7, passed, f"20 cascades of 2-4 intervals, mismatches={bad}, {dt:.2f}s")
    assert passed


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    for k in sorted(RESULTS):
        print(RESULTS[k])
