"""Exhaustive enumeration of binary patterns, checked by integer max-flow.

With the binaries fixed, a transshipment model is a pure flow problem (the
big-M bounds never bind), so a pattern is feasible exactly when the flow
network it opens can meet every demand. This gives an answer that does not go
through the simplex code at all.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .milp import FIXED, MilpModel


@dataclass(frozen=True)
class OracleResult:
    objective: int            # None when no pattern is feasible
    optimal_patterns: frozenset
    n_patterns: int
    n_feasible: int


def flow_network(model: MilpModel):
    """Supplies, demands and the bit controlling each arc, as int64 arrays."""
    bit = {k: b for b, k in enumerate(model.y_keys)}
    q = set(model.q_keys)
    prohibited = set(model.prohibited)
    if model.scope == FIXED:
        p = model.problem
        t = p.interval.index
        sup_nodes = [(i, t) for i in model.hot_ids]
        dem_nodes = [(j, t) for j in model.cold_ids]
        supply = [p.available(i) for i in model.hot_ids]
        demand = [p.cold_loads[j] for j in model.cold_ids]
    else:
        c = model.problem
        T = len(c.problems)
        sup_nodes = [(i, t) for i in model.hot_ids for t in range(1, T + 1) if c.hot_load(i, t) > 0]
        dem_nodes = [(j, t) for j in model.cold_ids for t in range(1, T + 1) if c.cold_load(j, t) > 0]
        supply = [c.hot_load(i, t) for i, t in sup_nodes]
        demand = [c.cold_load(j, t) for j, t in dem_nodes]
    arc = np.full((len(sup_nodes), len(dem_nodes)), kernels.ARC_NONE, dtype=np.int64)
    for a, (i, s) in enumerate(sup_nodes):
        for b_, (j, t) in enumerate(dem_nodes):
            if t < s or (i, j, t) not in q or (i, j, t) in prohibited:
                continue
            key = (i, j, t) if (i, j, t) in bit else (i, j, 0)
            arc[a, b_] = bit.get(key, kernels.ARC_FREE)
    sup, dem = kernels.scale_to_int(supply, demand)
    return sup, dem, arc


def exhaustive_optima(model: MilpModel, max_bits: int = 22) -> OracleResult:
    """Try all 2**n binary patterns; keep the feasible ones of least weight."""
    n = model.n_binaries
    if n > max_bits:
        raise ValueError(f"{n} binaries exceed the exhaustive limit of {max_bits}")
    sup, dem, arc = flow_network(model)
    patterns = np.arange(1 << n, dtype=np.int64)
    if model.scope != FIXED and sup.sum() != dem.sum():
        ok = np.zeros(patterns.shape[0], dtype=bool)
    else:
        ok = kernels.feasible_patterns(sup, dem, arc, patterns)
    feasible = patterns[ok]
    if feasible.size == 0:
        return OracleResult(None, frozenset(), int(patterns.size), 0)
    costed = [b for b, k in enumerate(model.y_keys) if k in set(model.costed_keys)]
    cmask = np.int64(sum(1 << b for b in costed))
    weight = kernels.popcount(feasible & cmask)
    best = int(weight.min())
    opt = feasible[weight == best]
    keys = model.y_keys
    pats = frozenset(frozenset(keys[b] for b in range(n) if (int(p) >> b) & 1) for p in opt)
    return OracleResult(best, pats, int(patterns.size), int(feasible.size))
