"""
Integer kernels behind the exhaustive oracles and orbit closures.

Every kernel has a numba version and a numpy version with the same signature.
The public names dispatch on ``NUMBA_ENABLED``; both variants stay importable so
the benchmark and the tests can compare them directly.

Data given to these kernels is already scaled to int64 (see ``scale_to_int``).
"""
from fractions import Fraction
from math import lcm

import numpy as np

from ._accel import NUMBA_ENABLED, jit_options, njit

ARC_NONE = -1   # arc never usable
ARC_FREE = -2   # arc usable regardless of the pattern

_INT_BUDGET = 2 ** 60


def scale_to_int(*groups):
    """Scale groups of rationals by one common denominator.

    Returns int64 arrays (one per group). Raises OverflowError if the scaled
    values leave the int64 budget.
    """
    values = [Fraction(v) for g in groups for v in g]
    den = 1
    for v in values:
        den = lcm(den, v.denominator)
    total = sum(abs(v) for v in values) * den
    if total >= _INT_BUDGET:
        raise OverflowError("scaled data exceeds int64 budget")
    return [np.array([int(Fraction(v) * den) for v in g], dtype=np.int64) for g in groups]


# ---------------------------------------------------------------- feasibility

@njit(**jit_options())
def _max_flow(cap, source, sink):
    n = cap.shape[0]
    flow = 0
    parent = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    while True:
        for v in range(n):
            parent[v] = -1
        parent[source] = source
        head = 0
        tail = 0
        queue[tail] = source
        tail += 1
        while head < tail and parent[sink] == -1:
            u = queue[head]
            head += 1
            for v in range(n):
                if parent[v] == -1 and cap[u, v] > 0:
                    parent[v] = u
                    queue[tail] = v
                    tail += 1
        if parent[sink] == -1:
            return flow
        push = cap[parent[sink], sink]
        v = sink
        while v != source:
            u = parent[v]
            if cap[u, v] < push:
                push = cap[u, v]
            v = u
        v = sink
        while v != source:
            u = parent[v]
            cap[u, v] -= push
            cap[v, u] += push
            v = u
        flow += push


@njit(**jit_options())
def _feasible_patterns_nb(supply, demand, arc_bin, patterns):
    k_n = supply.shape[0]
    l_n = demand.shape[0]
    n = k_n + l_n + 2
    source = 0
    sink = n - 1
    need = 0
    for l in range(l_n):
        need += demand[l]
    out = np.zeros(patterns.shape[0], dtype=np.bool_)
    cap = np.zeros((n, n), dtype=np.int64)
    for p in range(patterns.shape[0]):
        mask = patterns[p]
        for a in range(n):
            for b in range(n):
                cap[a, b] = 0
        for k in range(k_n):
            cap[source, 1 + k] = supply[k]
        for l in range(l_n):
            cap[1 + k_n + l, sink] = demand[l]
        for k in range(k_n):
            for l in range(l_n):
                b = arc_bin[k, l]
                if b == -2 or (b >= 0 and (mask >> b) & 1):
                    cap[1 + k, 1 + k_n + l] = need
        out[p] = _max_flow(cap, source, sink) == need
    return out


@njit(**jit_options())
def _feasible_patterns_hall_nb(supply, demand, arc_bin, patterns):
    k_n = supply.shape[0]
    l_n = demand.shape[0]
    n_sub = 1 << l_n
    dsum = np.zeros(n_sub, dtype=np.int64)
    for s in range(1, n_sub):
        low = 0
        while not (s >> low) & 1:
            low += 1
        dsum[s] = dsum[s & (s - 1)] + demand[low]
    out = np.zeros(patterns.shape[0], dtype=np.bool_)
    nbr = np.zeros(l_n, dtype=np.int64)
    cover = np.zeros(n_sub, dtype=np.int64)
    for p in range(patterns.shape[0]):
        mask = patterns[p]
        for l in range(l_n):
            m = 0
            for k in range(k_n):
                b = arc_bin[k, l]
                if b == -2 or (b >= 0 and (mask >> b) & 1):
                    m |= 1 << k
            nbr[l] = m
        ok = True
        for s in range(1, n_sub):
            low = 0
            while not (s >> low) & 1:
                low += 1
            c = cover[s & (s - 1)] | nbr[low]
            cover[s] = c
            tot = 0
            for k in range(k_n):
                if (c >> k) & 1:
                    tot += supply[k]
            if tot < dsum[s]:
                ok = False
                break
        out[p] = ok
    return out


def _feasible_patterns_np(supply, demand, arc_bin, patterns, chunk=1 << 12):
    """Hall's condition: every demand subset must be covered by its neighbours."""
    supply = np.asarray(supply, dtype=np.int64)
    demand = np.asarray(demand, dtype=np.int64)
    patterns = np.asarray(patterns, dtype=np.int64)
    k_n, l_n = arc_bin.shape
    if k_n > 62:
        raise OverflowError("too many supply nodes for bitmask kernel")
    n_sub = 1 << l_n
    sub = np.arange(n_sub, dtype=np.int64)
    dsum = np.zeros(n_sub, dtype=np.int64)
    for l in range(l_n):
        dsum += ((sub >> l) & 1) * demand[l]
    out = np.empty(patterns.shape[0], dtype=bool)
    for start in range(0, patterns.shape[0], chunk):
        pats = patterns[start:start + chunk]
        nbr = np.zeros((pats.shape[0], l_n), dtype=np.int64)
        for k in range(k_n):
            for l in range(l_n):
                b = arc_bin[k, l]
                if b == ARC_FREE:
                    nbr[:, l] |= np.int64(1) << k
                elif b >= 0:
                    nbr[:, l] |= ((pats >> b) & 1) << k
        cover = np.zeros((pats.shape[0], n_sub), dtype=np.int64)
        for s in range(1, n_sub):
            low = (s & -s).bit_length() - 1
            cover[:, s] = cover[:, s & (s - 1)] | nbr[:, low]
        ssum = np.zeros_like(cover)
        for k in range(k_n):
            ssum += ((cover >> k) & 1) * supply[k]
        out[start:start + chunk] = np.all(dsum[None, :] <= ssum, axis=1)
    return out


def feasible_patterns_maxflow(supply, demand, arc_bin, patterns):
    """Same answer by one max-flow per pattern; an independent cross-check."""
    return _feasible_patterns_nb(
        np.ascontiguousarray(supply, dtype=np.int64),
        np.ascontiguousarray(demand, dtype=np.int64),
        np.ascontiguousarray(arc_bin, dtype=np.int64),
        np.ascontiguousarray(patterns, dtype=np.int64),
    )


def feasible_patterns_numba(supply, demand, arc_bin, patterns):
    return _feasible_patterns_hall_nb(
        np.ascontiguousarray(supply, dtype=np.int64),
        np.ascontiguousarray(demand, dtype=np.int64),
        np.ascontiguousarray(arc_bin, dtype=np.int64),
        np.ascontiguousarray(patterns, dtype=np.int64),
    )


feasible_patterns_numpy = _feasible_patterns_np


def feasible_patterns(supply, demand, arc_bin, patterns):
    """For each bitmask in ``patterns``, can every demand be met?

    ``arc_bin[k, l]`` names the bit that opens arc k -> l, or ARC_NONE / ARC_FREE.
    Arc capacity is unbounded; supply left over is allowed.
    """
    if NUMBA_ENABLED:
        return feasible_patterns_numba(supply, demand, arc_bin, patterns)
    return feasible_patterns_numpy(supply, demand, arc_bin, patterns)


# ---------------------------------------------------------------- counting

@njit(**jit_options())
def _count_one_hot_nb(n, m):
    count = 0
    for mask in range(1 << (n * m)):
        ok = True
        for j in range(m):
            ones = 0
            for i in range(n):
                ones += (mask >> (i * m + j)) & 1
            if ones != 1:
                ok = False
                break
        if ok:
            count += 1
    return count


def _count_one_hot_np(n, m):
    masks = np.arange(1 << (n * m), dtype=np.int64)
    ok = np.ones(masks.shape[0], dtype=bool)
    for j in range(m):
        ones = np.zeros_like(masks)
        for i in range(n):
            ones += (masks >> (i * m + j)) & 1
        ok &= ones == 1
    return int(ok.sum())


def count_one_hot_numba(n, m):
    return int(_count_one_hot_nb(n, m))


count_one_hot_numpy = _count_one_hot_np


def count_one_hot(n, m):
    """Brute force: n x m 0/1 matrices with exactly one 1 in every column."""
    if n * m > 24:
        raise ValueError("brute force limited to n*m <= 24")
    if NUMBA_ENABLED:
        return count_one_hot_numba(n, m)
    return count_one_hot_numpy(n, m)


# ---------------------------------------------------------------- permutations

@njit(**jit_options())
def _permute_bits_nb(patterns, perm):
    out = np.zeros_like(patterns)
    for p in range(patterns.shape[0]):
        x = patterns[p]
        y = 0
        for k in range(perm.shape[0]):
            if (x >> k) & 1:
                y |= 1 << perm[k]
        out[p] = y
    return out


def _permute_bits_np(patterns, perm):
    patterns = np.asarray(patterns, dtype=np.int64)
    out = np.zeros_like(patterns)
    for k, target in enumerate(perm):
        out |= ((patterns >> k) & 1) << int(target)
    return out


def permute_bits_numba(patterns, perm):
    return _permute_bits_nb(np.ascontiguousarray(patterns, dtype=np.int64),
                            np.ascontiguousarray(perm, dtype=np.int64))


permute_bits_numpy = _permute_bits_np


def permute_bits(patterns, perm):
    """Move bit k of every pattern to bit ``perm[k]``."""
    if NUMBA_ENABLED:
        return permute_bits_numba(patterns, perm)
    return permute_bits_numpy(patterns, perm)


def popcount(patterns):
    patterns = np.asarray(patterns, dtype=np.int64)
    out = np.zeros_like(patterns)
    for k in range(63):
        out += (patterns >> k) & 1
    return out
