"""Stream equivalence classes and the symmetry group they generate.

Streams on one side with the same key (capacity or interval load) can be
relabelled without changing feasibility, objective or residual change. The
group is the direct product of one symmetric group per class. Elements act on
solutions by renaming the hot and cold indices of every variable.

Orders on solutions use the model's ``y_keys`` order (row-major over hot then
cold streams). The canonical member of an orbit is the one whose binary vector
is lexicographically largest, matches before non-matches, ties broken by the
heat loads in ``q_keys`` order the same way.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .core import COLD, HOT, HensError, MatchSolution, StructuralError, rational, verify_solution
from .milp import FIXED, MilpModel, OptimaSet
from .simplex import GE, Row

BY_FCP = "by-fcp"
BY_LOAD = "by-interval-load"
EPSILON = Fraction(1, 10 ** 9)
ORDER_BOUND = 10 ** 4
WEIGHT_BITS = 4096


class GroupError(HensError):
    pass


class WeightBudgetError(HensError):
    pass


@dataclass(frozen=True)
class StreamClass:
    side: str
    members: tuple
    key: object

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.side not in (HOT, COLD):
            raise StructuralError(f"bad side {self.side!r}")
        if not self.members:
            raise StructuralError("empty class")

    def __len__(self):
        return len(self.members)

    @property
    def trivial(self) -> bool:
        return len(self.members) == 1


def _close(a, b, epsilon) -> bool:
    if a == b:
        return True
    if not epsilon or a is None or b is None or isinstance(a, tuple) or isinstance(b, tuple):
        return False
    return abs(a - b) <= EPSILON * max(abs(a), abs(b))


def equivalence_classes(keys: Mapping, side: str, mode: str = BY_FCP, utilities: Iterable = (),
                        signature: Optional[Mapping] = None, epsilon: bool = False) -> list:
    """Partition ``keys`` (id -> key) into classes of equal key.

    Ids in ``utilities`` only join classes in by-interval-load mode. A
    ``signature`` (id -> hashable) splits classes further: members must agree
    on it too. A key of None never matches anything. With ``epsilon`` on,
    scalar keys within a relative 1e-9 of a neighbour are merged (chained in
    sorted order); the class key is then its first member's key.
    Classes come out in order of their first member.
    """
    if mode not in (BY_FCP, BY_LOAD):
        raise ValueError(f"unknown mode {mode!r}")
    util = set(utilities)
    sig = signature or {}
    ids = list(keys)
    groups = {}                       # (signature, canonical key) -> members
    singles = []
    for sid in ids:
        k = keys[sid]
        if k is None or (mode == BY_FCP and sid in util):
            singles.append(sid)
            continue
        k = tuple(rational(v) for v in k) if isinstance(k, tuple) else rational(k)
        groups.setdefault((sig.get(sid), k), []).append(sid)
    if epsilon:
        merged = {}
        by_sig = {}
        for (s, k), members in groups.items():
            by_sig.setdefault(s, []).append((k, members))
        for s, entries in by_sig.items():
            scalar = sorted((e for e in entries if not isinstance(e[0], tuple)), key=lambda e: e[0])
            chain = None
            for k, members in scalar:
                if chain is not None and _close(chain[1], k, True):
                    merged[chain[0]].extend(members)
                    chain = (chain[0], k)
                else:
                    merged[(s, k)] = list(members)
                    chain = ((s, k), k)
            for k, members in entries:
                if isinstance(k, tuple):
                    merged[(s, k)] = list(members)
        groups = merged
    pos = {sid: n for n, sid in enumerate(ids)}
    out = []
    for (_, k), members in groups.items():
        members = sorted(members, key=pos.__getitem__)
        key = keys[members[0]]
        out.append(StreamClass(side, members, key if not isinstance(key, tuple) else k))
    for sid in singles:
        out.append(StreamClass(side, (sid,), keys[sid]))
    out.sort(key=lambda c: pos[c.members[0]])
    return out


# ---------------------------------------------------------------- group

@dataclass(frozen=True)
class GroupElement:
    """A relabelling: ``hot`` and ``cold`` map ids to ids (missing = fixed)."""
    hot: Mapping = field(default_factory=dict)
    cold: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "hot", {a: b for a, b in dict(self.hot).items() if a != b})
        object.__setattr__(self, "cold", {a: b for a, b in dict(self.cold).items() if a != b})

    def h(self, i):
        return self.hot.get(i, i)

    def c(self, j):
        return self.cold.get(j, j)

    def then(self, other: "GroupElement") -> "GroupElement":
        """Apply self, then other."""
        hot = {i: other.h(self.h(i)) for i in set(self.hot) | set(other.hot)}
        cold = {j: other.c(self.c(j)) for j in set(self.cold) | set(other.cold)}
        return GroupElement(hot, cold)

    def inverse(self) -> "GroupElement":
        return GroupElement({b: a for a, b in self.hot.items()}, {b: a for a, b in self.cold.items()})

    def key(self):
        return (tuple(sorted(self.hot.items())), tuple(sorted(self.cold.items())))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, GroupElement) and self.key() == other.key()

    @property
    def is_identity(self) -> bool:
        return not self.hot and not self.cold


IDENTITY = GroupElement()


@dataclass(frozen=True)
class SymmetryGroup:
    hot_classes: tuple
    cold_classes: tuple
    generators: tuple         # (side, a, b) transpositions
    order: int

    @property
    def classes(self) -> tuple:
        return self.hot_classes + self.cold_classes

    @property
    def trivial(self) -> bool:
        return self.order == 1

    def generator_elements(self) -> tuple:
        return tuple(_transposition(*g) for g in self.generators)

    def element(self, word: Sequence[int] = ()) -> GroupElement:
        """Compose generators by index, left to right."""
        g = IDENTITY
        gens = self.generator_elements()
        for k in word:
            g = g.then(gens[k])
        return g

    def contains(self, g: GroupElement) -> bool:
        for side, mapping in ((HOT, g.hot), (COLD, g.cold)):
            cls = {m: n for n, c in enumerate(self.hot_classes if side == HOT else self.cold_classes)
                   for m in c.members}
            if set(mapping.values()) != set(mapping):
                return False
            for a, b in mapping.items():
                if a not in cls or b not in cls or cls[a] != cls[b]:
                    return False
        return True

    def elements(self, bound: int = ORDER_BOUND) -> list:
        """Every element, as a direct product of per-class permutations."""
        if self.order > bound:
            raise GroupError(f"group order {self.order} exceeds enumeration bound {bound}")
        factors = []
        for c in self.classes:
            if c.trivial:
                continue
            factors.append([(c.side, dict(zip(c.members, p))) for p in itertools.permutations(c.members)])
        out = []
        for combo in itertools.product(*factors):
            hot, cold = {}, {}
            for side, m in combo:
                (hot if side == HOT else cold).update(m)
            out.append(GroupElement(hot, cold))
        return out

    def closure(self, bound: int = ORDER_BOUND) -> set:
        """Elements reached from the identity by generator products (BFS)."""
        gens = self.generator_elements()
        seen = {IDENTITY}
        queue = deque([IDENTITY])
        while queue:
            g = queue.popleft()
            for s in gens:
                h = g.then(s)
                if h not in seen:
                    if len(seen) >= bound:
                        raise GroupError(f"closure exceeds bound {bound}")
                    seen.add(h)
                    queue.append(h)
        return seen


def _transposition(side, a, b) -> GroupElement:
    m = {a: b, b: a}
    return GroupElement(m, {}) if side == HOT else GroupElement({}, m)


def build_group(hot_classes: Sequence[StreamClass], cold_classes: Sequence[StreamClass]) -> SymmetryGroup:
    """Direct product of the symmetric groups of the given classes."""
    for side, classes in ((HOT, hot_classes), (COLD, cold_classes)):
        seen = set()
        for c in classes:
            if c.side != side:
                raise StructuralError(f"class {c.members} listed on the wrong side")
            overlap = seen.intersection(c.members)
            if overlap or len(set(c.members)) != len(c.members):
                raise StructuralError(f"classes overlap on {sorted(overlap) or c.members}")
            seen.update(c.members)
    gens = []
    order = 1
    for c in list(hot_classes) + list(cold_classes):
        order *= math.factorial(len(c))
        gens.extend((c.side, a, b) for a, b in zip(c.members, c.members[1:]))
    return SymmetryGroup(tuple(hot_classes), tuple(cold_classes), tuple(gens), order)


# ---------------------------------------------------------------- classes of a model

def _structure(model: MilpModel, side: str) -> dict:
    """Per stream, how each of its variables enters the model, other id kept."""
    y, prohibited = set(model.y_keys), set(model.prohibited)
    out = {}
    ids = model.hot_ids if side == HOT else model.cold_ids
    for sid in ids:
        sig = []
        for (i, j, t) in list(model.q_keys) + [k for k in model.y_keys if k[2] == 0]:
            if (i if side == HOT else j) != sid:
                continue
            k = (i, j, t)
            tag = "y" if k in y else "p" if k in prohibited else "q"
            sig.append(((j if side == HOT else i), t, tag, model.bigm.get(k)))
        out[sid] = tuple(sorted(sig, key=repr))
    return out


def model_keys(model: MilpModel, side: str, mode: str) -> dict:
    """The class key of every stream in the model on ``side``."""
    ids = model.hot_ids if side == HOT else model.cold_ids
    if model.scope == FIXED:
        p = model.problem
        if mode == BY_LOAD:
            return {s: (p.available(s) if side == HOT else p.cold_loads[s]) for s in ids}
        return {s: p.fcp.get(s) for s in ids}
    c = model.problem
    if mode == BY_LOAD:
        return {s: c.profile(s) for s in ids}
    fcps = {}
    for p in c.problems:
        for k, v in p.fcp.items():
            fcps.setdefault(k, v)
    return {s: fcps.get(s) for s in ids}


def model_classes(model: MilpModel, mode: str = BY_LOAD, epsilon: bool = False) -> tuple:
    """Hot and cold classes under which ``model`` is invariant.

    Keys come from ``mode``. Streams are only grouped when they also play the
    same structural role: same partners with the same kind of variable, same
    big-M, and (in capacity mode) the same load, since equal capacities alone
    do not equalise entering residuals.
    """
    out = []
    for side in (HOT, COLD):
        keys = model_keys(model, side, mode)
        struct = _structure(model, side)
        loads = model_keys(model, side, BY_LOAD)
        sig = {s: (struct[s], loads[s] if mode == BY_FCP else None) for s in keys}
        if epsilon and mode == BY_LOAD:
            sig = {s: struct[s] for s in keys}
        if model.scope == FIXED:
            p = model.problem
            util = p.hot_utilities if side == HOT else p.cold_utilities
        else:
            util = model.problem.hot_utilities if side == HOT else model.problem.cold_utilities
        out.append(tuple(equivalence_classes(keys, side, mode, util, sig, epsilon)))
    return tuple(out)


def model_group(model: MilpModel, mode: str = BY_LOAD, epsilon: bool = False) -> SymmetryGroup:
    hot, cold = model_classes(model, mode, epsilon)
    return build_group(hot, cold)


# ---------------------------------------------------------------- action

def apply_permutation(x: MatchSolution, g: GroupElement, group: Optional[SymmetryGroup] = None) -> MatchSolution:
    """Relabel hot indices by g.hot and cold indices by g.cold."""
    if group is not None and not group.contains(g):
        raise GroupError("element is not in the group")
    if g.is_identity:
        return x
    y = {(g.h(i), g.c(j), t): v for (i, j, t), v in x.y.items()}
    q = {(g.h(i), g.c(j), t): v for (i, j, t), v in x.q.items()}
    r = {(g.h(i), t): v for (i, t), v in x.residuals.items()}
    return MatchSolution(y, q, r, x.objective)


def _sort_key(model: MilpModel, x: MatchSolution):
    return (tuple(-int(x.y[k]) for k in model.y_keys),
            tuple(-rational(x.q.get(k, 0)) for k in model.q_keys))


@dataclass(frozen=True)
class Orbit:
    members: tuple
    partial: bool

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, x):
        return x in self.members


def orbit(x: MatchSolution, group: SymmetryGroup, cap: int = 10 ** 5) -> Orbit:
    """Closure of {x} under the generators, distinct by y-pattern and q."""
    gens = group.generator_elements()
    seen = {x}
    order = [x]
    queue = deque([x])
    partial = False
    while queue and not partial:
        s = queue.popleft()
        for g in gens:
            t = apply_permutation(s, g)
            if t in seen:
                continue
            if len(seen) >= cap:
                partial = True
                break
            seen.add(t)
            order.append(t)
            queue.append(t)
    return Orbit(tuple(order), partial)


def canonical_form(x: MatchSolution, group: SymmetryGroup, model: MilpModel) -> MatchSolution:
    """Least orbit member under the module's solution order."""
    if group.trivial:
        return x
    members = orbit(x, group).members
    return min(members, key=lambda s: _sort_key(model, s))


# ---------------------------------------------------------------- patterns as bits

def bit_permutation(model: MilpModel, g: GroupElement) -> np.ndarray:
    """perm[k] = position of the image of y_keys[k]; raises if g leaves the model."""
    pos = {k: n for n, k in enumerate(model.y_keys)}
    perm = np.empty(len(model.y_keys), dtype=np.int64)
    for n, (i, j, t) in enumerate(model.y_keys):
        img = (g.h(i), g.c(j), t)
        if img not in pos:
            raise GroupError(f"element maps {(i, j, t)} outside the model")
        perm[n] = pos[img]
    return perm


def pattern_codes(model: MilpModel, patterns: Iterable) -> np.ndarray:
    """Encode y-patterns so that integer order is lexicographic order in y_keys."""
    n = len(model.y_keys)
    if n > 62:
        raise OverflowError("too many binaries for int64 pattern codes")
    pos = {k: n - 1 - p for p, k in enumerate(model.y_keys)}
    return np.array([sum(1 << pos[k] for k in pat) for pat in patterns], dtype=np.int64)


def canonical_codes(model: MilpModel, group: SymmetryGroup, codes: np.ndarray,
                    bound: int = ORDER_BOUND) -> np.ndarray:
    """Lexicographically largest image of every encoded pattern."""
    n = len(model.y_keys)
    best = np.asarray(codes, dtype=np.int64).copy()
    for g in group.elements(bound):
        if g.is_identity:
            continue
        perm = bit_permutation(model, g)
        # codes store position p at bit n-1-p
        bits = n - 1 - perm[::-1]
        best = np.maximum(best, kernels.permute_bits(codes, bits))
    return best


# ---------------------------------------------------------------- verification

def delta_r(model: MilpModel, x: MatchSolution) -> tuple:
    """Change of total residual across each interval the solution spans."""
    if model.scope == FIXED:
        p = model.problem
        out = sum((rational(v) for v in x.residuals.values()), Fraction(0))
        return (out - p.entering_total,)
    T = len(model.problem.problems)
    tot = [Fraction(0)] * (T + 1)
    for (i, t), v in x.residuals.items():
        tot[t] += rational(v)
    return tuple(tot[t] - tot[t - 1] for t in range(1, T + 1))


@dataclass(frozen=True)
class ActionCheck:
    solution: int
    generator: tuple
    feasible: bool
    same_objective: bool
    same_delta_r: bool

    @property
    def ok(self) -> bool:
        return self.feasible and self.same_objective and self.same_delta_r


@dataclass(frozen=True)
class GroupActionReport:
    checks: tuple
    closed: bool
    missing: tuple            # images of members that are absent from the set
    orbits: tuple             # orbit decomposition, as tuples of indices

    @property
    def all_pass(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.all_pass and self.closed


def verify_group_action(model: MilpModel, group: SymmetryGroup, optima: OptimaSet) -> GroupActionReport:
    """Check every generator on every member; report closure and orbits.

    Membership is judged by y-pattern: an optimum set holds one heat-load
    assignment per pattern.
    """
    sols = list(optima.solutions)
    if not sols:
        raise ValueError("empty solution set")
    index = {s.pattern(): n for n, s in enumerate(sols)}
    checks, missing = [], []
    parent = list(range(len(sols)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for n, s in enumerate(sols):
        dr = delta_r(model, s)
        for gen in group.generators:
            img = apply_permutation(s, _transposition(*gen))
            feasible = verify_solution(model, img, 0).feasible
            obj = sum(int(img.y[k]) for k in model.costed_keys)
            checks.append(ActionCheck(n, gen, feasible, obj == s.objective == optima.objective,
                                      delta_r(model, img) == dr))
            m = index.get(img.pattern())
            if m is None:
                missing.append((n, gen, img.pattern()))
            else:
                parent[find(m)] = find(n)
    groups = {}
    for n in range(len(sols)):
        groups.setdefault(find(n), []).append(n)
    orbits = tuple(tuple(v) for v in groups.values())
    return GroupActionReport(tuple(checks), not missing, tuple(missing), orbits)


# ---------------------------------------------------------------- symmetry breaking

def _dominance_row(model: MilpModel, g: GroupElement, name: str) -> Optional[Row]:
    """y >=_lex g(y) over y_keys order, as one weighted row on the moved positions."""
    perm = bit_permutation(model, g)
    moved = [p for p in range(len(perm)) if perm[p] != p]
    if not moved:
        return None
    if len(moved) > WEIGHT_BITS:
        raise WeightBudgetError(f"{len(moved)} weighted positions exceed the budget of {WEIGHT_BITS}")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    coeffs = {}
    idx = model.y_index
    keys = model.y_keys
    for rank, p in enumerate(moved):
        w = 1 << (len(moved) - 1 - rank)
        # (g y)_p = y_{g^-1(p)}
        a, b = idx[keys[p]], idx[keys[int(inv[p])]]
        coeffs[a] = coeffs.get(a, 0) + w
        coeffs[b] = coeffs.get(b, 0) - w
    coeffs = {k: v for k, v in coeffs.items() if v}
    return Row(coeffs, GE, 0, name) if coeffs else None


def symmetry_breaking_constraints(group: SymmetryGroup, model: MilpModel, lex_leader: bool = True,
                                  bound: int = ORDER_BOUND) -> list:
    """Rows keeping the lexicographically largest pattern of every orbit.

    One dominance row per adjacent pair of each class. When both sides have a
    nontrivial class those rows alone leave several members of some orbits,
    so with ``lex_leader`` every group element up to ``bound`` adds its own row.
    """
    rows, seen = [], set()

    def add(row):
        if row is None:
            return
        sig = tuple(sorted(row.coeffs.items()))
        if sig not in seen:
            seen.add(sig)
            rows.append(row)

    for side, a, b in group.generators:
        add(_dominance_row(model, _transposition(side, a, b), f"sbc[{a}>={b}]"))
    both = any(not c.trivial for c in group.hot_classes) and any(not c.trivial for c in group.cold_classes)
    if lex_leader and both and group.order <= bound:
        for n, g in enumerate(group.elements(bound)):
            add(_dominance_row(model, g, f"sbc_lex[{n}]"))
    return rows


def sbc_exact(group: SymmetryGroup, lex_leader: bool = True, bound: int = ORDER_BOUND) -> bool:
    """Whether the rows from symmetry_breaking_constraints keep exactly one per orbit."""
    both = any(not c.trivial for c in group.hot_classes) and any(not c.trivial for c in group.cold_classes)
    return not both or (lex_leader and group.order <= bound)
