"""Random instance generators shared by the test modules."""
import random
from fractions import Fraction as F

from hensym.core import IntervalProblem, TemperatureInterval


def interval_problem(hot, cold, entering=None, hot_utilities=(), cold_utilities=(), fcp=None,
                     index=1, delta_t=None):
    """IntervalProblem from plain load lists; ids H1.., C1.. unless given as dicts."""
    h = hot if isinstance(hot, dict) else {f"H{k + 1}": F(v) for k, v in enumerate(hot)}
    c = cold if isinstance(cold, dict) else {f"C{k + 1}": F(v) for k, v in enumerate(cold)}
    return IntervalProblem(TemperatureInterval(index, None, None, delta_t), h, c, entering or {},
                           hot_utilities, cold_utilities, fcp or {})


def random_load(rng):
    return F(rng.randint(1, 12), rng.choice([1, 2, 3]))


def random_fixed_problem(rng: random.Random, max_hot=4, max_cold=3):
    """Loads k/d with k in 1..12, d in {1,2,3}.

    Even draws are balanced exactly; odd draws keep whatever surplus the hot
    side has (a shortfall is moved onto H1 so the interval stays feasible).
    """
    nh, nc = rng.randint(1, max_hot), rng.randint(1, max_cold)
    h = [random_load(rng) for _ in range(nh)]
    c = [random_load(rng) for _ in range(nc)]
    gap = sum(c) - sum(h)
    balanced = rng.random() < 0.5
    if gap > 0:
        h[0] += gap
    elif balanced and gap < 0:
        c[0] -= gap
    return interval_problem(h, c)


def planted_problem(rng: random.Random, max_side=3):
    """Interval whose loads come from capacities with planted equal-capacity classes.

    Returns (problem, hot class sizes, cold class sizes). A hot utility covers
    any shortfall of the process streams.
    """
    dt = F(rng.choice([5, 10, 20, 25]))

    def side(prefix):
        n = rng.randint(1, max_side)
        sizes = []
        left = n
        while left:
            k = rng.randint(1, left)
            sizes.append(k)
            left -= k
        values = rng.sample([F(v, 10) for v in range(5, 40)], len(sizes))
        fcp, ident = {}, 1
        for size, v in zip(sizes, values):
            for _ in range(size):
                fcp[f"{prefix}{ident}"] = v
                ident += 1
        return fcp, sizes

    hf, hs = side("H")
    cf, cs = side("C")
    hot = {k: v * dt for k, v in hf.items()}
    cold = {k: v * dt for k, v in cf.items()}
    gap = sum(cold.values()) - sum(hot.values())
    hu = ()
    if gap > 0:
        hot["HU"] = gap
        hu = ("HU",)
    p = IntervalProblem(TemperatureInterval(1, None, None, dt), hot, cold, {}, hu, (), {**hf, **cf})
    return p, hs, cs
