import os
import subprocess
import sys
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hensym import kernels
from hensym._accel import NUMBA_ENABLED

needs_numba = pytest.mark.skipif(not NUMBA_ENABLED, reason="numba disabled")


def random_network(rng, n, m):
    supply = rng.integers(0, 20, n)
    demand = rng.integers(0, 20, m)
    arc_bin = np.full((n, m), kernels.ARC_NONE, dtype=np.int64)
    bit = 0
    for i in range(n):
        for j in range(m):
            r = rng.random()
            if r < 0.7:
                arc_bin[i, j] = bit
                bit += 1
            elif r < 0.85:
                arc_bin[i, j] = kernels.ARC_FREE
    return supply, demand, arc_bin, np.arange(1 << bit, dtype=np.int64)


@needs_numba
@pytest.mark.parametrize("seed", range(8))
def test_feasible_patterns_agree(seed):
    rng = np.random.default_rng(seed)
    args = random_network(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    a = kernels.feasible_patterns_numba(*args)
    assert np.array_equal(a, kernels.feasible_patterns_numpy(*args))
    assert np.array_equal(a, kernels.feasible_patterns_maxflow(*args))


def test_feasible_patterns_hand_case():
    # one source of 10 feeding two sinks of 5 through bits 0 and 1
    supply = np.array([10])
    demand = np.array([5, 5])
    arc_bin = np.array([[0, 1]])
    got = kernels.feasible_patterns(supply, demand, arc_bin, np.arange(4))
    assert got.tolist() == [False, False, False, True]


@needs_numba
@pytest.mark.parametrize("n,m", [(1, 0), (2, 3), (3, 3), (4, 4)])
def test_count_one_hot_agree(n, m):
    assert kernels.count_one_hot_numba(n, m) == kernels.count_one_hot_numpy(n, m) == n ** m


@needs_numba
@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(7))), st.lists(st.integers(0, 127), min_size=1, max_size=20))
def test_permute_bits_agree(perm, pats):
    pats = np.array(pats, dtype=np.int64)
    perm = np.array(perm, dtype=np.int64)
    a = kernels.permute_bits_numba(pats, perm)
    assert np.array_equal(a, kernels.permute_bits_numpy(pats, perm))
    assert np.array_equal(kernels.popcount(a), kernels.popcount(pats))


def test_scale_to_int():
    a, b = kernels.scale_to_int([F(1, 2), F(1, 3)], [1])
    assert a.tolist() == [3, 2] and b.tolist() == [6]
    with pytest.raises(OverflowError):
        kernels.scale_to_int([F(1, 2 ** 62)], [2 ** 10])


def test_numpy_fallback_in_subprocess():
    code = (
        "import hensym, sys; sys.path.insert(0, 'tests')\n"
        "from hensym._accel import NUMBA_ENABLED\n"
        "assert not NUMBA_ENABLED\n"
        "from _gen import interval_problem\n"
        "from hensym.milp import build_fixed_interval_model, count_configurations\n"
        "from hensym.oracle import exhaustive_optima\n"
        "from hensym import kernels\n"
        "r = exhaustive_optima(build_fixed_interval_model(interval_problem([10, 20, 30], [10, 20, 30])))\n"
        "print(r.objective, r.n_patterns, len(r.optimal_patterns), kernels.count_one_hot(3, 3))\n"
    )
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    env = dict(os.environ, HENSYM_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], cwd=root, env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.split() == ["3", "512", "1", "27"]
