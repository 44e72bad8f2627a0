import math

import pytest

from repcat.circuits import build
from repcat.faults import (count_fault_sets, elementary_faults, enumerate_faults, fault_sets,
                           truncated_failure_probability)
from repcat.montecarlo import Simulator
from repcat.noise import NoiseConfig


def sim(name, d, p=0.001):
    return Simulator(build(name, d), NoiseConfig(p))


@pytest.mark.parametrize("name", ["memory", "prep_plus", "cnot"])
@pytest.mark.parametrize("d", [3, 5])
def test_single_faults_are_corrected(name, d):
    assert enumerate_faults(sim(name, d), 1) == []


def test_ft_toffoli_d5_tolerates_single_faults():
    assert enumerate_faults(sim("toffoli_ft", 5), 1) == []


def test_ft_toffoli_d3_has_failing_single_faults():
    s = sim("toffoli_ft", 3)
    bad = enumerate_faults(s, 1)
    assert bad
    assert all(len(fs) == 1 and 0 < fr <= 1 for fs, fr in bad)
    assert any("CCX" in fs[0].describe(s) for fs, _ in bad)


def test_memory_d3_has_failing_pairs():
    bad = enumerate_faults(sim("memory", 3), 2)
    assert bad and all(len(fs) == 2 for fs, _ in bad)


def test_weight_limits():
    s = sim("memory", 3)
    assert enumerate_faults(s, 0) == []
    with pytest.raises(NotImplementedError):
        enumerate_faults(s, 4)


def test_fault_counting():
    s = sim("memory", 3)
    faults = elementary_faults(s)
    assert count_fault_sets(len(faults), 1) == 1 + len(faults)
    assert count_fault_sets(10, 2) == 1 + 10 + 45
    pairs = list(fault_sets(faults, 2))
    assert all(a.op != b.op for a, b in pairs)
    assert len(pairs) < math.comb(len(faults), 2)


def test_truncated_probability_grows_with_weight():
    s = sim("memory", 3, 0.002)
    p2 = truncated_failure_probability(s, 2)
    p3 = truncated_failure_probability(s, 3)
    assert 0 < p2 < p3 < 1
    assert truncated_failure_probability(s, 1) == 0
