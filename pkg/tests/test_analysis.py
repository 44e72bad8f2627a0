import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repcat.analysis import (FAMILIES, Infeasible, OverheadPoint, Point, ScalingFit, UnderdeterminedFit,
                             accumulation_pzl, breakeven, crossing_threshold, crossings, fit_exponent,
                             fit_threshold, logical_x_bound, memory_overhead, optimal_distance_concat,
                             scan_concat)
from repcat.noise import cnot_bitflip_probability, ratio_for_phase_flip_probability

PS = [0.002, 0.003, 0.005, 0.008, 0.012]


def synthetic(A, p_th, family, ds=(3, 5, 7, 9, 11), ps=PS):
    e = FAMILIES[family]
    return [(d, p, A * (p / p_th) ** e(d)) for d in ds for p in ps]


@pytest.mark.parametrize("family", ["half", "quarter"])
def test_fit_recovers_generating_parameters(family):
    fit = fit_threshold(synthetic(0.1, 0.019, family), family)
    assert fit.p_th == pytest.approx(0.019, rel=0.01)
    assert fit.A == pytest.approx(0.1, rel=0.01)
    assert fit.rms < 1e-9


def test_fit_prefers_the_generating_family():
    pts = synthetic(0.05, 0.02, "quarter", ds=(3, 5, 7))
    assert fit_threshold(pts, "quarter").rms < fit_threshold(pts, "half").rms


def test_fit_ignores_censored_and_points_above_threshold():
    pts = [Point(d, p, pl) for d, p, pl in synthetic(0.1, 0.019, "half")]
    pts += [Point(3, 0.001, 0.0, censored=True), Point(5, 0.03, 0.6), Point(7, 0.03, 0.7)]
    fit = fit_threshold(pts)
    assert fit.p_th == pytest.approx(0.019, rel=0.01)
    assert all(p <= fit.p_th for _, p in fit.residuals)


def test_fit_per_distance_prefactor():
    pts = [(d, p, (0.1 if d == 3 else 0.2) * (p / 0.019) ** ((d + 1) / 2)) for d in (3, 5, 7) for p in PS]
    shared = fit_threshold(pts)
    fit = fit_threshold(pts, per_distance=True)
    # p_th is not identifiable with a free prefactor per distance; it is kept
    # from the shared fit and the prefactors absorb the rest exactly
    assert fit.p_th == shared.p_th
    assert fit.rms < 1e-9 < shared.rms
    for d, p, pl in pts:
        assert fit.predict(d, p) == pytest.approx(pl, rel=1e-9)
    assert ScalingFit.from_dict(fit.to_dict()).predict(7, 0.004) == pytest.approx(fit.predict(7, 0.004))


def test_underdetermined_fit():
    with pytest.raises(UnderdeterminedFit):
        fit_threshold(synthetic(0.1, 0.019, "half", ds=(3,)))
    with pytest.raises(UnderdeterminedFit):
        fit_threshold(synthetic(0.1, 0.019, "half", ps=PS[:2]))
    with pytest.raises(ValueError):
        fit_threshold(synthetic(0.1, 0.019, "half"), "cubic")
    with pytest.raises(ValueError):
        ScalingFit(1.0, 0.0, "half")


def test_fit_exponent():
    pts = [(5, p, 3 * p ** 3) for p in PS]
    assert fit_exponent(pts) == pytest.approx(3.0)
    with pytest.raises(UnderdeterminedFit):
        fit_exponent(pts[:1])


def test_crossings_of_synthetic_curves():
    pts = synthetic(0.1, 0.006, "half", ps=[0.003, 0.005, 0.008, 0.012])
    cr = crossings(pts)
    assert set(cr) == {(3, 5), (5, 7), (7, 9), (9, 11)}
    assert all(v == pytest.approx(0.006, rel=1e-9) for v in cr.values())
    assert crossing_threshold(pts) == pytest.approx(0.006)
    with pytest.raises(UnderdeterminedFit):
        crossing_threshold(synthetic(0.1, 0.1, "half"))


# -- closed forms -------------------------------------------------------------

def test_accumulation_examples():
    assert accumulation_pzl(3, 0.001) == pytest.approx(2.6946e-5, rel=1e-4)
    assert accumulation_pzl(5, 0.0) == 0
    with pytest.warns(UserWarning):
        accumulation_pzl(9, 0.02)
    with pytest.raises(ValueError):
        accumulation_pzl(3, 1.5)


@given(st.sampled_from([1, 3, 5, 7, 9, 11, 13, 15]), st.floats(0, 0.06))
def test_accumulation_equals_pattern_enumeration(d, p):
    q = d * p
    weights = np.array([sum(bits) for bits in itertools.product((0, 1), repeat=d)]) if d <= 11 else \
        np.unpackbits(np.arange(2 ** d, dtype=">u2").view(np.uint8).reshape(-1, 2), axis=1).sum(axis=1)
    prob = q ** weights * (1 - q) ** (d - weights)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert accumulation_pzl(d, p) == pytest.approx(prob[weights > d // 2].sum(), rel=1e-9, abs=1e-300)


def test_logical_x_bound():
    ratio = ratio_for_phase_flip_probability(0.01)
    assert logical_x_bound(3, 15, ratio) == pytest.approx(12 * cnot_bitflip_probability(15, ratio))
    assert logical_x_bound(7, 11, ratio) / logical_x_bound(7, 10, ratio) == pytest.approx(math.exp(-2))
    assert logical_x_bound(70, 15, ratio) == pytest.approx(1.807e-10, rel=1e-3)


# -- overhead -----------------------------------------------------------------

FIT = ScalingFit(0.1, 0.019, "half")
RATIO = ratio_for_phase_flip_probability(0.01)


def satisfies(d, nbar, target):
    return FIT.predict(d, 0.01) + logical_x_bound(d, nbar, RATIO) <= target


@pytest.mark.parametrize("target", [1e-3, 1e-6, 1e-8, 1e-9])
def test_overhead_is_minimal(target):
    pt = memory_overhead(target, RATIO, FIT)
    assert isinstance(pt, OverheadPoint)
    assert pt.d % 2 == 1 and pt.total_modes == 2 * pt.d - 1
    assert satisfies(pt.d, pt.nbar, target)
    assert pt.p_L == pytest.approx(pt.p_ZL + pt.p_XL)
    if pt.d > 3:
        assert not any(satisfies(pt.d - 2, n, target) for n in range(1, 16))
    if pt.nbar > 1:
        assert not satisfies(pt.d, pt.nbar - 1, target)


def test_overhead_trivial_target():
    pt = memory_overhead(1.0, RATIO, FIT)
    assert pt.d == 3


def test_overhead_below_floor_is_infeasible():
    res = memory_overhead(1e-13, RATIO, FIT)
    assert isinstance(res, Infeasible) and not res.feasible
    assert res.floor > 1e-13
    res = memory_overhead(1e-6, ratio_for_phase_flip_probability(0.03), FIT)
    assert isinstance(res, Infeasible)


# -- Toffoli helpers -------------------------------------------------------------

def test_breakeven_synthetic():
    pts = [(d, p, (6 * p) ** 2 / 0.1) for d in (3, 5) for p in np.geomspace(0.005, 0.04, 8)]
    assert breakeven(pts) == pytest.approx(0.1, rel=1e-9)
    with pytest.raises(ValueError):
        breakeven([(3, p, 1e-9) for p in (0.01, 0.02)])


def test_concat_optimum():
    ps = np.geomspace(1e-5, 1e-3, 12)
    best = [optimal_distance_concat(p)[1] for p in ps]
    assert all(a <= b for a, b in zip(best, best[1:]))
    p = 0.0025
    d, v = optimal_distance_concat(p)
    curve = dict(scan_concat(p, range(3, 201, 2)))
    assert 3 < d < 199
    assert curve[d] == v == min(v for dd, v in curve.items() if dd * p <= 0.5)
    assert curve[3] > v and curve[199] > v
    assert d == 47 and v == pytest.approx(9.9e-11, rel=0.05)
