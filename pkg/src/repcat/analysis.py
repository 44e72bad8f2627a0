"""Closed-form estimates, threshold fits and overhead optimisation.

Everything here works on plain result tables: sequences of
``(d, p, p_L)`` points, optionally with a censoring flag.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binom

from .noise import NBAR_MAX, cnot_bitflip_probability, optimal_phase_flip_probability

FAMILIES = {
    "half": lambda d: (d + 1) / 2,
    "quarter": lambda d: (d + 1) / 4,
}


class UnderdeterminedFit(ValueError):
    """Not enough usable points to fit a scaling law."""


@dataclass(frozen=True)
class Point:
    d: int
    p: float
    p_L: float
    censored: bool = False

    @classmethod
    def coerce(cls, obj) -> "Point":
        if isinstance(obj, Point):
            return obj
        if hasattr(obj, "p_L") and hasattr(obj, "d"):
            return cls(int(obj.d), float(obj.p), float(obj.p_L), bool(getattr(obj, "censored", False)))
        if isinstance(obj, dict):
            return cls(int(obj["d"]), float(obj["p"]), float(obj["p_L"]), bool(obj.get("censored", False)))
        d, p, p_L, *rest = obj
        return cls(int(d), float(p), float(p_L), bool(rest[0]) if rest else False)


@dataclass
class ScalingFit:
    A: float
    p_th: float
    family: str
    residuals: dict[tuple[int, float], float] = field(default_factory=dict)
    per_distance_A: dict[int, float] | None = None

    def __post_init__(self):
        if not self.p_th > 0:
            raise ValueError("p_th must be positive")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown exponent family {self.family!r}")

    def exponent(self, d: int) -> float:
        return FAMILIES[self.family](d)

    def predict(self, d: int, p: float) -> float:
        A = self.A if self.per_distance_A is None else self.per_distance_A.get(d, self.A)
        return A * (p / self.p_th) ** self.exponent(d)

    @property
    def rms(self) -> float:
        """Root mean square of the residuals in natural-log units."""
        if not self.residuals:
            return 0.0
        return math.sqrt(sum(r * r for r in self.residuals.values()) / len(self.residuals))

    def to_dict(self) -> dict:
        return {"A": self.A, "p_th": self.p_th, "family": self.family, "rms": self.rms,
                "residuals": [{"d": d, "p": p, "log_residual": r} for (d, p), r in sorted(self.residuals.items())],
                "per_distance_A": None if self.per_distance_A is None
                else {str(d): a for d, a in sorted(self.per_distance_A.items())}}

    @classmethod
    def from_dict(cls, obj: dict) -> "ScalingFit":
        res = {(int(r["d"]), float(r["p"])): float(r["log_residual"]) for r in obj.get("residuals", [])}
        pda = obj.get("per_distance_A")
        return cls(float(obj["A"]), float(obj["p_th"]), obj["family"], res,
                   None if pda is None else {int(d): float(a) for d, a in pda.items()})


def _usable(points: Iterable) -> list[Point]:
    return [pt for pt in map(Point.coerce, points)
            if not pt.censored and pt.p_L > 0 and pt.p > 0]


def _check_shape(pts: list[Point], min_distances: int = 2, min_per_d: int = 3) -> None:
    per_d: dict[int, set[float]] = {}
    for pt in pts:
        per_d.setdefault(pt.d, set()).add(pt.p)
    good = [d for d, ps in per_d.items() if len(ps) >= min_per_d]
    if len(good) < min_distances:
        raise UnderdeterminedFit(
            f"need at least {min_distances} distances with {min_per_d} noise values each "
            f"(have {', '.join(f'd={d}: {len(ps)}' for d, ps in sorted(per_d.items())) or 'no points'})")


def _solve(pts: list[Point], family: str, per_distance: bool) -> ScalingFit:
    expo = FAMILIES[family]
    # log p_L = e(d) log p - e(d) log p_th + log A, linear in (log p_th, log A)
    y = np.array([math.log(pt.p_L) - expo(pt.d) * math.log(pt.p) for pt in pts])
    M = np.column_stack([[-expo(pt.d) for pt in pts], np.ones(len(pts))])
    sol, *_ = np.linalg.lstsq(M, y, rcond=None)
    p_th = math.exp(sol[0])
    if not per_distance:
        res = {(pt.d, pt.p): float(v) for pt, v in zip(pts, y - M @ sol)}
        return ScalingFit(math.exp(sol[1]), p_th, family, res)
    # a free prefactor per distance would absorb p_th entirely, so p_th stays
    # at its shared-prefactor value and only the prefactors are refitted
    z = y + np.array([expo(pt.d) for pt in pts]) * sol[0]
    logA = {d: float(np.mean([v for pt, v in zip(pts, z) if pt.d == d])) for d in {pt.d for pt in pts}}
    res = {(pt.d, pt.p): float(v - logA[pt.d]) for pt, v in zip(pts, z)}
    pda = {d: math.exp(a) for d, a in sorted(logA.items())}
    return ScalingFit(math.exp(float(np.mean(list(logA.values())))), p_th, family, res, pda)


def fit_threshold(points: Iterable, family: str = "half", per_distance: bool = False,
                  max_iter: int = 20) -> ScalingFit:
    """Joint least-squares fit of ``p_L = A (p/p_th)^e(d)`` in log space.

    Censored points are ignored, and points above the fitted threshold are
    dropped and the fit repeated until the retained set is stable.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown exponent family {family!r}; choose from {', '.join(FAMILIES)}")
    pts = _usable(points)
    _check_shape(pts)
    fit = _solve(pts, family, per_distance)
    for _ in range(max_iter):
        kept = [pt for pt in pts if pt.p <= fit.p_th]
        try:
            _check_shape(kept)
        except UnderdeterminedFit:
            break
        new = _solve(kept, family, per_distance)
        if len(new.residuals) == len(fit.residuals):
            return new
        fit = new
    return fit


def fit_exponent(points: Iterable) -> float:
    """Slope of ``log p_L`` against ``log p`` for points of one distance."""
    pts = _usable(points)
    if len({pt.p for pt in pts}) < 2:
        raise UnderdeterminedFit("need at least two noise values to fit an exponent")
    x = np.log([pt.p for pt in pts])
    y = np.log([pt.p_L for pt in pts])
    return float(np.polyfit(x, y, 1)[0])


def _log_crossing(x0, y0a, y0b, x1, y1a, y1b) -> float | None:
    """Crossing of two curves given on a shared pair of abscissas (log-log interpolation)."""
    g0 = math.log(y0a) - math.log(y0b)
    g1 = math.log(y1a) - math.log(y1b)
    if g0 == 0:
        return x0
    if g0 * g1 > 0:
        return None
    t = g0 / (g0 - g1)
    return math.exp(math.log(x0) + t * (math.log(x1) - math.log(x0)))


def crossings(points: Iterable) -> dict[tuple[int, int], float]:
    """Noise value where the curves of consecutive distances cross.

    Pairs whose curves do not cross inside the sampled range are omitted.
    """
    pts = [pt for pt in map(Point.coerce, points) if pt.p_L > 0]
    curves: dict[int, dict[float, float]] = {}
    for pt in pts:
        curves.setdefault(pt.d, {})[pt.p] = pt.p_L
    ds = sorted(curves)
    out = {}
    for d0, d1 in zip(ds, ds[1:]):
        ps = sorted(set(curves[d0]) & set(curves[d1]))
        for a, b in zip(ps, ps[1:]):
            x = _log_crossing(a, curves[d0][a], curves[d1][a], b, curves[d0][b], curves[d1][b])
            if x is not None:
                out[(d0, d1)] = x
                break
    return out


def crossing_threshold(points: Iterable) -> float:
    """Median of the pairwise curve crossings."""
    xs = list(crossings(points).values())
    if not xs:
        raise UnderdeterminedFit("no pair of curves crosses inside the sampled range")
    return float(np.median(xs))


# -- closed forms -----------------------------------------------------------

def accumulation_pzl(d: int, p: float, warn: bool = True) -> float:
    """Probability that more than ``d // 2`` of ``d`` qubits carry a phase flip.

    Each control qubit meets ``d`` Toffolis, so it is flipped with
    probability ``p' = d p`` (first order).  Valid while ``d p`` is small.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if not 0 <= p <= 1:
        raise ValueError("p must be a probability")
    q = d * p
    if warn and q > 0.1:
        warnings.warn(f"d*p = {q:.3g} is not small; the first-order accumulation estimate is unreliable",
                      stacklevel=2)
    q = min(q, 1.0)
    return float(binom.sf(d // 2, d, q))


def logical_x_bound(d: int, nbar: float, ratio: float) -> float:
    """Worst-case logical bit-flip probability per cycle: every CNOT bit flip is fatal."""
    return 2 * d * (d - 1) * cnot_bitflip_probability(nbar, ratio)


@dataclass(frozen=True)
class OverheadPoint:
    d: int
    nbar: int
    data_qubits: int
    total_modes: int
    p_L: float
    p_ZL: float
    p_XL: float

    @property
    def feasible(self) -> bool:
        return True


@dataclass(frozen=True)
class Infeasible:
    target: float
    reason: str
    floor: float

    @property
    def feasible(self) -> bool:
        return False


def memory_overhead(target_pL: float, ratio: float, fit: ScalingFit,
                    nbar_max: int = int(NBAR_MAX), d_max: int = 100001) -> OverheadPoint | Infeasible:
    """Smallest odd distance, then smallest photon number, meeting ``target_pL``.

    The phase-flip part comes from ``fit``; the bit-flip part is the
    worst-case bound.  ``ratio`` is ``kappa1/kappa2`` and fixes ``p``.
    """
    if target_pL <= 0:
        raise ValueError("target must be positive")
    p = optimal_phase_flip_probability(ratio, 1.0)
    d = 3
    while d <= d_max:
        floor = logical_x_bound(d, nbar_max, ratio)
        if floor > target_pL:
            # the bit-flip floor only grows with d
            return Infeasible(target_pL, f"bit-flip floor {floor:.3g} at d={d}, nbar={nbar_max} exceeds the target",
                              floor)
        pz = fit.predict(d, p)
        if pz + floor <= target_pL:
            for nbar in range(1, nbar_max + 1):
                px = logical_x_bound(d, nbar, ratio)
                if pz + px <= target_pL:
                    return OverheadPoint(d, nbar, d, 2 * d - 1, pz + px, pz, px)
        if p >= fit.p_th and pz > target_pL:
            return Infeasible(target_pL, f"p = {p:.3g} is above the fitted threshold {fit.p_th:.3g}",
                              logical_x_bound(3, nbar_max, ratio))
        d += 2
    return Infeasible(target_pL, f"no distance up to {d_max} reaches the target", logical_x_bound(d_max, nbar_max, ratio))


def breakeven(points: Iterable, gate_error_factor: float = 6.0) -> float:
    """Physical gate error where the best logical error equals the physical one.

    ``points`` hold ``(d, p, p_L)``; the physical gate error is
    ``gate_error_factor * p``.  Between sampled points the curve is
    interpolated in log-log space.
    """
    best: dict[float, float] = {}
    for pt in map(Point.coerce, points):
        if pt.p_L <= 0:
            continue
        g = gate_error_factor * pt.p
        best[g] = min(best.get(g, math.inf), pt.p_L)
    gs = sorted(best)
    for a, b in zip(gs, gs[1:]):
        x = _log_crossing(a, best[a], a, b, best[b], b)
        if x is not None:
            return x
    raise ValueError("the best logical error never crosses the physical gate error in the sampled range")


def optimal_distance_concat(p: float, d_max: int = 2001) -> tuple[int, float]:
    """Odd distance minimising ``2 accumulation_pzl(d, p)`` (two control blocks)."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    best = (3, math.inf)
    for d in range(3, d_max + 1, 2):
        if d * p > 0.5:
            break
        v = 2 * accumulation_pzl(d, p, warn=False)
        if v < best[1]:
            best = (d, v)
    return best


def scan_concat(p: float, ds: Sequence[int]) -> list[tuple[int, float]]:
    return [(d, 2 * accumulation_pzl(d, p, warn=False)) for d in ds]
