"""Exhaustive insertion of low-weight fault sets.

A fault is one non-identity component of one noisy op's channel (or a
flipped measurement).  Random measurement outcomes caused by CZ errors are
enumerated branch by branch, so every possible history is checked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .engine import C_CODE, C_NOISY, INJECT_SLOTS, OP_MEAS, OPCODES
from .montecarlo import Simulator

MAX_BRANCH_BITS = 16


@dataclass(frozen=True)
class Fault:
    op: int
    mask: int
    prob: float

    def describe(self, sim: Simulator) -> str:
        row = sim.prog.ops[self.op]
        qs = [str(sim.exp.circuit.qubits[q]) for q in row[1:4] if q >= 0]
        kind = next(k for k, v in OPCODES.items() if v == row[C_CODE]).value
        what = "flip" if row[C_CODE] == OP_MEAS else f"mask={self.mask}"
        return f"layer {int(row[6])} {kind}({', '.join(qs)}) {what}"


def elementary_faults(sim: Simulator) -> list[Fault]:
    out = []
    for i, row in enumerate(sim.prog.ops):
        if not row[C_NOISY]:
            continue
        code = int(row[C_CODE])
        if code == OP_MEAS:
            if sim.cfg.q_meas > 0:
                out.append(Fault(i, 1, float(sim.cfg.q_meas)))
            continue
        for j in range(sim.probs.shape[1]):
            if sim.probs[code, j] > 0:
                out.append(Fault(i, int(sim.masks[code, j]), float(sim.probs[code, j])))
    return out


def count_fault_sets(n_faults: int, max_weight: int) -> int:
    return sum(math.comb(n_faults, w) for w in range(max_weight + 1))


def fault_sets(faults: list[Fault], weight: int):
    """Sets of ``weight`` faults on distinct ops (a channel fires once per op)."""
    for combo in itertools.combinations(faults, weight):
        if len({f.op for f in combo}) == weight:
            yield combo


def _run(sim: Simulator, sets: list[tuple[Fault, ...]], branches: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    st = sim.new_state(0, np.zeros(len(sets), np.int64))
    st.forced = True
    st.branch[:] = branches
    for r, fs in enumerate(sets):
        for s, f in enumerate(fs):
            st.inj_op[r, s] = f.op
            st.inj_mask[r, s] = f.mask
    res = sim.run(st, noise_on=False)
    return res.any(axis=1), st.nrand.copy()


def _failing_fraction(sim, sets, chunk):
    for s in range(0, len(sets), chunk):
        part = sets[s:s + chunk]
        fail, nrand = _run(sim, part, np.zeros(len(part), np.uint64))
        for fs, bad, nr in zip(part, fail, nrand):
            if nr == 0:
                yield fs, float(bad)
                continue
            # rerun with every combination of the random outcomes; outcomes past
            # MAX_BRANCH_BITS follow branch 0
            nb = 2 ** min(int(nr), MAX_BRANCH_BITS)
            fb, _ = _run(sim, [fs] * nb, np.arange(nb, dtype=np.uint64))
            yield fs, float(fb.mean())


def enumerate_faults(sim: Simulator, max_weight: int = 1, chunk: int = 4096) -> list[tuple[tuple[Fault, ...], float]]:
    """Fault sets of weight 1..``max_weight`` that fail in at least one branch.

    Each entry carries the fraction of measurement branches that fail.  The
    empty set is checked too and reported as ``()`` if it fails.
    """
    if max_weight > INJECT_SLOTS:
        raise NotImplementedError(f"fault sets above weight {INJECT_SLOTS} are not supported")
    out = []
    st = sim.new_state(0, np.zeros(1, np.int64))
    if sim.run(st, noise_on=False).any():
        out.append(((), 1.0))
    faults = elementary_faults(sim)
    for w in range(1, max_weight + 1):
        sets = list(fault_sets(faults, w))
        out += [(fs, fr) for fs, fr in _failing_fraction(sim, sets, chunk) if fr > 0]
    return out


def truncated_failure_probability(sim: Simulator, max_weight: int = 2, chunk: int = 4096) -> float:
    """Failure probability summed over all fault sets of weight at most ``max_weight``.

    A set's probability is the product of its components times the
    probability that every other noisy op stays silent.
    """
    faults = elementary_faults(sim)
    silent: dict[int, float] = {}
    for f in faults:
        silent[f.op] = silent.get(f.op, 0.0) + f.prob
    log_p0 = sum(math.log1p(-q) for q in silent.values())
    total = 0.0
    for fs, fr in enumerate_faults(sim, max_weight, chunk):
        if fr == 0:
            continue
        w = math.exp(log_p0)
        for f in fs:
            w *= f.prob / (1.0 - silent[f.op])
        total += w * fr
    return total
