"""Batched exact simulation of noisy repetition-code circuits.

All logical inputs are ``|+>_L``, on which the ideal circuits act
trivially, so a trajectory is fully described by its error.  Qubits that
never control a Toffoli (the target block, its ancillas and the Steane
ancilla block) stay in X eigenstates and are tracked as Z-frame bits.  The
remaining qubits are tracked the same way until the first CZ error shows
up in a trajectory; from then on they live in a CHP tableau, which handles
the entanglement a CZ error creates exactly, including the collapse it
undergoes when stabilizers are measured.

Every trajectory draws from its own SplitMix64 stream keyed by the master
seed and the trajectory index, so results do not depend on batching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _chp
from .core import Circuit, ContractViolation, GateKind

OPCODES = {
    GateKind.IDLE: 0,
    GateKind.PREP_PLUS: 1,
    GateKind.PREP_ZERO_L: 2,
    GateKind.MEAS_X: 3,
    GateKind.PAULI_X: 4,
    GateKind.PAULI_Z: 5,
    GateKind.CZ: 6,
    GateKind.CNOT: 7,
    GateKind.CCX: 8,
    GateKind.SWAP: 9,
}
OP_IDLE, OP_PREP, OP_PREP0, OP_MEAS, OP_X, OP_Z, OP_CZ, OP_CNOT, OP_CCX, OP_SWAP = range(10)

# op table columns
C_CODE, C_Q0, C_Q1, C_Q2, C_NOISY, C_REC, C_LAYER = range(7)


@dataclass
class Program:
    """Flat op table of a circuit plus the qubit classification."""
    circuit: Circuit
    ops: np.ndarray          # (n_ops, 7) int64
    layer_end: np.ndarray    # ops[layer_end[L-1]:layer_end[L]] belong to layer L
    n_qubits: int
    n_records: int
    tmap: np.ndarray         # qubit -> tableau column, or -1 for frame-only qubits
    tqubits: np.ndarray      # tableau qubits in column order

    def op_range(self, first_layer: int, stop_layer: int) -> tuple[int, int]:
        start = 0 if first_layer == 0 else int(self.layer_end[first_layer - 1])
        stop = 0 if stop_layer == 0 else int(self.layer_end[stop_layer - 1])
        return start, stop


def _tableau_closure(circuit: Circuit) -> set[int]:
    """Qubits that can ever carry a CZ error."""
    idx = circuit.index()
    tq: set[int] = set()
    for _, g in circuit.gates():
        if g.kind is GateKind.CCX:
            tq.update(idx[q] for q in g.qubits[:2])
        elif g.kind is GateKind.CZ:
            tq.update(idx[q] for q in g.qubits)
    changed = True
    while changed:
        changed = False
        for _, g in circuit.gates():
            qs = [idx[q] for q in g.qubits]
            if g.kind is GateKind.CNOT and qs[1] in tq and qs[0] not in tq:
                tq.add(qs[0])
                changed = True
            elif g.kind is GateKind.SWAP and (qs[0] in tq) != (qs[1] in tq):
                tq.update(qs)
                changed = True
    for _, g in circuit.gates():
        if g.kind is GateKind.CCX and idx[g.qubits[2]] in tq:
            raise ContractViolation(f"Toffoli target {g.qubits[2]} can carry a CZ error")
    return tq


def compile_circuit(circuit: Circuit) -> Program:
    """Flatten ``circuit`` into an op table.

    Noisy layers get an explicit Idle op for each untouched qubit that holds
    live quantum information.  Qubits waiting for a re-preparation, or not
    yet prepared, are skipped: a phase flip there is erased by the reset.
    """
    idx = circuit.index()
    nq = len(circuit.qubits)
    # first and next-use bookkeeping to decide which idles matter
    uses: list[list[tuple[int, GateKind]]] = [[] for _ in range(nq)]
    for li, layer in enumerate(circuit.layers):
        for g in layer.gates:
            for q in g.qubits:
                uses[idx[q]].append((li, g.kind))
    prepared_first = [bool(u) and u[0][1] in (GateKind.PREP_PLUS, GateKind.PREP_ZERO_L) for u in uses]

    rows = []
    layer_end = []
    rec = 0
    ptr = [0] * nq
    for li, layer in enumerate(circuit.layers):
        touched = set()
        for g in layer.gates:
            qs = [idx[q] for q in g.qubits] + [-1] * (3 - len(g.qubits))
            r = -1
            if g.kind is GateKind.MEAS_X:
                r = rec
                rec += 1
            rows.append((OPCODES[g.kind], qs[0], qs[1], qs[2], int(g.noisy and layer.noisy), r, li))
            touched.update(qs[:len(g.qubits)])
        if layer.noisy:
            for q in range(nq):
                if q in touched:
                    continue
                u = uses[q]
                while ptr[q] < len(u) and u[ptr[q]][0] < li:
                    ptr[q] += 1
                started = ptr[q] > 0 or not prepared_first[q]
                nxt = u[ptr[q]][1] if ptr[q] < len(u) else None
                if not started or nxt in (GateKind.PREP_PLUS, GateKind.PREP_ZERO_L):
                    continue
                if nxt is None and ptr[q] > 0 and u[-1][1] is GateKind.MEAS_X:
                    continue
                rows.append((OPCODES[GateKind.IDLE], q, -1, -1, 1, -1, li))
        layer_end.append(len(rows))
    ops = np.array(rows, np.int64).reshape(-1, 7)

    tq = sorted(_tableau_closure(circuit))
    tmap = np.full(nq, -1, np.int64)
    for col, q in enumerate(tq):
        tmap[q] = col
    for row in ops:
        if row[C_CODE] == OP_CNOT and tmap[row[C_Q1]] >= 0 and tmap[row[C_Q0]] < 0:
            raise ContractViolation("CNOT from a frame qubit onto a tableau qubit")
        if row[C_CODE] == OP_PREP0 and tmap[row[C_Q0]] >= 0:
            raise ContractViolation("logical |0> preparation on a tableau qubit")
    return Program(circuit, ops, np.array(layer_end, np.int64), nq, rec, tmap, np.array(tq, np.int64))


# -- random numbers --------------------------------------------------------

GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _next(state, b):
    s = state[b] + np.uint64(0x9E3779B97F4A7C15)
    state[b] = s
    return _mix(s)


@njit(cache=True)
def _uniform(state, b):
    return (_next(state, b) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def seed_states(seed, indices):
    """Initial SplitMix64 state of each trajectory index."""
    key = _mix(np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15))
    out = np.empty(indices.shape[0], np.uint64)
    for j in range(indices.shape[0]):
        out[j] = _mix(key ^ _mix(np.uint64(indices[j]) + np.uint64(1)))
    return out


# -- state -----------------------------------------------------------------

INJECT_SLOTS = 3


class BatchState:
    """Per-trajectory frames, tableaux, records and random streams."""

    def __init__(self, prog: Program, seed: int, indices: np.ndarray):
        n = len(indices)
        nt = len(prog.tqubits)
        self.frame = np.zeros((n, prog.n_qubits), np.uint8)
        self.mode = np.zeros(n, np.uint8)
        self.tx = np.zeros((n, 2 * nt + 1, max(nt, 1)), np.uint8)
        self.tz = np.zeros_like(self.tx)
        self.tr = np.zeros((n, 2 * nt + 1), np.uint8)
        self.rec = np.zeros((n, prog.n_records), np.uint8)
        self.rng = seed_states(np.uint64(seed), np.asarray(indices, np.int64))
        self.branch = np.zeros(n, np.uint64)
        self.nrand = np.zeros(n, np.int64)
        # up to INJECT_SLOTS deterministic faults per trajectory: (op index, error mask)
        self.inj_op = np.full((n, INJECT_SLOTS), -1, np.int64)
        self.inj_mask = np.zeros((n, INJECT_SLOTS), np.int64)
        self.forced = False

    def __len__(self) -> int:
        return self.frame.shape[0]


@njit(cache=True)
def _to_tableau(b, frame, mode, tx, tz, tr, tqs):
    signs = np.empty(tqs.shape[0], np.uint8)
    for j in range(tqs.shape[0]):
        signs[j] = frame[b, tqs[j]]
        frame[b, tqs[j]] = 0
    _chp.init_plus(tx[b], tz[b], tr[b], signs)
    mode[b] = 1


@njit(cache=True)
def _z(b, q, frame, mode, tx, tz, tr, tmap):
    if mode[b] and tmap[q] >= 0:
        _chp.apply_z(tx[b], tz[b], tr[b], tmap[q])
    else:
        frame[b, q] ^= 1


@njit(cache=True)
def _cz(b, q0, q1, frame, mode, tx, tz, tr, tmap, tqs):
    if tmap[q0] < 0 or tmap[q1] < 0:
        raise ValueError("CZ on a frame-only qubit")
    if not mode[b]:
        _to_tableau(b, frame, mode, tx, tz, tr, tqs)
    _chp.apply_cz(tx[b], tz[b], tr[b], tmap[q0], tmap[q1])


@njit(cache=True)
def _coin(b, rng, forced, branch, nrand):
    if forced:
        return np.int64((branch[b] >> np.uint64(nrand[b])) & np.uint64(1))
    return np.int64(_next(rng, b) >> np.uint64(63))


@njit(cache=True)
def _measure(b, q, frame, mode, tx, tz, tr, tmap, rng, forced, branch, nrand):
    if mode[b] and tmap[q] >= 0:
        res = _chp.measure_x(tx[b], tz[b], tr[b], tmap[q], _coin(b, rng, forced, branch, nrand))
        if res < 2:
            nrand[b] += 1
        return np.int64(res & 1)
    return np.int64(frame[b, q])


@njit(cache=True)
def _error(b, mask, q0, q1, q2, frame, mode, tx, tz, tr, tmap, tqs):
    if mask & 1:
        _z(b, q0, frame, mode, tx, tz, tr, tmap)
    if mask & 2:
        _z(b, q1, frame, mode, tx, tz, tr, tmap)
    if mask & 4:
        _z(b, q2, frame, mode, tx, tz, tr, tmap)
    if mask & 8:
        _cz(b, q0, q1, frame, mode, tx, tz, tr, tmap, tqs)


@njit(cache=True)
def _run(ops, start, stop, probs, masks, noise_on, frame, mode, tx, tz, tr, tmap, tqs,
         rec, rng, forced, branch, nrand, inj_op, inj_mask):
    nb = frame.shape[0]
    for b in range(nb):
        for i in range(start, stop):
            code = ops[i, 0]
            q0 = ops[i, 1]
            q1 = ops[i, 2]
            q2 = ops[i, 3]
            if code == 3:
                bit = _measure(b, q0, frame, mode, tx, tz, tr, tmap, rng, forced, branch, nrand)
                if noise_on and ops[i, 4] and _uniform(rng, b) < probs[3, 0]:
                    bit ^= 1
                for s in range(inj_op.shape[1]):
                    if inj_op[b, s] == i:
                        bit ^= inj_mask[b, s] & 1
                rec[b, ops[i, 5]] = bit
                continue
            if code == 1 or code == 2:
                if mode[b] and tmap[q0] >= 0:
                    if _measure(b, q0, frame, mode, tx, tz, tr, tmap, rng, forced, branch, nrand):
                        _chp.apply_z(tx[b], tz[b], tr[b], tmap[q0])
                else:
                    frame[b, q0] = 0
            elif code == 4:
                if mode[b] and tmap[q0] >= 0:
                    _chp.apply_x(tx[b], tz[b], tr[b], tmap[q0])
            elif code == 5:
                _z(b, q0, frame, mode, tx, tz, tr, tmap)
            elif code == 6:
                _cz(b, q0, q1, frame, mode, tx, tz, tr, tmap, tqs)
            elif code == 7:
                if tmap[q1] >= 0 and mode[b]:
                    _chp.apply_cnot(tx[b], tz[b], tr[b], tmap[q0], tmap[q1])
                elif frame[b, q1]:
                    _z(b, q0, frame, mode, tx, tz, tr, tmap)
            elif code == 8:
                if frame[b, q2]:
                    _cz(b, q0, q1, frame, mode, tx, tz, tr, tmap, tqs)
            elif code == 9:
                if mode[b] and tmap[q0] >= 0:
                    _chp.apply_swap(tx[b], tz[b], tr[b], tmap[q0], tmap[q1])
                else:
                    t = frame[b, q0]
                    frame[b, q0] = frame[b, q1]
                    frame[b, q1] = t
            if noise_on and ops[i, 4]:
                u = _uniform(rng, b)
                acc = 0.0
                for j in range(probs.shape[1]):
                    acc += probs[code, j]
                    if u < acc:
                        _error(b, masks[code, j], q0, q1, q2, frame, mode, tx, tz, tr, tmap, tqs)
                        break
            for s in range(inj_op.shape[1]):
                if inj_op[b, s] == i:
                    _error(b, inj_mask[b, s], q0, q1, q2, frame, mode, tx, tz, tr, tmap, tqs)


def run_ops(prog: Program, st: BatchState, start: int, stop: int,
            probs: np.ndarray, masks: np.ndarray, noise_on: bool = True) -> None:
    """Advance every trajectory of ``st`` through ops ``start:stop``."""
    _run(prog.ops, start, stop, probs, masks, noise_on, st.frame, st.mode, st.tx, st.tz, st.tr,
         prog.tmap, prog.tqubits, st.rec, st.rng, st.forced, st.branch, st.nrand,
         st.inj_op, st.inj_mask)


@njit(cache=True)
def _apply_z_many(zbits, qubits, frame, mode, tx, tz, tr, tmap):
    for b in range(zbits.shape[0]):
        for j in range(qubits.shape[0]):
            if zbits[b, j]:
                _z(b, qubits[j], frame, mode, tx, tz, tr, tmap)


def apply_z(prog: Program, st: BatchState, qubits: np.ndarray, zbits: np.ndarray) -> None:
    """Perfect Z gates: ``zbits[b, j]`` says whether shot ``b`` gets Z on ``qubits[j]``."""
    _apply_z_many(np.ascontiguousarray(zbits, np.uint8), np.asarray(qubits, np.int64),
                  st.frame, st.mode, st.tx, st.tz, st.tr, prog.tmap)


@njit(cache=True)
def _apply_cz_pairs(shots, pairs, frame, mode, tx, tz, tr, tmap, tqs):
    for j in range(shots.shape[0]):
        _cz(shots[j], pairs[j, 0], pairs[j, 1], frame, mode, tx, tz, tr, tmap, tqs)


def apply_cz(prog: Program, st: BatchState, shots: np.ndarray, pairs: np.ndarray) -> None:
    """Perfect CZ gates: CZ on ``pairs[j]`` in shot ``shots[j]``."""
    if len(shots) == 0:
        return
    _apply_cz_pairs(np.asarray(shots, np.int64), np.asarray(pairs, np.int64).reshape(-1, 2),
                    st.frame, st.mode, st.tx, st.tz, st.tr, prog.tmap, prog.tqubits)


@njit(cache=True)
def _peek_x_many(q, frame, mode, tx, tz, tr, tmap):
    out = np.empty(frame.shape[0], np.int64)
    for b in range(frame.shape[0]):
        if mode[b] and tmap[q] >= 0:
            out[b] = _chp.peek_x(tx[b], tz[b], tr[b], tmap[q])
        else:
            out[b] = frame[b, q]
    return out


def peek_x(prog: Program, st: BatchState, q: int) -> np.ndarray:
    """Sign bit of ``X_q`` per shot without disturbing the state; -1 when random."""
    return _peek_x_many(int(q), st.frame, st.mode, st.tx, st.tz, st.tr, prog.tmap)
