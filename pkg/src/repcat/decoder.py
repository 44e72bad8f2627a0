"""Syndrome processing: detector models, matching, Steane majority vote and CZ undo.

The matching graph of a block is derived from the circuit itself.  Every
elementary phase-flip fault (one Z on one qubit after one noisy op, or one
flipped measurement) is traced to the detectors it flips; faults with the
same detectors collapse into one edge.  Edges get unit weight, so matching
finds a minimum-weight explanation in number of faults.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np
import pymatching
import scipy.sparse as sp

from .core import Block, Circuit, ContractViolation, ErrorState, GateKind, propagate
from .engine import (C_CODE, C_LAYER, C_NOISY, C_Q2, C_REC, OP_CNOT, OP_MEAS,
                     OP_PREP, OP_PREP0, OP_SWAP, Program)
from .noise import CZ12, NoiseConfig, channel_table

BOUNDARY = -1


# -- syndrome histories ----------------------------------------------------

@dataclass
class SyndromeHistory:
    """Stabilizer outcomes (+1/-1) of one block, ``rounds[r][i]`` for ``X_i X_{i+1}``.

    ``final_round`` marks the last row as coming from a perfect round.
    """
    block: Block
    d: int
    rounds: np.ndarray
    final_round: bool = False

    def __post_init__(self):
        self.rounds = np.asarray(self.rounds, dtype=int).reshape(-1, self.d - 1)
        if not np.isin(self.rounds, (-1, 1)).all():
            raise ValueError("syndrome outcomes must be +1 or -1")


def detection_events(h: SyndromeHistory) -> list[tuple[int, int]]:
    """Positions ``(r, i)`` where an outcome differs from the previous round.

    The round before the first one is taken to be all +1 (ideal input state).
    """
    bits = (h.rounds < 0).astype(np.uint8)
    prev = np.vstack([np.zeros((1, h.d - 1), np.uint8), bits[:-1]])
    r, i = np.nonzero(bits ^ prev)
    return list(zip(r.tolist(), i.tolist()))


# -- detector models -------------------------------------------------------

@dataclass
class DetectorModel:
    """Matching graph of one block over a prefix of its history.

    Detector ``(r, i)`` compares round ``r`` of stabilizer ``i`` with round
    ``r - 1``.  Each edge carries the Z errors it leaves on the data at the
    decoding time (``obs``), the Z it puts directly on a data qubit
    (``instant``) and the circuit layer it happens after.
    """
    block: Block
    d: int
    n_rounds: int
    detectors: list[tuple[int, int]]
    edges: list[tuple[int, int]]          # (u, v) with v = BOUNDARY for boundary edges
    obs: np.ndarray                       # (n_edges, d) uint8
    instant: np.ndarray                   # (n_edges, d) uint8
    layer: np.ndarray                     # (n_edges,) int
    prob: np.ndarray                      # (n_edges,) float
    _matching: pymatching.Matching | None = field(default=None, repr=False)

    @property
    def n_det(self) -> int:
        return len(self.detectors)

    def check_matrix(self) -> sp.csc_matrix:
        rows, cols = [], []
        for j, (u, v) in enumerate(self.edges):
            rows.append(u)
            cols.append(j)
            if v != BOUNDARY:
                rows.append(v)
                cols.append(j)
        return sp.csc_matrix((np.ones(len(rows), np.uint8), (rows, cols)),
                             shape=(self.n_det, len(self.edges)))

    def matching(self) -> pymatching.Matching:
        if self._matching is None:
            n = len(self.edges)
            self._matching = pymatching.Matching.from_check_matrix(
                self.check_matrix(), faults_matrix=sp.identity(n, np.uint8, format="csr"))
        return self._matching

    def decode_batch(self, dets: np.ndarray) -> np.ndarray:
        """Edges chosen by minimum-weight matching, ``(n_shots, n_edges)`` bool."""
        if dets.shape[0] == 0 or not self.edges:
            return np.zeros((dets.shape[0], len(self.edges)), bool)
        return self.matching().decode_batch(np.ascontiguousarray(dets, np.uint8)).astype(bool)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_det))
        g.add_node(BOUNDARY)
        for j, (u, v) in enumerate(self.edges):
            g.add_edge(u, v, weight=1.0, edge=j)
        return g

    def to_json(self) -> str:
        return json.dumps({
            "block": self.block.value, "d": self.d, "n_rounds": self.n_rounds,
            "detectors": self.detectors,
            "edges": [{"nodes": [u, v], "obs": np.flatnonzero(self.obs[j]).tolist(),
                       "layer": int(self.layer[j]), "p": float(self.prob[j])}
                      for j, (u, v) in enumerate(self.edges)],
        })


def record_layout(hist, n_rounds: int) -> tuple[list, dict[int, int]]:
    """Detector labels and, per record index, the bitmask of detectors it enters."""
    d = len(hist.data)
    labels = []
    mask: dict[int, int] = {}
    for r in range(n_rounds):
        for i in range(d - 1):
            bit = len(labels)
            labels.append((r, i))
            for rr in (r, r - 1) if r > 0 else (r,):
                rec = hist.rounds[rr][i]
                mask[rec] = mask.get(rec, 0) ^ (1 << bit)
    return labels, mask


def build_detector_model(prog: Program, hist, n_rounds: int, stop_op: int,
                         cfg: NoiseConfig | None = None) -> DetectorModel:
    """Trace every elementary fault in ops ``[0, stop_op)`` to the detectors of ``hist``.

    Sensitivities are propagated backwards: ``S[q]`` is the set of detectors
    (and observables) that a Z on ``q`` at the current time would flip.
    """
    cfg = cfg or NoiseConfig(1e-3)
    probs, masks = channel_table(cfg)
    d = len(hist.data)
    labels, rec_mask = record_layout(hist, n_rounds)
    n_det = len(labels)
    idx = prog.circuit.index()
    data_cols = [idx[q] for q in hist.data]
    data_pos = {c: j for j, c in enumerate(data_cols)}
    S = [0] * prog.n_qubits
    for j, c in enumerate(data_cols):
        S[c] = 1 << (n_det + j)

    det_all = (1 << n_det) - 1
    # det bits -> {(obs, instant, layer): probability}
    groups: dict[int, dict[tuple[int, int, int], float]] = {}

    def record(sig, pr, layer, inst):
        dbits = sig & det_all
        if not dbits or pr <= 0:
            return
        key = (sig >> n_det, inst, layer)
        g = groups.setdefault(dbits, {})
        g[key] = g.get(key, 0.0) + pr

    ops = prog.ops
    for i in range(stop_op - 1, -1, -1):
        code, q0, q1, q2 = (int(v) for v in ops[i, C_CODE:C_Q2 + 1])
        layer = int(ops[i, C_LAYER])
        if ops[i, C_NOISY]:
            if code == OP_MEAS:
                rec = int(ops[i, C_REC])
                record(rec_mask.get(rec, 0), probs[code, 0], layer, 0)
            else:
                marg = [0.0, 0.0, 0.0]
                for j in range(probs.shape[1]):
                    m, pr = int(masks[code, j]), probs[code, j]
                    for k in range(3):
                        if m >> k & 1:
                            marg[k] += pr
                    if m & CZ12:
                        # a CZ error collapses to Z on either control with probability 1/2
                        marg[0] += pr / 2
                        marg[1] += pr / 2
                for k, q in enumerate((q0, q1, q2)):
                    if q >= 0 and marg[k] > 0:
                        inst = 1 << data_pos[q] if q in data_pos else 0
                        record(S[q], marg[k], layer, inst)
        if code == OP_MEAS:
            S[q0] ^= rec_mask.get(int(ops[i, C_REC]), 0)
        elif code == OP_CNOT:
            S[q1] ^= S[q0]
        elif code in (OP_PREP, OP_PREP0):
            S[q0] = 0
        elif code == OP_SWAP:
            S[q0], S[q1] = S[q1], S[q0]

    edges, obs, inst, lay, pr = [], [], [], [], []
    for dbits in sorted(groups):
        nodes = [b for b in range(n_det) if dbits >> b & 1]
        if len(nodes) > 2:
            raise ContractViolation(
                f"a single fault flips {len(nodes)} detectors of block {hist.block.value}")
        g = groups[dbits]
        (o, ins, layer), p = max(g.items(), key=lambda kv: (kv[1], -kv[0][2]))
        edges.append((nodes[0], nodes[1] if len(nodes) == 2 else BOUNDARY))
        obs.append([o >> j & 1 for j in range(d)])
        inst.append([ins >> j & 1 for j in range(d)])
        lay.append(layer)
        pr.append(sum(g.values()))
    return DetectorModel(hist.block, d, n_rounds, labels, edges,
                         np.array(obs, np.uint8).reshape(-1, d), np.array(inst, np.uint8).reshape(-1, d),
                         np.array(lay, np.int64), np.array(pr))


def detector_values(rec: np.ndarray, hist, n_rounds: int,
                    corrections: Iterable[tuple[int, np.ndarray]] = ()) -> np.ndarray:
    """Detector bits per shot, with mid-circuit corrections folded out.

    ``corrections`` lists ``(n, c)``: the Z correction ``c`` (shots x d) was
    applied after round ``n - 1``.  Later outcomes are adjusted as if it
    had not been applied, so the detectors see the raw error history.
    """
    d = len(hist.data)
    nb = rec.shape[0]
    s = np.zeros((nb, n_rounds, d - 1), np.uint8)
    for r in range(n_rounds):
        s[:, r] = rec[:, hist.rounds[r]]
    for n, c in corrections:
        c = c.astype(np.uint8)
        if n < n_rounds:
            s[:, n:] ^= (c[:, :-1] ^ c[:, 1:])[:, None, :]
    dets = s.copy()
    dets[:, 1:] ^= s[:, :-1]
    return dets.reshape(nb, -1)


# -- reference matching ----------------------------------------------------

@dataclass
class MatchingGraph:
    """Complete graph on the detection events plus one boundary copy per event."""
    events: list[int]
    dist: np.ndarray        # (k, k) shortest path lengths between events
    bdist: np.ndarray       # (k,) shortest path length of each event to the boundary


def shortest_paths(dem: DetectorModel, source: int) -> tuple[dict[int, float], dict[int, tuple[int, int]]]:
    """Dijkstra from ``source`` over the detector graph (boundary node included)."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for j, (u, v) in enumerate(dem.edges):
        adj.setdefault(u, []).append((v, j))
        adj.setdefault(v, []).append((u, j))
    dist = {source: 0.0}
    back: dict[int, tuple[int, int]] = {}
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        if u == BOUNDARY and u != source:
            continue    # paths may end at the boundary but not pass through it
        for v, j in adj.get(u, ()):
            nd = du + 1.0
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                back[v] = (u, j)
                heapq.heappush(heap, (nd, v))
    return dist, back


def build_matching_graph(events: list[int], dem: DetectorModel) -> MatchingGraph:
    k = len(events)
    dist = np.full((k, k), np.inf)
    bdist = np.full(k, np.inf)
    for a, ev in enumerate(events):
        dd, _ = shortest_paths(dem, ev)
        bdist[a] = dd.get(BOUNDARY, np.inf)
        for b, ev2 in enumerate(events):
            dist[a, b] = dd.get(ev2, np.inf)
    return MatchingGraph(list(events), dist, bdist)


def mwpm(graph: MatchingGraph) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching; pairs of events or ``(event, BOUNDARY)``."""
    k = len(graph.events)
    g = nx.Graph()
    for a in range(k):
        for b in range(a + 1, k):
            if np.isfinite(graph.dist[a, b]):
                g.add_edge(("e", a), ("e", b), weight=-graph.dist[a, b])
        if np.isfinite(graph.bdist[a]):
            g.add_edge(("e", a), ("b", a), weight=-graph.bdist[a])
    for a in range(k):
        for b in range(a + 1, k):
            g.add_edge(("b", a), ("b", b), weight=0.0)
    m = nx.max_weight_matching(g, maxcardinality=True)
    pairs = []
    for u, v in m:
        if u[0] == "b" and v[0] == "b":
            continue
        if u[0] == "b":
            u, v = v, u
        e = graph.events[u[1]]
        pairs.append((e, BOUNDARY) if v[0] == "b" else tuple(sorted((e, graph.events[v[1]]))))
    if sum(1 if p[1] == BOUNDARY else 2 for p in pairs) != k:
        raise ContractViolation("no perfect matching of the detection events exists")
    return sorted(pairs)


def correction_from_matching(pairs: list[tuple[int, int]], dem: DetectorModel) -> np.ndarray:
    """Edges (bool mask over ``dem.edges``) along a shortest path for each matched pair."""
    chosen = np.zeros(len(dem.edges), bool)
    for u, v in pairs:
        _, back = shortest_paths(dem, u)
        node = v
        while node != u:
            prev, j = back[node]
            chosen[j] ^= True
            node = prev
    return chosen


def decode_reference(dem: DetectorModel, dets: np.ndarray) -> np.ndarray:
    """Single-shot matching without pymatching; returns the chosen edges."""
    events = np.flatnonzero(dets).tolist()
    return correction_from_matching(mwpm(build_matching_graph(events, dem)), dem)


# -- other decoders --------------------------------------------------------

def majority_decode_steane(outcomes: np.ndarray) -> np.ndarray:
    """Positions (bool mask) disagreeing with the majority of X outcomes.

    Accepts ``+1/-1`` values or ``0/1`` bits, one row per shot.
    """
    x = np.asarray(outcomes)
    bits = x < 0 if (x < 0).any() or (x > 1).any() or not x.size else x.astype(bool)
    d = bits.shape[-1]
    if d % 2 == 0:
        raise ValueError("need an odd number of outcomes")
    maj = bits.sum(axis=-1, keepdims=True) > d // 2
    return bits != maj


def majority_failure(bits: np.ndarray) -> np.ndarray:
    """Logical X outcome is -1 when most of the transversal outcomes are."""
    return bits.sum(axis=-1) > bits.shape[-1] // 2


def cz_posteriori_undo(circuit: Circuit, net_frame, stop_layer: int) -> ErrorState:
    """CZ (and Z) errors on the controls implied by target phase flips.

    ``net_frame(layer)`` returns the set of target qubits holding an
    uncorrected Z just before ``layer``.  Every Toffoli whose target is
    flipped adds a CZ on its controls; the result is propagated through
    layers ``< stop_layer`` and is its own inverse.
    """
    e = ErrorState()
    for li, layer in enumerate(circuit.layers[:stop_layer]):
        flipped = None
        for g in layer.gates:
            if g.kind is GateKind.CCX:
                if flipped is None:
                    flipped = net_frame(li)
                if g.qubits[2] in flipped:
                    e = e.with_cz(g.qubits[0], g.qubits[1])
            elif g.kind is not GateKind.MEAS_X:
                e = propagate(e, g)
    return e


def logical_failure_check(e: ErrorState, d: int, blocks: Iterable[Block] = (Block.CONTROL_A, Block.CONTROL_B, Block.TARGET)) -> set[str]:
    """Logical errors left by a residual error after perfect recovery.

    A block fails when it carries an odd number of Z errors.  Any leftover
    CZ between the two control blocks is counted as a logical CZ; this is
    conservative, since a lone CZ collapses into correctable Z errors.
    """
    out = set()
    for b in blocks:
        if sum(1 for q in e.zframe if q.block is b) % 2:
            out.add(f"Z_L^{b.value}")
    if any({q.block for q in p} == {Block.CONTROL_A, Block.CONTROL_B} for p in e.czset):
        out.add("CZ_L^AB")
    return out
