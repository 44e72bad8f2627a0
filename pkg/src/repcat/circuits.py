"""Builders for the logical gadgets on repetition cat qubits.

Each builder returns an :class:`Experiment`: a layered circuit plus the
classical schedule saying which measurement records are decoded when, what
is corrected mid-circuit, and which logical operators are checked at the
end.  All data blocks start in the ideal codeword ``|+>^d`` and every
experiment ends with a noiseless stabilizer round on each data block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Block, Circuit, Gate, GateKind, Layer, QubitRef, validate_circuit

A, B, C = Block.CONTROL_A, Block.CONTROL_B, Block.TARGET

EXPERIMENTS = ("memory", "prep_plus", "meas_xl", "cnot",
               "toffoli_concat", "toffoli_ft", "toffoli_swap")


@dataclass
class History:
    """Syndrome records of one data block.

    ``rounds[r][i]`` is the record index of stabilizer ``X_i X_{i+1}`` in
    round ``r``; with ``perfect_final`` the last round is noiseless.
    ``readout`` holds the records of a transversal X measurement of the
    data qubits, used by the logical measurement experiment.
    """
    block: Block
    data: list[QubitRef]
    rounds: list[list[int]] = field(default_factory=list)
    readout: list[int] | None = None
    readout_noisy: bool = False
    perfect_final: bool = False


@dataclass
class Directive:
    """Classical processing done once layer ``after_layer`` has completed.

    kind:
      ``mwpm``     decode the first ``n_rounds`` rounds of ``block`` and
                   apply the correction as perfect Z gates;
      ``steane``   majority-decode the ancilla-block ``records`` and correct
                   ``block``;
      ``cz_undo``  cancel the CZ errors that the decoded target history
                   implies on the control blocks (follows an ``mwpm``).
    """
    kind: str
    after_layer: int
    block: Block
    n_rounds: int = 0
    records: list[int] = field(default_factory=list)


@dataclass
class Experiment:
    name: str
    d: int
    circuit: Circuit
    histories: dict[Block, History]
    schedule: list[Directive]
    final: dict[Block, str]
    piece_layers: list[int] = field(default_factory=list)

    @property
    def criterion(self) -> tuple[str, ...]:
        if self.name == "meas_xl":
            return ("M_XL",)
        return tuple(f"X_L^{b.value}" for b in self.final)

    def validate(self) -> list:
        out = list(validate_circuit(self.circuit))
        recs = self.circuit.measurements()
        used = []
        for h in self.histories.values():
            for rnd in h.rounds:
                used.extend(rnd)
            if h.readout:
                used.extend(h.readout)
        for dv in self.schedule:
            if dv.kind == "steane":
                used.extend(dv.records)
        if sorted(used) != list(range(len(recs))):
            out.append((None, None, "measurement records not consumed exactly once"))
        return out


class _Builder:
    def __init__(self, d: int):
        if d < 3 or d % 2 == 0:
            raise ValueError(f"distance must be odd and >= 3, got {d}")
        self.d = d
        self.qubits: list[QubitRef] = []
        self._known: set[QubitRef] = set()
        self.layers: list[Layer] = []
        self._pending: list[tuple[Gate, int | None]] = []
        self._next_key = 0
        self.rec: dict[int, int] = {}
        self._nrec = 0
        self._n_anc = 0

    def reg(self, q: QubitRef) -> QubitRef:
        if q not in self._known:
            self._known.add(q)
            self.qubits.append(q)
        return q

    def data(self, block: Block, i: int) -> QubitRef:
        return self.reg(QubitRef(block, i % self.d))

    def block(self, block: Block) -> list[QubitRef]:
        return [self.data(block, i) for i in range(self.d)]

    def ancilla(self, kind: Block = Block.ANCILLA) -> QubitRef:
        q = QubitRef(kind, self._n_anc)
        self._n_anc += 1
        return self.reg(q)

    def add(self, kind: GateKind, *qs: QubitRef, noisy: bool = True) -> None:
        self._pending.append((Gate(kind, tuple(qs), noisy), None))

    def measure(self, q: QubitRef, noisy: bool = True) -> int:
        key = self._next_key
        self._next_key += 1
        self._pending.append((Gate(GateKind.MEAS_X, (q,), noisy), key))
        return key

    def flush(self, noisy: bool = True, label: str = "") -> int:
        """Pack pending gates into new layers as early as qubit order allows.

        Returns the index of the last layer written.
        """
        last: dict[QubitRef, int] = {}
        slots: list[list[tuple[Gate, int | None]]] = []
        for g, key in self._pending:
            at = 1 + max((last.get(q, -1) for q in g.qubits), default=-1)
            while len(slots) <= at:
                slots.append([])
            slots[at].append((g, key))
            for q in g.qubits:
                last[q] = at
        for slot in slots:
            for g, key in slot:
                if key is not None:
                    self.rec[key] = self._nrec
                    self._nrec += 1
            self.layers.append(Layer([g for g, _ in slot], noisy, label))
        self._pending = []
        return len(self.layers) - 1

    def emit(self, gates: list[Gate], noisy: bool = True, label: str = "") -> tuple[int, list[int]]:
        """Append exactly one layer; returns its index and the record of each measurement."""
        if self._pending:
            raise RuntimeError("flush pending gates before emitting a fixed layer")
        keys = []
        for g in gates:
            for q in g.qubits:
                self.reg(q)
            if g.kind is GateKind.MEAS_X:
                keys.append(self.measure(g.qubits[0], g.noisy))
            else:
                self._pending.append((g, None))
        before = len(self.layers)
        idx = self.flush(noisy, label)
        if idx != before:
            raise RuntimeError(f"gates of layer {label!r} overlap on a qubit")
        return idx, [self.rec[k] for k in keys]

    def circuit(self) -> Circuit:
        return Circuit(self.d, list(self.qubits), self.layers)


class _RoundPlan:
    """Ancillas and record keys for repeated X_i X_{i+1} measurements on a block."""

    def __init__(self, b: _Builder, block: Block):
        self.b = b
        self.block = block
        self.data = b.block(block)
        self.anc = [b.ancilla() for _ in range(b.d - 1)]
        # per round: record keys, or None when ``recs`` already holds the records
        self.keys: list[list[int] | None] = []
        self.recs: list[list[int] | None] = []

    def add_round(self, noisy: bool = True) -> None:
        self.keys.append(add_stabilizer_round(self.b, self.data, self.anc, noisy))
        self.recs.append(None)

    def history(self) -> History:
        rounds = [rec if keys is None else [self.b.rec[k] for k in keys]
                  for keys, rec in zip(self.keys, self.recs)]
        return History(self.block, self.data, rounds, perfect_final=True)


def build_stabilizer_measurement(i: int, d: int, data=None, ancilla=None, noisy: bool = True) -> list[Gate]:
    """Gates measuring ``X_i X_{i+1}`` with one ancilla.

    The ancilla is the CNOT control and the data qubits are targets, so a
    phase flip on a data qubit is copied onto the ancilla and flips its X
    outcome, while ancilla phase flips never reach the data.
    """
    if not 0 <= i < d - 1:
        raise IndexError(f"stabilizer index {i} out of range for d={d}")
    data = data or [QubitRef(C, j) for j in range(d)]
    anc = ancilla or QubitRef(Block.ANCILLA, i)
    return [Gate(GateKind.PREP_PLUS, (anc,), noisy),
            Gate(GateKind.CNOT, (anc, data[i]), noisy),
            Gate(GateKind.CNOT, (anc, data[i + 1]), noisy),
            Gate(GateKind.MEAS_X, (anc,), noisy)]


def round_steps(data, anc, noisy: bool = True) -> list[list[Gate]]:
    """One stabilizer round as four parallel steps: prepare, CNOT, CNOT, measure."""
    d = len(data)
    gadgets = [build_stabilizer_measurement(i, d, data, anc[i], noisy) for i in range(d - 1)]
    return [[gs[s] for gs in gadgets] for s in range(4)]


def add_stabilizer_round(b: _Builder, data, anc, noisy: bool = True) -> list[int]:
    d = len(data)
    gadgets = [build_stabilizer_measurement(i, d, data, anc[i], noisy) for i in range(d - 1)]
    keys = []
    # same step of every gadget together, so each data qubit meets one CNOT per layer
    for step in range(3):
        for gs in gadgets:
            b._pending.append((gs[step], None))
    for gs in gadgets:
        keys.append(b.measure(gs[3].qubits[0], noisy))
    return keys


def _finish(b: _Builder, plans: list[_RoundPlan]) -> dict[Block, History]:
    """Close with one noiseless stabilizer round on every block."""
    for pl in plans:
        pl.add_round(noisy=False)
    b.flush(noisy=False, label="perfect_round")
    return {pl.block: pl.history() for pl in plans}


def build_memory_experiment(d: int, rounds: int | None = None) -> Experiment:
    """``rounds`` noisy stabilizer rounds (default ``d``), then the perfect round."""
    rounds = d if rounds is None else rounds
    b = _Builder(d)
    plan = _RoundPlan(b, C)
    for _ in range(rounds):
        plan.add_round()
        b.flush(label="round")
    hist = _finish(b, [plan])
    return Experiment("memory", d, b.circuit(), hist, [], {C: "mwpm"})


def build_prep_plus_L(d: int) -> Experiment:
    b = _Builder(d)
    plan = _RoundPlan(b, C)
    for q in plan.data:
        b.add(GateKind.PREP_PLUS, q)
    b.flush(label="prep")
    for _ in range(d):
        plan.add_round()
        b.flush(label="round")
    hist = _finish(b, [plan])
    return Experiment("prep_plus", d, b.circuit(), hist, [], {C: "mwpm"})


def build_measure_XL(d: int) -> Experiment:
    """Transversal noisy X measurement decoded by majority vote."""
    b = _Builder(d)
    data = b.block(C)
    keys = [b.measure(q) for q in data]
    b.flush(label="readout")
    hist = {C: History(C, data, readout=[b.rec[k] for k in keys], readout_noisy=True)}
    return Experiment("meas_xl", d, b.circuit(), hist, [], {C: "majority"})


def build_transversal_cnot(d: int) -> Experiment:
    """Logical CNOT from block A onto block C, then a memory cycle on each."""
    b = _Builder(d)
    pa, pc = _RoundPlan(b, A), _RoundPlan(b, C)
    for i in range(d):
        b.add(GateKind.CNOT, pa.data[i], pc.data[i])
    b.flush(label="cnot")
    for _ in range(d):
        pa.add_round()
        pc.add_round()
        b.flush(label="round")
    hist = _finish(b, [pa, pc])
    return Experiment("cnot", d, b.circuit(), hist, [], {A: "mwpm", C: "mwpm"})


def build_round_robin_piece(k: int, d: int) -> list[Gate]:
    """Piece ``P_k``: ``CCX(A[i-k+1], B[i], C[i])`` for every ``i``."""
    if not 1 <= k <= d:
        raise ValueError(f"piece index {k} outside [1, {d}]")
    return [Gate(GateKind.CCX, (QubitRef(A, (i - k + 1) % d), QubitRef(B, i), QubitRef(C, i)))
            for i in range(d)]


def swap_network(d: int) -> list[list[tuple[int, int]]]:
    """Two layers of disjoint SWAPs realising the cyclic shift ``p -> p + 1``.

    The shift is the product of the reflections ``p -> -p`` and
    ``p -> 1 - p``; each reflection is a set of disjoint transpositions.
    """
    first = [(p, (-p) % d) for p in range(d) if p < (-p) % d]
    second = [(p, (1 - p) % d) for p in range(d) if p < (1 - p) % d]
    return [first, second]


def _piece(k: int, d: int, swap: bool) -> list[Gate]:
    if swap:
        # physical position i of block A always meets B[i] and C[i]
        return [Gate(GateKind.CCX, (QubitRef(A, i), QubitRef(B, i), QubitRef(C, i))) for i in range(d)]
    return build_round_robin_piece(k, d)


def _toffoli_round_robin(d: int, swap: bool, perfect_ec: bool) -> Experiment:
    name = "toffoli_swap" if swap else "toffoli_concat"
    b = _Builder(d)
    pa, pb, pc = _RoundPlan(b, A), _RoundPlan(b, B), _RoundPlan(b, C)
    schedule: list[Directive] = []
    pieces = []
    for k in range(1, d + 1):
        prep, cnot1, cnot2, meas = round_steps(pc.data, pc.anc, noisy=not perfect_ec)
        shift = swap_network(d) if swap and k < d else [[], []]
        swaps = [[Gate(GateKind.SWAP, (pa.data[i], pa.data[j])) for i, j in layer] for layer in shift]
        # the target ancillas are prepared while the piece runs
        L, _ = b.emit(_piece(k, d, swap) + prep, label=f"piece{k}")
        pieces.append(L)
        b.emit(cnot1 + swaps[0], noisy=not perfect_ec, label="target_ec")
        b.emit(cnot2 + swaps[1], noisy=not perfect_ec, label="target_ec")
        end, recs = b.emit(meas, noisy=not perfect_ec, label="target_ec")
        pc.keys.append(None)
        pc.recs.append(recs)
        schedule.append(Directive("mwpm", end, C, n_rounds=k))
        if k == d:
            schedule.append(Directive("cz_undo", end, C, n_rounds=k))
    if not perfect_ec:
        for _ in range(d):
            for pl in (pa, pb, pc):
                pl.add_round()
            b.flush(label="round")
    hist = _finish(b, [pa, pb, pc])
    exp = Experiment(name, d, b.circuit(), hist, schedule,
                     {A: "mwpm", B: "mwpm", C: "mwpm"}, pieces)
    if perfect_ec:
        exp.name += "_perfect_ec"
    return exp


def build_toffoli_concat_experiment(d: int, perfect_ec: bool = False) -> Experiment:
    """Round-robin Toffoli with one target stabilizer round after each piece.

    After piece ``d`` the target gets its ``d``-th round, the full target
    history is decoded and the CZ errors it implies on the control blocks
    are undone; then all three blocks go through a memory cycle.  With
    ``perfect_ec`` the target rounds are noiseless and instantaneous and
    the final cycle is replaced by the perfect round.
    """
    return _toffoli_round_robin(d, swap=False, perfect_ec=perfect_ec)


def build_toffoli_swap_experiment(d: int) -> Experiment:
    return _toffoli_round_robin(d, swap=True, perfect_ec=False)


def build_clifford_stabilizer_gadget(i: int, k: int, d: int, anc: QubitRef | None = None) -> list[Gate]:
    """Measure ``X^A_i X^A_{i+1} CX^{B,C}(i,i) CX^{B,C}(i+k,i+k)``."""
    if not 0 <= i < d - 1 or not 1 <= k < d:
        raise IndexError(f"gadget index (i={i}, k={k}) out of range for d={d}")
    anc = anc or QubitRef(Block.ANCILLA, 0)
    return [Gate(GateKind.PREP_PLUS, (anc,)),
            Gate(GateKind.CNOT, (anc, QubitRef(A, i))),
            Gate(GateKind.CNOT, (anc, QubitRef(A, (i + 1) % d))),
            Gate(GateKind.CCX, (anc, QubitRef(B, i), QubitRef(C, i))),
            Gate(GateKind.CCX, (anc, QubitRef(B, (i + k) % d), QubitRef(C, (i + k) % d))),
            Gate(GateKind.MEAS_X, (anc,))]


def build_modified_B_stabilizer_gadget(i: int, k: int, d: int, anc: QubitRef | None = None) -> list[Gate]:
    """Measure ``X^B_i X^B_{i+1} CX^{A,C}(i+1-k,i+1) CX^{A,C}(i+1,i+1)``.

    Equals the conjugated B stabilizer only while the target block is in
    the code space, so it must follow an error correction of the target.
    On the code space every ``X^C_j`` acts alike, so both Toffolis target
    ``C_{i+1}``: a phase flip left on one target qubit by the correction
    then disturbs a single B gadget instead of two.
    """
    if not 0 <= i < d - 1 or not 1 <= k < d:
        raise IndexError(f"gadget index (i={i}, k={k}) out of range for d={d}")
    anc = anc or QubitRef(Block.ANCILLA, 0)
    return [Gate(GateKind.PREP_PLUS, (anc,)),
            Gate(GateKind.CNOT, (anc, QubitRef(B, i))),
            Gate(GateKind.CNOT, (anc, QubitRef(B, (i + 1) % d))),
            Gate(GateKind.CCX, (anc, QubitRef(A, (i + 1 - k) % d), QubitRef(C, (i + 1) % d))),
            Gate(GateKind.CCX, (anc, QubitRef(A, (i + 1) % d), QubitRef(C, (i + 1) % d))),
            Gate(GateKind.MEAS_X, (anc,))]


def build_steane_ec(d: int, data=None, ancillas=None) -> list[Gate]:
    """Logical |0> ancilla block, transversal CNOT onto the data, X readout."""
    data = data or [QubitRef(C, j) for j in range(d)]
    ancillas = ancillas or [QubitRef(Block.ANCILLA_BLOCK, j) for j in range(d)]
    gates = [Gate(GateKind.PREP_ZERO_L, (a,)) for a in ancillas]
    gates += [Gate(GateKind.CNOT, (a, q)) for a, q in zip(ancillas, data)]
    gates += [Gate(GateKind.MEAS_X, (a,)) for a in ancillas]
    return gates


def gadget_support(gates: list[Gate]) -> set[QubitRef]:
    """Data qubits in the support of the observable a gadget measures."""
    return {q for g in gates for q in g.qubits
            if q.block in (A, B, C) and g.kind in (GateKind.CNOT, GateKind.CCX)}


def build_toffoli_ft_experiment(d: int) -> Experiment:
    """Toffoli with Steane EC on the target and Clifford stabilizers on the controls."""
    b = _Builder(d)
    pa, pb, pc = _RoundPlan(b, A), _RoundPlan(b, B), _RoundPlan(b, C)
    steane_anc = [b.ancilla(Block.ANCILLA_BLOCK) for _ in range(d)]
    gadget_anc = [b.ancilla() for _ in range(2 * (d - 1))]
    schedule: list[Directive] = []
    pieces = []
    for k in range(1, d + 1):
        if k == d:
            L, _ = b.emit(build_round_robin_piece(k, d), label=f"piece{k}")
            pieces.append(L)
            break
        steane = build_steane_ec(d, pc.data, steane_anc)
        ga = [build_clifford_stabilizer_gadget(i, k, d, gadget_anc[i]) for i in range(d - 1)]
        gb = [build_modified_B_stabilizer_gadget(i, k, d, gadget_anc[d - 1 + i]) for i in range(d - 1)]
        step = lambda gs, s: [g[s] for g in gs]
        # the |0>_L block and the gadget ancillas are prepared during the piece, and
        # the gadget CNOTs onto A and B run during the Steane round
        L, _ = b.emit(build_round_robin_piece(k, d) + steane[:d] + step(ga + gb, 0), label=f"piece{k}")
        pieces.append(L)
        b.emit(steane[d:2 * d] + step(ga + gb, 1), label="steane")
        end, recs = b.emit(steane[2 * d:] + step(ga + gb, 2), label="steane")
        schedule.append(Directive("steane", end, C, records=recs))
        for s in (3, 4):
            b.emit(step(ga, s), label="gadgets")
        for s in (3, 4):
            b.emit(step(gb, s), label="gadgets")
        # both families are read out after every Toffoli, so a control error
        # created by one family is seen by the other in the same round
        _, recs = b.emit(step(ga, 5) + step(gb, 5), label="gadgets")
        for pl, rr in ((pa, recs[:d - 1]), (pb, recs[d - 1:])):
            pl.keys.append(None)
            pl.recs.append(rr)
    for _ in range(d):
        for pl in (pa, pb, pc):
            pl.add_round()
        b.flush(label="round")
    hist = _finish(b, [pa, pb, pc])
    return Experiment("toffoli_ft", d, b.circuit(), hist, schedule,
                      {A: "mwpm", B: "mwpm", C: "mwpm"}, pieces)


BUILDERS = {
    "memory": build_memory_experiment,
    "prep_plus": build_prep_plus_L,
    "meas_xl": build_measure_XL,
    "cnot": build_transversal_cnot,
    "toffoli_concat": build_toffoli_concat_experiment,
    "toffoli_ft": build_toffoli_ft_experiment,
    "toffoli_swap": build_toffoli_swap_experiment,
}


def build(name: str, d: int, **kw) -> Experiment:
    try:
        fn = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(BUILDERS)}") from None
    return fn(d, **kw)
