"""Circuit representation, the restricted {Z, CZ} error algebra and a CHP tableau.

Every physical gate used by the repetition cat qubit circuits is
bias-preserving, so phase-flip errors never turn into bit-flips.  Tracking
Pauli ``Z`` errors plus ``CZ`` errors between Toffoli control qubits is
therefore enough to describe any error pattern, as long as all Toffoli
targets live in one code block.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from . import _chp


class Block(str, enum.Enum):
    CONTROL_A = "ControlA"
    CONTROL_B = "ControlB"
    TARGET = "Target"
    ANCILLA = "Ancilla"
    ANCILLA_BLOCK = "AncillaBlock"


DATA_BLOCKS = (Block.CONTROL_A, Block.CONTROL_B, Block.TARGET)


class GateKind(str, enum.Enum):
    IDLE = "Idle"
    PREP_PLUS = "PrepPlus"
    PREP_ZERO_L = "PrepZeroL"
    MEAS_X = "MeasX"
    PAULI_X = "PauliX"
    PAULI_Z = "PauliZ"
    CZ = "CZ"
    CNOT = "CNOT"
    CCX = "CCX"
    SWAP = "SWAP"


ARITY = {
    GateKind.IDLE: 1,
    GateKind.PREP_PLUS: 1,
    GateKind.PREP_ZERO_L: 1,
    GateKind.MEAS_X: 1,
    GateKind.PAULI_X: 1,
    GateKind.PAULI_Z: 1,
    GateKind.CZ: 2,
    GateKind.CNOT: 2,
    GateKind.CCX: 3,
    GateKind.SWAP: 2,
}


class ContractViolation(RuntimeError):
    """Raised when an operation is used outside of its documented contract."""


@dataclass(frozen=True, order=True)
class QubitRef:
    block: Block
    index: int

    def __str__(self) -> str:
        return f"{self.block.value}[{self.index}]"


def data_qubit(block: Block, index: int, d: int) -> QubitRef:
    """Reference to qubit ``index`` of a data block, reduced modulo ``d``."""
    if block not in DATA_BLOCKS:
        raise ValueError(f"{block} is not a data block")
    return QubitRef(block, index % d)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[QubitRef, ...]
    noisy: bool = True

    def __post_init__(self):
        if len(self.qubits) != ARITY[self.kind]:
            raise ValueError(
                f"{self.kind.value} takes {ARITY[self.kind]} operands, got {len(self.qubits)}")

    def to_json(self) -> dict:
        out = {"kind": self.kind.value,
               "operands": [[q.block.value, q.index] for q in self.qubits]}
        if not self.noisy:
            out["noisy"] = False
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Gate":
        qs = tuple(QubitRef(Block(b), int(i)) for b, i in obj["operands"])
        return cls(GateKind(obj["kind"]), qs, obj.get("noisy", True))


@dataclass
class Layer:
    """One time step of duration ``T``.

    Untouched qubits carry an implicit Idle.  A noiseless layer models an
    ideal operation (perfect readout, instantaneous perfect recovery) and
    adds no idle noise.
    """
    gates: list[Gate] = field(default_factory=list)
    noisy: bool = True
    label: str = ""


class Violation(NamedTuple):
    layer: int
    qubit: QubitRef | None
    message: str


@dataclass
class Circuit:
    d: int
    qubits: list[QubitRef]
    layers: list[Layer] = field(default_factory=list)

    def index(self) -> dict[QubitRef, int]:
        return {q: i for i, q in enumerate(self.qubits)}

    def gates(self) -> Iterator[tuple[int, Gate]]:
        for li, layer in enumerate(self.layers):
            for g in layer.gates:
                yield li, g

    def measurements(self) -> list[tuple[int, Gate]]:
        """MeasX gates in record order (layer order, then gate order)."""
        return [(li, g) for li, g in self.gates() if g.kind is GateKind.MEAS_X]

    def count(self, kind: GateKind, layers: Iterable[int] | None = None) -> int:
        sel = range(len(self.layers)) if layers is None else layers
        return sum(1 for li in sel for g in self.layers[li].gates if g.kind is kind)

    def to_json(self) -> str:
        doc = {
            "d": self.d,
            "qubits": [[q.block.value, q.index] for q in self.qubits],
            "layers": [
                {"noisy": layer.noisy, "label": layer.label,
                 "gates": [g.to_json() for g in layer.gates]}
                for layer in self.layers
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        doc = json.loads(text)
        qubits = [QubitRef(Block(b), int(i)) for b, i in doc["qubits"]]
        layers = [Layer([Gate.from_json(g) for g in lay["gates"]],
                        lay.get("noisy", True), lay.get("label", ""))
                  for lay in doc["layers"]]
        return cls(int(doc["d"]), qubits, layers)


def validate_circuit(c: Circuit) -> list[Violation]:
    """Return one :class:`Violation` per broken circuit invariant.

    Checks that no qubit is used twice in a layer, that every operand is a
    registered qubit with a data index below ``d``, and that all Toffoli
    targets sit in the Target block.  An empty list means the circuit can be
    simulated with the {Z, CZ} error algebra.
    """
    out: list[Violation] = []
    known = set(c.qubits)
    ccx_target_blocks: set[Block] = set()
    first_ccx_layer = None
    for li, layer in enumerate(c.layers):
        seen: set[QubitRef] = set()
        for g in layer.gates:
            for q in g.qubits:
                if q in seen:
                    out.append(Violation(li, q, f"qubit {q} used twice in layer"))
                seen.add(q)
                if q not in known:
                    out.append(Violation(li, q, f"qubit {q} not registered in circuit"))
                if q.block in DATA_BLOCKS and not 0 <= q.index < c.d:
                    out.append(Violation(li, q, f"data index of {q} not reduced modulo d"))
            if g.kind is GateKind.CCX:
                t = g.qubits[2]
                if first_ccx_layer is None:
                    first_ccx_layer = li
                if t in g.qubits[:2]:
                    out.append(Violation(li, t, "CCX target repeated as control"))
                ccx_target_blocks.add(t.block)
                if t.block is not Block.TARGET:
                    out.append(Violation(li, t, f"CCX target {t} outside the Target block"))
    if len(ccx_target_blocks) > 1:
        out.append(Violation(first_ccx_layer, None, "mixed Toffoli target blocks"))
    return out


# -- error algebra ---------------------------------------------------------

def _pair(a: QubitRef, b: QubitRef) -> frozenset:
    if a == b:
        raise ContractViolation(f"CZ pair needs two distinct qubits, got {a} twice")
    return frozenset((a, b))


@dataclass(frozen=True)
class ErrorState:
    """Pending Z errors plus a parity set of pending CZ errors.

    The error acts *after* all gates seen so far.  Both components are
    self-inverse, so adding an element twice removes it.
    """
    zframe: frozenset = frozenset()
    czset: frozenset = frozenset()

    def is_empty(self) -> bool:
        return not self.zframe and not self.czset

    def with_z(self, *qubits: QubitRef) -> "ErrorState":
        return ErrorState(self.zframe ^ frozenset(qubits), self.czset)

    def with_cz(self, a: QubitRef, b: QubitRef) -> "ErrorState":
        return ErrorState(self.zframe, self.czset ^ {_pair(a, b)})

    def compose(self, other: "ErrorState") -> "ErrorState":
        return ErrorState(self.zframe ^ other.zframe, self.czset ^ other.czset)

    def restrict(self, blocks: Iterable[Block]) -> frozenset:
        bs = set(blocks)
        return frozenset(q for q in self.zframe if q.block in bs)


def propagate(e: ErrorState, g: Gate) -> ErrorState:
    """Move the error ``e`` from before gate ``g`` to after it.

    Returns ``E'`` with ``g E = E' g``.  Raises :class:`ContractViolation`
    when the result would leave the {Z, CZ} group (a CZ error reaching a
    Toffoli target), or when a qubit with a pending CZ is re-prepared.
    """
    k = g.kind
    qs = g.qubits
    z = set(e.zframe)
    cz = set(e.czset)

    if k in (GateKind.IDLE, GateKind.PAULI_Z, GateKind.CZ, GateKind.MEAS_X):
        return e
    if k in (GateKind.PREP_PLUS, GateKind.PREP_ZERO_L):
        q = qs[0]
        if any(q in p for p in cz):
            raise ContractViolation(f"qubit {q} re-prepared with a pending CZ error")
        z.discard(q)
        return ErrorState(frozenset(z), e.czset)
    if k is GateKind.PAULI_X:
        q = qs[0]
        for p in cz:
            if q in p:
                (other,) = p - {q}
                z ^= {other}
        return ErrorState(frozenset(z), e.czset)
    if k is GateKind.CNOT:
        c, t = qs
        if t in z:
            z ^= {c}
        new = set()
        for p in cz:
            if t in p:
                (other,) = p - {t}
                new ^= {p}
                if other == c:
                    z ^= {c}
                else:
                    new ^= {_pair(c, other)}
            else:
                new ^= {p}
        return ErrorState(frozenset(z), frozenset(new))
    if k is GateKind.CCX:
        a, b, t = qs
        if any(t in p for p in cz):
            raise ContractViolation(
                f"CZ error on Toffoli target {t} would propagate to a non-Clifford CCZ")
        if t in z:
            cz ^= {_pair(a, b)}
        return ErrorState(e.zframe, frozenset(cz))
    if k is GateKind.SWAP:
        a, b = qs
        swap = {a: b, b: a}
        z2 = frozenset(swap.get(q, q) for q in z)
        cz2 = frozenset(frozenset(swap.get(q, q) for q in p) for p in cz)
        return ErrorState(z2, cz2)
    raise ContractViolation(f"unknown gate kind {k}")


def propagate_circuit(e: ErrorState, c: Circuit, start: int = 0, stop: int | None = None) -> ErrorState:
    for layer in c.layers[start:stop]:
        for g in layer.gates:
            e = propagate(e, g)
    return e


# -- stabilizer tableau ----------------------------------------------------

CLIFFORD_KINDS = (GateKind.PAULI_X, GateKind.PAULI_Z, GateKind.CZ, GateKind.CNOT,
                  GateKind.SWAP, GateKind.PREP_PLUS)


class StabilizerTableau:
    """CHP tableau on ``n`` qubits, initialised to ``|+>^n``.

    Only the Clifford gates needed by error circuits are supported; feeding
    a Toffoli raises :class:`ContractViolation`.
    """

    def __init__(self, n: int, signs=None):
        self.n = n
        self.x, self.z, self.r = _chp.empty(n)
        s = np.zeros(n, np.uint8) if signs is None else np.asarray(signs, np.uint8)
        _chp.init_plus(self.x, self.z, self.r, s)

    @classmethod
    def product(cls, state: str) -> "StabilizerTableau":
        """Product state from a string over ``'+-01'``, one char per qubit."""
        t = cls(len(state), [c in "-1" for c in state])
        for q, c in enumerate(state):
            if c in "01":
                _chp.apply_h(t.x, t.z, t.r, q)
        return t

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau.__new__(StabilizerTableau)
        t.n, t.x, t.z, t.r = self.n, self.x.copy(), self.z.copy(), self.r.copy()
        return t

    def stabilizers(self) -> list[str]:
        """Stabilizer generators as signed Pauli strings, e.g. ``'+XZ'``."""
        out = []
        for i in range(self.n, 2 * self.n):
            s = "-" if self.r[i] else "+"
            for j in range(self.n):
                s += "IXZY"[int(self.x[i, j]) + 2 * int(self.z[i, j])]
            out.append(s)
        return out

    def __eq__(self, other) -> bool:
        return (isinstance(other, StabilizerTableau) and self.n == other.n
                and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)
                and np.array_equal(self.r[:-1], other.r[:-1]))

    def apply_inplace(self, kind: GateKind, qubits: tuple[int, ...], rng=None) -> None:
        x, z, r = self.x, self.z, self.r
        if kind is GateKind.PAULI_X:
            _chp.apply_x(x, z, r, qubits[0])
        elif kind is GateKind.PAULI_Z:
            _chp.apply_z(x, z, r, qubits[0])
        elif kind is GateKind.CZ:
            _chp.apply_cz(x, z, r, qubits[0], qubits[1])
        elif kind is GateKind.CNOT:
            _chp.apply_cnot(x, z, r, qubits[0], qubits[1])
        elif kind is GateKind.SWAP:
            _chp.apply_swap(x, z, r, qubits[0], qubits[1])
        elif kind is GateKind.PREP_PLUS:
            rng = np.random.default_rng() if rng is None else rng
            bit = _chp.measure_x(x, z, r, qubits[0], int(rng.integers(2))) & 1
            if bit:
                _chp.apply_z(x, z, r, qubits[0])
        elif kind is GateKind.CCX:
            raise ContractViolation("non-Clifford gate fed to tableau")
        else:
            raise ContractViolation(f"gate {kind} not supported by the tableau")

    def measure_x_inplace(self, q: int, rng) -> tuple[int, bool]:
        res = _chp.measure_x(self.x, self.z, self.r, q, int(rng.integers(2)))
        bit, det = res & 1, bool(res & 2)
        return (-1 if bit else 1), det


def tableau_apply(t: StabilizerTableau, kind: GateKind, qubits: tuple[int, ...], rng=None) -> StabilizerTableau:
    out = t.copy()
    out.apply_inplace(kind, qubits, rng)
    return out


def tableau_measure_x(t: StabilizerTableau, q: int, rng) -> tuple[int, bool]:
    """Measure ``X_q`` in place; returns ``(outcome, deterministic)``."""
    if not 0 <= q < t.n:
        raise IndexError(q)
    return t.measure_x_inplace(q, rng)
