"""Cat qubit parameters and the stochastic phase-flip channels of each gate.

Every noisy gate is a perfect gate followed by one error drawn from its
channel.  All channels are parametrised by ``p``, the phase-flip
probability of one time step ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ContractViolation, ErrorState, Gate, GateKind

NBAR_MAX = 15.0


@dataclass(frozen=True)
class CatQubitParams:
    nbar: float
    kappa1: float
    kappa2: float
    T: float | None = None

    def __post_init__(self):
        if self.nbar <= 0:
            raise ValueError("nbar must be positive")
        if self.kappa1 < 0:
            raise ValueError("kappa1 must be non-negative")
        if self.kappa2 <= 0:
            raise ValueError("kappa2 must be positive")
        if self.T is not None and self.T <= 0:
            raise ValueError("gate time T must be positive")


def idle_phase_flip_probability(params: CatQubitParams) -> float:
    """Phase-flip probability ``nbar * kappa1 * T`` of one time step."""
    if params.T is None:
        raise ValueError("gate time T is required")
    return params.nbar * params.kappa1 * params.T


def optimal_gate_time(params: CatQubitParams) -> float:
    """Gate time maximising the CNOT fidelity under single-photon loss."""
    if params.kappa1 == 0:
        raise ValueError("no finite optimum: gate time is unbounded without single-photon loss")
    return 1.0 / (2.0 * params.nbar * math.sqrt(math.pi)) * math.sqrt(1.0 / (params.kappa1 * params.kappa2))


def optimal_phase_flip_probability(kappa1: float, kappa2: float) -> float:
    if kappa2 <= 0 or kappa1 < 0:
        raise ValueError("need kappa2 > 0 and kappa1 >= 0")
    return math.sqrt(kappa1 / kappa2) / (2.0 * math.sqrt(math.pi))


def ratio_for_phase_flip_probability(p: float) -> float:
    """Inverse of :func:`optimal_phase_flip_probability`: ``kappa1/kappa2``."""
    return (2.0 * math.sqrt(math.pi) * p) ** 2


def cnot_bitflip_probability(nbar: float, ratio: float) -> float:
    """Total bit-flip probability of one CNOT (numerical fit).

    ``ratio`` is ``kappa1 / kappa2``.
    """
    if ratio < 0 or nbar <= 0:
        raise ValueError("need ratio >= 0 and nbar > 0")
    return (5.58 * math.sqrt(ratio) + 1.68 * ratio) * math.exp(-2.0 * nbar)


# -- channels --------------------------------------------------------------

# Error operators are bitmasks over the gate operands:
# bit 0/1/2 = Z on operand 0/1/2, bit 3 = CZ between operands 0 and 1.
Z1, Z2, Z3, CZ12 = 1, 2, 4, 8


class GateErrorModel(NamedTuple):
    kind: GateKind
    errors: tuple[tuple[int, float], ...]

    @property
    def identity_probability(self) -> float:
        return 1.0 - sum(pr for _, pr in self.errors)


@dataclass(frozen=True)
class NoiseConfig:
    """Noise strength plus switches for the channels not fixed by the gate table.

    ``swap`` gives the single-qubit Z probabilities of a SWAP in units of
    ``p``; the default matches the CZ marginals.
    """
    p: float
    measurement_flip: float | None = None
    swap: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 / 6.0:
            raise ValueError(f"p={self.p} outside [0, 1/6]: the Toffoli channel would not normalise")
        if self.measurement_flip is not None and not 0.0 <= self.measurement_flip <= 1.0:
            raise ValueError("measurement flip probability outside [0, 1]")
        if sum(self.swap) * self.p > 1.0:
            raise ValueError("SWAP channel does not normalise")

    @property
    def q_meas(self) -> float:
        return self.p if self.measurement_flip is None else self.measurement_flip

    @classmethod
    def from_params(cls, params: CatQubitParams, **kw) -> "NoiseConfig":
        return cls(idle_phase_flip_probability(params), **kw)

    @classmethod
    def from_dict(cls, obj: dict) -> "NoiseConfig":
        """Accept ``{"p": ...}`` or ``{"nbar", "kappa1", "kappa2", "T"}``.

        ``T`` may be the string ``"optimal"``.
        """
        kw = {}
        if "measurement_flip" in obj:
            kw["measurement_flip"] = obj["measurement_flip"]
        if "swap" in obj:
            kw["swap"] = tuple(obj["swap"])
        if "p" in obj:
            return cls(float(obj["p"]), **kw)
        params = CatQubitParams(float(obj["nbar"]), float(obj["kappa1"]), float(obj["kappa2"]))
        T = obj.get("T", "optimal")
        if T == "optimal":
            T = optimal_gate_time(params)
        params = CatQubitParams(params.nbar, params.kappa1, params.kappa2, float(T))
        return cls.from_params(params, **kw)

    def to_dict(self) -> dict:
        out = {"p": self.p}
        if self.measurement_flip is not None:
            out["measurement_flip"] = self.measurement_flip
        if self.swap != (1.0, 1.0):
            out["swap"] = list(self.swap)
        return out


def channel(kind: GateKind, cfg: NoiseConfig) -> GateErrorModel:
    p = cfg.p
    if kind in (GateKind.IDLE, GateKind.PREP_PLUS, GateKind.PREP_ZERO_L,
                GateKind.PAULI_Z, GateKind.PAULI_X):
        errs = ((Z1, p),)
    elif kind is GateKind.CZ:
        errs = ((Z1, p), (Z2, p))
    elif kind is GateKind.CNOT:
        errs = ((Z1, 3 * p), (Z2, p / 2), (Z1 | Z2, p / 2))
    elif kind is GateKind.CCX:
        errs = ((Z1, p), (Z2, p), (Z3, p / 2), (CZ12, 3 * p), (CZ12 | Z3, p / 2))
    elif kind is GateKind.SWAP:
        errs = ((Z1, cfg.swap[0] * p), (Z2, cfg.swap[1] * p))
    elif kind is GateKind.MEAS_X:
        # measurement errors flip the reported outcome, not the state
        errs = ()
    else:
        raise ContractViolation(f"no error model for gate kind {kind}")
    return GateErrorModel(kind, errs)


def error_from_mask(mask: int, g: Gate) -> ErrorState:
    e = ErrorState()
    for bit in range(3):
        if mask >> bit & 1:
            e = e.with_z(g.qubits[bit])
    if mask & CZ12:
        e = e.with_cz(g.qubits[0], g.qubits[1])
    return e


def sample_gate_error(g: Gate, cfg: NoiseConfig, rng: np.random.Generator) -> ErrorState:
    """Draw one error from the channel of ``g`` (the identity is an empty state)."""
    model = channel(g.kind, cfg)
    u = rng.random()
    acc = 0.0
    for mask, pr in model.errors:
        acc += pr
        if u < acc:
            return error_from_mask(mask, g)
    return ErrorState()


def sample_measurement_flip(cfg: NoiseConfig, rng: np.random.Generator) -> bool:
    return bool(rng.random() < cfg.q_meas)


def prep_zero_L_noise(d: int, cfg: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Z-frame (bool array of length ``d``) left by preparing a logical ``|0>``."""
    if d < 3 or d % 2 == 0:
        raise ValueError("d must be odd and at least 3")
    return rng.random(d) < cfg.p


def channel_table(cfg: NoiseConfig) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(probs, masks)`` arrays indexed by opcode, for the engine."""
    from .engine import OPCODES
    probs = np.zeros((len(OPCODES), 6))
    masks = np.zeros((len(OPCODES), 6), np.int64)
    for kind, code in OPCODES.items():
        if kind is GateKind.MEAS_X:
            probs[code, 0] = cfg.q_meas
            continue
        for j, (mask, pr) in enumerate(channel(kind, cfg).errors):
            probs[code, j] = pr
            masks[code, j] = mask
    return probs, masks
