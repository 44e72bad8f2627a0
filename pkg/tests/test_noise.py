import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom

from repcat.core import Block, ContractViolation, Gate, GateKind, QubitRef
from repcat.noise import (CatQubitParams, NoiseConfig, channel, channel_table, cnot_bitflip_probability,
                          idle_phase_flip_probability, optimal_gate_time, optimal_phase_flip_probability,
                          prep_zero_L_noise, ratio_for_phase_flip_probability, sample_gate_error)

NOISY = [GateKind.IDLE, GateKind.PREP_PLUS, GateKind.PREP_ZERO_L, GateKind.PAULI_Z, GateKind.PAULI_X,
         GateKind.CZ, GateKind.CNOT, GateKind.CCX, GateKind.SWAP]


def test_idle_probability():
    assert idle_phase_flip_probability(CatQubitParams(15, 0.0, 1e5, 1e-6)) == 0
    assert idle_phase_flip_probability(CatQubitParams(10, 1e3, 1e5, 1e-6)) == pytest.approx(0.01)
    assert idle_phase_flip_probability(CatQubitParams(15, 1e3, 1e5, 1.3e-6)) == pytest.approx(0.0195)
    with pytest.raises(ValueError):
        idle_phase_flip_probability(CatQubitParams(15, 1e3, 1e5))


def test_optimal_gate_time():
    base = CatQubitParams(15, 1e3, 2.2e5)
    assert optimal_gate_time(base) == pytest.approx(1.2679218e-6, rel=1e-6)
    assert optimal_gate_time(CatQubitParams(30, 1e3, 2.2e5)) == pytest.approx(optimal_gate_time(base) / 2)
    assert optimal_gate_time(CatQubitParams(15, 2e3, 4.4e5)) == pytest.approx(optimal_gate_time(base) / 2)
    with pytest.raises(ValueError, match="no finite optimum"):
        optimal_gate_time(CatQubitParams(15, 0.0, 2.2e5))


def test_optimal_phase_flip_probability():
    assert optimal_phase_flip_probability(1.0, 220.0) == pytest.approx(0.0190188, rel=1e-5)
    assert optimal_phase_flip_probability(0.0, 1.0) == 0
    assert 1 / ratio_for_phase_flip_probability(0.01) == pytest.approx(795.77, rel=1e-4)


@given(st.floats(1, 30), st.floats(1e-2, 1e4), st.floats(1e3, 1e8))
def test_optimal_probability_equals_idle_probability_at_optimal_time(nbar, k1, k2):
    params = CatQubitParams(nbar, k1, k2)
    at_opt = CatQubitParams(nbar, k1, k2, optimal_gate_time(params))
    assert idle_phase_flip_probability(at_opt) == pytest.approx(optimal_phase_flip_probability(k1, k2), rel=1e-12)


def test_cnot_bitflip_fit():
    ratio = ratio_for_phase_flip_probability(0.01)
    assert cnot_bitflip_probability(15, 0.0) == 0
    assert cnot_bitflip_probability(15, ratio) == pytest.approx(1.8707e-14, rel=1e-4)
    assert cnot_bitflip_probability(16, ratio) / cnot_bitflip_probability(15, ratio) == pytest.approx(math.exp(-2))
    assert cnot_bitflip_probability(15, 2 * ratio) > cnot_bitflip_probability(15, ratio)


@given(st.sampled_from(NOISY), st.floats(0, 1 / 6))
def test_channels_normalise(kind, p):
    model = channel(kind, NoiseConfig(p))
    assert all(pr >= 0 for _, pr in model.errors)
    assert model.identity_probability >= -1e-15
    assert model.identity_probability + sum(pr for _, pr in model.errors) == pytest.approx(1.0)


def test_channel_entries():
    p = 0.01
    cfg = NoiseConfig(p)
    assert sorted(pr for _, pr in channel(GateKind.CNOT, cfg).errors) == pytest.approx([p / 2, p / 2, 3 * p])
    assert channel(GateKind.CNOT, cfg).identity_probability == pytest.approx(1 - 4 * p)
    assert channel(GateKind.CCX, cfg).identity_probability == pytest.approx(1 - 6 * p)
    assert channel(GateKind.CZ, cfg).identity_probability == pytest.approx(1 - 2 * p)
    assert channel(GateKind.IDLE, cfg).identity_probability == pytest.approx(1 - p)


def test_p_out_of_range():
    with pytest.raises(ValueError):
        NoiseConfig(0.2)


def test_unknown_kind_is_rejected():
    with pytest.raises(ContractViolation):
        channel("bogus", NoiseConfig(0.01))


def q(block, i):
    return QubitRef(block, i)


def test_sampled_frequencies_match_table():
    # 10^6 draws per gate, each component within 5 binomial sigma
    rng = np.random.default_rng(11)
    p = 0.01
    cfg = NoiseConfig(p)
    probs, masks = channel_table(cfg)
    from repcat.engine import OPCODES
    n = 10 ** 6
    for kind in (GateKind.CNOT, GateKind.CCX):
        code = OPCODES[kind]
        u = rng.random(n)
        idx = np.searchsorted(np.cumsum(probs[code]), u, side="right")
        for j, (mask, pr) in enumerate(channel(kind, cfg).errors):
            assert masks[code, j] == mask
            k = np.count_nonzero(idx == j)
            assert abs(k - n * pr) < 5 * math.sqrt(n * pr * (1 - pr))


def test_sample_gate_error_cnot_z1_rate():
    rng = np.random.default_rng(5)
    g = Gate(GateKind.CNOT, (q(Block.ANCILLA, 0), q(Block.TARGET, 0)))
    cfg = NoiseConfig(0.01)
    n = 200_000
    z1 = sum(1 for _ in range(n) if sample_gate_error(g, cfg, rng).zframe == {g.qubits[0]})
    assert abs(z1 / n - 0.03) < 5 * math.sqrt(0.03 * 0.97 / n)


def test_sample_gate_error_noiseless():
    rng = np.random.default_rng(0)
    g = Gate(GateKind.CCX, (q(Block.CONTROL_A, 0), q(Block.CONTROL_B, 0), q(Block.TARGET, 0)))
    assert all(sample_gate_error(g, NoiseConfig(0.0), rng).is_empty() for _ in range(1000))


def test_prep_zero_noise():
    rng = np.random.default_rng(3)
    assert not prep_zero_L_noise(5, NoiseConfig(0.0), rng).any()
    n = 200_000
    frames = np.array([prep_zero_L_noise(3, NoiseConfig(0.01), rng) for _ in range(n)])
    one = np.count_nonzero(frames.sum(axis=1) == 1) / n
    assert one == pytest.approx(binom.pmf(1, 3, 0.01), abs=5 * math.sqrt(0.0294 / n))
    assert frames.sum(axis=1).mean() == pytest.approx(0.03, abs=0.002)
    with pytest.raises(ValueError):
        prep_zero_L_noise(4, NoiseConfig(0.01), rng)


def test_from_dict():
    assert NoiseConfig.from_dict({"p": 0.01}) == NoiseConfig(0.01)
    cfg = NoiseConfig.from_dict({"nbar": 15, "kappa1": 1e3, "kappa2": 2.2e5})
    assert cfg.p == pytest.approx(optimal_phase_flip_probability(1e3, 2.2e5))
    cfg = NoiseConfig(0.01, measurement_flip=0.002, swap=(1.0, 2.0))
    assert NoiseConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.q_meas == 0.002
