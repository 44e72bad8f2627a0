"""Trajectory sampling, scheduled decoding and logical failure estimates."""

from __future__ import annotations

import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import engine
from .circuits import Experiment, build
from .core import Block, ErrorState, GateKind, propagate
from .decoder import DetectorModel, build_detector_model, detector_values, majority_decode_steane, majority_failure
from .noise import NoiseConfig, channel_table


class Simulator:
    """Runs batches of trajectories of one experiment under one noise model.

    Detector models are built once per decoding point and reused.
    """

    def __init__(self, exp: Experiment, cfg: NoiseConfig):
        self.exp = exp
        self.cfg = cfg
        self.prog = engine.compile_circuit(exp.circuit)
        self.probs, self.masks = channel_table(cfg)
        self._dems: dict[tuple, DetectorModel] = {}
        idx = exp.circuit.index()
        self.data_cols = {b: np.array([idx[q] for q in h.data], np.int64)
                          for b, h in exp.histories.items()}
        self._undo_gates = None

    def dem(self, block: Block, n_rounds: int, stop_op: int) -> DetectorModel:
        key = (block, n_rounds, stop_op)
        if key not in self._dems:
            self._dems[key] = build_detector_model(
                self.prog, self.exp.histories[block], n_rounds, stop_op, self.cfg)
        return self._dems[key]

    def new_state(self, seed: int, indices) -> engine.BatchState:
        return engine.BatchState(self.prog, seed, np.asarray(indices, np.int64))

    def run(self, st: engine.BatchState, noise_on: bool = True) -> np.ndarray:
        """Simulate, decode and check every trajectory of ``st``.

        Returns a bool array ``(shots, len(criterion))`` of logical failures.
        """
        exp, prog = self.exp, self.prog
        nb = len(st)
        d = exp.d
        log: dict[Block, list[tuple[int, int, np.ndarray]]] = {b: [] for b in exp.histories}
        last_decode: dict[Block, tuple[DetectorModel, np.ndarray]] = {}
        pos = 0
        for dv in exp.schedule:
            stop = int(prog.layer_end[dv.after_layer])
            engine.run_ops(prog, st, pos, stop, self.probs, self.masks, noise_on)
            pos = stop
            cols = self.data_cols[dv.block]
            if dv.kind == "mwpm":
                h = exp.histories[dv.block]
                dem = self.dem(dv.block, dv.n_rounds, stop)
                dets = detector_values(st.rec, h, dv.n_rounds, [(n, c) for n, _, c in log[dv.block]])
                chosen = dem.decode_batch(dets)
                est = _xor_rows(chosen, dem.obs)
                applied = np.zeros((nb, d), np.uint8)
                for _, _, c in log[dv.block]:
                    applied ^= c
                corr = est ^ applied
                engine.apply_z(prog, st, cols, corr)
                log[dv.block].append((dv.n_rounds, dv.after_layer, corr))
                last_decode[dv.block] = (dem, chosen)
            elif dv.kind == "steane":
                corr = majority_decode_steane(st.rec[:, dv.records]).astype(np.uint8)
                engine.apply_z(prog, st, cols, corr)
            elif dv.kind == "cz_undo":
                dem, chosen = last_decode[dv.block]
                self._cz_undo(st, dv, dem, chosen, log[dv.block])
            else:
                raise ValueError(f"unknown directive {dv.kind!r}")
        engine.run_ops(prog, st, pos, len(prog.ops), self.probs, self.masks, noise_on)

        out = np.zeros((nb, len(exp.final)), bool)
        for j, (blk, method) in enumerate(exp.final.items()):
            h = exp.histories[blk]
            if method == "majority":
                out[:, j] = majority_failure(st.rec[:, h.readout])
                continue
            n = len(h.rounds)
            dem = self.dem(blk, n, len(prog.ops))
            dets = detector_values(st.rec, h, n, [(m, c) for m, _, c in log[blk]])
            est = _xor_rows(dem.decode_batch(dets), dem.obs)
            applied = np.zeros((nb, d), np.uint8)
            for _, _, c in log[blk]:
                applied ^= c
            engine.apply_z(prog, st, self.data_cols[blk], est ^ applied)
            # after the perfect round and its correction the block is in the code
            # space, so X on any one data qubit is the logical X
            out[:, j] = engine.peek_x(prog, st, int(self.data_cols[blk][0])) != 0
        return out

    def _cz_undo(self, st, dv, dem: DetectorModel, chosen: np.ndarray, log) -> None:
        exp, prog = self.exp, self.prog
        pieces = exp.piece_layers
        # net target frame just before each piece: decoded errors minus applied corrections
        net = np.zeros((len(st), len(pieces), exp.d), np.uint8)
        for k, L in enumerate(pieces):
            if L > dv.after_layer:
                break
            net[:, k] = _xor_rows(chosen & (dem.layer < L)[None, :], dem.instant)
            for _, after, c in log:
                if after < L:
                    net[:, k] ^= c
        shots = np.flatnonzero(net.reshape(len(st), -1).any(axis=1))
        if not len(shots):
            return
        if self._undo_gates is None:
            tq = set(prog.tqubits.tolist())
            idx = exp.circuit.index()
            self._undo_gates = [(li, g) for li, layer in enumerate(exp.circuit.layers[:dv.after_layer + 1])
                                for g in layer.gates if any(idx[q] in tq for q in g.qubits)]
        idx = exp.circuit.index()
        piece_of = {L: k for k, L in enumerate(pieces)}
        tgt = exp.histories[dv.block].data
        pos = {q: i for i, q in enumerate(tgt)}
        sh, pairs, zs = [], [], []
        for b in shots:
            e = ErrorState()
            for li, g in self._undo_gates:
                if g.kind is GateKind.CCX and li in piece_of:
                    if net[b, piece_of[li], pos[g.qubits[2]]]:
                        e = e.with_cz(g.qubits[0], g.qubits[1])
                elif g.kind is not GateKind.MEAS_X:
                    e = propagate(e, g)
            for p in e.czset:
                a, c = sorted(p)
                sh.append(b)
                pairs.append((idx[a], idx[c]))
            for q in e.zframe:
                zs.append((b, idx[q]))
        engine.apply_cz(prog, st, np.array(sh, np.int64), np.array(pairs, np.int64))
        if zs:
            zb = np.zeros((len(st), prog.n_qubits), np.uint8)
            for b, q in zs:
                zb[b, q] ^= 1
            engine.apply_z(prog, st, np.arange(prog.n_qubits), zb)


def _xor_rows(chosen: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """XOR of ``vecs`` rows selected by each row of ``chosen``."""
    if chosen.shape[1] == 0:
        return np.zeros((chosen.shape[0], vecs.shape[1]), np.uint8)
    return ((chosen.astype(np.int32) @ vecs.astype(np.int32)) & 1).astype(np.uint8)


# -- estimates -------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    experiment: str
    d: int
    noise: NoiseConfig
    seed: int = 0
    min_failures: int = 500
    max_trajectories: int = 10**7
    workers: int = 1
    options: tuple = ()

    def __post_init__(self):
        if self.min_failures < 1:
            raise ValueError("min_failures must be at least 1")
        if self.max_trajectories < 1:
            raise ValueError("max_trajectories must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


def wilson_interval(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    lo, hi = proportion_confint(k, n, alpha=alpha, method="wilson")
    # rounding can push a bound past the point estimate at k = 0 or k = n
    return max(min(float(lo), k / n), 0.0), min(max(float(hi), k / n), 1.0)


@dataclass
class Estimate:
    experiment: str
    d: int
    p: float
    n: int
    n_fail: int
    per_operator: dict[str, int]
    censored: bool
    seed: int
    wall_time: float = 0.0
    ci: tuple[float, float] = field(default=(0.0, 1.0))

    def __post_init__(self):
        self.ci = wilson_interval(self.n_fail, self.n)

    @property
    def p_L(self) -> float:
        return self.n_fail / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "d": self.d, "p": self.p, "N": self.n,
                "N_fail": self.n_fail, "per_operator": dict(self.per_operator), "p_L": self.p_L,
                "ci_lo": self.ci[0], "ci_hi": self.ci[1], "censored": self.censored,
                "seed": self.seed, "wall_time": self.wall_time}

    @classmethod
    def from_dict(cls, obj: dict) -> "Estimate":
        return cls(obj["experiment"], int(obj["d"]), float(obj["p"]), int(obj["N"]), int(obj["N_fail"]),
                   dict(obj.get("per_operator", {})), bool(obj["censored"]), int(obj.get("seed", 0)),
                   float(obj.get("wall_time", 0.0)))


def relative_halfwidth(n_fail: int, z: float = 1.96) -> float:
    """Normal-approximation relative half-width of ``p_L`` after ``n_fail`` failures."""
    return z / math.sqrt(n_fail)


def seed_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one trajectory, fixed by ``(seed, index)``."""
    state = int(engine.seed_states(np.uint64(seed), np.array([index], np.int64))[0])
    return np.random.Generator(np.random.Philox(key=state))


def batch_plan(max_trajectories: int, first: int = 256, cap: int = 16384):
    """Deterministic batch boundaries ``(start, size)``: doubling sizes up to ``cap``."""
    start, size = 0, first
    while start < max_trajectories:
        n = min(size, max_trajectories - start)
        yield start, n
        start += n
        size = min(2 * size, cap)


_SIM_CACHE: dict = {}


def _simulator(experiment: str, d: int, noise: NoiseConfig, options: tuple) -> Simulator:
    key = (experiment, d, noise, options)
    if key not in _SIM_CACHE:
        _SIM_CACHE.clear()
        _SIM_CACHE[key] = Simulator(build(experiment, d, **dict(options)), noise)
    return _SIM_CACHE[key]


def _run_batch(args) -> np.ndarray:
    experiment, d, noise, options, seed, start, n = args
    sim = _simulator(experiment, d, noise, options)
    st = sim.new_state(seed, np.arange(start, start + n))
    return sim.run(st, noise_on=noise.p > 0 or noise.q_meas > 0)


def run_trajectory(exp: Experiment, cfg: NoiseConfig, seed: int, index: int) -> set[str]:
    """Failure set of one trajectory (slow path: one shot per call)."""
    sim = Simulator(exp, cfg)
    fails = sim.run(sim.new_state(seed, [index]))[0]
    return {lab for lab, f in zip(exp.criterion, fails) if f}


def default_workers() -> int:
    return int(os.environ.get("REPCAT_WORKERS", "1"))


def estimate(rc: RunConfig, progress: bool = False, time_budget: float | None = None) -> Estimate:
    """Sample until ``min_failures`` failures or ``max_trajectories`` trajectories.

    Batches are fixed by the plan, not by the worker count, and are folded in
    plan order; the stopping point is the first batch boundary at which the
    quota is met, so the result does not depend on parallelism.  Hitting
    ``time_budget`` (seconds) also stops at a batch boundary, and is the one
    stop that is not reproducible.
    """
    t0 = time.perf_counter()
    exp_labels = _simulator(rc.experiment, rc.d, rc.noise, rc.options).exp.criterion
    per = np.zeros(len(exp_labels), np.int64)
    n = n_fail = 0
    plan = list(batch_plan(rc.max_trajectories))
    jobs = [(rc.experiment, rc.d, rc.noise, rc.options, rc.seed, s, k) for s, k in plan]

    def fold(res):
        nonlocal n, n_fail, per
        n += res.shape[0]
        n_fail += int(res.any(axis=1).sum())
        per += res.sum(axis=0)
        if progress:
            rate = n / max(time.perf_counter() - t0, 1e-9)
            print(f"\r{rc.experiment} d={rc.d} p={rc.noise.p:.4g}: {n} runs, {n_fail} failures, "
                  f"{rate:.0f}/s", end="", file=sys.stderr)
        if time_budget is not None and time.perf_counter() - t0 > time_budget:
            return True
        return n_fail >= rc.min_failures

    if rc.workers == 1:
        for job in jobs:
            if fold(_run_batch(job)):
                break
    else:
        with ProcessPoolExecutor(rc.workers) as pool:
            pending = []
            it = iter(jobs)
            done = False
            for job in it:
                pending.append(pool.submit(_run_batch, job))
                if len(pending) >= 2 * rc.workers:
                    if fold(pending.pop(0).result()):
                        done = True
                        break
            while pending and not done:
                if fold(pending.pop(0).result()):
                    done = True
            for f in pending:
                f.cancel()
    if progress:
        print(file=sys.stderr)
    return Estimate(rc.experiment, rc.d, rc.noise.p, n, n_fail,
                    {lab: int(c) for lab, c in zip(exp_labels, per)},
                    censored=n_fail < rc.min_failures, seed=rc.seed,
                    wall_time=time.perf_counter() - t0)
