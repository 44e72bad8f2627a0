"""Regenerate matching_corpus.json: matching graphs with at most 10 events and their optimum.

Half the graphs come from detection events on the memory d=5 detector
graph, half are random points on a plane with rounded Manhattan distances.
The optimum of each is found by exhaustive search and frozen in the file.

    python tests/data/make_matching_corpus.py
"""

import functools
import json
import math
from pathlib import Path

import numpy as np

from repcat.circuits import build
from repcat.decoder import build_matching_graph
from repcat.montecarlo import Simulator
from repcat.noise import NoiseConfig


def brute_force(dist, bdist) -> float:
    k = len(bdist)

    @functools.lru_cache(maxsize=None)
    def best(left: frozenset) -> float:
        if not left:
            return 0.0
        a = min(left)
        rest = left - {a}
        out = bdist[a] + best(rest)
        for b in rest:
            out = min(out, dist[a][b] + best(rest - {b}))
        return out

    return best(frozenset(range(k)))


def encode(x):
    return None if not math.isfinite(x) else float(x)


def main():
    rng = np.random.default_rng(20240)
    exp = build("memory", 5)
    sim = Simulator(exp, NoiseConfig(0.01))
    h = exp.histories[next(iter(exp.histories))]
    dem = sim.dem(h.block, len(h.rounds), len(sim.prog.ops))
    cases = []
    for _ in range(100):
        k = int(rng.integers(0, 11))
        events = sorted(rng.choice(dem.n_det, k, replace=False).tolist())
        g = build_matching_graph(events, dem)
        cases.append({"source": "memory_d5", "dist": g.dist.tolist(), "bdist": g.bdist.tolist()})
    for _ in range(100):
        k = int(rng.integers(1, 11))
        pts = rng.uniform(0, 8, (k, 2))
        dist = np.round(np.abs(pts[:, None] - pts[None]).sum(-1), 1)
        bdist = np.round(np.minimum(pts[:, 0], 8 - pts[:, 0]) + rng.uniform(0, 1, k), 1)
        cases.append({"source": "plane", "dist": dist.tolist(), "bdist": bdist.tolist()})
    for c in cases:
        c["optimum"] = brute_force(tuple(map(tuple, c["dist"])), tuple(c["bdist"]))
        c["dist"] = [[encode(x) for x in row] for row in c["dist"]]
        c["bdist"] = [encode(x) for x in c["bdist"]]
    out = Path(__file__).with_name("matching_corpus.json")
    out.write_text(json.dumps(cases, indent=0) + "\n")
    print(f"wrote {len(cases)} graphs to {out}")


if __name__ == "__main__":
    main()
