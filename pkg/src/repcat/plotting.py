"""Figures written next to the CSV output.  Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence[dict], path: Path, title: str = "", xscale: float = 1.0,
               xlabel: str = "physical error probability p", fit=None, identity: bool = False) -> Path:
    """Logical error against physical noise, one curve per distance, with Wilson bars.

    ``xscale`` multiplies the x axis (e.g. 6 for the physical Toffoli error).
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xall = [r["p"] * xscale for r in rows]
        for d in sorted({r["d"] for r in rows}):
            sel = sorted((r for r in rows if r["d"] == d and r["N_fail"] > 0), key=lambda r: r["p"])
            if not sel:
                continue
            x = np.array([r["p"] for r in sel]) * xscale
            y = np.array([r["p_L"] for r in sel])
            err = np.array([[r["p_L"] - r["ci_lo"] for r in sel], [r["ci_hi"] - r["p_L"] for r in sel]])
            line = ax.errorbar(x, y, yerr=err, marker="o", ms=3, lw=1, capsize=2, label=f"d={d}")
            if fit is not None:
                xs = np.geomspace(x.min(), x.max(), 50)
                ax.plot(xs, [fit.predict(d, v / xscale) for v in xs], ls=":", lw=1,
                        color=line[0].get_color())
        if identity:
            xs = np.geomspace(min(xall), max(xall), 10)
            ax.plot(xs, xs, "k:", lw=1, label="identity")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("logical error probability")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_overhead(rows: Iterable[dict], path: Path) -> Path:
    """Data-qubit count and photon number against p, one series per target."""
    rows = [r for r in rows if r.get("d") not in (None, "")]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3.2))
        for target in sorted({r["target_pL"] for r in rows}):
            sel = sorted((r for r in rows if r["target_pL"] == target), key=lambda r: r["p"])
            ps = [r["p"] for r in sel]
            ax1.plot(ps, [r["d"] for r in sel], marker="o", ms=3, label=f"target {target:.0e}")
            ax2.plot(ps, [r["nbar"] for r in sel], marker="o", ms=3, label=f"target {target:.0e}")
        ax1.set_xlabel("p")
        ax1.set_ylabel("data cat qubits d")
        ax2.set_xlabel("p")
        ax2.set_ylabel("photon number")
        ax1.legend()
        return _save(fig, path)


def plot_concat_optimum(rows: Sequence[tuple[float, int, float]], path: Path) -> Path:
    """Best logical error of the round-robin Toffoli against the physical Toffoli error."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        g = [r[0] for r in rows]
        ax.plot(g, [r[2] for r in rows], marker="o", ms=3)
        for x, d, y in rows[:: max(1, len(rows) // 6)]:
            ax.annotate(f"d={d}", (x, y), fontsize=6, xytext=(3, 3), textcoords="offset points")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("physical Toffoli error")
        ax.set_ylabel("minimal logical error")
        return _save(fig, path)
