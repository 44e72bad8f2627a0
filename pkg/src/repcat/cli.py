"""Command line front end: ``repcat run | fit | overhead | enumerate | validate``.

Exit codes: 0 ok (censored results included), 2 bad configuration,
3 fit failure, 4 enumeration over budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import (FAMILIES, Infeasible, ScalingFit, UnderdeterminedFit, fit_threshold,
                       memory_overhead)
from .circuits import BUILDERS, build
from .montecarlo import Estimate, RunConfig, default_workers, estimate
from .noise import NoiseConfig, ratio_for_phase_flip_probability

EXIT_OK, EXIT_CONFIG, EXIT_FIT, EXIT_BUDGET = 0, 2, 3, 4
CSV_COLUMNS = ["d", "p", "N", "N_fail", "p_L", "ci_lo", "ci_hi", "censored"]
OVERHEAD_COLUMNS = ["p", "target_pL", "d", "nbar", "total_modes", "p_L", "status"]


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg)
        self.line = line


@dataclass
class ExperimentConfig:
    experiment: str
    distances: list[int]
    noise: dict
    min_failures: int = 500
    max_trajectories: int = 10**7
    time_budget: float | None = None
    seed: int = 0
    out: str = "results/run"
    options: dict = field(default_factory=dict)

    def noise_points(self) -> list[NoiseConfig]:
        """Expand the sweep into one noise model per point."""
        extra = {k: self.noise[k] for k in ("measurement_flip", "swap") if k in self.noise}
        if "p" in self.noise:
            return [NoiseConfig.from_dict({"p": p, **extra}) for p in _as_list(self.noise["p"])]
        out = []
        for nbar in _as_list(self.noise["nbar"]):
            for k1 in _as_list(self.noise["kappa1"]):
                for k2 in _as_list(self.noise["kappa2"]):
                    out.append(NoiseConfig.from_dict({"nbar": nbar, "kappa1": k1, "kappa2": k2,
                                                      "T": self.noise.get("T", "optimal"), **extra}))
        return out

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "distances": list(self.distances), "noise": self.noise,
                "stopping": {"min_failures": self.min_failures, "max_trajectories": self.max_trajectories,
                             "time_budget": self.time_budget},
                "seed": self.seed, "out": self.out, "options": dict(self.options)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, obj: dict, text: str = "") -> "ExperimentConfig":
        def fail(msg, key=None):
            raise ConfigError(msg, _line_of(text, key) if key else None)

        if not isinstance(obj, dict):
            fail("top level must be a JSON object")
        known = {"experiment", "distances", "noise", "stopping", "seed", "out", "options"}
        for k in obj:
            if k not in known:
                fail(f"unknown key {k!r}", k)
        for k in ("experiment", "distances", "noise"):
            if k not in obj:
                fail(f"missing required key {k!r}")
        exp = obj["experiment"]
        if exp not in BUILDERS:
            fail(f"unknown experiment {exp!r}; choose from {', '.join(BUILDERS)}", "experiment")
        ds = obj["distances"]
        if not isinstance(ds, list) or not ds:
            fail("distances must be a non-empty list", "distances")
        if any(not isinstance(d, int) or isinstance(d, bool) or d < 2 for d in ds):
            fail("distances must be integers >= 2", "distances")
        if exp != "meas_xl" and any(d % 2 == 0 for d in ds):
            fail("distances must be odd", "distances")
        noise = obj["noise"]
        if not isinstance(noise, dict):
            fail("noise must be an object", "noise")
        if "p" in noise:
            ps = _as_list(noise["p"])
            if not ps or any(not isinstance(p, (int, float)) or isinstance(p, bool) for p in ps):
                fail("noise.p must be a number or a non-empty list of numbers", "p")
        elif all(k in noise for k in ("nbar", "kappa1", "kappa2")):
            for k in ("nbar", "kappa1", "kappa2"):
                if not _as_list(noise[k]):
                    fail(f"noise.{k} must not be empty", k)
        else:
            fail("noise needs either 'p' or all of 'nbar', 'kappa1', 'kappa2'", "noise")
        stop = obj.get("stopping", {})
        if not isinstance(stop, dict):
            fail("stopping must be an object", "stopping")
        for k in stop:
            if k not in ("min_failures", "max_trajectories", "time_budget"):
                fail(f"unknown stopping key {k!r}", k)
        opts = obj.get("options", {})
        if not isinstance(opts, dict):
            fail("options must be an object", "options")
        try:
            cfg = cls(exp, list(ds), dict(noise),
                      int(stop.get("min_failures", 500)), int(float(stop.get("max_trajectories", 10**7))),
                      None if stop.get("time_budget") is None else float(stop["time_budget"]),
                      int(obj.get("seed", 0)), str(obj.get("out", "results/run")), dict(opts))
            if cfg.min_failures < 1:
                fail("min_failures must be at least 1", "min_failures")
            if cfg.max_trajectories < 1:
                fail("max_trajectories must be at least 1", "max_trajectories")
            cfg.noise_points()
            build(exp, ds[0], **cfg.options)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            fail(str(e), "noise")
        return cfg

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, e.lineno) from None
        return cls.from_dict(obj, text)


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _line_of(text: str, key: str | None) -> int | None:
    if not text or key is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def apply_overrides(obj: dict, pairs: list[str]) -> dict:
    """``a.b=value`` overlay; values are parsed as JSON when possible."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = obj
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return obj


def load_config(path: str | None, overrides: list[str]) -> ExperimentConfig:
    text = Path(path).read_text() if path else "{}"
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, e.lineno) from None
    if overrides:
        obj = apply_overrides(obj, overrides)
        text = json.dumps(obj, indent=2)
    return ExperimentConfig.from_dict(obj, text)


# -- result files ----------------------------------------------------------

def _fmt_float(x: float) -> str:
    return repr(float(x))


def csv_rows(estimates: list[Estimate]) -> list[dict]:
    return [{"d": e.d, "p": e.p, "N": e.n, "N_fail": e.n_fail, "p_L": e.p_L,
             "ci_lo": e.ci[0], "ci_hi": e.ci[1], "censored": e.censored} for e in estimates]


def write_csv(rows: list[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r["d"], _fmt_float(r["p"]), r["N"], r["N_fail"], f"{r['p_L']:.6e}",
                    f"{r['ci_lo']:.6e}", f"{r['ci_hi']:.6e}", "true" if r["censored"] else "false"])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append({"d": int(r["d"]), "p": float(r["p"]), "N": int(r["N"]), "N_fail": int(r["N_fail"]),
                        "p_L": float(r["p_L"]), "ci_lo": float(r["ci_lo"]), "ci_hi": float(r["ci_hi"]),
                        "censored": r["censored"] == "true"})
        return out


def load_rows(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".csv":
        return read_csv(path)
    obj = json.loads(path.read_text())
    return csv_rows([Estimate.from_dict(e) for e in obj["estimates"]])


def result_record(cfg: ExperimentConfig, estimates: list[Estimate], started: str, finished: str) -> dict:
    return {"tool": "repcat", "version": __version__, "config": cfg.to_dict(),
            "started": started, "finished": finished,
            "estimates": [e.to_dict() for e in estimates]}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- commands --------------------------------------------------------------

def run_sweep(cfg: ExperimentConfig, workers: int = 1, progress: bool = True) -> list[Estimate]:
    out = []
    opts = tuple(sorted(cfg.options.items()))
    for d in cfg.distances:
        for noise in cfg.noise_points():
            rc = RunConfig(cfg.experiment, d, noise, cfg.seed, cfg.min_failures, cfg.max_trajectories,
                           workers, opts)
            out.append(estimate(rc, progress=progress, time_budget=cfg.time_budget))
    return out


def cmd_run(args) -> int:
    overrides = list(args.set or [])
    for flag, key in ((args.seed, "seed"), (args.max_trajectories, "stopping.max_trajectories"),
                      (args.min_failures, "stopping.min_failures"), (args.out, "out")):
        if flag is not None:
            overrides.append(f"{key}={json.dumps(flag)}")
    cfg = load_config(args.config, overrides)
    workers = args.workers or default_workers()
    started = _now()
    ests = run_sweep(cfg, workers, progress=not args.quiet)
    stem = Path(cfg.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    rows = csv_rows(ests)
    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        write_csv(rows, fh)
    stem.with_suffix(".json").write_text(json.dumps(result_record(cfg, ests, started, _now()), indent=2))
    if not args.no_plot:
        from .plotting import plot_sweep
        scale = 6.0 if cfg.experiment.startswith("toffoli") else 1.0
        plot_sweep(rows, stem.with_suffix(".png"), title=cfg.experiment, xscale=scale,
                   xlabel="physical Toffoli error 6p" if scale != 1 else "physical error probability p",
                   identity=scale != 1)
    buf = io.StringIO()
    write_csv(rows, buf)
    print(buf.getvalue(), end="")
    return EXIT_OK


def cmd_fit(args) -> int:
    rows = [r for path in args.results for r in load_rows(path)]
    families = list(FAMILIES) if args.family == "both" else [args.family]
    fits = {}
    try:
        for fam in families:
            fits[fam] = fit_threshold(rows, fam, per_distance=args.per_distance)
    except UnderdeterminedFit as e:
        print(f"fit failed: {e}", file=sys.stderr)
        return EXIT_FIT
    report = {fam: f.to_dict() for fam, f in fits.items()}
    if len(fits) > 1:
        report["best_family"] = min(fits, key=lambda k: fits[k].rms)
    for fam, f in fits.items():
        print(f"{fam}: A={f.A:.4g} p_th={f.p_th:.4g} rms_log_residual={f.rms:.4g}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".json").write_text(json.dumps(report, indent=2))
        if not args.no_plot:
            from .plotting import plot_sweep
            best = fits[report.get("best_family", families[0])]
            plot_sweep(rows, out.with_suffix(".png"), title=f"fit ({best.family})", fit=best)
    return EXIT_OK


def _load_fit(path: str) -> ScalingFit:
    obj = json.loads(Path(path).read_text())
    if "A" in obj:
        return ScalingFit.from_dict(obj)
    fam = obj.get("best_family", "half")
    return ScalingFit.from_dict(obj[fam])


def cmd_overhead(args) -> int:
    try:
        fit = _load_fit(args.fit)
    except (OSError, KeyError, ValueError) as e:
        print(f"cannot read fit report: {e}", file=sys.stderr)
        return EXIT_FIT
    rows = []
    for p in args.p:
        for target in args.targets:
            res = memory_overhead(target, ratio_for_phase_flip_probability(p), fit)
            if isinstance(res, Infeasible):
                rows.append({"p": p, "target_pL": target, "d": "", "nbar": "", "total_modes": "",
                             "p_L": "", "status": "infeasible"})
            else:
                rows.append({"p": p, "target_pL": target, "d": res.d, "nbar": res.nbar,
                             "total_modes": res.total_modes, "p_L": f"{res.p_L:.6e}", "status": "ok"})
    out = Path(args.out) if args.out else None
    buf = io.StringIO()
    w = csv.DictWriter(buf, OVERHEAD_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    print(buf.getvalue(), end="")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".csv").write_text(buf.getvalue())
        if not args.no_plot:
            from .plotting import plot_overhead
            plot_overhead(rows, out.with_suffix(".png"))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    from .faults import count_fault_sets, elementary_faults, enumerate_faults
    from .montecarlo import Simulator
    try:
        sim = Simulator(build(args.experiment, args.d), NoiseConfig(args.p))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    n = len(elementary_faults(sim))
    count = count_fault_sets(n, args.max_weight)
    if count > args.budget:
        print(f"budget exceeded: {count} fault sets ({n} elementary faults, weight <= {args.max_weight}) "
              f"> budget {args.budget}", file=sys.stderr)
        return EXIT_BUDGET
    try:
        bad = enumerate_faults(sim, args.max_weight)
    except NotImplementedError as e:
        print(f"budget exceeded: {count} fault sets; {e}", file=sys.stderr)
        return EXIT_BUDGET
    print(f"{args.experiment} d={args.d}: {count} fault sets, {len(bad)} failing")
    lines = [f"{' + '.join(f.describe(sim) for f in fs) or '(no fault)'}  fraction={fr:.3g}" for fs, fr in bad]
    for line in lines:
        print("  " + line)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps({"experiment": args.experiment, "d": args.d,
                                              "max_weight": args.max_weight, "fault_sets": count,
                                              "failing": lines}, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config, list(args.set or []))
    for d in cfg.distances:
        exp = build(cfg.experiment, d, **cfg.options)
        problems = exp.validate()
        if problems:
            print(f"{cfg.experiment} d={d}: " + "; ".join(problems), file=sys.stderr)
            return EXIT_CONFIG
    print(f"ok: {cfg.experiment}, distances {cfg.distances}, {len(cfg.noise_points())} noise points")
    return EXIT_OK


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="repcat", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"repcat {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a Monte Carlo sweep")
    r.add_argument("--config", required=True)
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--max-trajectories", type=int)
    r.add_argument("--min-failures", type=int)
    r.add_argument("--out")
    r.add_argument("--no-plot", action="store_true")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(fn=cmd_run)

    f = sub.add_parser("fit", help="fit A (p/p_th)^e(d) to result files")
    f.add_argument("results", nargs="+")
    f.add_argument("--family", choices=[*FAMILIES, "both"], default="half")
    f.add_argument("--per-distance", action="store_true")
    f.add_argument("--out")
    f.add_argument("--no-plot", action="store_true")
    f.set_defaults(fn=cmd_fit)

    o = sub.add_parser("overhead", help="memory overhead table from a fit report")
    o.add_argument("--fit", required=True)
    o.add_argument("--p", type=_floats, default=[0.001, 0.002, 0.005, 0.01])
    o.add_argument("--targets", type=_floats, default=[1e-10])
    o.add_argument("--out")
    o.add_argument("--no-plot", action="store_true")
    o.set_defaults(fn=cmd_overhead)

    e = sub.add_parser("enumerate", help="exhaustive low-weight fault insertion")
    e.add_argument("--experiment", required=True)
    e.add_argument("--d", type=int, required=True)
    e.add_argument("--max-weight", type=int, default=1)
    e.add_argument("--p", type=float, default=0.001)
    e.add_argument("--budget", type=int, default=10**6)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_enumerate)

    v = sub.add_parser("validate", help="check a config and the circuits it builds")
    v.add_argument("--config", required=True)
    v.add_argument("--set", action="append", metavar="KEY=VALUE")
    v.set_defaults(fn=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        where = f"{getattr(args, 'config', None) or '<overrides>'}:{e.line}: " if e.line else ""
        print(f"{where}config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
