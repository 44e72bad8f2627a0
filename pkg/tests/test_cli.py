import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from repcat.cli import (CSV_COLUMNS, EXIT_BUDGET, EXIT_CONFIG, EXIT_FIT, EXIT_OK, ConfigError, ExperimentConfig,
                        apply_overrides, main)

DATA = Path(__file__).parent / "data"


def write(path: Path, obj) -> Path:
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return path


def test_run_matches_golden_csv(tmp_path, capsys):
    out = tmp_path / "mem"
    assert main(["run", "--config", str(DATA / "golden_config.json"), "--out", str(out), "--quiet"]) == EXIT_OK
    golden = (DATA / "golden_memory.csv").read_text()
    assert golden.splitlines()[0] == ",".join(CSV_COLUMNS) == "d,p,N,N_fail,p_L,ci_lo,ci_hi,censored"
    assert out.with_suffix(".csv").read_text() == golden
    assert out.with_suffix(".png").stat().st_size > 0
    record = json.loads(out.with_suffix(".json").read_text())
    assert ExperimentConfig.from_dict(record["config"]).distances == [3, 5]
    # rerun: byte-identical
    out2 = tmp_path / "again"
    main(["run", "--config", str(DATA / "golden_config.json"), "--out", str(out2), "--quiet", "--no-plot"])
    assert out2.with_suffix(".csv").read_bytes() == out.with_suffix(".csv").read_bytes()
    assert not out2.with_suffix(".png").exists()


def test_empty_distances_exit_2(tmp_path, capsys):
    cfg = write(tmp_path / "bad.json", '{\n  "experiment": "memory",\n  "distances": [],\n  "noise": {"p": 0.01}\n}\n')
    assert main(["run", "--config", str(cfg), "--quiet"]) == EXIT_CONFIG
    assert f"{cfg}:3: config error" in capsys.readouterr().err


@pytest.mark.parametrize("obj", [
    {"experiment": "surface", "distances": [3], "noise": {"p": 0.01}},
    {"experiment": "memory", "distances": [4], "noise": {"p": 0.01}},
    {"experiment": "memory", "distances": [3], "noise": {}},
    {"experiment": "memory", "distances": [3], "noise": {"p": 0.5}},
    {"experiment": "memory", "distances": [3], "noise": {"p": 0.01}, "colour": 1},
    {"experiment": "memory", "distances": [3], "noise": {"p": 0.01}, "stopping": {"min_failures": 0}},
])
def test_schema_violations(obj):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(obj)


def test_malformed_json_reports_line(tmp_path, capsys):
    cfg = write(tmp_path / "broken.json", '{\n  "experiment": "memory",\n  "distances": [3,\n}')
    assert main(["validate", "--config", str(cfg)]) == EXIT_CONFIG
    assert ":4: config error" in capsys.readouterr().err


def test_fit_exit_codes(tmp_path, capsys):
    assert main(["fit", str(DATA / "golden_memory.csv")]) == EXIT_FIT
    rows = ["d,p,N,N_fail,p_L,ci_lo,ci_hi,censored"]
    for d in (3, 5, 7):
        for p in (0.002, 0.004, 0.008):
            pl = 0.1 * (p / 0.019) ** ((d + 1) / 2)
            rows.append(f"{d},{p},1000,500,{pl:.6e},0,1,false")
    csv = write(tmp_path / "synthetic.csv", "\n".join(rows) + "\n")
    assert main(["fit", str(csv), "--family", "both", "--out", str(tmp_path / "fit")]) == EXIT_OK
    report = json.loads((tmp_path / "fit.json").read_text())
    assert report["best_family"] == "half"
    assert report["half"]["p_th"] == pytest.approx(0.019, rel=1e-3)
    assert main(["overhead", "--fit", str(tmp_path / "fit.json"), "--p", "0.01", "--targets", "1e-10,1e-6",
                 "--out", str(tmp_path / "oh"), "--no-plot"]) == EXIT_OK
    text = (tmp_path / "oh.csv").read_text()
    assert text.splitlines()[0].startswith("p,target_pL,d,nbar")


def test_enumerate(tmp_path, capsys):
    assert main(["enumerate", "--experiment", "memory", "--d", "3", "--max-weight", "1"]) == EXIT_OK
    assert "0 failing" in capsys.readouterr().out
    assert main(["enumerate", "--experiment", "toffoli_ft", "--d", "3", "--out", str(tmp_path / "e.json")]) == EXIT_OK
    assert json.loads((tmp_path / "e.json").read_text())["failing"]
    assert main(["enumerate", "--experiment", "memory", "--d", "5", "--max-weight", "3", "--budget", "1000"]) \
        == EXIT_BUDGET
    assert "fault sets" in capsys.readouterr().err


def test_validate(capsys):
    assert main(["validate", "--config", str(DATA / "golden_config.json")]) == EXIT_OK


def test_overrides():
    obj = {"noise": {"p": 0.01}, "seed": 1}
    out = apply_overrides(obj, ["seed=5", "noise.p=[0.01, 0.02]", "stopping.min_failures=10", "out=x"])
    assert out == {"noise": {"p": [0.01, 0.02]}, "seed": 5, "stopping": {"min_failures": 10}, "out": "x"}
    with pytest.raises(ConfigError):
        apply_overrides(obj, ["seed"])


configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(["memory", "prep_plus", "cnot", "toffoli_concat", "toffoli_ft"]),
    distances=st.lists(st.sampled_from([3, 5, 7, 9]), min_size=1, max_size=4, unique=True),
    noise=st.one_of(
        st.fixed_dictionaries({"p": st.lists(st.floats(0, 0.16), min_size=1, max_size=4)}),
        st.fixed_dictionaries({"nbar": st.integers(1, 20), "kappa1": st.floats(1, 1e4),
                               "kappa2": st.floats(1e5, 1e8)})),
    min_failures=st.integers(1, 10 ** 4),
    max_trajectories=st.integers(1, 10 ** 9),
    time_budget=st.one_of(st.none(), st.floats(1, 1e5)),
    seed=st.integers(0, 2 ** 63 - 1),
    out=st.text("abcxyz/_-", min_size=1, max_size=12),
)


@given(configs)
def test_config_round_trip(cfg):
    assert ExperimentConfig.loads(cfg.dumps()) == cfg
