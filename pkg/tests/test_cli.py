import csv
import json

import numpy as np
import pytest

from hyperns import __version__
from hyperns.cli import (
    EXIT_BLOWUP,
    EXIT_BOUND,
    EXIT_OK,
    EXIT_USAGE,
    config_hash,
    load_config,
    main,
    monotonicity_violations,
)


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def read_trace(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool=hyperns")
    rows = list(csv.DictReader(lines[1:]))
    return rows


def run(tmp_path, command, cfg, *extra, out="out"):
    out_dir = tmp_path / out
    code = main([command, "--config", write_cfg(tmp_path, cfg), "--out", str(out_dir), *extra])
    return code, out_dir


def test_zero_data_run_exits_clean_with_zero_trace(tmp_path):
    cfg = {"model": "hyperbolic", "n": 8, "eps": 0.1, "horizon": 0.2, "initial": {"kind": "zero"}}
    code, out = run(tmp_path, "run", cfg)
    assert code == EXIT_OK
    rows = read_trace(out / "trace.csv")
    assert len(rows) >= 2
    for row in rows:
        for key, value in row.items():
            if key != "t" and value not in ("", "nan"):
                assert float(value) == 0.0, key
    report = json.loads((out / "energy_report.json").read_text())
    assert report["header"]["version"] == __version__


def test_horizon_zero_gives_single_sample(tmp_path):
    cfg = {"model": "limit", "n": 8, "horizon": 0.0, "initial": {"kind": "vortex"}}
    code, out = run(tmp_path, "run", cfg)
    assert code == EXIT_OK
    assert len(read_trace(out / "trace.csv")) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_burgers_blowup_run_exits_3_with_certificate(tmp_path):
    cfg = {"model": "burgers", "eps": 1.0, "horizon": 5.0, "h": 0.05,
           "initial": {"kind": "bump", "amplitude": -2000.0}}
    code, out = run(tmp_path, "run", cfg)
    assert code == EXIT_BLOWUP
    cert = json.loads((out / "certificate.json").read_text())
    assert "header" in cert
    assert (out / "trace.csv").exists()


def test_missing_config_exits_2(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "cannot read config" in capsys.readouterr().err


def test_unknown_key_is_line_anchored(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "model": "hyperbolic",\n  "n": 8,\n  "bogus": 1\n}\n')
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert f"{path}:4: unknown key 'bogus'" in capsys.readouterr().err


def test_unknown_nested_key_is_line_anchored(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "model": "limit",\n  "initial": {\n    "kind": "vortex",\n    "size": 3\n  }\n}\n')
    with pytest.raises(ValueError, match=r"bad.json:5: unknown key 'size'"):
        load_config(str(path), "run")


def test_invalid_value_is_rejected_before_running(tmp_path, capsys):
    code, out = run(tmp_path, "run", {"model": "hyperbolic", "eps": -1.0})
    assert code == EXIT_USAGE
    assert "eps" in capsys.readouterr().err
    assert not (out / "trace.csv").exists()


def test_malformed_json_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "model": "limit",\n  "n": \n}\n')
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "broken.json:" in capsys.readouterr().err


def test_bad_seed_and_jobs_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, {"model": "limit", "n": 8, "horizon": 0.0})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "-1"]) == EXIT_USAGE
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--jobs", "0"]) == EXIT_USAGE


def test_single_eps_sweep_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "limit-study", {"eps_values": [0.01]})
    assert code == EXIT_USAGE
    assert "need ≥ 3 eps values" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_destabilizing_sweep_exits_4_listing_flagged(tmp_path):
    cfg = {"n": 8, "eps_values": [4.0, 1.0, 0.25], "horizon": 2.0,
           "initial": {"kind": "vortex", "amplitude": 200.0}, "forcing": {"kind": "zero"}}
    code, out = run(tmp_path, "limit-study", cfg)
    assert code == EXIT_BOUND
    report = json.loads((out / "limit_study.json").read_text())
    assert 4.0 in report["flagged"] and 1.0 in report["flagged"]


def test_small_sweep_exits_clean_with_report(tmp_path):
    cfg = {"n": 16, "eps_values": [0.04, 0.01, 0.0025], "horizon": 1.0}
    code, out = run(tmp_path, "limit-study", cfg)
    assert code == EXIT_OK
    report = json.loads((out / "limit_study.json").read_text())
    assert report["slope_w"] > 0.35 and report["slope_wbar"] > 0.8
    assert report["ratio_nonincreasing"] is True


def test_stability_map_tiny_cell_dissipates(tmp_path):
    cfg = {"model": "hyperbolic", "n": 8, "horizon": 3.0, "amplitudes": [0.1], "eps_values": [0.1]}
    code, out = run(tmp_path, "stability-map", cfg)
    assert code == EXIT_OK
    rows = read_trace(out / "stability_map.csv")
    assert [r["outcome"] for r in rows] == ["dissipative"]
    summary = json.loads((out / "stability_summary.json").read_text())
    assert summary["monotonicity_violations"] == []


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_stability_map_huge_burgers_cell_blows_up(tmp_path):
    cfg = {"model": "burgers", "horizon": 5.0, "amplitudes": [-2000.0], "eps_values": [1.0]}
    code, out = run(tmp_path, "stability-map", cfg)
    assert code == EXIT_OK
    assert [r["outcome"] for r in read_trace(out / "stability_map.csv")] == ["blow-up"]


def test_stability_map_empty_grid_exits_2(tmp_path):
    code, _ = run(tmp_path, "stability-map", {"model": "hyperbolic", "amplitudes": [], "eps_values": [0.1]})
    assert code == EXIT_USAGE


def test_monotonicity_violations_reported():
    cells = {(1.0, 0.5): "dissipative", (1.0, 0.1): "blow-up", (2.0, 0.5): "blow-up"}
    v = monotonicity_violations(cells)
    assert v == [{"R": 1.0, "eps": 0.5, "smaller_eps": 0.1, "outcome": "blow-up"}]


def test_energy_report_command(tmp_path):
    cfg = {"model": "hyperbolic", "n": 8, "eps": 0.1, "horizon": 2.0,
           "initial": {"kind": "vortex", "amplitude": 1.0}}
    code, out = run(tmp_path, "energy-report", cfg)
    assert code == EXIT_OK
    report = json.loads((out / "energy_report.json").read_text())
    assert report["alpha_fit"] > 0
    assert not (out / "trace.csv").exists()


def test_outputs_are_byte_identical_and_headed(tmp_path):
    cfg = {"model": "hyperbolic", "n": 8, "eps": 0.05, "horizon": 0.5, "seed": 7,
           "initial": {"kind": "random", "amplitude": 1.0}}
    code_a, out_a = run(tmp_path, "run", cfg, out="a")
    code_b, out_b = run(tmp_path, "run", cfg, out="b")
    assert code_a == code_b == EXIT_OK
    h = config_hash(load_config(write_cfg(tmp_path, cfg), "run"))
    for name in ("trace.csv", "energy_report.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    first = (out_a / "trace.csv").read_text().splitlines()[0]
    assert first == f"# tool=hyperns version={__version__} config_hash={h}"
    header = json.loads((out_a / "energy_report.json").read_text())["header"]
    assert header == {"tool": "hyperns", "version": __version__, "config_hash": h}


def test_seed_flag_overrides_config(tmp_path):
    cfg = {"model": "hyperbolic", "n": 8, "eps": 0.05, "horizon": 0.1, "seed": 7,
           "initial": {"kind": "random", "amplitude": 1.0}}
    _, a = run(tmp_path, "run", cfg, out="a")
    _, b = run(tmp_path, "run", cfg, "--seed", "8", out="b")
    _, c = run(tmp_path, "run", {**cfg, "seed": 8}, out="c")
    ta, tb, tc = (read_trace(d / "trace.csv") for d in (a, b, c))
    assert ta[0]["norm_E1_full"] != tb[0]["norm_E1_full"]
    assert tb == tc


def test_config_hash_is_key_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_values_round_trip(tmp_path):
    cfg = {"model": "limit", "n": 8, "horizon": 0.1, "initial": {"kind": "vortex"}}
    _, out = run(tmp_path, "run", cfg)
    rows = read_trace(out / "trace.csv")
    t = np.array([float(r["t"]) for r in rows])
    assert np.all(np.diff(t) > 0)
