import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from mcjscc import cli
from mcjscc.config import ConfigError, ExperimentConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SIM = {
    "source": {"p": 0.1},
    "ratio": {"k": 12, "n": 12},
    "channel": {"start_db": 0, "stop_db": 4, "step_db": 2, "snr_convention": "per-channel-symbol"},
    "scheme": {"N": 2, "code_dims": [6, 9]},
    "sim": {"trials": 2000, "seed": 4},
}


def write_cfg(tmp_path, d, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_config_roundtrip():
    cfg = ExperimentConfig.load(CONFIGS / "smoke_sim.json")
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert cfg.scheme.N == [2]
    assert cfg.channel.sweep() == [0.0, 2.0, 4.0, 6.0]
    assert ExperimentConfig.load(CONFIGS / "table1.json").t == 0.8


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d["source"].update(p=0.7), "source.p"),
    (lambda d: d["ratio"].update(t=1.0), "ratio"),
    (lambda d: d["channel"].update(type="rayleigh"), "channel.type"),
    (lambda d: d["channel"].update(stop_db=-5), "channel"),
    (lambda d: d["scheme"].update(N=0), "scheme.N"),
    (lambda d: d["sim"].update(trials=0), "sim.trials"),
    (lambda d: d["sim"].update(colour="red"), "sim"),
    (lambda d: d.update(extra={}), "config"),
    (lambda d: d["scheme"].update(rates=[0.5], thresholds=[-0.5]), "scheme"),
    (lambda d: d["scheme"].update(code_files=["missing.txt"]), "scheme.code_files"),
])
def test_bad_config_names_field(tmp_path, capsys, mutate, field):
    d = json.loads(json.dumps(SIM))
    mutate(d)
    path = write_cfg(tmp_path, d)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ExperimentConfig.load(path)
    code, out, err = run(["simulate", "--config", path], capsys)
    assert code == cli.EXIT_CONFIG and out == "" and field in err


def test_invalid_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"source": {"p": 0.1},\n  "ratio": }')
    code, _, err = run(["exponents", "--config", str(path)], capsys)
    assert code == cli.EXIT_CONFIG and "line 2" in err
    code, _, err = run(["exponents", "--config", str(tmp_path / "nope.json")], capsys)
    assert code == cli.EXIT_CONFIG


def test_exponents_columns_and_ordering(tmp_path, capsys):
    d = {"source": {"p": 0.1}, "ratio": {"t": 1.0},
         "channel": {"start_db": 3, "stop_db": 4, "step_db": 1}, "scheme": {"N": [2, 3], "rates": [0.5, 0.45]}}
    code, out, _ = run(["exponents", "--config", write_cfg(tmp_path, d)], capsys)
    assert code == 0
    rows = rows_of(out)
    assert [r["ebn0_db"] for r in rows] == ["3.0", "4.0"]
    for r in rows:
        v = {k: float(x) for k, x in r.items() if k.startswith("e_")}
        assert v["e_sep"] <= v["e_thm2_N2"] <= v["e_thm1_N2"] <= v["e_thm1_N3"] <= v["e_joint"] + 1e-12
        assert v["e_thm1_fixed"] <= v["e_thm1_N2"] + 1e-12
        assert abs(v["e_hull"] - v["e_joint"]) < 1e-6


def test_rates_table(capsys):
    code, out, _ = run(["rates", "--config", str(CONFIGS / "table1.json")], capsys)
    assert code == 0
    rows = rows_of(out)
    assert [(r["R_bits"], r["Rp_bits"]) for r in rows] == [("0.447", "0.475"), ("0.481", "0.521"),
                                                           ("0.516", "0.568")]


def test_simulate_deterministic_and_thread_independent(tmp_path, capsys):
    path = write_cfg(tmp_path, SIM)
    _, a, _ = run(["simulate", "--config", path], capsys)
    _, b, _ = run(["simulate", "--config", path, "--threads", "3"], capsys)
    _, c, _ = run(["simulate", "--config", path, "--seed", "5"], capsys)
    assert a == b and a != c
    rows = rows_of(a)
    assert len(rows) == 3 and rows[0]["k"] == "12" and rows[0]["flag"] == ""
    for r in rows:
        assert int(r["e_s"]) + int(r["e_ml"]) + int(r["e_map"]) == round(float(r["fer"]) * int(r["trials"]))
        assert float(r["ci_lo"]) <= float(r["fer"]) <= float(r["ci_hi"])


def test_json_output_and_atomic_file(tmp_path, capsys):
    d = dict(SIM, output={"path": "out.json", "format": "json"})
    path = write_cfg(tmp_path, d)
    code, out, _ = run(["simulate", "--config", path], capsys)
    assert code == 0 and out == ""
    rows = json.loads((tmp_path / "out.json").read_text())
    assert len(rows) == 3 and rows[0]["seed"] == 4
    assert [p.name for p in tmp_path.iterdir() if p.name.endswith(".tmp")] == []


def test_write_atomic_keeps_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "keep.csv"
    target.write_text("old\n")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_atomic(target, "new\n")
    assert target.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["keep.csv"]


def test_bound_and_join(tmp_path, capsys):
    sim_csv = tmp_path / "sim.csv"
    path = write_cfg(tmp_path, SIM)
    assert run(["simulate", "--config", path, "--out", str(sim_csv)], capsys)[0] == 0
    code, out, _ = run(["bound", "--config", path], capsys)
    assert code == 0
    bound = rows_of(out)
    assert {"ebn0_db", "bound", "w1_opt", "w2_opt", "r1_bits", "r2_bits"} <= set(bound[0])
    code, out, _ = run(["bound", "--config", path, "--join", str(sim_csv)], capsys)
    assert code == 0
    joined = rows_of(out)
    assert len(joined) == 3 and all(r["violation"] == "0" for r in joined)
    # a simulated curve below the bound is flagged
    rows = rows_of(sim_csv.read_text())
    rows[1]["ci_hi"] = "1e-30"
    bad = tmp_path / "bad.csv"
    with open(bad, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    code, out, _ = run(["bound", "--config", path, "--join", str(bad)], capsys)
    assert code == cli.EXIT_VIOLATION
    assert [r["violation"] for r in rows_of(out)] == ["0", "1", "0"]
    # mismatched block length is a configuration error
    other = json.loads(json.dumps(SIM))
    other["ratio"] = {"k": 12, "n": 14}
    code, _, err = run(["bound", "--config", write_cfg(tmp_path, other, "o.json"), "--join", str(sim_csv)], capsys)
    assert code == cli.EXIT_CONFIG and "does not match" in err


def test_code_files(tmp_path, capsys):
    import numpy as np

    from mcjscc.mc_codec import LinearCode

    codes = LinearCode.random_nested(12, [6, 9], np.random.default_rng(0))
    for i, c in enumerate(codes):
        c.to_file(tmp_path / f"g{i}.txt")
    d = json.loads(json.dumps(SIM))
    d["scheme"] = {"N": 2, "code_files": ["g0.txt", "g1.txt"]}
    code, out, _ = run(["simulate", "--config", write_cfg(tmp_path, d)], capsys)
    assert code == 0 and len(rows_of(out)) == 3
    d["scheme"]["code_dims"] = [6, 9]
    code, _, err = run(["simulate", "--config", write_cfg(tmp_path, d)], capsys)
    assert code == cli.EXIT_CONFIG


def test_console_script(tmp_path):
    path = write_cfg(tmp_path, SIM)
    res = subprocess.run([sys.executable, "-m", "mcjscc.cli", "bound", "--config", path],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("ebn0_db,bound")
    res = subprocess.run([sys.executable, "-m", "mcjscc.cli", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2
