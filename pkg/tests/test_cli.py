import json
import subprocess
import sys

import numpy as np
import pytest

from strongtype import cli

L3 = {"kind": "lp", "p": 3, "dim": 2}
L15 = {"kind": "lp", "p": 1.5, "dim": 2}
E3 = {"kind": "euclidean", "dim": 3}
E2 = {"kind": "euclidean", "dim": 2}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run_main(tmp_path, cfg, *flags):
    out = tmp_path / "report.out"
    code = cli.main([write(tmp_path, cfg), "--output", str(out), *flags])
    return code, out.read_text()


def test_estimate_examples(tmp_path):
    code, text = run_main(tmp_path, {"space": E3, "command": "estimate",
                                     "params": {"kind": "smooth_2", "exponent": 2, "budget": 2000}})
    rep = json.loads(text)
    assert code == 0 and abs(rep["results"]["estimate"]["lower_bound"] - 1) <= 1e-3
    assert rep["config"]["seed"] == 0 and "witness" in rep["results"]["estimate"]
    code, text = run_main(tmp_path, {"space": {"kind": "lp", "p": 1, "dim": 2}, "command": "estimate",
                                     "params": {"kind": "convex_2", "exponent": 2, "budget": 2000}})
    assert code == 0 and json.loads(text)["results"]["estimate"]["unbounded_flag"]
    code, text = run_main(tmp_path, {"space": L3, "command": "estimate",
                                     "params": {"kind": "convex_3", "exponent": 3, "budget": 3000}})
    assert abs(json.loads(text)["results"]["estimate"]["lower_bound"] - 1) <= 1e-3


def test_verify_examples(tmp_path):
    cfg = {"space": E2, "command": "verify", "params": {"p": 2, "q": 2, "samples": 30}}
    code, text = run_main(tmp_path, cfg)
    assert code == 0 and json.loads(text)["results"]["passed"]
    cfg["params"]["c"] = 0.9
    code, text = run_main(tmp_path, cfg)
    rep = json.loads(text)
    assert code == 1 and not rep["results"]["passed"]
    failed = [s for s in rep["results"]["suites"] if not s["passed"]]
    assert failed and all(s["first_failure"] is not None for s in failed)


def test_renorm_examples(tmp_path):
    cfg = {"space": E2, "command": "renorm",
           "params": {"direction": "cotype_inf", "exponent": 2, "c": 1.0, "depth": 2, "n_points": 5,
                      "n_pairs": 3}}
    code, text = run_main(tmp_path, cfg)
    assert code == 0
    cfg = {"space": L3, "command": "renorm",
           "params": {"direction": "cotype_inf", "exponent": 3, "c": 1.0, "depth": 2, "n_points": 5,
                      "n_pairs": 3}}
    code, text = run_main(tmp_path, cfg)
    assert code == 0 and json.loads(text)["results"]["passed"]
    cfg["params"]["c"] = 0.5
    code, text = run_main(tmp_path, cfg)
    rep = json.loads(text)
    assert code == 3 and "violation" in rep["results"]


def test_duality_examples(tmp_path):
    code, text = run_main(tmp_path, {"space": L15, "command": "duality",
                                     "params": {"p": 1.5, "budget": 3000, "samples": 20}})
    assert code == 0
    code, text = run_main(tmp_path, {"space": E2, "command": "duality",
                                     "params": {"p": 2, "budget": 3000, "samples": 20, "tol": 1e-3}})
    assert code == 0


def test_config_errors(tmp_path, capsys):
    assert cli.main([write(tmp_path, {})]) == 2
    assert cli.main([]) == 2
    assert cli.main([write(tmp_path, {"space": E2, "command": "fly"})]) == 2
    assert cli.main([write(tmp_path, {"space": E2, "command": "estimate", "extra": 1})]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main([str(bad)]) == 2
    poly = {"kind": "polyhedral",
            "functionals": np.random.default_rng(0).normal(size=(40, 6)).tolist()}
    assert cli.main([write(tmp_path, {"space": poly, "command": "duality", "params": {"p": 1.5}})]) == 2
    assert "missing dual" in capsys.readouterr().err


def test_replay_round_trip(tmp_path):
    for cfg in ({"space": L15, "command": "estimate",
                 "params": {"kind": "strong_type_1.5", "exponent": 1.5, "depth": 2, "budget": 500}},
                {"space": {"kind": "sup", "dim": 2}, "command": "estimate",
                 "params": {"kind": "smooth_2", "exponent": 2, "budget": 1000}},
                {"space": L15, "command": "renorm",
                 "params": {"direction": "type_sup", "exponent": 1.5, "c": 1.0, "depth": 2,
                            "n_points": 3, "n_pairs": 2, "n_dec": 1}}):
        out = tmp_path / "rep.json"
        cli.main([write(tmp_path, cfg), "--output", str(out)])
        rep, code = cli.replay(str(out))
        assert code == 0 and rep["results"]["table"]["rows"]


def test_replay_detects_tampering(tmp_path):
    out = tmp_path / "rep.json"
    cli.main([write(tmp_path, {"space": L15, "command": "estimate",
                               "params": {"kind": "smooth_1.5", "exponent": 1.5, "budget": 500}}),
              "--output", str(out)])
    doc = json.loads(out.read_text())
    doc["results"]["replay"]["value"] += 1e-6
    out.write_text(json.dumps(doc))
    assert cli.main(["--replay", str(out), "--output", str(tmp_path / "r.json")]) == 1


def test_byte_identical_across_workers(tmp_path):
    cfg = {"space": L3, "command": "estimate", "seed": 7,
           "params": {"kind": "convex_3", "exponent": 3, "budget": 1500}}
    texts = {run_main(tmp_path, cfg, "--workers", str(w))[1] for w in (1, 2, 8)}
    assert len(texts) == 1


def test_formats(tmp_path):
    cfg = {"space": L3, "command": "renorm",
           "params": {"direction": "cotype_inf", "exponent": 3, "c": 1.0, "depth": 2, "n_points": 3,
                      "n_pairs": 2}}
    _, csv_text = run_main(tmp_path, cfg, "--format", "csv")
    rows = csv_text.strip().splitlines()
    assert len(rows) >= 2 and len({r.count(",") for r in rows}) == 1
    _, text = run_main(tmp_path, cfg, "--format", "text")
    assert text.startswith("command: renorm") and "exit_code: 0" in text


def test_overrides_and_module_entry(tmp_path):
    cfg = {"space": E2, "command": "estimate", "seed": 1,
           "params": {"kind": "smooth_2", "exponent": 2, "budget": 5000}}
    code, text = run_main(tmp_path, cfg, "--seed", "4", "--budget", "300")
    rep = json.loads(text)
    assert rep["config"]["seed"] == 4 and rep["config"]["params"]["budget"] == 300
    proc = subprocess.run([sys.executable, "-m", "strongtype", write(tmp_path, cfg), "--format", "csv",
                           "--timing"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("kind,") and "wall-clock" in proc.stderr


@pytest.mark.parametrize("flag", ["--budget", "--depth"])
def test_bad_override_is_config_error(tmp_path, flag):
    cfg = {"space": E2, "command": "estimate", "params": {"kind": "smooth_2", "exponent": 2}}
    assert cli.main([write(tmp_path, cfg), flag, "-3"]) == 2


def test_reports_are_strict_json(tmp_path):
    out = tmp_path / "rep.json"
    cli.main([write(tmp_path, {"space": {"kind": "lp", "p": 1, "dim": 2}, "command": "estimate",
                               "params": {"kind": "convex_2", "exponent": 2, "budget": 2000}}),
              "--output", str(out)])
    text = out.read_text()

    def reject(name):
        raise ValueError(name)
    json.loads(text, parse_constant=reject)
    assert cli.main(["--replay", str(out), "--output", str(tmp_path / "r.json")]) == 0
