import json
import subprocess
import sys

import pytest

from bondheat.cli import main
from bondheat.dataio import default_config, save_config


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    run = default_config("Au", 2.0, 2.5)
    run = run.replace(model=run.model.replace(counts=(10, 15, 10, 30)))
    p = tmp_path_factory.mktemp("cli") / "au.toml"
    save_config(run, p)
    return str(p)


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def test_couple(cfg_path, tmp_path):
    out, trace = tmp_path / "c.json", tmp_path / "t.csv"
    code = main(["couple", "--config", cfg_path, "--current", "3.7", "--duration", "500 ms",
                 "--output", str(out), "--trace", str(trace)])
    doc = _json(out)
    assert code == 0 and doc["converged"] and doc["feasibility_margin_K"] > 0
    assert doc["duration_s"] == 0.5 and "generated" in doc
    assert trace.read_text().startswith("iteration,T_we_K,chi_w_K3,residual")


def test_simulate_probe_and_grid(cfg_path, tmp_path):
    out = tmp_path / "p.json"
    assert main(["simulate", "--config", cfg_path, "--current", "3.7 A", "--duration", "0.5",
                 "--probe", "1.25 mm,0.5", "--output", str(out)]) == 0
    doc = _json(out)
    assert doc["y_m"] == pytest.approx(1.25e-3) and doc["T_K"] > 300
    grid = tmp_path / "g.csv"
    assert main(["simulate", "--config", cfg_path, "--current", "3.7", "--duration", "0.5", "--grid",
                 "--output", str(grid), "--no-timestamp"]) == 0
    lines = grid.read_text().splitlines()
    assert lines[1] == "x_m,y_m,z_m,t_s,T_K" and len(lines) == 2 + 41 * 21


def test_capacity(cfg_path, tmp_path):
    out = tmp_path / "cap.csv"
    assert main(["capacity", "--config", cfg_path, "--hold", "50 ms", "--imin", "0", "--imax", "6",
                 "--steps", "3", "--output", str(out), "--no-timestamp"]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "# hold_s=0.05" and len(rows) == 5 + 3


def test_deterministic_without_timestamp(cfg_path, tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"o{k}.json"
        main(["couple", "--config", cfg_path, "--current", "3.7", "--duration", "0.5",
              "--output", str(p), "--no-timestamp"])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] and b"generated" not in outs[0]


def test_verify_compound(cfg_path, tmp_path):
    out = tmp_path / "v.json"
    code = main(["verify", "--config", cfg_path, "--suite", "compound", "--output", str(out)])
    doc = _json(out)
    assert code == (0 if doc["passed"] else 4)
    assert {c["name"] for c in doc["checks"]} >= {"chip-plane trace (relative L2)"}


def test_verify_breach_exit_code(cfg_path, tmp_path, monkeypatch):
    from bondheat import verify
    monkeypatch.setattr(verify, "TRACE_TOL", 0.0)
    assert main(["verify", "--config", cfg_path, "--suite", "compound", "--output", str(tmp_path / "v.json")]) == 4


def test_optimize(cfg_path, tmp_path):
    events = tmp_path / "e.csv"
    events.write_text("wire_id,material,position,I0_amps,t_fuse_seconds\n"
                      "a,Au,A,11.0,0.05\nb,Au,A,11.2,0.045\nc,Au,A,14.0,0.02\nd,Cu,A,9.0,0.1\n")
    out = tmp_path / "fit.json"
    code = main(["optimize", "--config", cfg_path, "--events", str(events), "--bins", "2",
                 "--output", str(out), "--no-timestamp"])
    doc = _json(out)
    assert code in (0, 3)
    assert doc["histogram"]["bins"] == 2 and len(doc["histogram"]["pairs"]) == 2
    assert set(doc["error_split"]["fitted"]) == {"transient", "steady"}
    assert len(doc["parameters"]) == 11


@pytest.mark.parametrize("argv", [
    ["couple", "--config", "missing.toml", "--current", "1", "--duration", "1"],
    ["capacity", "--config", "CFG", "--hold", "0.05", "--imin", "5", "--imax", "1", "--steps", "3"],
    ["simulate", "--config", "CFG", "--current", "1", "--duration", "1", "--probe", "9 m,0.5"],
    ["optimize", "--config", "CFG", "--events", "missing.csv", "--bins", "3"],
])
def test_input_errors_exit_2(cfg_path, argv):
    assert main([cfg_path if a == "CFG" else a for a in argv]) == 2


def test_bad_unit_is_a_usage_error(cfg_path):
    with pytest.raises(SystemExit) as info:
        main(["couple", "--config", cfg_path, "--current", "3 K", "--duration", "1"])
    assert info.value.code == 2


def test_module_entry_point(cfg_path):
    r = subprocess.run([sys.executable, "-m", "bondheat", "couple", "--config", cfg_path, "--current", "2",
                        "--duration", "0.1", "--no-timestamp"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["converged"]
