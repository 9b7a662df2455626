import json
import subprocess
import sys

import pytest

from bookimpact.cli import main


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "bookimpact.cli"] + args,
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "c.txt"
    cfg.write_text("preset = small_tick\nn_events = 40000\nseed = 5\n"
                   "n_days = 4\n")
    out = root / "s.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    return root, out


def test_simulate_then_stats(sim_csv):
    root, csv = sim_csv
    out = root / "stats.json"
    code = main(["stats", "--in", str(csv), "--out", str(out),
                 "--max-lag", "80"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert set(payload["P"]) == {"MO0", "MOP", "CA0", "LO0", "CAP", "LOP"}
    assert abs(sum(payload["P"].values()) - 1.0) < 1e-9
    assert len(payload["D"]) == 81
    assert "MO0->MOP" in payload["C"]
    assert payload["meta"]["units"] == "ticks"


def test_stats_csv_long_format(sim_csv):
    root, csv = sim_csv
    out = root / "stats2.json"
    lf = root / "stats.csv"
    assert main(["stats", "--in", str(csv), "--out", str(out),
                 "--csv", str(lf), "--max-lag", "40"]) == 0
    lines = lf.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "quantity,pi1,pi2,lag,value,stderr,count"


def test_gaps_and_closure(sim_csv):
    root, csv = sim_csv
    out = root / "gaps.json"
    assert main(["gaps", "--in", str(csv), "--out", str(out),
                 "--max-lag", "120", "--kernel-lag", "20",
                 "--trim", "0,0"]) == 0
    payload = json.loads(out.read_text())
    assert set(payload["deltaR"]) == {"MOP", "CAP", "LOP"}
    assert "MO0->MOP" in payload["kappa"]
    assert len(payload["Dclosure"]) == 121
    out2 = root / "closure.json"
    assert main(["closure", "--in", str(csv), "--out", str(out2),
                 "--max-lag", "120", "--kernel-lag", "20",
                 "--trim", "0,0"]) == 0
    payload2 = json.loads(out2.read_text())
    assert payload2["units"] == "ticks^2"


def test_unknown_command_usage():
    res = run_cli(["definitely-not-a-command"])
    assert res.returncode == 2
    assert "usage" in res.stderr.lower()


def test_error_json_on_stderr(tmp_path):
    res = run_cli(["stats", "--in", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "x.json")])
    assert res.returncode == 1
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert "error" in err and "message" in err


def test_idempotent_outputs(sim_csv):
    root, csv = sim_csv
    a, b = root / "a.json", root / "b.json"
    for out in (a, b):
        assert main(["stats", "--in", str(csv), "--out", str(out),
                     "--max-lag", "30", "--seed", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
