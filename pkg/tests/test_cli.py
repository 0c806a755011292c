import csv
import io
import json
import subprocess
import sys

import pytest

from finitedecoy import cli
from finitedecoy.channel_sim import expected_counts
from finitedecoy.estimation import NumericalError
from finitedecoy.keyrate import RateSetup


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_sacrifice_reference(capsys):
    code, out, _ = run(capsys, "sacrifice")
    d = json.loads(out)
    assert code == 0
    assert d["aborted"] is False and d["counts_source"] == "expected"
    assert len(d["config_hash"]) == 16
    assert set(d["conditions"]) == {"condition1", "condition2", "condition3"}


def test_sacrifice_invalid_counts(capsys, tmp_path):
    setup = RateSetup(Ms=10**6)
    N1 = setup.params().N1
    cfg = write(tmp_path, "c.json", {"Ms": 10**6, "counts": {
        "Ms": 10, "M0": 0, "M1": N1, "M2": 0, "M3": 1}})
    code, _, err = run(capsys, "sacrifice", "--config", cfg)
    assert code == 2 and "M1 + M3 <= N1" in err


def test_sacrifice_variants(capsys):
    _, a, _ = run(capsys, "sacrifice", "--variant", "improved")
    _, b, _ = run(capsys, "sacrifice", "--variant", "non-improved")
    assert json.loads(a)["S"] <= json.loads(b)["S"]


def test_simulate_reproducible(capsys):
    _, a, _ = run(capsys, "simulate", "--seed", "11")
    _, b, _ = run(capsys, "simulate", "--seed", "11")
    _, c, _ = run(capsys, "simulate", "--seed", "12")
    assert a == b and a != c


def test_simulate_expected_mode(capsys):
    code, out, _ = run(capsys, "simulate", "--expected")
    d = json.loads(out)
    setup = RateSetup()
    want = expected_counts(setup.model(), setup.params(), setup.Ms)
    assert code == 0 and d["mode"] == "expected"
    assert d["counts"] == {k: getattr(want, k) for k in ("Ms", "M0", "M1", "M2", "M3", "M4")}


def test_simulate_no_dark_counts(capsys, tmp_path):
    cfg = write(tmp_path, "c.json", {"p0": 0.0})
    _, out, _ = run(capsys, "simulate", "--config", cfg, "--seed", "3")
    assert json.loads(out)["counts"]["M0"] == 0


def test_simulate_sacrifice_round_trip(capsys, tmp_path):
    sim = tmp_path / "sim.json"
    assert cli.main(["simulate", "--seed", "5", "--output", str(sim)]) == 0
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert cli.main(["sacrifice", "--counts", str(sim), "--output", str(out1)]) == 0
    assert cli.main(["sacrifice", "--counts", str(sim), "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    d = json.loads(out1.read_text())
    assert d["counts_source"] == "file"
    assert d["counts"] == json.loads(sim.read_text())["counts"]


def test_sweep_csv(capsys, tmp_path):
    cfg = write(tmp_path, "g.json", {"grid": {"mu2": [0.3, 0.5], "Ms": [1e6, 1e7, 1e8]},
                                     "method": "chernoff-kl"})
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == list(cli.CSV_HEADER)
    assert len(rows) == 7 and all(len(r) == 9 for r in rows)
    by_mu2 = {}
    for r in rows[1:]:
        by_mu2.setdefault(r[1], []).append(float(r[7]))
    for rates in by_mu2.values():
        assert rates == sorted(rates)


def test_sweep_single_point_matches_key_rate(capsys, tmp_path):
    cfg = write(tmp_path, "g.json", {"grid": {"mu2": [0.5]}})
    _, out, _ = run(capsys, "sweep", "--config", cfg, "--format", "json")
    (pt,) = json.loads(out)["points"]
    direct = RateSetup().evaluate()
    assert pt["S"] == direct.S and pt["R"] == direct.R


def test_sweep_aborted_points_exit_zero(capsys, tmp_path):
    cfg = write(tmp_path, "g.json", {"grid": {"mu1": [0.01]}, "method": "chernoff-kl"})
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--format", "csv")
    assert code == 0 and out.splitlines()[1].endswith(",true")


@pytest.mark.parametrize("grid", [None, {}, {"mu2": []}])
def test_sweep_empty_grid(capsys, tmp_path, grid):
    cfg = write(tmp_path, "g.json", {"grid": grid})
    code, _, err = run(capsys, "sweep", "--config", cfg)
    assert code == 2 and "grid" in err


def test_coverage_zero_replicates(capsys):
    code, _, err = run(capsys, "coverage", "--replicates", "0")
    assert code == 2 and "replicates" in err


def test_coverage_small_exhaustive(capsys, tmp_path):
    cfg = write(tmp_path, "c.json", {"coverage": {"N": 50, "p": 0.3, "alpha": 0.1,
                                                  "replicates": 20000}})
    code, out, _ = run(capsys, "coverage", "--config", cfg, "--method", "exact", "--seed", "9")
    d = json.loads(out)
    assert code == 0
    assert d["standard_error"] == pytest.approx((0.1 * 0.9 / 20000) ** 0.5)
    ex = d["exhaustive"]["exact"]
    assert all(v["passed"] for v in ex.values())
    assert all(v["passed"] for v in d["results"]["exact"].values())


def test_check_conditions_reference(capsys):
    code, out, _ = run(capsys, "check-conditions")
    d = json.loads(out)
    assert code == 0 and d["all_passed"]
    assert d["conditions"]["condition1"]["margins"]["ineq3"] > 0


def test_check_conditions_tiny_n(capsys, tmp_path):
    cfg = write(tmp_path, "c.json", {"N0": 100, "N1": 100, "N2": 100, "Ns": 1000, "Ms": 300,
                                     "method": "chernoff-kl"})
    code, out, _ = run(capsys, "check-conditions", "--config", cfg)
    d = json.loads(out)
    c1 = d["conditions"]["condition1"]
    assert code == 0 and not d["all_passed"] and not c1["passed"]
    assert set(c1["margins"]) == {"ineq1", "ineq2", "ineq3"}


def test_unknown_config_key(capsys, tmp_path):
    cfg = write(tmp_path, "c.json", {"betta": 80})
    code, _, err = run(capsys, "sacrifice", "--config", cfg)
    assert code == 2 and "betta" in err


def test_flags_override_config(capsys, tmp_path):
    cfg = write(tmp_path, "c.json", {"variant": "non-improved"})
    _, out, _ = run(capsys, "sacrifice", "--config", cfg, "--variant", "improved")
    assert json.loads(out)["variant"] == "improved"


def test_bad_flag_usage_exit():
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--format", "xml"])
    assert exc.value.code == 2


def test_numerical_failure_exit(capsys, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("non-finite bound")

    monkeypatch.setattr(cli, "pipeline", boom)
    code, _, err = run(capsys, "sacrifice")
    assert code == 3 and "numerical" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "finitedecoy", "simulate", "--expected"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["mode"] == "expected"
