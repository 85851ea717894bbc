import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

EXE = os.environ.get("CDFI_EXE", "cdfi")
MODELS = Path(__file__).resolve().parents[2] / "models"


def cdfi(*args, cwd=None, env=None):
    full_env = dict(os.environ)
    full_env.pop("CDFI_WORKERS", None)
    if env:
        full_env.update(env)
    return subprocess.run([EXE, *map(str, args)], cwd=cwd, env=full_env, capture_output=True, text=True)


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_analyze_kingman_telescopes(tmp_path):
    r = cdfi("analyze", "--preset", "kingman", "--levels", "1..1000", "--seed", 1, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    table = rows(tmp_path / "table.csv")
    assert list(table[0].keys()) == ["n", "log_pi", "m_n", "E_inf_T", "var_tau", "var_T", "r_n"]
    assert len(table) == 1000
    for row in table:
        n = int(row["n"])
        assert float(row["E_inf_T"]) == pytest.approx(2 / n, rel=1e-9)
    report = json.loads((tmp_path / "regime.json").read_text())
    assert report["regime"] == "I"


def test_analyze_exponential_is_regime_two(tmp_path):
    r = cdfi("analyze", "--preset", "exponential", "--param", "beta=0.693", "--seed", 1, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "regime.json").read_text())
    assert report["regime"] == "II"
    assert report["alpha_estimate"] == pytest.approx(1 - 2.718281828459045 ** -0.693, abs=1e-3)
    law = rows(tmp_path / "limit_law.csv")
    assert list(law[0].keys()) == ["a", "G"]


def test_model_file_and_quiet_output(tmp_path):
    r = cdfi("analyze", "--model", MODELS / "n2_birth_n.model", "--levels", "1..200", "--seed", 1,
             "--out", tmp_path, "--quiet")
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["regime"] == "I"
    assert r.stderr == ""


def test_model_errors_exit_2(tmp_path):
    assert cdfi("analyze", "--preset", "no-such-preset", "--out", tmp_path).returncode == 2
    assert cdfi("analyze", "--preset", "power", "--param", "rho", "--out", tmp_path).returncode == 2
    assert cdfi("verify", "bogus", "--preset", "kingman", "--out", tmp_path).returncode == 2
    assert cdfi("analyze", "--bogus-flag").returncode == 2


def test_divergent_series_exit_3(tmp_path):
    r = cdfi("analyze", "--preset", "custom", "--param", "birth_coef=2", "--param", "birth_exp=1",
             "--param", "death_exp=1", "--levels", "1..10", "--seed", 1, "--out", tmp_path)
    assert r.returncode == 3, r.stderr
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["exit_code"] == 3


def test_verify_speed_kingman(tmp_path):
    r = cdfi("verify", "speed", "--preset", "kingman", "--seed", 5, "--out", tmp_path)
    assert r.returncode == 0, r.stdout + r.stderr
    header = (tmp_path / "checks.csv").read_text().splitlines()[0]
    assert header == "check,statistic,threshold,passed,n,reps,seed"
    checks = json.loads((tmp_path / "checks.json").read_text())
    for c in checks:
        assert float(c["details"]["mean_tX"]) == pytest.approx(2, abs=0.05)


def test_verify_tail_reports_slope(tmp_path):
    # the exit status reflects the check; the slope must be in the right neighbourhood either way
    r = cdfi("verify", "tail", "--preset", "pure-death-power", "--param", "rho=2", "--seed", 3, "--out", tmp_path)
    assert r.returncode in (0, 4)
    c = json.loads((tmp_path / "checks.json").read_text())[0]
    assert float(c["details"]["slope"]) == pytest.approx(-1, abs=0.25)
    assert float(c["details"]["expected"]) == -1
    assert (r.returncode == 0) == c["passed"]


def test_simulate_same_seed_any_workers(tmp_path):
    args = ["simulate", "--preset", "power", "--N0", 200, "--reps", 300, "--levels", "1,10,50",
            "--t-grid", "0.5:3:6", "--laplace", "1", "--trajectories", "true", "--seed", 11]
    a = cdfi(*args, "--workers", 1, "--out", tmp_path / "a")
    b = cdfi(*args, "--out", tmp_path / "b", env={"CDFI_WORKERS": "3"})
    assert a.returncode == 0 and b.returncode == 0, a.stderr + b.stderr
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["workers"] == 3
    for name in ["levels.csv", "transforms.csv", "cdf.csv", "trajectories.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert rows(tmp_path / "a" / "trajectories.csv")[0].keys() == {"replicate", "n", "T_n", "H_n"}


def test_generated_seed_and_rerun(tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text("preset = pure-death-power\nparam = rho=2\nN0 = 100\nreps = 200\nlevels = 1,10\n"
                    "t_grid = 0.5:2:4\n")
    r = cdfi("simulate", "--plan", plan, "--out", tmp_path / "run")
    assert r.returncode == 0, r.stderr
    m = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert m["seed_generated"] is True
    assert m["argv"][-2:] == ["--seed", str(m["seed"])]
    assert m["inputs"]["plan"]["file_digest"]
    names = sorted(Path(o["path"]).name for o in m["outputs"])
    assert names == ["cdf.csv", "levels.csv"]

    again = cdfi("rerun", tmp_path / "run" / "manifest.json", "--out", tmp_path / "again")
    assert again.returncode == 0, again.stdout + again.stderr
    for name in names:
        assert (tmp_path / "run" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()

    plan.write_text(plan.read_text() + "reps = 201\n")
    changed = cdfi("rerun", tmp_path / "run" / "manifest.json", "--out", tmp_path / "changed")
    assert changed.returncode == 2


def test_varenv_schedule_survival_csv(tmp_path):
    sched = tmp_path / "schedule.csv"
    sched.write_text("i,a_i,t_i\n1,0,0.5\n2,1.5,0.4\n3,3,0.3\n")
    r = cdfi("simulate", "--preset", "pure-death-power", "--schedule", sched, "--N0", 50, "--reps", 200,
             "--seed", 3, "--out", tmp_path / "out")
    assert r.returncode == 0, r.stderr
    surv = rows(tmp_path / "out" / "survival.csv")
    assert list(surv[0].keys()) == ["epoch", "survivors", "reps", "lo", "hi"]
    assert [int(s["epoch"]) for s in surv] == [0, 1, 2, 3]
    counts = [int(s["survivors"]) for s in surv]
    assert counts[0] == 200 and counts == sorted(counts, reverse=True)

    gen = cdfi("simulate", "--preset", "pure-death-power", "--beta", 2, "--c", 0.5, "--counterexample", "true",
               "--epochs", 20, "--reps", 100, "--seed", 4, "--out", tmp_path / "gen")
    assert gen.returncode == 0, gen.stderr
    assert (tmp_path / "gen" / "schedule.csv").read_text().startswith("i,a_i,t_i\n")


def test_manifest_written_on_failure(tmp_path):
    r = cdfi("simulate", "--preset", "kingman", "--levels", "x..y", "--seed", 1, "--out", tmp_path)
    assert r.returncode == 2
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["exit_code"] == 2
    assert m["status"].startswith("invalid argument")
