"""Command-line interface tests.

Exercised in-process through main(argv) for speed; files are checked for
byte-level determinism and for exact round trips (observations written at
17 significant digits reparse to the same float64 values).
"""

import json

import numpy as np
import pytest

from levylse import LevySpec, SimConfig, estimate, get_model, simulate
from levylse.cli import (
    ConfigError,
    main,
    parse_config_text,
    read_observations_csv,
)

SIM_CFG = """\
# ou_affine at moderate noise
model = ou_affine
theta0 = 1.0, 1.0
x0 = 1.0
epsilon = 0.05
n = 80
substeps = 10
seed = 42
levy.sigma = 1.0
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_config_atoms_and_lists():
    cfg = parse_config_text(
        "a = 1\nb = 2.5\nc = hello\nd = true\ne = 1, 2.5, x\n# comment\nf = 0.1:100\n"
    )
    assert cfg == {
        "a": 1,
        "b": 2.5,
        "c": "hello",
        "d": True,
        "e": [1, 2.5, "x"],
        "f": "0.1:100",
    }


def test_parse_config_errors_carry_location():
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("a = 1\nbroken line\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="empty"):
        parse_config_text("a =\n")


def test_simulate_writes_expected_observations(tmp_path):
    cfg = _write(tmp_path, "sim.cfg", SIM_CFG)
    out = tmp_path / "run"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    obs = read_observations_csv(out / "observations.csv")
    direct = simulate(
        SimConfig(
            epsilon=0.05,
            n=80,
            x0=np.array([1.0]),
            theta0=np.array([1.0, 1.0]),
            levy=LevySpec(sigma=1.0, dim=1),
            seed=42,
            substeps=10,
        ),
        get_model("ou_affine"),
    )
    assert np.array_equal(obs.values, direct.values)
    assert np.array_equal(obs.times, direct.times)


def test_simulate_is_byte_deterministic(tmp_path):
    cfg = _write(tmp_path, "sim.cfg", SIM_CFG)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", cfg, "--out", str(out1)])
    main(["simulate", "--config", cfg, "--out", str(out2)])
    b1 = (out1 / "observations.csv").read_bytes()
    b2 = (out2 / "observations.csv").read_bytes()
    assert b1 == b2


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, "sim.cfg", SIM_CFG)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", cfg, "--out", str(out1)])
    main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "43"])
    assert (out1 / "observations.csv").read_bytes() != (out2 / "observations.csv").read_bytes()


def test_estimate_matches_library_call(tmp_path):
    cfg = _write(tmp_path, "sim.cfg", SIM_CFG)
    obs_dir = tmp_path / "obs"
    main(["simulate", "--config", cfg, "--out", str(obs_dir)])
    est_cfg = _write(
        tmp_path,
        "est.cfg",
        f"model = ou_affine\nobservations = {obs_dir / 'observations.csv'}\n",
    )
    est_dir = tmp_path / "est"
    assert main(["estimate", "--config", est_cfg, "--out", str(est_dir)]) == 0
    payload = json.loads((est_dir / "estimate.json").read_text())
    obs = read_observations_csv(obs_dir / "observations.csv")
    direct = estimate(obs, get_model("ou_affine"))
    assert payload["theta_hat"] == [float(v) for v in direct.theta_hat]
    assert payload["method"] == "closed_form"
    assert payload["converged"] is True
    assert payload["n"] == 80


def test_estimate_singular_data_exit_code(tmp_path):
    rows = ["k,t,x_1"] + [f"{k},{k/10},2" for k in range(11)]
    obs_path = _write(tmp_path, "flat.csv", "\n".join(rows) + "\n")
    est_cfg = _write(tmp_path, "est.cfg", f"model = ou_affine\nobservations = {obs_path}\n")
    assert main(["estimate", "--config", est_cfg, "--out", str(tmp_path)]) == 3


def test_read_observations_validation(tmp_path):
    bad_header = _write(tmp_path, "a.csv", "k,t,y\n0,0,1\n1,1,2\n")
    with pytest.raises(ConfigError, match="header"):
        read_observations_csv(bad_header)
    bad_index = _write(tmp_path, "b.csv", "k,t,x_1\n0,0,1\n2,1,2\n")
    with pytest.raises(ConfigError, match="index"):
        read_observations_csv(bad_index)
    bad_times = _write(tmp_path, "c.csv", "k,t,x_1\n0,0,1\n1,0.7,2\n2,1,3\n")
    with pytest.raises(ConfigError, match="uniform grid"):
        read_observations_csv(bad_times)
    bad_value = _write(tmp_path, "d.csv", "k,t,x_1\n0,0,1\n1,1,oops\n")
    with pytest.raises(ConfigError, match="numeric"):
        read_observations_csv(bad_value)


EXP_CFG = """\
mode = consistency
model = ou_affine
theta0 = 1.0, 1.0
x0 = 1.0
ladder = 0.1:60, 0.01:60
replications = 8
substeps = 4
seed = 3
levy.sigma = 1.0
"""


def test_experiment_consistency_outputs(tmp_path):
    cfg = _write(tmp_path, "exp.cfg", EXP_CFG)
    out = tmp_path / "exp"
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["mode"] == "consistency"
    assert report["rmse_monotone"] is True
    assert len(report["points"]) == 2
    lines = (out / "replications.csv").read_text().strip().splitlines()
    assert lines[0] == "replication,eps,n,theta_hat_1,theta_hat_2,converged,boundary_hit,contrast"
    assert len(lines) == 1 + 16


def test_experiment_threads_do_not_change_results(tmp_path):
    cfg = _write(tmp_path, "exp.cfg", EXP_CFG)
    out1, out2 = tmp_path / "t1", tmp_path / "t4"
    main(["experiment", "--config", cfg, "--out", str(out1), "--threads", "1"])
    main(["experiment", "--config", cfg, "--out", str(out2), "--threads", "4"])
    assert (out1 / "replications.csv").read_bytes() == (out2 / "replications.csv").read_bytes()


def test_experiment_limit_law_outputs(tmp_path):
    text = """\
mode = limit_law
model = sqrt_shift
theta0 = 1.0
x0 = 0.0
ladder = 0.05:200, 0.01:1500
replications = 20
substeps = 4
seed = 5
levy.sigma = 1.0
limit.count = 300
limit.fine_m = 500
"""
    cfg = _write(tmp_path, "lim.cfg", text)
    out = tmp_path / "lim"
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["mode"] == "limit_law"
    assert report["ks"]["limit_draw_count"] == 300
    assert len(report["ks"]["per_coordinate"]) == 1
    assert isinstance(report["ks"]["all_passed"], bool)
    assert len(report["rescaled_errors"]) == 20


def test_limit_dist_pathwise_and_closed_form(tmp_path):
    base = """\
model = sqrt_shift
theta0 = 1.0
x0 = 0.0
seed = 9
levy.sigma = 1.0
levy.stable.alpha = 1.5
count = 40
fine_m = 300
"""
    for kind in ("pathwise", "closed_form"):
        cfg = _write(tmp_path, f"{kind}.cfg", base + f"kind = {kind}\n")
        out = tmp_path / kind
        assert main(["limit-dist", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "limit_draws.csv").read_text().strip().splitlines()
        assert lines[0] == "s_1"
        assert len(lines) == 41


def test_limit_dist_closed_form_needs_sqrt_shift(tmp_path):
    text = """\
model = ou_affine
theta0 = 1.0, 1.0
x0 = 1.0
levy.sigma = 1.0
kind = closed_form
"""
    cfg = _write(tmp_path, "bad.cfg", text)
    assert main(["limit-dist", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_config_error_exit_codes(tmp_path):
    bad_model = _write(tmp_path, "a.cfg", SIM_CFG.replace("ou_affine", "bogus"))
    assert main(["simulate", "--config", bad_model, "--out", str(tmp_path)]) == 2
    unknown_key = _write(tmp_path, "b.cfg", SIM_CFG + "mystery = 1\n")
    assert main(["simulate", "--config", unknown_key, "--out", str(tmp_path)]) == 2
    missing_field = _write(tmp_path, "c.cfg", "model = ou_affine\n")
    assert main(["simulate", "--config", missing_field, "--out", str(tmp_path)]) == 2
    bad_ladder = _write(tmp_path, "d.cfg", EXP_CFG.replace("0.1:60, 0.01:60", "sixty"))
    assert main(["experiment", "--config", bad_ladder, "--out", str(tmp_path)]) == 2
    # limit-law ladder with decreasing n*eps is a config-level error
    bad_neps = _write(
        tmp_path,
        "e.cfg",
        EXP_CFG.replace("mode = consistency", "mode = limit_law"),
    )
    assert main(["experiment", "--config", bad_neps, "--out", str(tmp_path)]) == 2


def test_io_error_exit_codes(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", "."]) == 4
    cfg = _write(tmp_path, "sim.cfg", SIM_CFG)
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    assert main(["simulate", "--config", cfg, "--out", str(blocker / "sub")]) == 4


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "exp.cfg", EXP_CFG)
    out = tmp_path / "env"
    monkeypatch.setenv("LEVY_LSE_THREADS", "2")
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
    monkeypatch.setenv("LEVY_LSE_THREADS", "soup")
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 2


def test_unreadable_sigma_matrix(tmp_path):
    text = SIM_CFG.replace("levy.sigma = 1.0", "levy.sigma = 1;0;bad")
    cfg = _write(tmp_path, "sig.cfg", text)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
