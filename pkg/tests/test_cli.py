"""End-to-end command-line runs: simulate, fit, compare, validate."""

import hashlib
import json

import numpy as np
import pytest

from seqlate.cli import main
from seqlate.config import load_config, parse_config

CONFIG = """\
[dgp]
n = 120
seed = 77
compliance_probs = 0.2, 0.6, 0.2

[sampler]
n_chains = 2
n_warmup = 40
n_draws = 60

[prior]
coef_sd = 5.0
"""


@pytest.fixture()
def sim_dir(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(CONFIG)
    out = tmp_path / "sim"
    rc = main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    return out


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_simulate_writes_expected_files(sim_dir, capsys):
    assert (sim_dir / "dataset.csv").exists()
    assert (sim_dir / "dataset.truth.json").exists()
    assert (sim_dir / "effective_config.ini").exists()
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["seed"] == 77
    for path_str, digest in manifest["outputs"].items():
        from pathlib import Path
        assert sha256(Path(path_str)) == digest
    # the effective config reparses to the same configuration
    cfg = load_config(sim_dir / "effective_config.ini")
    assert cfg.dgp.n == 120
    assert cfg.dgp.seed == 77


def test_fit_writes_draws_and_summary(sim_dir, tmp_path):
    fit_dir = tmp_path / "fit"
    rc = main(["fit", "--data", str(sim_dir / "dataset.csv"),
               "--out", str(fit_dir), "--chains", "2", "--warmup", "30",
               "--draws", "50", "--seed", "99"])
    assert rc == 0
    lines = (fit_dir / "draws.csv").read_text().splitlines()
    assert lines[0].startswith("iter,chain,late,gamma_nt_0")
    assert len(lines) == 1 + 2 * 50
    summary = json.loads((fit_dir / "summary.json").read_text())
    assert summary["seed"] == 99
    assert summary["n_draws"] == 50
    assert "mean" in summary["late"]
    assert "rhat" in summary["late"]
    assert "sigma_y" in summary["theta"]
    manifest = json.loads((fit_dir / "manifest.json").read_text())
    assert manifest["subcommand"] == "fit"
    assert str(sim_dir / "dataset.csv") in manifest["inputs"]


def test_fit_same_seed_is_byte_identical(sim_dir, tmp_path):
    args = ["fit", "--data", str(sim_dir / "dataset.csv"),
            "--chains", "2", "--warmup", "20", "--draws", "30", "--seed", "5"]
    d1, d2 = tmp_path / "f1", tmp_path / "f2"
    assert main(args + ["--out", str(d1)]) == 0
    assert main(args + ["--out", str(d2)]) == 0
    assert (d1 / "draws.csv").read_bytes() == (d2 / "draws.csv").read_bytes()


def test_fit_marginal_kernel_alias(sim_dir, tmp_path):
    fit_dir = tmp_path / "fitm"
    rc = main(["fit", "--data", str(sim_dir / "dataset.csv"),
               "--out", str(fit_dir), "--chains", "1", "--warmup", "20",
               "--draws", "30", "--seed", "5", "--theta-update", "marginal"])
    assert rc == 0
    summary = json.loads((fit_dir / "summary.json").read_text())
    assert summary["theta_update"] == "marginal_mh"


def test_compare_emits_table_with_bias(sim_dir, tmp_path, capsys):
    fit_dir = tmp_path / "fit"
    main(["fit", "--data", str(sim_dir / "dataset.csv"), "--out", str(fit_dir),
          "--chains", "2", "--warmup", "30", "--draws", "50", "--seed", "99"])
    capsys.readouterr()
    rc = main(["compare", "--data", str(sim_dir / "dataset.csv"),
               "--fit", str(fit_dir)])
    assert rc == 0
    out = capsys.readouterr().out
    for method in ("bayes_late", "itt", "per_protocol", "as_treated"):
        assert method in out
    lines = (fit_dir / "comparison.csv").read_text().splitlines()
    assert lines[0] == "method,point,lo,hi,n_used,bias"
    assert len(lines) == 5


def test_compare_without_sidecar_has_no_bias(sim_dir, tmp_path, capsys):
    fit_dir = tmp_path / "fit"
    main(["fit", "--data", str(sim_dir / "dataset.csv"), "--out", str(fit_dir),
          "--chains", "1", "--warmup", "20", "--draws", "40", "--seed", "4"])
    data_copy = tmp_path / "alone.csv"
    data_copy.write_bytes((sim_dir / "dataset.csv").read_bytes())
    capsys.readouterr()
    rc = main(["compare", "--data", str(data_copy), "--fit", str(fit_dir),
               "--out", str(tmp_path / "cmp.csv")])
    assert rc == 0
    lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert lines[0] == "method,point,lo,hi,n_used"


def test_compare_arm_overrides(sim_dir, tmp_path, capsys):
    fit_dir = tmp_path / "fit"
    main(["fit", "--data", str(sim_dir / "dataset.csv"), "--out", str(fit_dir),
          "--chains", "1", "--warmup", "20", "--draws", "40", "--seed", "4"])
    capsys.readouterr()
    rc = main(["compare", "--data", str(sim_dir / "dataset.csv"),
               "--fit", str(fit_dir), "--treated", "1,0", "--control", "0,1"])
    assert rc == 0


def test_exit_code_for_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[dgp]\nn = 10\nseed = 1\nburn = 5\n")
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "burn" in capsys.readouterr().err


def test_exit_code_for_invalid_field(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[dgp]\nn = 10\nseed = 1\nintermediate_noise_sd = -2\n")
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "intermediate_noise_sd" in capsys.readouterr().err


def test_exit_code_for_missing_dgp_section(tmp_path, capsys):
    cfg = tmp_path / "nodgp.ini"
    cfg.write_text("[sampler]\nn_draws = 10\n")
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_exit_code_for_malformed_data(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1_0,z1,w1,x2,z2,w2,y\n0.0,7,0,0.1,0,0,0.2\n")
    rc = main(["fit", "--data", str(bad), "--out", str(tmp_path / "f"),
               "--chains", "1", "--warmup", "1", "--draws", "1", "--seed", "1"])
    assert rc == 3
    assert "row 1" in capsys.readouterr().err


def test_exit_code_for_missing_file(tmp_path, capsys):
    rc = main(["fit", "--data", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "f"), "--seed", "1"])
    assert rc == 3


def test_exit_code_for_empty_dataset(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    rc = main(["fit", "--data", str(empty), "--out", str(tmp_path / "f"),
               "--seed", "1"])
    assert rc == 3


def test_validate_subcommand_passes(capsys):
    rc = main(["validate", "--sweeps", "25000", "--seed", "3"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FAIL" not in out
    assert out.count("PASS") >= 6
