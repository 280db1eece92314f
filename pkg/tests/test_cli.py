"""CLI config parsing, artifact emission, exit codes, reproducibility."""

import json
import math

import numpy as np
import pytest

from quenched_limits.cli import ConfigError, load_config, main
from quenched_limits.util import sha256_of


def test_defaults_and_overrides():
    cfg = load_config(None, [("family", "doubling"), ("alpha_min", "0"),
                             ("alpha_max", "0"), ("n_bins", "256")])
    assert cfg.family == "doubling"
    assert cfg.n_bins == 256
    assert cfg.p == math.inf


def test_config_file_parsing(tmp_path):
    f = tmp_path / "cfg.txt"
    f.write_text("# comment line\nfamily = lsv\nalpha_min=0.1  # inline comment\n"
                 "alpha_max=0.3\n\nseed=9\n")
    cfg = load_config(str(f), [])
    assert cfg.family == "lsv"
    assert cfg.alpha_min == 0.1
    assert cfg.seed == 9


def test_override_beats_file(tmp_path):
    f = tmp_path / "cfg.txt"
    f.write_text("seed=1\n")
    cfg = load_config(str(f), [("seed", "5")])
    assert cfg.seed == 5


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        load_config(None, [("not_a_key", "1")])


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        load_config(None, [("n_bins", "many")])
    with pytest.raises(ConfigError):
        load_config(None, [("family", "tent")])
    with pytest.raises(ConfigError):
        load_config(None, [("alpha_min", "0.5"), ("alpha_max", "0.1")])


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/cfg.txt", [])


def test_rate_subcommand(tmp_path):
    out = tmp_path / "rate"
    code = main(["rate", "--p", "inf", "--D", "10", "--out", str(out)])
    assert code == 0
    res = json.loads((out / "rate.json").read_text())
    assert res["epsilon_1"] == 0.25
    assert res["epsilon_D"] == 0.1640625
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "rate"
    assert manifest["files"]["rate.json"] == sha256_of(out / "rate.json")


def test_inadmissible_rate_is_config_error(tmp_path):
    code = main(["rate", "--p", "2", "--D", "9", "--out", str(tmp_path / "x")])
    assert code == 2


def test_unknown_key_exit_code(tmp_path):
    code = main(["tail", "--bogus", "1", "--out", str(tmp_path / "x")])
    assert code == 2


def test_tail_rerun_byte_identical(tmp_path):
    args = ["tail", "--family", "doubling", "--alpha_min", "0", "--alpha_max", "0",
            "--n_max", "12", "--samples", "5000"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("tail.csv", "tail_fit.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_partition_artifacts(tmp_path):
    out = tmp_path / "p"
    code = main(["partition", "--family", "doubling", "--alpha_min", "0",
                 "--alpha_max", "0", "--depth_cap", "8", "--out", str(out)])
    assert code == 0
    lines = (out / "partition.csv").read_text().splitlines()
    assert lines[0] == "lo,hi,R,image_ok"
    assert len(lines) == 9   # header + 8 cells
    info = json.loads((out / "partition.json").read_text())
    assert info["gcd"] == 1


def test_density_artifacts(tmp_path):
    out = tmp_path / "d"
    code = main(["density", "--family", "lsv", "--alpha_min", "0.1",
                 "--alpha_max", "0.3", "--n_bins", "256", "--depth", "8",
                 "--subsamples", "16", "--out", str(out)])
    assert code == 0
    rows = (out / "density.csv").read_text().splitlines()[1:]
    masses = np.array([float(r.split(",")[1]) for r in rows])
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    info = json.loads((out / "density.json").read_text())
    assert info["equivariance_residual_l1"] < 0.05


def test_clt_subcommand_small(tmp_path):
    out = tmp_path / "clt"
    code = main(["clt", "--family", "doubling", "--alpha_min", "0",
                 "--alpha_max", "0", "--n_steps", "128", "--n_samples", "800",
                 "--n_bins", "256", "--depth", "6", "--subsamples", "16",
                 "--out", str(out)])
    assert code == 0
    res = json.loads((out / "clt.json").read_text())
    assert res["sigma2"] == pytest.approx(0.5, abs=0.02)
    assert "verdict" in res


def test_threads_flag_accepted(tmp_path):
    code = main(["rate", "--threads", "4", "--p", "inf", "--D", "20",
                 "--out", str(tmp_path / "r")])
    assert code == 0


def test_float_format_17_digits(tmp_path):
    out = tmp_path / "t"
    main(["tail", "--family", "doubling", "--alpha_min", "0", "--alpha_max", "0",
          "--n_max", "8", "--samples", "1000", "--out", str(out)])
    row = (out / "tail.csv").read_text().splitlines()[3]
    val = row.split(",")[1]
    # the printed value round-trips to the same float exactly
    assert format(float(val), ".17g") == val
