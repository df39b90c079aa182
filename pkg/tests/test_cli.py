import json

import numpy as np
import pytest

from covlab import cli, splm
from covlab.errors import ConfigError
from covlab.kernel import KernelEigenEstimate

FLUCT_TOML = """\
[population]
kind = "toeplitz"
d = 0.125

[law]
name = "real_gaussian"

[experiment]
N_ladder = [48]
replicates = 4
seed = 42
diagonalize_population = true
"""


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigHandling:
    def test_unknown_key_named(self, tmp_path):
        cfg = cli.load_config(write_config(tmp_path, FLUCT_TOML + "n_bogus = 3\n"))
        with pytest.raises(ConfigError, match="experiment.n_bogus"):
            cli.validate_config(cfg, "simulate-fluctuations")

    def test_unknown_section_named(self, tmp_path):
        cfg = cli.load_config(write_config(tmp_path, FLUCT_TOML + "\n[extra]\nx = 1\n"))
        with pytest.raises(ConfigError, match="extra"):
            cli.validate_config(cfg, "simulate-fluctuations")

    def test_overrides_win(self):
        cfg = cli.apply_overrides(
            {"experiment": {"replicates": 4}},
            ["experiment.replicates=7", "experiment.seed=3",
             "population.spikes=[1.0, 2.0]", "law.name=std_exponential"],
        )
        assert cfg["experiment"] == {"replicates": 7, "seed": 3}
        assert cfg["population"]["spikes"] == [1.0, 2.0]
        assert cfg["law"]["name"] == "std_exponential"

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            cli.apply_overrides({}, ["noequalsign"])
        with pytest.raises(ConfigError):
            cli.apply_overrides({}, ["nosection=3"])

    def test_missing_file_is_config_error(self, tmp_path, capsys):
        rc = cli.main(["simulate-fluctuations", "--config", str(tmp_path / "nope.toml")])
        assert rc == cli.EXIT_CONFIG


class TestSimulateCommands:
    def test_fluctuations_run_and_replay(self, tmp_path):
        config = write_config(tmp_path, FLUCT_TOML)
        rc = cli.main(["simulate-fluctuations", "--config", config,
                       "--out", str(tmp_path / "run1")])
        assert rc == 0
        first = (tmp_path / "run1" / "fluctuations.csv").read_bytes()
        summary = json.loads((tmp_path / "run1" / "summary.json").read_text())
        assert summary["command"] == "simulate-fluctuations"
        assert summary["config"]["experiment"]["seed"] == 42

        rc = cli.main(["simulate-fluctuations",
                       "--config", str(tmp_path / "run1" / "summary.json"),
                       "--out", str(tmp_path / "run2")])
        assert rc == 0
        assert (tmp_path / "run2" / "fluctuations.csv").read_bytes() == first

    def test_convergence_workers_match(self, tmp_path):
        config = write_config(tmp_path, FLUCT_TOML.replace("[48]", "[32, 48]"))
        for workers, name in ((1, "w1"), (2, "w2")):
            rc = cli.main(["simulate-convergence", "--config", config,
                           "--workers", str(workers), "--out", str(tmp_path / name)])
            assert rc == 0
        a = (tmp_path / "w1" / "convergence.csv").read_bytes()
        b = (tmp_path / "w2" / "convergence.csv").read_bytes()
        assert a == b

    def test_replicate_count_row_match(self, tmp_path):
        config = write_config(tmp_path, FLUCT_TOML)
        cli.main(["simulate-fluctuations", "--config", config,
                  "--set", "experiment.replicates=6", "--out", str(tmp_path / "o")])
        rows = (tmp_path / "o" / "fluctuations.csv").read_text().strip().split("\n")
        assert rows[0] == "replicate,lambda_max_S,beta_N,F_N"
        assert len(rows) == 7

    def test_degenerate_population_exits_numeric(self, tmp_path):
        text = """\
[population]
kind = "diagonal"
eigenvalues = [2.0, 2.0, 1.0]

[law]
name = "real_gaussian"

[experiment]
N_ladder = [3]
replicates = 2
"""
        rc = cli.main(["simulate-fluctuations", "--config", write_config(tmp_path, text),
                       "--out", str(tmp_path / "x")])
        assert rc == cli.EXIT_NUMERIC

    def test_dump_matrices(self, tmp_path):
        config = write_config(tmp_path, FLUCT_TOML)
        cli.main(["simulate-fluctuations", "--config", config,
                  "--set", "experiment.replicates=2", "--dump-matrices",
                  "--out", str(tmp_path / "d")])
        dumped = sorted((tmp_path / "d" / "matrices").glob("*.splm"))
        assert len(dumped) == 2
        z = splm.read_matrix(dumped[0])
        assert z.shape == (48, 60)


class TestKernelLimitCommand:
    def test_certified_run(self, tmp_path):
        config = write_config(tmp_path, "[kernel]\nrho = -0.25\ngrids = [64, 128, 256]\n")
        rc = cli.main(["kernel-limit", "--config", config, "--out", str(tmp_path / "k")])
        assert rc == 0
        payload = json.loads((tmp_path / "k" / "kernel_limit.json").read_text())
        assert set(payload) == {"rho", "grids", "a", "gap_ratio", "error_estimate", "status"}
        assert payload["status"] == "certified"
        assert payload["gap_ratio"] < 1.0

    def test_inconclusive_exit_code(self, tmp_path, monkeypatch):
        stub = KernelEigenEstimate(
            rho=-0.5, a=(1.0, 0.999), grid_sizes=(64, 128, 256),
            extrapolated=True, gap_ratio=0.999, error_estimate=0.5,
            status="inconclusive",
        )
        monkeypatch.setattr(cli.kernel, "gap_ratio_estimate", lambda *a, **k: stub)
        config = write_config(tmp_path, "[kernel]\nrho = -0.5\n")
        rc = cli.main(["kernel-limit", "--config", config, "--out", str(tmp_path / "k")])
        assert rc == cli.EXIT_INCONCLUSIVE

    def test_toeplitz_cross_check_included(self, tmp_path):
        config = write_config(
            tmp_path, "[kernel]\nrho = -0.25\ngrids = [64, 128, 256]\ncompare_N = 500\n"
        )
        rc = cli.main(["kernel-limit", "--config", config, "--out", str(tmp_path / "k")])
        assert rc == 0
        summary = json.loads((tmp_path / "k" / "summary.json").read_text())
        assert summary["toeplitz_route"]["N"] == 500
        assert len(summary["toeplitz_route"]["normalized"]) == 2


class TestSupportScanCommand:
    def test_boolean_flips_at_mp_edge(self, tmp_path):
        text = """\
[population]
kind = "spiked"
spikes = []
bulk = 1.0
N = 40

[support]
r = 1.0
x_min = 0.5
x_max = 8.0
points = 76
"""
        rc = cli.main(["support-scan", "--config", write_config(tmp_path, text),
                       "--out", str(tmp_path / "s")])
        assert rc == 0
        rows = (tmp_path / "s" / "support_scan.csv").read_text().strip().split("\n")[1:]
        xs, outs = [], []
        for row in rows:
            x, outside, _witness = row.split(",")
            xs.append(float(x))
            outs.append(int(outside))
        flips = [xs[i] for i in range(1, len(xs)) if outs[i] != outs[i - 1]]
        assert len(flips) == 1
        assert abs(flips[0] - 4.0) <= 0.11  # one grid step of the 0.1-spaced scan
        summary = json.loads((tmp_path / "s" / "summary.json").read_text())
        assert summary["upper_edge_estimate"] == pytest.approx(4.0, abs=1e-8)
        curve = (tmp_path / "s" / "boundary_curve.csv").read_text().split("\n")
        assert curve[0] == "y,x,x_prime"

    def test_missing_ratio_rejected(self, tmp_path):
        text = "[population]\nkind = \"spiked\"\nspikes = []\nbulk = 1.0\nN = 8\n\n[support]\nx_min = 1.0\n"
        rc = cli.main(["support-scan", "--config", write_config(tmp_path, text),
                       "--out", str(tmp_path / "s")])
        assert rc == cli.EXIT_CONFIG


class TestToeplitzSpectrumCommand:
    def test_ladder_run(self, tmp_path):
        text = """\
[population]
kind = "toeplitz"
d = 0.125

[spectrum]
N_ladder = [100, 200]
k = 2
"""
        rc = cli.main(["toeplitz-spectrum", "--config", write_config(tmp_path, text),
                       "--out", str(tmp_path / "t")])
        assert rc == 0
        rows = (tmp_path / "t" / "toeplitz_spectrum.csv").read_text().strip().split("\n")
        assert rows[0] == "N,k,lambda_k,normalized"
        assert len(rows) == 5
        summary = json.loads((tmp_path / "t" / "summary.json").read_text())
        a100 = summary["per_N"]["100"]["normalized"]
        a200 = summary["per_N"]["200"]["normalized"]
        assert a100[0] < a200[0]  # climbing toward the operator limit
