"""Integration tests for the simctl front end."""

import csv
import json

import pytest
import yaml

from gpsq.simctl import (
    EXIT_CONFIG,
    EXIT_EXHAUSTED,
    EXIT_OK,
    ConfigError,
    ExperimentConfig,
    _parse_rho,
    load_config,
    main,
    rate_from_config,
    run_invariant_suites,
)

MM_INPUT = {"model": "iid", "xi": {"dist": "exp", "mean": 3},
            "sigma": {"dist": "exp", "mean": 1}}


def write_config(path, **overrides):
    data = {
        "schema_id": "gpsq-experiment-v1",
        "mode": "ps_perfect_sample",
        "base_seed": 7,
        "replications": 5,
        "max_lookback": 5000,
        "input": MM_INPUT,
        "rate": {"kind": "half_interference"},
        "output": {"path": "out.csv", "format": "csv"},
    }
    data.update(overrides)
    path.write_text(yaml.safe_dump(data))
    return path


class TestConfigParsing:
    def test_bad_mode_and_missing_fields(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("mode: nope\n")
        with pytest.raises(ConfigError) as exc:
            load_config(str(p))
        msg = str(exc.value)
        assert "schema_id" in msg and "mode" in msg and "input" in msg

    def test_bad_counts(self):
        with pytest.raises(ConfigError, match="replications"):
            ExperimentConfig.from_dict({
                "schema_id": "gpsq-experiment-v1", "mode": "forward_sim",
                "input": MM_INPUT, "rate": {"kind": "classical_ps"},
                "replications": 0,
            })

    def test_bad_output_format(self):
        with pytest.raises(ConfigError, match="output.format"):
            ExperimentConfig.from_dict({
                "schema_id": "gpsq-experiment-v1", "mode": "forward_sim",
                "input": MM_INPUT, "rate": {"kind": "classical_ps"},
                "output": {"path": "x", "format": "xml"},
            })

    def test_rate_specs(self):
        assert rate_from_config({"kind": "classical_ps"}).kind == "classical_ps"
        assert rate_from_config({"kind": "scaled_ps", "k": 0.5}).declared_floor == 0.5
        r = rate_from_config({"kind": "custom_table", "floor": 0.8,
                              "table": {1: 1.0, 2: 0.495, 3: 0.3, 100: 0.008}})
        assert r(50) == 0.3
        with pytest.raises(ConfigError):
            rate_from_config({"kind": "scaled_ps"})
        with pytest.raises(ConfigError):
            rate_from_config({"kind": "warp"})

    def test_parse_rho(self):
        assert _parse_rho("0.5:1.0:0.25") == (0.5, 0.75, 1.0)
        assert _parse_rho("0.3,0.9") == (0.3, 0.9)
        with pytest.raises(ConfigError):
            _parse_rho("1.0:0.5:0.1")


class TestRunModes:
    def test_gginf_json_contains_expected_atoms(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(
            tmp_path / "c.yaml",
            mode="gginf_stationary",
            replications=1,
            input={"model": "deterministic", "xi": 1.0, "sigma": 2.5},
            output={"path": "g.json", "format": "json"},
        )
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK
        data = json.loads((tmp_path / "g.json").read_text())
        assert data["replications"][0]["atoms"] == [0.5, 1.5]
        assert data["replications"][0]["L"] == 1.5
        assert data["p_L_zero"]["estimate"] == 0.0

    def test_ps_csv_schema(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml")
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK
        with open(tmp_path / "out.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["seed", "coupled", "regeneration_index",
                           "n_atoms", "workload", "iterations"]
        assert len(rows) == 6
        for row in rows[1:]:
            if row[1] == "True":
                assert int(row[2]) <= 0
                assert int(row[3]) >= 0

    def test_byte_identical_reruns_and_jobs(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml")
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK
        first = (tmp_path / "out.csv").read_bytes()
        assert main(["run", str(cfg), "--jobs", "3"]) == EXIT_OK
        assert (tmp_path / "out.csv").read_bytes() == first

    def test_seed_override_changes_output(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml")
        main(["run", str(cfg), "--jobs", "1"])
        first = (tmp_path / "out.csv").read_bytes()
        main(["run", str(cfg), "--jobs", "1", "--seed", "8"])
        assert (tmp_path / "out.csv").read_bytes() != first

    def test_forward_sim_csv(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(
            tmp_path / "c.yaml",
            mode="forward_sim",
            replications=2,
            horizon=20,
            rate={"kind": "classical_ps"},
            output={"path": "f.csv", "format": "csv"},
        )
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK
        with open(tmp_path / "f.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["replication", "seed", "t_start", "t_end", "q",
                           "w_start", "drain_rate"]
        reps = {row[0] for row in rows[1:]}
        assert reps == {"0", "1"}
        # segments within a replication tile the time axis
        prev_end = None
        for row in rows[1:]:
            if row[0] != "0":
                break
            if prev_end is not None:
                assert float(row[2]) == pytest.approx(prev_end)
            prev_end = float(row[3])

    def test_strict_mode_exhaustion(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(
            tmp_path / "c.yaml",
            replications=2,
            max_lookback=200,
            input={"model": "deterministic", "xi": 1.0, "sigma": 2.0},
            rate={"kind": "classical_ps"},
        )
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK  # lenient annotates
        assert main(["run", str(cfg), "--jobs", "1", "--strict"]) == EXIT_EXHAUSTED

    def test_sweep_verdict_flips(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(
            tmp_path / "c.yaml",
            mode="stability_sweep",
            replications=10,
            max_lookback=500,
            stability_samples=200,
            input={"model": "deterministic", "xi": 1.0, "sigma": 1.0},
            rate={"kind": "classical_ps"},
            output={"path": "s.csv", "format": "csv"},
        )
        assert main(["sweep", str(cfg), "--rho", "0.5:1.5:0.5", "--jobs", "1"]) == EXIT_OK
        with open(tmp_path / "s.csv") as fh:
            rows = list(csv.DictReader(fh))
        verdicts = [r["verdict"] for r in rows]
        assert verdicts == ["stable", "inconclusive", "unstable"]
        freqs = [float(r["coupling_freq"]) for r in rows]
        assert freqs[0] == 1.0 and freqs[-1] == 0.0

    def test_sweep_coupling_frequency_declines(self, tmp_path, monkeypatch):
        # statistical sweep invariant: coupling frequency non-increasing in
        # the load, within binomial noise
        import math

        from gpsq.simctl import ExperimentConfig, _worker_sweep_point

        cfg = ExperimentConfig.from_dict({
            "schema_id": "gpsq-experiment-v1",
            "mode": "stability_sweep",
            "base_seed": 97,
            "replications": 25,
            "max_lookback": 300,
            "stability_samples": 200,
            "input": {"model": "iid", "xi": {"dist": "exp", "mean": 1},
                      "sigma": {"dist": "exp", "mean": 1}},
            "rate": {"kind": "classical_ps"},
            "sweep": {"rho": [0.4, 0.8, 1.2]},
        })
        recs = [_worker_sweep_point((cfg, rho)) for rho in cfg.rho_grid]
        freqs = [r["coupling_freq"] for r in recs]
        n = cfg.replications
        for a, b in zip(freqs, freqs[1:]):
            noise = 2.0 * math.sqrt(max(a * (1 - a), b * (1 - b), 0.04) / n)
            assert b <= a + noise, freqs
        assert freqs[0] >= 0.9 and freqs[-1] <= 0.1

    def test_missing_rho_is_config_error(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml", mode="stability_sweep")
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_CONFIG

    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        outdir = tmp_path / "artifacts"
        monkeypatch.setenv("SIMCTL_OUT_DIR", str(outdir))
        cfg = write_config(tmp_path / "c.yaml", replications=2)
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_OK
        assert (outdir / "out.csv").exists()

    def test_out_flag_override(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml", replications=2)
        assert main(["run", str(cfg), "--jobs", "1", "--out", "other.csv"]) == EXIT_OK
        assert (tmp_path / "other.csv").exists()

    def test_manifest_written(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.yaml", replications=2)
        main(["run", str(cfg), "--jobs", "1"])
        man = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert man["mode"] == "ps_perfect_sample"
        assert len(man["config_sha256"]) == 64
        assert man["horizon_exhausted"] == 0
        assert "wall_time_s" in man

    def test_unreadable_config(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG

    def test_semantically_bad_specs_exit_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(
            tmp_path / "c.yaml",
            input={"model": "iid", "xi": {"dist": "exp", "mean": -3},
                   "sigma": {"dist": "exp", "mean": 1}},
        )
        assert main(["run", str(cfg), "--jobs", "1"]) == EXIT_CONFIG
        cfg2 = write_config(
            tmp_path / "c2.yaml",
            # table rate that fails validation inside the sampler
            rate={"kind": "custom_table", "floor": 0.1, "table": {1: 0.5, 2: 0.9}},
        )
        assert main(["run", str(cfg2), "--jobs", "1"]) == EXIT_CONFIG


class TestInvariantSuites:
    def test_all_pass(self):
        results = run_invariant_suites(seed=0)
        failures = [(n, d) for n, ok, d in results if not ok]
        assert not failures, failures
        assert len(results) == 10
