"""Tests for config handling and the experiment CLI surface."""

import pytest
import yaml

from modswitch.cli import (
    ExperimentConfig,
    adapt_compare_rows,
    main,
    parse_trajectory_file,
    rate_compare_rows,
    serialize_config,
)
from modswitch.errors import ConfigError


class TestConfig:
    def test_from_dict_nested_sections(self):
        config = ExperimentConfig.from_dict(
            {
                "command": "bersweep",
                "schemes": ["bpsk", "qam16"],
                "grid": {"lo_db": 1.0, "hi_db": 9.0, "step_db": 2.0},
                "policy": {"mode": "min-ber", "target_ber": 1e-4},
                "link_budget": {"distance_m": 320.0},
            }
        )
        assert config.schemes == ("bpsk", "qam16")
        assert config.grid() == [1.0, 3.0, 5.0, 7.0, 9.0]
        assert config.mode == "min-ber"
        assert config.distance_m == 320.0

    def test_grid_string_form(self):
        config = ExperimentConfig.from_dict({"grid": "0:4:2"})
        assert config.grid() == [0.0, 2.0, 4.0]

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError, match="bogus_key"):
            ExperimentConfig.from_dict({"bogus_key": 1})

    def test_roundtrip_is_idempotent(self, tmp_path):
        config = ExperimentConfig.from_dict(
            {"command": "thresholds", "schemes": "bpsk,qpsk", "seed": 9}
        )
        once = serialize_config(config)
        again = serialize_config(ExperimentConfig.from_dict(yaml.safe_load(once)))
        assert once == again

    def test_validation_names_offending_field(self):
        bad_step = ExperimentConfig.from_dict({"grid": "0:4:0", "command": "bersweep"})
        with pytest.raises(ConfigError, match="step"):
            bad_step.validate()
        small_bits = ExperimentConfig.from_dict({"bits_per_point": 100})
        with pytest.raises(ConfigError, match="bits_per_point"):
            small_bits.validate()
        with pytest.raises(ConfigError, match="schemes"):
            ExperimentConfig.from_dict({"schemes": ["qam9000"]}).validate()


class TestBerSweepCommand:
    def test_row_count_and_reproducibility(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        argv = [
            "bersweep",
            "--grid",
            "0:12:1",
            "--bits",
            "10000",
            "--seed",
            "21",
            "--out",
            str(out),
        ]
        assert main(argv) == 0
        first = out.read_bytes()
        # 4 default schemes x 13 grid points, plus the header line.
        assert first.decode().count("\n") == 4 * 13 + 1
        assert main(argv) == 0
        assert out.read_bytes() == first

    def test_zero_step_exits_nonzero_and_names_field(self, tmp_path, capsys):
        code = main(
            ["bersweep", "--grid", "0:12:0", "--out", str(tmp_path / "x.csv")]
        )
        assert code != 0
        assert "step" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {
                    "schemes": ["bpsk"],
                    "grid": "0:2:1",
                    "bits_per_point": 10000,
                    "seed": 5,
                }
            )
        )
        out = tmp_path / "s.csv"
        assert main(["bersweep", "--config", str(cfg), "--out", str(out)]) == 0
        base = out.read_text()
        assert base.count("\n") == 3 + 1
        # A flag overrides the file value.
        out2 = tmp_path / "s2.csv"
        assert (
            main(
                [
                    "bersweep",
                    "--config",
                    str(cfg),
                    "--grid",
                    "0:1:1",
                    "--out",
                    str(out2),
                ]
            )
            == 0
        )
        assert out2.read_text().count("\n") == 2 + 1


class TestAdaptCompare:
    def test_degenerate_single_state_matches_best_fixed(self):
        config = ExperimentConfig.from_dict(
            {
                "command": "adapt-compare",
                "env": "10:10:1",
                "bits_per_point": 10000,
                "policy": {"mode": "min-ber", "target_ber": 1e-2},
                "seed": 13,
            }
        )
        rows, summary = adapt_compare_rows(config)
        adaptive = next(r for r in rows if r["system"] == "adaptive")
        fixed = [r for r in rows if r["system"].startswith("fixed-")]
        best = min(fixed, key=lambda r: r["avg_ber"])
        assert adaptive["avg_ber"] == best["avg_ber"]
        assert any("decrease" in line for line in summary)

    def test_adaptive_beats_fixed_on_wide_environment(self):
        config = ExperimentConfig.from_dict(
            {
                "command": "adapt-compare",
                "env": "0:25:5",
                "bits_per_point": 20000,
                "policy": {"mode": "max-rate", "target_ber": 1e-2},
                "seed": 29,
            }
        )
        rows, _ = adapt_compare_rows(config)
        adaptive = next(r for r in rows if r["system"] == "adaptive")
        best = min(
            (r for r in rows if r["system"].startswith("fixed-")),
            key=lambda r: r["avg_ber"],
        )
        assert adaptive["avg_ber"] < best["avg_ber"]


class TestRateCompare:
    def test_single_state_where_only_low_order_fits(self):
        # At 7 dB with target 1e-3 only the BPSK/QPSK family is feasible;
        # with QPSK excluded the adaptive rate equals fixed BPSK exactly.
        config = ExperimentConfig.from_dict(
            {
                "command": "rate-compare",
                "schemes": ["bpsk", "qam16", "qam64"],
                "env": "7:7:1",
                "policy": {"target_ber": 1e-3},
            }
        )
        rows, _ = rate_compare_rows(config)
        by_system = {r["system"]: r for r in rows}
        assert by_system["adaptive"]["avg_rate_bps"] == by_system["fixed-bpsk"]["avg_rate_bps"]
        assert by_system["fixed-qam16"]["avg_rate_bps"] == 0.0

    def test_adaptive_dominates_every_fixed(self):
        config = ExperimentConfig.from_dict(
            {
                "command": "rate-compare",
                "schemes": ["bpsk", "qpsk", "qam8", "qam16", "qam32", "qam64"],
                "env": "0:25:1",
                "policy": {"target_ber": 1e-3},
            }
        )
        rows, summary = rate_compare_rows(config)
        adaptive = next(r for r in rows if r["system"] == "adaptive")
        for row in rows:
            if row["system"] != "adaptive":
                assert adaptive["avg_rate_bps"] >= row["avg_rate_bps"]
        assert any("best fixed" in line for line in summary)


class TestThresholdsCommand:
    def test_writes_threshold_rows(self, tmp_path):
        out = tmp_path / "thr.csv"
        assert (
            main(
                [
                    "thresholds",
                    "--grid",
                    "0:25:0.25",
                    "--mode",
                    "max-rate",
                    "--target-ber",
                    "1e-2",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "scheme,threshold_db"
        assert lines[1].startswith("qpsk,")


class TestSessionCommand:
    def _write_trajectory(self, tmp_path):
        path = tmp_path / "traj.txt"
        path.write_text("# step trajectory\n0 2.0\n10 25.0\n")
        return path

    def test_missing_trajectory_file_exits_nonzero(self, tmp_path, capsys):
        code = main(
            [
                "session",
                "--trajectory",
                str(tmp_path / "absent.txt"),
                "--out",
                str(tmp_path / "log"),
            ]
        )
        assert code != 0
        assert "absent.txt" in capsys.readouterr().err

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 2.0\nnot numbers here\n")
        with pytest.raises(ConfigError, match="line 2"):
            parse_trajectory_file(str(path))

    def test_session_runs_clean_and_deterministic(self, tmp_path, capsys):
        traj = self._write_trajectory(tmp_path)
        out = tmp_path / "events.log"
        argv = [
            "session",
            "--trajectory",
            str(traj),
            "--duration",
            "30",
            "--seed",
            "77",
            "--target-ber",
            "1e-3",
            "--out",
            str(out),
        ]
        assert main(argv) == 0
        stdout = capsys.readouterr().out
        assert "tandem_violations=0" in stdout
        first = out.read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == first
