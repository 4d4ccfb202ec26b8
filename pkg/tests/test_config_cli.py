"""Configuration parsing, the command-line surface, and its file artifacts."""

import json

import numpy as np
import pytest

import perflow.cli as cli
from perflow.config import ExperimentConfig, parse_config, to_document
from perflow.errors import ConfigError, NumericIntegrationError


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh]
    return header, rows


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg == ExperimentConfig()

    def test_round_trip_is_identity(self):
        cfg = parse_config(
            {
                "model": "bernoulli-squared",
                "shift": {"kind": "logistic", "params": {"rate": 4.0, "midpoint": 0.3}},
                "domain": [-1.0, 2.0],
                "flow": "prm",
                "x0": [0.25],
                "t_end": 12.5,
                "seed": 9,
            }
        )
        again = parse_config(to_document(cfg))
        assert again == cfg

    def test_canonical_document_survives_round_trip(self):
        doc = to_document(ExperimentConfig())
        assert to_document(parse_config(doc)) == doc

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"gird_n": 100})

    def test_unknown_shift_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"shift": {"kind": "bump", "extra": 1}})

    @pytest.mark.parametrize(
        "doc",
        [
            {"h": 0.0},
            {"t_end": -1.0},
            {"grid_n": 1},
            {"theta": 1.0},
            {"domain": [1.0, -1.0]},
            {"noise": "pink:3"},
            {"schedule": "constant"},
            {"fit_mode": "affine"},
            {"model": "linear-gaussian"},
            {"x0": []},
            {"epsilon_cap": -0.5},
            {"lo": 2.0, "hi": 1.0},
        ],
    )
    def test_range_and_grammar_violations(self, doc):
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_model_alias_forces_bump_shift(self):
        cfg = parse_config({"model": "bernoulli-phi"})
        assert cfg.model == "bernoulli-squared"
        assert cfg.shift_kind == "bump"
        with pytest.raises(ConfigError):
            parse_config({"model": "bernoulli-phi", "shift": {"kind": "logistic"}})

    def test_scalar_x0_promoted_to_vector(self):
        assert parse_config({"x0": 0.3}).x0 == (0.3,)

    def test_shift_params_validated_per_kind(self):
        with pytest.raises(ConfigError):
            parse_config({"shift": {"kind": "bump", "params": {"rate": 1.0}}})
        with pytest.raises(ConfigError):
            parse_config({"shift": {"kind": "clamped-polynomial", "params": {}}})
        with pytest.raises(ConfigError):
            parse_config({"shift": {"kind": "logistic", "params": {"rate": -1.0}}})


class TestCliCommands:
    def test_simulate_rgd_reaches_zero(self, tmp_path):
        out = tmp_path / "sim"
        code = cli.main(
            ["simulate", "--model", "bernoulli-phi", "--flow", "rgd",
             "--x0", "0.1", "--t-end", "50", "--out", str(out)]
        )
        assert code == 0
        summary = read_json(out / "summary.json")
        assert abs(summary["final_state"][0]) < 1e-4
        assert summary["terminal_status"] == "converged-to-equilibrium"
        header, rows = read_csv(out / "trajectory.csv")
        assert header == ["t", "x_0"]
        assert float(rows[0][1]) == 0.1

    def test_simulate_from_equilibrium_is_constant(self, tmp_path):
        out = tmp_path / "sim0"
        assert cli.main(["simulate", "--x0", "0.0", "--out", str(out)]) == 0
        _, rows = read_csv(out / "trajectory.csv")
        assert all(float(r[1]) == 0.0 for r in rows)

    def test_discrete_run_is_byte_reproducible(self, tmp_path):
        out = tmp_path / "disc"
        argv = [
            "simulate", "--flow", "discrete-rgd", "--noise", "bernoulli:100",
            "--seed", "7", "--steps", "2000", "--schedule", "inverse:0.5,10",
            "--x0", "0.8", "--out", str(out),
        ]
        assert cli.main(argv) == 0
        first_csv = (out / "trajectory.csv").read_bytes()
        first_json = (out / "summary.json").read_bytes()
        assert cli.main(argv) == 0
        assert (out / "trajectory.csv").read_bytes() == first_csv
        assert (out / "summary.json").read_bytes() == first_json

    def test_basins_boundary_near_crossing(self, tmp_path):
        out = tmp_path / "bas"
        assert cli.main(["basins", "--flow", "rgd", "--grid", "401", "--out", str(out)]) == 0
        summary = read_json(out / "basins_summary.json")
        boundaries = [b["boundary"] for b in summary["boundaries"]]
        assert any(abs(b - 0.2274) < 2.0 / 400 for b in boundaries)
        header, rows = read_csv(out / "basins.csv")
        assert header == ["x_0", "label"]
        assert len(rows) == 401

    def test_equilibria_lists_three_roots(self, tmp_path):
        out = tmp_path / "eq"
        assert cli.main(["equilibria", "--flow", "prm", "--out", str(out)]) == 0
        doc = read_json(out / "equilibria.json")
        locs = sorted(e["location"][0] for e in doc["equilibria"])
        assert len(locs) == 3
        assert locs[1] == pytest.approx(0.40, abs=0.005)

    def test_certify_and_sweep_artifacts(self, tmp_path):
        out = tmp_path / "cert"
        code = cli.main(
            ["certify", "--x-star", "0", "--r", "0.4", "--grid", "4001",
             "--sweep", "--sweep-step", "0.1", "--out", str(out)]
        )
        assert code == 0
        cert = read_json(out / "certificate.json")
        assert cert["c1"] == pytest.approx(0.50, abs=0.02)
        env = read_json(out / "envelope.json")
        assert env["delta"] == 0.0
        header, rows = read_csv(out / "constants_sweep.csv")
        assert header == ["r", "c1", "c2", "c3", "c4", "feasible_radius", "valid"]
        assert len(rows) == 4
        assert rows[0][6] in ("true", "false")

    def test_bounds_reports_flags_and_tradeoff(self, tmp_path):
        out = tmp_path / "bnd"
        code = cli.main(
            ["bounds", "--x-star", "0", "--r", "0.05", "--grid", "2001",
             "--x0", "0.02", "--theta", "0.5", "--out", str(out)]
        )
        assert code == 0
        doc = read_json(out / "bounds.json")
        assert doc["report"]["admissible"] is True
        assert doc["report"]["ultimate_radius"] == 0.0
        assert len(doc["theta_tradeoff"]) == 19

    def test_align_reports_failing_region(self, tmp_path):
        out = tmp_path / "al"
        assert cli.main(["align", "--lo", "0", "--hi", "1", "--grid", "2001", "--out", str(out)]) == 0
        doc = read_json(out / "alignment.json")
        assert 0.0 < doc["fraction_holding"] < 1.0
        header, rows = read_csv(out / "alignment.csv")
        assert header == ["x", "lhs", "rhs", "holds"]
        assert {r[3] for r in rows} == {"true", "false"}

    def test_repro_constants(self, tmp_path):
        out = tmp_path / "rc"
        assert cli.main(["repro", "constants", "--out", str(out)]) == 0
        doc = read_json(out / "constants.json")
        assert doc["rgd_crossing"] == pytest.approx(0.23, abs=0.005)
        assert doc["prm_crossing"] == pytest.approx(0.40, abs=0.005)
        assert doc["c1"] == pytest.approx(0.50, abs=0.02)
        assert doc["c2"] == pytest.approx(1.78, abs=0.03)
        assert doc["feasible_radius"] == pytest.approx(0.21, abs=0.01)

    def test_repro_fig1_row_at_origin(self, tmp_path):
        out = tmp_path / "f1"
        assert cli.main(["repro", "fig1", "--out", str(out)]) == 0
        header, rows = read_csv(out / "fig1.csv")
        assert header == ["x", "p", "p_prime", "pr", "pr_grad", "grad_x1"]
        assert len(rows) == 2001
        at_zero = [r for r in rows if float(r[0]) == 0.0][0]
        assert float(at_zero[1]) == 0.0 and float(at_zero[2]) == 0.0 and float(at_zero[3]) == 0.0

    def test_repro_fig2_row_at_headline_radius(self, tmp_path):
        out = tmp_path / "f2"
        assert cli.main(["repro", "fig2", "--out", str(out)]) == 0
        header, rows = read_csv(out / "fig2.csv")
        assert header == ["r", "c1", "c2", "c3", "c4", "feasible_radius", "valid"]
        at_04 = [r for r in rows if abs(float(r[0]) - 0.40) < 1e-9][0]
        assert float(at_04[1]) == pytest.approx(0.50, abs=0.02)
        assert float(at_04[2]) == pytest.approx(1.78, abs=0.03)

    def test_repro_is_byte_reproducible(self, tmp_path):
        out = tmp_path / "rr"
        assert cli.main(["repro", "constants", "--out", str(out)]) == 0
        first = (out / "constants.json").read_bytes()
        assert cli.main(["repro", "constants", "--out", str(out)]) == 0
        assert (out / "constants.json").read_bytes() == first


class TestCliErrors:
    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"grids": 100}')
        assert cli.main(["simulate", "--config", str(cfg)]) == 2

    def test_malformed_json_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        assert cli.main(["simulate", "--config", str(cfg)]) == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2

    def test_out_of_range_flag_exits_2(self, tmp_path):
        assert cli.main(["simulate", "--h", "0", "--out", str(tmp_path / "o")]) == 2

    def test_numeric_failure_exits_3(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericIntegrationError("synthetic blow-up")

        monkeypatch.setattr(cli.flows, "integrate_flow", boom)
        assert cli.main(["simulate", "--x0", "0.1", "--out", str(tmp_path / "o")]) == 3

    def test_config_file_overridden_by_flags(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"x0": [0.4], "t_end": 1.0, "out": str(tmp_path / "a")}))
        out = tmp_path / "b"
        code = cli.main(
            ["simulate", "--config", str(cfg), "--x0", "0.0", "--out", str(out)]
        )
        assert code == 0
        summary = read_json(out / "summary.json")
        assert summary["final_state"] == [0.0]
        assert summary["config"]["t_end"] == 1.0

    def test_threads_env_does_not_change_results(self, tmp_path, monkeypatch):
        out_a = tmp_path / "a"
        assert cli.main(["basins", "--flow", "rgd", "--grid", "201", "--out", str(out_a)]) == 0
        monkeypatch.setenv("PERFLOW_THREADS", "4")
        out_b = tmp_path / "b"
        assert cli.main(["basins", "--flow", "rgd", "--grid", "201", "--out", str(out_b)]) == 0
        assert (out_a / "basins.csv").read_bytes() == (out_b / "basins.csv").read_bytes()
