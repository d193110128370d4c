"""CLI behavior: exit codes, file outputs, determinism, config validation."""

import json

import pytest

from relrank.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main


@pytest.fixture()
def market_dir(tmp_path):
    out = tmp_path / "market"
    code = main(
        [
            "synth",
            "--out",
            str(out),
            "--stocks",
            "6",
            "--days",
            "70",
            "--factors",
            "2",
            "--seed",
            "7",
        ]
    )
    assert code == EXIT_OK
    return out


def write_config(tmp_path, market_dir, **overrides):
    payload = {
        "mode": "rank_lstm",
        "window": 2,
        "hidden_units": 3,
        "epochs": 2,
        "seed": 3,
        "prices_dir": str(market_dir),
        "split_fractions": [0.6, 0.2],
        "output_dir": str(tmp_path / "out"),
    }
    payload.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload))
    return path


class TestSynth:
    def test_writes_expected_files(self, market_dir):
        csvs = sorted(p.name for p in market_dir.glob("*.csv"))
        assert len(csvs) == 6
        assert (market_dir / "relations.json").is_file()
        assert (market_dir / "factors.json").is_file()

    def test_refuses_existing_without_force(self, market_dir):
        code = main(
            ["synth", "--out", str(market_dir), "--stocks", "6", "--days", "70"]
        )
        assert code == EXIT_DATA

    def test_force_reproduces_identical_bytes(self, market_dir):
        before = {p.name: p.read_bytes() for p in market_dir.iterdir()}
        code = main(
            [
                "synth",
                "--out",
                str(market_dir),
                "--stocks",
                "6",
                "--days",
                "70",
                "--factors",
                "2",
                "--seed",
                "7",
                "--force",
            ]
        )
        assert code == EXIT_OK
        after = {p.name: p.read_bytes() for p in market_dir.iterdir()}
        assert before == after

    def test_zero_stocks_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["synth", "--out", str(tmp_path / "x"), "--stocks", "0", "--days", "10"])
        assert err.value.code == EXIT_USAGE


class TestTrain:
    def test_writes_checkpoint_and_manifest(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir)
        assert main(["train", str(config)]) == EXIT_OK
        out = tmp_path / "out"
        assert (out / "checkpoint.rrck").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["epochs"]) == 2
        assert manifest["config"]["mode"] == "rank_lstm"
        assert "selected_epoch" in manifest

    def test_relational_mode_without_relations_is_config_error(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir, mode="rsr_e")
        assert main(["train", str(config)]) == EXIT_USAGE

    def test_missing_prices_dir_is_data_error(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir, prices_dir=str(tmp_path / "nope"))
        assert main(["train", str(config)]) == EXIT_DATA

    def test_unknown_config_key_rejected(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir, bogus_key=1)
        assert main(["train", str(config)]) == EXIT_USAGE

    def test_standard_grid_alpha_accepted(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir, pairwise_weight=10.0)
        assert main(["train", str(config)]) == EXIT_OK

    def test_env_seed_override(self, tmp_path, market_dir, monkeypatch):
        config = write_config(tmp_path, market_dir)
        monkeypatch.setenv("RELRANK_SEED", "42")
        assert main(["train", str(config)]) == EXIT_OK
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 42

    def test_deterministic_manifests(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir)
        assert main(["train", str(config), "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(["train", str(config), "--out", str(tmp_path / "b")]) == EXIT_OK
        for name in ("manifest.json", "checkpoint.rrck"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_default_epoch_count_is_fifty(self, tmp_path):
        market = tmp_path / "m20"
        assert (
            main(
                ["synth", "--out", str(market), "--stocks", "20", "--days", "64",
                 "--factors", "2", "--seed", "1"]
            )
            == EXIT_OK
        )
        payload = {
            "mode": "rank_lstm",
            "window": 2,
            "hidden_units": 2,
            "seed": 0,
            "prices_dir": str(market),
            "split_fractions": [0.5, 0.25],
            "output_dir": str(tmp_path / "out50"),
        }
        config = tmp_path / "d.json"
        config.write_text(json.dumps(payload))
        assert main(["train", str(config)]) == EXIT_OK
        manifest = json.loads((tmp_path / "out50" / "manifest.json").read_text())
        assert len(manifest["epochs"]) == 50

    def test_inputs_not_mutated(self, tmp_path, market_dir):
        before = {p.name: p.read_bytes() for p in market_dir.iterdir()}
        config = write_config(tmp_path, market_dir)
        assert main(["train", str(config)]) == EXIT_OK
        after = {p.name: p.read_bytes() for p in market_dir.iterdir()}
        assert before == after


class TestBacktestCommand:
    def trained(self, tmp_path, market_dir, **overrides):
        config = write_config(tmp_path, market_dir, **overrides)
        assert main(["train", str(config)]) == EXIT_OK
        return config, tmp_path / "out" / "checkpoint.rrck"

    def test_produces_ledger_report_curve(self, tmp_path, market_dir):
        config, ckpt = self.trained(tmp_path, market_dir)
        code = main(
            ["backtest", str(config), "--checkpoint", str(ckpt), "--k", "2"]
        )
        assert code == EXIT_OK
        out = tmp_path / "out"
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"mse", "mrr", "irr"}
        header = (out / "ledger.csv").read_text().splitlines()[0]
        assert header == "day,selected_symbols,day_return,cumulative_irr"
        assert (out / "curve.csv").is_file()

    def test_k_zero_usage_error(self, tmp_path, market_dir):
        config, ckpt = self.trained(tmp_path, market_dir)
        code = main(["backtest", str(config), "--checkpoint", str(ckpt), "--k", "0"])
        assert code == EXIT_USAGE

    def test_oracle_flag_gives_upper_bound(self, tmp_path, market_dir):
        config, ckpt = self.trained(tmp_path, market_dir)
        assert (
            main(
                [
                    "backtest",
                    str(config),
                    "--checkpoint",
                    str(ckpt),
                    "--k",
                    "1",
                    "--out",
                    str(tmp_path / "model"),
                ]
            )
            == EXIT_OK
        )
        assert (
            main(
                [
                    "backtest",
                    str(config),
                    "--checkpoint",
                    str(ckpt),
                    "--k",
                    "1",
                    "--oracle",
                    "--out",
                    str(tmp_path / "oracle"),
                ]
            )
            == EXIT_OK
        )
        model = json.loads((tmp_path / "model" / "report.json").read_text())
        oracle = json.loads((tmp_path / "oracle" / "report.json").read_text())
        assert oracle["irr"] >= model["irr"]

    def test_checkpoint_mode_mismatch_is_data_error(self, tmp_path, market_dir):
        config, ckpt = self.trained(tmp_path, market_dir)
        bad_config = write_config(
            tmp_path,
            market_dir,
            mode="rsr_i",
            relations_file=str(market_dir / "relations.json"),
        )
        code = main(["backtest", str(bad_config), "--checkpoint", str(ckpt), "--k", "1"])
        assert code == EXIT_DATA

    def test_deterministic_ledgers(self, tmp_path, market_dir):
        config, ckpt = self.trained(tmp_path, market_dir)
        for sub in ("x", "y"):
            assert (
                main(
                    [
                        "backtest",
                        str(config),
                        "--checkpoint",
                        str(ckpt),
                        "--k",
                        "1",
                        "--out",
                        str(tmp_path / sub),
                    ]
                )
                == EXIT_OK
            )
        assert (tmp_path / "x" / "ledger.csv").read_bytes() == (
            tmp_path / "y" / "ledger.csv"
        ).read_bytes()


class TestEval:
    def test_writes_report(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir)
        assert main(["train", str(config)]) == EXIT_OK
        ckpt = tmp_path / "out" / "checkpoint.rrck"
        code = main(
            [
                "eval",
                str(config),
                "--checkpoint",
                str(ckpt),
                "--split",
                "val",
                "--out",
                str(tmp_path / "eval"),
            ]
        )
        assert code == EXIT_OK
        report = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert set(report) == {"mse", "mrr", "irr"}


class TestGradcheck:
    def test_passes_at_default_scale(self, capsys):
        code = main(["gradcheck", "--seeds", "1"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert out.count("PASS") == 5

    def test_corrupted_gradient_fails(self, capsys):
        code = main(["gradcheck", "--seeds", "1", "--corrupt-gradient"])
        assert code == EXIT_NUMERICAL
        assert "FAIL" in capsys.readouterr().out

    def test_fixed_seed_identical_report(self, capsys):
        assert main(["gradcheck", "--seeds", "1", "--seed", "5"]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["gradcheck", "--seeds", "1", "--seed", "5"]) == EXIT_OK
        second = capsys.readouterr().out
        assert first == second


class TestGridsearchCommand:
    def test_small_grid(self, tmp_path, market_dir):
        config = write_config(
            tmp_path,
            market_dir,
            epochs=1,
            grids={"window": [2, 3], "pairwise_weight": [0.1, 1.0]},
        )
        assert main(["gridsearch", str(config)]) == EXIT_OK
        payload = json.loads((tmp_path / "out" / "gridsearch.json").read_text())
        assert len(payload["cells"]) == 4
        assert (tmp_path / "out" / "best_config.json").is_file()
        best = json.loads((tmp_path / "out" / "best_config.json").read_text())
        assert best["window"] in (2, 3)

    def test_gridsearch_without_grids_is_usage_error(self, tmp_path, market_dir):
        config = write_config(tmp_path, market_dir)
        assert main(["gridsearch", str(config)]) == EXIT_USAGE
