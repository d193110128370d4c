"""Ranking, metrics, and ledger tests against independent re-simulations."""

import numpy as np
import pytest

from relrank.backtest import (
    MetricsReport,
    metric_mrr,
    metric_mse,
    rank_day,
    run_backtest,
    simulate,
    true_rank,
    write_curve_csv,
    write_ledger_csv,
    write_report_json,
)
from relrank.errors import ConfigError, NumericalError
from relrank.marketdata import build_dataset, synth_market
from relrank.ranker import RankModelConfig, train


class TestRankDay:
    def test_simple_order(self):
        np.testing.assert_array_equal(rank_day(np.array([3.0, 1.0, 2.0])), [0, 2, 1])

    def test_all_equal_identity(self):
        np.testing.assert_array_equal(rank_day(np.zeros(4)), [0, 1, 2, 3])

    def test_matches_reference_sort(self):
        rng = np.random.default_rng(0)
        scores = rng.normal(size=50)
        oracle = sorted(range(50), key=lambda i: (-scores[i], i))
        np.testing.assert_array_equal(rank_day(scores), oracle)

    def test_non_finite_rejected(self):
        with pytest.raises(NumericalError):
            rank_day(np.array([1.0, np.nan]))


class TestMetricMse:
    def test_toy_instance_one(self):
        truth = np.array([[30.0, 10.0, -50.0]])
        prediction = np.array([[50.0, -10.0, -50.0]])
        assert metric_mse(prediction, truth) == pytest.approx(800.0 / 3.0)

    def test_toy_instance_two(self):
        truth = np.array([[30.0, 10.0, -50.0]])
        prediction = np.array([[20.0, 30.0, -40.0]])
        assert metric_mse(prediction, truth) == pytest.approx(200.0)

    def test_perfect_prediction(self):
        truth = np.random.default_rng(1).normal(size=(4, 5))
        assert metric_mse(truth, truth) == 0.0


class TestMetricMrr:
    def ledger_for(self, scores, returns, k=1):
        return simulate(np.asarray(scores, float), np.asarray(returns, float), k)

    def test_always_best_gives_one(self):
        returns = np.array([[0.3, 0.1, -0.2], [0.0, 0.5, 0.2]])
        ledger = self.ledger_for(returns, returns)
        assert metric_mrr(ledger, returns) == pytest.approx(1.0)

    def test_hand_computed_ranks(self):
        # day 1: pick is the true best (rank 1); day 2: pick is true 4th
        returns = np.array([[0.4, 0.1, 0.0, -0.1], [0.4, 0.3, 0.2, 0.1]])
        scores = np.array([[9.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 9.0]])
        ledger = self.ledger_for(scores, returns)
        assert metric_mrr(ledger, returns) == pytest.approx((1.0 + 0.25) / 2.0)

    def test_always_worst_of_four(self):
        returns = np.tile(np.array([0.4, 0.3, 0.2, 0.1]), (3, 1))
        scores = np.tile(np.array([0.0, 0.0, 0.0, 9.0]), (3, 1))
        ledger = self.ledger_for(scores, returns)
        assert metric_mrr(ledger, returns) == pytest.approx(0.25)

    def test_tie_rank_uses_ascending_index(self):
        day = np.array([0.5, 0.5, 0.1])
        assert true_rank(0, day) == 1
        assert true_rank(1, day) == 2
        assert true_rank(2, day) == 3

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            returns = rng.normal(size=(6, 5))
            scores = rng.normal(size=(6, 5))
            value = metric_mrr(self.ledger_for(scores, returns), returns)
            assert 1.0 / 5 <= value <= 1.0


def resimulate(scores, returns, k):
    """Independent step-by-step oracle using plain python sorting."""
    n_days, n_stocks = scores.shape
    cumulative = 0.0
    rows = []
    for d in range(n_days):
        order = sorted(range(n_stocks), key=lambda i: (-scores[d][i], i))
        picks = order[: min(k, n_stocks)]
        day_ret = sum(returns[d][i] for i in picks) / len(picks)
        cumulative += day_ret
        rows.append((order, picks, day_ret, cumulative))
    return rows


class TestSimulate:
    def test_matches_independent_resimulation(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=(20, 6))
        returns = rng.normal(0, 0.05, size=(20, 6))
        for k in (1, 3, 6):
            ledger = simulate(scores, returns, k)
            oracle = resimulate(scores, returns, k)
            for d, (order, picks, day_ret, cumulative) in enumerate(oracle):
                np.testing.assert_array_equal(ledger.rankings[d], order)
                np.testing.assert_array_equal(ledger.selected[d], picks)
                assert abs(ledger.day_returns[d] - day_ret) < 1e-12
                assert abs(ledger.cumulative[d] - cumulative) < 1e-12

    def test_irr_additivity(self):
        rng = np.random.default_rng(4)
        ledger = simulate(rng.normal(size=(30, 5)), rng.normal(size=(30, 5)), 2)
        assert abs(ledger.final_irr - ledger.day_returns.sum()) < 1e-12

    def test_perfect_foresight_top1(self):
        rng = np.random.default_rng(5)
        returns = rng.normal(0, 0.05, size=(15, 4))
        ledger = simulate(returns.copy(), returns, 1)
        assert ledger.final_irr == pytest.approx(returns.max(axis=1).sum())

    def test_k_equals_n_market_average(self):
        rng = np.random.default_rng(6)
        returns = rng.normal(0, 0.05, size=(12, 5))
        scores = rng.normal(size=(12, 5))
        ledger = simulate(scores, returns, 5)
        assert ledger.final_irr == pytest.approx(returns.mean(axis=1).sum())

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        scores = rng.normal(size=(10, 4))
        returns = rng.normal(size=(10, 4))
        a, b = simulate(scores, returns, 2), simulate(scores, returns, 2)
        np.testing.assert_array_equal(a.cumulative, b.cumulative)
        for d in range(10):
            np.testing.assert_array_equal(a.rankings[d], b.rankings[d])

    def test_top1_selected_equals_rank_head(self):
        rng = np.random.default_rng(8)
        scores = rng.normal(size=(9, 6))
        ledger = simulate(scores, rng.normal(size=(9, 6)), 1)
        for d in range(9):
            assert ledger.selected[d][0] == rank_day(scores[d])[0]

    def test_k_below_one_rejected(self):
        with pytest.raises(ConfigError):
            simulate(np.zeros((2, 2)), np.zeros((2, 2)), 0)


class TestRunBacktest:
    def make_trained(self, seed=0):
        market = synth_market(6, 70, 2, 0.05, 0.01, seed=seed)
        dataset = build_dataset(market.prices, fractions=(0.5, 0.25))
        config = RankModelConfig(
            mode="rank_lstm", window=2, hidden_units=3, epochs=1, seed=seed
        )
        params, _ = train(dataset, None, config)
        return market, dataset, config, params

    def test_oracle_dominates_model(self):
        market, dataset, config, params = self.make_trained()
        _, oracle_report = run_backtest(params, dataset, None, config, 1, oracle=True)
        _, model_report = run_backtest(params, dataset, None, config, 1)
        assert oracle_report.irr >= model_report.irr

    def test_report_keys(self):
        _, dataset, config, params = self.make_trained(seed=1)
        _, report = run_backtest(params, dataset, None, config, 1)
        assert set(report.as_dict()) == {"mse", "mrr", "irr"}

    def test_distinct_k_ledgers(self):
        _, dataset, config, params = self.make_trained(seed=2)
        sizes = set()
        for k in (1, 5):
            ledger, _ = run_backtest(params, dataset, None, config, k)
            sizes.add(len(ledger.selected[0]))
        assert sizes == {1, 5}

    def test_writers_produce_expected_files(self, tmp_path):
        _, dataset, config, params = self.make_trained(seed=3)
        ledger, report = run_backtest(params, dataset, None, config, 2)
        ledger_path = tmp_path / "ledger.csv"
        curve_path = tmp_path / "curve.csv"
        report_path = tmp_path / "report.json"
        write_ledger_csv(ledger_path, ledger)
        write_curve_csv(curve_path, ledger)
        write_report_json(report_path, report)
        header = ledger_path.read_text().splitlines()[0]
        assert header == "day,selected_symbols,day_return,cumulative_irr"
        assert curve_path.read_text().startswith("day,cumulative_irr")
        import json

        payload = json.loads(report_path.read_text())
        assert set(payload) == {"mse", "mrr", "irr"}


class TestMetricsReport:
    def test_as_dict_exact_keys(self):
        report = MetricsReport(mse=1.0, mrr=0.5, irr=0.2)
        assert report.as_dict() == {"mse": 1.0, "mrr": 0.5, "irr": 0.2}
