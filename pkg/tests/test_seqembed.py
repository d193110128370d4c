"""LSTM cell and unrolling tests against scalar and step-by-step oracles."""

import math

import numpy as np
import pytest

from relrank.diffcore import constant, finite_diff_check, total, wrap_params
from relrank.errors import ShapeError
from relrank.seqembed import (
    GATE_NAMES,
    LstmWeights,
    init_lstm_arrays,
    lstm_cell,
    sequential_embedding,
    zero_state,
)


def make_weights(arrays):
    return LstmWeights.from_mapping(wrap_params(arrays))


def random_arrays(n_hidden, n_features, seed, random_bias=False):
    rng = np.random.default_rng(seed)
    arrays = init_lstm_arrays(n_hidden, n_features, rng)
    if random_bias:
        for gate in GATE_NAMES:
            arrays[f"lstm.b_{gate}"] = rng.normal(0, 0.3, n_hidden)
    return arrays


def scalar_lstm_step(x, h, c, w):
    """Independent pencil-and-paper oracle for U = D = 1."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    cand = math.tanh(w["wx_cand"] * x + w["wh_cand"] * h + w["b_cand"])
    g_in = sig(w["wx_in"] * x + w["wh_in"] * h + w["b_in"])
    g_forget = sig(w["wx_forget"] * x + w["wh_forget"] * h + w["b_forget"])
    g_out = sig(w["wx_out"] * x + w["wh_out"] * h + w["b_out"])
    c_new = g_forget * c + g_in * cand
    return g_out * math.tanh(c_new), c_new


class TestLstmCell:
    def test_all_zero_weights(self):
        arrays = {
            f"lstm.{kind}_{gate}": np.zeros((2, 3) if kind == "wx" else (2, 2) if kind == "wh" else 2)
            for kind in ("wx", "wh", "b")
            for gate in GATE_NAMES
        }
        weights = make_weights(arrays)
        state = lstm_cell(constant(np.ones((4, 3))), zero_state(4, 2), weights)
        np.testing.assert_array_equal(state.c.value, 0.0)
        np.testing.assert_array_equal(state.h.value, 0.0)

    def test_scalar_pencil_and_paper(self):
        coeffs = {
            "wx_cand": 0.5, "wh_cand": -0.3, "b_cand": 0.1,
            "wx_in": 0.8, "wh_in": 0.2, "b_in": -0.4,
            "wx_forget": -0.6, "wh_forget": 0.7, "b_forget": 0.3,
            "wx_out": 0.4, "wh_out": -0.1, "b_out": 0.2,
        }
        arrays = {f"lstm.{k}": np.full((1, 1) if k.startswith("w") else (1,), v) for k, v in coeffs.items()}
        weights = make_weights(arrays)
        h, c = 0.0, 0.0
        state = zero_state(1, 1)
        for x in (0.9, -1.3, 0.25):
            state = lstm_cell(constant([[x]]), state, weights)
            h, c = scalar_lstm_step(x, h, c, coeffs)
        assert state.h.value[0, 0] == pytest.approx(h, abs=1e-12)
        assert state.c.value[0, 0] == pytest.approx(c, abs=1e-12)

    def test_saturated_forget_gate_preserves_memory(self):
        arrays = random_arrays(3, 2, seed=1, random_bias=True)
        arrays["lstm.b_forget"] = np.full(3, 50.0)
        weights = make_weights(arrays)
        start = zero_state(2, 3)
        mid = lstm_cell(constant(np.ones((2, 2))), start, weights)
        out = lstm_cell(constant(np.full((2, 2), -0.5)), LstmState_like(mid), weights)
        # with the forget gate pinned open, c' ~= c + input*candidate
        candidate = np.tanh(
            np.full((2, 2), -0.5) @ arrays["lstm.wx_cand"].T
            + mid.h.value @ arrays["lstm.wh_cand"].T
            + arrays["lstm.b_cand"]
        )
        gate_in = 1.0 / (
            1.0
            + np.exp(
                -(
                    np.full((2, 2), -0.5) @ arrays["lstm.wx_in"].T
                    + mid.h.value @ arrays["lstm.wh_in"].T
                    + arrays["lstm.b_in"]
                )
            )
        )
        expected = mid.c.value + gate_in * candidate
        assert np.abs(out.c.value - expected).max() < 1e-10

    def test_shape_mismatch(self):
        weights = make_weights(random_arrays(2, 3, seed=0))
        with pytest.raises(ShapeError):
            lstm_cell(constant(np.ones((4, 5))), zero_state(4, 2), weights)

    def test_hidden_state_strictly_inside_unit_interval(self):
        arrays = random_arrays(4, 5, seed=6, random_bias=True)
        weights = make_weights(arrays)
        rng = np.random.default_rng(0)
        state = zero_state(3, 4)
        for _ in range(10):
            state = lstm_cell(constant(rng.normal(size=(3, 5)) * 3), state, weights)
        assert np.all(np.abs(state.h.value) < 1.0)


def LstmState_like(state):
    """Detach a state so the saturation test inspects one step in isolation."""
    from relrank.seqembed import LstmState

    return LstmState(h=constant(state.h.value), c=constant(state.c.value))


class TestSequentialEmbedding:
    def test_single_step_equals_one_cell(self):
        arrays = random_arrays(3, 4, seed=2, random_bias=True)
        weights = make_weights(arrays)
        window = np.random.default_rng(3).normal(size=(5, 1, 4))
        emb = sequential_embedding(window, weights)
        cell = lstm_cell(constant(window[:, 0, :]), zero_state(5, 3), weights)
        np.testing.assert_array_equal(emb.value, cell.h.value)

    def test_identical_windows_share_embeddings(self):
        arrays = random_arrays(2, 3, seed=4)
        weights = make_weights(arrays)
        row = np.random.default_rng(5).normal(size=(1, 4, 3))
        window = np.repeat(row, 3, axis=0)
        emb = sequential_embedding(window, weights).value
        np.testing.assert_array_equal(emb[0], emb[1])
        np.testing.assert_array_equal(emb[0], emb[2])

    def test_unrolled_oracle(self):
        arrays = random_arrays(2, 2, seed=7, random_bias=True)
        weights = make_weights(arrays)
        window = np.random.default_rng(8).normal(size=(3, 3, 2))
        emb = sequential_embedding(window, weights)
        state = zero_state(3, 2)
        for step in range(3):
            state = lstm_cell(constant(window[:, step, :]), state, weights)
        np.testing.assert_allclose(emb.value, state.h.value, atol=1e-15)

    def test_row_permutation_equivariance(self):
        arrays = random_arrays(3, 2, seed=9)
        weights = make_weights(arrays)
        window = np.random.default_rng(10).normal(size=(4, 3, 2))
        perm = np.array([2, 0, 3, 1])
        base = sequential_embedding(window, weights).value
        permuted = sequential_embedding(window[perm], weights).value
        np.testing.assert_array_equal(permuted, base[perm])

    def test_joint_equals_per_stock(self):
        arrays = random_arrays(2, 3, seed=11)
        weights = make_weights(arrays)
        window = np.random.default_rng(12).normal(size=(4, 2, 3))
        joint = sequential_embedding(window, weights).value
        for k in range(4):
            single = sequential_embedding(window[k : k + 1], weights).value
            np.testing.assert_allclose(single[0], joint[k], atol=1e-15)

    def test_bptt_gradients(self):
        arrays = random_arrays(2, 3, seed=13, random_bias=True)
        window = np.random.default_rng(14).normal(size=(3, 4, 3))
        probe = np.random.default_rng(15).normal(size=(3, 2))

        def build(nodes):
            emb = sequential_embedding(window, LstmWeights.from_mapping(nodes))
            return total(emb * probe)

        report = finite_diff_check(build, arrays)
        assert report.max_rel_err < 1e-4
