import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstcode.channel import ChannelParams, average_inversion_probability, sample_noise, stationary_distribution
from burstcode.predictor import (
    advance,
    channel_memory,
    initial_state,
    llr_from_prob,
    predict,
    predict_llrs,
    prediction_csv,
    predictor_llrs,
    xi_step,
)
from oracles import forward_filter_predictions

interior = st.floats(0.01, 0.99, allow_nan=False)
BURSTY = ChannelParams.gec(0.01, 0.1, 0.01, 0.5)


def test_channel_memory_examples():
    assert channel_memory(ChannelParams.gec(0.5, 0.5, 0.1, 0.2)) == 0.0
    assert channel_memory(ChannelParams.gec(0.01, 0.1, 0.1, 0.2)) == pytest.approx(0.89)
    assert channel_memory(ChannelParams.gec(1.0, 1.0, 0.1, 0.2)) == -1.0


@given(st.floats(0.01, 0.99), interior, interior, interior, st.integers(0, 1))
def test_memoryless_chain_ignores_history(p_gb, g, b, q, z):
    params = ChannelParams.gec(p_gb, 1 - p_gb, g, b)
    assert xi_step(z, q, params) == pytest.approx(g + p_gb * (b - g), abs=1e-12)


@given(interior, interior, interior, interior, st.integers(0, 1))
def test_prediction_at_good_value_drops_correction(p_gb, p_bg, g, b, z):
    params = ChannelParams.gec(p_gb, p_bg, g, b)
    assert xi_step(z, g, params) == pytest.approx(g + p_gb * (b - g), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_recursion_matches_forward_filter(seed):
    rng = np.random.default_rng(seed)
    p_gb, p_bg, g, b = rng.uniform(0.01, 0.99, 4)
    params = ChannelParams.gec(p_gb, p_bg, g, b)
    L = int(rng.integers(0, 1001))
    noise, _ = sample_noise(params, L, seed) if L else (np.zeros(0, dtype=np.uint8), None)
    oracle = forward_filter_predictions(p_gb, p_bg, g, b, noise, stationary_distribution(params))
    np.testing.assert_allclose(predict(params, noise), oracle, atol=1e-10)


def test_recursion_matches_filter_on_bursty_channel():
    noise, _ = sample_noise(BURSTY, 1000, 4)
    oracle = forward_filter_predictions(0.01, 0.1, 0.01, 0.5, noise, stationary_distribution(BURSTY))
    np.testing.assert_allclose(predict(BURSTY, noise), oracle, atol=1e-10)


def test_initial_value_is_eta_bar():
    state = initial_state(BURSTY)
    assert state.q_pred == pytest.approx(average_inversion_probability(BURSTY))
    assert state.mu == pytest.approx(0.89)
    nxt = advance(state, 1, BURSTY)
    assert nxt.q_pred == pytest.approx(predict(BURSTY, [1])[1]) and nxt.q_pred > state.q_pred


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), interior, interior, interior, interior)
def test_predictions_stay_between_state_probabilities(seed, p_gb, p_bg, g, b):
    params = ChannelParams.gec(p_gb, p_bg, g, b)
    if channel_memory(params) < 0:
        return
    noise, _ = sample_noise(params, 300, seed % 10**6)
    q = predict(params, noise)[20:]
    assert np.all(q >= min(g, b) - 1e-12) and np.all(q <= max(g, b) + 1e-12)


def test_burst_raises_prediction():
    q = predict(BURSTY, [1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    assert q[3] > 0.4 and np.all(np.diff(q[4:]) < 0)


def test_llr_examples():
    assert predict_llrs(ChannelParams.gec(0.3, 0.3, 0.5, 0.5), [0, 1, 0], 0) == 0.0
    assert llr_from_prob(0.1, 1) == pytest.approx(2.197225, abs=1e-6)
    assert llr_from_prob(0.1, 0) == pytest.approx(-2.197225, abs=1e-6)
    with pytest.raises(ValueError):
        predict_llrs(BURSTY, [], 2)


@given(st.floats(0, 1, allow_nan=False))
def test_llr_symmetry(p):
    assert llr_from_prob(p, 0) == -llr_from_prob(p, 1)


def test_predict_llrs_uses_full_history():
    hist = [0, 1, 1, 0]
    p = predict(BURSTY, hist)[-1]
    assert predict_llrs(BURSTY, hist, 1) == pytest.approx(np.log((1 - p) / p))


def test_block_llrs_predict_each_bit_from_its_past():
    y = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    c = np.array([1, 0, 0, 1, 0], dtype=np.uint8)
    got = predictor_llrs(BURSTY, y, c)
    for i in range(5):
        assert got[i] == pytest.approx(predict_llrs(BURSTY, (y ^ c)[:i], int(y[i])))
    with pytest.raises(ValueError):
        predictor_llrs(BURSTY, y, c[:3])


def test_prediction_csv():
    lines = prediction_csv(BURSTY, [0, 1, 0]).splitlines()
    assert lines[0] == "index,q_pred,llr_if_y0,llr_if_y1"
    assert len(lines) == 4
    idx, q, l0, l1 = lines[2].split(",")
    assert int(idx) == 1 and float(q) == pytest.approx(predict(BURSTY, [0])[1])
    assert float(l0) == pytest.approx(-float(l1))


def test_source_convention_rejected():
    with pytest.raises(ValueError):
        predict(ChannelParams(0.1, 0.1, ((0.1, 0.2), (0.3, 0.4))), [0, 1])
