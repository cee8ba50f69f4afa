"""Tests for parametric and model-based learning-curve extrapolation."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcsb import regress
from lcsb.core import encode
from lcsb.evalmetrics import kendall_tau
from lcsb.lce import (FAMILIES, MIN_RECORDS, extrapolate_model, extrapolate_wpm, family_eval, family_jacobian,
                      fit_model_extrapolator, fit_parametric, prefix_features, wpm_weights)
from lcsb.synthspace import random_architecture

PARAMS = {
    "pow3": [0.9, 0.5, 0.7],
    "log_power": [0.9, 3.0, 1.2],
    "exp3": [0.85, 0.6, 0.1],
    "janoschek": [0.9, 0.1, 0.2, 0.8],
}


def history(oracle, n, e_few, rng):
    out = []
    for i in range(n):
        a = random_architecture(oracle.space, rng)
        c = oracle.sample_curve(a, i)
        out.append((encode(a, oracle.space), c[:e_few], c[-1]))
    return out


class TestFamilies:
    def test_known_values(self):
        t = np.array([1.0, 4.0])
        np.testing.assert_allclose(family_eval("pow3", [0.9, 0.5, 0.5], t)[0], [0.4, 0.65])
        np.testing.assert_allclose(family_eval("exp3", [1.0, 1.0, np.log(2)], t)[0], [0.5, 1 - 1 / 16])
        np.testing.assert_allclose(family_eval("log_power", [0.8, 4.0, 1.0], t)[0], [0.16, 0.4])
        np.testing.assert_allclose(family_eval("janoschek", [1.0, 0.0, np.log(2), 1.0], t)[0], [0.5, 1 - 1 / 16])

    @pytest.mark.parametrize("family", sorted(FAMILIES))
    def test_jacobian_central_difference(self, family):
        p = np.array(PARAMS[family])
        t = np.arange(1.0, 21.0)
        J = family_jacobian(family, p, t)[0]
        h = 1e-6
        for j in range(len(p)):
            d = np.zeros_like(p)
            d[j] = h
            fd = (family_eval(family, p + d, t) - family_eval(family, p - d, t))[0] / (2 * h)
            np.testing.assert_allclose(J[:, j], fd, rtol=1e-5, atol=1e-8)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            fit_parametric(np.linspace(0.1, 0.5, 10), "gompertz")


class TestParametricFit:
    def test_pow3_recovers_asymptote(self):
        y = family_eval("pow3", PARAMS["pow3"], np.arange(1.0, 31.0))[0]
        fit = fit_parametric(y, "pow3")
        assert abs(fit.params[0] - 0.9) < 1e-3
        assert fit.rmse < 1e-8 and not fit.fallback

    @pytest.mark.parametrize("family", sorted(FAMILIES))
    def test_own_family_fits_exactly(self, family):
        y = family_eval(family, PARAMS[family], np.arange(1.0, 41.0))[0]
        assert fit_parametric(y, family).rmse < 1e-4

    def test_prefix_too_short(self):
        with pytest.raises(ValueError):
            fit_parametric([0.1, 0.2, 0.3], "pow3")

    @given(st.floats(0.3, 0.95), st.floats(0.05, 0.5), st.floats(0.1, 2.0), st.integers(0, 2**31 - 1))
    def test_fit_no_worse_than_generator(self, a, b, c, seed):
        t = np.arange(1.0, 26.0)
        y = family_eval("pow3", [a, b, c], t)[0] + np.random.default_rng(seed).normal(0, 0.01, len(t))
        true_rmse = np.sqrt(np.mean((family_eval("pow3", [a, b, c], t)[0] - y) ** 2))
        assert fit_parametric(y, "pow3").rmse <= true_rmse + 1e-9


class TestWPM:
    def test_weights_sum_to_one(self):
        w = wpm_weights([0.01, 0.02, 0.05, 0.011], 20)
        np.testing.assert_allclose(w.sum(), 1.0)
        assert np.argmax(w) == 0 and np.all(w >= 0)

    def test_equal_rmse_equal_weights(self):
        np.testing.assert_allclose(wpm_weights([0.02] * 4, 10), 0.25)

    def test_failed_fits_get_zero_weight(self):
        w = wpm_weights([0.01, np.inf, 0.02, np.inf], 10)
        assert w[1] == 0 and w[3] == 0
        np.testing.assert_allclose(w.sum(), 1.0)

    def test_flat_prefix(self):
        assert abs(extrapolate_wpm(np.full(20, 0.6), 100) - 0.6) < 1e-3

    def test_twenty_percent_prefix(self, oracle, rng):
        for _ in range(20):
            m = oracle.mean_curve(random_architecture(oracle.space, rng))
            assert abs(extrapolate_wpm(m[:20], 100) - m[-1]) < 0.005

    def test_output_in_unit_interval(self):
        assert 0 <= extrapolate_wpm(np.linspace(0.5, 0.99, 10), 1000) <= 1

    def test_short_prefix(self):
        with pytest.raises(ValueError):
            extrapolate_wpm([0.1, 0.2, 0.3, 0.4], 100)


class TestModelExtrapolator:
    def test_prefix_features(self):
        f = prefix_features([[0.1, 0.3, 0.2]])[0]
        np.testing.assert_allclose(f, [0.1, 0.3, 0.2, 0.2, 0.3, 0.2, 0.05])

    def test_identity_when_finished(self, oracle, rng):
        hist = [(e, p, p[-1]) for e, p, _ in history(oracle, 30, 20, rng)]
        m = fit_model_extrapolator(hist)
        for e, p, f in hist[:5]:
            assert abs(extrapolate_model(m, e, p) - f) < 1e-6

    def test_too_few_records(self, oracle, rng):
        hist = history(oracle, MIN_RECORDS - 1, 20, rng)
        with pytest.raises(ValueError):
            fit_model_extrapolator(hist)
        fit_model_extrapolator(history(oracle, MIN_RECORDS, 20, rng))

    def test_mixed_prefix_lengths(self, oracle, rng):
        hist = history(oracle, 12, 20, rng) + history(oracle, 1, 10, rng)
        with pytest.raises(ValueError):
            fit_model_extrapolator(hist)

    def test_beats_last_value_ranking(self, oracle, rng):
        m = fit_model_extrapolator(history(oracle, 100, 20, rng))
        test = history(oracle, 200, 20, rng)
        truth = np.array([f for _, _, f in test])
        pred = m.predict([e.values for e, _, _ in test], [p for _, p, _ in test])
        last = np.array([p[-1] for _, p, _ in test])
        assert kendall_tau(pred, truth) > kendall_tau(last, truth)

    def test_replays_training_records(self, oracle, rng):
        hist = history(oracle, 100, 20, rng)
        m = fit_model_extrapolator(hist, regress.RegressorConfig("kridge", {"ridge": 1e-3}))
        for e, p, f in hist:
            assert abs(extrapolate_model(m, e, p) - f) < 0.02

    def test_clipped_to_unit_interval(self, oracle, rng):
        hist = [(e, p, 1.0) for e, p, _ in history(oracle, 20, 20, rng)]
        m = fit_model_extrapolator(hist)
        pred = m.predict([e.values for e, _, _ in hist], [p + 0.5 for _, p, _ in hist])
        assert np.all(pred <= 1.0) and np.all(pred >= 0.0)

    def test_wrong_prefix_length(self, oracle, rng):
        hist = history(oracle, 20, 20, rng)
        m = fit_model_extrapolator(hist)
        with pytest.raises(ValueError):
            extrapolate_model(m, hist[0][0], hist[0][1][:10])
