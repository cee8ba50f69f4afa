"""Tests for the surrogate pipeline, queries and the `.lcsm` container."""

import json
import struct
import time
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcsb import regress
from lcsb.core import Architecture
from lcsb.evalmetrics import kendall_tau, kl_divergence
from lcsb.noise import NoiseModel
from lcsb.surrogate import (MAGIC, ChecksumError, SurrogateConfig, SurrogateFormatError, SurrogateModel,
                            fit_surrogate, load_surrogate, query_mean, query_noisy, save_surrogate)
from lcsb.synthspace import NB201_SPACE, SyntheticOracle, generate_dataset, random_architecture

KRIDGE = regress.RegressorConfig("kridge")
archs6 = st.lists(st.integers(0, 4), min_size=6, max_size=6).map(lambda o: Architecture(tuple(o)))


@pytest.fixture(scope="module")
def model(small_dataset):
    return fit_surrogate(small_dataset, SurrogateConfig(mu=KRIDGE, version="test-1.2"))


@pytest.fixture(scope="module")
def probe_archs():
    r = np.random.default_rng(5)
    return [random_architecture(NB201_SPACE, r) for _ in range(100)]


def silent(model):
    """Copy of `model` with a zero-variance noise model."""
    zero = NoiseModel("std", model.space.e_max, sigma=np.zeros(model.space.e_max))
    return SurrogateModel(model.space, model.basis, model.mu, zero, model.config, model.fit_report)


class TestConfig:
    def test_round_trip(self):
        cfg = SurrogateConfig(k=4, mu=regress.RegressorConfig("gbt", {"n_trees": 7}), noise_kind="gkde",
                              augmentation="anchor_epochs", anchor_epochs=(4, 12, 36), version="v9")
        assert SurrogateConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    @pytest.mark.parametrize("kw", [{"k": 0}, {"noise_kind": "x"}, {"augmentation": "anchor_epochs"},
                                    {"augmentation": "first_n_epochs"}, {"version": ""}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SurrogateConfig(**kw)

    def test_anchor_range_checked(self, small_dataset):
        cfg = SurrogateConfig(k=3, augmentation="anchor_epochs", anchor_epochs=(4, 108))
        with pytest.raises(ValueError):
            fit_surrogate(small_dataset, cfg)


class TestFit:
    def test_config_preserved(self, model):
        assert model.config == SurrogateConfig(mu=KRIDGE, version="test-1.2")

    def test_auto_rank_on_multi_seed(self, model):
        assert model.fit_report["k_source"] == "auto"
        assert model.basis.k == model.fit_report["k"]

    def test_default_rank_on_single_seed(self, oracle):
        m = fit_surrogate(generate_dataset(oracle, 50, 1, 0), SurrogateConfig(mu=KRIDGE))
        assert m.basis.k == 6 and m.fit_report["k_source"] == "default"

    def test_auto_requires_multi_seed(self, oracle):
        with pytest.raises(ValueError):
            fit_surrogate(generate_dataset(oracle, 50, 1, 0), SurrogateConfig(k="auto", mu=KRIDGE))

    def test_empty(self, small_dataset):
        with pytest.raises(ValueError):
            fit_surrogate(small_dataset.subset([]), SurrogateConfig())

    def test_noiseless_rank_three(self):
        o = SyntheticOracle.from_seed(0, noise_scale=0.0)
        m = fit_surrogate(generate_dataset(o, 4000, 1, 1), SurrogateConfig(k=3, mu=KRIDGE))
        test = generate_dataset(o, 200, 1, 2)
        assert np.mean((m.mean_curves(test.archs) - test.curves) ** 2) < 1e-4

    def test_timing_gbt(self, oracle):
        train = generate_dataset(oracle, 2000, 1, 1)
        t0 = time.perf_counter()
        fit_surrogate(train, SurrogateConfig(k=6))
        assert time.perf_counter() - t0 < 60

    @pytest.mark.parametrize("kind", ["std", "gkde", "window"])
    def test_noise_kinds(self, small_dataset, kind, probe_archs):
        m = fit_surrogate(small_dataset, SurrogateConfig(k=4, mu=KRIDGE, noise_kind=kind))
        c = m.noisy_curves(probe_archs[:10], range(10))
        assert c.min() >= 0 and c.max() <= 1

    def test_augmentation_feature_count(self, small_dataset):
        m = fit_surrogate(small_dataset, SurrogateConfig(k=3, mu=KRIDGE, augmentation="anchor_epochs",
                                                         anchor_epochs=(4, 12, 36)))
        assert m.mu.d_in == 30 + 3 and m.n_aug == 3


class TestQueryMean:
    def test_deterministic(self, model, probe_archs):
        np.testing.assert_array_equal(query_mean(model, probe_archs[0]), query_mean(model, probe_archs[0]))

    def test_training_arch_noiseless(self):
        o = SyntheticOracle.from_seed(0, noise_scale=0.0)
        train = generate_dataset(o, 500, 1, 1)
        m = fit_surrogate(train, SurrogateConfig(k=20, mu=regress.RegressorConfig("kridge", {"ridge": 1e-8})))
        for i in range(0, 500, 25):
            assert np.abs(m.query_mean(train.archs[i]) - train.curves[i]).max() < 1e-3

    def test_missing_augmentation(self, small_dataset, probe_archs):
        m = fit_surrogate(small_dataset, SurrogateConfig(k=3, mu=KRIDGE, augmentation="first_n_epochs", first_n=3))
        with pytest.raises(ValueError):
            m.query_mean(probe_archs[0])
        with pytest.raises(ValueError):
            m.query_mean(probe_archs[0], [0.1, 0.2])
        assert m.query_mean(probe_archs[0], [0.1, 0.2, 0.3]).shape == (100,)

    def test_first_epochs_improve_final_kt(self, oracle):
        # a small training set leaves the encoding only partly informative
        train = generate_dataset(oracle, 300, 1, 1)
        test = generate_dataset(oracle, 500, 5, 2)
        groups = test.groups()
        archs = list(groups)
        truth = np.array([test.curves[groups[a]].mean(axis=0)[-1] for a in archs])
        anchors = np.array([oracle.sample_curve(a, 999)[:3] for a in archs])
        plain = fit_surrogate(train, SurrogateConfig(k=6, mu=KRIDGE))
        aug = fit_surrogate(train, SurrogateConfig(k=6, mu=KRIDGE, augmentation="first_n_epochs", first_n=3))
        kt_plain = kendall_tau(plain.mean_curves(archs)[:, -1], truth)
        kt_aug = kendall_tau(aug.mean_curves(archs, anchors)[:, -1], truth)
        assert kt_aug > kt_plain


class TestQueryNoisy:
    def test_zero_noise_is_mean(self, model, probe_archs):
        m = silent(model)
        a = probe_archs[1]
        np.testing.assert_array_equal(query_noisy(m, a, 3, 40), m.query_mean(a)[:40])

    @given(archs6, st.integers(0, 2**31 - 1), st.integers(1, 100))
    def test_prefix_consistent(self, model, a, seed, e):
        full = model.query_noisy(a, seed)
        np.testing.assert_array_equal(model.query_noisy(a, seed, e), full[:e])
        assert full.min() >= 0 and full.max() <= 1

    def test_range_errors(self, model, probe_archs):
        for e in (0, 101):
            with pytest.raises(ValueError):
                model.query_noisy(probe_archs[0], 0, e)

    def test_kl_against_oracle(self, oracle):
        # the mean error dominates the KL, so this needs a large training set
        # and the low rank that validation selects on this oracle
        train = generate_dataset(oracle, 5000, 1, rng_seed=11)
        m = fit_surrogate(train, SurrogateConfig(k=2))
        probes = generate_dataset(oracle, 20, 1, rng_seed=12).unique_archs()
        kls = []
        for a in probes:
            real = np.array([oracle.sample_curve(a, s) for s in range(20)])
            kls.append(kl_divergence(real, m.noisy_curves([a] * 20, range(100, 120))))
        assert np.mean(kls) < 0.5

    def test_seed_mean_converges(self, model, probe_archs):
        a = probe_archs[2]
        curves = model.noisy_curves([a] * 1000, range(1000))
        sigma = model.noise.predict_sigma()
        # clipping to [0, 1] and winsorizing only shrink the noise symmetrically here
        bound = 4 * sigma / np.sqrt(1000) + 0.01 * sigma
        assert np.all(np.abs(curves.mean(axis=0) - model.query_mean(a)) <= bound)


class TestPersistence:
    def test_round_trip_identical(self, model, probe_archs, tmp_path):
        p = tmp_path / "m.lcsm"
        save_surrogate(model, p)
        back = load_surrogate(p)
        np.testing.assert_allclose(back.mean_curves(probe_archs), model.mean_curves(probe_archs), atol=1e-12, rtol=0)
        np.testing.assert_array_equal(back.noisy_curves(probe_archs[:5], range(5)),
                                      model.noisy_curves(probe_archs[:5], range(5)))
        assert back.config == model.config and back.fit_report == model.fit_report

    @pytest.mark.parametrize("kind,backend", [("gkde", "gbt"), ("window", "mlp")])
    def test_round_trip_other_components(self, small_dataset, probe_archs, tmp_path, kind, backend):
        cfg = SurrogateConfig(k=3, mu=regress.RegressorConfig(backend, {"n_trees": 5} if backend == "gbt"
                                                              else {"epochs": 3}), noise_kind=kind)
        m = fit_surrogate(small_dataset.subset(range(120)), cfg)
        save_surrogate(m, tmp_path / "x.lcsm")
        back = load_surrogate(tmp_path / "x.lcsm")
        np.testing.assert_array_equal(back.noisy_curves(probe_archs[:5], range(5)),
                                      m.noisy_curves(probe_archs[:5], range(5)))

    def test_version_verbatim(self, model, tmp_path):
        save_surrogate(model, tmp_path / "m.lcsm")
        assert load_surrogate(tmp_path / "m.lcsm").config.version == "test-1.2"

    def test_corrupted_byte(self, model, tmp_path):
        p = tmp_path / "m.lcsm"
        save_surrogate(model, p)
        data = bytearray(p.read_bytes())
        data[len(data) // 2] ^= 0x01
        p.write_bytes(bytes(data))
        with pytest.raises(ChecksumError):
            load_surrogate(p)

    def test_unknown_format_version(self, model, tmp_path):
        p = tmp_path / "m.lcsm"
        save_surrogate(model, p)
        data = p.read_bytes()[:-4]
        pos = len(MAGIC)
        (hlen,) = struct.unpack_from("<I", data, pos)
        header = json.loads(data[pos + 4:pos + 4 + hlen])
        header["format_version"] = 99
        h = json.dumps(header, sort_keys=True).encode()
        body = MAGIC + struct.pack("<I", len(h)) + h + data[pos + 4 + hlen:]
        p.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
        with pytest.raises(SurrogateFormatError, match="version 99"):
            load_surrogate(p)

    def test_not_a_surrogate(self, tmp_path):
        p = tmp_path / "x.lcsm"
        p.write_bytes(b"hello world, certainly not a model")
        with pytest.raises(SurrogateFormatError):
            load_surrogate(p)
