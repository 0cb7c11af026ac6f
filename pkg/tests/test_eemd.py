import numpy as np
import pytest

from hht_forecast.eemd import (
    EemdConfig, add_white_noise, eemd, ensemble_average, trial_seed,
)
from hht_forecast.emd import Imf, ImfSet, SiftConfig, emd


def _tone(n=1000, period=6.0):
    return np.sin(2 * np.pi * np.arange(n) / period)


class TestWhiteNoise:
    def test_zero_amplitude_identity(self):
        x = np.sin(np.arange(100) / 3.0)
        assert np.array_equal(add_white_noise(x, 0.0, 123), x)

    def test_noise_std_tracks_signal_std(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 10, size=10000)
        noisy = add_white_noise(x, 0.2, 42)
        noise = noisy - x
        target = 0.2 * np.std(x)
        assert abs(np.std(noise) - target) / target < 0.05

    def test_seed_determinism(self):
        x = np.sin(np.arange(200) / 7.0)
        a = add_white_noise(x, 0.3, 99)
        b = add_white_noise(x, 0.3, 99)
        assert np.array_equal(a, b)
        c = add_white_noise(x, 0.3, 100)
        assert not np.array_equal(a, c)

    def test_trial_seeds_distinct(self):
        seeds = {trial_seed(7, t) for t in range(1000)}
        assert len(seeds) == 1000


def _make_set(columns, residue):
    imfs = [Imf(values=np.asarray(c, dtype=np.float64), index=k + 1)
            for k, c in enumerate(columns)]
    return ImfSet(imfs=imfs, residue=np.asarray(residue, dtype=np.float64),
                  source_length=len(residue))


class TestEnsembleAverage:
    def test_mean_of_identical_sets(self):
        s = _make_set([[1, 2, 3], [0.5, 0, -0.5]], [4, 4, 4])
        out = ensemble_average([s, s], "pad_with_zeros")
        assert len(out.imfs) == 2
        for a, b in zip(out.imfs, s.imfs):
            assert np.allclose(a.values, b.values)
        assert np.allclose(out.residue, s.residue)

    def test_truncate_to_min_keeps_three(self):
        a = _make_set([[1, 0], [2, 0], [3, 0]], [0, 0])
        b = _make_set([[1, 0], [2, 0], [3, 0], [8, 8]], [0, 0])
        out = ensemble_average([a, b], "truncate_to_min")
        assert len(out.imfs) == 3

    def test_pad_with_zeros_divides_by_ensemble_size(self):
        a = _make_set([[1, 0], [2, 0], [3, 0]], [0, 0])
        b = _make_set([[1, 0], [2, 0], [3, 0], [8, 8]], [0, 0])
        out = ensemble_average([a, b], "pad_with_zeros")
        assert len(out.imfs) == 4
        assert np.allclose(out.imfs[3].values, [4, 4])  # trial-B IMF4 / 2

    def test_both_policies_preserve_mean_reconstruction(self):
        rng = np.random.default_rng(5)
        sets = []
        recons = []
        for _ in range(4):
            cols = [rng.normal(size=6) for _ in range(int(rng.integers(2, 5)))]
            residue = rng.normal(size=6)
            sets.append(_make_set(cols, residue))
            recons.append(sum(cols) + residue)
        target = np.mean(recons, axis=0)
        for policy in ("pad_with_zeros", "truncate_to_min"):
            out = ensemble_average(sets, policy)
            assert np.allclose(out.reconstruct(), target, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ensemble_average([], "pad_with_zeros")


class TestEemd:
    def test_degenerate_ensemble_equals_plain_emd(self):
        x = _tone(400, period=16)
        result = eemd(x, EemdConfig(noise_amplitude=0.0, ensemble_size=1, seed=3))
        plain = emd(x)
        assert len(result.imf_set.imfs) == len(plain.imfs)
        for a, b in zip(result.imf_set.imfs, plain.imfs):
            assert np.array_equal(a.values, b.values)
        assert np.array_equal(result.imf_set.residue, plain.residue)

    def test_noise_cancellation_improves_with_ensemble_size(self):
        tone = _tone(1000, period=6.0)
        interior = slice(100, 900)
        errors = []
        for size in (10, 40, 100):
            result = eemd(tone, EemdConfig(noise_amplitude=0.2, ensemble_size=size, seed=2))
            imf1 = result.imf_set.imfs[0].values
            errors.append(float(np.sqrt(np.mean((imf1[interior] - tone[interior]) ** 2))))
        assert errors[-1] < errors[0]
        # decreasing in trend: fitted slope against log size is negative
        slope = np.polyfit(np.log([10, 40, 100]), errors, 1)[0]
        assert slope < 0

    def test_determinism_same_seed(self):
        x = _tone(300, period=8.0)
        cfg = EemdConfig(noise_amplitude=0.2, ensemble_size=5, seed=11)
        a = eemd(x, cfg)
        b = eemd(x, cfg)
        assert a.trial_imf_counts == b.trial_imf_counts
        for ia, ib in zip(a.imf_set.imfs, b.imf_set.imfs):
            assert np.array_equal(ia.values, ib.values)
        assert np.array_equal(a.imf_set.residue, b.imf_set.residue)

    def test_serial_parallel_bit_identical(self):
        x = _tone(400, period=7.0) + 0.001 * np.arange(400)
        cfg = EemdConfig(noise_amplitude=0.2, ensemble_size=8, seed=4)
        serial = eemd(x, cfg, threads=1)
        parallel = eemd(x, cfg, threads=4)
        assert serial.trial_imf_counts == parallel.trial_imf_counts
        for a, b in zip(serial.imf_set.imfs, parallel.imf_set.imfs):
            assert np.array_equal(a.values, b.values)
        assert np.array_equal(serial.imf_set.residue, parallel.imf_set.residue)

    def test_averaged_reconstruction_matches_mean_noisy_input(self):
        x = _tone(500, period=9.0)
        cfg = EemdConfig(noise_amplitude=0.2, ensemble_size=6, seed=13,
                         alignment_policy="pad_with_zeros")
        result = eemd(x, cfg)
        noisy_mean = np.mean(
            [add_white_noise(x, 0.2, trial_seed(13, t)) for t in range(6)], axis=0)
        err = np.sqrt(np.mean((result.imf_set.reconstruct() - noisy_mean) ** 2))
        assert err / np.sqrt(np.mean(noisy_mean**2)) < 1e-8

    def test_trial_failure_reports_index(self):
        with pytest.raises(ValueError, match="trial 0"):
            eemd(np.arange(4.0), EemdConfig(ensemble_size=3, seed=0))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EemdConfig(noise_amplitude=-0.1)
        with pytest.raises(ValueError):
            EemdConfig(ensemble_size=0)
        with pytest.raises(ValueError):
            EemdConfig(alignment_policy="bogus")
