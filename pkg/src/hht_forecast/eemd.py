"""Ensemble empirical mode decomposition.

Each trial decomposes the input plus fresh white noise; matching IMFs are
averaged across trials so the noise cancels while genuine oscillatory modes
reinforce. Trial seeds derive deterministically from the ensemble seed, so
results are reproducible and independent of how trials are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeries
from .emd import Imf, ImfSet, SiftConfig, emd

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class EemdConfig:
    noise_amplitude: float = 0.2   # std of added noise as a fraction of signal std
    ensemble_size: int = 100
    seed: int = 0
    sift: SiftConfig = field(default_factory=SiftConfig)
    alignment_policy: str = "pad_with_zeros"

    def __post_init__(self):
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.alignment_policy not in ("pad_with_zeros", "truncate_to_min"):
            raise ValueError(f"unknown alignment policy {self.alignment_policy!r}")


@dataclass
class EemdResult:
    imf_set: ImfSet
    trial_imf_counts: list[int]
    config_echo: EemdConfig


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trial_seed(seed: int, trial: int) -> int:
    """Deterministic per-trial noise seed."""
    return _splitmix64((seed & _MASK64) + (trial + 1) * _GOLDEN)


def add_white_noise(series, amplitude: float, trial_seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise with std = amplitude * std(series)."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0:
        return values.copy()
    sigma = amplitude * float(np.std(values))
    rng = np.random.default_rng(trial_seed)
    return values + rng.normal(0.0, sigma, size=values.size)


def ensemble_average(per_trial_imfs: list[ImfSet], policy: str = "pad_with_zeros") -> ImfSet:
    """Average IMF k across trials, element-wise.

    ``pad_with_zeros`` keeps the largest trial IMF count, treating missing
    IMFs as zero series and dividing by the full ensemble size;
    ``truncate_to_min`` keeps only the smallest count. Either way the IMFs a
    trial contributes beyond the kept count are folded into its residue, so
    every trial's reconstruction is preserved by the averaging.
    """
    if not per_trial_imfs:
        raise ValueError("no trials to average")
    n_trials = len(per_trial_imfs)
    length = per_trial_imfs[0].source_length
    counts = [len(t.imfs) for t in per_trial_imfs]
    if any(t.source_length != length for t in per_trial_imfs):
        raise ValueError("trials have inconsistent lengths")

    if policy == "pad_with_zeros":
        keep = max(counts)
    elif policy == "truncate_to_min":
        keep = min(counts)
    else:
        raise ValueError(f"unknown alignment policy {policy!r}")

    imf_sums = [np.zeros(length) for _ in range(keep)]
    residue_sum = np.zeros(length)
    converged = [True] * keep
    for trial in per_trial_imfs:
        for k, imf in enumerate(trial.imfs):
            if k < keep:
                imf_sums[k] += imf.values
                converged[k] = converged[k] and imf.converged
            else:
                residue_sum += imf.values
        residue_sum += trial.residue

    imfs = [
        Imf(values=s / n_trials, index=k + 1, converged=converged[k])
        for k, s in enumerate(imf_sums)
    ]
    return ImfSet(imfs=imfs, residue=residue_sum / n_trials, source_length=length)


def eemd(series, config: EemdConfig = EemdConfig(), threads: int = 1) -> EemdResult:
    """Noise-assisted decomposition: average of per-trial EMDs.

    Trials are combined by trial index, so the result is bit-identical for
    any ``threads`` value.
    """
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)

    def run_trial(t: int) -> ImfSet:
        noisy = add_white_noise(values, config.noise_amplitude, trial_seed(config.seed, t))
        try:
            return emd(noisy, config.sift)
        except ValueError as exc:
            raise ValueError(f"ensemble trial {t} failed: {exc}") from exc

    indices = range(config.ensemble_size)
    if threads > 1 and config.ensemble_size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run_trial, indices))
    else:
        trials = [run_trial(t) for t in indices]

    averaged = ensemble_average(trials, config.alignment_policy)
    return EemdResult(
        imf_set=averaged,
        trial_imf_counts=[len(t.imfs) for t in trials],
        config_echo=config,
    )
