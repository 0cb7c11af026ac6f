"""Empirical mode decomposition.

A signal is repeatedly sifted into intrinsic mode functions (IMFs): at each
sift the mean of the upper and lower cubic-spline envelopes is subtracted
until the candidate's extrema and zero-crossing counts differ by at most one
and successive sifts barely change it (Cauchy-style SD criterion). Extraction
stops when the running residue has fewer than two interior extrema or the
configured IMF cap is reached. The extracted IMFs plus the final residue sum
back to the input exactly (up to float roundoff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeries
from .spline import cubic_spline


class InsufficientExtremaError(ValueError):
    """Candidate lacks the extrema needed to build both envelopes."""


@dataclass
class Imf:
    values: np.ndarray
    index: int = 1          # 1-based extraction order
    converged: bool = True  # False when the sift hit the iteration cap


@dataclass
class ImfSet:
    imfs: list[Imf]
    residue: np.ndarray
    source_length: int

    def reconstruct(self) -> np.ndarray:
        total = self.residue.copy()
        for imf in self.imfs:
            total += imf.values
        return total


@dataclass(frozen=True)
class SiftConfig:
    max_imfs: int = 7
    max_sift_iterations: int = 50
    sd_threshold: float = 0.2
    envelope_tolerance: float = 1e-6
    boundary_policy: str = "mirror"

    def __post_init__(self):
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.sd_threshold <= 0 or self.envelope_tolerance <= 0:
            raise ValueError("thresholds must be positive")
        if self.boundary_policy not in ("mirror", "clamp"):
            raise ValueError(f"unknown boundary policy {self.boundary_policy!r}")


def _extrema_indices(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interior maxima/minima indices; plateau runs collapse to their midpoint."""
    d = np.diff(values)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    rising = d[nz] > 0
    turn = rising[:-1] != rising[1:]
    a = nz[:-1][turn]
    b = nz[1:][turn]
    mid = (a + 1 + b) // 2
    is_max = rising[:-1][turn]
    return mid[is_max], mid[~is_max]


def find_extrema(values) -> tuple[list[tuple[int, float]], list[tuple[int, float]]]:
    """Strict local extrema by three-point comparison.

    Returns (maxima, minima) as lists of (index, value). A run of equal
    samples flanked by opposite slopes contributes its midpoint index once.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 3:
        raise ValueError("need at least 3 samples to locate extrema")
    max_idx, min_idx = _extrema_indices(arr)
    maxima = [(int(i), float(arr[i])) for i in max_idx]
    minima = [(int(i), float(arr[i])) for i in min_idx]
    return maxima, minima


def count_zero_crossings(values) -> int:
    """Strict sign changes; an exact zero counts once between differing-sign
    neighbors."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty series")
    s = arr[arr != 0.0]
    if s.size < 2:
        return 0
    return int(np.count_nonzero(np.signbit(s[:-1]) != np.signbit(s[1:])))


def _augment_knots(values: np.ndarray, idx: np.ndarray, vals: np.ndarray, policy: str):
    """Extend envelope knots past the series ends per the boundary policy."""
    n = values.size
    if policy == "mirror":
        if idx.size == 0:
            raise InsufficientExtremaError("no extrema to mirror")
        k = min(2, idx.size)
        left_x = (-idx[:k])[::-1]
        right_x = (2 * (n - 1) - idx[-k:])[::-1]
        xs = np.concatenate([left_x, idx, right_x]).astype(np.float64)
        ys = np.concatenate([vals[:k][::-1], vals, vals[-k:][::-1]])
    elif policy == "clamp":
        xs = np.concatenate([[0], idx, [n - 1]]).astype(np.float64)
        ys = np.concatenate([[values[0]], vals, [values[-1]]])
    else:
        raise ValueError(f"unknown boundary policy {policy!r}")
    return xs, ys


def _envelope(values: np.ndarray, idx: np.ndarray, vals: np.ndarray,
              policy: str) -> np.ndarray:
    xs, ys = _augment_knots(values, idx, vals, policy)
    if xs.size < 2:
        raise InsufficientExtremaError(
            f"only {xs.size} envelope knots after boundary augmentation"
        )
    return cubic_spline(xs, ys, np.arange(values.size, dtype=np.float64))


def envelope(values, extrema, boundary_policy: str = "mirror") -> np.ndarray:
    """Natural cubic spline through the boundary-augmented extrema, evaluated
    at every sample index.

    ``extrema`` is a list of (index, value) pairs of one kind (maxima or
    minima), as produced by :func:`find_extrema`.
    """
    arr = np.asarray(values, dtype=np.float64)
    idx = np.asarray([i for i, _ in extrema], dtype=np.int64)
    vals = np.asarray([v for _, v in extrema], dtype=np.float64)
    return _envelope(arr, idx, vals, boundary_policy)


def sift_once(h, config: SiftConfig = SiftConfig()) -> tuple[np.ndarray, np.ndarray]:
    """One sifting pass: subtract the mean of the two envelopes.

    Raises InsufficientExtremaError when either envelope cannot be built,
    which signals that the candidate is a residue.
    """
    arr = np.asarray(h, dtype=np.float64)
    max_idx, min_idx = _extrema_indices(arr)
    if max_idx.size < 1 or min_idx.size < 1:
        raise InsufficientExtremaError(
            f"{max_idx.size} maxima / {min_idx.size} minima: cannot envelope"
        )
    upper = _envelope(arr, max_idx, arr[max_idx], config.boundary_policy)
    lower = _envelope(arr, min_idx, arr[min_idx], config.boundary_policy)
    mean = 0.5 * (upper + lower)
    return arr - mean, mean


def _imf_counts_ok(values: np.ndarray) -> bool:
    max_idx, min_idx = _extrema_indices(values)
    n_ext = max_idx.size + min_idx.size
    return abs(n_ext - count_zero_crossings(values)) <= 1


def extract_imf(r, config: SiftConfig = SiftConfig(), index: int = 1) -> Imf:
    """Sift one IMF out of ``r``.

    Accepts the candidate once the extrema/zero-crossing counts differ by at
    most one and either the normalized successive-sift difference falls below
    ``sd_threshold`` or the envelope mean is negligible. Hitting the sift cap
    returns the current candidate flagged ``converged=False``.
    """
    h = np.asarray(r, dtype=np.float64).copy()
    max_idx, min_idx = _extrema_indices(h)
    if max_idx.size + min_idx.size < 2:
        raise InsufficientExtremaError("candidate has fewer than 2 interior extrema")

    for _ in range(config.max_sift_iterations):
        try:
            h_next, env_mean = sift_once(h, config)
        except InsufficientExtremaError:
            # Degenerated mid-sift; keep the last viable candidate.
            return Imf(values=h, index=index, converged=_imf_counts_ok(h))
        denom = float(np.sum(h * h))
        sd = float(np.sum((h - h_next) ** 2)) / denom if denom > 0 else 0.0
        mean_small = float(np.sqrt(np.mean(env_mean**2))) <= (
            config.envelope_tolerance * float(np.sqrt(np.mean(h * h)))
        )
        h = h_next
        if _imf_counts_ok(h) and (sd < config.sd_threshold or mean_small):
            return Imf(values=h, index=index, converged=True)
    return Imf(values=h, index=index, converged=False)


def emd(series, config: SiftConfig = SiftConfig()) -> ImfSet:
    """Full decomposition of a uniformly sampled series.

    Accepts a TimeSeries or a plain 1-d array. Stops when the residue has
    fewer than two interior extrema or ``max_imfs`` were extracted.
    """
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("expected a 1-d series")
    if values.size < 8:
        raise ValueError(f"series too short for decomposition ({values.size} < 8)")
    if not np.all(np.isfinite(values)):
        raise ValueError("series contains NaN or infinite values")

    residue = values.copy()
    # Once the residue's oscillation range is float roundoff relative to the
    # input, what remains is numerical dust, not signal; without this floor
    # the loop would keep slicing that dust into meaningless IMFs.
    roundoff_floor = 1e-12 * float(np.ptp(values))
    imfs: list[Imf] = []
    while len(imfs) < config.max_imfs:
        if float(np.ptp(residue)) <= roundoff_floor:
            break
        max_idx, min_idx = _extrema_indices(residue)
        if max_idx.size + min_idx.size < 2:
            break
        try:
            imf = extract_imf(residue, config, index=len(imfs) + 1)
        except InsufficientExtremaError:
            break
        imfs.append(imf)
        residue = residue - imf.values
    return ImfSet(imfs=imfs, residue=residue, source_length=values.size)


def write_imf_csv(path, imf_set: ImfSet, timestamps) -> None:
    """CSV layout: timestamp, imf1..imfI, residue; 17 significant digits so
    values round-trip bit-exactly."""
    ts = np.asarray(timestamps)
    if ts.size != imf_set.source_length:
        raise ValueError("timestamps length does not match decomposition length")
    header = ["timestamp"] + [f"imf{i.index}" for i in imf_set.imfs] + ["residue"]
    columns = [i.values for i in imf_set.imfs] + [imf_set.residue]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in range(imf_set.source_length):
            cells = [str(int(ts[row]))] + [f"{c[row]:.17g}" for c in columns]
            fh.write(",".join(cells) + "\n")


def read_imf_csv(path) -> tuple[np.ndarray, ImfSet]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if header[0] != "timestamp" or header[-1] != "residue":
        raise ValueError(f"unexpected IMF CSV header: {header}")
    data = np.array([[float(c) for c in row] for row in rows], dtype=np.float64)
    ts = data[:, 0].astype(np.int64)
    imfs = [Imf(values=data[:, k], index=k) for k in range(1, len(header) - 1)]
    return ts, ImfSet(imfs=imfs, residue=data[:, -1], source_length=len(rows))
