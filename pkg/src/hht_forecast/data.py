"""OHLCV ingestion, uniform series construction, scaling and chronological splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

FIELDS = ("timestamp", "open", "high", "low", "close", "volume")
PRICE_FIELDS = ("open", "high", "low", "close")

DEFAULT_SCHEMA = {name: name for name in FIELDS}


class CsvFormatError(ValueError):
    """Malformed CSV input; message carries the offending line number."""


class GapError(ValueError):
    """A bar expected on the uniform grid is missing."""


@dataclass(frozen=True)
class OhlcvRecord:
    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise ValueError(
                f"OHLC invariant violated at timestamp {self.timestamp}: "
                f"low={self.low} high={self.high} open={self.open} close={self.close}"
            )
        if self.volume < 0:
            raise ValueError(f"negative volume at timestamp {self.timestamp}")


@dataclass
class TimeSeries:
    """Uniformly sampled scalar series; no missing entries by construction."""

    start_timestamp: int
    interval: int
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size == 0:
            raise ValueError("series must be non-empty")
        if self.interval <= 0:
            raise ValueError("interval must be positive")

    def __len__(self) -> int:
        return len(self.values)

    def timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.interval * np.arange(len(self.values), dtype=np.int64)


@dataclass(frozen=True)
class ScalerState:
    """Affine scaler fitted on training values only.

    ``std`` divides the centered values by the standard deviation; ``paper-exact``
    divides by the variance itself.
    """

    mean: float
    variance: float
    mode: str = "std"

    def __post_init__(self):
        if self.mode not in ("std", "paper-exact"):
            raise ValueError(f"unknown scaler mode {self.mode!r}")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def denominator(self) -> float:
        if self.variance == 0:
            raise ValueError("cannot scale a constant series (zero variance)")
        return float(np.sqrt(self.variance)) if self.mode == "std" else self.variance


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    validation_fraction: float = 0.15
    test_fraction: float = 0.15

    def __post_init__(self):
        for f in (self.train_fraction, self.validation_fraction, self.test_fraction):
            if not 0.0 < f < 1.0:
                raise ValueError("split fractions must lie in (0, 1)")
        total = self.train_fraction + self.validation_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, expected 1")


def load_csv(path, schema: dict[str, str] | None = None) -> list[OhlcvRecord]:
    """Parse an OHLCV CSV into validated records.

    ``schema`` maps canonical field names to the column names present in the
    file header. Rows must be in strictly ascending timestamp order.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    missing = [f for f in FIELDS if f not in schema]
    if missing:
        raise ValueError(f"schema missing fields: {missing}")

    records: list[OhlcvRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        absent = [schema[f] for f in FIELDS if schema[f] not in header]
        if absent:
            raise CsvFormatError(f"header {header} lacks required columns: {absent}")
        for row in reader:
            line = reader.line_num
            try:
                rec = OhlcvRecord(
                    timestamp=int(row[schema["timestamp"]]),
                    open=float(row[schema["open"]]),
                    high=float(row[schema["high"]]),
                    low=float(row[schema["low"]]),
                    close=float(row[schema["close"]]),
                    volume=float(row[schema["volume"]]),
                )
            except (TypeError, ValueError, KeyError) as exc:
                raise CsvFormatError(f"line {line}: {exc}") from exc
            if records:
                if rec.timestamp == records[-1].timestamp:
                    raise CsvFormatError(f"line {line}: duplicate timestamp {rec.timestamp}")
                if rec.timestamp < records[-1].timestamp:
                    raise CsvFormatError(
                        f"line {line}: timestamp {rec.timestamp} not ascending "
                        f"(previous {records[-1].timestamp})"
                    )
            records.append(rec)
    return records


def to_series(records, field_name: str, interval: int, gap_policy: str = "error",
              name: str | None = None) -> TimeSeries:
    """Project one OHLCV field onto a uniform grid.

    Under ``forward_fill`` a missing bar copies the previous value; under
    ``error`` any gap raises GapError citing the first expected timestamp.
    """
    if not records:
        raise ValueError("no records")
    if field_name not in FIELDS[1:]:
        raise ValueError(f"unknown field {field_name!r}")
    if gap_policy not in ("error", "forward_fill"):
        raise ValueError(f"unknown gap policy {gap_policy!r}")
    if interval <= 0:
        raise ValueError("interval must be positive")

    start = records[0].timestamp
    values: list[float] = []
    expected = start
    for rec in records:
        if (rec.timestamp - start) % interval != 0:
            raise GapError(
                f"timestamp {rec.timestamp} is off the {interval}s grid anchored at {start}"
            )
        while expected < rec.timestamp:
            if gap_policy == "error":
                raise GapError(f"missing bar at timestamp {expected}")
            values.append(values[-1])
            expected += interval
        values.append(getattr(rec, field_name))
        expected += interval
    return TimeSeries(start_timestamp=start, interval=interval,
                      values=np.array(values, dtype=np.float64),
                      name=name if name is not None else field_name)


def fit_scaler(values, mode: str = "std") -> ScalerState:
    """Fit mean and population variance (divide-by-N) on the given values."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("need at least 2 values to fit a scaler")
    mean = float(np.mean(arr))
    variance = float(np.mean((arr - mean) ** 2))
    if variance == 0.0:
        raise ValueError("cannot fit a scaler on a constant series (zero variance)")
    return ScalerState(mean=mean, variance=variance, mode=mode)


def scale(state: ScalerState, values):
    arr = np.asarray(values, dtype=np.float64)
    return (arr - state.mean) / state.denominator


def unscale(state: ScalerState, scaled):
    arr = np.asarray(scaled, dtype=np.float64)
    return arr * state.denominator + state.mean


def split(series_length: int, spec: SplitSpec) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
    """Chronological train/validation/test index ranges partitioning [0, length).

    Boundary indices are floor(length * cumulative fraction).
    """
    if series_length < 10:
        raise ValueError("series too short to split (need >= 10 samples)")
    i1 = int(np.floor(series_length * spec.train_fraction))
    i2 = int(np.floor(series_length * (spec.train_fraction + spec.validation_fraction)))
    return (0, i1), (i1, i2), (i2, series_length)
