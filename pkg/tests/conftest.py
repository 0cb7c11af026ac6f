import numpy as np
import pytest


def write_ohlcv_csv(path, closes, start_ts=0, interval=14400, skip_rows=()):
    """Write a well-formed OHLCV CSV around the given close prices.

    ``skip_rows`` drops the given bar indices to create gaps.
    """
    closes = np.asarray(closes, dtype=np.float64)
    lines = ["timestamp,open,high,low,close,volume"]
    prev = closes[0]
    for k, close in enumerate(closes):
        if k in skip_rows:
            prev = close
            continue
        o = prev
        hi = max(o, close) * 1.001
        lo = min(o, close) * 0.999
        lines.append(f"{start_ts + k * interval},{o:.8f},{hi:.8f},{lo:.8f},{close:.8f},{100 + k}")
        prev = close
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def synthetic_prices(n=1200, seed=0):
    """Positive, multi-scale price-like series."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return (
        100.0
        + 0.01 * t
        + 5.0 * np.sin(2 * np.pi * t / 120)
        + 2.0 * np.sin(2 * np.pi * t / 17)
        + np.cumsum(rng.normal(0, 0.3, n))
    )


@pytest.fixture
def ohlcv_csv(tmp_path):
    return write_ohlcv_csv(tmp_path / "prices.csv", synthetic_prices(400, seed=3))
