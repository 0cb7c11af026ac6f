"""EEMD signal decomposition and from-scratch LSTM forecasting."""

__version__ = "0.1.0"

from .data import (
    OhlcvRecord, ScalerState, SplitSpec, TimeSeries,
    fit_scaler, load_csv, scale, split, to_series, unscale,
)
from .emd import Imf, ImfSet, SiftConfig, emd, envelope, extract_imf, find_extrema
from .eemd import EemdConfig, EemdResult, add_white_noise, eemd, ensemble_average
from .lstm import CellState, LstmParams, TrainConfig, init_params, mse_loss, train
from .pipeline import (
    ForecastReport, PipelineConfig, PipelineResult, WindowedDataset,
    evaluate, make_windows, persistence_baseline, run_pipeline,
)

__all__ = [
    "OhlcvRecord", "ScalerState", "SplitSpec", "TimeSeries",
    "fit_scaler", "load_csv", "scale", "split", "to_series", "unscale",
    "Imf", "ImfSet", "SiftConfig", "emd", "envelope", "extract_imf", "find_extrema",
    "EemdConfig", "EemdResult", "add_white_noise", "eemd", "ensemble_average",
    "CellState", "LstmParams", "TrainConfig", "init_params", "mse_loss", "train",
    "ForecastReport", "PipelineConfig", "PipelineResult", "WindowedDataset",
    "evaluate", "make_windows", "persistence_baseline", "run_pipeline",
    "__version__",
]
