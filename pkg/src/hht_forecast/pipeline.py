"""End-to-end forecast workflow.

Decompose the price series once, scale each decomposition channel on the
training range only, frame sliding windows, train LSTM model(s), then predict
and evaluate on the chronological validation and test splits. Two strategies:

  joint    one model sees all channels and predicts the (scaled) price
  per_imf  one model per channel; unscaled channel predictions are summed
           into the price forecast
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import lstm
from .data import ScalerState, SplitSpec, TimeSeries, fit_scaler, scale, split, unscale
from .eemd import EemdConfig, EemdResult, eemd
from .emd import SiftConfig


class PipelineError(RuntimeError):
    """Stage-tagged failure; message starts with ``[stage]``."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class WindowedDataset:
    inputs: np.ndarray     # (m, lookback, channels)
    targets: np.ndarray    # (m,) recombined or (m, channels) per-channel
    lookback: int
    channels: int
    index_map: np.ndarray  # original time index of each target

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class ForecastReport:
    predictions: np.ndarray  # price units
    actuals: np.ndarray      # price units
    metrics: dict
    split_name: str
    index_map: np.ndarray


@dataclass(frozen=True)
class PipelineConfig:
    eemd: EemdConfig = field(default_factory=EemdConfig)
    scaler_mode: str = "std"
    split: SplitSpec = field(default_factory=SplitSpec)
    lookback: int = 3
    horizon: int = 1
    hidden_size: int = 32
    train: lstm.TrainConfig = field(default_factory=lstm.TrainConfig)
    strategy: str = "joint"
    model_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.lookback < 1:
            raise ValueError("lookback must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.strategy not in ("joint", "per_imf"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


def make_windows(channels, lookback: int, target: str = "recombined",
                 horizon: int = 1, target_series=None) -> WindowedDataset:
    """Frame sliding windows over equal-length channels.

    The window ending at position t stacks samples t-lookback+1..t of every
    channel; its target is the value at t+horizon. Under ``recombined`` the
    target is the element-wise channel sum (or ``target_series`` when the
    caller supplies the recombined series in other units); under
    ``per_channel`` each channel's own next value is a target column.
    """
    if target not in ("recombined", "per_channel"):
        raise ValueError(f"unknown target mode {target!r}")
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be >= 1")
    arrs = [np.asarray(c, dtype=np.float64) for c in channels]
    if not arrs:
        raise ValueError("no channels")
    length = arrs[0].size
    if any(a.size != length for a in arrs):
        raise ValueError("channels differ in length")
    m = length - lookback - (horizon - 1)
    if m < 1:
        raise ValueError(
            f"series too short: length {length} supports no window with "
            f"lookback {lookback} and horizon {horizon}")

    stacked = np.stack(arrs, axis=1)  # (length, channels)
    windows = np.lib.stride_tricks.sliding_window_view(stacked, lookback, axis=0)
    inputs = windows[:m].transpose(0, 2, 1).copy()  # (m, lookback, channels)
    index_map = np.arange(m, dtype=np.int64) + lookback + horizon - 1

    if target == "per_channel":
        targets = stacked[index_map]
    elif target_series is not None:
        ts = np.asarray(target_series, dtype=np.float64)
        if ts.size != length:
            raise ValueError("target_series length differs from channels")
        targets = ts[index_map]
    else:
        targets = stacked[index_map].sum(axis=1)
    return WindowedDataset(inputs=inputs, targets=targets, lookback=lookback,
                           channels=len(arrs), index_map=index_map)


def subset_windows(ds: WindowedDataset, lo: int, hi: int) -> WindowedDataset:
    """Windows whose target index falls in [lo, hi)."""
    a = int(np.searchsorted(ds.index_map, lo, side="left"))
    b = int(np.searchsorted(ds.index_map, hi, side="left"))
    return WindowedDataset(inputs=ds.inputs[a:b], targets=ds.targets[a:b],
                           lookback=ds.lookback, channels=ds.channels,
                           index_map=ds.index_map[a:b])


def evaluate(predictions, actuals) -> dict:
    """RMSE, MAE, MAPE and directional accuracy of aligned forecasts.

    MAPE averages |err|/|actual| over nonzero actuals and is None when no
    actual is nonzero. Directional accuracy compares the signs of consecutive
    differences, ignoring steps where the actual did not move; None when every
    step is a tie.
    """
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if p.size == 0 or a.size == 0:
        raise ValueError("empty inputs")
    if p.shape != a.shape:
        raise ValueError("predictions and actuals differ in shape")
    err = p - a
    out = {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "mae": float(np.mean(np.abs(err))),
    }
    nonzero = a != 0
    out["mape"] = float(np.mean(np.abs(err[nonzero] / a[nonzero]))) if np.any(nonzero) else None
    if p.size >= 2:
        dp = np.diff(p)
        da = np.diff(a)
        moved = da != 0
        if np.any(moved):
            out["directional_accuracy"] = float(np.mean(np.sign(dp[moved]) == np.sign(da[moved])))
        else:
            out["directional_accuracy"] = None
    else:
        out["directional_accuracy"] = None
    return out


def persistence_baseline(actuals) -> np.ndarray:
    """Naive forecast: each next value equals the current one. The returned
    predictions align with ``actuals[1:]``."""
    a = np.asarray(actuals, dtype=np.float64)
    if a.size < 2:
        raise ValueError("need at least 2 values")
    return a[:-1].copy()


@dataclass
class PipelineResult:
    reports: dict[str, ForecastReport]
    baseline_metrics: dict[str, dict]
    models: list[lstm.LstmParams]
    opt_states: list[dict]
    histories: list[list[dict]]
    eemd_result: EemdResult
    channel_scalers: list[ScalerState]
    price_scaler: ScalerState | None
    config: PipelineConfig


@dataclass
class _Prepared:
    eemd_result: EemdResult
    channel_scalers: list[ScalerState]
    price_scaler: ScalerState | None
    datasets: list[WindowedDataset]  # one per model
    ranges: dict[str, tuple[int, int]]
    prices: TimeSeries


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, str(exc)) from exc


def _prepare(prices: TimeSeries, config: PipelineConfig,
             channel_scalers: list[ScalerState] | None = None,
             price_scaler: ScalerState | None = None) -> _Prepared:
    result = _stage("decompose", eemd, prices, config.eemd, config.threads)
    channels = [imf.values for imf in result.imf_set.imfs] + [result.imf_set.residue]

    tr, va, te = split(len(prices), config.split)
    ranges = {"train": tr, "validation": va, "test": te}
    train_lo, train_hi = tr

    def fit_and_scale():
        nonlocal channel_scalers, price_scaler
        if channel_scalers is None:
            channel_scalers = [
                fit_scaler(ch[train_lo:train_hi], config.scaler_mode) for ch in channels
            ]
        elif len(channel_scalers) != len(channels):
            raise ValueError(
                f"checkpoint was trained on {len(channel_scalers)} channels, "
                f"decomposition produced {len(channels)}")
        scaled = [scale(sc, ch) for sc, ch in zip(channel_scalers, channels)]
        if config.strategy == "joint" and price_scaler is None:
            price_scaler = fit_scaler(prices.values[train_lo:train_hi], config.scaler_mode)
        return scaled

    scaled = _stage("scale", fit_and_scale)

    def build():
        if config.strategy == "joint":
            target = scale(price_scaler, prices.values)
            return [make_windows(scaled, config.lookback, "recombined",
                                 config.horizon, target_series=target)]
        return [make_windows([ch], config.lookback, "recombined", config.horizon)
                for ch in scaled]

    datasets = _stage("window", build)
    for name, (lo, hi) in ranges.items():
        if len(subset_windows(datasets[0], lo, hi)) == 0:
            raise PipelineError("window", f"{name} split contains no forecast targets")
    return _Prepared(result, channel_scalers, price_scaler, datasets, ranges, prices)


def _train_models(prepared: _Prepared, config: PipelineConfig):
    models, opt_states, histories = [], [], []
    tr, va = prepared.ranges["train"], prepared.ranges["validation"]
    for c, ds in enumerate(prepared.datasets):
        params = lstm.init_params(ds.channels, config.hidden_size, 1,
                                  init_seed=config.model_seed + c)
        trained, history = lstm.train(
            params,
            subset_windows(ds, *tr),
            subset_windows(ds, *va),
            config.train,
        )
        models.append(trained)
        opt_states.append(lstm.init_rmsprop_state(trained))
        histories.append(history)
    return models, opt_states, histories


def _predict_split(prepared: _Prepared, models: list[lstm.LstmParams],
                   config: PipelineConfig, split_name: str):
    lo, hi = prepared.ranges[split_name]
    parts = []
    index_map = None
    for ds, model, scaler in zip(
        prepared.datasets, models,
        [prepared.price_scaler] if config.strategy == "joint" else prepared.channel_scalers,
    ):
        sub = subset_windows(ds, lo, hi)
        index_map = sub.index_map
        pred_scaled = lstm.predict_last(model, sub.inputs)[:, 0]
        parts.append(unscale(scaler, pred_scaled))
    predictions = np.sum(parts, axis=0) if len(parts) > 1 else parts[0]
    actuals = prepared.prices.values[index_map]
    return predictions, actuals, index_map


def run_pipeline(prices: TimeSeries, config: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Execute decompose -> scale -> window -> train -> predict -> evaluate."""
    prepared = _prepare(prices, config)
    models, opt_states, histories = _stage("train", _train_models, prepared, config)

    reports: dict[str, ForecastReport] = {}
    baseline_metrics: dict[str, dict] = {}
    for split_name in ("validation", "test"):
        predictions, actuals, index_map = _stage(
            "predict", _predict_split, prepared, models, config, split_name)
        metrics = _stage("evaluate", evaluate, predictions, actuals)
        reports[split_name] = ForecastReport(
            predictions=predictions, actuals=actuals, metrics=metrics,
            split_name=split_name, index_map=index_map)
        naive = prepared.prices.values[index_map - config.horizon]
        baseline_metrics[split_name] = _stage("evaluate", evaluate, naive, actuals)

    return PipelineResult(
        reports=reports, baseline_metrics=baseline_metrics, models=models,
        opt_states=opt_states, histories=histories,
        eemd_result=prepared.eemd_result,
        channel_scalers=prepared.channel_scalers,
        price_scaler=prepared.price_scaler, config=config)


def predict_with_models(prices: TimeSeries, config: PipelineConfig,
                        models: list[lstm.LstmParams],
                        channel_scalers: list[ScalerState],
                        price_scaler: ScalerState | None,
                        splits=("validation", "test")) -> dict[str, ForecastReport]:
    """Re-run the deterministic data preparation and forecast with existing
    models (checkpoint evaluation path)."""
    prepared = _prepare(prices, config, channel_scalers, price_scaler)
    expected_input = prepared.datasets[0].channels
    if len(models) != len(prepared.datasets):
        raise PipelineError("predict", f"checkpoint holds {len(models)} models, "
                                       f"pipeline needs {len(prepared.datasets)}")
    for model in models:
        if model.input_size != expected_input:
            raise PipelineError(
                "predict", f"model input size {model.input_size} does not match "
                           f"{expected_input} decomposition channels")
    reports = {}
    for split_name in splits:
        predictions, actuals, index_map = _stage(
            "predict", _predict_split, prepared, models, config, split_name)
        reports[split_name] = ForecastReport(
            predictions=predictions, actuals=actuals,
            metrics=_stage("evaluate", evaluate, predictions, actuals),
            split_name=split_name, index_map=index_map)
    return reports


# --- configuration and checkpoint serialization -----------------------------

def config_to_dict(config: PipelineConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(blob: dict) -> PipelineConfig:
    eemd_blob = dict(blob["eemd"])
    eemd_blob["sift"] = SiftConfig(**eemd_blob["sift"])
    return PipelineConfig(
        eemd=EemdConfig(**eemd_blob),
        scaler_mode=blob["scaler_mode"],
        split=SplitSpec(**blob["split"]),
        lookback=int(blob["lookback"]),
        horizon=int(blob["horizon"]),
        hidden_size=int(blob["hidden_size"]),
        train=lstm.TrainConfig(**blob["train"]),
        strategy=blob["strategy"],
        model_seed=int(blob["model_seed"]),
        threads=int(blob["threads"]),
    )


def _scaler_to_dict(sc: ScalerState | None):
    return None if sc is None else {"mean": sc.mean, "variance": sc.variance, "mode": sc.mode}


def _scaler_from_dict(blob) -> ScalerState | None:
    return None if blob is None else ScalerState(**blob)


def save_checkpoint(path, result: PipelineResult, data_prep: dict | None = None,
                    tool_version: str = "") -> None:
    """Self-describing JSON checkpoint: dims, parameter tensors (row-major
    float64), optimizer state, scalers and the full config echo."""
    blob = {
        "format": "hht-forecast-checkpoint",
        "tool_version": tool_version,
        "data": data_prep or {},
        "pipeline_config": config_to_dict(result.config),
        "channel_scalers": [_scaler_to_dict(s) for s in result.channel_scalers],
        "price_scaler": _scaler_to_dict(result.price_scaler),
        "models": [
            {**lstm.params_to_dict(m),
             "opt_state": {k: v.tolist() for k, v in st.items()}}
            for m, st in zip(result.models, result.opt_states)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_checkpoint(path) -> dict:
    """Parse a checkpoint; raises ValueError on malformed or dim-inconsistent
    content."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format") != "hht-forecast-checkpoint":
        raise ValueError(f"{path} is not a forecast checkpoint")
    models = [lstm.params_from_dict(m) for m in blob["models"]]
    opt_states = [
        {k: np.asarray(v, dtype=np.float64) for k, v in m.get("opt_state", {}).items()}
        for m in blob["models"]
    ]
    config = config_from_dict(blob["pipeline_config"])
    for m in models:
        if m.hidden_size != config.hidden_size:
            raise ValueError(
                f"checkpoint model hidden size {m.hidden_size} does not match "
                f"config hidden size {config.hidden_size}")
    return {
        "data": blob.get("data", {}),
        "config": config,
        "channel_scalers": [_scaler_from_dict(s) for s in blob["channel_scalers"]],
        "price_scaler": _scaler_from_dict(blob["price_scaler"]),
        "models": models,
        "opt_states": opt_states,
        "tool_version": blob.get("tool_version", ""),
    }
