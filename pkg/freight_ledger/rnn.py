# freight_ledger/rnn.py

"""
Recurrent dwell-time threshold classifier.

A single-layer tanh recurrent unit with a logistic output:

    h_t   = tanh(W_xh x_t + W_hh h_{t-1} + b_h),   h_0 = 0
    score = sigmoid(w_o . h_T + b_o)

One model per threshold (24, 48, 72 hours); class 1 means the dwell time
exceeds the threshold. Inputs are standardized with statistics from the
training set, stored in the model. Training is full-batch gradient descent
on mean binary cross-entropy with backpropagation through time.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from freight_ledger.errors import ModelError
from freight_ledger.events import Milestone
from freight_ledger.predicted import PredictedValue, PredictionTarget, TargetKind

logger = logging.getLogger(__name__)

THRESHOLDS = (24, 48, 72)
MODEL_FORMAT = "freightledger-dwell-model"
MODEL_VERSION = 1
PARAM_NAMES = ("W_xh", "W_hh", "b_h", "w_o", "b_o")
BUCKET_LABELS = {1: "<=1d", 2: "2d", 3: "3d", 4: ">3d"}

# keeps scores strictly inside (0, 1)
_SCORE_EPS = 1e-12

Dataset = Sequence[Tuple[np.ndarray, int]]
Params = Dict[str, np.ndarray]


@dataclass
class TrainingMeta:
    seed: int = 0
    epochs: int = 0
    learning_rate: float = 0.0
    loss_curve: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class TrainingConfig:
    hidden_dim: int = 8
    epochs: int = 300
    learning_rate: float = 0.5
    init_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.hidden_dim < 1:
            raise ModelError("hidden_dim must be >= 1")
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ModelError("learning_rate must be a positive finite number")
        if not (self.init_scale > 0 and math.isfinite(self.init_scale)):
            raise ModelError("init_scale must be a positive finite number")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainingConfig":
        return cls(
            hidden_dim=int(data.get("hidden_dim", cls.hidden_dim)),
            epochs=int(data.get("epochs", cls.epochs)),
            learning_rate=float(data.get("learning_rate", cls.learning_rate)),
            init_scale=float(data.get("init_scale", cls.init_scale)),
        )


@dataclass
class DwellModel:
    threshold_hours: int
    W_xh: np.ndarray
    W_hh: np.ndarray
    b_h: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    training_meta: TrainingMeta = field(default_factory=TrainingMeta)
    lane_id: str = ""
    milestone: str = ""

    def __post_init__(self) -> None:
        for name in PARAM_NAMES + ("feature_mean", "feature_std"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.threshold_hours not in THRESHOLDS:
            raise ModelError(f"threshold_hours must be one of {THRESHOLDS}, got {self.threshold_hours}")
        if self.W_xh.ndim != 2:
            raise ModelError(f"W_xh must be a (hidden, input) matrix, got shape {self.W_xh.shape}")
        hidden, dim = self.W_xh.shape
        if hidden < 1:
            raise ModelError("hidden_dim must be >= 1")
        expected = {
            "W_hh": (hidden, hidden),
            "b_h": (hidden,),
            "w_o": (hidden,),
            "b_o": (1,),
            "feature_mean": (dim,),
            "feature_std": (dim,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ModelError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ModelError(f"parameter {name} is not finite")
        if np.any(self.feature_std <= 0):
            raise ModelError("feature_std must be positive")

    @property
    def hidden_dim(self) -> int:
        return int(self.W_xh.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.W_xh.shape[1])

    @property
    def params(self) -> Params:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, threshold_hours: int = 24) -> "DwellModel":
        """All-zero parameters with identity normalization."""
        return cls(
            threshold_hours,
            np.zeros((hidden_dim, input_dim)),
            np.zeros((hidden_dim, hidden_dim)),
            np.zeros(hidden_dim),
            np.zeros(hidden_dim),
            np.zeros(1),
            np.zeros(input_dim),
            np.ones(input_dim),
        )

    def normalize(self, sequence: np.ndarray) -> np.ndarray:
        return (sequence - self.feature_mean) / self.feature_std


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_sequence(sequence: np.ndarray, input_dim: int) -> np.ndarray:
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ModelError(f"sequence must be a non-empty (T, D) array, got shape {seq.shape}")
    if seq.shape[1] != input_dim:
        raise ModelError(f"sequence has {seq.shape[1]} features, model expects {input_dim}")
    return seq


def hidden_states(params: Params, sequence: np.ndarray) -> np.ndarray:
    """Hidden states h_1..h_T of one (already normalized) sequence."""
    h = np.zeros(params["W_hh"].shape[0])
    states = []
    for x in sequence:
        h = np.tanh(params["W_xh"] @ x + params["W_hh"] @ h + params["b_h"])
        states.append(h)
    return np.array(states)


def forward(model: DwellModel, sequence: np.ndarray) -> float:
    """
    Score one raw feature sequence.

    Parameters:
        model: Trained (or hand-built) DwellModel.
        sequence: Array (T, D), T >= 1, D == model.input_dim.

    Returns:
        float: Probability-like score in (0, 1); class 1 iff score > 0.5.
    """
    seq = _check_sequence(sequence, model.input_dim)
    h_last = hidden_states(model.params, model.normalize(seq))[-1]
    z = float(model.w_o @ h_last + model.b_o[0])
    return float(np.clip(_sigmoid(np.float64(z)), _SCORE_EPS, 1.0 - _SCORE_EPS))


def predict_class(model: DwellModel, sequence: np.ndarray) -> int:
    return int(forward(model, sequence) > 0.5)


def _batches(dataset: Dataset) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Group sequences by length into (N, T, D) arrays for vectorized BPTT."""
    grouped: Dict[int, Tuple[List[np.ndarray], List[int]]] = {}
    for sequence, label in dataset:
        xs, ys = grouped.setdefault(len(sequence), ([], []))
        xs.append(sequence)
        ys.append(label)
    return [
        (np.stack(xs), np.asarray(ys, dtype=np.float64))
        for _, (xs, ys) in sorted(grouped.items())
    ]


def loss_and_gradients(
    params: Params, batches: Sequence[Tuple[np.ndarray, np.ndarray]]
) -> Tuple[float, Params]:
    """
    Mean binary cross-entropy and its gradient by backpropagation through time.

    Parameters:
        params: W_xh (H, D), W_hh (H, H), b_h (H,), w_o (H,), b_o (1,).
        batches: (X, y) pairs with X of shape (N, T, D), already normalized.

    Returns:
        (loss, grads) with grads keyed like params.
    """
    W_xh, W_hh, b_h, w_o, b_o = (params[name] for name in PARAM_NAMES)
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    total_loss = 0.0
    count = 0

    for X, y in batches:
        n, steps, _ = X.shape
        hs = [np.zeros((n, W_hh.shape[0]))]
        for t in range(steps):
            hs.append(np.tanh(X[:, t] @ W_xh.T + hs[-1] @ W_hh.T + b_h))
        z = hs[-1] @ w_o + b_o[0]
        total_loss += float(np.sum(np.logaddexp(0.0, z) - y * z))
        count += n

        dz = _sigmoid(z) - y
        grads["w_o"] += hs[-1].T @ dz
        grads["b_o"] += dz.sum()
        dh = np.outer(dz, w_o)
        for t in range(steps, 0, -1):
            da = dh * (1.0 - hs[t] ** 2)
            grads["W_xh"] += da.T @ X[:, t - 1]
            grads["W_hh"] += da.T @ hs[t - 1]
            grads["b_h"] += da.sum(axis=0)
            dh = da @ W_hh

    if count == 0:
        raise ModelError("empty dataset")
    for name in grads:
        grads[name] /= count
    return total_loss / count, grads


def _loss(params: Params, batches: Sequence[Tuple[np.ndarray, np.ndarray]]) -> float:
    return loss_and_gradients(params, batches)[0]


def gradient_check(
    params: Params,
    dataset: Dataset,
    n_coords: int = 10,
    eps: float = 1e-4,
    seed: int = 0,
) -> float:
    """
    Largest relative error between the analytic gradient and central finite
    differences over ``n_coords`` randomly chosen parameter coordinates.

    Relative error is |a - n| / max(|a|, |n|, 1e-3).
    """
    batches = _batches([(np.asarray(s, dtype=np.float64), int(y)) for s, y in dataset])
    _, grads = loss_and_gradients(params, batches)
    rng = np.random.default_rng(seed)
    names = list(PARAM_NAMES)
    sizes = np.array([params[name].size for name in names], dtype=np.float64)
    worst = 0.0
    for _ in range(n_coords):
        name = names[int(rng.choice(len(names), p=sizes / sizes.sum()))]
        index = np.unravel_index(int(rng.integers(params[name].size)), params[name].shape)
        nudged = {k: v.copy() for k, v in params.items()}
        original = nudged[name][index]
        nudged[name][index] = original + eps
        plus = _loss(nudged, batches)
        nudged[name][index] = original - eps
        minus = _loss(nudged, batches)
        numeric = (plus - minus) / (2 * eps)
        analytic = float(grads[name][index])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-3)
        worst = max(worst, rel)
    return worst


def _validate_dataset(dataset: Dataset) -> Tuple[List[Tuple[np.ndarray, int]], int]:
    if not dataset:
        raise ModelError("cannot train on an empty dataset")
    checked = []
    dim = np.asarray(dataset[0][0]).shape[-1]
    for sequence, label in dataset:
        if label not in (0, 1):
            raise ModelError(f"labels must be 0 or 1, got {label!r}")
        checked.append((_check_sequence(sequence, dim), int(label)))
    labels = {label for _, label in checked}
    if labels != {0, 1}:
        raise ModelError(
            f"training set contains only class {labels.pop()}; "
            "a threshold classifier needs examples of both classes"
        )
    return checked, int(dim)


def _feature_stats(dataset: Sequence[Tuple[np.ndarray, int]]) -> Tuple[np.ndarray, np.ndarray]:
    steps = np.concatenate([s for s, _ in dataset])
    mean = steps.mean(axis=0)
    std = steps.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


def train(
    dataset: Dataset,
    threshold_hours: int,
    config: Optional[TrainingConfig] = None,
    seed: int = 0,
    lane_id: str = "",
    milestone: str = "",
) -> DwellModel:
    """
    Fit a DwellModel by full-batch gradient descent with backtracking.

    A step that would raise the loss is retried at half the learning rate;
    an accepted step grows it by 5%. The recorded loss curve is therefore
    non-increasing. Deterministic given (dataset, config, seed).

    Parameters:
        dataset: (sequence (T, D), label 0/1) pairs containing both classes.
        threshold_hours: 24, 48 or 72.
        config: Hyperparameters; defaults to TrainingConfig().
        seed: Seed for parameter initialization.
        lane_id, milestone: Recorded in the model for the per-milestone registry.

    Raises:
        ModelError: single-class data, mixed feature dimensions, bad hyperparameters.
    """
    config = config or TrainingConfig()
    checked, dim = _validate_dataset(dataset)
    mean, std = _feature_stats(checked)
    batches = _batches([((s - mean) / std, y) for s, y in checked])

    rng = np.random.default_rng(seed)
    hidden = config.hidden_dim
    params: Params = {
        "W_xh": rng.normal(0.0, config.init_scale, (hidden, dim)),
        "W_hh": rng.normal(0.0, config.init_scale, (hidden, hidden)),
        "b_h": np.zeros(hidden),
        "w_o": rng.normal(0.0, config.init_scale, hidden),
        "b_o": np.zeros(1),
    }

    lr = config.learning_rate
    loss, grads = loss_and_gradients(params, batches)
    curve = [loss]
    for epoch in range(1, config.epochs + 1):
        for _ in range(40):
            candidate = {name: params[name] - lr * grads[name] for name in PARAM_NAMES}
            new_loss, new_grads = loss_and_gradients(candidate, batches)
            if new_loss <= loss:
                break
            lr *= 0.5
        else:
            logger.warning("Step size collapsed at epoch %d; stopping at loss %.6f", epoch, loss)
            break
        params, loss, grads = candidate, new_loss, new_grads
        lr *= 1.05
        curve.append(loss)
        logger.debug("epoch %d loss %.6f lr %.4g", epoch, loss, lr)

    logger.info(
        "Trained %dh model on %d sequences: loss %.4f -> %.4f", threshold_hours, len(checked), curve[0], curve[-1]
    )
    return DwellModel(
        threshold_hours,
        params["W_xh"],
        params["W_hh"],
        params["b_h"],
        params["w_o"],
        params["b_o"],
        mean,
        std,
        TrainingMeta(seed, config.epochs, config.learning_rate, curve),
        lane_id,
        milestone,
    )


def save_model(model: DwellModel, path: Union[str, Path]) -> None:
    """Write a model as JSON (format freightledger-dwell-model, version 1)."""
    document = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "threshold_hours": model.threshold_hours,
        "lane_id": model.lane_id,
        "milestone": model.milestone,
        "hidden_dim": model.hidden_dim,
        "input_dim": model.input_dim,
        "params": {name: getattr(model, name).tolist() for name in PARAM_NAMES},
        "normalization": {"mean": model.feature_mean.tolist(), "std": model.feature_std.tolist()},
        "training_meta": {
            "seed": model.training_meta.seed,
            "epochs": model.training_meta.epochs,
            "learning_rate": model.training_meta.learning_rate,
            "loss_curve": list(model.training_meta.loss_curve),
        },
    }
    Path(path).write_text(json.dumps(document, indent=2), encoding="utf-8")


def load_model(path: Union[str, Path]) -> DwellModel:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if document.get("format") != MODEL_FORMAT or document.get("version") != MODEL_VERSION:
        raise ModelError(f"{path} is not a {MODEL_FORMAT} v{MODEL_VERSION} file")
    try:
        params = document["params"]
        meta = document.get("training_meta", {})
        return DwellModel(
            int(document["threshold_hours"]),
            np.array(params["W_xh"], dtype=np.float64).reshape(document["hidden_dim"], document["input_dim"]),
            np.array(params["W_hh"], dtype=np.float64).reshape(document["hidden_dim"], document["hidden_dim"]),
            np.array(params["b_h"], dtype=np.float64),
            np.array(params["w_o"], dtype=np.float64),
            np.array(params["b_o"], dtype=np.float64),
            np.array(document["normalization"]["mean"], dtype=np.float64),
            np.array(document["normalization"]["std"], dtype=np.float64),
            TrainingMeta(
                int(meta.get("seed", 0)),
                int(meta.get("epochs", 0)),
                float(meta.get("learning_rate", 0.0)),
                [float(v) for v in meta.get("loss_curve", [])],
            ),
            document.get("lane_id", ""),
            document.get("milestone", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model file {path}: {exc}") from exc


@dataclass(frozen=True)
class DwellBucket:
    label: str
    dwell_days: int
    scores: Tuple[float, float, float]
    bits: Tuple[int, int, int]
    repaired_bits: Tuple[int, int, int]
    confidence: float
    explanation: str


def repair_bits(bits: Sequence[int]) -> Tuple[int, ...]:
    """Make threshold bits monotone: every bit below the highest asserted one is set."""
    highest = max((i for i, bit in enumerate(bits) if bit), default=-1)
    return tuple(1 if i <= highest else 0 for i in range(len(bits)))


def bucket_from_scores(scores: Sequence[float]) -> DwellBucket:
    """Bucket for scores of the 24h, 48h and 72h models, in that order."""
    if len(scores) != len(THRESHOLDS):
        raise ModelError(f"need one score per threshold {THRESHOLDS}")
    bits = tuple(int(s > 0.5) for s in scores)
    repaired = repair_bits(bits)
    days = 1 + sum(repaired)
    explanation = " ".join(f">{t}h:{s:.2f}" for t, s in zip(THRESHOLDS, scores))
    if repaired != bits:
        explanation += f"; bits {bits} repaired to {repaired}"
    return DwellBucket(
        label=BUCKET_LABELS[days],
        dwell_days=days,
        scores=tuple(float(s) for s in scores),  # type: ignore[arg-type]
        bits=bits,  # type: ignore[arg-type]
        repaired_bits=repaired,  # type: ignore[arg-type]
        confidence=min(max(s, 1.0 - s) for s in scores),
        explanation=explanation,
    )


def predict_dwell_bucket(models: Mapping[int, DwellModel], sequence: np.ndarray) -> DwellBucket:
    """
    Dwell bucket (<=1d, 2d, 3d, >3d) from the three threshold models.

    Raises:
        ModelError: a threshold model is missing or has the wrong threshold.
    """
    missing = [t for t in THRESHOLDS if t not in models]
    if missing:
        raise ModelError(f"missing dwell models for thresholds {missing}")
    for t in THRESHOLDS:
        if models[t].threshold_hours != t:
            raise ModelError(f"model under key {t} was trained for {models[t].threshold_hours}h")
    return bucket_from_scores([forward(models[t], sequence) for t in THRESHOLDS])


def bucket_prediction(
    bucket: DwellBucket,
    shipment_id: str,
    port: str,
    produced_at: Milestone,
    charge_code: Optional[str] = None,
) -> PredictedValue:
    """DwellDays prediction the invoice engine prices."""
    return PredictedValue(
        shipment_id=shipment_id,
        target=PredictionTarget(TargetKind.DWELL_DAYS, port=port),
        value=float(bucket.dwell_days),
        score=bucket.confidence,
        produced_at_milestone=produced_at,
        charge_code=charge_code,
    )
