import logging
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from freight_ledger.contracts import ShippingLane
from freight_ledger.errors import FreightLedgerError
from freight_ledger.events import Timeline
from freight_ledger.features import ShipmentContext, training_sequences
from freight_ledger.metrics import balanced_accuracy, confusion_counts
from freight_ledger.registry import AccuracyRegistry, EvalResult, update_registry
from freight_ledger.rnn import THRESHOLDS, Dataset, DwellModel, TrainingConfig, predict_class, train

logger = logging.getLogger(__name__)


def stratified_split(
    dataset: Dataset, test_fraction: float = 0.2, seed: int = 0
) -> Tuple[List[Tuple[np.ndarray, int]], List[Tuple[np.ndarray, int]]]:
    """
    Split into (train, test) keeping the class ratio, by seeded shuffle.

    Parameters:
        dataset: (sequence, label) pairs.
        test_fraction: Share of each class held out, rounded; at least one
            example per class when the class has two or more.
        seed: Shuffle seed.

    Returns:
        (train, test) lists in shuffled order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: List[int] = []
    test_idx: List[int] = []
    labels = np.array([int(label) for _, label in dataset])
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        n_test = int(round(len(members) * test_fraction))
        if len(members) >= 2:
            n_test = min(max(n_test, 1), len(members) - 1)
        test_idx.extend(members[:n_test].tolist())
        train_idx.extend(members[n_test:].tolist())
    return [dataset[i] for i in sorted(train_idx)], [dataset[i] for i in sorted(test_idx)]


def evaluate_model(model: DwellModel, dataset: Dataset) -> EvalResult:
    """Balanced accuracy of ``model`` on ``dataset``."""
    labels = [int(label) for _, label in dataset]
    predictions = [predict_class(model, sequence) for sequence, _ in dataset]
    return EvalResult(balanced_accuracy(labels, predictions), len(dataset))


class DwellModelEvaluator:
    """
    Encapsulates the full pipeline: split → train → score held-out set.
    """

    def __init__(
        self,
        train_fn: Any = train,
        split_fn: Any = stratified_split,
        config: Optional[TrainingConfig] = None,
    ) -> None:
        """
        Initialize DwellModelEvaluator.

        Parameters:
            train_fn: Callable(dataset, threshold_hours, config, seed) → DwellModel.
            split_fn: Callable(dataset, test_fraction, seed) → (train, test).
            config: Training hyperparameters.
        """
        self.train_fn = train_fn
        self.split_fn = split_fn
        self.config = config or TrainingConfig()

    def evaluate(
        self,
        dataset: Dataset,
        threshold_hours: int,
        seed: int = 0,
        test_fraction: float = 0.2,
    ) -> Dict[str, Any]:
        """
        Train on the training split and report balanced accuracy on both splits.

        Returns:
            Dict with keys 'model', 'train', 'test' (EvalResult) and 'confusion'
            (held-out TP/FN/TN/FP).
        """
        train_set, test_set = self.split_fn(dataset, test_fraction, seed)
        model = self.train_fn(train_set, threshold_hours, self.config, seed)
        predictions = [predict_class(model, s) for s, _ in test_set]
        labels = [int(y) for _, y in test_set]
        return {
            "model": model,
            "train": evaluate_model(model, train_set),
            "test": EvalResult(balanced_accuracy(labels, predictions), len(test_set)),
            "confusion": confusion_counts(labels, predictions),
        }


def threshold_labels(dwell_hours: Mapping[str, float], threshold_hours: int) -> Dict[str, int]:
    """Class 1 iff the shipment's dwell time exceeds the threshold."""
    return {sid: int(hours > threshold_hours) for sid, hours in dwell_hours.items()}


def milestone_report(
    timeline: Timeline,
    lane: ShippingLane,
    dwell_hours: Mapping[str, float],
    contexts: Optional[Mapping[str, ShipmentContext]] = None,
    thresholds: Sequence[int] = THRESHOLDS,
    seed: int = 0,
    evaluator: Optional[DwellModelEvaluator] = None,
    registry: Optional[AccuracyRegistry] = None,
    registry_target: Optional[str] = None,
    registry_threshold: Optional[int] = None,
    milestones: Optional[Sequence[Any]] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> pd.DataFrame:
    """
    Train and evaluate one model per (milestone, threshold) of a lane.

    Parameters:
        timeline: Events of all shipments.
        lane: Lane the shipments travel.
        dwell_hours: Ground-truth dwell time per shipment at the target port.
        contexts: Vessel and port-operations data per shipment.
        thresholds: Dwell thresholds in hours.
        seed: Split and initialization seed.
        evaluator: Pipeline to run; defaults to DwellModelEvaluator().
        registry: When given, held-out balanced accuracy of ``registry_threshold``
            is stored under (lane, milestone, ``registry_target``).
        milestones: Milestones to cover; defaults to the lane's vessel journey.

    Returns:
        DataFrame with columns ['milestone', 'threshold_hours', 'train_size',
        'test_size', 'train_balanced_accuracy', 'balanced_accuracy', 'note'].
    """
    evaluator = evaluator or DwellModelEvaluator()
    records: List[Dict[str, Any]] = []
    for milestone in milestones or lane.journey():
        for threshold in thresholds:
            labels = threshold_labels(dwell_hours, threshold)
            row: Dict[str, Any] = {
                "milestone": milestone.key,
                "threshold_hours": threshold,
                "train_size": 0,
                "test_size": 0,
                "train_balanced_accuracy": float("nan"),
                "balanced_accuracy": float("nan"),
                "note": "",
            }
            try:
                dataset = training_sequences(timeline, lane, milestone, labels, contexts)
                result = evaluator.evaluate(dataset, threshold, seed)
            except FreightLedgerError as exc:
                logger.warning("%s >%dh: %s", milestone.key, threshold, exc)
                row["note"] = str(exc)
            else:
                row.update(
                    train_size=result["train"].sample_count,
                    test_size=result["test"].sample_count,
                    train_balanced_accuracy=result["train"].balanced_accuracy,
                    balanced_accuracy=result["test"].balanced_accuracy,
                )
                if registry is not None and registry_target and threshold == registry_threshold:
                    update_registry(registry, lane.lane_id, milestone, registry_target, result["test"])
            records.append(row)
            if progress is not None:
                progress(f"{milestone.key} >{threshold}h: {row['balanced_accuracy']:.4f}")
    return pd.DataFrame.from_records(
        records,
        columns=[
            "milestone",
            "threshold_hours",
            "train_size",
            "test_size",
            "train_balanced_accuracy",
            "balanced_accuracy",
            "note",
        ],
    )
