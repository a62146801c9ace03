# freight_ledger/metrics.py

"""
Classification metrics for dwell-time threshold models.

Included Metrics:
- Confusion counts (TP, FN, TN, FP)
- True positive rate
- True negative rate
- Balanced accuracy
"""

from typing import Dict, Sequence, Union

import numpy as np

from freight_ledger.errors import MetricError

BitsLike = Union[np.ndarray, Sequence[int]]


def _validate_inputs(labels: BitsLike, predictions: BitsLike) -> tuple:
    """Raise error if inputs are not valid; return them as integer arrays."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)

    if labels.shape != predictions.shape:
        raise MetricError("Labels and predictions must have the same shape.")
    if labels.ndim != 1 or labels.size == 0:
        raise MetricError("Labels and predictions must be non-empty 1-D arrays.")
    for name, arr in (("labels", labels), ("predictions", predictions)):
        if not np.all(np.isin(arr, (0, 1))):
            raise MetricError(f"{name} must contain only class bits 0 and 1.")

    return labels.astype(int), predictions.astype(int)


def confusion_counts(labels: BitsLike, predictions: BitsLike) -> Dict[str, int]:
    """
    Count TP, FN, TN and FP.

    Parameters:
        labels: Ground-truth class bits.
        predictions: Predicted class bits.

    Returns:
        dict with keys 'TP', 'FN', 'TN', 'FP'.
    """
    labels, predictions = _validate_inputs(labels, predictions)
    return {
        "TP": int(np.sum((labels == 1) & (predictions == 1))),
        "FN": int(np.sum((labels == 1) & (predictions == 0))),
        "TN": int(np.sum((labels == 0) & (predictions == 0))),
        "FP": int(np.sum((labels == 0) & (predictions == 1))),
    }


def true_positive_rate(labels: BitsLike, predictions: BitsLike) -> float:
    counts = confusion_counts(labels, predictions)
    positives = counts["TP"] + counts["FN"]
    if positives == 0:
        raise MetricError("True positive rate is undefined without class-1 labels.")
    return counts["TP"] / positives


def true_negative_rate(labels: BitsLike, predictions: BitsLike) -> float:
    counts = confusion_counts(labels, predictions)
    negatives = counts["TN"] + counts["FP"]
    if negatives == 0:
        raise MetricError("True negative rate is undefined without class-0 labels.")
    return counts["TN"] / negatives


def balanced_accuracy(labels: BitsLike, predictions: BitsLike) -> float:
    """
    Compute balanced accuracy, the mean of TPR and TNR.

    Parameters:
        labels: Ground-truth class bits; both classes must be present.
        predictions: Predicted class bits.

    Returns:
        float: (TP/(TP+FN) + TN/(TN+FP)) / 2.

    Raises:
        MetricError: labels contain a single class.
    """
    labels, predictions = _validate_inputs(labels, predictions)
    if len(np.unique(labels)) < 2:
        raise MetricError("Balanced accuracy is undefined when labels contain a single class.")
    return (true_positive_rate(labels, predictions) + true_negative_rate(labels, predictions)) / 2
