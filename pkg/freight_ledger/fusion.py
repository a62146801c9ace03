"""Fusion of multi-source event-time estimates into one aggregate estimate."""

import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from freight_ledger.events import AI_SERVICE, EventStatus, Milestone, Timeline

logger = logging.getLogger(__name__)


def aggregate_estimate(
    estimates: Sequence[Tuple[str, float]],
    source_weights: Optional[Mapping[str, float]] = None,
    fallback: Optional[float] = None,
    default_weight: float = 1.0,
) -> Optional[float]:
    """
    Weighted mean of the latest estimate of every source.

    Parameters:
        estimates: (source, occurrence_time) pairs in emission order; a later
            pair from the same source supersedes an earlier one.
        source_weights: Weight per source; unknown sources get ``default_weight``.
        fallback: Returned when there are no estimates (e.g. a model estimate).
        default_weight: Weight of sources missing from ``source_weights``.

    Returns:
        Aggregate occurrence time, ``fallback`` when there are no estimates,
        None when there is neither.
    """
    latest: Dict[str, float] = {}
    for source, occurrence_time in estimates:
        latest[source] = float(occurrence_time)
    if not latest:
        return fallback

    weights = source_weights or {}
    pairs = []
    for source, occurrence_time in latest.items():
        weight = float(weights.get(source, default_weight))
        if weight < 0 or not math.isfinite(weight):
            raise ValueError(f"weight for source {source!r} must be non-negative, got {weight}")
        pairs.append((weight, occurrence_time))
    total = math.fsum(w for w, _ in pairs)
    if total <= 0:
        raise ValueError("at least one estimate source needs a positive weight")

    # offset from the first estimate keeps identical estimates exact
    anchor = pairs[0][1]
    return anchor + math.fsum(w * (t - anchor) for w, t in pairs) / total


def timeline_estimates(
    timeline: Timeline,
    shipment_id: str,
    milestone: Milestone,
    as_of: Optional[float] = None,
    exclude_sources: Iterable[str] = (AI_SERVICE,),
) -> List[Tuple[str, float]]:
    """Effective Estimated (source, time) pairs for a milestone, in emission order."""
    excluded = set(exclude_sources)
    by_source = timeline.effective_by_source(shipment_id, milestone, EventStatus.ESTIMATED, as_of)
    events = sorted(
        (e for s, e in by_source.items() if s not in excluded), key=lambda e: e.emission_seq
    )
    return [(e.source, e.occurrence_time) for e in events]


def estimate_event_time(
    timeline: Timeline,
    shipment_id: str,
    milestone: Milestone,
    source_weights: Optional[Mapping[str, float]] = None,
    fallback: Optional[float] = None,
    as_of: Optional[float] = None,
) -> Optional[float]:
    """Aggregate estimate of ``milestone`` from the timeline's Estimated events."""
    pairs = timeline_estimates(timeline, shipment_id, milestone, as_of)
    return aggregate_estimate(pairs, source_weights, fallback)
