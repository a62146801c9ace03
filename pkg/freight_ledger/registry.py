"""Accuracy registry: balanced accuracy per (lane, milestone, charge) the bank gates on."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple, Union

from freight_ledger.errors import MetricError
from freight_ledger.events import Milestone

logger = logging.getLogger(__name__)

RegistryKey = Tuple[str, str, str]


@dataclass(frozen=True)
class EvalResult:
    balanced_accuracy: float
    sample_count: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.balanced_accuracy) and 0.0 <= self.balanced_accuracy <= 1.0):
            raise MetricError(f"balanced accuracy {self.balanced_accuracy} outside [0, 1]")
        if self.sample_count < 1:
            raise MetricError("sample_count must be >= 1")


def _milestone_key(milestone: Union[Milestone, str]) -> str:
    return milestone.key if isinstance(milestone, Milestone) else Milestone.parse(milestone).key


class AccuracyRegistry:
    """Entries keyed by (lane_id, milestone key, charge_code or target key)."""

    def __init__(self, entries: Optional[Mapping[RegistryKey, EvalResult]] = None) -> None:
        self._entries: Dict[RegistryKey, EvalResult] = dict(entries or {})

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Tuple[RegistryKey, EvalResult]]:
        return iter(sorted(self._entries.items()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AccuracyRegistry) and self._entries == other._entries

    def set(self, lane_id: str, milestone: Union[Milestone, str], target: str, result: EvalResult) -> None:
        self._entries[(lane_id, _milestone_key(milestone), target)] = result

    def get(self, lane_id: str, milestone: Union[Milestone, str], target: str) -> Optional[EvalResult]:
        return self._entries.get((lane_id, _milestone_key(milestone), target))

    def accuracy(self, lane_id: str, milestone: Union[Milestone, str], target: str) -> Optional[float]:
        entry = self.get(lane_id, milestone, target)
        return None if entry is None else entry.balanced_accuracy

    def to_payload(self) -> Dict[str, Any]:
        """Codec-ready form; entries sorted by key."""
        return {
            "entries": [
                {
                    "lane_id": lane_id,
                    "milestone": milestone,
                    "target": target,
                    "balanced_accuracy": float(result.balanced_accuracy),
                    "sample_count": int(result.sample_count),
                }
                for (lane_id, milestone, target), result in self
            ]
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "AccuracyRegistry":
        registry = cls()
        try:
            for entry in payload["entries"]:
                registry.set(
                    entry["lane_id"],
                    entry["milestone"],
                    entry["target"],
                    EvalResult(float(entry["balanced_accuracy"]), int(entry["sample_count"])),
                )
        except (KeyError, TypeError) as exc:
            raise MetricError(f"malformed accuracy registry: {exc}") from exc
        return registry

    def rows(self) -> List[Dict[str, Any]]:
        return self.to_payload()["entries"]


def update_registry(
    registry: AccuracyRegistry,
    lane_id: str,
    milestone: Union[Milestone, str],
    charge_code: str,
    eval_result: EvalResult,
) -> AccuracyRegistry:
    """Replace the entry for (lane, milestone, charge) and return the registry."""
    previous = registry.get(lane_id, milestone, charge_code)
    registry.set(lane_id, milestone, charge_code, eval_result)
    logger.info(
        "Registry %s/%s/%s: %.4f on %d samples%s",
        lane_id,
        _milestone_key(milestone),
        charge_code,
        eval_result.balanced_accuracy,
        eval_result.sample_count,
        "" if previous is None else f" (was {previous.balanced_accuracy:.4f})",
    )
    return registry
