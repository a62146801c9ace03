import json
import sys
from pathlib import Path
from typing import Optional

import matplotlib.pyplot as plt
import pandas as pd

from freight_ledger.config import setup_logger
from freight_ledger.evaluation import DwellModelEvaluator, milestone_report
from freight_ledger.registry import AccuracyRegistry
from freight_ledger.rnn import TrainingConfig
from freight_ledger.synthetic import SyntheticDataSpec, generate_synthetic, load_dataset


def load_or_generate(path: str):
    """
    A saved dataset (*.dataset.json) is loaded as is; anything else is read
    as a synthetic data spec and generated.
    """
    if path.endswith(".dataset.json"):
        return load_dataset(path)
    spec = SyntheticDataSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    return generate_synthetic(spec)


def evaluate_and_plot(data_path: str, charge_code: str = "DWELL_EXCESS_FEE", out_csv: Optional[str] = None):
    """Per-milestone balanced accuracy of the 24/48/72h dwell classifiers."""
    # 1) data
    dataset = load_or_generate(data_path)
    lane = dataset.spec.lane
    limit_hours = 24 * lane.dwell_limit(dataset.spec.target)

    # 2) evaluate every (milestone, threshold)
    registry = AccuracyRegistry()
    df = milestone_report(
        dataset.timeline,
        lane,
        dataset.dwell_hours,
        dataset.contexts,
        seed=dataset.spec.seed,
        evaluator=DwellModelEvaluator(config=TrainingConfig()),
        registry=registry,
        registry_target=charge_code,
        registry_threshold=limit_hours,
        progress=print,
    )
    print(df.to_string(index=False))
    if out_csv:
        df.to_csv(out_csv, index=False)
    print(pd.DataFrame(registry.rows()).to_string(index=False))

    # 3) balanced accuracy per milestone, one line per threshold
    table = df.pivot(index="milestone", columns="threshold_hours", values="balanced_accuracy")
    table = table.reindex([m.key for m in lane.journey()])
    plt.figure()
    for threshold in table.columns:
        plt.plot(range(len(table)), table[threshold], marker="o", label=f">{threshold}h")
    plt.axhline(0.5, color="grey", linestyle="--", label="constant predictor")
    plt.xticks(range(len(table)), table.index, rotation=30, ha="right")
    plt.ylabel("Balanced accuracy (test)")
    plt.title(f"Dwell time at {dataset.spec.target} by milestone, {lane.lane_id}")
    plt.legend()
    plt.tight_layout()
    plt.show()


if __name__ == "__main__":
    setup_logger(None, verbosity=1)
    data_path = sys.argv[1] if len(sys.argv) > 1 else "scenarios/synthetic_twohop.json"
    evaluate_and_plot(data_path, out_csv=sys.argv[2] if len(sys.argv) > 2 else None)
