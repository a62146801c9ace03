#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
freightledger command line.

Subcommands:
1. simulate / compare: run scenarios under one or all payment methods.
2. invoice: print a shipment's partial invoice right after a milestone.
3. gen-data / train / eval: synthetic data and dwell classifiers.
4. relay-demo: one attested export/import round plus a tamper rejection.
5. verify-ledger: rescan the hash chain of FLGR snapshot files.

Human-readable output goes to stdout; JSON is written only with --out.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

import argparse
import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from freight_ledger.config import load_config, resolve_seed, setup_logger
from freight_ledger.errors import FreightLedgerError, ModelError, ScenarioError
from freight_ledger.evaluation import DwellModelEvaluator, threshold_labels
from freight_ledger.events import Milestone
from freight_ledger.features import training_sequences
from freight_ledger.identity import build_network
from freight_ledger.invoice import render_invoice
from freight_ledger.ledger import Ledger, PayloadKind, verify_snapshot
from freight_ledger.metrics import balanced_accuracy, confusion_counts
from freight_ledger.relay import (
    RelayEndpoint,
    TrustAnchor,
    exchange_over_socketpair,
    export_view,
    verify_and_import,
)
from freight_ledger.rnn import THRESHOLDS, TrainingConfig, load_model, predict_class, save_model, train
from freight_ledger.simulation import PaymentMethod, Scenario, compare_methods, invoice_at, load_scenario, run
from freight_ledger.synthetic import SyntheticDataSpec, generate_synthetic, load_dataset, save_dataset

logger = logging.getLogger("freight_ledger.cli")

METHOD_CHOICES = ("open-account", "classic", "accelerated")


def _write_json(path: Optional[str], document: Any) -> None:
    if path:
        Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)


def _scenario(args: argparse.Namespace, config: Dict[str, Any]) -> Scenario:
    scenario = load_scenario(args.scenario)
    if not scenario.source_weights and config.get("source_weights"):
        scenario.source_weights = {k: float(v) for k, v in config["source_weights"].items()}
    return scenario


def cmd_simulate(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scenario = _scenario(args, config)
    seed = resolve_seed(args.seed, scenario.seed)
    result = run(scenario, args.method, seed)
    print(result.report.render())
    if args.snapshot_dir:
        for path in result.save_snapshots(args.snapshot_dir):
            print(f"snapshot: {path}")
    _write_json(args.out, result.report.to_dict())
    return 0


def cmd_compare(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scenario = _scenario(args, config)
    comparison = compare_methods(scenario, resolve_seed(args.seed, scenario.seed))
    print(comparison.render())
    _write_json(args.out, comparison.to_dict())
    return 0


def cmd_invoice(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scenario = _scenario(args, config)
    invoice = invoice_at(
        scenario, args.shipment, Milestone.parse(args.milestone), resolve_seed(args.seed, scenario.seed)
    )
    print(render_invoice(invoice))
    _write_json(args.out, invoice.to_dict())
    return 0


def cmd_gen_data(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read synthetic spec {args.spec}: {exc}") from exc
    if args.shipments is not None:
        raw["shipments"] = args.shipments
    raw["seed"] = resolve_seed(args.seed, raw.get("seed"))
    dataset = generate_synthetic(SyntheticDataSpec.from_dict(raw))
    save_dataset(dataset, args.out)
    labels = dataset.labels(24)
    positive = sum(labels.values())
    print(
        f"{len(dataset.dwell_hours)} shipments on {dataset.spec.lane.lane_id}, "
        f"{positive} with dwell > 24h at {dataset.spec.target}; written to {args.out}"
    )
    return 0


def cmd_train(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    dataset = load_dataset(args.data)
    lane = dataset.spec.lane
    if args.lane and args.lane != lane.lane_id:
        raise ScenarioError(f"dataset {args.data} is for lane {lane.lane_id}, not {args.lane}")
    milestone = Milestone.parse(args.milestone)
    seed = resolve_seed(args.seed, dataset.spec.seed)
    sequences = training_sequences(
        dataset.timeline,
        lane,
        milestone,
        threshold_labels(dataset.dwell_hours, args.threshold),
        dataset.contexts,
        config.get("source_weights") or None,
    )

    evaluator = DwellModelEvaluator(
        train_fn=lambda data, threshold, training, s: train(data, threshold, training, s, lane.lane_id, milestone.key),
        config=TrainingConfig.from_dict(config["training"]),
    )
    result = evaluator.evaluate(sequences, args.threshold, seed, args.test_fraction)
    save_model(result["model"], args.out)
    print(
        f"{lane.lane_id} {milestone} >{args.threshold}h: train BA {result['train'].balanced_accuracy:.4f} "
        f"({result['train'].sample_count}), test BA {result['test'].balanced_accuracy:.4f} "
        f"({result['test'].sample_count}); model written to {args.out}"
    )
    return 0


def cmd_eval(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    model = load_model(args.model)
    if not model.milestone:
        raise ModelError(f"{args.model} does not record the milestone it was trained at")
    dataset = load_dataset(args.data)
    if model.lane_id and model.lane_id != dataset.spec.lane.lane_id:
        raise ModelError(f"{args.model} was trained on lane {model.lane_id}, dataset is {dataset.spec.lane.lane_id}")
    sequences = training_sequences(
        dataset.timeline,
        dataset.spec.lane,
        Milestone.parse(model.milestone),
        threshold_labels(dataset.dwell_hours, model.threshold_hours),
        dataset.contexts,
        config.get("source_weights") or None,
    )
    labels = [label for _, label in sequences]
    predictions = [predict_class(model, sequence) for sequence, _ in sequences]
    score = balanced_accuracy(labels, predictions)
    counts = confusion_counts(labels, predictions)
    print(
        f"{model.lane_id} {model.milestone} >{model.threshold_hours}h on {len(sequences)} shipments: "
        f"balanced accuracy {score:.4f} (TP {counts['TP']}, FN {counts['FN']}, TN {counts['TN']}, FP {counts['FP']})"
    )
    _write_json(
        args.out,
        {
            "lane_id": model.lane_id,
            "milestone": model.milestone,
            "threshold_hours": model.threshold_hours,
            "balanced_accuracy": score,
            "sample_count": len(sequences),
            "confusion": counts,
        },
    )
    return 0


def cmd_relay_demo(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    scenario = _scenario(args, config)
    seed = resolve_seed(args.seed, scenario.seed)
    result = run(scenario, PaymentMethod.ACCELERATED_FACTORING, seed)
    logistics = scenario.networks["logistics"]
    _, keys = build_network(
        logistics["network_id"], logistics["members"], int(logistics["quorum_threshold"]), seed
    )
    attested = export_view(
        result.logistics, keys, PayloadKind.PARTIAL_INVOICE, signers=config["relay"].get("quorum_signers")
    )
    anchors = {result.logistics.network_id: TrustAnchor.from_identity(result.logistics.identity)}
    receiver = Ledger(result.finance.identity)

    wire = attested.to_bytes()
    tampered = bytearray(wire)
    tampered[len(tampered) // 2] ^= 0x01
    if args.socket:
        endpoint = RelayEndpoint(receiver, anchors)
        accepted = exchange_over_socketpair(endpoint, wire)
        rejected = exchange_over_socketpair(endpoint, bytes(tampered))
    else:
        record = verify_and_import(receiver, attested, anchors)
        accepted = {"ok": True, "sequence_no": record.sequence_no, "kind": record.payload_kind.value}
        rejected = RelayEndpoint(receiver, anchors).handle(bytes(tampered))

    print(f"exported {attested.payload_kind.value} {attested.payload_hash.hex()[:16]} from {attested.source_network_id}")
    print(f"signed by {', '.join(member for member, _ in attested.signatures)}")
    print(f"valid payload: {'imported as #' + str(accepted.get('sequence_no')) if accepted['ok'] else accepted['error']}")
    print(f"tampered payload: {'rejected: ' + rejected['error'] if not rejected['ok'] else 'ACCEPTED'}")
    _write_json(
        args.out,
        {"payload_hash": attested.payload_hash.hex(), "accepted": accepted, "tampered": rejected},
    )
    return 0 if accepted["ok"] and not rejected["ok"] else 1


def cmd_verify_ledger(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    summaries: List[Dict[str, Any]] = []
    for path in args.snapshots:
        summary = verify_snapshot(path)
        summaries.append({"path": path, **summary})
        print(f"{path}: {summary['network_id']} {summary['records']} records, head {summary['head']}")
    _write_json(args.out, summaries)
    return 0


def _add_common_options(parser: argparse.ArgumentParser, verbose_default: Any = 0) -> None:
    parser.add_argument("-v", "--verbose", action="count", default=verbose_default, help="Increase log verbosity on stderr")
    parser.add_argument("--config", help="Configuration file (default freightledger_config.json)")
    parser.add_argument("--log-file", help="Log file; empty string disables file logging")
    parser.add_argument("--seed", type=int, help="Seed override (else FREIGHTLEDGER_SEED, else the input's seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freightledger",
        description="Accelerated carrier invoice factoring: simulation, prediction and ledger tools.",
    )
    _add_common_options(parser)
    # same options after the subcommand; unset ones keep the top-level value
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    _add_common_options(common, verbose_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    add_parser = functools.partial(sub.add_parser, parents=[common])

    p = add_parser("simulate", help="Run a scenario under one payment method")
    p.add_argument("--scenario", required=True)
    p.add_argument("--method", choices=METHOD_CHOICES, help="Defaults to the scenario's method")
    p.add_argument("--snapshot-dir", help="Write FLGR snapshots of both ledgers here")
    p.add_argument("--out", help="Write the cash-flow report as JSON")
    p.set_defaults(handler=cmd_simulate)

    p = add_parser("compare", help="Run a scenario under all three payment methods")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_compare)

    p = add_parser("invoice", help="Partial invoice of a shipment right after a milestone")
    p.add_argument("--scenario", required=True)
    p.add_argument("--shipment", required=True)
    p.add_argument("--milestone", required=True, help="e.g. VesselDeparture@CNSHA")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_invoice)

    p = add_parser("gen-data", help="Generate a synthetic shipment dataset")
    p.add_argument("--spec", required=True, help="Synthetic data spec (JSON)")
    p.add_argument("--shipments", type=int)
    p.add_argument("--out", required=True, help="Dataset file to write")
    p.set_defaults(handler=cmd_gen_data)

    p = add_parser("train", help="Train a dwell-time classifier for one milestone and threshold")
    p.add_argument("--data", required=True)
    p.add_argument("--lane")
    p.add_argument("--milestone", required=True)
    p.add_argument("--threshold", type=int, choices=THRESHOLDS, default=24)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True, help="Model file to write")
    p.set_defaults(handler=cmd_train)

    p = add_parser("eval", help="Balanced accuracy of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_eval)

    p = add_parser("relay-demo", help="Attested export/import round with a tamper rejection")
    p.add_argument("--scenario", required=True)
    p.add_argument("--socket", action="store_true", help="Carry the payloads over a local socket pair")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_relay_demo)

    p = add_parser("verify-ledger", help="Rescan the hash chain of snapshot files")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_verify_ledger)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "method", None):
        args.method = PaymentMethod.parse(args.method)

    config = load_config(args.config)
    log_file = config.get("log_file") if args.log_file is None else args.log_file
    setup_logger(log_file or None, args.verbose)
    try:
        return args.handler(args, config)
    except FreightLedgerError as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
