"""Command-line surface for the wear classification toolkit.

Subcommands:
    classify   run the hierarchy over a prediction file
    evaluate   compute the metric suite over a labeled prediction file
    simulate   synthetic or oracle end-to-end simulation
    propagate  path accuracies, interval and corrected bounds

All machine-readable outputs are deterministic for fixed inputs and
seed. Exit codes: 0 success, 2 parse error, 3 validation error,
4 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import engine, metrics, predictions, propagation, simulate
from .predictions import (
    LabeledSample,
    ParseError,
    Prediction,
    StageId,
    ValidationError,
    VectorError,
)
from .synth import BadRow, InvalidSpec

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CONFIG = 4


class ConfigError(Exception):
    pass


@dataclass
class CliConfig:
    engine: engine.EngineConfig = field(default_factory=engine.EngineConfig)
    report_dir: Path = Path("reports")
    seed: int = 0
    rounding: int = 3

    def __post_init__(self):
        if self.rounding < 1:
            raise ConfigError("rounding must be >= 1 decimals")


def _parse_config_file(path: Path) -> dict[str, str]:
    """Flat key = value text format; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _threshold_spec(text: str) -> tuple[StageId, float]:
    try:
        name, value = text.split("=", 1)
        return StageId(name.strip()), float(value)
    except ValueError as exc:
        raise ConfigError(f"bad threshold spec {text!r}, expected stage=value") from exc


def build_config(args: argparse.Namespace) -> CliConfig:
    thresholds = dict(engine.DEFAULT_THRESHOLDS)
    conflict_policy = engine.ConflictPolicy.FLAG_ONLY
    ensemble_min_runs = 1
    report_dir = Path("reports")
    seed = 0
    rounding = 3

    if args.config:
        raw = _parse_config_file(Path(args.config))
        try:
            for key, value in raw.items():
                if key.startswith("threshold."):
                    thresholds[StageId(key.removeprefix("threshold."))] = float(value)
                elif key == "conflict_policy":
                    conflict_policy = engine.ConflictPolicy(value)
                elif key == "ensemble_min_runs":
                    ensemble_min_runs = int(value)
                elif key == "report_dir":
                    report_dir = Path(value)
                elif key == "seed":
                    seed = int(value)
                elif key == "rounding":
                    rounding = int(value)
                else:
                    raise ConfigError(f"unknown config key {key!r}")
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    if getattr(args, "no_thresholds", False):
        thresholds = {}
    for spec in getattr(args, "thresholds", None) or []:
        stage, value = _threshold_spec(spec)
        thresholds[stage] = value

    if args.out is not None:
        report_dir = Path(args.out)
    if args.seed is not None:
        seed = args.seed

    try:
        engine_config = engine.EngineConfig(
            thresholds=thresholds,
            conflict_policy=conflict_policy,
            ensemble_min_runs=ensemble_min_runs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return CliConfig(engine_config, report_dir, seed, rounding)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _group_runs(samples) -> dict[str, list[engine.RunInput]]:
    """Assemble RunInputs per tool from a flat prediction list.

    The i-th vector of each stage within a tool belongs to run i; the
    usage/profile/tear stages must therefore appear equally often.
    """
    by_tool: dict[str, dict[StageId, list]] = {}
    for item in samples:
        pred = item.prediction if isinstance(item, LabeledSample) else item
        by_tool.setdefault(pred.tool_id, {}).setdefault(pred.vector.stage, []).append(
            pred.vector
        )

    runs: dict[str, list[engine.RunInput]] = {}
    for tool_id, stages in sorted(by_tool.items()):
        required = [StageId.USAGE, StageId.PROFILE, StageId.TEAR]
        counts = {s: len(stages.get(s, [])) for s in required}
        if len(set(counts.values())) != 1 or 0 in counts.values():
            raise ValidationError(
                0,
                ValueError(
                    f"tool {tool_id}: usage/profile/tear vector counts differ: "
                    f"{ {s.value: c for s, c in counts.items()} }"
                ),
            )
        n_runs = counts[StageId.USAGE]

        def nth(stage: StageId, i: int):
            vectors = stages.get(stage, [])
            return vectors[i] if i < len(vectors) else None

        runs[tool_id] = [
            engine.RunInput(
                tool_id=tool_id,
                usage=stages[StageId.USAGE][i],
                profile=stages[StageId.PROFILE][i],
                tear=stages[StageId.TEAR][i],
                concave_severity=nth(StageId.CONCAVE_SEVERITY, i),
                convex_severity=nth(StageId.CONVEX_SEVERITY, i),
            )
            for i in range(n_runs)
        ]
    return runs


def cmd_classify(args: argparse.Namespace, config: CliConfig) -> int:
    samples = predictions.parse_prediction_file(args.prediction_file)
    runs_by_tool = _group_runs(samples)

    config.report_dir.mkdir(parents=True, exist_ok=True)
    run_records = []
    ensemble_records = []
    for tool_id, run_inputs in runs_by_tool.items():
        results = [engine.classify_run(run, config.engine) for run in run_inputs]
        for i, result in enumerate(results):
            rec = result.to_record()
            rec["run_index"] = i
            rec["needs_reevaluation"] = engine.needs_reevaluation(result)
            run_records.append(rec)
        if len(results) > 1:
            ensemble_records.append(
                engine.ensemble_classify(results, config.engine).to_record()
            )

    _write_jsonl(config.report_dir / "runs.jsonl", run_records)
    if ensemble_records:
        _write_jsonl(config.report_dir / "ensembles.jsonl", ensemble_records)

    n_conflicted = sum(1 for r in run_records if r["verdict"] == "conflicted")
    n_flagged = sum(1 for r in run_records if r["needs_reevaluation"])
    print(
        f"classified {len(run_records)} runs over {len(runs_by_tool)} tools: "
        f"{n_conflicted} conflicted, {n_flagged} flagged for re-examination"
    )
    print(f"reports written to {config.report_dir}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, config: CliConfig) -> int:
    samples = predictions.parse_prediction_file(args.labeled_file)
    labeled = [s for s in samples if isinstance(s, LabeledSample)]
    if not labeled:
        raise ValidationError(0, ValueError("file contains no labeled samples"))

    by_stage: dict[StageId, list[LabeledSample]] = {}
    for sample in labeled:
        by_stage.setdefault(sample.prediction.vector.stage, []).append(sample)

    config.report_dir.mkdir(parents=True, exist_ok=True)
    summary = {"stages": {}, "warnings": []}
    for stage in StageId:
        if stage not in by_stage:
            continue
        stage_samples = by_stage[stage]
        cm = metrics.ConfusionMatrix(stage)
        conf_correct = []
        for sample in stage_samples:
            pred = predictions.argmax_class(sample.prediction.vector)
            metrics.accumulate(cm, sample.truth, pred)
            conf_correct.append(
                (predictions.confidence(sample.prediction.vector), pred == sample.truth)
            )

        stage_summary = metrics.matrix_summary(cm, config.rounding)
        stats = metrics.confidence_stats(conf_correct)
        stage_summary["confidence"] = {
            "mean_all": metrics.round_report(stats.mean_all, config.rounding),
            "mean_false": (
                None
                if stats.mean_false is None
                else metrics.round_report(stats.mean_false, config.rounding)
            ),
            "count_all": stats.count_all,
            "count_false": stats.count_false,
        }

        metrics.write_confusion_csv(
            cm, config.report_dir / f"{stage.value}_confusion.csv", config.rounding
        )

        roc_rows = []
        auc_by_class = {}
        for cls, name in enumerate(cm.class_names):
            scored = [
                (s.prediction.vector.probs[cls], s.truth == cls) for s in stage_samples
            ]
            try:
                curve = metrics.roc_curve(scored, stage, cls)
            except metrics.DegenerateInput as exc:
                summary["warnings"].append(
                    f"{stage.value}/{name}: ROC skipped ({exc})"
                )
                auc_by_class[name] = None
                continue
            auc_by_class[name] = metrics.round_report(curve.auc, config.rounding)
            roc_rows.extend((name, fpr, tpr) for fpr, tpr in curve.points)
        stage_summary["auc"] = auc_by_class
        if roc_rows:
            with open(
                config.report_dir / f"{stage.value}_roc.csv", "w", newline="", encoding="utf-8"
            ) as fh:
                writer = csv.writer(fh)
                writer.writerow(["class", "fpr", "tpr"])
                writer.writerows(roc_rows)

        summary["stages"][stage.value] = stage_summary

    _write_json(config.report_dir / "summary.json", summary)
    for name, stage_summary in summary["stages"].items():
        print(
            f"{name}: accuracy {stage_summary['accuracy']}, "
            f"macro-F1 {stage_summary['macro_f1']}"
        )
    print(f"reports written to {config.report_dir}")
    return EXIT_OK


def _load_simulation_config(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, f"invalid JSON in {path}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ParseError(1, "simulation config must be a JSON object")
    return payload


def cmd_simulate(args: argparse.Namespace, config: CliConfig) -> int:
    sim_config = _load_simulation_config(Path(args.sim_config))
    mode = sim_config.get("mode", "synth")
    n = args.n if args.n is not None else int(sim_config.get("n", 1100))
    if n < 1:
        raise ConfigError("simulation size must be >= 1")

    if mode == "synth":
        report = simulate.run_synthetic_batch(
            n,
            config.seed,
            noise_sigma=float(sim_config.get("noise_sigma", 0.0)),
            config=config.engine,
        )
    elif mode == "oracle":
        try:
            matrices = {
                StageId(name): counts
                for name, counts in sim_config["matrices"].items()
            }
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"oracle config needs per-stage matrices: {exc}") from exc
        law = tuple(sim_config.get("confidence_law", simulate.DEFAULT_CONFIDENCE_LAW))
        report = simulate.run_oracle_batch(matrices, n, config.seed, law)
        acc = simulate.matrices_to_accuracies(matrices)
        report["propagation"] = propagation.propagation_report(acc, decimals=config.rounding)
    else:
        raise ConfigError(f"unknown simulation mode {mode!r}")

    report["seed"] = config.seed
    config.report_dir.mkdir(parents=True, exist_ok=True)
    _write_json(config.report_dir / "simulation.json", report)
    if mode == "synth":
        print(f"synthetic batch of {n}: hierarchy accuracy {report['hierarchy_accuracy']:.4f}")
    else:
        for branch, res in report["branches"].items():
            print(
                f"{branch}: measured {res['measured_accuracy']:.4f} "
                f"vs analytic {res['analytic_accuracy']:.4f}"
            )
    print(f"report written to {config.report_dir / 'simulation.json'}")
    return EXIT_OK


def cmd_propagate(args: argparse.Namespace, config: CliConfig) -> int:
    payload = _load_simulation_config(Path(args.input))
    try:
        acc_values = payload["accuracies"]
        acc = propagation.StageAccuracies(
            j_usage=acc_values["usage"],
            j_tear=acc_values["tear"],
            j_profile=acc_values["profile"],
            j_concave=acc_values.get("concave", 1.0),
            j_convex=acc_values.get("convex", 1.0),
        )
    except KeyError as exc:
        raise ConfigError(f"propagation input needs accuracies.{exc.args[0]}") from exc
    except ValueError as exc:
        raise ValidationError(0, exc) from exc

    ledger = None
    if "ledger" in payload:
        raw = payload["ledger"]
        try:
            ledger = propagation.CorrectionLedger(
                total_runs=raw["total_runs"],
                total_errors=raw["total_errors"],
                threshold_caught={
                    StageId(name): tuple(pair)
                    for name, pair in raw.get("threshold_caught", {}).items()
                },
                conflict_caught=raw.get("conflict_caught", 0),
                conflicts_overlap_thresholds=raw.get("conflicts_overlap_thresholds", False),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad ledger: {exc}") from exc

    report = propagation.propagation_report(acc, ledger, config.rounding)
    config.report_dir.mkdir(parents=True, exist_ok=True)
    _write_json(config.report_dir / "propagation.json", report)

    paths = report["path_accuracy"]
    print(
        f"path accuracies: rectangular {paths['rectangular']}, "
        f"concave {paths['concave']}, convex {paths['convex']}"
    )
    print(f"interval: {tuple(report['interval'])}")
    if "corrected_accuracy" in report:
        print(f"corrected accuracy bounds: {tuple(report['corrected_accuracy'])}")
    print(f"report written to {config.report_dir / 'propagation.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flapwear",
        description="Hierarchical wear classification for abrasive flap wheels.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--out", default=None, help="report output directory")
    common.add_argument(
        "--thresholds",
        action="append",
        metavar="STAGE=VALUE",
        help="confidence threshold override, e.g. usage=0.91 (repeatable)",
    )
    common.add_argument(
        "--no-thresholds",
        action="store_true",
        help="disable all confidence thresholds",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="run the hierarchy over predictions")
    p.add_argument("prediction_file", help="line-delimited prediction file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[common], help="metric suite over labeled predictions")
    p.add_argument("labeled_file", help="line-delimited prediction file with truth labels")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", parents=[common], help="synthetic or oracle simulation")
    p.add_argument("sim_config", help="JSON simulation config (mode: synth or oracle)")
    p.add_argument("--n", type=int, default=None, help="number of trials/observations")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("propagate", parents=[common], help="accuracy propagation analysis")
    p.add_argument("input", help="JSON file with stage accuracies and optional ledger")
    p.set_defaults(func=cmd_propagate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
        return args.func(args, config)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, VectorError, InvalidSpec, BadRow,
            propagation.LedgerInconsistent, propagation.BadMix,
            metrics.MetricsError, engine.EngineError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
