"""Command-line entry points: run, report, validate, synth.

Exit codes: 0 success, 1 verification or runtime failure, 2 bad
configuration, 3 bad input data. All artifact files except manifest.json
are timestamp-free so reruns with the same seed are byte-identical; the
manifest carries the wall-clock stamp and a content hash of every file.
"""

from __future__ import annotations

import argparse
import csv as csv_lib
import dataclasses
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, parse_config
from .dataset import ClientDataset, CsvSchema, LabelMap, build_client_datasets, load_csv
from .errors import ConfigError, DataError, FedharError
from .federation import RunLog, run_experiment, save_runlog, load_runlog
from .metrics import (
    communication_summary,
    write_f1_per_round,
    write_per_client_label_f1,
    write_rounds_attended,
)
from .report import comparison_payload, write_report
from .synth import generate_synthetic
from . import validate as validate_mod

log = logging.getLogger(__name__)

MODES = ("baseline", "early_stop", "both")


def _setup_logging() -> None:
    level_name = os.environ.get("FEDHAR_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _write_manifest(out_dir: Path, command: str) -> Path:
    """Hash every emitted file; the only place a timestamp appears."""
    files = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            files[path.relative_to(out_dir).as_posix()] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    doc = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "files": files,
    }
    target = out_dir / "manifest.json"
    target.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return target


def _build_datasets(cfg: ExperimentConfig) -> list[ClientDataset]:
    if cfg.data.source == "synthetic":
        sources = generate_synthetic(cfg.synthetic)
    else:
        if isinstance(cfg.csv.labels, str):
            label_map = LabelMap.wear()
        else:
            label_map = LabelMap.from_names(cfg.csv.labels)
        schema = CsvSchema(
            label_column=cfg.csv.label_column,
            channel_columns=cfg.csv.channels,
            delimiter=cfg.csv.delimiter,
            sample_rate_hz=cfg.csv.sample_rate_hz,
        )
        sources = [
            load_csv(path, schema, label_map, client_id=cid)
            for cid, path in enumerate(cfg.csv.files)
        ]
    return build_client_datasets(
        sources,
        window=cfg.data.window,
        train_stride=cfg.data.train_stride,
        eval_stride=cfg.data.eval_stride,
        test_fraction=cfg.data.test_fraction,
        normalize=cfg.data.normalize,
    )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg,
            federation=dataclasses.replace(cfg.federation, seed=args.seed),
            synthetic=dataclasses.replace(cfg.synthetic, seed=args.seed),
        )
    out_dir = Path(args.out)
    datasets = _build_datasets(cfg)
    sample = datasets[0].train[0]
    model_config = cfg.model.model_config(
        channels=sample.values.shape[0],
        window=cfg.data.window,
        classes=len(datasets[0].label_map),
        seed=cfg.federation.seed,
    )

    modes = ["baseline", "early_stop"] if args.mode == "both" else [args.mode]
    runs: list[RunLog] = []
    for mode in modes:
        settings = dataclasses.replace(
            cfg.federation, early_stopping_enabled=(mode == "early_stop")
        )
        echo = cfg.snapshot()
        echo["early_stopping"]["enabled"] = settings.early_stopping_enabled
        run = run_experiment(
            settings, datasets, model_config, mode=mode, config_echo=echo
        )
        mode_dir = out_dir / mode
        save_runlog(run, mode_dir)
        ledger = communication_summary(run)
        write_per_client_label_f1(mode_dir / "per_client_label_f1.csv", run)
        write_rounds_attended(mode_dir / "rounds_attended.csv", ledger)
        write_f1_per_round(mode_dir / "f1_per_round.csv", run)
        runs.append(run)
        print(
            f"{mode}: mean macro F1 {run.mean_final_f1():.4f}, "
            f"communication reduction {ledger.reduction:.4f} "
            f"({ledger.total_saved} of {ledger.rounds_scheduled * len(run.client_ids)} "
            "client-rounds saved)"
        )
    if len(runs) > 1:
        payload = comparison_payload(runs)
        (out_dir / "comparison.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )
        delta = payload["delta"]["mean_macro_f1"]
        print(f"early_stop minus baseline mean macro F1: {delta:+.4f}")
    _write_manifest(out_dir, "run")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    runs = [load_runlog(path) for path in args.runlog]
    out_dir = Path(args.out)
    outputs = write_report(runs, out_dir)
    _write_manifest(out_dir, "report")
    print(f"wrote {len(outputs)} report files to {out_dir}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    results = validate_mod.run_all(seed=args.seed)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failed += 0 if result.passed else 1
        print(f"{status} {result.name}: {result.detail}")
    if failed:
        print(f"{failed} of {len(results)} checks failed")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    spec = cfg.synthetic
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = generate_synthetic(spec)
    for series in sources:
        target = out_dir / f"client_{series.client_id:02d}.csv"
        with target.open("w", newline="") as fh:
            writer = csv_lib.writer(fh)
            writer.writerow(["label", *series.channel_names])
            names = series.label_map.names
            for i in range(series.length):
                writer.writerow(
                    [names[series.labels[i]]]
                    + [f"{v:.9g}" for v in series.values[:, i]]
                )
    meta = {
        "num_clients": spec.num_clients,
        "sample_rate_hz": spec.sample_rate_hz,
        "channels": list(sources[0].channel_names),
        "labels": list(sources[0].label_map.names),
        "class_freqs_hz": list(spec.frequencies()),
        "seed": spec.seed,
    }
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _write_manifest(out_dir, "synth")
    print(f"wrote {spec.num_clients} client series to {out_dir}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedhar",
        description=(
            "Deterministic federated-learning simulator for wearable "
            "activity recognition."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one or both federation variants")
    run_p.add_argument("--config", required=True, help="INI experiment file")
    run_p.add_argument("--mode", choices=MODES, default="both")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.set_defaults(func=cmd_run)

    report_p = sub.add_parser("report", help="render charts and tables from run logs")
    report_p.add_argument(
        "--runlog",
        action="append",
        required=True,
        help="run output directory (repeatable)",
    )
    report_p.add_argument("--out", required=True)
    report_p.set_defaults(func=cmd_report)

    validate_p = sub.add_parser("validate", help="run the built-in verification suite")
    validate_p.add_argument("--seed", type=int, default=0)
    validate_p.set_defaults(func=cmd_validate)

    synth_p = sub.add_parser("synth", help="export a synthetic dataset as CSV")
    synth_p.add_argument("--config", default=None, help="INI file (defaults otherwise)")
    synth_p.add_argument("--out", required=True)
    synth_p.add_argument("--seed", type=int, default=None)
    synth_p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FedharError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
