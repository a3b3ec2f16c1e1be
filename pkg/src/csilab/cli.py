"""
Command line: ``csilab {generate,train,evaluate,report}``.

Exit codes are 0 on success, 1 for usage or configuration errors and 2 for
runtime failures (missing or malformed artifacts, training divergence).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from collections import defaultdict
from typing import List, Optional

from .channel import derive_seed, generate_frames
from .config import ConfigError, ExperimentConfig
from .datastore import FormatError, read_checkpoint, read_dataset, write_checkpoint, write_dataset
from .experiment import EvalSetup, NETWORKS, dataset_peak, eval_seed, evaluate, scenario_label
from .metrics import NMSE_CONVENTION, PSNR_CONVENTION, MetricReport
from .models import EdsrSpec, SrcnnSpec, build_edsr, build_srcnn
from .pilots import estimate_receive_correlation
from .training import TrainingDiverged, train

log = logging.getLogger("csilab")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ensure_dir(path: str):
    if path:
        os.makedirs(path, exist_ok=True)


def _header(config: ExperimentConfig) -> List[str]:
    return [f"# {line}" for line in config.render()] + [f"# psnr: {PSNR_CONVENTION}", f"# nmse: {NMSE_CONVENTION}"]


def _write_csv(path: str, columns, rows, header: List[str] = ()):
    _ensure_dir(os.path.dirname(path))
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _read_csv(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: no CSV header")
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# commands

def cmd_generate(config: ExperimentConfig) -> int:
    channel = config.channel()
    seed = config["seed"]
    sets = (("paths.train_data", config["data.train_frames"], derive_seed(seed, 10)),
            ("paths.val_data", config["data.val_frames"], derive_seed(seed, 11)))
    for key, count, base in sets:
        frames = generate_frames(channel, count, base)
        path = config.path(key)
        _ensure_dir(os.path.dirname(path))
        write_dataset(frames, path)
        print(f"wrote {path}: {count} frames, dims {'x'.join(map(str, channel.dims))}, "
              f"{scenario_label(channel.rician_k_db)}, seed {seed}")
    return EXIT_OK


def _build_model(config: ExperimentConfig, dims):
    arch = config["train.arch"]
    channels = 2 * dims[2] * dims[3]
    if arch == "srcnn":
        return build_srcnn(SrcnnSpec(in_channels=channels, out_channels=channels), config["seed"])
    return build_edsr(EdsrSpec(in_channels=channels, out_channels=channels, scale=config["pilot.stride"]),
                      config["seed"])


def cmd_train(config: ExperimentConfig) -> int:
    train_frames = read_dataset(config.path("paths.train_data"))
    val_frames = read_dataset(config.path("paths.val_data"))
    tc = config.train_config()
    r_h = estimate_receive_correlation(train_frames) if tc.recovery == "mmse" else None
    arch = config["train.arch"]
    model = _build_model(config, train_frames[0].dims)

    def progress(row):
        print(f"epoch {row['epoch']:3d}  train {row['train_loss']:.6g}  val {row['val_loss']:.6g}", flush=True)

    ckpt, history = train(model, train_frames, val_frames, config.pattern(), tc, r_h=r_h, progress=progress)
    path = config.path(f"paths.{arch}_checkpoint")
    _ensure_dir(os.path.dirname(path))
    write_checkpoint(ckpt, path)
    hist_path = os.path.join(config["output"], f"{arch}_history.csv")
    rows = [{"epoch": r["epoch"], "train_loss": repr(r["train_loss"]), "val_loss": repr(r["val_loss"])}
            for r in history]
    _write_csv(hist_path, ("epoch", "train_loss", "val_loss"), rows, _header(config))
    print(f"wrote {path} (best epoch {ckpt.meta['best_epoch']}) and {hist_path}")
    return EXIT_OK


def cmd_evaluate(config: ExperimentConfig) -> int:
    val_frames = read_dataset(config.path("paths.val_data"))
    train_path = config.path("paths.train_data")
    train_frames = read_dataset(train_path) if os.path.exists(train_path) else None
    if "mmse" in config["recovery"] and train_frames is None:
        raise FileNotFoundError(f"MMSE evaluation needs the training set for R_H: {train_path}")
    r_h = estimate_receive_correlation(train_frames) if "mmse" in config["recovery"] else None
    setup = EvalSetup(frames=val_frames, pattern=config.pattern(), snr_db=config["snr_db"],
                      seed=eval_seed(config["seed"]), peak=dataset_peak(train_frames or val_frames),
                      scenario=scenario_label(config["channel.rician_k_db"]))
    checkpoints = {m: read_checkpoint(config.path(f"paths.{m}_checkpoint"))
                   for m in NETWORKS if m in config["interp"]}
    rows = []
    for recovery in config["recovery"]:
        pilots = setup.pilots(recovery, r_h)
        for method in config["interp"]:
            report = evaluate(method, setup, recovery, checkpoint=checkpoints.get(method), pilots=pilots)
            rows.append(report.row())
            print(f"{report.method:>15s} {recovery:>4s} {report.pilots:>6s} {report.scenario:>4s}  "
                  f"PSNR {report.psnr_db:8.3f} dB  NMSE {report.nmse_db:8.3f} dB")
    path = os.path.join(config["output"], "evaluate.csv")
    _write_csv(path, MetricReport.COLUMNS, rows, _header(config))
    print(f"wrote {path}")
    return EXIT_OK


def _pilot_key(label: str):
    try:
        a, b = label.lower().split("x")
        return (int(a) * int(b), label)
    except ValueError:
        return (0, label)


def merge_reports(paths: List[str]) -> List[MetricReport]:
    """Read evaluate CSVs and return their rows sorted by (scenario, pilots, method)."""
    reports = []
    for path in paths:
        for i, row in enumerate(_read_csv(path), 1):
            try:
                reports.append(MetricReport.from_row(row))
            except (ValueError, TypeError) as exc:
                raise FormatError(f"{path}: row {i}: {exc}") from None
    return sorted(reports, key=lambda r: (r.scenario, _pilot_key(r.pilots), r.method))


def _slug(*parts) -> str:
    return "_".join(str(p).replace(" ", "").replace("/", "-") for p in parts)


def cmd_report(paths: List[str], out_dir: str) -> int:
    if not paths:
        raise UsageError("report needs at least one evaluate CSV")
    reports = merge_reports(paths)
    _ensure_dir(out_dir)
    merged = os.path.join(out_dir, "merged.csv")
    _write_csv(merged, MetricReport.COLUMNS, [r.row() for r in reports],
               [f"# psnr: {PSNR_CONVENTION}", f"# nmse: {NMSE_CONVENTION}"])

    by_method = defaultdict(list)
    by_pilots = defaultdict(list)
    for r in reports:
        snr = r.row()["snr_db"]
        by_method[(r.scenario, snr, r.recovery, r.pilots)].append(r)
        by_pilots[(r.scenario, snr, r.recovery, r.method)].append(r)
    written = [merged]
    for (scenario, snr, recovery, pilots), group in sorted(by_method.items()):
        path = os.path.join(out_dir, f"series_{_slug(scenario, snr + 'dB', recovery, pilots)}.csv")
        _write_csv(path, ("method", "nmse_db", "psnr_db"),
                   [{"method": r.method, "nmse_db": r.row()["nmse_db"], "psnr_db": r.row()["psnr_db"]}
                    for r in group])
        written.append(path)
    for (scenario, snr, recovery, method), group in sorted(by_pilots.items()):
        path = os.path.join(out_dir, f"density_{_slug(scenario, snr + 'dB', recovery, method)}.csv")
        _write_csv(path, ("pilots", "nmse_db"), [{"pilots": r.pilots, "nmse_db": r.row()["nmse_db"]} for r in group])
        written.append(path)
    print(f"merged {len(reports)} rows from {len(paths)} files into {merged}; {len(written) - 1} series files")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides 'output')")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set one config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="csilab", description="Pilot-based CSI estimation experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("generate", parents=[common], help="simulate train/validation datasets")
    sub.add_parser("train", parents=[common], help="train the network named by train.arch")
    sub.add_parser("evaluate", parents=[common], help="score every configured method")
    rep = sub.add_parser("report", parents=[common], help="merge evaluate CSVs into tables and series")
    rep.add_argument("csv", nargs="*", help="evaluate CSV files")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = ExperimentConfig.load(args.config, args.override, args.seed, args.out)
        if args.command == "report":
            return cmd_report(args.csv, config["output"])
        command = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate}[args.command]
        return command(config)
    except (UsageError, ConfigError) as exc:
        print(f"csilab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"csilab: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, FormatError, ValueError) as exc:
        print(f"csilab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
