"""Command-line pipeline runner.

Stages run in a fixed order, each consuming the previous stage's artifacts
from the output directory and writing its own before the next begins:

    preprocess -> balance -> sweep -> train -> evaluate -> counterfactual
    -> risk -> report

Every output file starts with a comment line carrying the config hash and
seed, so any artifact can be traced to the exact run that produced it. Two
runs with the same config and seed produce byte-identical metric and
counterfactual CSVs.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 partial
completion (a later stage failed after earlier ones succeeded).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .balance import (
    BalancerSpec,
    random_oversample,
    rebalance,
    sweep_pair,
    sweep_triple,
    write_sweep_csv,
)
from .config import ConfigError, ExperimentConfig, load_config
from .counterfactual import (
    boundary_grid,
    feature_change_rates,
    generate_counterfactuals,
    summarize,
    write_boundary_csv,
    write_cf_csv,
)
from .ingest import preprocess as ingest_preprocess
from .ingest import read_processed_csv, split_balanced, write_processed_csv
from .models import ModelSpec, evaluate, load_model, save_model
from .risk import ThresholdSpec, format_report_text, prob_report, write_report_csv

STAGES = (
    "preprocess",
    "balance",
    "sweep",
    "train",
    "evaluate",
    "counterfactual",
    "risk",
    "report",
)


class DependencyError(ValueError):
    pass


class _Run:
    """Shared state for one invocation: config, output dir, logging."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path, quiet: bool):
        self.cfg = cfg
        self.out = out_dir
        self.quiet = quiet
        self.stamp = f"config {cfg.config_hash()} seed {cfg.seed}"

    def log(self, message: str) -> None:
        if not self.quiet:
            print(message, file=sys.stderr)

    def artifact(self, name: str, must_exist: bool = False) -> Path:
        p = self.out / name
        if must_exist and not p.exists():
            raise DependencyError(
                f"stage input {p} is missing; run the producing stage first"
            )
        return p

    def record_timing(self, stage: str, seconds: float) -> None:
        """Update this stage's row, keeping rows of stages run earlier."""
        p = self.out / "timings.csv"
        rows: dict[str, str] = {}
        if p.exists():
            with p.open(newline="", encoding="utf-8") as fh:
                for row in list(csv.reader(fh))[1:]:
                    if row:
                        rows[row[0]] = row[1]
        rows[stage] = f"{seconds:.3f}"
        with p.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "seconds"])
            for name in STAGES:
                if name in rows:
                    writer.writerow([name, rows[name]])


# -- stages -------------------------------------------------------------------


def stage_preprocess(run: _Run) -> None:
    cfg = run.cfg
    if not Path(cfg.dataset).exists():
        raise ConfigError(f"dataset file {cfg.dataset} does not exist")
    ds = ingest_preprocess(cfg.dataset)
    split = split_balanced(ds, cfg.test_fraction, seed=cfg.seed)
    write_processed_csv(ds, run.artifact("processed.csv"), run.stamp)
    write_processed_csv(split.train, run.artifact("train.csv"), run.stamp)
    write_processed_csv(split.test, run.artifact("test.csv"), run.stamp)
    run.log(
        f"preprocess: {len(ds)} rows -> train {len(split.train)} / test {len(split.test)}"
    )


def stage_balance(run: _Run) -> None:
    cfg = run.cfg
    train = read_processed_csv(run.artifact("train.csv", must_exist=True))
    methods = cfg.balance_methods
    if methods == ("none",):
        balanced = train
    elif methods == ("ros",):
        balanced = random_oversample(train, seed=cfg.seed)
    else:
        balanced = rebalance(
            train, cfg.balancer_specs(), weights=cfg.balance_weights, seed=cfg.seed
        )
    write_processed_csv(balanced, run.artifact("balanced_train.csv"), run.stamp)
    neg, pos = balanced.class_counts()
    run.log(f"balance[{'+'.join(methods)}]: {neg}/{pos} per class")


def stage_sweep(run: _Run) -> None:
    cfg = run.cfg
    train = read_processed_csv(run.artifact("train.csv", must_exist=True))
    test = read_processed_csv(run.artifact("test.csv", must_exist=True))
    model = ModelSpec(cfg.model_kind, cfg.model_params)
    specs = [
        BalancerSpec(m, k=cfg.balance_k, source=cfg.balance_source)
        for m in cfg.sweep_methods
    ]
    if len(specs) == 2:
        results = sweep_pair(
            train, test, specs[0], specs[1], model=model, step=cfg.sweep_step,
            n_runs=cfg.sweep_n_runs, seed=cfg.seed, n_jobs=cfg.sweep_n_jobs,
        )
    else:
        results = sweep_triple(
            train, test, specs, model=model, step=cfg.sweep_step,
            n_runs=cfg.sweep_n_runs, seed=cfg.seed, n_jobs=cfg.sweep_n_jobs,
        )
    write_sweep_csv(results, run.artifact("sweep.csv"), run.stamp)
    best = results[0]
    run.log(
        f"sweep[{'+'.join(cfg.sweep_methods)}]: {len(results)} grid points, "
        f"best weights {best.weights.values} f1 {best.metrics.f1:.4f}"
    )


def stage_train(run: _Run) -> None:
    cfg = run.cfg
    balanced = read_processed_csv(run.artifact("balanced_train.csv", must_exist=True))
    model = ModelSpec(cfg.model_kind, cfg.model_params)(cfg.seed)
    model.fit(balanced.X, balanced.y)
    save_model(model, run.artifact("model.json"))
    run.log(f"train[{cfg.model_kind}]: fitted on {len(balanced)} rows")


def stage_evaluate(run: _Run) -> None:
    cfg = run.cfg
    balanced = read_processed_csv(run.artifact("balanced_train.csv", must_exist=True))
    test = read_processed_csv(run.artifact("test.csv", must_exist=True))
    spec = ModelSpec(cfg.model_kind, cfg.model_params)
    metrics = evaluate(spec, balanced, test, n_runs=cfg.eval_n_runs, seed=cfg.seed)
    with run.artifact("metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(["model", "accuracy", "precision", "recall", "f1", "n_runs"])
        writer.writerow(
            [
                cfg.model_kind,
                repr(metrics.accuracy),
                repr(metrics.precision),
                repr(metrics.recall),
                repr(metrics.f1),
                metrics.n_runs,
            ]
        )
    run.log(
        f"evaluate[{cfg.model_kind}]: acc {metrics.accuracy:.4f} f1 {metrics.f1:.4f} "
        f"over {metrics.n_runs} runs"
    )


def stage_counterfactual(run: _Run) -> None:
    cfg = run.cfg
    train = read_processed_csv(run.artifact("train.csv", must_exist=True))
    test = read_processed_csv(run.artifact("test.csv", must_exist=True))
    model = load_model(run.artifact("model.json", must_exist=True))
    results = generate_counterfactuals(
        model, train, test, lam=cfg.cf_lam, population=cfg.cf_population
    )
    names = train.schema.names
    write_cf_csv(results, names, run.artifact("cf_results.csv"), run.stamp)

    summ = summarize(results, len(names))
    with run.artifact("cf_summary.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["avg_norm_distance", repr(summ.avg_norm_distance)])
        writer.writerow(["std_norm_distance", repr(summ.std_norm_distance)])
        writer.writerow(["avg_sparsity", repr(summ.avg_sparsity)])
        writer.writerow(["std_sparsity", repr(summ.std_sparsity)])
        writer.writerow(["pct_features_changed", repr(summ.pct_features_changed)])
        writer.writerow(["n_results", summ.n_results])

    rates = feature_change_rates(results, names)
    with run.artifact("cf_rates.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(["feature", "change_rate"])
        for name, rate in rates.rates.items():
            writer.writerow([name, repr(rate)])

    grid = boundary_grid(train, results, resolution=cfg.cf_grid_resolution, seed=cfg.seed)
    write_boundary_csv(
        grid, run.artifact("boundary_cells.csv"), run.artifact("boundary_pairs.csv"), run.stamp
    )
    run.log(
        f"counterfactual[{cfg.cf_population}]: {summ.n_results} results, "
        f"avg sparsity {summ.avg_sparsity:.3f}"
    )


def stage_risk(run: _Run) -> None:
    cfg = run.cfg
    ds = read_processed_csv(run.artifact("processed.csv", must_exist=True))
    spec = ThresholdSpec.from_file(cfg.thresholds) if cfg.thresholds else ThresholdSpec()
    report = prob_report(ds, spec)
    write_report_csv(report, run.artifact("risk_report.csv"), run.stamp)
    run.artifact("risk_report.txt").write_text(
        format_report_text(report), encoding="utf-8"
    )
    run.log(f"risk: prior {report.prior:.3f} over {report.n_total} rows")


def stage_report(run: _Run) -> None:
    collated: dict = {"config_hash": run.cfg.config_hash(), "seed": run.cfg.seed}

    def read_csv_artifact(name: str):
        p = run.out / name
        if not p.exists():
            return None
        with p.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
        return rows

    for name in (
        "metrics.csv",
        "sweep.csv",
        "cf_summary.csv",
        "cf_rates.csv",
        "risk_report.csv",
        "timings.csv",
    ):
        rows = read_csv_artifact(name)
        if rows:
            collated[name.removesuffix(".csv")] = rows

    (run.out / "report.json").write_text(
        json.dumps(collated, indent=2) + "\n", encoding="utf-8"
    )

    lines = [f"run report ({run.stamp})", ""]
    if "metrics" in collated:
        header, row = collated["metrics"][0], collated["metrics"][1]
        lines.append("model metrics: " + ", ".join(f"{h}={v}" for h, v in zip(header, row)))
    if "sweep" in collated:
        lines.append(f"sweep table: {len(collated['sweep']) - 1} grid points (best first)")
        lines.append("  best: " + ", ".join(collated["sweep"][1]))
    if "cf_summary" in collated:
        lines.append("counterfactual summary:")
        for key, value in collated["cf_summary"][1:]:
            lines.append(f"  {key} = {value}")
    risk_txt = run.out / "risk_report.txt"
    if risk_txt.exists():
        lines.append("")
        lines.append(risk_txt.read_text(encoding="utf-8").rstrip())
    if "timings" in collated:
        lines.append("")
        lines.append("stage timings (wall-clock seconds):")
        for stage, seconds in collated["timings"][1:]:
            lines.append(f"  {stage:15s} {seconds}")
    (run.out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    run.log(f"report: wrote {run.out / 'report.json'} and report.txt")


_STAGE_FUNCS = {
    "preprocess": stage_preprocess,
    "balance": stage_balance,
    "sweep": stage_sweep,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "counterfactual": stage_counterfactual,
    "risk": stage_risk,
    "report": stage_report,
}


def _resolve_out_dir(cfg: ExperimentConfig, out_flag: str | None) -> Path:
    if out_flag:
        out = Path(out_flag)
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        out = Path(cfg.out) / f"{stamp}-{cfg.config_hash()}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_stages(cfg: ExperimentConfig, out_dir: Path, stages: list[str], quiet: bool) -> int:
    """Execute stages in order; returns the process exit code."""
    run = _Run(cfg, out_dir, quiet)
    (out_dir / "config.json").write_text(
        json.dumps(cfg.raw, indent=2) + "\n", encoding="utf-8"
    )
    marker = out_dir / "INCOMPLETE"
    if marker.exists():
        marker.unlink()
    completed = 0
    for stage in stages:
        t0 = time.perf_counter()
        try:
            _STAGE_FUNCS[stage](run)
        except (ConfigError, DependencyError) as exc:
            print(f"error in stage {stage}: {exc}", file=sys.stderr)
            _mark_incomplete(out_dir, stage, exc)
            return 1 if completed == 0 else 3
        except Exception as exc:  # noqa: BLE001 - stage boundary
            print(f"error in stage {stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
            _mark_incomplete(out_dir, stage, exc)
            return 2 if completed == 0 else 3
        run.record_timing(stage, time.perf_counter() - t0)
        completed += 1
    return 0


def _mark_incomplete(out_dir: Path, stage: str, exc: Exception) -> None:
    (out_dir / "INCOMPLETE").write_text(
        f"failed at stage {stage}: {exc}\n", encoding="utf-8"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metspredict",
        description="Metabolic-syndrome prediction pipeline: preprocessing, "
        "oversampling, weight sweeps, training, counterfactuals, risk analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: <out>/<timestamp>-<hash>)")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")

    run_p = sub.add_parser("run", help="run the full pipeline (or one stage via --stage)")
    add_common(run_p)
    run_p.add_argument("--stage", choices=STAGES, default=None, help="run only this stage")

    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "run":
        stages = [args.stage] if args.stage else list(STAGES)
    else:
        stages = [args.command]

    out_dir = _resolve_out_dir(cfg, args.out)
    if not args.quiet:
        print(f"output directory: {out_dir}", file=sys.stderr)
    return run_stages(cfg, out_dir, stages, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
