"""Command-line entry point.

Subcommands:

    validate <dir>                    check a dataset directory, exit 0 iff valid
    run --config grid.json            run an experiment grid, write results.csv
    sweep --config sweep.json         initial-pool-size sweep, write results.csv
    report --results a.csv [...] --out dir    build analysis CSV/SVG artifacts

Exit codes: 0 success, 1 partial experiment failure, 2 input or config error.
`ALFORGE_THREADS` caps worker parallelism regardless of the config value.

Grid config keys (all lists non-empty): datasets (paths), strategies,
ips (default ["random"]), seeds (default [0..4]), cycles (default 20),
output_dir, parallelism (default 1), overrides (per dataset path:
{"budget": int, "init_size": int}), strategy_params, fit.  The fully
resolved config is echoed to <output_dir>/config.resolved.json before any
work starts, so a run is auditable from its outputs alone.
"""

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from .analysis import (
    accuracy_curves,
    ips_difference_curves,
    pairwise_win_rates,
    render_report,
    top_performer_frequency,
)
from .benchmark import DEFAULT_SWEEP_SIZES
from .dataset import load_dataset
from .errors import AlforgeError, ConfigError
from .ips import IPS_STRATEGIES
from .probe import FitConfig
from .query import QUERY_STRATEGIES, StrategyParams
from .runner import (
    ExperimentConfig,
    ResultsTable,
    run_experiment,
    run_ips_sweep,
)
from .util import config_hash

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except AlforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alforge",
        description="Active learning benchmark harness over frozen embeddings.",
    )
    sub = parser.add_subparsers(required=True)

    p_validate = sub.add_parser("validate", help="validate a dataset directory")
    p_validate.add_argument("directory")
    p_validate.set_defaults(handler=cmd_validate)

    p_run = sub.add_parser("run", help="run an experiment grid")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(handler=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an initial-pool-size sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_report = sub.add_parser("report", help="build analysis artifacts")
    p_report.add_argument("--results", nargs="+", required=True)
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(handler=cmd_report)
    return parser


def cmd_validate(args) -> int:
    dataset = load_dataset(args.directory)
    man = dataset.manifest
    print(f"dataset   {man.dataset_name}")
    print(f"model     {man.model_name} (pooling {man.pooling})")
    print(f"train     {man.num_train} x {man.embedding_dim}")
    print(f"test      {man.num_test} x {man.embedding_dim}")
    print(f"classes   {man.num_classes}")
    print(f"budget    {man.budget}")
    print(f"checksum  {man.source_checksum}")
    return EXIT_OK


def _load_json_config(path: str) -> dict:
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _thread_cap(requested: int) -> int:
    cap = os.environ.get("ALFORGE_THREADS")
    workers = max(1, int(requested))
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def _resolve_grid(doc: dict) -> dict:
    datasets = doc.get("datasets") or []
    strategies = doc.get("strategies") or []
    if not datasets:
        raise ConfigError("grid config needs a non-empty 'datasets' list")
    if not strategies:
        raise ConfigError("grid config needs a non-empty 'strategies' list")
    unknown = sorted(set(strategies) - set(QUERY_STRATEGIES))
    if unknown:
        raise ConfigError(
            f"unknown strategies {unknown}; valid: {sorted(QUERY_STRATEGIES)}"
        )
    ips_list = doc.get("ips") or ["random"]
    bad_ips = sorted(set(ips_list) - set(IPS_STRATEGIES))
    if bad_ips:
        raise ConfigError(f"unknown ips strategies {bad_ips}; valid: {IPS_STRATEGIES}")
    if "output_dir" not in doc:
        raise ConfigError("grid config needs 'output_dir'")

    resolved = {
        "datasets": list(datasets),
        "strategies": list(strategies),
        "ips": list(ips_list),
        "seeds": list(doc.get("seeds", [0, 1, 2, 3, 4])),
        "cycles": int(doc.get("cycles", 20)),
        "output_dir": doc["output_dir"],
        "parallelism": int(doc.get("parallelism", 1)),
        "overrides": dict(doc.get("overrides", {})),
        "strategy_params": {
            **dataclasses.asdict(StrategyParams()),
            **doc.get("strategy_params", {}),
        },
        "fit": {**dataclasses.asdict(FitConfig()), **doc.get("fit", {})},
    }
    if not resolved["seeds"]:
        raise ConfigError("grid config needs a non-empty 'seeds' list")
    return resolved


def _echo_config(resolved: dict, out_dir: Path) -> str:
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(resolved)
    (out_dir / "config.resolved.json").write_text(
        json.dumps({"config": resolved, "config_hash": digest}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    return digest


def cmd_run(args) -> int:
    resolved = _resolve_grid(_load_json_config(args.config))
    out_dir = Path(resolved["output_dir"])
    digest = _echo_config(resolved, out_dir)

    params = StrategyParams(**resolved["strategy_params"])
    fit_cfg = FitConfig(**resolved["fit"])
    datasets = {path: load_dataset(path) for path in resolved["datasets"]}

    cells = []
    for path in resolved["datasets"]:
        override = resolved["overrides"].get(path, {})
        for ips_name in resolved["ips"]:
            for strategy in resolved["strategies"]:
                for seed in resolved["seeds"]:
                    cells.append(
                        ExperimentConfig(
                            dataset_path=path,
                            strategy=strategy,
                            ips_strategy=ips_name,
                            cycles=resolved["cycles"],
                            budget=override.get("budget"),
                            init_size=override.get("init_size"),
                            seeds=(seed,),
                            strategy_params=params,
                            fit=fit_cfg,
                        )
                    )

    merged = ResultsTable(
        metadata={"config_hash": digest, "config": resolved,
                  "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    )
    workers = _thread_cap(resolved["parallelism"])
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_experiment, cfg, datasets[cfg.dataset_path])
            for cfg in cells
        ]
        for cfg, future in zip(cells, futures):
            try:
                merged.extend(future.result())
            except Exception as exc:  # noqa: BLE001 - cell isolation
                merged.errors.append(
                    {
                        "dataset": cfg.dataset_path,
                        "ips": cfg.ips_strategy,
                        "strategy": cfg.strategy,
                        "seed": cfg.seeds[0],
                        "error": f"{type(exc).__name__}: {exc}",
                    }
                )

    merged.validate_unique()
    merged.write_csv(out_dir / "results.csv")
    _write_run_manifest(out_dir, resolved, digest, merged)
    if merged.errors:
        print(f"{len(merged.errors)} cell(s) failed; see run_manifest.json", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"wrote {out_dir / 'results.csv'} ({len(merged.rows)} rows)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = _load_json_config(args.config)
    datasets = doc.get("datasets") or []
    if not datasets:
        raise ConfigError("sweep config needs a non-empty 'datasets' list")
    ips_list = doc.get("ips") or list(IPS_STRATEGIES)
    bad_ips = sorted(set(ips_list) - set(IPS_STRATEGIES))
    if bad_ips:
        raise ConfigError(f"unknown ips strategies {bad_ips}; valid: {IPS_STRATEGIES}")
    if "output_dir" not in doc:
        raise ConfigError("sweep config needs 'output_dir'")
    resolved = {
        "datasets": list(datasets),
        "ips": list(ips_list),
        "sizes": list(doc.get("sizes", DEFAULT_SWEEP_SIZES)),
        "seeds": list(doc.get("seeds", [0, 1, 2, 3, 4])),
        "output_dir": doc["output_dir"],
        "fit": {**dataclasses.asdict(FitConfig()), **doc.get("fit", {})},
    }
    out_dir = Path(resolved["output_dir"])
    digest = _echo_config(resolved, out_dir)

    fit_cfg = FitConfig(**resolved["fit"])
    merged = ResultsTable(metadata={"config_hash": digest})
    for path in resolved["datasets"]:
        dataset = load_dataset(path)
        sizes = [s for s in resolved["sizes"] if s <= dataset.manifest.num_train]
        table = run_ips_sweep(
            dataset, resolved["ips"], sizes, resolved["seeds"], fit_cfg
        )
        merged.extend(table)
    merged.validate_unique()
    merged.write_csv(out_dir / "results.csv")
    _write_run_manifest(out_dir, resolved, digest, merged)
    if merged.errors:
        print(f"{len(merged.errors)} cell(s) failed; see run_manifest.json", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"wrote {out_dir / 'results.csv'} ({len(merged.rows)} rows)")
    return EXIT_OK


def cmd_report(args) -> int:
    merged = ResultsTable()
    provenance = {}
    for path in args.results:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigError(f"results file not found: {path}")
        merged.extend(ResultsTable.from_csv(file_path))
        provenance[str(path)] = hashlib.sha256(file_path.read_bytes()).hexdigest()
        manifest_path = file_path.parent / "run_manifest.json"
        if manifest_path.is_file():
            doc = json.loads(manifest_path.read_text(encoding="utf-8"))
            if "config_hash" in doc:
                provenance[str(manifest_path)] = doc["config_hash"]

    analyses = {"accuracy_curves": accuracy_curves(merged)}
    ips_values = sorted({row.ips for row in merged.rows})
    cycle_rows = [row for row in merged.rows if row.strategy != "none"]
    cycle_table = ResultsTable(rows=cycle_rows)
    for ips_name in ips_values:
        subset = {"ips": ips_name}
        if any(row.ips == ips_name for row in cycle_rows):
            analyses[f"win_rates_{ips_name}"] = pairwise_win_rates(cycle_table, subset)
            for group_by in ("cycle", "model", "dataset"):
                analyses[f"top_performer_{group_by}_{ips_name}"] = (
                    top_performer_frequency(cycle_table, group_by, subset)
                )
    if {"typiclust", "random"} <= set(ips_values):
        analyses["ips_difference"] = ips_difference_curves(
            ResultsTable(rows=[r for r in cycle_rows if r.ips == "typiclust"]),
            ResultsTable(rows=[r for r in cycle_rows if r.ips == "random"]),
        )
    written = render_report(analyses, args.out, provenance)
    print(f"wrote {len(written)} artifact file(s) to {args.out}")
    return EXIT_OK


def _write_run_manifest(out_dir: Path, resolved: dict, digest: str, table: ResultsTable) -> None:
    (out_dir / "run_manifest.json").write_text(
        json.dumps(
            {
                "config": resolved,
                "config_hash": digest,
                "row_count": len(table.rows),
                "errors": table.errors,
                "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    sys.exit(main())
