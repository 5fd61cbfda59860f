"""Experiment orchestration: the annotate/retrain cycle and the IPS sweep.

One experiment = (dataset, ips strategy, query strategy) over a list of
seeds.  Per seed, the loop selects an initial pool, records cycle-0 test
accuracy of a probe fitted on it, then for each cycle queries a batch,
reveals its labels from the dataset (simulating the annotator), refits the
probe from scratch, and records accuracy.  A failing seed is recorded as an
error and never corrupts sibling seeds.

The fixed budget and cycle count determine the batch size: with T cycles,
batch_size = floor(budget / (T + 1)) and the initial pool takes the rest,
so exactly `budget` labels are revealed per seed.
"""

import csv
import io
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .dataset import EmbeddingDataset, load_dataset
from .errors import ConfigError, ValidationError
from .ips import IpsConfig, PoolState, select_initial
from .probe import FitConfig, evaluate_accuracy, fit
from .query import (
    QUERY_STRATEGIES,
    QueryContext,
    StrategyParams,
    estimate_probcover_delta,
    unit_normalize,
)
from .util import config_hash, derive_rng

RESULTS_HEADER = (
    "dataset",
    "model",
    "ips",
    "strategy",
    "seed",
    "cycle",
    "labeled_size",
    "accuracy",
    "wall_ms",
)


def derive_batch_size(budget: int, cycles: int) -> tuple[int, int]:
    """Split a label budget into (initial pool size, per-cycle batch size).

    batch = floor(budget / (cycles + 1)); the initial pool takes the
    remainder, so init + cycles * batch == budget exactly and init >= batch.
    """
    if budget < cycles + 1:
        raise ConfigError(
            f"budget {budget} cannot cover {cycles} cycles (need >= {cycles + 1})"
        )
    batch = budget // (cycles + 1)
    init = budget - cycles * batch
    return init, batch


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str
    strategy: str
    ips_strategy: str = "random"
    cycles: int = 20
    budget: int | None = None
    init_size: int | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    strategy_params: StrategyParams = StrategyParams()
    fit: FitConfig = FitConfig()

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["seeds"] = list(self.seeds)
        return doc


@dataclass(frozen=True)
class CycleRecord:
    seed: int
    cycle: int
    labeled_size: int
    test_accuracy: float
    batch: tuple[int, ...]
    probe_iterations: int
    wall_ms: int


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    model: str
    ips: str
    strategy: str
    seed: int
    cycle: int
    labeled_size: int
    accuracy: float
    wall_ms: int

    def key(self):
        return (
            self.dataset,
            self.model,
            self.ips,
            self.strategy,
            self.seed,
            self.cycle,
            self.labeled_size,
        )


@dataclass
class ResultsTable:
    """The (dataset, model, ips, strategy, seed, cycle) -> accuracy relation."""

    rows: list[ResultRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)

    def validate_unique(self) -> None:
        seen = set()
        for row in self.rows:
            key = row.key()
            if key in seen:
                raise ValidationError(f"duplicate result row key: {key}")
            seen.add(key)

    def sorted_rows(self) -> list[ResultRow]:
        return sorted(self.rows, key=lambda r: r.key())

    def extend(self, other: "ResultsTable") -> None:
        self.rows.extend(other.rows)
        self.errors.extend(other.errors)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for row in self.sorted_rows():
            writer.writerow(
                [
                    row.dataset,
                    row.model,
                    row.ips,
                    row.strategy,
                    row.seed,
                    row.cycle,
                    row.labeled_size,
                    repr(row.accuracy),
                    row.wall_ms,
                ]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "ResultsTable":
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = tuple(next(reader))
            if header != RESULTS_HEADER:
                raise ValidationError(
                    f"unexpected results header {header!r} in {path}"
                )
            rows = [
                ResultRow(
                    dataset=rec[0],
                    model=rec[1],
                    ips=rec[2],
                    strategy=rec[3],
                    seed=int(rec[4]),
                    cycle=int(rec[5]),
                    labeled_size=int(rec[6]),
                    accuracy=float(rec[7]),
                    wall_ms=int(rec[8]),
                )
                for rec in reader
            ]
        return cls(rows=rows)


def resolve_strategy_params(
    cfg: ExperimentConfig, dataset: EmbeddingDataset
) -> StrategyParams:
    """Materialize per-run constants, estimating the probcover radius once
    per (dataset, model) pair with a seed-independent stream."""
    params = cfg.strategy_params
    params.validate()
    if cfg.strategy == "probcover" and params.probcover_delta == "auto":
        rng = derive_rng(
            "probcover-delta",
            dataset.manifest.dataset_name,
            dataset.manifest.model_name,
        )
        delta = estimate_probcover_delta(
            unit_normalize(dataset.train),
            dataset.manifest.num_classes,
            params.probcover_purity_threshold,
            rng,
        )
        params = replace(params, probcover_delta=delta)
    return params


def run_seed(
    dataset: EmbeddingDataset,
    cfg: ExperimentConfig,
    seed: int,
    params: StrategyParams,
    init_size: int,
    batch_size: int,
) -> list[CycleRecord]:
    """Run the full cycle loop for one seed; returns per-cycle records."""
    manifest = dataset.manifest
    strategy_fn = QUERY_STRATEGIES[cfg.strategy]

    ips_cfg = IpsConfig(
        strategy=cfg.ips_strategy,
        init_size=init_size,
        seed=seed,
        typiclust_knn=params.typiclust_knn,
        typiclust_max_clusters=params.typiclust_max_clusters,
    )
    records = []

    start = time.perf_counter()
    initial = select_initial(dataset, ips_cfg)
    pool = PoolState.initial(manifest.num_train, initial)
    probe = fit(
        dataset.train[pool.labeled],
        dataset.train_labels[pool.labeled],
        manifest.num_classes,
        cfg.fit,
    )
    accuracy = evaluate_accuracy(probe, dataset.test, dataset.test_labels)
    records.append(
        CycleRecord(
            seed=seed,
            cycle=0,
            labeled_size=pool.labeled.size,
            test_accuracy=accuracy,
            batch=tuple(int(i) for i in initial),
            probe_iterations=probe.n_iter,
            wall_ms=_elapsed_ms(start),
        )
    )

    query_rng = derive_rng(seed, cfg.strategy, "query")
    for _ in range(cfg.cycles):
        start = time.perf_counter()
        ctx = QueryContext(
            dataset=dataset,
            pool=pool,
            probe=probe,
            batch_size=batch_size,
            rng=query_rng,
            params=params,
        )
        batch = strategy_fn(ctx)
        if len(batch) != batch_size:
            raise ValidationError(
                f"strategy {cfg.strategy} returned {len(batch)} indices, "
                f"expected {batch_size}"
            )
        pool = pool.advance(batch)
        pool.check_partition(manifest.num_train)
        probe = fit(
            dataset.train[pool.labeled],
            dataset.train_labels[pool.labeled],
            manifest.num_classes,
            cfg.fit,
        )
        accuracy = evaluate_accuracy(probe, dataset.test, dataset.test_labels)
        records.append(
            CycleRecord(
                seed=seed,
                cycle=pool.cycle,
                labeled_size=pool.labeled.size,
                test_accuracy=accuracy,
                batch=tuple(int(i) for i in batch),
                probe_iterations=probe.n_iter,
                wall_ms=_elapsed_ms(start),
            )
        )

    expected_total = init_size + cfg.cycles * batch_size
    if pool.labeled.size != expected_total:
        raise ValidationError(
            f"budget mismatch: labeled pool has {pool.labeled.size}, "
            f"expected {expected_total}"
        )
    return records


def run_experiment(
    cfg: ExperimentConfig, dataset: EmbeddingDataset | None = None
) -> ResultsTable:
    """Run all seeds of one experiment cell; failures isolate per seed."""
    if cfg.strategy not in QUERY_STRATEGIES:
        raise ConfigError(
            f"unknown strategy {cfg.strategy!r}, expected one of "
            f"{sorted(QUERY_STRATEGIES)}"
        )
    if dataset is None:
        dataset = load_dataset(cfg.dataset_path)
    manifest = dataset.manifest

    budget = cfg.budget if cfg.budget is not None else manifest.budget
    init_size, batch_size = _split_budget(cfg, budget)
    if init_size + cfg.cycles * batch_size > manifest.num_train:
        raise ConfigError(
            f"budget {budget} exceeds num_train {manifest.num_train}"
        )
    if cfg.cycles > 0 and batch_size < 1:
        raise ConfigError("batch size must be >= 1; budget too small for cycles")

    params = resolve_strategy_params(cfg, dataset)

    table = ResultsTable(
        metadata={
            "config": cfg.to_dict(),
            "config_hash": config_hash(cfg.to_dict()),
            "budget": budget,
            "init_size": init_size,
            "batch_size": batch_size,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
    )
    for seed in cfg.seeds:
        try:
            records = run_seed(dataset, cfg, seed, params, init_size, batch_size)
        except Exception as exc:  # noqa: BLE001 - crash isolation per seed
            table.errors.append(
                {
                    "dataset": manifest.dataset_name,
                    "model": manifest.model_name,
                    "ips": cfg.ips_strategy,
                    "strategy": cfg.strategy,
                    "seed": seed,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
            continue
        for rec in records:
            table.rows.append(
                ResultRow(
                    dataset=manifest.dataset_name,
                    model=manifest.model_name,
                    ips=cfg.ips_strategy,
                    strategy=cfg.strategy,
                    seed=rec.seed,
                    cycle=rec.cycle,
                    labeled_size=rec.labeled_size,
                    accuracy=rec.test_accuracy,
                    wall_ms=rec.wall_ms,
                )
            )

    if manifest.source_checksum and dataset.payload_checksum() != manifest.source_checksum:
        raise ValidationError(
            "dataset arrays were mutated during the experiment "
            "(payload checksum no longer matches the manifest)"
        )
    table.validate_unique()
    return table


def run_ips_sweep(
    dataset: EmbeddingDataset,
    strategies,
    sizes,
    seeds,
    fit_cfg: FitConfig = FitConfig(),
    typiclust_knn: int = 20,
    typiclust_max_clusters: int = 500,
) -> ResultsTable:
    """Accuracy after training only on the initial pool, per (strategy, size, seed)."""
    manifest = dataset.manifest
    table = ResultsTable(metadata={"sweep_sizes": list(sizes)})
    for strategy in strategies:
        for size in sizes:
            if size > manifest.num_train:
                raise ConfigError(
                    f"sweep size {size} exceeds num_train {manifest.num_train}"
                )
            for seed in seeds:
                start = time.perf_counter()
                try:
                    cfg = IpsConfig(
                        strategy=strategy,
                        init_size=size,
                        seed=seed,
                        typiclust_knn=typiclust_knn,
                        typiclust_max_clusters=typiclust_max_clusters,
                    )
                    initial = select_initial(dataset, cfg)
                    probe = fit(
                        dataset.train[initial],
                        dataset.train_labels[initial],
                        manifest.num_classes,
                        fit_cfg,
                    )
                    accuracy = evaluate_accuracy(
                        probe, dataset.test, dataset.test_labels
                    )
                except Exception as exc:  # noqa: BLE001 - crash isolation per cell
                    table.errors.append(
                        {
                            "dataset": manifest.dataset_name,
                            "model": manifest.model_name,
                            "ips": strategy,
                            "size": size,
                            "seed": seed,
                            "error": f"{type(exc).__name__}: {exc}",
                        }
                    )
                    continue
                table.rows.append(
                    ResultRow(
                        dataset=manifest.dataset_name,
                        model=manifest.model_name,
                        ips=strategy,
                        strategy="none",
                        seed=seed,
                        cycle=0,
                        labeled_size=size,
                        accuracy=accuracy,
                        wall_ms=_elapsed_ms(start),
                    )
                )
    table.validate_unique()
    return table


def _split_budget(cfg: ExperimentConfig, budget: int) -> tuple[int, int]:
    if cfg.init_size is None:
        return derive_batch_size(budget, cfg.cycles)
    init = cfg.init_size
    if cfg.cycles == 0:
        if init != budget:
            raise ConfigError(
                f"with 0 cycles init_size must equal the budget {budget}, got {init}"
            )
        return init, 0
    remainder = budget - init
    if remainder < cfg.cycles or remainder % cfg.cycles:
        raise ConfigError(
            f"init_size {init} leaves {remainder} labels, which does not split "
            f"evenly over {cfg.cycles} cycles"
        )
    return init, remainder // cfg.cycles


def _elapsed_ms(start: float) -> int:
    return int(round((time.perf_counter() - start) * 1000.0))
