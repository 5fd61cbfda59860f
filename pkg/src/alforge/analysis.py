"""Turns result tables into comparison artifacts.

All comparisons are paired at the seed level: a unit (dataset, model, cycle)
is only compared when the strategies share the exact same seed set, and the
verdict comes from the mean over seeds of the per-seed accuracy difference.
Exact-zero differences are ties; accuracies are ratios of integers over a
fixed test set, so exact ties are meaningful.  Ties are excluded from win
percentages but reported in the tie counts.
"""

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AnalysisError
from .runner import ResultsTable
from .svgplot import heatmap, line_chart

GROUP_BY_CHOICES = ("cycle", "model", "dataset")


@dataclass
class WinRateMatrix:
    """Pairwise win rates between strategies over comparison units.

    counts[a][b] is the number of units compared for the ordered pair,
    including ties; win_counts[a][b] the units a beat b; wins the rate over
    non-tied units.  skipped[a][b] counts units dropped because the two
    strategies did not share an identical seed set.
    """

    strategies: list[str]
    win_counts: np.ndarray
    tie_counts: np.ndarray
    counts: np.ndarray
    skipped: np.ndarray

    @property
    def wins(self) -> np.ndarray:
        decided = self.counts - self.tie_counts
        with np.errstate(invalid="ignore", divide="ignore"):
            rates = np.where(decided > 0, self.win_counts / decided, np.nan)
        np.fill_diagonal(rates, np.nan)
        return rates

    def mean_win_rate(self) -> np.ndarray:
        """Per-strategy mean of its pairwise win rates against all opponents."""
        rates = self.wins
        with np.errstate(invalid="ignore"):
            return np.nanmean(rates, axis=1)


@dataclass
class TopPerformerTable:
    """Share of units each strategy wins outright, per group."""

    group_by: str
    groups: list
    strategies: list[str]
    win_counts: np.ndarray
    tie_units: np.ndarray
    skipped_units: np.ndarray

    @property
    def decided_units(self) -> np.ndarray:
        return self.win_counts.sum(axis=1)

    @property
    def shares(self) -> np.ndarray:
        decided = self.decided_units
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(
                decided[:, None] > 0, self.win_counts / decided[:, None], np.nan
            )


@dataclass(frozen=True)
class DiffPoint:
    dataset: str
    model: str
    strategy: str
    cycle: int
    mean_diff: float
    sd_diff: float
    num_seeds: int


@dataclass
class DiffCurves:
    """Paired per-seed accuracy differences (first table minus second)."""

    label_a: str
    label_b: str
    points: list[DiffPoint] = field(default_factory=list)


@dataclass(frozen=True)
class CurvePoint:
    dataset: str
    model: str
    ips: str
    strategy: str
    cycle: int
    labeled_size: int
    mean_accuracy: float
    sd_accuracy: float
    num_seeds: int


@dataclass
class AccuracyCurves:
    points: list[CurvePoint] = field(default_factory=list)


def _filter_rows(results: ResultsTable, where: dict | None):
    rows = results.rows
    if not where:
        return list(rows)
    return [
        row
        for row in rows
        if all(getattr(row, column) == value for column, value in where.items())
    ]


def _unit_accuracies(rows):
    """unit (dataset, model, cycle) -> strategy -> {seed: accuracy}."""
    units = defaultdict(lambda: defaultdict(dict))
    for row in rows:
        units[(row.dataset, row.model, row.cycle)][row.strategy][row.seed] = row.accuracy
    return units


def pairwise_win_rates(
    results: ResultsTable,
    where: dict | None = None,
    aggregation: str = "mean",
) -> WinRateMatrix:
    """Win rate of every strategy pair over (dataset, model, cycle) units.

    With the default "mean" aggregation, A beats B in a unit iff the mean
    over shared seeds of (acc_A - acc_B) is positive; an exact zero is a
    tie.  "majority" instead counts per-seed sign wins and lets the
    majority decide (equal counts tie).  Units where the seed sets differ
    are skipped and counted per pair.
    """
    if aggregation not in ("mean", "majority"):
        raise AnalysisError(
            f"aggregation must be 'mean' or 'majority', got {aggregation!r}"
        )
    rows = _filter_rows(results, where)
    units = _unit_accuracies(rows)
    strategies = sorted({row.strategy for row in rows})
    index = {name: i for i, name in enumerate(strategies)}
    size = len(strategies)
    win_counts = np.zeros((size, size), dtype=np.int64)
    tie_counts = np.zeros((size, size), dtype=np.int64)
    counts = np.zeros((size, size), dtype=np.int64)
    skipped = np.zeros((size, size), dtype=np.int64)

    for _, per_strategy in sorted(units.items()):
        present = sorted(set(per_strategy) & set(index))
        for pos, name_a in enumerate(present):
            for name_b in present[pos + 1 :]:
                a, b = index[name_a], index[name_b]
                seeds_a = per_strategy[name_a]
                seeds_b = per_strategy[name_b]
                if set(seeds_a) != set(seeds_b) or not seeds_a:
                    skipped[a, b] += 1
                    skipped[b, a] += 1
                    continue
                shared = sorted(seeds_a)
                diffs = [seeds_a[s] - seeds_b[s] for s in shared]
                if aggregation == "mean":
                    verdict = float(np.mean(diffs))
                else:
                    verdict = sum(d > 0 for d in diffs) - sum(d < 0 for d in diffs)
                counts[a, b] += 1
                counts[b, a] += 1
                if verdict > 0:
                    win_counts[a, b] += 1
                elif verdict < 0:
                    win_counts[b, a] += 1
                else:
                    tie_counts[a, b] += 1
                    tie_counts[b, a] += 1
    return WinRateMatrix(
        strategies=strategies,
        win_counts=win_counts,
        tie_counts=tie_counts,
        counts=counts,
        skipped=skipped,
    )


def top_performer_frequency(
    results: ResultsTable, group_by: str, where: dict | None = None
) -> TopPerformerTable:
    """Per group, the share of units each strategy wins with the highest
    seed-mean accuracy; units with a tie at the top are excluded."""
    if group_by not in GROUP_BY_CHOICES:
        raise AnalysisError(
            f"group_by must be one of {GROUP_BY_CHOICES}, got {group_by!r}"
        )
    rows = _filter_rows(results, where)
    units = _unit_accuracies(rows)
    strategies = sorted({row.strategy for row in rows})
    index = {name: i for i, name in enumerate(strategies)}

    group_of = {
        "cycle": lambda unit: unit[2],
        "model": lambda unit: unit[1],
        "dataset": lambda unit: unit[0],
    }[group_by]
    groups = sorted({group_of(unit) for unit in units})
    g_index = {group: i for i, group in enumerate(groups)}

    win_counts = np.zeros((len(groups), len(strategies)), dtype=np.int64)
    tie_units = np.zeros(len(groups), dtype=np.int64)
    skipped_units = np.zeros(len(groups), dtype=np.int64)

    for unit, per_strategy in sorted(units.items()):
        g = g_index[group_of(unit)]
        seed_sets = [frozenset(per_strategy[name]) for name in per_strategy]
        if (
            set(per_strategy) != set(strategies)
            or len(set(seed_sets)) != 1
            or not seed_sets[0]
        ):
            skipped_units[g] += 1
            continue
        means = {
            name: float(np.mean(list(per_strategy[name].values())))
            for name in strategies
        }
        best = max(means.values())
        winners = [name for name in strategies if means[name] == best]
        if len(winners) > 1:
            tie_units[g] += 1
            continue
        win_counts[g, index[winners[0]]] += 1
    return TopPerformerTable(
        group_by=group_by,
        groups=groups,
        strategies=strategies,
        win_counts=win_counts,
        tie_units=tie_units,
        skipped_units=skipped_units,
    )


def ips_difference_curves(
    results_a: ResultsTable,
    results_b: ResultsTable,
    label_a: str = "typiclust",
    label_b: str = "random",
) -> DiffCurves:
    """Mean and sd of per-seed accuracy differences (table A minus table B),
    per (dataset, model, strategy, cycle).  Seeds must pair exactly."""

    def keyed(results):
        table = defaultdict(dict)
        for row in results.rows:
            table[(row.dataset, row.model, row.strategy, row.cycle)][row.seed] = (
                row.accuracy
            )
        return table

    table_a, table_b = keyed(results_a), keyed(results_b)
    missing = []
    for key in sorted(set(table_a) | set(table_b)):
        seeds_a = set(table_a.get(key, {}))
        seeds_b = set(table_b.get(key, {}))
        if seeds_a != seeds_b:
            missing.append((key, sorted(seeds_a ^ seeds_b)))
    if missing:
        raise AnalysisError(f"unpaired seeds for keys: {missing[:10]}")

    curves = DiffCurves(label_a=label_a, label_b=label_b)
    for key in sorted(table_a):
        dataset, model, strategy, cycle = key
        seeds = sorted(table_a[key])
        diffs = np.array([table_a[key][s] - table_b[key][s] for s in seeds])
        curves.points.append(
            DiffPoint(
                dataset=dataset,
                model=model,
                strategy=strategy,
                cycle=cycle,
                mean_diff=float(diffs.mean()),
                sd_diff=float(diffs.std()),
                num_seeds=len(seeds),
            )
        )
    return curves


def accuracy_curves(results: ResultsTable, where: dict | None = None) -> AccuracyCurves:
    """Seed-mean accuracy (and sd) per (dataset, model, ips, strategy, cycle)."""
    rows = _filter_rows(results, where)
    grouped = defaultdict(list)
    for row in rows:
        grouped[(row.dataset, row.model, row.ips, row.strategy, row.cycle)].append(row)
    curves = AccuracyCurves()
    for key in sorted(grouped):
        members = grouped[key]
        accs = np.array([row.accuracy for row in members])
        curves.points.append(
            CurvePoint(
                dataset=key[0],
                model=key[1],
                ips=key[2],
                strategy=key[3],
                cycle=key[4],
                labeled_size=members[0].labeled_size,
                mean_accuracy=float(accs.mean()),
                sd_accuracy=float(accs.std()),
                num_seeds=len(members),
            )
        )
    return curves


def _csv_text(header, records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow(
            [repr(v) if isinstance(v, float) else v for v in record]
        )
    return buf.getvalue()


def win_rate_csv(matrix: WinRateMatrix) -> str:
    rates = matrix.wins
    records = []
    for i, a in enumerate(matrix.strategies):
        for j, b in enumerate(matrix.strategies):
            if i == j:
                continue
            rate = rates[i, j]
            records.append(
                (
                    a,
                    b,
                    repr(float(rate)) if not np.isnan(rate) else "",
                    int(matrix.win_counts[i, j]),
                    int(matrix.tie_counts[i, j]),
                    int(matrix.counts[i, j]),
                    int(matrix.skipped[i, j]),
                )
            )
    return _csv_text(
        ("strategy", "opponent", "win_rate", "win_count", "tie_count", "count", "skipped"),
        records,
    )


def top_performer_csv(table: TopPerformerTable) -> str:
    shares = table.shares
    records = []
    for gi, group in enumerate(table.groups):
        for si, strategy in enumerate(table.strategies):
            share = shares[gi, si]
            records.append(
                (
                    group,
                    strategy,
                    repr(float(share)) if not np.isnan(share) else "",
                    int(table.win_counts[gi, si]),
                    int(table.decided_units[gi]),
                    int(table.tie_units[gi]),
                    int(table.skipped_units[gi]),
                )
            )
    return _csv_text(
        (table.group_by, "strategy", "share", "win_count", "decided_units",
         "tie_units", "skipped_units"),
        records,
    )


def diff_curves_csv(curves: DiffCurves) -> str:
    records = [
        (p.dataset, p.model, p.strategy, p.cycle, p.mean_diff, p.sd_diff, p.num_seeds)
        for p in curves.points
    ]
    return _csv_text(
        ("dataset", "model", "strategy", "cycle", "mean_diff", "sd_diff", "num_seeds"),
        records,
    )


def accuracy_curves_csv(curves: AccuracyCurves) -> str:
    records = [
        (
            p.dataset, p.model, p.ips, p.strategy, p.cycle, p.labeled_size,
            p.mean_accuracy, p.sd_accuracy, p.num_seeds,
        )
        for p in curves.points
    ]
    return _csv_text(
        ("dataset", "model", "ips", "strategy", "cycle", "labeled_size",
         "mean_accuracy", "sd_accuracy", "num_seeds"),
        records,
    )


def render_report(analyses: dict, out_dir, provenance: dict | None = None) -> list[Path]:
    """Write each analysis as CSV plus an SVG chart, and an index.json.

    `analyses` maps artifact names to WinRateMatrix, TopPerformerTable,
    DiffCurves, or AccuracyCurves instances.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    index = []

    for name in sorted(analyses):
        obj = analyses[name]
        files = []
        if isinstance(obj, WinRateMatrix):
            csv_text, svg_text = win_rate_csv(obj), _win_rate_svg(name, obj)
        elif isinstance(obj, TopPerformerTable):
            csv_text, svg_text = top_performer_csv(obj), _top_performer_svg(name, obj)
        elif isinstance(obj, DiffCurves):
            csv_text, svg_text = diff_curves_csv(obj), _diff_curves_svg(name, obj)
        elif isinstance(obj, AccuracyCurves):
            csv_text, svg_text = accuracy_curves_csv(obj), _accuracy_svg(name, obj)
        else:
            raise AnalysisError(f"cannot render analysis of type {type(obj).__name__}")
        for suffix, text in ((".csv", csv_text), (".svg", svg_text)):
            path = out / f"{name}{suffix}"
            path.write_text(text, encoding="utf-8")
            files.append(path.name)
            written.append(path)
        index.append({"name": name, "type": type(obj).__name__, "files": files})

    index_path = out / "index.json"
    index_path.write_text(
        json.dumps(
            {"artifacts": index, "provenance": provenance or {}},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(index_path)
    return written


def _win_rate_svg(name: str, matrix: WinRateMatrix) -> str:
    rates = matrix.wins
    cells = [
        [None if np.isnan(rates[i, j]) else float(rates[i, j])
         for j in range(len(matrix.strategies))]
        for i in range(len(matrix.strategies))
    ]
    return heatmap(
        cells, matrix.strategies, matrix.strategies, name, diverging=True
    )


def _top_performer_svg(name: str, table: TopPerformerTable) -> str:
    shares = table.shares
    cells = [
        [None if np.isnan(shares[gi, si]) else float(shares[gi, si])
         for si in range(len(table.strategies))]
        for gi in range(len(table.groups))
    ]
    return heatmap(
        cells, [str(g) for g in table.groups], table.strategies, name
    )


def _diff_curves_svg(name: str, curves: DiffCurves) -> str:
    grouped = defaultdict(list)
    for p in curves.points:
        grouped[(p.dataset, p.model, p.strategy)].append(p)
    series = []
    for key in sorted(grouped):
        points = sorted(grouped[key], key=lambda p: p.cycle)
        series.append(
            ("/".join(key), [p.cycle for p in points], [p.mean_diff for p in points])
        )
    return line_chart(
        series, name, "cycle", f"accuracy diff ({curves.label_a} - {curves.label_b})"
    )


def _accuracy_svg(name: str, curves: AccuracyCurves) -> str:
    grouped = defaultdict(list)
    for p in curves.points:
        grouped[(p.dataset, p.model, p.ips, p.strategy)].append(p)
    series = []
    for key in sorted(grouped):
        points = sorted(grouped[key], key=lambda p: p.cycle)
        series.append(
            ("/".join(key), [p.cycle for p in points], [p.mean_accuracy for p in points])
        )
    return line_chart(series, name, "cycle", "test accuracy")
