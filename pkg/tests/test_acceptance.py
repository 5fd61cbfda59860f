"""Acceptance suite: one test per release criterion, with stated tolerances.

Each test prints a PASS line (visible with `pytest -s` or `-rA`) after its
assertions hold, including the measured runtime where the criterion bounds it.
"""

import itertools
import json
import time

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from alforge.cli import main as cli_main
from alforge.dataset import load_dataset
from alforge.ips import kcenter_greedy
from alforge.probe import FitConfig, ProbeParams, loss_and_grad, predict_proba
from alforge.query import (
    StrategyParams,
    badge_gradient_embeddings,
    query_probcover,
    score_entropy,
    score_margin,
    top_k_largest,
    top_k_smallest,
)
from alforge.runner import ExperimentConfig, derive_batch_size, run_experiment
from alforge.analysis import pairwise_win_rates
from alforge.runner import ResultRow, ResultsTable
from helpers import make_ctx, make_dataset, probcover_oracle

REFERENCE_BUDGETS = (1000, 5000, 500, 3500, 4000, 4500, 500, 1000, 3000, 2500)


def _report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


def test_gradient_suite_vs_central_differences():
    started = time.perf_counter()
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 31))
        dim = int(rng.integers(1, 9))
        num_classes = int(rng.integers(2, 6))
        features = rng.normal(size=(n, dim))
        labels = rng.integers(0, num_classes, size=n)
        params = ProbeParams(
            rng.normal(size=(num_classes, dim)), rng.normal(size=num_classes)
        )
        cfg = FitConfig(l2_inverse_strength=float(rng.uniform(0.5, 2.0)))
        _, grad_w, grad_b = loss_and_grad(params, features, labels, cfg)

        h = 1e-5
        flat = np.concatenate([grad_w.ravel(), grad_b])
        for position in range(flat.size):
            w_plus = params.weights.copy()
            b_plus = params.bias.copy()
            w_minus = params.weights.copy()
            b_minus = params.bias.copy()
            if position < grad_w.size:
                i, j = divmod(position, dim)
                w_plus[i, j] += h
                w_minus[i, j] -= h
            else:
                i = position - grad_w.size
                b_plus[i] += h
                b_minus[i] -= h
            up = loss_and_grad(ProbeParams(w_plus, b_plus), features, labels, cfg)[0]
            down = loss_and_grad(ProbeParams(w_minus, b_minus), features, labels, cfg)[0]
            numeric = (up - down) / (2 * h)
            rel = abs(numeric - flat[position]) / max(abs(numeric), 1e-12)
            worst = max(worst, rel)
        assert worst < 1e-5
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    _report(
        "gradient suite",
        f"50 instances, max relative error {worst:.2e} < 1e-5, {elapsed:.1f}s < 10s",
    )


def test_oracle_equivalence_greedy_and_ranking():
    started = time.perf_counter()
    rng = np.random.default_rng(7070)

    for trial in range(200):
        n = int(rng.integers(4, 51))
        points = rng.normal(size=(n, int(rng.integers(1, 4))))
        num_centers = int(rng.integers(1, n - 1))
        centers = rng.choice(n, size=num_centers, replace=False)
        k = int(rng.integers(1, n - num_centers + 1))
        picks = kcenter_greedy(points, centers, k, np.random.default_rng(trial))
        assert picks.tolist() == _kcenter_oracle(points, centers, k), f"kcenter {trial}"

    for trial in range(200):
        n = int(rng.integers(4, 51))
        points = rng.normal(size=(n, 2))
        labeled = rng.choice(n, size=int(rng.integers(0, n // 2 + 1)), replace=False)
        b = int(rng.integers(1, n - len(labeled) + 1))
        delta = float(rng.uniform(0.3, 2.5))
        dataset = make_dataset(points, rng.integers(0, 2, n), 2)
        ctx = make_ctx(
            dataset, labeled, ProbeParams(np.zeros((2, points.shape[1])), np.zeros(2)),
            b, params=StrategyParams(probcover_delta=delta),
        )
        picks = query_probcover(ctx, normalize=False)
        assert picks.tolist() == probcover_oracle(points, delta, labeled, b), (
            f"probcover {trial}"
        )

    for trial in range(200):
        n = int(rng.integers(2, 51))
        probs = rng.dirichlet(np.ones(int(rng.integers(2, 6))), size=n)
        b = int(rng.integers(1, n + 1))
        entropy = score_entropy(probs)
        margin = score_margin(probs)
        assert top_k_largest(entropy, b).tolist() == sorted(
            range(n), key=lambda i: (-entropy[i], i)
        )[:b], f"entropy {trial}"
        assert top_k_smallest(margin, b).tolist() == sorted(
            range(n), key=lambda i: (margin[i], i)
        )[:b], f"margin {trial}"

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    _report(
        "oracle equivalence",
        f"kcenter/probcover/entropy/margin exact on 200 instances each, "
        f"{elapsed:.1f}s < 30s",
    )


def _kcenter_oracle(points, centers, k):
    chosen = list(centers)
    picks = []
    candidates = [i for i in range(len(points)) if i not in set(centers)]
    for _ in range(k):
        best, best_dist = None, -1.0
        for i in candidates:
            if i in picks:
                continue
            dist = min(
                float(((points[i] - points[c]) ** 2).sum()) for c in chosen
            )
            if dist > best_dist:
                best, best_dist = i, dist
        picks.append(best)
        chosen.append(best)
    return picks


def test_badge_identity_against_analytic_gradient():
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        num_classes = int(rng.integers(2, 6))
        probe = ProbeParams(
            rng.normal(size=(num_classes, dim)), rng.normal(size=num_classes)
        )
        x = rng.normal(size=(1, dim))
        hypothetical = int(predict_proba(probe, x).argmax())

        row = badge_gradient_embeddings(probe, x)[0].reshape(num_classes, dim)
        cfg = FitConfig(l2_inverse_strength=1.0)
        _, grad_w, _ = loss_and_grad(probe, x, np.array([hypothetical]), cfg)
        analytic = grad_w - probe.weights / (cfg.l2_inverse_strength * 1.0)

        denom = max(float(np.abs(analytic).max()), 1e-12)
        rel = float(np.abs(row - analytic).max()) / denom
        worst = max(worst, rel)
        assert rel < 1e-6
    _report("badge identity", f"100 probes, max relative deviation {worst:.2e} < 1e-6")


def test_budget_arithmetic_reference_budgets():
    for budget in REFERENCE_BUDGETS:
        init, batch = derive_batch_size(budget, 20)
        assert init + 20 * batch == budget
        assert init >= batch >= 1
    _report(
        "budget arithmetic",
        f"init + 20*batch == budget exactly for budgets {sorted(set(REFERENCE_BUDGETS))}",
    )


def _strip_wall_ms(csv_text: str) -> str:
    lines = csv_text.strip().splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


def test_determinism_of_cli_runs(tiny_dataset_dir, tmp_path):
    outputs = []
    for label, parallelism in (("a", 1), ("b", 1), ("c", 8)):
        out_dir = tmp_path / label
        config_path = tmp_path / f"{label}.json"
        config_path.write_text(
            json.dumps(
                {
                    "datasets": [str(tiny_dataset_dir)],
                    "strategies": ["random", "margin", "badge"],
                    "ips": ["random"],
                    "seeds": [0, 1],
                    "cycles": 2,
                    "parallelism": parallelism,
                    "output_dir": str(out_dir),
                    "overrides": {str(tiny_dataset_dir): {"budget": 15}},
                }
            )
        )
        assert cli_main(["run", "--config", str(config_path)]) == 0
        outputs.append(_strip_wall_ms((out_dir / "results.csv").read_text()))
    assert outputs[0] == outputs[1] == outputs[2]
    _report(
        "determinism",
        "two reruns and parallelism 1 vs 8 byte-identical minus wall-time column",
    )


def test_trend_uncertainty_beats_random(blob4_dir):
    started = time.perf_counter()
    dataset = load_dataset(blob4_dir)
    finals = {}
    for strategy in ("margin", "random"):
        cfg = ExperimentConfig(
            dataset_path=blob4_dir, strategy=strategy, cycles=20,
            seeds=(0, 1, 2, 3, 4),
        )
        table = run_experiment(cfg, dataset)
        assert not table.errors, table.errors
        finals[strategy] = {
            row.seed: row.accuracy for row in table.rows if row.cycle == 20
        }
    wins = sum(finals["margin"][s] >= finals["random"][s] for s in range(5))
    elapsed = time.perf_counter() - started
    assert wins >= 4, (finals, wins)
    assert elapsed < 120.0
    _report(
        "trend A (margin vs random)",
        f"margin >= random at final cycle in {wins}/5 seeds, {elapsed:.1f}s < 120s",
    )


def test_trend_informed_initial_pool_early_advantage(blob8_dir):
    started = time.perf_counter()
    dataset = load_dataset(blob8_dir)
    acc = {}
    for ips_strategy in ("typiclust", "random"):
        cfg = ExperimentConfig(
            dataset_path=blob8_dir, strategy="random", ips_strategy=ips_strategy,
            cycles=20, seeds=(0, 1, 2, 3, 4),
        )
        table = run_experiment(cfg, dataset)
        assert not table.errors, table.errors
        acc[ips_strategy] = {
            (row.seed, row.cycle): row.accuracy for row in table.rows
        }
    diffs_start = [
        acc["typiclust"][(seed, 0)] - acc["random"][(seed, 0)] for seed in range(5)
    ]
    diffs_late = [
        acc["typiclust"][(seed, 15)] - acc["random"][(seed, 15)] for seed in range(5)
    ]
    start_advantage = float(np.mean(diffs_start))
    late_gap = float(np.mean(diffs_late))
    elapsed = time.perf_counter() - started
    assert start_advantage >= 0.02, diffs_start
    assert abs(late_gap) <= 0.02, diffs_late
    assert elapsed < 120.0
    _report(
        "trend B (informed initial pool)",
        f"cycle-0 advantage {start_advantage:+.3f} >= 0.02, cycle-15 gap "
        f"{late_gap:+.4f} within +-0.02, {elapsed:.1f}s < 120s",
    )


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_win_rate_algebra_on_fuzzed_tables(data):
    strategies = [f"s{i}" for i in range(data.draw(st.integers(2, 4)))]
    cycles = range(data.draw(st.integers(1, 3)))
    seeds = range(data.draw(st.integers(1, 3)))
    datasets = [f"d{i}" for i in range(data.draw(st.integers(1, 2)))]
    rows = []
    for dataset, strategy, cycle, seed in itertools.product(
        datasets, strategies, cycles, seeds
    ):
        accuracy = data.draw(st.sampled_from([0.0, 0.2, 0.5, 0.5, 0.8, 1.0]))
        rows.append(
            ResultRow(dataset, "m", "random", strategy, seed, cycle, 10, accuracy, 0)
        )
    matrix = pairwise_win_rates(ResultsTable(rows=rows))
    size = len(matrix.strategies)
    for i in range(size):
        for j in range(size):
            if i == j:
                continue
            assert (
                matrix.win_counts[i, j]
                + matrix.win_counts[j, i]
                + matrix.tie_counts[i, j]
                == matrix.counts[i, j]
            )
            assert matrix.counts[i, j] == matrix.counts[j, i]
            assert matrix.tie_counts[i, j] == matrix.tie_counts[j, i]
            decided = matrix.counts[i, j] - matrix.tie_counts[i, j]
            if decided > 0:
                total = matrix.wins[i, j] + matrix.wins[j, i]
                assert abs(total - 1.0) < 1e-12


def test_win_rate_algebra_pass_line():
    _report(
        "win-rate algebra",
        "complementarity and tie-count identities exact on fuzzed tables",
    )
