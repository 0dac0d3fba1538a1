"""Self-checks of the fast metric and alignment paths against brute-force oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import align, edit_distance
from .metrics import auc_nt, auc_pr, auc_roc, youden_stats
from .synth import oracle_auc_roc, oracle_levenshtein, oracle_youden_grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_scores(rng: np.random.Generator, n: int, decimals: int | None = None):
    """Random confidences with both classes present, optionally rounded (to force ties)."""
    conf = rng.random(n)
    if decimals is not None:
        conf = np.round(conf, decimals)
    correct = rng.random(n) < rng.uniform(0.2, 0.9)
    correct[0], correct[1] = True, False
    return conf, correct


def check_auc_roc(rng, n_datasets: int = 100, max_n: int = 200) -> CheckResult:
    worst = 0.0
    for k in range(n_datasets):
        n = int(rng.integers(2, max_n + 1))
        conf, correct = random_scores(rng, n, decimals=2 if k % 2 else None)
        fast = auc_roc((conf, correct))
        slow = oracle_auc_roc(conf.tolist(), correct.tolist())
        worst = max(worst, abs(fast - slow))
    return CheckResult("auc_roc == pairwise oracle", worst == 0.0, f"max |diff| = {worst:.3g} over {n_datasets} sets")


def check_auc_nt_identity(rng, n_datasets: int = 100, max_n: int = 200) -> CheckResult:
    worst = 0.0
    for k in range(n_datasets):
        n = int(rng.integers(2, max_n + 1))
        conf, correct = random_scores(rng, n, decimals=2 if k % 2 else None)
        worst = max(worst, abs(auc_nt((conf, correct)) - auc_pr((1.0 - conf, ~correct))))
    return CheckResult("auc_nt == auc_pr(flipped)", worst == 0.0, f"max |diff| = {worst:.3g} over {n_datasets} sets")


def check_levenshtein(rng, n_pairs: int = 500, max_len: int = 8) -> CheckResult:
    alphabet = list("abcd")
    failures = 0
    for _ in range(n_pairs):
        hyp = list(rng.choice(alphabet, size=int(rng.integers(0, max_len + 1))))
        ref = list(rng.choice(alphabet, size=int(rng.integers(0, max_len + 1))))
        failures += edit_distance(align(hyp, ref)) != oracle_levenshtein(hyp, ref)
    return CheckResult("align distance == recursive oracle", failures == 0, f"{failures} mismatches in {n_pairs} pairs")


def check_youden(rng, n_datasets: int = 20, max_n: int = 200, tol: float = 1e-3) -> CheckResult:
    worst_area = worst_std = worst_max = 0.0
    for _ in range(n_datasets):
        n = int(rng.integers(2, max_n + 1))
        # Scores on a 1e-3 lattice so every constant piece of J contains grid points.
        conf, correct = random_scores(rng, n, decimals=3)
        exact = youden_stats((conf, correct))
        grid = oracle_youden_grid(conf, correct)
        worst_area = max(worst_area, abs(exact[0] - grid[0]))
        worst_max = max(worst_max, abs(exact[1] - grid[1]))
        worst_std = max(worst_std, abs(exact[2] - grid[2]))
    ok = worst_area <= tol and worst_std <= tol and worst_max == 0.0
    return CheckResult(
        "youden stats == 1e5-point grid",
        ok,
        f"auc {worst_area:.2e}, std {worst_std:.2e}, max {worst_max:.2e}",
    )


def run_all(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check_auc_roc(rng), check_auc_nt_identity(rng), check_levenshtein(rng), check_youden(rng)]
