"""Causal pre-selection: iterative conditional-independence filtering.

Starting from every lagged candidate with significant unconditional
dependence on the target, the algorithm tests each surviving candidate
against condition sets of growing size drawn from the other survivors and
drops candidates whose conditional dependence vanishes. Condition sets
are built from the strongest-scoring survivors first, so the estimation
dimension stays as low as the graph allows.

Semantics of one level-``n`` sweep: the candidate pool, its scores, and
hence every candidate's condition sets are frozen at the start of the
sweep. A candidate stops being tested at its first non-significant test,
but remains eligible as a condition for the other candidates until the
end of the sweep, when removals and score updates are applied. This makes
the outcome independent of the order in which candidates are processed,
so tests within a sweep may run concurrently.

Condition-set choice per tested candidate: the first combination is the
candidate's likeliest explaining set, the ``n`` survivors most correlated
with it among those at lags at least its own (a spurious candidate is a
proxy of drivers that precede it, and only conditioning on those drivers
severs its link to the target). The remaining combinations are the
lexicographically first ones over the survivors sorted by descending
test value, i.e. built from the strongest conditions.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    AlgorithmConfig,
    CostCounter,
    EstimatorConfig,
    FixedThreshold,
    LaggedVariable,
    PredictionTask,
    PredictorSet,
    ShuffleSignificance,
    TimeSeriesPanel,
    design_matrix,
    valid_target_times,
)
from .infotheory import estimate_cmi, shuffle_test

__all__ = ["IterationRecord", "PreselectionResult", "preselect", "write_iteration_log"]


@dataclass(frozen=True)
class IterationRecord:
    """One conditional-independence test: condition size ``n`` (0 at the
    unconditional initialization), combination index ``i``, the tested
    candidate, its condition set, the estimated value and whether the
    candidate was removed by this test."""

    n: int
    i: int
    candidate: LaggedVariable
    conditions: tuple[LaggedVariable, ...]
    cmi: float
    removed: bool


@dataclass(frozen=True)
class PreselectionResult:
    """Surviving causal predictors with their final test values, the full
    test log and the accumulated estimation cost."""

    predictors: PredictorSet
    iteration_log: tuple[IterationRecord, ...]
    cost: CostCounter
    converged: bool


def _seed_for(rng_seed: int, n: int, cand: LaggedVariable, i: int) -> int:
    seq = np.random.SeedSequence([rng_seed, n + 1, cand.var, cand.lag, i])
    return int(seq.generate_state(1)[0])


def preselect(panel: TimeSeriesPanel,
              task: PredictionTask,
              est: EstimatorConfig,
              algo: AlgorithmConfig,
              rng_seed: int = 0) -> PreselectionResult:
    """Estimate the causal predictors of the target.

    Parameters
    ----------
    panel : TimeSeriesPanel
        Learning data (standardize it first; see core module notes).
    task : PredictionTask
    est : EstimatorConfig
        ``k_algo`` neighbors are used in every test.
    algo : AlgorithmConfig
        Condition-set sizes ``n0..n_max``, combination cap ``n_i`` and the
        significance rule, applied identically to the unconditional
        initialization and all conditional tests.
    rng_seed : int
        Drives the shuffle surrogates (unused with a fixed threshold).

    Returns
    -------
    PreselectionResult
        Predictors ordered by descending final test value.

    Raises
    ------
    ValueError
        If the panel is too short to align ``k_algo`` + 1 samples.
    """
    times = valid_target_times(panel, task)
    if len(times) <= est.k_algo:
        raise ValueError(
            f"panel too short: {len(times)} aligned samples for k_algo={est.k_algo}"
        )
    k = est.k_algo
    rule = algo.significance
    candidates = task.candidate_grid(panel.N)
    y = panel.values[np.asarray(times), task.target][:, None]
    col_cache: dict[LaggedVariable, np.ndarray] = {}

    def col(lv: LaggedVariable) -> np.ndarray:
        if lv not in col_cache:
            x, _, _ = design_matrix(panel, [lv], task, times)
            col_cache[lv] = x
        return col_cache[lv]

    cost = CostCounter()
    log: list[IterationRecord] = []

    def test(cand: LaggedVariable, conds: tuple[LaggedVariable, ...],
             n: int, i: int) -> tuple[float, bool]:
        z = np.hstack([col(c) for c in conds]) if conds else None
        if isinstance(rule, FixedThreshold):
            res = estimate_cmi(col(cand), y, z, k)
            cost.add(*res.dims)
            return res.value, res.value > rule.i_star
        assert isinstance(rule, ShuffleSignificance)
        sh = shuffle_test(col(cand), y, z, k, rule.m, rule.alpha,
                          rng_seed=_seed_for(rng_seed, n, cand, i))
        d_z = len(conds)
        cost.add(1, 1, d_z)
        for _ in range(rule.m):
            cost.add(1, 1, d_z)
        return sh.observed, sh.significant

    # unconditional initialization (logged as condition size 0)
    scores: dict[LaggedVariable, float] = {}
    survivors: list[LaggedVariable] = []
    for cand in candidates:
        value, significant = test(cand, (), 0, 0)
        log.append(IterationRecord(0, 0, cand, (), value, not significant))
        if significant:
            survivors.append(cand)
            scores[cand] = value

    def pool_order() -> list[LaggedVariable]:
        return sorted(survivors, key=lambda c: (-scores[c], c))

    corr_gate = 3.0 / np.sqrt(len(times))

    def condition_sets(cand: LaggedVariable, others: list[LaggedVariable],
                       n: int) -> list[tuple[LaggedVariable, ...]]:
        combos: list[tuple[LaggedVariable, ...]] = []
        preceding = [c for c in others if c.lag >= cand.lag]
        if len(preceding) >= n:
            xs = col(cand)[:, 0]
            assoc = {
                c: abs(float(np.corrcoef(xs, col(c)[:, 0])[0, 1]))
                for c in preceding
            }
            strongest = sorted(preceding, key=lambda c: (-assoc[c], c))[:n]
            # only worth a test when the association is clearly above
            # sampling noise; chance correlations are ~1/sqrt(S)
            if assoc[strongest[-1]] > corr_gate:
                combos.append(tuple(sorted(strongest)))
        seen = {frozenset(c) for c in combos}
        for conds in itertools.combinations(others, n):
            if len(combos) >= algo.n_i:
                break
            if frozenset(conds) not in seen:
                combos.append(conds)
        return combos[: algo.n_i]

    def sweep(n: int) -> None:
        """Test every survivor against its first n_i condition sets of
        size n; apply removals and score updates at the end."""
        nonlocal survivors
        pool = pool_order()
        removed: set[LaggedVariable] = set()
        new_scores = dict(scores)
        for cand in pool:
            others = [c for c in pool if c != cand]
            if len(others) < n:
                continue
            for i, conds in enumerate(condition_sets(cand, others, n)):
                value, significant = test(cand, conds, n, i)
                new_scores[cand] = value
                log.append(IterationRecord(n, i, cand, conds, value, not significant))
                if not significant:
                    removed.add(cand)
                    break
        survivors = [c for c in pool if c not in removed]
        scores.clear()
        scores.update({c: new_scores[c] for c in survivors})

    n = algo.n0
    converged = False
    while True:
        if len(survivors) <= n:
            converged = True
            break
        if n > algo.n_max:
            break
        sweep(n)
        n += 1

    if converged and algo.n0 > 1:
        # condition sizes below n0 were skipped on the way in
        for n_small in range(min(algo.n0 - 1, len(survivors) - 1), 0, -1):
            if len(survivors) <= n_small:
                continue
            sweep(n_small)

    ordered = pool_order()
    predictors = PredictorSet(
        tuple(ordered), tuple(scores[c] for c in ordered)
    )
    return PreselectionResult(
        predictors=predictors,
        iteration_log=tuple(log),
        cost=cost,
        converged=converged,
    )


def write_iteration_log(result: PreselectionResult, path,
                        names=None) -> None:
    """Export the test log as CSV (n, i, var, lag, condition_vars, cmi, removed)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "i", "var", "lag", "condition_vars", "cmi", "removed"])
        for rec in result.iteration_log:
            conds = ";".join(c.label(names) for c in rec.conditions)
            writer.writerow([
                rec.n, rec.i, rec.candidate.var, rec.candidate.lag,
                conds, repr(rec.cmi), int(rec.removed),
            ])
