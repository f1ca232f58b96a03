"""Predictor-selection schemes, cutoff criteria and cost accounting.

Four schemes are implemented:

* ``mi_rank``: rank all lagged candidates by mutual information with the
  target;
* ``cmi_forward``: greedy forward selection, adding at each step the
  candidate with maximal conditional MI given the already-chosen set;
* ``causal_cmi_forward``: the same forward selection restricted to the
  causally pre-selected predictors;
* ``optimal``: exhaustive search over all nonempty subsets of the causal
  predictors, scored by estimated multivariate mutual information. The
  estimator's negative bias in higher dimensions acts as the penalty that
  keeps the maximizing subset small.

The number of predictors actually used is fixed by a cutoff criterion:
the lambda heuristic on ranked scores or gains, the global MMI maximum,
or m-fold cross-validation treating the predictor count as the single
tuning parameter (the identity of the set at each count is fixed
beforehand: ranking prefixes, or the per-cardinality MMI maximizer).

Every (C)MI estimate contributes its dimension total D_X + D_Y + D_Z to a
cost counter; :func:`complexity_formulas` gives the closed-form totals
the counters reach on full runs.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .causal import preselect
from .core import (
    AlgorithmConfig,
    CostCounter,
    CrossValidationCutoff,
    EstimatorConfig,
    HeuristicCutoff,
    LaggedVariable,
    MmiMaxCutoff,
    MmiMaxPlusCvCutoff,
    PredictionTask,
    PredictorSet,
    SchemeConfig,
    TimeSeriesPanel,
    design_matrix,
    valid_target_times,
)
from .forecast import knn_predict
from .infotheory import estimate_cmi

__all__ = [
    "SelectionResult",
    "rank_mi",
    "forward_cmi",
    "heuristic_cutoff",
    "optimal_subsets",
    "cross_validate_p",
    "run_scheme",
    "complexity_formulas",
    "write_selection_csv",
    "ranked_entry_items",
]


def ranked_entry_items(item) -> tuple[LaggedVariable, ...]:
    """A ranked entry holds one lagged variable (ranking schemes) or a
    subset of them (optimal scheme); normalize to a tuple of variables."""
    if isinstance(item, LaggedVariable):
        return (item,)
    return tuple(LaggedVariable(*v) for v in item)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection scheme.

    ``ranked`` holds, in selection order, ``(item, score)`` pairs: the
    candidate and its MI for ``mi_rank``, the picked candidate and its
    conditional-MI gain for the forward schemes, and the best subset per
    cardinality with its MMI for the optimal scheme. ``chosen_p`` and
    ``chosen_set`` are filled once a cutoff criterion has been applied
    (the optimal scheme fills them immediately with the global MMI
    maximum). ``preselected`` carries the causal pre-selection output for
    the causal schemes.
    """

    scheme: str
    ranked: tuple
    chosen_p: int | None
    chosen_set: PredictorSet | None
    cv_errors: tuple[tuple[int, float], ...] | None
    cost: CostCounter
    preselected: PredictorSet | None = None

    def set_at(self, p: int) -> tuple[LaggedVariable, ...]:
        """The scheme's predictor set of size ``p``: the ranking prefix,
        or the best subset of that cardinality for the optimal scheme."""
        if not 1 <= p <= len(self.ranked):
            raise ValueError(f"p={p} outside 1..{len(self.ranked)}")
        if self.scheme == "optimal":
            return tuple(self.ranked[p - 1][0])
        return tuple(item for item, _ in self.ranked[:p])

    def max_p(self) -> int:
        return len(self.ranked)


def _aligned_columns(panel, task, variables, times):
    x, _, _ = design_matrix(panel, variables, task, times)
    return x


def rank_mi(panel: TimeSeriesPanel,
            task: PredictionTask,
            est: EstimatorConfig,
            candidates: Sequence[LaggedVariable]) -> SelectionResult:
    """Rank every candidate by its estimated MI with the target."""
    candidates = [LaggedVariable(*c) for c in candidates]
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    times = valid_target_times(panel, task)
    y = panel.values[np.asarray(times), task.target][:, None]
    cost = CostCounter()
    scored = []
    for cand in candidates:
        res = estimate_cmi(_aligned_columns(panel, task, [cand], times), y,
                           None, est.k_cmi_mmi)
        cost.add(*res.dims)
        scored.append((cand, res.value))
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return SelectionResult(
        scheme="mi_rank",
        ranked=tuple(scored),
        chosen_p=None,
        chosen_set=None,
        cv_errors=None,
        cost=cost,
    )


def forward_cmi(panel: TimeSeriesPanel,
                task: PredictionTask,
                est: EstimatorConfig,
                candidates: Sequence[LaggedVariable],
                p_max: int,
                scheme: str = "cmi_forward") -> SelectionResult:
    """Greedy forward selection by conditional-MI gain.

    The first pick maximizes the MI with the target; each later step
    estimates, for every remaining candidate, the conditional MI given
    the already-chosen set and picks the maximum. The recorded score of
    each step is that gain, so the cumulative sums telescope to the
    multivariate MI of the chosen prefix.
    """
    candidates = sorted(LaggedVariable(*c) for c in candidates)
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if p_max > len(candidates):
        warnings.warn(
            f"p_max={p_max} exceeds {len(candidates)} candidates; truncating",
            stacklevel=2,
        )
        p_max = len(candidates)
    times = valid_target_times(panel, task)
    y = panel.values[np.asarray(times), task.target][:, None]
    cols = {c: _aligned_columns(panel, task, [c], times) for c in candidates}
    cost = CostCounter()
    chosen: list[tuple[LaggedVariable, float]] = []
    remaining = list(candidates)
    for _ in range(p_max):
        z = (np.hstack([cols[c] for c, _ in chosen]) if chosen else None)
        best_cand, best_val = None, -np.inf
        for cand in remaining:
            res = estimate_cmi(cols[cand], y, z, est.k_cmi_mmi)
            cost.add(*res.dims)
            if res.value > best_val:
                best_cand, best_val = cand, res.value
        chosen.append((best_cand, best_val))
        remaining.remove(best_cand)
    return SelectionResult(
        scheme=scheme,
        ranked=tuple(chosen),
        chosen_p=None,
        chosen_set=None,
        cv_errors=None,
        cost=cost,
    )


def heuristic_cutoff(result: SelectionResult, lam: float) -> int:
    """Number of predictors kept by the lambda criterion.

    For ``mi_rank``, predictor q is kept while its MI exceeds ``lam``
    times the previous predictor's MI; for the forward schemes, while its
    gain exceeds ``lam`` times the information accumulated before it. The
    first predictor is always kept, and the criterion must hold
    contiguously from the top.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    if result.scheme == "optimal":
        raise ValueError("the optimal scheme uses the MMI maximum, not the lambda heuristic")
    if not result.ranked:
        raise ValueError("empty ranking")
    scores = [score for _, score in result.ranked]
    p_hat = 1
    if result.scheme == "mi_rank":
        for q in range(1, len(scores)):
            if scores[q] > lam * scores[q - 1]:
                p_hat = q + 1
            else:
                break
    else:
        cumulative = scores[0]
        for q in range(1, len(scores)):
            if scores[q] > lam * cumulative:
                p_hat = q + 1
                cumulative += scores[q]
            else:
                break
    return p_hat


def optimal_subsets(panel: TimeSeriesPanel,
                    task: PredictionTask,
                    est: EstimatorConfig,
                    causal: PredictorSet | Sequence[LaggedVariable],
                    subset_cap: int = 20) -> SelectionResult:
    """Estimate the MMI of every nonempty subset of the causal predictors.

    Returns the best subset per cardinality in ``ranked`` and the global
    MMI maximizer as the chosen set. Score ties resolve toward the
    smaller cardinality, then the lexicographically smaller subset.

    Raises
    ------
    ValueError
        If more than ``subset_cap`` causal predictors are passed; raise
        the pre-selection significance threshold to shrink the set before
        an exhaustive search.
    """
    variables = sorted(LaggedVariable(*v) for v in causal)
    if not variables:
        raise ValueError("causal predictor set must be nonempty")
    if len(variables) > subset_cap:
        raise ValueError(
            f"{len(variables)} causal predictors exceed the exhaustive-search cap "
            f"{subset_cap}; raise the pre-selection threshold to shrink the set"
        )
    from itertools import combinations

    times = valid_target_times(panel, task)
    y = panel.values[np.asarray(times), task.target][:, None]
    cols = {v: _aligned_columns(panel, task, [v], times) for v in variables}
    cost = CostCounter()
    per_p: list[tuple[tuple[LaggedVariable, ...], float]] = []
    best_global, best_val = None, -np.inf
    for p in range(1, len(variables) + 1):
        best_sub, best_sub_val = None, -np.inf
        for sub in combinations(variables, p):
            x = np.hstack([cols[v] for v in sub])
            res = estimate_cmi(x, y, None, est.k_cmi_mmi)
            cost.add(*res.dims)
            if res.value > best_sub_val:
                best_sub, best_sub_val = sub, res.value
        per_p.append((best_sub, best_sub_val))
        if best_sub_val > best_val:
            best_global, best_val = best_sub, best_sub_val
    chosen = PredictorSet(best_global, tuple([best_val] * len(best_global)))
    return SelectionResult(
        scheme="optimal",
        ranked=tuple(per_p),
        chosen_p=len(best_global),
        chosen_set=chosen,
        cv_errors=None,
        cost=cost,
    )


def cross_validate_p(panel: TimeSeriesPanel,
                     task: PredictionTask,
                     est: EstimatorConfig,
                     per_p_sets: Mapping[int, Sequence[LaggedVariable]],
                     m: int):
    """Pick the predictor count with minimal m-fold forecast error.

    The learning target times are split into ``m`` contiguous folds. Each
    fold is forecast by nearest-neighbor prediction with neighbors drawn
    only from the fold's complement, purged of every sample within
    ``tau_max + h`` steps of the fold so that no predictor window leaks
    across the boundary. The chosen count minimizes the mean SRMSE across
    folds; ties resolve toward the smaller count.

    Returns
    -------
    (p_hat, cv_errors) : (int, tuple[(p, mean SRMSE), ...])
    """
    if m < 2:
        raise ValueError("need m >= 2 folds")
    if not per_p_sets:
        raise ValueError("per_p_sets is empty")
    times = np.asarray(valid_target_times(panel, task))
    folds = [f for f in np.array_split(times, m) if f.size]
    if len(folds) < m:
        raise ValueError(f"learning segment too short for {m} folds")
    purge = task.tau_max + task.h
    errors = {p: [] for p in per_p_sets}
    for fold in folds:
        lo, hi = fold.min() - purge, fold.max() + purge
        pool = times[(times < lo) | (times > hi)]
        if pool.size < est.k_predict:
            raise ValueError(
                f"fold leaves only {pool.size} training samples for "
                f"k_predict={est.k_predict}"
            )
        for p, preds in per_p_sets.items():
            res = knn_predict(panel, panel, preds, task, est.k_predict,
                              query_times=fold, learn_times=pool)
            errors[p].append(res.srmse)
    cv_errors = tuple(
        (p, float(np.mean(errors[p]))) for p in sorted(per_p_sets)
    )
    p_hat = min(cv_errors, key=lambda pe: (pe[1], pe[0]))[0]
    return p_hat, cv_errors


def run_scheme(panel: TimeSeriesPanel,
               task: PredictionTask,
               est: EstimatorConfig,
               algo: AlgorithmConfig,
               scheme_cfg: SchemeConfig,
               rng_seed: int = 0) -> SelectionResult:
    """Run one selection scheme end to end, cutoff included.

    The non-causal schemes rank the full candidate grid; the causal
    schemes first run the pre-selection (adding its estimation cost to
    the counter) and, when more than ``p_max`` causal predictors survive,
    keep the ``p_max`` strongest by their final algorithm test value.

    ``panel`` is the learning data and should be standardized.
    """
    grid = task.candidate_grid(panel.N)
    preselected = None
    if scheme_cfg.scheme == "mi_rank":
        result = rank_mi(panel, task, est, grid)
    elif scheme_cfg.scheme == "cmi_forward":
        result = forward_cmi(panel, task, est, grid,
                             min(scheme_cfg.p_max, len(grid)))
    else:
        pres = preselect(panel, task, est, algo, rng_seed)
        preselected = pres.predictors
        if len(pres.predictors) == 0:
            raise ValueError(
                "no causal predictors survived the pre-selection; lower the "
                "significance threshold"
            )
        pool = pres.predictors
        if len(pool) > scheme_cfg.p_max:
            pool = pool.top(scheme_cfg.p_max)
        if scheme_cfg.scheme == "causal_cmi_forward":
            result = forward_cmi(panel, task, est, pool.variables, len(pool),
                                 scheme="causal_cmi_forward")
        else:
            result = optimal_subsets(panel, task, est, pool,
                                     scheme_cfg.subset_cap)
        result = replace(result, preselected=preselected,
                         cost=pres.cost.copy().merge(result.cost))

    cutoff = scheme_cfg.cutoff
    if isinstance(cutoff, HeuristicCutoff):
        p_hat = heuristic_cutoff(result, cutoff.lam)
        chosen = _as_predictor_set(result, p_hat)
        result = replace(result, chosen_p=p_hat, chosen_set=chosen)
    elif isinstance(cutoff, MmiMaxCutoff):
        pass  # optimal_subsets already chose the global maximum
    elif isinstance(cutoff, (CrossValidationCutoff, MmiMaxPlusCvCutoff)):
        p_cap = min(scheme_cfg.p_max, result.max_p())
        per_p = {p: result.set_at(p) for p in range(1, p_cap + 1)}
        p_hat, cv_errors = cross_validate_p(panel, task, est, per_p, cutoff.m)
        chosen = _as_predictor_set(result, p_hat)
        result = replace(result, chosen_p=p_hat, chosen_set=chosen,
                         cv_errors=cv_errors)
    else:
        raise ValueError(f"unsupported cutoff {cutoff!r}")
    return result


def _as_predictor_set(result: SelectionResult, p: int) -> PredictorSet:
    items = result.set_at(p)
    if result.scheme == "optimal":
        score = result.ranked[p - 1][1]
        return PredictorSet(items, tuple([score] * len(items)))
    scores = tuple(score for _, score in result.ranked[:p])
    return PredictorSet(items, scores)


def complexity_formulas(N: int, tau_max: int, p_max: int, P_size: int,
                        n0: int = 2, n_max: int = 3, n_i: int = 3,
                        t: int | None = None) -> dict[str, int | None]:
    """Closed-form dimension-weighted estimate counts of all schemes.

    Every (C)MI estimate of I(X;Y|Z) is weighted by D_X + D_Y + D_Z.
    Returned keys: ``mi`` (all-candidate MI ranking), ``cmi_forward``
    (forward selection to p_max over the full grid), ``causal_cmi``
    (forward selection ranking all P_size causal predictors), ``optimal``
    (all nonempty subsets of P_size predictors), ``algo_typical``
    (pre-selection when every candidate resolves at condition size n0),
    ``algo_worst`` (every size up to n_max exhausted) and ``cv_extra``
    (added nearest-neighbor cost of m-fold cross-validation for series
    length ``t``; None when ``t`` is not given).
    """
    if min(N, p_max, P_size) < 1 or tau_max < 0:
        raise ValueError("N, p_max, P_size must be >= 1 and tau_max >= 0")
    if not 1 <= n0 <= n_max or n_i < 1:
        raise ValueError("need 1 <= n0 <= n_max and n_i >= 1")
    grid = N * (tau_max + 1)
    if p_max > grid:
        raise ValueError(f"p_max={p_max} exceeds the candidate grid {grid}")
    return {
        "mi": 2 * grid,
        "cmi_forward": sum((grid - q) * (q + 2) for q in range(p_max)),
        "causal_cmi": sum((P_size - q) * (q + 2) for q in range(P_size)),
        "optimal": 2 ** (P_size - 1) * (P_size + 2) - 1,
        "algo_typical": grid * (2 + n_i * (2 + n0)),
        "algo_worst": grid * (2 + sum(n_i * (2 + n) for n in range(n0, n_max + 1))),
        "cv_extra": (t * t * p_max * (3 + p_max)) // 2 if t is not None else None,
    }


def write_selection_csv(result: SelectionResult, path, names=None) -> None:
    """Export a selection result as tidy CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "step", "vars", "lags", "score", "chosen", "cost"])
        chosen_items = set(result.chosen_set.variables) if result.chosen_set else set()
        for step, (item, score) in enumerate(result.ranked, start=1):
            subset = ranked_entry_items(item)
            if result.scheme == "optimal":
                flag = int(result.chosen_set is not None
                           and set(subset) == chosen_items)
            else:
                flag = int(result.chosen_p is not None and step <= result.chosen_p)
            writer.writerow([
                result.scheme,
                step,
                ";".join(str(v.var) for v in subset),
                ";".join(str(v.lag) for v in subset),
                repr(float(score)),
                flag,
                result.cost.weighted_cost,
            ])
