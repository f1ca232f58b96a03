"""Seedable generators for the benchmark model classes, with ground truth.

Three families are provided:

* a fixed 10-variable model whose target is driven linearly by four
  variables and synergetically by the product of three more, plus two
  non-causal contemporaneous aggregates of the linear drivers;
* an ensemble of randomly wired networks whose target combines a linear
  sum of five drivers with a product of three further drivers;
* an ensemble of generalized additive models with linear and quadratic
  terms (non-synergetic but nonlinear).

All generators are pure functions of their seeds: identical seeds give
bit-identical panels. Structural randomness (which variables drive what)
is drawn from a structure seed separate from the noise seed so ensembles
can fix one while varying the other. A burn-in of 100 steps is discarded
to remove autoregressive transients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import numpy as np

from .core import LaggedVariable, PredictionTask, TimeSeriesPanel, valid_target_times
from .forecast import knn_predict

__all__ = [
    "GroundTruth",
    "BURN_IN",
    "gen_fixed_model",
    "gen_synergetic_member",
    "gen_gam_member",
    "minimal_error_oracle",
    "write_ground_truth_csv",
]

BURN_IN = 100


@dataclass(frozen=True)
class GroundTruth:
    """True driver set of a synthetic member.

    ``true_drivers`` are the (var, lag) pairs entering the target's
    equation, in prediction-task coordinates (lag measured backward from
    the forecast base time). ``synergetic_drivers`` is the subset whose
    information is only accessible jointly.
    """

    true_drivers: frozenset[LaggedVariable]
    synergetic_drivers: frozenset[LaggedVariable]
    model_params: Mapping[str, float]
    structure_seed: int
    target: int = 0
    h: int = 1

    def __post_init__(self):
        td = frozenset(LaggedVariable(*v) for v in self.true_drivers)
        sd = frozenset(LaggedVariable(*v) for v in self.synergetic_drivers)
        if not sd <= td:
            raise ValueError("synergetic drivers must be a subset of the true drivers")
        object.__setattr__(self, "true_drivers", td)
        object.__setattr__(self, "synergetic_drivers", sd)
        object.__setattr__(self, "model_params", dict(self.model_params))


def gen_fixed_model(T: int, seed: int, a: float = 0.4, b: float = 2.0,
                    c: float = 0.4, sigma: float = 0.5):
    """Generate the fixed 10-variable benchmark model.

    Variables, in column order: Y, X1, X2, W1..W4, Z1..Z3. The target obeys

        Y[t+1] = c * sum_i W_i[t-1] + b * prod_i Z_i[t-1] + sigma * eta

    and the two non-causal variables aggregate pairs of the linear drivers
    contemporaneously with the forecast base time:

        X1[t] = a * (W1[t-1] + W3[t-1]) + eta,
        X2[t] = a * (W2[t-1] + W4[t-1]) + eta.

    W, Z and all noise streams are i.i.d. standard normal. The ground
    truth holds the seven (var, lag=1) drivers of Y at h=1, the three Z's
    marked synergetic.
    """
    if T <= 2:
        raise ValueError("T must exceed 2")
    rng = np.random.default_rng(seed)
    L = T + BURN_IN
    w = rng.normal(size=(L, 4))
    z = rng.normal(size=(L, 3))
    eta_y = rng.normal(size=L)
    eta_1 = rng.normal(size=L)
    eta_2 = rng.normal(size=L)
    y = sigma * eta_y
    y[2:] = c * w[:-2].sum(axis=1) + b * z[:-2].prod(axis=1) + sigma * eta_y[2:]
    x1 = eta_1.copy()
    x1[1:] = a * (w[:-1, 0] + w[:-1, 2]) + eta_1[1:]
    x2 = eta_2.copy()
    x2[1:] = a * (w[:-1, 1] + w[:-1, 3]) + eta_2[1:]
    values = np.column_stack([y, x1, x2, w, z])[BURN_IN:]
    names = ("Y", "X1", "X2", "W1", "W2", "W3", "W4", "Z1", "Z2", "Z3")
    truth = GroundTruth(
        true_drivers=frozenset(LaggedVariable(j, 1) for j in range(3, 10)),
        synergetic_drivers=frozenset(LaggedVariable(j, 1) for j in range(7, 10)),
        model_params={"a": a, "b": b, "c": c, "sigma": sigma},
        structure_seed=seed,
    )
    return TimeSeriesPanel(values, names), truth


def _simulate_network(terms, syn_term, noise, max_offset):
    """Iterate a lagged network; ``terms[j]`` lists (var, lag, coef, power).

    ``syn_term`` is an optional (coef, [(var, lag), ...]) product feeding
    variable 0. Lag tau means the driver value tau steps before the
    forecast base time, i.e. offset tau + 1 from the driven row.
    """
    L, n = noise.shape
    x = noise.copy()
    for t in range(max_offset - 1, L - 1):
        row = noise[t + 1].copy()
        for j in range(n):
            acc = 0.0
            for v, lag, coef, power in terms[j]:
                val = x[t - lag, v]
                acc += coef * (val * val if power == 2 else val)
            row[j] += acc
        if syn_term is not None:
            coef, pairs = syn_term
            prod = coef
            for v, lag in pairs:
                prod *= x[t - lag, v]
            row[0] += prod
        x[t + 1] = row
    return x


def gen_synergetic_member(N: int, T: int, seed: int, a: float = 0.4,
                          b: float = 2.0, c: float = 0.4,
                          structure_seed: int | None = None):
    """Generate one member of the synergetic random-network ensemble.

    The target (variable 0) is driven by the sum of 5 randomly chosen
    distinct non-target variables at random lags in {0, 1, 2} with
    coefficient ``c``, plus ``b`` times the product of 3 further distinct
    non-target variables at random lags. Every other variable is driven by
    2 distinct other non-target variables with coefficient ``a``. All
    noise is unit-variance Gaussian.

    The target is excluded from the driver pool of the other variables:
    feedback through the high-variance target destabilizes the network for
    a large share of wirings, which would violate the stationarity the
    estimators require.

    Ground truth: the 8 driver (var, lag) pairs of the target, the 3
    product factors marked synergetic.
    """
    if N < 9:
        raise ValueError("need N >= 9 for 5 linear plus 3 synergetic distinct drivers")
    if T <= 3:
        raise ValueError("T must exceed 3")
    if structure_seed is None:
        structure_seed = seed
    srng = np.random.default_rng([structure_seed, 1])
    others = np.arange(1, N)
    picks = srng.choice(others, size=8, replace=False)
    lags = srng.integers(0, 3, size=8)
    lin = [(int(v), int(l), c, 1) for v, l in zip(picks[:5], lags[:5])]
    syn_pairs = [(int(v), int(l)) for v, l in zip(picks[5:], lags[5:])]
    terms = {0: lin}
    for j in range(1, N):
        pool = [v for v in range(1, N) if v != j]
        dv = srng.choice(pool, size=2, replace=False)
        dl = srng.integers(0, 3, size=2)
        terms[j] = [(int(v), int(l), a, 1) for v, l in zip(dv, dl)]
    noise = np.random.default_rng([seed, 0]).normal(size=(T + BURN_IN, N))
    values = _simulate_network(terms, (b, syn_pairs), noise, max_offset=3)[BURN_IN:]
    names = tuple(f"X{j + 1}" for j in range(N))
    truth = GroundTruth(
        true_drivers=frozenset(
            LaggedVariable(int(v), int(l)) for v, l in zip(picks, lags)
        ),
        synergetic_drivers=frozenset(LaggedVariable(v, l) for v, l in syn_pairs),
        model_params={"a": a, "b": b, "c": c},
        structure_seed=structure_seed,
    )
    return TimeSeriesPanel(values, names), truth


def _gam_stable(values: np.ndarray) -> bool:
    if not np.isfinite(values).all() or np.abs(values).max() > 1e6:
        return False
    half = values.shape[0] // 2
    v1 = values[:half].var(axis=0)
    v2 = values[half:].var(axis=0)
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        return False
    ratio = np.maximum(v1, v2) / np.minimum(v1, v2)
    return bool(np.all(ratio <= 3.0))


def gen_gam_member(N: int, T: int, seed: int,
                   structure_seed: int | None = None,
                   max_redraws: int = 100):
    """Generate one generalized-additive-model ensemble member.

    Every variable is driven by 2 terms over randomly chosen distinct
    other variables at random lags in {0, 1, 2}; each term is
    ``coef * x`` or ``coef * x**2`` with equal probability and a
    coefficient drawn uniformly from +-[0.2, 0.5]. Noise is unit-variance
    Gaussian. The target is the variable with the largest sum of absolute
    incoming coefficients.

    Members whose sample variance diverges (non-finite values, or the
    variance of either half exceeding 3x the other) are rejected and
    redrawn with an incremented structure seed.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if T <= 3:
        raise ValueError("T must exceed 3")
    if structure_seed is None:
        structure_seed = seed
    noise = np.random.default_rng([seed, 0]).normal(size=(T + BURN_IN, N))
    for attempt in range(max_redraws):
        sseed = structure_seed + attempt
        srng = np.random.default_rng([sseed, 1])
        terms = {}
        for j in range(N):
            pool = [v for v in range(N) if v != j]
            dv = srng.choice(pool, size=min(2, len(pool)), replace=False)
            entry = []
            for v in dv:
                lag = int(srng.integers(0, 3))
                coef = float(srng.uniform(0.2, 0.5)) * (1 if srng.random() < 0.5 else -1)
                power = 2 if srng.random() < 0.5 else 1
                entry.append((int(v), lag, coef, power))
            terms[j] = entry
        with np.errstate(over="ignore", invalid="ignore"):
            values = _simulate_network(terms, None, noise, max_offset=3)[BURN_IN:]
        if _gam_stable(values):
            incoming = [sum(abs(t[2]) for t in terms[j]) for j in range(N)]
            target = int(np.argmax(incoming))
            truth = GroundTruth(
                true_drivers=frozenset(
                    LaggedVariable(v, lag) for v, lag, _, _ in terms[target]
                ),
                synergetic_drivers=frozenset(),
                model_params={"coef_low": 0.2, "coef_high": 0.5},
                structure_seed=sseed,
                target=target,
            )
            return TimeSeriesPanel(values, tuple(f"X{j + 1}" for j in range(N))), truth
    raise RuntimeError(f"no stable member found in {max_redraws} redraws")


def minimal_error_oracle(panel_learn: TimeSeriesPanel,
                         panel_test: TimeSeriesPanel,
                         truth: GroundTruth,
                         task: PredictionTask,
                         k: int) -> dict[int, float]:
    """Minimal out-of-sample SRMSE per predictor count, by brute force.

    Every subset of the true drivers is evaluated with nearest-neighbor
    prediction on the test segment; the minimum per cardinality is the
    best error any selection scheme restricted to true drivers could
    reach.
    """
    drivers = sorted(truth.true_drivers)
    if not drivers:
        raise ValueError("ground truth has no drivers")
    test_times = valid_target_times(panel_test, task)
    out: dict[int, float] = {}
    for p in range(1, len(drivers) + 1):
        best = np.inf
        for sub in combinations(drivers, p):
            res = knn_predict(panel_learn, panel_test, sub, task, k, test_times)
            if res.srmse < best:
                best = res.srmse
        out[p] = float(best)
    return out


def write_ground_truth_csv(truth: GroundTruth, panel: TimeSeriesPanel, path) -> None:
    """Sidecar metadata: driver list, parameters and seeds."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        writer.writerow(["target", panel.names[truth.target]])
        writer.writerow(["h", truth.h])
        writer.writerow(["structure_seed", truth.structure_seed])
        for key, val in sorted(truth.model_params.items()):
            writer.writerow([f"param:{key}", repr(float(val))])
        for lv in sorted(truth.true_drivers):
            kind = "synergetic" if lv in truth.synergetic_drivers else "linear"
            writer.writerow([f"driver:{kind}", lv.label(panel.names)])
