"""Data model and lag-alignment conventions shared by all modules.

Conventions used throughout the package:

* Time indices are 0-based. A prediction task with step ``h`` and maximum
  lag ``tau_max`` forecasts the target value at time ``s`` from candidate
  predictors ``(var, tau)`` whose values are read at time ``s - h - tau``,
  i.e. lags are measured backward from the forecast base time ``t = s - h``.
* Valid target times are ``s >= tau_max + h`` so that every candidate of
  the full grid can be aligned, independently of which subset is in use.
* Estimation and prediction are meant to operate on standardized data
  (zero mean, unit variance per variable, statistics from the learning
  segment only); see :func:`standardize_panel`. The pipeline entry points
  (scheme runner, benchmark, CLI) apply this once, the lower-level
  operations work on whatever values they are handed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "DegenerateInputError",
    "SingularDesignError",
    "LaggedVariable",
    "TimeSeriesPanel",
    "PredictionTask",
    "EstimatorConfig",
    "FixedThreshold",
    "ShuffleSignificance",
    "AlgorithmConfig",
    "HeuristicCutoff",
    "CrossValidationCutoff",
    "MmiMaxCutoff",
    "MmiMaxPlusCvCutoff",
    "SchemeConfig",
    "PredictorSet",
    "CostCounter",
    "design_matrix",
    "valid_target_times",
    "standardize_panel",
    "read_panel_csv",
    "write_panel_csv",
    "SCHEME_NAMES",
]


class DegenerateInputError(ValueError):
    """Input with zero-variance columns or otherwise degenerate geometry."""


class SingularDesignError(ValueError):
    """Rank-deficient design matrix in a least-squares fit."""


class LaggedVariable(NamedTuple):
    """One candidate predictor: variable index ``var`` at lag ``tau``.

    The lag is measured backward from the forecast base time, so for a
    target at time ``s`` with prediction step ``h`` the value used is
    ``panel[s - h - lag, var]``.
    """

    var: int
    lag: int

    def label(self, names: Sequence[str] | None = None) -> str:
        name = names[self.var] if names is not None else f"v{self.var}"
        return f"{name}[t-{self.lag}]" if self.lag else f"{name}[t]"


@dataclass(frozen=True)
class TimeSeriesPanel:
    """An N-variable, T-step multivariate time series.

    Attributes
    ----------
    values : ndarray of shape (T, N)
        Rows are time steps, columns are variables. Stored as a read-only
        float64 copy; all entries must be finite.
    names : tuple of str
        Unique variable names, one per column.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("panel values must be a non-empty T x N matrix")
        if not np.isfinite(vals).all():
            raise ValueError("panel contains non-finite or missing values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        names = tuple(str(n) for n in self.names)
        if len(names) != vals.shape[1]:
            raise ValueError(
                f"got {len(names)} names for {vals.shape[1]} variables"
            )
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def var_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(
                f"unknown variable {name!r}; panel has {list(self.names)}"
            ) from None

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesPanel":
        """New panel holding rows ``start:stop`` (its time axis restarts at 0)."""
        if not (0 <= start < stop <= self.T):
            raise ValueError(f"invalid row slice [{start}, {stop}) for T={self.T}")
        return TimeSeriesPanel(self.values[start:stop], self.names)


@dataclass(frozen=True)
class PredictionTask:
    """Forecast target variable ``target`` at ``h`` steps ahead, candidates
    drawn from all variables at lags 0..tau_max (including the target's
    own past)."""

    target: int
    h: int = 1
    tau_max: int = 2

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("prediction step h must be >= 1")
        if self.tau_max < 0:
            raise ValueError("tau_max must be >= 0")
        if self.target < 0:
            raise ValueError("target index must be >= 0")

    def candidate_grid(self, n_vars: int) -> tuple[LaggedVariable, ...]:
        """All (var, lag) candidates, ordered by (var, lag)."""
        if self.target >= n_vars:
            raise ValueError(f"target {self.target} out of range for N={n_vars}")
        return tuple(
            LaggedVariable(j, tau)
            for j in range(n_vars)
            for tau in range(self.tau_max + 1)
        )

    @property
    def min_target_time(self) -> int:
        return self.tau_max + self.h


@dataclass(frozen=True)
class EstimatorConfig:
    """Nearest-neighbor counts for the three estimation stages.

    ``k_algo`` is used in the pre-selection tests, ``k_cmi_mmi`` in the
    selection-stage (C)MI/MMI estimates and ``k_predict`` in forecasting
    (defaults to ``k_cmi_mmi``, which keeps the coarse-graining level of
    selection and prediction consistent).
    """

    k_algo: int = 50
    k_cmi_mmi: int = 10
    k_predict: int | None = None

    def __post_init__(self):
        if self.k_predict is None:
            object.__setattr__(self, "k_predict", self.k_cmi_mmi)
        for name in ("k_algo", "k_cmi_mmi", "k_predict"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class FixedThreshold:
    """Dependence is significant when the estimate exceeds ``i_star``."""

    i_star: float = 0.004

    def __post_init__(self):
        if self.i_star < 0:
            raise ValueError("fixed threshold must be >= 0")


@dataclass(frozen=True)
class ShuffleSignificance:
    """Permutation-surrogate test with ``m`` surrogates at level ``alpha``."""

    m: int = 100
    alpha: float = 0.05

    def __post_init__(self):
        if self.m < 20:
            raise ValueError("shuffle test needs m >= 20 surrogates")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


SignificanceRule = Union[FixedThreshold, ShuffleSignificance]


@dataclass(frozen=True)
class AlgorithmConfig:
    """Parameters of the causal pre-selection algorithm.

    ``n0`` is the initial condition-set size, ``n_max`` the largest size
    tested, ``n_i`` the maximum number of condition combinations tried per
    candidate and size, and ``significance`` the rule deciding whether an
    estimated (C)MI counts as nonzero.
    """

    n0: int = 2
    n_max: int = 3
    n_i: int = 3
    significance: SignificanceRule = field(default_factory=FixedThreshold)

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.n_max < self.n0:
            raise ValueError("n_max must be >= n0")
        if self.n_i < 1:
            raise ValueError("n_i must be >= 1")


@dataclass(frozen=True)
class HeuristicCutoff:
    """Keep ranked predictors while each step's gain exceeds the fraction
    ``lam`` of the information accumulated so far."""

    lam: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lambda must lie in [0, 1)")


@dataclass(frozen=True)
class CrossValidationCutoff:
    """Choose the predictor count minimizing m-fold cross-validated error."""

    m: int = 5

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("cross-validation needs m >= 2 folds")


@dataclass(frozen=True)
class MmiMaxCutoff:
    """Choose the subset with globally maximal estimated MMI (optimal scheme)."""


@dataclass(frozen=True)
class MmiMaxPlusCvCutoff:
    """Per-cardinality subsets from the MMI maximum, predictor count from
    cross-validation (optimal scheme)."""

    m: int = 5

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("cross-validation needs m >= 2 folds")


CutoffRule = Union[HeuristicCutoff, CrossValidationCutoff, MmiMaxCutoff, MmiMaxPlusCvCutoff]

SCHEME_NAMES = ("mi_rank", "cmi_forward", "causal_cmi_forward", "optimal")


@dataclass(frozen=True)
class SchemeConfig:
    """One predictor-selection scheme plus its cutoff criterion."""

    scheme: str
    cutoff: CutoffRule = field(default_factory=CrossValidationCutoff)
    p_max: int = 8
    subset_cap: int = 20

    def __post_init__(self):
        if self.scheme not in SCHEME_NAMES:
            raise ValueError(
                f"unknown scheme {self.scheme!r}; expected one of {SCHEME_NAMES}"
            )
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if self.subset_cap < 1:
            raise ValueError("subset_cap must be >= 1")
        if isinstance(self.cutoff, (MmiMaxCutoff, MmiMaxPlusCvCutoff)):
            if self.scheme != "optimal":
                raise ValueError("MMI-based cutoffs are valid only for the optimal scheme")
        if isinstance(self.cutoff, HeuristicCutoff) and self.scheme == "optimal":
            raise ValueError(
                "the optimal scheme uses the mmi_max criterion instead of the "
                "lambda heuristic"
            )


@dataclass(frozen=True)
class PredictorSet:
    """An ordered set of lagged variables with attached score values."""

    variables: tuple[LaggedVariable, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        variables = tuple(LaggedVariable(*v) for v in self.variables)
        scores = tuple(float(s) for s in self.scores)
        if len(variables) != len(scores):
            raise ValueError("variables and scores must have equal length")
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate lagged variables in predictor set")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    def sorted_by_score(self) -> "PredictorSet":
        """Descending score, ties broken by (var, lag)."""
        order = sorted(
            range(len(self)), key=lambda i: (-self.scores[i], self.variables[i])
        )
        return PredictorSet(
            tuple(self.variables[i] for i in order),
            tuple(self.scores[i] for i in order),
        )

    def top(self, n: int) -> "PredictorSet":
        return PredictorSet(self.variables[:n], self.scores[:n])


class CostCounter:
    """Accumulates the dimension-weighted cost of (C)MI estimates.

    Each estimate of I(X;Y|Z) adds ``D_X + D_Y + D_Z`` to ``weighted_cost``,
    the linear-in-dimension part of the estimator's complexity.
    """

    __slots__ = ("n_estimates", "weighted_cost")

    def __init__(self, n_estimates: int = 0, weighted_cost: int = 0):
        self.n_estimates = n_estimates
        self.weighted_cost = weighted_cost

    def add(self, d_x: int, d_y: int, d_z: int = 0) -> None:
        self.n_estimates += 1
        self.weighted_cost += int(d_x) + int(d_y) + int(d_z)

    def merge(self, other: "CostCounter") -> "CostCounter":
        self.n_estimates += other.n_estimates
        self.weighted_cost += other.weighted_cost
        return self

    def copy(self) -> "CostCounter":
        return CostCounter(self.n_estimates, self.weighted_cost)

    def __eq__(self, other):
        if not isinstance(other, CostCounter):
            return NotImplemented
        return (self.n_estimates, self.weighted_cost) == (
            other.n_estimates,
            other.weighted_cost,
        )

    def __repr__(self):
        return f"CostCounter(n_estimates={self.n_estimates}, weighted_cost={self.weighted_cost})"


def valid_target_times(panel: TimeSeriesPanel, task: PredictionTask,
                       start: int | None = None, stop: int | None = None) -> range:
    """Target times in ``[start, stop)`` satisfying the alignment bound.

    Defaults to every admissible target time of the panel,
    ``range(tau_max + h, T)``.
    """
    lo = task.min_target_time if start is None else max(start, task.min_target_time)
    hi = panel.T if stop is None else min(stop, panel.T)
    return range(lo, max(lo, hi))


def design_matrix(panel: TimeSeriesPanel,
                  predictors: Sequence[LaggedVariable],
                  task: PredictionTask,
                  time_range: Iterable[int]):
    """Align predictors and target into a regression design.

    Parameters
    ----------
    panel : TimeSeriesPanel
    predictors : ordered sequence of LaggedVariable
        Must be nonempty; order fixes the column order.
    task : PredictionTask
    time_range : iterable of int
        Target times ``s``; every one must satisfy
        ``tau_max + h <= s <= T - 1``.

    Returns
    -------
    X : ndarray (S, p)
        Row for target time ``s`` holds ``panel[s - h - lag, var]`` per
        predictor.
    y : ndarray (S,)
        Target values ``panel[s, target]``.
    target_times : ndarray (S,) of int
    """
    predictors = [LaggedVariable(*pv) for pv in predictors]
    if not predictors:
        raise ValueError("predictor list must be nonempty")
    for pv in predictors:
        if not (0 <= pv.var < panel.N):
            raise ValueError(f"predictor variable {pv.var} out of range for N={panel.N}")
        if not (0 <= pv.lag <= task.tau_max):
            raise ValueError(f"predictor lag {pv.lag} outside [0, tau_max={task.tau_max}]")
    times = np.asarray(list(time_range), dtype=int)
    if times.size == 0:
        raise ValueError("time_range is empty")
    lo = task.min_target_time
    if times.min() < lo:
        raise ValueError(
            f"target time {times.min()} below alignment bound tau_max + h = {lo}"
        )
    if times.max() >= panel.T:
        raise ValueError(f"target time {times.max()} beyond panel length T={panel.T}")
    cols = [panel.values[times - task.h - pv.lag, pv.var] for pv in predictors]
    X = np.column_stack(cols)
    y = panel.values[times, task.target]
    return X, y, times


def standardize_panel(panel: TimeSeriesPanel,
                      stats_rows: range | None = None):
    """Standardize each variable to zero mean, unit variance.

    Statistics are computed on ``stats_rows`` (the learning segment;
    defaults to all rows) and applied to the full panel, so a test segment
    is transformed with learning-set statistics only.

    Returns
    -------
    standardized : TimeSeriesPanel
    means, stds : ndarray (N,)
        Use to de-standardize predictions: ``raw = std * z + mean``.
    """
    rows = slice(None) if stats_rows is None else slice(stats_rows.start, stats_rows.stop)
    sub = panel.values[rows]
    if sub.shape[0] < 2:
        raise ValueError("need at least two rows to compute standardization statistics")
    means = sub.mean(axis=0)
    stds = sub.std(axis=0)
    flat = np.nonzero(stds == 0.0)[0]
    if flat.size:
        raise DegenerateInputError(
            f"zero-variance variable(s) {[panel.names[i] for i in flat]} "
            "cannot be standardized"
        )
    return TimeSeriesPanel((panel.values - means) / stds, panel.names), means, stds


def read_panel_csv(path) -> TimeSeriesPanel:
    """Read a panel from CSV: header row of names, one time step per row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        names = [n.strip() for n in names]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(names)} values, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return TimeSeriesPanel(np.asarray(rows, dtype=float), tuple(names))


def write_panel_csv(panel: TimeSeriesPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.names)
        for row in panel.values:
            writer.writerow([repr(float(v)) for v in row])
