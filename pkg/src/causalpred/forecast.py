"""Nearest-neighbor and linear forecasting with prediction intervals.

The nearest-neighbor predictor estimates the target at a query time as
the conditional expectation over the k closest learning states under the
maximum norm; its 1-sigma prediction interval is the population standard
deviation of those k target values. The linear alternative is ordinary
least squares with an intercept, with prediction intervals from the
residual variance plus the coefficient uncertainties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    LaggedVariable,
    PredictionTask,
    SingularDesignError,
    TimeSeriesPanel,
    design_matrix,
    valid_target_times,
)

__all__ = [
    "ForecastResult",
    "LinearModel",
    "knn_predict",
    "fit_linear",
    "linear_predict",
    "linear_forecast",
    "srmse",
    "write_forecast_csv",
]


@dataclass(frozen=True)
class ForecastResult:
    """Point predictions with 1-sigma half-widths and, when the truth is
    known, the standardized RMSE."""

    target_times: np.ndarray
    predictions: np.ndarray
    sigmas: np.ndarray
    srmse: float | None = None

    def __post_init__(self):
        t = np.asarray(self.target_times, dtype=int)
        p = np.asarray(self.predictions, dtype=float)
        s = np.asarray(self.sigmas, dtype=float)
        if not (t.shape == p.shape == s.shape):
            raise ValueError("times, predictions and sigmas must align")
        if np.any(s < 0):
            raise ValueError("sigmas must be nonnegative")
        object.__setattr__(self, "target_times", t)
        object.__setattr__(self, "predictions", p)
        object.__setattr__(self, "sigmas", s)


@dataclass(frozen=True)
class LinearModel:
    """OLS fit: intercept-first coefficients, their standard errors, and
    the mean squared residual of the fitting set."""

    coefficients: np.ndarray
    coef_sigmas: np.ndarray
    residual_variance: float
    predictors: tuple[LaggedVariable, ...]

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        s = np.asarray(self.coef_sigmas, dtype=float)
        if c.shape != s.shape or c.ndim != 1:
            raise ValueError("coefficients and coef_sigmas must be equal-length vectors")
        if len(c) != len(self.predictors) + 1:
            raise ValueError("expected one coefficient per predictor plus intercept")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "coef_sigmas", s)
        object.__setattr__(self, "predictors", tuple(LaggedVariable(*p) for p in self.predictors))


def srmse(predictions, truth) -> float:
    """Root mean squared error standardized by the test-set variance.

    A value of 1 corresponds to climatology-level skill (predicting the
    test mean), 0 to a perfect forecast.
    """
    pred = np.asarray(predictions, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if pred.shape != tru.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and truth must be equal-length nonempty vectors")
    var = tru.var()
    if var == 0.0:
        raise ValueError("truth has zero variance on the test set")
    return float(np.sqrt(np.mean((tru - pred) ** 2) / var))


def knn_predict(panel_learn: TimeSeriesPanel,
                panel_query: TimeSeriesPanel,
                predictors: Sequence[LaggedVariable],
                task: PredictionTask,
                k: int,
                query_times,
                learn_times=None,
                exclude_same_time: bool | None = None) -> ForecastResult:
    """Forecast query targets by averaging the k nearest learning states.

    Parameters
    ----------
    panel_learn, panel_query : TimeSeriesPanel
        May be the same panel; query predictor windows are read from
        ``panel_query``, neighbor states from ``panel_learn``.
    predictors : sequence of LaggedVariable
    task : PredictionTask
    k : int
        Number of nearest neighbors; distances use the maximum norm,
        distance ties are broken toward the earlier learning time.
    query_times : iterable of int
        Target times within ``panel_query``.
    learn_times : iterable of int, optional
        Learning target times; defaults to all admissible times of
        ``panel_learn``.
    exclude_same_time : bool, optional
        Drop learning rows whose target time equals the query time
        (leave-one-out when predicting inside the learning segment).
        Defaults to True when both panels are the same object.

    Returns
    -------
    ForecastResult
        With ``srmse`` computed against the query panel's target values.
    """
    if learn_times is None:
        learn_times = valid_target_times(panel_learn, task)
    if exclude_same_time is None:
        exclude_same_time = panel_learn is panel_query
    xl, yl, tl = design_matrix(panel_learn, predictors, task, learn_times)
    xq, yq, tq = design_matrix(panel_query, predictors, task, query_times)
    n_learn = xl.shape[0]
    if n_learn < k + (1 if exclude_same_time else 0):
        raise ValueError(f"need at least k={k} learning rows, got {n_learn}")

    dists = cdist(xq, xl, metric="chebyshev")
    if exclude_same_time:
        same = tq[:, None] == tl[None, :]
        dists[same] = np.inf
    preds = np.empty(len(tq))
    sigs = np.empty(len(tq))
    for i in range(len(tq)):
        # lexsort: distance first, earlier learning time on ties
        order = np.lexsort((tl, dists[i]))[:k]
        if not np.isfinite(dists[i, order[-1]]):
            raise ValueError("fewer than k usable learning rows after exclusions")
        nbr = yl[order]
        preds[i] = nbr.mean()
        sigs[i] = nbr.std()
    return ForecastResult(
        target_times=tq,
        predictions=preds,
        sigmas=sigs,
        srmse=_srmse_or_none(preds, yq),
    )


def _srmse_or_none(predictions, truth):
    """SRMSE when the truth segment can support it (> 1 sample, nonzero
    variance); None otherwise."""
    truth = np.asarray(truth, dtype=float)
    if truth.size < 2 or truth.var() == 0.0:
        return None
    return srmse(predictions, truth)


def fit_linear(panel_learn: TimeSeriesPanel,
               predictors: Sequence[LaggedVariable],
               task: PredictionTask,
               learn_times=None) -> LinearModel:
    """Ordinary least squares fit of the target on the lagged predictors.

    An intercept is always included; on standardized data it is close to
    zero. Coefficient standard errors come from the OLS covariance
    ``resvar * (X'X)^-1`` with ``resvar`` the mean squared residual.

    Raises
    ------
    SingularDesignError
        If the design matrix (including the intercept column) is rank
        deficient, e.g. a constant predictor column.
    """
    if learn_times is None:
        learn_times = valid_target_times(panel_learn, task)
    x, y, _ = design_matrix(panel_learn, predictors, task, learn_times)
    n, p = x.shape
    if n <= p + 1:
        raise ValueError(f"need more than p+1={p + 1} rows to fit, got {n}")
    xd = np.column_stack([np.ones(n), x])
    coef, _, rank, _ = np.linalg.lstsq(xd, y, rcond=None)
    if rank < p + 1:
        raise SingularDesignError(
            "design matrix is rank deficient (constant or collinear predictors)"
        )
    resid = y - xd @ coef
    resvar = float(np.mean(resid**2))
    cov = resvar * np.linalg.inv(xd.T @ xd)
    return LinearModel(
        coefficients=coef,
        coef_sigmas=np.sqrt(np.diag(cov)),
        residual_variance=resvar,
        predictors=tuple(LaggedVariable(*pv) for pv in predictors),
    )


def linear_predict(model: LinearModel, queries, target_times=None) -> ForecastResult:
    """Evaluate a fitted linear model on query predictor vectors.

    The prediction interval combines the residual variance with the
    propagated coefficient uncertainties,

        sigma^2 = resvar + sum_i sigma(B_i)^2 * x_i^2,

    where the sum runs over the intercept (x_0 = 1) and the predictors.
    """
    xq = np.asarray(queries, dtype=float)
    if xq.ndim == 1:
        xq = xq[:, None]
    p = len(model.predictors)
    if xq.shape[1] != p:
        raise ValueError(f"query dimension {xq.shape[1]} does not match model p={p}")
    xd = np.column_stack([np.ones(xq.shape[0]), xq])
    preds = xd @ model.coefficients
    sigs = np.sqrt(model.residual_variance + (xd**2) @ (model.coef_sigmas**2))
    if target_times is None:
        target_times = np.arange(xq.shape[0])
    return ForecastResult(target_times=np.asarray(target_times, dtype=int),
                          predictions=preds, sigmas=sigs)


def linear_forecast(panel_learn: TimeSeriesPanel,
                    panel_query: TimeSeriesPanel,
                    predictors: Sequence[LaggedVariable],
                    task: PredictionTask,
                    query_times,
                    learn_times=None) -> ForecastResult:
    """Fit on the learning panel and forecast query targets (with SRMSE)."""
    model = fit_linear(panel_learn, predictors, task, learn_times)
    xq, yq, tq = design_matrix(panel_query, predictors, task, query_times)
    res = linear_predict(model, xq, target_times=tq)
    return ForecastResult(
        target_times=res.target_times,
        predictions=res.predictions,
        sigmas=res.sigmas,
        srmse=_srmse_or_none(res.predictions, yq),
    )


def write_forecast_csv(result: ForecastResult, path, truth=None) -> None:
    """Tidy CSV: time, prediction, sigma and, when available, truth."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["time", "prediction", "sigma"]
        if truth is not None:
            header.append("truth")
        writer.writerow(header)
        for i, t in enumerate(result.target_times):
            row = [int(t), repr(float(result.predictions[i])), repr(float(result.sigmas[i]))]
            if truth is not None:
                row.append(repr(float(truth[i])))
            writer.writerow(row)
