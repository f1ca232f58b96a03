"""Ensemble benchmark harness: data generation, scheme comparison, reports.

An experiment runs every configured selection scheme on every ensemble
member, forecasts a held-out test segment, and writes tidy CSV reports:

* ``members.csv`` - one row per member x scheme x predictor mode x
  predictor count, with the chosen count flagged;
* ``summary.csv`` - ensemble quantiles (5/25/50/75/95%) per scheme of the
  chosen-count metrics;
* ``selection_log.csv`` - the ranked selections per member and scheme.

Member seeds derive as ``seed_base + member_index`` and rows are written
in member order, so identical configurations produce byte-identical
reports regardless of the worker count.
"""

from __future__ import annotations

import configparser
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    AlgorithmConfig,
    CrossValidationCutoff,
    EstimatorConfig,
    FixedThreshold,
    HeuristicCutoff,
    LaggedVariable,
    MmiMaxCutoff,
    MmiMaxPlusCvCutoff,
    PredictionTask,
    SchemeConfig,
    ShuffleSignificance,
    TimeSeriesPanel,
    read_panel_csv,
    standardize_panel,
    valid_target_times,
)
from .forecast import knn_predict, linear_forecast
from .selection import ranked_entry_items, run_scheme
from .synth import (
    gen_fixed_model,
    gen_gam_member,
    gen_synergetic_member,
    minimal_error_oracle,
)

__all__ = [
    "ModelSpec",
    "ExperimentConfig",
    "MemberOutcome",
    "run_experiment",
    "run_sweep",
    "run_member",
    "split_learn_test",
    "load_config",
    "SUMMARY_QUANTILES",
]

SUMMARY_QUANTILES = (5, 25, 50, 75, 95)
MODEL_KINDS = ("fixed_model", "synergetic", "gam", "csv")
PREDICTOR_MODES = ("knn", "linear", "both")
SWEEP_PARAMETERS = ("i_star", "t", "k", "lambda")


@dataclass(frozen=True)
class ModelSpec:
    """Data source of an experiment: a generator family or a CSV panel."""

    kind: str
    n: int = 10
    a: float = 0.4
    b: float = 2.0
    c: float = 0.4
    sigma: float = 0.5
    path: str | None = None
    target: str | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "csv":
            if not self.path or not self.target:
                raise ValueError("csv model needs 'path' and 'target'")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one benchmark experiment."""

    model: ModelSpec
    t_learn: int = 500
    t_test: int = 125
    ensemble_size: int = 100
    schemes: tuple[tuple[str, SchemeConfig], ...] = ()
    est: EstimatorConfig = field(default_factory=EstimatorConfig)
    algo: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    h: int = 1
    tau_max: int = 2
    predictor: str = "knn"
    seed_base: int = 0
    workers: int = 1
    output_dir: str = "out"
    sweep: tuple[str, tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.t_learn <= self.tau_max + self.h + 1:
            raise ValueError("t_learn too short for the alignment bound")
        if self.t_test < 2:
            raise ValueError("t_test must be >= 2")
        if self.predictor not in PREDICTOR_MODES:
            raise ValueError(f"predictor must be one of {PREDICTOR_MODES}")
        if not self.schemes:
            raise ValueError("configure at least one scheme")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        labels = [label for label, _ in self.schemes]
        if len(set(labels)) != len(labels):
            raise ValueError("scheme labels must be unique")
        if self.sweep is not None:
            param, values = self.sweep
            if param not in SWEEP_PARAMETERS:
                raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
            if not values:
                raise ValueError("sweep needs at least one value")


def split_learn_test(panel: TimeSeriesPanel, t_learn: int, task: PredictionTask):
    """Split a panel into learning rows [0, t_learn) and a test panel.

    The test panel starts ``tau_max + h`` rows before ``t_learn`` so that
    every test target has a full predictor window; its admissible target
    times cover exactly the rows from ``t_learn`` on.
    """
    history = task.min_target_time
    if not history < t_learn < panel.T:
        raise ValueError(f"t_learn={t_learn} incompatible with T={panel.T}")
    return panel.slice_rows(0, t_learn), panel.slice_rows(t_learn - history, panel.T)


def _generate_member(cfg: ExperimentConfig, member: int):
    seed = cfg.seed_base + member
    total = cfg.t_learn + cfg.t_test
    spec = cfg.model
    if spec.kind == "fixed_model":
        panel, truth = gen_fixed_model(total, seed, spec.a, spec.b, spec.c, spec.sigma)
        return panel, truth, truth.target
    if spec.kind == "synergetic":
        panel, truth = gen_synergetic_member(spec.n, total, seed, spec.a, spec.b, spec.c)
        return panel, truth, truth.target
    if spec.kind == "gam":
        panel, truth = gen_gam_member(spec.n, total, seed)
        return panel, truth, truth.target
    panel = read_panel_csv(spec.path)
    if panel.T < total:
        raise ValueError(
            f"CSV panel has {panel.T} rows, need t_learn + t_test = {total}"
        )
    return panel.slice_rows(0, total), None, panel.var_index(spec.target)


@dataclass
class MemberOutcome:
    """Everything run_experiment needs to report about one member."""

    member: int
    rows: list
    selection_rows: list
    errors: list


def run_member(cfg: ExperimentConfig, member: int) -> MemberOutcome:
    """Run every configured scheme on one ensemble member."""
    panel, truth, target = _generate_member(cfg, member)
    task = PredictionTask(target=target, h=cfg.h, tau_max=cfg.tau_max)
    panel_std, _, _ = standardize_panel(panel, stats_rows=range(cfg.t_learn))
    learn, test = split_learn_test(panel_std, cfg.t_learn, task)
    test_times = valid_target_times(test, task)
    modes = ("knn", "linear") if cfg.predictor == "both" else (cfg.predictor,)

    oracle = None
    oracle_min = None
    if truth is not None:
        oracle = minimal_error_oracle(learn, test, truth, task, cfg.est.k_predict)
        oracle_min = min(oracle.values())

    rows, sel_rows, errors = [], [], []
    for label, scheme_cfg in cfg.schemes:
        try:
            sel = run_scheme(learn, task, cfg.est, cfg.algo, scheme_cfg,
                             rng_seed=cfg.seed_base + member)
        except Exception as exc:  # scheme-level failure: report and move on
            errors.append((member, label, f"{type(exc).__name__}: {exc}"))
            for mode in modes:
                rows.append(_error_row(member, label, mode))
            continue
        n_causal = len(sel.preselected) if sel.preselected is not None else ""
        for step, (item, score) in enumerate(sel.ranked, start=1):
            subset = ranked_entry_items(item)
            sel_rows.append([
                member, label, step,
                ";".join(str(v.var) for v in subset),
                ";".join(str(v.lag) for v in subset),
                repr(float(score)),
                int(step == sel.chosen_p) if sel.scheme == "optimal"
                else int(sel.chosen_p is not None and step <= sel.chosen_p),
            ])
        p_cap = min(scheme_cfg.p_max, sel.max_p())
        for mode in modes:
            for p in range(1, p_cap + 1):
                preds = sel.set_at(p)
                try:
                    if mode == "knn":
                        res = knn_predict(learn, test, preds, task,
                                          cfg.est.k_predict, test_times)
                    else:
                        res = linear_forecast(learn, test, preds, task, test_times)
                except Exception as exc:
                    errors.append((member, label, f"p={p}/{mode} "
                                                  f"{type(exc).__name__}: {exc}"))
                    continue
                tpr, fdr = _tpr_fdr(preds, truth)
                rows.append([
                    member, label, mode, p,
                    repr(float(res.srmse)),
                    repr(float(res.srmse - oracle_min)) if oracle_min is not None else "",
                    repr(float(oracle[p])) if oracle and p in oracle else "",
                    repr(tpr) if tpr is not None else "",
                    repr(fdr) if fdr is not None else "",
                    sel.cost.weighted_cost,
                    int(p == sel.chosen_p),
                    n_causal,
                    "ok",
                ])
    return MemberOutcome(member, rows, sel_rows, errors)


def _error_row(member: int, label: str, mode: str):
    return [member, label, mode, 0, "", "", "", "", "", "", 0, "", "error"]


def _tpr_fdr(selected, truth):
    if truth is None:
        return None, None
    sel = set(LaggedVariable(*v) for v in selected)
    true = truth.true_drivers
    tpr = len(sel & true) / len(true)
    fdr = len(sel - true) / len(sel)
    return float(tpr), float(fdr)


MEMBER_HEADER = [
    "member", "scheme", "predictor", "p", "srmse", "rel_srmse",
    "oracle_srmse", "tpr", "fdr", "cost", "chosen", "n_causal", "status",
]
SELECTION_HEADER = ["member", "scheme", "step", "vars", "lags", "score", "chosen"]


def _worker(args):
    cfg, member = args
    return run_member(cfg, member)


def run_experiment(cfg: ExperimentConfig):
    """Run the full ensemble and write the report CSVs.

    Returns
    -------
    dict with the summary table (list of [scheme, statistic, value] rows),
    the output directory, and any per-member errors.
    """
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    members = list(range(cfg.ensemble_size))
    if cfg.workers > 1 and cfg.ensemble_size > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_worker, [(cfg, m) for m in members]))
    else:
        outcomes = [run_member(cfg, m) for m in members]
    outcomes.sort(key=lambda o: o.member)

    import csv as _csv

    with open(outdir / "members.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(MEMBER_HEADER)
        for out in outcomes:
            writer.writerows(out.rows)
    with open(outdir / "selection_log.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(SELECTION_HEADER)
        for out in outcomes:
            writer.writerows(out.selection_rows)

    summary = summarize(cfg, outcomes)
    with open(outdir / "summary.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["scheme", "statistic", "value"])
        writer.writerows(summary)

    errors = [err for out in outcomes for err in out.errors]
    return {"summary": summary, "output_dir": str(outdir), "errors": errors}


def summarize(cfg: ExperimentConfig, outcomes) -> list:
    """Ensemble quantiles of the chosen-count rows, per scheme and mode."""
    rows = [row for out in outcomes for row in out.rows]
    summary = []
    modes = ("knn", "linear") if cfg.predictor == "both" else (cfg.predictor,)
    for label, _scheme in cfg.schemes:
        for mode in modes:
            chosen = [r for r in rows
                      if r[1] == label and r[2] == mode and r[10] == 1 and r[12] == "ok"]
            failed = [r for r in rows
                      if r[1] == label and r[2] == mode and r[12] == "error"]
            prefix = f"{mode}_"
            summary.append([label, f"{prefix}n_members", len(chosen)])
            summary.append([label, f"{prefix}n_failed", len(failed)])
            if not chosen:
                continue
            metrics = {
                "srmse": [float(r[4]) for r in chosen],
                "rel_srmse": [float(r[5]) for r in chosen if r[5] != ""],
                "tpr": [float(r[7]) for r in chosen if r[7] != ""],
                "fdr": [float(r[8]) for r in chosen if r[8] != ""],
                "cost": [float(r[9]) for r in chosen],
                "p": [float(r[3]) for r in chosen],
                "n_causal": [float(r[11]) for r in chosen if r[11] != ""],
            }
            # TPR/FDR evaluated at the true driver count (not the chosen p)
            eval_rows = _truth_count_rows(rows, label, mode)
            if eval_rows:
                metrics["tpr_at_truth"] = [r[0] for r in eval_rows]
                metrics["fdr_at_truth"] = [r[1] for r in eval_rows]
            for name, values in metrics.items():
                if not values:
                    continue
                for q in SUMMARY_QUANTILES:
                    val = float(np.percentile(values, q))
                    summary.append([label, f"{prefix}{name}_q{q:02d}", repr(val)])
    return summary


def _truth_count_rows(rows, label, mode):
    """Per member: TPR/FDR of the largest available set up to the true
    driver count."""
    by_member: dict[int, list] = {}
    for r in rows:
        if r[1] != label or r[2] != mode or r[12] != "ok" or r[7] == "":
            continue
        by_member.setdefault(r[0], []).append(r)
    out = []
    for member in sorted(by_member):
        cand = max(by_member[member], key=lambda r: r[3])
        out.append((float(cand[7]), float(cand[8])))
    return out


def run_sweep(cfg: ExperimentConfig):
    """Rerun the experiment for every sweep value, one subdirectory each.

    Sweep parameters: ``i_star`` (fixed significance threshold), ``t``
    (learning length; the test length scales at the 4:1 ratio), ``k``
    (selection and prediction neighbor count) and ``lambda`` (heuristic
    cutoff fraction for schemes using it).
    """
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    param, values = cfg.sweep
    base_dir = Path(cfg.output_dir)
    base_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for value in values:
        sub = _apply_sweep_value(cfg, param, value)
        tag = f"{value:g}" if isinstance(value, float) else str(value)
        sub = replace(sub, output_dir=str(base_dir / f"sweep_{param}_{tag}"),
                      sweep=None)
        results.append((value, run_experiment(sub)))

    import csv as _csv

    with open(base_dir / "sweep_summary.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["parameter", "value", "scheme", "statistic", "stat_value"])
        for value, res in results:
            for scheme, stat, stat_value in res["summary"]:
                writer.writerow([param, repr(float(value)), scheme, stat, stat_value])
    return results


def _apply_sweep_value(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "i_star":
        return replace(cfg, algo=replace(cfg.algo, significance=FixedThreshold(float(value))))
    if param == "t":
        t_learn = int(value)
        return replace(cfg, t_learn=t_learn, t_test=max(2, t_learn // 4))
    if param == "k":
        k = int(value)
        return replace(cfg, est=replace(cfg.est, k_cmi_mmi=k, k_predict=k))
    if param == "lambda":
        schemes = tuple(
            (label, replace(sc, cutoff=HeuristicCutoff(float(value)))
             if isinstance(sc.cutoff, HeuristicCutoff) else sc)
            for label, sc in cfg.schemes
        )
        return replace(cfg, schemes=schemes)
    raise ValueError(f"unknown sweep parameter {param!r}")


# -- configuration files ----------------------------------------------------

def _parse_cutoff(section) -> object:
    kind = section.get("cutoff", "cross_validation").strip()
    if kind == "heuristic":
        return HeuristicCutoff(section.getfloat("lambda", 0.2))
    if kind == "cross_validation":
        return CrossValidationCutoff(section.getint("m", 5))
    if kind == "mmi_max":
        return MmiMaxCutoff()
    if kind == "mmi_max_plus_cv":
        return MmiMaxPlusCvCutoff(section.getint("m", 5))
    raise ValueError(f"unknown cutoff {kind!r}")


def load_config(path) -> ExperimentConfig:
    """Parse a key-value experiment configuration file.

    Sections: ``[experiment]`` (run geometry), ``[model]`` (generator
    parameters or CSV source), ``[estimator]``, ``[algorithm]``, one
    ``[scheme:<label>]`` per scheme, and optional ``[sweep]``. Every key
    mirrors the corresponding configuration field.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    path = Path(path)
    if not path.exists():
        raise ValueError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValueError(f"invalid config {path}: {exc}") from exc

    if "experiment" not in parser:
        raise ValueError(f"{path}: missing [experiment] section")
    exp = parser["experiment"]
    model_sect = parser["model"] if "model" in parser else {}
    model = ModelSpec(
        kind=exp.get("model", "synergetic").strip(),
        n=int(model_sect.get("n", 10)),
        a=float(model_sect.get("a", 0.4)),
        b=float(model_sect.get("b", 2.0)),
        c=float(model_sect.get("c", 0.4)),
        sigma=float(model_sect.get("sigma", 0.5)),
        path=model_sect.get("path"),
        target=model_sect.get("target"),
    )
    est_sect = parser["estimator"] if "estimator" in parser else {}
    est = EstimatorConfig(
        k_algo=int(est_sect.get("k_algo", 50)),
        k_cmi_mmi=int(est_sect.get("k_cmi_mmi", 10)),
        k_predict=int(est_sect["k_predict"]) if "k_predict" in est_sect else None,
    )
    algo_sect = parser["algorithm"] if "algorithm" in parser else {}
    sig_kind = str(algo_sect.get("significance", "fixed_threshold")).strip()
    if sig_kind == "fixed_threshold":
        significance = FixedThreshold(float(algo_sect.get("i_star", 0.004)))
    elif sig_kind == "shuffle":
        significance = ShuffleSignificance(
            m=int(algo_sect.get("m", 100)),
            alpha=float(algo_sect.get("alpha", 0.05)),
        )
    else:
        raise ValueError(f"unknown significance rule {sig_kind!r}")
    algo = AlgorithmConfig(
        n0=int(algo_sect.get("n0", 2)),
        n_max=int(algo_sect.get("n_max", 3)),
        n_i=int(algo_sect.get("n_i", 3)),
        significance=significance,
    )
    schemes = []
    for name in parser.sections():
        if not name.startswith("scheme:"):
            continue
        label = name.split(":", 1)[1].strip()
        sect = parser[name]
        schemes.append((label, SchemeConfig(
            scheme=sect.get("scheme", label).strip(),
            cutoff=_parse_cutoff(sect),
            p_max=sect.getint("p_max", 8),
            subset_cap=sect.getint("subset_cap", 20),
        )))
    sweep = None
    if "sweep" in parser:
        sw = parser["sweep"]
        param = sw.get("parameter", "").strip().lower().replace("*", "_star")
        if param == "i_star" or param == "i__star":
            param = "i_star"
        values = tuple(float(v) for v in sw.get("values", "").split(",") if v.strip())
        sweep = (param, values)
    return ExperimentConfig(
        model=model,
        t_learn=exp.getint("t_learn", 500),
        t_test=exp.getint("t_test", 125),
        ensemble_size=exp.getint("ensemble_size", 100),
        schemes=tuple(schemes),
        est=est,
        algo=algo,
        h=exp.getint("h", 1),
        tau_max=exp.getint("tau_max", 2),
        predictor=exp.get("predictor", "knn").strip(),
        seed_base=exp.getint("seed_base", 0),
        workers=exp.getint("workers", 1),
        output_dir=exp.get("output_dir", "out").strip(),
        sweep=sweep,
    )
