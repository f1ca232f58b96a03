"""Command-line interface.

Subcommands: ``select`` (run one scheme on a CSV panel), ``forecast``
(select predictors, then forecast a held-out test segment), ``bench``
(run an ensemble experiment from a config file), ``sweep`` (parameter
sweeps) and ``complexity`` (print the closed-form cost table).

Exit codes: 0 on success, 1 on validation errors (bad flags, bad
configuration), 2 on runtime or data errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import load_config, run_experiment, run_sweep
from .core import (
    AlgorithmConfig,
    CrossValidationCutoff,
    EstimatorConfig,
    FixedThreshold,
    HeuristicCutoff,
    MmiMaxCutoff,
    PredictionTask,
    SchemeConfig,
    read_panel_csv,
    standardize_panel,
    valid_target_times,
)
from .forecast import knn_predict, linear_forecast, write_forecast_csv
from .selection import complexity_formulas, run_scheme, write_selection_csv

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with code 1 on argument errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="causalpred",
                     description="Model-free prediction from multivariate time "
                                 "series with causal predictor pre-selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--target", required=True, help="target variable name")
        p.add_argument("--scheme", default="optimal",
                       choices=["mi_rank", "cmi_forward", "causal_cmi_forward", "optimal"])
        p.add_argument("--h", type=int, default=1, help="prediction step")
        p.add_argument("--tau-max", type=int, default=2, help="maximum candidate lag")
        p.add_argument("--k", type=int, default=10,
                       help="neighbors for selection estimates and prediction")
        p.add_argument("--k-algo", type=int, default=50,
                       help="neighbors in the pre-selection tests")
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="heuristic cutoff fraction")
        p.add_argument("--folds", type=int, default=None,
                       help="cross-validation folds for the cutoff")
        p.add_argument("--threshold", type=float, default=0.004,
                       help="fixed significance threshold of the pre-selection")
        p.add_argument("--p-max", type=int, default=8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="directory for CSV output")

    p_select = sub.add_parser("select", help="run one selection scheme on a CSV panel")
    p_select.add_argument("data", help="CSV panel (header row of names)")
    add_common(p_select)

    p_fc = sub.add_parser("forecast", help="select predictors and forecast a test segment")
    p_fc.add_argument("data", help="CSV panel (header row of names)")
    add_common(p_fc)
    p_fc.add_argument("--test-len", type=int, required=True,
                      help="length of the held-out test segment at the end")
    p_fc.add_argument("--predictor", choices=["knn", "linear"], default="knn")

    p_bench = sub.add_parser("bench", help="run an ensemble experiment")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--seed", type=int, default=None, help="override seed_base")
    p_bench.add_argument("--out", default=None, help="override output_dir")
    p_bench.add_argument("--workers", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run the sweep configured in a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None, help="override output_dir")
    p_sweep.add_argument("--workers", type=int, default=None)

    p_cx = sub.add_parser("complexity", help="print the closed-form cost table")
    p_cx.add_argument("--n", type=int, required=True, help="number of variables")
    p_cx.add_argument("--tau-max", type=int, default=2)
    p_cx.add_argument("--p-max", type=int, default=8)
    p_cx.add_argument("--p-size", type=int, default=7,
                      help="number of causal predictors")
    p_cx.add_argument("--n0", type=int, default=2)
    p_cx.add_argument("--n-max", type=int, default=3)
    p_cx.add_argument("--n-i", type=int, default=3)
    p_cx.add_argument("--t", type=int, default=None,
                      help="series length for the cross-validation extra cost")
    return parser


def _scheme_config(args) -> SchemeConfig:
    if args.lam is not None and args.folds is not None:
        raise ValueError("conflicting cutoff flags: give --lambda or --folds, not both")
    if args.lam is not None:
        cutoff = HeuristicCutoff(args.lam)
    elif args.folds is not None:
        cutoff = CrossValidationCutoff(args.folds)
    elif args.scheme == "optimal":
        cutoff = MmiMaxCutoff()
    else:
        cutoff = CrossValidationCutoff(5)
    return SchemeConfig(scheme=args.scheme, cutoff=cutoff, p_max=args.p_max)


def _run_selection(args, panel, task):
    est = EstimatorConfig(k_algo=args.k_algo, k_cmi_mmi=args.k)
    algo = AlgorithmConfig(significance=FixedThreshold(args.threshold))
    scheme_cfg = _scheme_config(args)
    result = run_scheme(panel, task, est, algo, scheme_cfg, rng_seed=args.seed)
    return result, est


def _print_selection(result, names):
    print(f"scheme: {result.scheme}")
    if result.preselected is not None:
        pres = ", ".join(v.label(names) for v in result.preselected)
        print(f"causal predictors ({len(result.preselected)}): {pres}")
    print("ranking:")
    from .selection import ranked_entry_items

    for step, (item, score) in enumerate(result.ranked, start=1):
        subset = ranked_entry_items(item)
        label = ", ".join(v.label(names) for v in subset)
        print(f"  {step:2d}  {score: .5f}  {label}")
    if result.chosen_set is not None:
        chosen = ", ".join(v.label(names) for v in result.chosen_set)
        print(f"chosen p = {result.chosen_p}: {chosen}")
    if result.cv_errors:
        errs = ", ".join(f"p={p}: {e:.4f}" for p, e in result.cv_errors)
        print(f"cross-validation SRMSE: {errs}")
    print(f"cost: {result.cost.weighted_cost} "
          f"({result.cost.n_estimates} estimates)")


def _cmd_select(args) -> int:
    panel = read_panel_csv(args.data)
    task = PredictionTask(target=panel.var_index(args.target),
                          h=args.h, tau_max=args.tau_max)
    panel_std, _, _ = standardize_panel(panel)
    result, _ = _run_selection(args, panel_std, task)
    _print_selection(result, panel.names)
    if args.out:
        from pathlib import Path

        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        write_selection_csv(result, outdir / "selection.csv", panel.names)
        print(f"wrote {outdir / 'selection.csv'}")
    return 0


def _cmd_forecast(args) -> int:
    from .bench import split_learn_test

    panel = read_panel_csv(args.data)
    task = PredictionTask(target=panel.var_index(args.target),
                          h=args.h, tau_max=args.tau_max)
    t_learn = panel.T - args.test_len
    if t_learn <= task.min_target_time + 1:
        raise ValueError("--test-len leaves too short a learning segment")
    panel_std, means, stds = standardize_panel(panel, stats_rows=range(t_learn))
    learn, test = split_learn_test(panel_std, t_learn, task)
    result, est = _run_selection(args, learn, task)
    _print_selection(result, panel.names)

    test_times = valid_target_times(test, task)
    preds = tuple(result.chosen_set)
    if args.predictor == "knn":
        fc = knn_predict(learn, test, preds, task, est.k_predict, test_times)
    else:
        fc = linear_forecast(learn, test, preds, task, test_times)
    mean_t, std_t = means[task.target], stds[task.target]
    raw_pred = fc.predictions * std_t + mean_t
    raw_sig = fc.sigmas * std_t
    offset = t_learn - task.min_target_time
    truth = panel.values[fc.target_times + offset, task.target]
    print(f"test SRMSE ({args.predictor}): {fc.srmse:.4f} over {len(raw_pred)} steps")
    if args.out:
        from pathlib import Path

        from .forecast import ForecastResult

        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        raw = ForecastResult(fc.target_times + offset, raw_pred, raw_sig, fc.srmse)
        write_forecast_csv(raw, outdir / "forecast.csv", truth=truth)
        print(f"wrote {outdir / 'forecast.csv'}")
    return 0


def _cmd_bench(args) -> int:
    from dataclasses import replace

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed_base=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    res = run_experiment(cfg)
    for scheme, stat, value in res["summary"]:
        print(f"{scheme:24s} {stat:24s} {value}")
    for member, scheme, msg in res["errors"]:
        print(f"warning: member {member} scheme {scheme}: {msg}", file=sys.stderr)
    print(f"reports written to {res['output_dir']}")
    return 0


def _cmd_sweep(args) -> int:
    from dataclasses import replace

    cfg = load_config(args.config)
    if cfg.sweep is None:
        raise ValueError("config has no [sweep] section")
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    results = run_sweep(cfg)
    param, _ = cfg.sweep
    for value, res in results:
        print(f"{param} = {value:g}: reports in {res['output_dir']}")
    print(f"sweep summary written to {cfg.output_dir}/sweep_summary.csv")
    return 0


def _cmd_complexity(args) -> int:
    table = complexity_formulas(args.n, args.tau_max, args.p_max, args.p_size,
                                args.n0, args.n_max, args.n_i, args.t)
    print(f"N={args.n} tau_max={args.tau_max} p_max={args.p_max} "
          f"P={args.p_size} n0={args.n0} n_max={args.n_max} n_i={args.n_i}")
    labels = {
        "mi": "MI ranking",
        "cmi_forward": "CMI forward selection",
        "causal_cmi": "causal CMI forward",
        "optimal": "optimal subset search",
        "algo_typical": "pre-selection (typical)",
        "algo_worst": "pre-selection (worst case)",
        "cv_extra": "cross-validation extra",
    }
    for key, label in labels.items():
        value = table[key]
        if value is None:
            continue
        print(f"  {label:28s} {value}")
    return 0


_COMMANDS = {
    "select": _cmd_select,
    "forecast": _cmd_forecast,
    "bench": _cmd_bench,
    "sweep": _cmd_sweep,
    "complexity": _cmd_complexity,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"causalpred: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"causalpred: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
