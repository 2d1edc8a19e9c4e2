"""Command-line interface for the grid conformal-prediction toolkit.

Subcommands compose the library operations over on-disk grid containers and
JSON configs/reports:

    synth      generate a synthetic probability grid plus sampled labels
    split      sample a train/calibration/test role mask
    score      compute per-label non-conformity scores
    aggregate  spatially aggregate a score field
    calibrate  compute the conformal threshold (JSON)
    predict    build prediction sets from scores and a threshold
    evaluate   run the full repeated-trial experiment (JSON report)
    sweep      evaluate across a parameter range (JSON report)
    verify     run the theoretical-identity oracles (JSON report)

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.  All outputs
are deterministic functions of the inputs and seeds; rerunning a command
reproduces its reports and maps byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .conformal import (
    AggregationConfig,
    CalibrationResult,
    NeighborhoodSpec,
    aggregate,
    calibrate,
    predict_sets,
)
from .errors import GridError, InvalidConfig
from .experiments import RunConfig, run_experiment, sample_split, sweep
from .gridio import load_grid, save_grid
from .maps import render_size_map
from .oracle import (
    OracleReport,
    cal_true_label_scores,
    exchangeability_permutation_test,
    integrated_set_size,
    score_exceedance_rate,
    test_all_label_scores,
    test_true_label_scores,
)
from .rng import RandomizationField, derive_seed
from .scores import SCORE_KINDS, ScoreFunctionConfig, score_field
from .synthetic import SynthConfig, generate_synthetic


class _Parser(argparse.ArgumentParser):
    """argparse exits usage errors with code 2; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args) or 0
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridcp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--smoothness", type=float, default=None)
    p.add_argument("--signal", type=float, default=None)
    p.add_argument("--ambiguity", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="derives noise and label seeds")
    p.add_argument("--noise-seed", type=int, default=None)
    p.add_argument("--label-seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file with generator settings")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="sample train/cal/test roles")
    p.add_argument("--in", dest="in_dir", default=".", help="dataset directory")
    p.add_argument("--out", default=None, help="output directory (default: --in)")
    p.add_argument("--labels", default=None, help="labels container or CSV (default: IN/labels)")
    p.add_argument("--train-count", type=int, default=128)
    p.add_argument("--gamma", type=float, default=0.5, help="calibration ratio")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("score", help="compute non-conformity scores")
    p.add_argument("--in", dest="in_dir", default=".")
    p.add_argument("--out", default=None)
    _add_score_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("aggregate", help="spatially aggregate a score field")
    p.add_argument("--in", dest="in_dir", default=".")
    p.add_argument("--out", default=None, help="output directory (default: overwrite --in)")
    _add_sacp_flags(p)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("calibrate", help="compute the conformal threshold")
    p.add_argument("--in", dest="in_dir", default=".")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None, help="JSON path (default: IN/calibration.json)")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("predict", help="build prediction sets")
    p.add_argument("--in", dest="in_dir", default=".")
    p.add_argument("--calibration", default=None, help="default: IN/calibration.json")
    p.add_argument("--out", default=None)
    p.add_argument("--map", default=None, help="also write a PGM size map here")
    p.add_argument("--include-cal", action="store_true", help="define sets at cal pixels too")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="repeated-trial experiment report")
    p.add_argument("--in", dest="in_dir", default=".")
    _add_run_flags(p)
    p.add_argument("--out", default=None, help="JSON report path (default: stdout)")
    p.add_argument("--map", default=None, help="PGM size map of the first trial's sets")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate across one parameter")
    p.add_argument("--in", dest="in_dir", default=".")
    _add_run_flags(p)
    p.add_argument("--param", required=True, choices=("lambda", "k", "gamma", "alpha"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default=None, help="JSON report path (default: stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="run the theoretical-identity oracles")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--width", type=int, default=48)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--train-count", type=int, default=64)
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--out", default=None, help="JSON report path (default: stdout)")
    p.set_defaults(func=_cmd_verify)

    return parser


def _add_score_flags(p) -> None:
    p.add_argument("--score", choices=SCORE_KINDS, default=None, help="score function kind")
    p.add_argument("--raps-lambda", type=float, default=None)
    p.add_argument("--raps-kreg", type=int, default=None)
    p.add_argument("--saps-lambda", type=float, default=None)


def _add_sacp_flags(p) -> None:
    p.add_argument("--sacp.lambda", dest="sacp_lambda", type=float, default=None,
                   help="aggregation blend weight in [0, 1]")
    p.add_argument("--sacp.k", dest="sacp_k", type=int, default=None,
                   help="aggregation iterations")
    p.add_argument("--sacp.neighborhood", dest="sacp_neighborhood", default=None,
                   help="four-connected | eight-connected | chebyshev-radius-R")


def _add_run_flags(p) -> None:
    p.add_argument("--alpha", type=float, default=None)
    _add_score_flags(p)
    _add_sacp_flags(p)
    p.add_argument("--gamma", type=float, default=None, help="calibration ratio")
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file with run settings")


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except ValueError as exc:
        raise InvalidConfig(f"bad JSON in {path}: {exc}") from None


def _emit_json(payload: dict, out, label: str) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        print(f"wrote {label} to {out}")


def _override(value, fallback):
    return fallback if value is None else value


def _score_cfg(args, base: ScoreFunctionConfig) -> ScoreFunctionConfig:
    return ScoreFunctionConfig(
        kind=_override(args.score, base.kind),
        raps_lambda=_override(args.raps_lambda, base.raps_lambda),
        raps_kreg=_override(args.raps_kreg, base.raps_kreg),
        saps_lambda=_override(args.saps_lambda, base.saps_lambda),
    )


def _sacp_cfg(args, base: AggregationConfig) -> AggregationConfig:
    neighborhood = base.neighborhood
    if args.sacp_neighborhood is not None:
        neighborhood = NeighborhoodSpec.from_string(args.sacp_neighborhood)
    return AggregationConfig(
        blend=_override(args.sacp_lambda, base.blend),
        iterations=_override(args.sacp_k, base.iterations),
        neighborhood=neighborhood,
    )


def _run_cfg(args) -> RunConfig:
    base = RunConfig.from_dict(_read_json(args.config)) if args.config else RunConfig()
    return RunConfig(
        alpha=_override(args.alpha, base.alpha),
        score=_score_cfg(args, base.score),
        sacp=_sacp_cfg(args, base.sacp),
        cal_ratio=_override(args.gamma, base.cal_ratio),
        trials=_override(args.trials, base.trials),
        seed=_override(args.seed, base.seed),
        train_count=_override(args.train_count, base.train_count),
    )


def _cmd_synth(args) -> int:
    base = SynthConfig.from_dict(_read_json(args.config)) if args.config else SynthConfig()
    noise_seed, label_seed = base.noise_seed, base.label_seed
    if args.seed is not None:
        noise_seed = derive_seed(args.seed, 0)
        label_seed = derive_seed(args.seed, 1)
    cfg = SynthConfig(
        height=_override(args.height, base.height),
        width=_override(args.width, base.width),
        num_classes=_override(args.classes, base.num_classes),
        smoothness=_override(args.smoothness, base.smoothness),
        signal=_override(args.signal, base.signal),
        ambiguity=_override(args.ambiguity, base.ambiguity),
        noise_seed=_override(args.noise_seed, noise_seed),
        label_seed=_override(args.label_seed, label_seed),
    )
    grid, labels = generate_synthetic(cfg)
    out = Path(args.out)
    save_grid(grid, out / "probabilities")
    save_grid(labels, out / "labels", classes=cfg.num_classes)
    print(f"wrote {out / 'probabilities'} and {out / 'labels'}")
    return 0


def _cmd_split(args) -> int:
    labels_path = args.labels if args.labels else Path(args.in_dir) / "labels"
    labels = load_grid(labels_path, "labels")
    mask = sample_split(labels, args.train_count, args.gamma, args.seed)
    out = Path(args.out if args.out else args.in_dir)
    save_grid(mask, out / "mask")
    counts = mask.counts()
    print(f"wrote {out / 'mask'} ({counts['train']} train, "
          f"{counts['cal']} cal, {counts['test']} test)")
    return 0


def _cmd_score(args) -> int:
    in_dir = Path(args.in_dir)
    grid = load_grid(in_dir / "probabilities", "probabilities")
    mask = load_grid(in_dir / "mask", "mask")
    cfg = _score_cfg(args, ScoreFunctionConfig())
    rng = RandomizationField(args.seed, grid.height, grid.width)
    field = score_field(grid, mask, cfg, rng)
    out = Path(args.out if args.out else args.in_dir)
    save_grid(field, out / "scores")
    print(f"wrote {out / 'scores'}")
    return 0


def _cmd_aggregate(args) -> int:
    in_dir = Path(args.in_dir)
    field = load_grid(in_dir / "scores", "scores")
    mask = load_grid(in_dir / "mask", "mask")
    cfg = _sacp_cfg(args, AggregationConfig())
    out = Path(args.out if args.out else args.in_dir)
    save_grid(aggregate(field, mask, cfg), out / "scores")
    print(f"wrote {out / 'scores'}")
    return 0


def _cmd_calibrate(args) -> int:
    in_dir = Path(args.in_dir)
    field = load_grid(in_dir / "scores", "scores")
    labels = load_grid(in_dir / "labels", "labels")
    mask = load_grid(in_dir / "mask", "mask")
    result = calibrate(field, labels, mask, args.alpha)
    out = args.out if args.out else in_dir / "calibration.json"
    _emit_json(result.to_dict(), out, "calibration")
    return 0


def _cmd_predict(args) -> int:
    in_dir = Path(args.in_dir)
    field = load_grid(in_dir / "scores", "scores")
    mask = load_grid(in_dir / "mask", "mask")
    cal_path = args.calibration if args.calibration else in_dir / "calibration.json"
    cal = CalibrationResult.from_dict(_read_json(cal_path))
    sets = predict_sets(field, mask, cal, include_cal=args.include_cal)
    out = Path(args.out if args.out else args.in_dir)
    save_grid(sets, out / "sets")
    print(f"wrote {out / 'sets'}")
    if args.map:
        render_size_map(sets, args.map)
        print(f"wrote {args.map}")
    return 0


def _cmd_evaluate(args) -> int:
    in_dir = Path(args.in_dir)
    grid = load_grid(in_dir / "probabilities", "probabilities")
    labels = load_grid(in_dir / "labels", "labels")
    cfg = _run_cfg(args)
    summary = run_experiment(grid, labels, cfg)
    payload = {"config": cfg.to_dict()}
    payload.update(summary.to_dict())
    _emit_json(payload, args.out, "report")
    if args.map:
        trial_seed = derive_seed(cfg.seed, 0)
        mask = sample_split(labels, cfg.train_count, cfg.cal_ratio, trial_seed)
        rng = RandomizationField(derive_seed(trial_seed, 1), grid.height, grid.width)
        field = aggregate(score_field(grid, mask, cfg.score, rng), mask, cfg.sacp)
        sets = predict_sets(field, mask, calibrate(field, labels, mask, cfg.alpha))
        render_size_map(sets, args.map)
        print(f"wrote {args.map}")
    return 0


def _cmd_sweep(args) -> int:
    in_dir = Path(args.in_dir)
    grid = load_grid(in_dir / "probabilities", "probabilities")
    labels = load_grid(in_dir / "labels", "labels")
    cfg = _run_cfg(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidConfig(f"bad --values list {args.values!r}: {exc}") from None
    summaries = sweep(grid, labels, cfg, args.param, values)
    payload = {
        "config": cfg.to_dict(),
        "param": args.param,
        "values": values,
        "summaries": [s.to_dict() for s in summaries],
    }
    _emit_json(payload, args.out, "sweep report")
    return 0


def _cmd_verify(args) -> int:
    cfg = SynthConfig(
        height=args.height,
        width=args.width,
        num_classes=args.classes,
        smoothness=4.0,
        signal=3.0,
        noise_seed=derive_seed(args.seed, 0),
        label_seed=derive_seed(args.seed, 1),
    )
    grid, labels = generate_synthetic(cfg)
    mask = sample_split(labels, args.train_count, 0.5, derive_seed(args.seed, 2))
    rng = RandomizationField(derive_seed(args.seed, 3), grid.height, grid.width)
    field = score_field(grid, mask, ScoreFunctionConfig(kind="aps"), rng)

    cal_scores = cal_true_label_scores(field, labels, mask)
    test_all = test_all_label_scores(field, mask)
    test_true = test_true_label_scores(field, labels, mask)
    lhs, rhs = integrated_set_size(cal_scores, test_all)
    report = OracleReport(
        r_statistic=score_exceedance_rate(cal_scores, test_all),
        integral_lhs=lhs,
        integral_rhs_closed_form=rhs,
        permutation_pvalue=exchangeability_permutation_test(
            cal_scores, test_true, args.permutations, derive_seed(args.seed, 4)
        ),
    )
    _emit_json(report.to_dict(), args.out, "oracle report")
    if not report.identity_holds:
        print(
            f"error: integrated set size identity violated: lhs={lhs!r} rhs={rhs!r}",
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
