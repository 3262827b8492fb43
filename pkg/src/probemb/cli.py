"""Command-line interface.

Subcommands: train, bench, ablate, confidence.  Exit codes: 0 success,
2 configuration error, 3 training error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .data import corrupt
from .encoder import encode, load_model, save_model
from .errors import ConfigurationError, ProbembError, TrainingError
from .evaluation import (ConfidenceRecords, baseline_confidences,
                         filter_out_curve, retrieval_metrics, spearman)
from .harness import (DEFAULT_FILTER_RATES, BENCH_METHODS, build_dataset,
                      dataset_base_seed, method_confidences, random_search,
                      resolve_method, run_ablation, run_benchmark, train)
from .report import (write_curves_csv, write_filterout_csv, write_report_csv,
                     write_train_log_csv)
from .scoring import score_matrix
from .seeds import stream


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probemb",
                                description="probabilistic embedding benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one method for one seed")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True, help="output directory")

    b = sub.add_parser("bench", help="multi-seed benchmark over methods")
    b.add_argument("--config", required=True)
    b.add_argument("--methods", default=None,
                   help="comma list (default: the eight standard methods)")
    b.add_argument("--seeds", type=int, default=None,
                   help="seed count; uses seeds 0..n-1 (default: config seeds)")
    b.add_argument("--out", required=True, help="report CSV path")

    a = sub.add_parser("ablate", help="axis ablation for one method")
    a.add_argument("--config", required=True)
    a.add_argument("--method", required=True)
    a.add_argument("--axis", required=True,
                   choices=["distribution", "scoring", "target"])
    a.add_argument("--out", required=True)

    c = sub.add_parser("confidence", help="filter-out curves for one model")
    c.add_argument("--config", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", required=True)
    return p


def _cmd_train(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.search is not None:
        config = random_search(config, config.loss.method)
    result = train(config, args.seed)
    save_model(result.model, out / "model.pemb", result.extras)
    write_train_log_csv(result.log, out / "log.csv")
    print(f"trained {result.method} (seed {args.seed}): "
          f"best val MAP@R = {result.best_val:.4f}")
    print(f"wrote {out / 'model.pemb'} and {out / 'log.csv'}")
    return 0


def _cmd_bench(args) -> int:
    config = load_config(args.config)
    methods = args.methods.split(",") if args.methods else list(BENCH_METHODS)
    seeds = list(range(args.seeds)) if args.seeds is not None else None
    report = run_benchmark(config, methods, seeds)
    out = Path(args.out)
    write_report_csv(report, out)
    write_filterout_csv(report, out.with_name(out.stem + "_filterout.csv"))
    from .figures import save_benchmark_figure, save_filterout_figure
    save_benchmark_figure(report, out.with_suffix(".png"))
    save_filterout_figure(report, out.with_name(out.stem + "_filterout.png"))
    print(f"wrote {out} ({len(report.rows)} rows + "
          f"{len(report.aggregates)} aggregates) and figures")
    return 0


def _cmd_ablate(args) -> int:
    config = load_config(args.config)
    resolve_method(args.method)
    report = run_ablation(config, args.method, args.axis)
    out = Path(args.out)
    write_report_csv(report, out)
    from .figures import save_benchmark_figure
    save_benchmark_figure(report, out.with_suffix(".png"))
    print(f"wrote {out} ({len(report.rows)} rows)")
    return 0


def _cmd_confidence(args) -> int:
    config = load_config(args.config)
    spec = resolve_method(config.loss.method)
    seed = args.seed if args.seed is not None else int(config.seeds[0])
    from .harness import _encoder_config, _scoring_kind  # reuse resolution
    enc_config = _encoder_config(config, spec, None)
    model, extras = load_model(args.model, enc_config)
    kind = _scoring_kind(config, spec, None)

    ds = build_dataset(config, seed)
    base = dataset_base_seed(config, seed)
    test = ds.subset("test")
    corrupted = corrupt(test, stream(base, "corrupt"))
    dist = encode(model, corrupted.x)
    scores = score_matrix(dist, dist, kind, stream(seed, "eval_mc", 51))
    _, _, nn_correct = retrieval_metrics(scores, corrupted.y)

    def subset_map(kept: np.ndarray):
        if kept.size < 2:
            return None
        return retrieval_metrics(scores[np.ix_(kept, kept)],
                                 corrupted.y[kept])[1]

    from .harness import TrainResult
    shim = TrainResult(method=config.loss.method, model=model, extras=extras,
                       dataset=ds, scoring=kind, loss_config=config.loss)
    sources = {"method": lambda: method_confidences(shim, corrupted.x),
               "max_posterior": lambda: baseline_confidences(
                   model, corrupted.x, "max_posterior", config.loss.scale),
               "magnitude": lambda: baseline_confidences(
                   model, corrupted.x, "magnitude")}
    rows = []
    curves: dict[str, list] = {}
    spearmans: dict[str, float] = {}
    for source, fn in sources.items():
        try:
            conf = np.asarray(fn())
        except ProbembError as exc:
            rows.append((source, "skipped", "", str(exc)))
            continue
        records = ConfidenceRecords(conf, nn_correct, corrupted.quality)
        curve = filter_out_curve(records, DEFAULT_FILTER_RATES, subset_map)
        curves[source] = curve
        for alpha, value in curve:
            rows.append((source, "map_at_r", repr(float(alpha)),
                         "" if value is None else repr(float(value))))
        rho = spearman(conf, corrupted.quality)
        spearmans[source] = rho
        rows.append((source, "spearman", "", repr(float(rho))))
    out = Path(args.out)
    write_curves_csv(rows, out)
    from .figures import save_confidence_figure
    save_confidence_figure(curves, spearmans, out.with_suffix(".png"))
    print(f"wrote {out} and {out.with_suffix('.png')}")
    return 0


_COMMANDS = {"train": _cmd_train, "bench": _cmd_bench,
             "ablate": _cmd_ablate, "confidence": _cmd_confidence}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
