"""Command-line surface: synth, train-head, adapt, validate-theory, eval, plot.

Exit codes: 0 success, 2 invalid input or configuration, 3 parse error in a
persisted artifact, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io as tio
from .errors import (
    DegenerateLabels,
    InsufficientSamples,
    InvalidConfig,
    InvalidInput,
    NumericalFailure,
    ParseError,
)
from .head import accuracy, load_head, predict, save_head, train_head
from .linalg import covariance
from .pipeline import (
    AdaptConfig,
    adapt_online,
    adapt_transductive,
    validate_alignment_trace,
    validate_uncertainty_groups,
)
from .plot import write_scatter_svg
from .synth import gen_linear_shift, gen_nonlinear_shift

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PARSE = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcalign",
        description="Test-time correlation alignment toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic domain-shift dataset")
    p.add_argument("--shift", choices=("linear", "nonlinear"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train-head", help="train a softmax head on labeled embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("adapt", help="adapt test embeddings and emit predictions")
    p.add_argument("--test", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--labels")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--solver", choices=("closed", "gradient"), default="closed")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--select", choices=("global", "class-balanced"), default="global")
    p.add_argument("--mode", choices=("transductive", "online"), default="transductive")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--out-preds", required=True)
    p.add_argument("--out-report", required=True)

    p = sub.add_parser("validate-theory", help="run a theory-validation experiment")
    p.add_argument("--experiment", choices=("groups", "trace"), required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--source", required=True, help="source embeddings for the reference statistics")
    p.add_argument("--labels", help="test labels (required for the trace experiment)")
    p.add_argument("--n-groups", type=int, default=10)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--select", choices=("global", "class-balanced"), default="global")
    p.add_argument("--out-csv", required=True)

    p = sub.add_parser("eval", help="score stored predictions against labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True)

    p = sub.add_parser("plot", help="scatter-plot 2-D embeddings to SVG")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--transformed")
    p.add_argument("--out", required=True)

    return parser


def _cfg_from_args(args) -> AdaptConfig:
    return AdaptConfig(
        k=args.k,
        eps=args.eps,
        solver=getattr(args, "solver", "gradient"),
        lr=args.lr,
        max_iters=args.iters,
        selection_mode=args.select.replace("-", "_"),
        mode=getattr(args, "mode", "transductive"),
        batch_size=getattr(args, "batch_size", 64),
    )


def _cmd_synth(args) -> int:
    gen = gen_linear_shift if args.shift == "linear" else gen_nonlinear_shift
    data = gen(args.seed)
    os.makedirs(args.out, exist_ok=True)
    tio.write_embeddings(os.path.join(args.out, "source.tcae"), data.source.features)
    tio.write_labels(os.path.join(args.out, "source.tcal"), data.source.labels)
    tio.write_embeddings(os.path.join(args.out, "target.tcae"), data.target.features)
    tio.write_labels(os.path.join(args.out, "target.tcal"), data.target.labels)
    print(
        f"wrote {args.shift} shift (seed {args.seed}): "
        f"source {data.source.features.shape[0]} rows, target {data.target.features.shape[0]} rows -> {args.out}"
    )
    return EXIT_OK


def _cmd_train_head(args) -> int:
    z = tio.read_embeddings(args.embeddings)
    labels = tio.read_labels(args.labels)
    head = train_head(z, labels, lr=args.lr, epochs=args.epochs)
    save_head(head, args.out)
    acc = accuracy(predict(head, z), labels)
    print(f"trained head: c={head.n_classes} d={head.dim} training accuracy {acc:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_adapt(args) -> int:
    test = tio.read_embeddings(args.test)
    head = load_head(args.head)
    labels = tio.read_labels(args.labels) if args.labels else None
    cfg = _cfg_from_args(args)
    if cfg.mode == "online":
        preds, report = adapt_online(test, head, cfg, labels=labels)
    else:
        preds, report, _ = adapt_transductive(test, head, cfg, labels=labels)
    tio.write_predictions_csv(args.out_preds, preds)
    tio.write_report_json(args.out_report, report.to_dict())
    summary = {
        "mode": report.mode,
        "accuracy_before": report.accuracy_before,
        "accuracy_after": report.accuracy_after,
        "dist_test_to_pseudo_before": report.dist_test_to_pseudo_before,
        "dist_test_to_pseudo_after": report.dist_test_to_pseudo_after,
    }
    print(json.dumps({k: v for k, v in summary.items() if v is not None}))
    return EXIT_OK


def _cmd_validate_theory(args) -> int:
    test = tio.read_embeddings(args.test)
    head = load_head(args.head)
    source = tio.read_embeddings(args.source)
    source_stats = covariance(source)
    if args.experiment == "groups":
        rows = validate_uncertainty_groups(test, head, source_stats, n_groups=args.n_groups)
        tio.table_to_csv(
            args.out_csv,
            ["group_index", "mean_uncertainty", "dist_to_source"],
            [(r.group_index, r.mean_uncertainty, r.dist_to_source) for r in rows],
        )
        from .metrics import spearman

        rho = spearman([r.group_index for r in rows], [r.dist_to_source for r in rows])
        print(json.dumps({"experiment": "groups", "n_groups": len(rows), "spearman": rho}))
        return EXIT_OK

    if not args.labels:
        raise InvalidInput("--labels is required for the trace experiment")
    labels = tio.read_labels(args.labels)
    cfg = _cfg_from_args(args)
    cfg.solver = "gradient"
    cfg.mode = "transductive"
    result = validate_alignment_trace(
        test, head, cfg, source_stats, labels, record_every=args.record_every
    )
    tio.table_to_csv(
        args.out_csv,
        ["iteration", "dist_to_pseudo", "dist_to_source", "accuracy"],
        [(r.iteration, r.dist_to_pseudo, r.dist_to_source, r.accuracy) for r in result.rows],
    )
    print(
        json.dumps(
            {
                "experiment": "trace",
                "rows": len(result.rows),
                "spearman_pseudo_vs_source": result.spearman_pseudo_vs_source,
                "spearman_pseudo_vs_accuracy": result.spearman_pseudo_vs_accuracy,
                "r2_pseudo_vs_source": result.r2_pseudo_vs_source,
                "r2_pseudo_vs_accuracy": result.r2_pseudo_vs_accuracy,
            }
        )
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    preds = tio.read_predictions_csv(args.preds)
    labels = tio.read_labels(args.labels)
    acc = accuracy(preds, labels)
    print(json.dumps({"n": int(labels.size), "accuracy": acc}))
    return EXIT_OK


def _cmd_plot(args) -> int:
    series = [
        ("source", tio.read_embeddings(args.source)),
        ("target", tio.read_embeddings(args.target)),
    ]
    if args.transformed:
        series.append(("transformed", tio.read_embeddings(args.transformed)))
    write_scatter_svg(args.out, series)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "train-head": _cmd_train_head,
    "adapt": _cmd_adapt,
    "validate-theory": _cmd_validate_theory,
    "eval": _cmd_eval,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidInput, InvalidConfig, InsufficientSamples, DegenerateLabels) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
