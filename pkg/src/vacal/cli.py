"""Command-line orchestration: synthesis, fetching, splitting, calibration,
temperature sweeps, metric reports, and reliability diagrams.

Exit codes: 0 success, 1 runtime/I-O failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import venn_abers
from .diagram import write_reliability_svg
from .metrics import bins_to_csv, evaluate_all, reliability_bins
from .records import (
    SplitSpec,
    read_records,
    read_scores_csv,
    split,
    transform_scores,
    write_records,
    write_report,
)
from .scorer import (
    BOOLQ_TEMPLATE,
    SENTIMENT_TEMPLATE,
    CredentialError,
    ScorerConfig,
    ScorerError,
    fetch_dataset,
)
from .synth import SynthConfig, generate
from .temperature import TemperatureModel, fit_temperature

SWEEP_COLUMNS = "tau,method,n,ece,brier,auc,f1_macro"
_SWEPT_METHODS = ("softmax2", "softmaxK", "ivap2", "ivapK")
_ALL_METHODS = _SWEPT_METHODS + ("tempscaled",)


def _parse_tau_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--tau-grid must be lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"--tau-grid must be lo:hi:steps with numeric fields, got {text!r}") from None
    if not 0 < lo <= hi or steps < 1:
        raise ValueError(f"--tau-grid requires 0 < lo <= hi and steps >= 1, got {text!r}")
    if steps == 1:
        return [lo]
    return [float(t) for t in np.geomspace(lo, hi, steps)]


def _split_records(args):
    records = read_records(args.records, args.format)
    spec = SplitSpec(seed=args.seed, calibration_fraction=args.calibration_fraction)
    return split(records, spec)


def _method_predictions(method, cal_records, test_records, tau):
    """Test-set positive-class probabilities for one sweep method.

    Returns (predictions, effective tau): the learned temperature for
    tempscaled, the requested one otherwise.
    """
    if method in ("softmax2", "softmaxK"):
        kind = method
        preds = [ex.score for ex in transform_scores(test_records, kind, tau)]
        return preds, tau
    if method in ("ivap2", "ivapK"):
        kind = "softmax2" if method == "ivap2" else "softmaxK"
        calibrator = venn_abers.fit(transform_scores(cal_records, kind, tau))
        zs = [ex.score for ex in transform_scores(test_records, kind, tau)]
        preds = [merged for _, merged in calibrator.predict_batch(zs)]
        return preds, tau
    if method == "tempscaled":
        model = fit_temperature(cal_records, "softmax2")
        preds = [ex.score for ex in model.apply(test_records)]
        return preds, model.tau_hat
    raise ValueError(f"unknown method {method!r}")


def cmd_synth(args) -> int:
    config = SynthConfig(n=args.n, prior=args.prior, mu=args.mu, sigma=args.sigma, seed=args.seed)
    write_records(generate(config), args.out)
    return 0


def cmd_split(args) -> int:
    calibration, test = _split_records(args)
    write_records(calibration, args.out_calibration)
    write_records(test, args.out_test)
    return 0


def cmd_fit(args) -> int:
    records = read_records(args.records, args.format)
    if args.model_type == "ivap":
        calibrator = venn_abers.fit(transform_scores(records, args.kind, args.tau))
        calibrator.save(args.out)
    else:
        model = fit_temperature(records, args.kind, (args.tau_min, args.tau_max))
        model.save(args.out)
    return 0


def cmd_predict(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "cells" in doc:
        calibrator = venn_abers.IvapCalibrator.from_json(doc)
        if args.scores:
            examples = read_scores_csv(args.scores)
            ids = [str(i) for i in range(len(examples))]
            zs = [ex.score for ex in examples]
        elif args.records:
            records = read_records(args.records, args.format)
            ids = [r.id for r in records]
            zs = [ex.score for ex in transform_scores(records, args.kind, args.tau)]
        else:
            raise ValueError("IVAP models need --scores or --records input")
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("id,p0,p1,p\n")
            for ex_id, (mp, merged) in zip(ids, calibrator.predict_batch(zs)):
                fh.write(f"{ex_id},{mp.p0!r},{mp.p1!r},{merged!r}\n")
    elif "tau_hat" in doc:
        if not args.records:
            raise ValueError("temperature models map logits, so they need --records input")
        model = TemperatureModel.from_json(doc)
        records = read_records(args.records, args.format)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("id,p\n")
            for record, ex in zip(records, model.apply(records)):
                fh.write(f"{record.id},{ex.score!r}\n")
    else:
        raise ValueError(f"{args.model}: not a recognized model document")
    return 0


def _read_predictions(path) -> tuple[list[str], list[float]]:
    ids, preds = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header not in ("id,p0,p1,p", "id,p"):
            raise ValueError(f"{path}: unrecognized prediction header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            ids.append(parts[0])
            preds.append(float(parts[-1]))
    return ids, preds


def cmd_eval(args) -> int:
    ids, preds = _read_predictions(args.preds)
    if not preds:
        raise ValueError(f"{args.preds}: no predictions to evaluate")
    if args.records:
        labels_by_id = {r.id: r.label for r in read_records(args.records, args.format)}
    elif args.scores:
        examples = read_scores_csv(args.scores)
        labels_by_id = {str(i): ex.label for i, ex in enumerate(examples)}
    else:
        raise ValueError("label source required: --records or --scores")
    try:
        labels = [labels_by_id[ex_id] for ex_id in ids]
    except KeyError as exc:
        raise ValueError(f"prediction id {exc.args[0]!r} missing from the label source") from None
    report = evaluate_all(preds, preds, labels, M=args.bins, tag=args.tag)
    if args.out:
        write_report(report, args.out)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        print()
    return 0


def cmd_sweep(args) -> int:
    methods = args.methods.split(",")
    for method in methods:
        if method not in _ALL_METHODS:
            raise ValueError(f"unknown method {method!r} (expected one of {', '.join(_ALL_METHODS)})")
    grid = _parse_tau_grid(args.tau_grid)
    calibration, test = _split_records(args)
    labels = [r.label for r in test]
    rows = []
    for tau in grid:
        for method in methods:
            if method == "tempscaled":
                continue
            preds, _ = _method_predictions(method, calibration, test, tau)
            report = evaluate_all(preds, preds, labels, M=10, tag=method)
            rows.append((tau, method, report))
    if "tempscaled" in methods:
        preds, tau_hat = _method_predictions("tempscaled", calibration, test, None)
        report = evaluate_all(preds, preds, labels, M=10, tag="tempscaled")
        rows.append((tau_hat, "tempscaled", report))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(SWEEP_COLUMNS + "\n")
        for tau, method, report in rows:
            fh.write(
                f"{tau!r},{method},{report.n},{report.ece!r},{report.brier!r},"
                f"{report.auc!r},{report.f1_macro!r}\n"
            )
    return 0


def cmd_reliability(args) -> int:
    calibration, test = _split_records(args)
    preds, _ = _method_predictions(args.method, calibration, test, args.tau)
    if not preds:
        raise ValueError("no predictions to bin")
    bins = reliability_bins(preds, [r.label for r in test], args.bins)
    bins_to_csv(bins, args.out)
    if args.svg:
        write_reliability_svg(bins, args.svg)
    return 0


def cmd_fetch(args) -> int:
    if os.path.exists(args.out) and os.path.getsize(args.out) and not args.resume:
        raise ValueError(
            f"journal {args.out} already exists; pass --resume to continue it"
        )
    template = BOOLQ_TEMPLATE if args.task == "boolq" else SENTIMENT_TEMPLATE
    tokens = tuple(args.answer_tokens.split(","))
    if len(tokens) != 2:
        raise ValueError(f"--answer-tokens must be two comma-separated tokens, got {args.answer_tokens!r}")
    config = ScorerConfig(
        base_url=args.base_url,
        model=args.model,
        answer_tokens=tokens,
        auth_token_env=args.auth_token_env,
        top_logprobs=args.top_logprobs,
        timeout=args.timeout,
        max_in_flight=args.max_in_flight,
        max_retries=args.max_retries,
        missing_token_fill=None if args.error_on_missing else args.missing_token_fill,
    )
    examples = []
    with open(args.examples, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "id" not in obj:
                raise ValueError(f"{args.examples}: line {lineno}: missing id")
            fields = {k: v for k, v in obj.items() if k != "id"}
            examples.append((str(obj["id"]), fields))
    records = fetch_dataset(config, examples, template, args.out)
    print(f"scored {len(records)} of {len(examples)} examples -> {args.out}")
    return 0


def _add_record_input(sub, with_split=False):
    sub.add_argument("--records", required=True, help="record file (JSONL or CSV)")
    sub.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    if with_split:
        sub.add_argument("--calibration-fraction", type=float, default=0.2)
        sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vacal", description="Calibrate binary answer-token logits."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("synth", help="generate synthetic records with known posterior")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--prior", type=float, default=0.5)
    sub.add_argument("--mu", type=float, default=1.0)
    sub.add_argument("--sigma", type=float, default=1.0)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_synth)

    sub = commands.add_parser("split", help="deterministic calibration/test split")
    _add_record_input(sub, with_split=True)
    sub.add_argument("--out-calibration", required=True)
    sub.add_argument("--out-test", required=True)
    sub.set_defaults(func=cmd_split)

    sub = commands.add_parser("fit", help="fit an IVAP calibrator or temperature model")
    _add_record_input(sub)
    sub.add_argument("--model-type", choices=("ivap", "temperature"), required=True)
    sub.add_argument("--kind", choices=("softmax2", "softmaxK"), default="softmax2")
    sub.add_argument("--tau", type=float, default=1.0, help="transform temperature for IVAP fits")
    sub.add_argument("--tau-min", type=float, default=0.01)
    sub.add_argument("--tau-max", type=float, default=1000.0)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_fit)

    sub = commands.add_parser("predict", help="map scores or records through a saved model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--scores", help="score,label CSV (IVAP models; row-index ids)")
    sub.add_argument("--records", help="record file (required for temperature models)")
    sub.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    sub.add_argument("--kind", choices=("softmax2", "softmaxK"), default="softmax2")
    sub.add_argument("--tau", type=float, default=1.0)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_predict)

    sub = commands.add_parser("eval", help="metric report for a prediction file")
    sub.add_argument("--preds", required=True)
    sub.add_argument("--records", help="label source joined by id")
    sub.add_argument("--scores", help="score,label CSV label source (row-index ids)")
    sub.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    sub.add_argument("--bins", type=int, default=10)
    sub.add_argument("--tag", default="")
    sub.add_argument("--out")
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("sweep", help="metrics for each method across a temperature grid")
    _add_record_input(sub, with_split=True)
    sub.add_argument("--tau-grid", required=True, help="lo:hi:steps, log-spaced")
    sub.add_argument("--methods", default="softmax2,ivap2")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_sweep)

    sub = commands.add_parser("reliability", help="reliability bin CSV and optional SVG diagram")
    _add_record_input(sub, with_split=True)
    sub.add_argument("--method", choices=_ALL_METHODS, default="softmax2")
    sub.add_argument("--tau", type=float, default=1.0)
    sub.add_argument("--bins", type=int, default=10)
    sub.add_argument("--out", required=True)
    sub.add_argument("--svg")
    sub.set_defaults(func=cmd_reliability)

    sub = commands.add_parser("fetch", help="harvest answer-token logits from an endpoint")
    sub.add_argument("--task", choices=("boolq", "sentiment"), required=True)
    sub.add_argument("--examples", required=True, help="JSONL of id, label, and prompt fields")
    sub.add_argument("--base-url", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--answer-tokens", default="_Yes,_No")
    sub.add_argument("--auth-token-env", default="SCORER_API_TOKEN")
    sub.add_argument("--top-logprobs", type=int, default=5)
    sub.add_argument("--timeout", type=float, default=30.0)
    sub.add_argument("--max-in-flight", type=int, default=4)
    sub.add_argument("--max-retries", type=int, default=3)
    sub.add_argument("--missing-token-fill", type=float, default=-1e4)
    sub.add_argument("--error-on-missing", action="store_true")
    sub.add_argument("--resume", action="store_true",
                     help="continue an existing journal, skipping completed ids")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_fetch)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CredentialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ScorerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
