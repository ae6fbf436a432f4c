"""Operator command line: generate, ingest, train, eval, similar, serve.

Progress goes to stderr, results to the files named by flags (or stdout).
Exit codes: 0 success, 1 runtime failure (one machine-parseable JSON line on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import data, model as model_mod, synth, training
from .similarity import event_vectors, similar_patients

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqrisk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic cohort from a spec file")
    p.add_argument("--spec", required=True, help="JSON cohort spec")
    p.add_argument("--out", required=True, help="cohort output path")

    p = sub.add_parser("ingest", help="raw events file -> cleaned, windowed cohort")
    p.add_argument("--events", required=True, help="delimited events file with header")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--window-days", type=float, default=data.DEFAULT_WINDOW_DAYS)
    p.add_argument("--admission-codes", required=True,
                   help="comma-separated codes that mark admissions")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a checkpoint on a cohort")
    p.add_argument("--cohort", required=True)
    p.add_argument("--targets", help="comma-separated diagnosis codes")
    p.add_argument("--single-target", help="baseline mode: one model for this code")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--stop-auc", type=float, default=None,
                   help="stop early when the first target reaches this test AUC")
    p.add_argument("--out", required=True, help="checkpoint output path")

    p = sub.add_parser("eval", help="metrics table for a checkpoint on a cohort")
    p.add_argument("--cohort", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", required=True, help="write the metric table here (CSV)")

    p = sub.add_parser("similar", help="rank patients similar to one patient")
    p.add_argument("--cohort", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--patient", required=True)
    p.add_argument("--k", type=int, default=10)

    p = sub.add_parser("serve", help="run the HTTP decision service")
    p.add_argument("--config", required=True, help="JSON service config")
    return parser


def cmd_generate(args) -> int:
    spec = synth.SyntheticCohortSpec.from_dict(
        json.loads(Path(args.spec).read_text(encoding="utf-8")))
    vocabulary, samples = synth.generate_synthetic(spec)
    data.write_cohort(args.out, vocabulary, samples)
    print(f"wrote {len(samples)} samples over {vocabulary.size} codes to {args.out}",
          file=sys.stderr)
    return 0


def cmd_ingest(args) -> int:
    rows = data.read_events_file(args.events)
    vocabulary, sequences = data.ingest(rows)
    vocabulary, sequences = data.clean(sequences, vocabulary, args.min_count)
    admission = [c.strip() for c in args.admission_codes.split(",") if c.strip()]
    if not admission:
        raise data.DataError("--admission-codes named no codes")
    samples = data.window(sequences, vocabulary, args.window_days, admission)
    vocabulary = vocabulary.with_train_counts(data.count_occurrences(samples))
    data.write_cohort(args.out, vocabulary, samples)
    print(f"ingested {len(sequences)} patients -> {len(samples)} samples", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    vocabulary, samples = data.load_cohort(args.cohort)
    if args.single_target:
        targets = [args.single_target]
    elif args.targets:
        targets = [c.strip() for c in args.targets.split(",") if c.strip()]
    else:
        raise data.DataError("pass --targets or --single-target")
    config = training.ModelConfig(embed_dim=args.embed_dim, hidden_dim=args.hidden_dim)
    schedule = training.TrainSchedule(epochs=args.epochs, batch_size=args.batch,
                                      learning_rate=args.lr, seed=args.seed)
    result = training.train(samples, vocabulary, targets, config, schedule,
                            split_ratio=args.split, stop_auc=args.stop_auc)
    model_mod.save(result.model, args.out)
    report = result.final_report
    print(f"trained {len(targets)} target(s); test AUC="
          f"{report.auc if report.auc is not None else 'n/a'}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    vocabulary, samples = data.load_cohort(args.cohort)
    model = model_mod.load(args.checkpoint, vocabulary)
    report = training.evaluate(model, samples)
    rows = training.comparison_rows({"model": report})
    with Path(args.report).open("w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)
    print(training.render_comparison({"model": report}))
    return 0


def cmd_similar(args) -> int:
    vocabulary, samples = data.load_cohort(args.cohort)
    model = model_mod.load(args.checkpoint, vocabulary)
    sequences = {}
    for sample in samples:
        if sample.history.steps:
            sequences.setdefault(sample.history.patient_id, sample.history)
    focal = sequences.get(args.patient)
    if focal is None:
        raise data.DataError(f"unknown patient {args.patient!r}")
    vectors = event_vectors(model=model, mode="reused")
    ranked, _ = similar_patients(focal, list(sequences.values()), vectors, k=args.k)
    print(json.dumps([{"patient_id": seq.patient_id, "distance": dist}
                      for seq, dist in ranked]))
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    serve(ServiceConfig.load(args.config))
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "similar": cmd_similar,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # one-line machine-parseable failure
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
