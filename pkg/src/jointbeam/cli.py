"""Command-line entry point: decode, oracle, bench, and weights commands.

Machine-readable results (JSON or CSV) go to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 runtime or model-load error, 2 usage error,
3 enumeration-guard refusal.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .bench import (
    default_k_pre,
    records_to_csv,
    render_figures,
    resolve_weight_spec,
    sweep,
    utterance_from_bundle,
)
from .core import (
    DecoderWeights,
    GuardError,
    LoadError,
    UsageError,
    compute_stage2_weights,
)
from .models import ModelBundle, load_models
from .oracle import run_checks
from .search import (
    DEFAULT_PRESET,
    WEIGHT_PRESETS,
    SearchConfig,
    run_search,
)
from .synthetic import DEFAULT_CONCENTRATION, seeded_bundle

ALGORITHM_NAMES = {"att": "attention_driven", "ctc": "ctc_driven", "rnnt": "rnnt_driven"}


def _add_model_source(p: argparse.ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        p.add_argument("--model", action="append", default=[], metavar="PATH",
                       help="model bundle JSON; repeat for several utterances")
    else:
        p.add_argument("--model", metavar="PATH", help="model bundle JSON")
    p.add_argument("--seed", type=int, default=None,
                   help="build a synthetic hash-model bundle instead of loading one")
    p.add_argument("--vocab-size", type=int, default=5,
                   help="vocabulary size for --seed bundles (default 5)")
    p.add_argument("--frames", type=int, default=8,
                   help="frame count for --seed bundles (default 8)")
    p.add_argument("--concentration", type=float, default=DEFAULT_CONCENTRATION,
                   help="hash-model concentration for --seed bundles")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointbeam",
        description="Joint CTC/RNN-T/attention beam search over toy posterior models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pd = sub.add_parser(
        "decode", help="run a joint beam search and print the n-best JSON",
        description="Decoder weights default to the algorithm's preset: "
        "att-driven (mu_ctc,mu_rnnt,mu_att)=(0.3,0.3,0.4); ctc-driven and "
        "rnnt-driven (0.1,0.4,0.5). The source experiments list these triples "
        "against an inconsistent algorithm order, so the presets are bound by "
        "name here; override any component explicitly to taste.",
    )
    _add_model_source(pd, multiple=True)
    pd.add_argument("--algorithm", required=True, choices=sorted(ALGORITHM_NAMES),
                    help="primary decoder driving the search")
    pd.add_argument("--k-beam", type=int, default=20, help="main beam size (default 20)")
    pd.add_argument("--k-pre", type=int, default=30, help="prebeam size (default 30)")
    pd.add_argument("--mu-ctc", type=float, default=None)
    pd.add_argument("--mu-rnnt", type=float, default=None)
    pd.add_argument("--mu-att", type=float, default=None)
    pd.add_argument("--beta", type=float, default=0.0, help="length penalty per token")
    pd.add_argument("--n-best", type=int, default=1)
    pd.add_argument("--max-len", type=int, default=None, help="output length cap")
    pd.add_argument("--jobs", type=int, default=1,
                    help="decode this many utterances in parallel (never within one)")

    po = sub.add_parser("oracle", help="verify scorers against brute-force enumeration")
    _add_model_source(po)
    po.add_argument("--max-len", type=int, default=None,
                    help="longest output to enumerate (default 4, table-bounded)")

    pb = sub.add_parser("bench", help="sweep decoding configurations and print CSV")
    pb.add_argument("--model", action="append", required=True, metavar="PATH",
                    help="model bundle JSON; repeat for several utterances")
    pb.add_argument("--algorithms", default="att,ctc,rnnt",
                    help="comma list of algorithms (default att,ctc,rnnt)")
    pb.add_argument("--k-beams", default="1,2,4,8",
                    help="comma list of main beam sizes (default 1,2,4,8)")
    pb.add_argument("--weights", default="default",
                    help="comma list of weight specs: 'default', a preset name, "
                    "'rnnt-sweep', or 'ctc:rnnt:att[:beta]'")
    pb.add_argument("--repeats", type=int, default=3)
    pb.add_argument("--max-len", type=int, default=None)
    pb.add_argument("--figures", metavar="DIR", default=None,
                    help="also render sweep figures into this directory")

    pw = sub.add_parser("weights", help="two-stage training weights from epoch counts")
    pw.add_argument("--epochs", required=True,
                    help="four comma-separated epoch counts, e.g. 10,10,10,70")

    return parser


def _bundle_from_args(args, path: str | None = None) -> ModelBundle:
    if args.seed is not None:
        if args.model:
            raise UsageError("--model and --seed are mutually exclusive")
        return seeded_bundle(args.seed, args.frames, args.vocab_size,
                             args.concentration)
    target = path if path is not None else args.model
    if not target:
        raise UsageError("either --model or --seed is required")
    return load_models(target)


def _weights_from_args(args, algorithm: str) -> DecoderWeights:
    preset = WEIGHT_PRESETS[DEFAULT_PRESET[algorithm]]
    return DecoderWeights(
        preset.mu_ctc if args.mu_ctc is None else args.mu_ctc,
        preset.mu_rnnt if args.mu_rnnt is None else args.mu_rnnt,
        preset.mu_att if args.mu_att is None else args.mu_att,
        args.beta,
    )


def _decode_one(task) -> str:
    path, cfg = task
    bundle = load_models(path)
    return run_search(bundle, cfg).to_json()


def _cmd_decode(args) -> int:
    algorithm = ALGORITHM_NAMES[args.algorithm]
    cfg = SearchConfig(
        algorithm=algorithm,
        weights=_weights_from_args(args, algorithm),
        k_beam=args.k_beam,
        k_pre=args.k_pre,
        max_output_len=args.max_len,
        n_best=args.n_best,
    )
    if args.seed is not None or len(args.model) <= 1:
        bundle = _bundle_from_args(args, args.model[0] if args.model else None)
        print(run_search(bundle, cfg).to_json())
        return 0

    tasks = [(path, cfg) for path in args.model]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            nbests = list(pool.map(_decode_one, tasks))
    else:
        nbests = [_decode_one(t) for t in tasks]
    docs = [{"model": path, "nbest": json.loads(text)}
            for path, text in zip(args.model, nbests)]
    print(json.dumps(docs, indent=2))
    return 0


def _cmd_oracle(args) -> int:
    bundle = _bundle_from_args(args)
    report = run_checks(bundle, max_len=args.max_len)
    print(json.dumps(report, indent=2))
    ok = all(c["pass"] for c in report["checks"] if not c.get("skipped"))
    return 0 if ok else 1


def _cmd_bench(args) -> int:
    bundles = [load_models(p) for p in args.model]
    utterances = [utterance_from_bundle(b, name=p)
                  for b, p in zip(bundles, args.model)]
    algorithms = []
    for name in args.algorithms.split(","):
        if name not in ALGORITHM_NAMES:
            raise UsageError(f"unknown algorithm {name!r}; choose from "
                             f"{sorted(ALGORITHM_NAMES)}")
        algorithms.append(ALGORITHM_NAMES[name])
    try:
        k_beams = [int(k) for k in args.k_beams.split(",")]
    except ValueError:
        raise UsageError(f"bad --k-beams {args.k_beams!r}") from None
    specs = args.weights.split(",")
    for alg in algorithms:  # fail fast on bad specs before any timing
        for spec in specs:
            resolve_weight_spec(spec, alg)

    records = sweep(algorithms, k_beams, specs, utterances,
                    repeats=args.repeats, max_output_len=args.max_len)
    sys.stdout.write(records_to_csv(records))
    if args.figures:
        for path in render_figures(records, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_weights(args) -> int:
    parts = args.epochs.split(",")
    try:
        epochs = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad --epochs {args.epochs!r}") from None
    w = compute_stage2_weights(epochs)
    print(" ".join(f"{v:.10g}" for v in w))
    return 0


_COMMANDS = {
    "decode": _cmd_decode,
    "oracle": _cmd_oracle,
    "bench": _cmd_bench,
    "weights": _cmd_weights,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
