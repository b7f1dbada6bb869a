"""Command-line surface: decode | bench | analyze-delta | analyze-order | verify.

Exit codes: 0 success, 2 validation error, 3 connectivity/protocol error,
4 verification property failure, 1 anything else. Outputs are byte-stable
for fixed inputs and seeds unless --timing is passed.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analyze import (
    DELTA_FIELDS,
    ORDER_FIELDS,
    decoding_order_curves,
    delta_confidence_grid,
    heuristic_labels,
    initial_entropy_labels,
)
from .bench import BENCH_FIELDS, run_bench
from .decoding import load_task, run_job, write_decode_outputs
from .denoiser import Denoiser
from .errors import (
    ConnectivityError,
    EngineError,
    InvalidInputError,
    ProtocolError,
    UpstreamError,
    ValidationError,
)
from .guidance import load_keywords
from .oracle import load_model
from .remote import RemoteDenoiser, RemoteDenoiserConfig
from .tabular import write_rows
from .verify import VERIFY_FIELDS, hard_failures, run_verify

ENDPOINT_ENV = "FOCORE_ENDPOINT"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_CONNECTIVITY = 3
EXIT_PROPERTY = 4


def _common_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared flags, accepted both before and after the subcommand."""

    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument(
        "--model", default=default(None), help="oracle model JSON file"
    )
    parser.add_argument(
        "--endpoint",
        default=default(None),
        help=f"model server base URL (default: ${ENDPOINT_ENV} when set)",
    )
    parser.add_argument(
        "--top-m",
        type=int,
        default=default(None),
        help="request sparse top-m responses from the model server",
    )
    parser.add_argument(
        "--seed", type=int, default=default(None), help="override seeds"
    )
    parser.add_argument("--out", default=default("."), help="output directory")
    parser.add_argument(
        "--format", choices=("csv", "jsonl"), default=default("csv")
    )
    parser.add_argument(
        "--timing",
        action="store_true",
        default=default(False),
        help="include wall-clock timings in outputs (breaks byte determinism)",
    )
    parser.add_argument(
        "--no-plot",
        action="store_true",
        default=default(False),
        help="skip rendering figures",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focore",
        description="Decoding engine for masked-diffusion language models",
    )
    _common_options(parser, suppress=False)

    sub = parser.add_subparsers(dest="command", required=True)

    def add_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _common_options(p, suppress=True)
        return p

    p = add_command("decode", "decode a single task file")
    p.add_argument("task", help="task JSON file")

    p = add_command("bench", "compare strategies over a task set")
    p.add_argument("tasks", nargs="+", help="task JSON files")
    p.add_argument(
        "--strategies",
        default="confidence,focore,focore_a",
        help="comma-separated strategy list",
    )
    p.add_argument("--reference", default="confidence")
    p.add_argument("--repeats", type=int, default=1)

    def add_label_options(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--label-mode", choices=("entropy", "heuristic"), default="entropy"
        )
        p.add_argument(
            "--label-threshold",
            type=float,
            default=None,
            help="entropy threshold in nats (default: median)",
        )
        p.add_argument("--token-text", help="file with one token string per line")
        p.add_argument("--keywords", help="keyword list for the heuristic tagger")

    p = add_command("analyze-delta", "confidence drop under prompt masking")
    p.add_argument("task", help="task JSON file supplying the prompt")
    p.add_argument("--ratios", default="0.0,0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--analysis-seeds", type=int, default=20)
    add_label_options(p)

    p = add_command(
        "analyze-order", "cumulative decode-order curves for HD vs LD"
    )
    p.add_argument("task", help="task JSON file")
    p.add_argument("--analysis-seeds", type=int, default=20)
    add_label_options(p)

    add_command("verify", "run the full property suite")
    return parser


def _denoiser(args) -> Denoiser:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if args.model and args.endpoint:
        raise ValidationError("--model and --endpoint are mutually exclusive")
    if args.model:
        return load_model(args.model)
    if endpoint:
        return RemoteDenoiser(RemoteDenoiserConfig(endpoint=endpoint, top_m=args.top_m))
    raise ValidationError(
        f"no model source: pass --model FILE, --endpoint URL, or set ${ENDPOINT_ENV}"
    )


def _cmd_decode(args) -> int:
    task = load_task(args.task, seed_override=args.seed)
    denoiser = _denoiser(args)
    result = run_job(task.prompt, denoiser, task.config)
    paths = write_decode_outputs(result, args.out, include_timing=args.timing)
    print(f"decoded {len(result.generated)} tokens in {result.metrics.steps_used} steps")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    denoiser = _denoiser(args)
    tasks = []
    for path in args.tasks:
        task = load_task(path, seed_override=args.seed)
        tasks.append((os.path.basename(path), denoiser, task))
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    rows = run_bench(
        tasks,
        strategies,
        args.reference,
        args.repeats,
        base_seed=args.seed if args.seed is not None else 0,
        include_timing=args.timing,
    )
    out = os.path.join(args.out, f"bench.{args.format}")
    write_rows(out, BENCH_FIELDS, rows, args.format)
    print(f"bench report: {out}")
    if not args.no_plot:
        from . import plots

        fig = os.path.join(args.out, "bench.png")
        plots.plot_bench(rows, fig)
        print(f"figure: {fig}")
    return EXIT_OK


def _labels_from_args(args, denoiser, task) -> dict[int, bool]:
    if args.label_mode == "heuristic":
        if not args.token_text:
            raise ValidationError("--label-mode heuristic needs --token-text FILE")
        with open(args.token_text, "r", encoding="utf-8") as fh:
            texts = [line.rstrip("\n") for line in fh if line.strip()]
        keywords = load_keywords(args.keywords) if args.keywords else frozenset()
        return heuristic_labels(task, texts, keywords)
    labels, threshold = initial_entropy_labels(denoiser, task, args.label_threshold)
    print(f"entropy labeling threshold: {threshold:.4f} nats")
    return labels


def _cmd_analyze_delta(args) -> int:
    task = load_task(args.task, seed_override=args.seed)
    denoiser = _denoiser(args)
    try:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad --ratios value: {exc}") from exc
    rows = delta_confidence_grid(
        denoiser,
        task,
        ratios,
        n_seeds=args.analysis_seeds,
        base_seed=args.seed if args.seed is not None else task.config.seed,
        labels=_labels_from_args(args, denoiser, task),
    )
    out = os.path.join(args.out, f"delta_confidence.{args.format}")
    write_rows(out, DELTA_FIELDS, rows, args.format)
    print(f"sensitivity grid: {out}")
    if not args.no_plot:
        from . import plots

        fig = os.path.join(args.out, "delta_confidence.png")
        plots.plot_delta_grid(rows, fig)
        print(f"figure: {fig}")
    return EXIT_OK


def _cmd_analyze_order(args) -> int:
    task = load_task(args.task, seed_override=args.seed)
    denoiser = _denoiser(args)
    labels = _labels_from_args(args, denoiser, task)
    rows = decoding_order_curves(
        denoiser,
        task,
        n_seeds=args.analysis_seeds,
        base_seed=args.seed if args.seed is not None else task.config.seed,
        labels=labels,
    )
    out = os.path.join(args.out, f"decoding_order.{args.format}")
    write_rows(out, ORDER_FIELDS, rows, args.format)
    print(f"decode-order curves: {out}")
    if not args.no_plot:
        from . import plots

        fig = os.path.join(args.out, "decoding_order.png")
        plots.plot_order_curves(rows, fig)
        print(f"figure: {fig}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_verify(seed=args.seed if args.seed is not None else 0)
    rows = [r.to_row() for r in results]
    out = os.path.join(args.out, f"verify_report.{args.format}")
    write_rows(out, VERIFY_FIELDS, rows, args.format)
    for r in results:
        status = "INFO" if r.informational else ("PASS" if r.passed else "FAIL")
        margin = "" if r.margin is None else f" margin={r.margin:+.3e}"
        print(f"{status:4s} {r.name}{margin}  [{r.detail}]")
    if not args.no_plot:
        from . import plots

        plots.plot_verify(rows, os.path.join(args.out, "verify_report.png"))
    failures = hard_failures(results)
    print(
        f"report: {out} ({len(results) - len(failures)}/{len(results)} passed"
        f"{', ' + str(len(failures)) + ' FAILED' if failures else ''})"
    )
    return EXIT_PROPERTY if failures else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    handlers = {
        "decode": _cmd_decode,
        "bench": _cmd_bench,
        "analyze-delta": _cmd_analyze_delta,
        "analyze-order": _cmd_analyze_order,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except (ValidationError, InvalidInputError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConnectivityError, ProtocolError, UpstreamError) as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
