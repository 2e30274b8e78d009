"""Command-line entry point: ``fitagent run`` and ``fitagent synth``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import agentloop, reporting, synth
from .agentloop import Policy, Task
from .llm import (
    ChatSettings,
    LLMError,
    OpenAIChatBackend,
    RecordingBackend,
    ReplayBackend,
)
from .tasks import TASKS, build_registry, final_summary, make_task

EXIT_CODES = {
    "done": 0,
    "halted_no_equation": 2,
    "halted_essential_failure": 3,
    "halted_max_iter": 4,
}
log = logging.getLogger("fitagent")


class UsageError(Exception):
    """Bad flags or unreadable inputs; exit status 1."""


def _bounds(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"need lo < hi, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fitagent", description="Autonomous equation-fitting agent.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the agent on one task")
    r.add_argument("--task", required=True, choices=TASKS)
    r.add_argument("--data", help="CSV data file")
    r.add_argument("--x-col", help="x column name (task default otherwise)")
    r.add_argument("--y-col", help="y column name (task default otherwise)")
    r.add_argument("--context", help="domain hint passed to equation recall")
    r.add_argument("--backend", choices=("live", "replay", "record"), default="live")
    r.add_argument("--transcript", help="transcript to replay, or to write in record mode")
    r.add_argument("--record-from", help="in record mode, replay this transcript instead of calling the API")
    r.add_argument("--lenient", action="store_true", help="replay by position only, ignoring request digests")
    r.add_argument("--model-id", default="gpt-5")
    r.add_argument("--temperature", type=float, default=None,
                   help="sampling temperature (omitted for gpt-5 models by default)")
    r.add_argument("--max-iterations", type=int, default=20)
    r.add_argument("--history-window", type=int, default=10)
    r.add_argument("--retries", type=int, default=2)
    r.add_argument("--region-bounds", type=_bounds, help="manual fitting region lo:hi")
    r.add_argument("--band-factor", type=float, default=10.0)
    r.add_argument("--html-base", help="base URL (or file: URL) for article HTML")
    r.add_argument("--out", default="runs/latest", help="output directory")

    s = sub.add_parser("synth", help="write a synthetic oracle dataset")
    s.add_argument("--case", required=True, choices=synth.CASES)
    s.add_argument("--out", required=True, help="CSV file to write")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0,
                   help="noise level (MPa for hall-petch, log10 decades for paris)")
    s.add_argument("--unit", choices=("um", "mm"), default="um", help="grain size unit for hall-petch")
    return p


def _backend(args):
    if args.backend == "live":
        return OpenAIChatBackend()
    if args.backend == "replay":
        if not args.transcript:
            raise UsageError("--backend replay needs --transcript")
        return ReplayBackend.from_file(args.transcript, strict=not args.lenient)
    if not args.transcript:
        raise UsageError("--backend record needs --transcript (the file to write)")
    inner = (ReplayBackend.from_file(args.record_from, strict=not args.lenient)
             if args.record_from else OpenAIChatBackend())
    return RecordingBackend(inner, args.transcript)


def run_task(args) -> int:
    if args.data is not None and not Path(args.data).is_file():
        raise UsageError(f"data file not found: {args.data}")
    for flag, v in (("--max-iterations", args.max_iterations), ("--retries", args.retries + 1),
                    ("--history-window", args.history_window + 1), ("--band-factor", args.band_factor)):
        if v < 1:
            raise UsageError(f"{flag} is out of range")
    out = Path(args.out)
    settings = ChatSettings.for_model(args.model_id, args.temperature)
    overrides = dict(settings=settings, retries=args.retries, band_factor=args.band_factor, out_dir=str(out))
    if args.region_bounds:
        overrides["region_bounds"] = args.region_bounds
    if args.html_base:
        overrides["html_base"] = args.html_base
    cfg = make_task(args.task, args.data, x_column=args.x_col, y_column=args.y_col, context=args.context,
                    **overrides)
    backend = _backend(args)
    registry = build_registry(cfg, backend)
    policy = Policy(args.max_iterations, args.history_window, args.retries)
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), registry, backend, settings, policy,
                          trace_path=out / "trace.jsonl", trace_config=cfg.header())

    for e in state.history:
        print("=" * 60)
        print(f"ITERATION {e.iteration}")
        print("=" * 60)
        print(f"THOUGHT: {e.thought}")
        if e.action is not None:
            print(f"ACTION: {json.dumps(e.action.to_dict(), ensure_ascii=False)}")
        print(f"OBSERVATION: {e.observation}")
    print("=" * 60)
    print("AGENT COMPLETED" if state.status == "done" else f"AGENT STOPPED: {state.status}")
    print(f"Total iterations: {len(state.history)}")
    print("=" * 60)
    if state.model is not None and state.validation is not None:
        reporting.export_results(state, "json", out / "results.json", cfg.name)
    print("=== FINAL RESULTS ===")
    print(state.summary or final_summary(state, cfg))
    return EXIT_CODES[state.status]


def run_synth(args) -> int:
    table = synth.make_case(args.case, seed=args.seed, noise=args.noise, unit=args.unit)
    path = table.write_csv(args.out)
    print(f"Wrote {len(table.rows)} rows to {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports flag errors with status 2
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return run_synth(args)
        return run_task(args)
    except (UsageError, LLMError, OSError, ValueError, reporting.ReportError) as exc:
        print(f"fitagent: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
