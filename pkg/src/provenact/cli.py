"""Command-line interface: run, replay, fork, inspect, evaluate.

Exit codes: 0 success, 1 operational error, 2 invariant or acceptance
violation. Normative output contains no wall-clock or locale-dependent text.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, execute_run, load_run_config
from .engine import ExecutionPolicy, Terminal
from .errors import InvariantViolation, MissingArtifact, ProvenactError
from .metrics import SuiteConfig, format_table, matches_expected, report_bytes, run_experiment_suite
from .planner import PLANNER_MODES
from .replay import ForkSpec, fork_run, replay, verify_replay
from .store import ArtifactStore
from .trace import load_trace, save_trace, topo_order
from .workload import workload_registry

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _store_for(path: Path, store: str | None) -> ArtifactStore:
    return ArtifactStore(store if store is not None else path.parent)


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _assignment(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected <param>=<value>, got {text!r}")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provenact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the workflow and write its trace")
    run.add_argument("--config", type=Path, help="run-config JSON file; flags override it")
    run.add_argument("--planner", choices=PLANNER_MODES)
    run.add_argument("--seed", type=int)
    run.add_argument("--provenance", type=_on_off, metavar="on|off")
    run.add_argument("--inject-failure", choices=["train"])
    run.add_argument("--fail-fast", action="store_true", default=None)
    run.add_argument("--max-iterations", type=int)
    run.add_argument("--learning-rate", type=float)
    run.add_argument("--iterations", type=int)
    run.add_argument("--n-rows", type=int)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--store", help="artifact store root (default: the trace's directory)")

    rp = sub.add_parser("replay", help="reconstruct outputs from a trace without dispatching")
    rp.add_argument("trace", type=Path)
    rp.add_argument("--verify", action="store_true")
    rp.add_argument("--store")

    fk = sub.add_parser("fork", help="branch a trace at a node with changed parameters")
    fk.add_argument("trace", type=Path)
    fk.add_argument("--at", required=True, dest="at_node")
    fk.add_argument("--set", required=True, action="append", type=_assignment, dest="assignments")
    fk.add_argument("--out", type=Path, required=True)
    fk.add_argument("--store")

    ins = sub.add_parser("inspect", help="print a trace in topological order")
    ins.add_argument("trace", type=Path)
    ins.add_argument("--dot", action="store_true", help="emit a Graphviz description")

    ev = sub.add_parser("evaluate", help="run the three-pipeline comparison")
    ev.add_argument("--runs", type=int, default=5)
    ev.add_argument("--report", type=Path, help="also write the machine-readable report here")
    return parser


def _cmd_run(args, out) -> int:
    config = load_run_config(args.config) if args.config else RunConfig()
    overrides = {
        "planner": args.planner,
        "seed": args.seed,
        "provenance": args.provenance,
        "fail_fast": args.fail_fast,
        "max_iterations": args.max_iterations,
        "learning_rate": args.learning_rate,
        "iterations": args.iterations,
        "n_rows": args.n_rows,
        "inject_failure": True if args.inject_failure else None,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    store = _store_for(args.out, args.store)
    result = execute_run(config, store)
    print(f"terminal={result.terminal.value} iterations={result.iterations_used} "
          f"executed={result.executed_count} logged={result.logged_count}", file=out)
    for name, h in sorted(result.final_outputs.items()):
        print(f"output {name} {h.hex}", file=out)
    for line in result.diagnostics:
        print(f"diagnostic {line}", file=out)
    if result.trace is not None:
        args.out.write_bytes(save_trace(result.trace))
        print(f"trace {result.trace.trace_id} nodes={len(result.trace)}", file=out)
    else:
        print("trace none (provenance off)", file=out)
    return EXIT_OK if result.terminal is Terminal.DONE else EXIT_ERROR


def _cmd_replay(args, out) -> int:
    trace = load_trace(args.trace.read_bytes())
    store = _store_for(args.trace, args.store)
    result = replay(trace, store)
    for node_id, outputs in result.outputs.items():
        for name, h in sorted(outputs.items()):
            print(f"{node_id} {name} {h.hex}", file=out)
    if args.verify:
        identical = verify_replay(trace, result, store)
        print(f"replay: identical={identical} dispatches={result.dispatch_count}", file=out)
        return EXIT_OK if identical else EXIT_VIOLATION
    return EXIT_OK


def _cmd_fork(args, out) -> int:
    source_bytes = args.trace.read_bytes()
    source = load_trace(source_bytes)
    store = _store_for(args.trace, args.store)
    spec = ForkSpec(source.trace_id, args.at_node, dict(args.assignments))
    registry = workload_registry()
    before = registry.total_calls()
    result = fork_run(spec, source, registry, store, ExecutionPolicy())
    if args.trace.read_bytes() != source_bytes:
        raise InvariantViolation("source trace changed during fork")
    args.out.write_bytes(save_trace(result.trace))
    replayed = sum(1 for n in result.trace.nodes if n.status.value == "Replayed")
    print(f"fork {result.trace.trace_id} of {source.trace_id} at {args.at_node}", file=out)
    print(f"replayed={replayed} dispatched={registry.total_calls() - before} "
          f"terminal={result.terminal.value}", file=out)
    return EXIT_OK if result.terminal is Terminal.DONE else EXIT_ERROR


def _cmd_inspect(args, out) -> int:
    trace = load_trace(args.trace.read_bytes())
    order = topo_order(trace)
    if args.dot:
        print(f'digraph "{trace.trace_id}" {{', file=out)
        for nid in order:
            n = trace[nid]
            print(f'  "{nid}" [label="{nid}\\n{n.action.action_type}\\n{n.status.value}"];', file=out)
        for nid in order:
            n = trace[nid]
            for p in n.parents:
                style = ' [style=dashed,label="recovery_of"]' if p == n.recovery_of else ""
                print(f'  "{p}" -> "{nid}"{style};', file=out)
        print("}", file=out)
        return EXIT_OK
    fork_note = "" if trace.fork_of is None else f" fork_of={trace.fork_of[0]}@{trace.fork_of[1]}"
    print(f"trace {trace.trace_id} nodes={len(trace)}{fork_note}", file=out)
    for nid in order:
        n = trace[nid]
        fields = [nid, n.action.action_type, n.status.value,
                  "outputs=" + ",".join(sorted(n.outputs)),
                  "parents=" + ",".join(n.parents)]
        if n.failure is not None:
            fields.append(f"failure={n.failure.failure_type}")
        if n.recovery_of is not None:
            fields.append(f"recovery_of={n.recovery_of}")
        print(" ".join(fields), file=out)
    return EXIT_OK


def _cmd_evaluate(args, out) -> int:
    rows = run_experiment_suite(SuiteConfig(runs=args.runs))
    out.write(format_table(rows))
    if args.report is not None:
        args.report.write_bytes(report_bytes(rows))
    if not matches_expected(rows):
        print("MISMATCH: results differ from the expected table", file=out)
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "replay": _cmd_replay,
    "fork": _cmd_fork,
    "inspect": _cmd_inspect,
    "evaluate": _cmd_evaluate,
}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args, out)
    except (InvariantViolation, MissingArtifact) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ProvenactError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
