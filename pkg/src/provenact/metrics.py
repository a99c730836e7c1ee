"""Execution-correctness metrics and the three-pipeline comparison suite."""

from __future__ import annotations

import enum
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import canonical
from .config import RunConfig, execute_run
from .engine import RunResult, Terminal
from .errors import InvariantViolation
from .replay import ReplayResult, replay, verify_replay
from .store import ArtifactStore
from .trace import ExecutionTrace, SUFFIX, save_trace
from .workload import InjectedTrainingFault, workload_registry


class Pipeline(str, enum.Enum):
    SCRIPT_BASED = "ScriptBased"
    NAIVE_LAM = "NaiveLAM"
    RLAM_CONSTRAINED = "RLAMConstrained"


@dataclass(frozen=True)
class MetricsRow:
    pipeline: Pipeline
    replay: float
    trace: float
    failure: float
    variance: float

    def __post_init__(self) -> None:
        for name in ("replay", "failure", "variance"):
            if getattr(self, name) not in (0.0, 1.0):
                raise ValueError(f"{name} must be 0.0 or 1.0")
        if not 0.0 <= self.trace <= 1.0:
            raise ValueError("trace must lie in [0, 1]")

    def values(self) -> tuple[float, float, float, float]:
        return (self.replay, self.trace, self.failure, self.variance)


def trace_completeness(logged: int, executed: int) -> float:
    if logged > executed:
        raise InvariantViolation(f"logged {logged} > executed {executed}")
    if executed == 0:
        return 1.0
    return logged / executed


def reproducibility_success(run: RunResult, outcome: ReplayResult | None) -> int:
    if run.trace is None or outcome is None:
        return 0
    if run.logged_count != run.executed_count:
        return 0
    return int(outcome.identical is True and outcome.dispatch_count == 0)


def replay_and_verify(run: RunResult, store: ArtifactStore) -> ReplayResult | None:
    if run.trace is None:
        return None
    outcome = replay(run.trace, store)
    verify_replay(run.trace, outcome, store)
    return outcome


def failure_visibility(trace: ExecutionTrace | None) -> int:
    """1 iff a Failed node carries error metadata and every recovery names it."""
    if trace is None:
        return 0
    failed = [n for n in trace.nodes if n.status.value == "Failed"]
    if not failed:
        return 0
    for n in failed:
        if n.failure is None or not n.failure.failure_type:
            return 0
    failed_types = {n.action.action_type for n in failed}
    failed_ids = {n.node_id for n in failed}
    first_fail = trace.node_ids().index(failed[0].node_id)
    for n in trace.nodes[first_fail + 1:]:
        # a later execution of a failed stage is a recovery attempt and must say so
        if n.action.action_type in failed_types and n.status.value != "Replayed":
            if n.recovery_of not in failed_ids:
                return 0
    return 1


def diagnostics_visibility(run: RunResult, failure_type: str) -> int:
    """Visibility for trace-less pipelines: the failure surfaced as a diagnostic."""
    return int(any(d.startswith(failure_type + ":") for d in run.diagnostics))


def variance(runs: list[RunResult]) -> int:
    if len(runs) < 2:
        raise ValueError("variance needs at least 2 runs")
    first = runs[0].final_outputs
    return int(any(r.final_outputs != first for r in runs[1:]))


# --- experiment suite ----------------------------------------------------------

@dataclass(frozen=True)
class PipelineSpec:
    pipeline: Pipeline
    config: RunConfig
    # "trace": replay from the trace; "rerun": compare a second run's outputs
    replay_scoring: str
    # "trace": failure_visibility; "diagnostics": surfaced exception
    failure_scoring: str


def pipeline_specs(seed: int = 42) -> list[PipelineSpec]:
    return [
        PipelineSpec(
            Pipeline.SCRIPT_BASED,
            RunConfig(planner="scripted", seed=seed, provenance=False, fail_fast=True),
            replay_scoring="rerun",
            failure_scoring="diagnostics",
        ),
        PipelineSpec(
            Pipeline.NAIVE_LAM,
            RunConfig(planner="history_free", seed=seed, provenance=False, fail_fast=True, unseeded=True),
            replay_scoring="trace",
            failure_scoring="diagnostics",
        ),
        PipelineSpec(
            Pipeline.RLAM_CONSTRAINED,
            RunConfig(planner="history_fed", seed=seed, provenance=True, fail_fast=False),
            replay_scoring="trace",
            failure_scoring="trace",
        ),
    ]


@dataclass(frozen=True)
class SuiteConfig:
    runs: int = 5
    seed: int = 42
    workdir: Path | None = None


@dataclass
class PipelineEvidence:
    """Raw runs behind one row, kept for inspection and tests."""

    spec: PipelineSpec
    main: RunResult
    variance_runs: list[RunResult]
    failure_run: RunResult
    replay_outcome: ReplayResult | None = None
    trace_files: dict[str, Path] = field(default_factory=dict)


def _persist(run: RunResult, workdir: Path, label: str) -> Path | None:
    if run.trace is None:
        return None
    path = workdir / f"{label}{SUFFIX}"
    path.write_bytes(save_trace(run.trace))
    return path


def evaluate_pipeline(spec: PipelineSpec, runs: int, workdir: Path) -> tuple[MetricsRow, PipelineEvidence]:
    store = ArtifactStore(workdir / spec.pipeline.value)
    # one registry across repeats: any unlogged adapter state carries over, as it would in a live process
    registry = workload_registry(unseeded=spec.config.unseeded)
    repeats = [execute_run(spec.config, store, registry) for _ in range(runs)]
    main = repeats[0]

    outcome = None
    if spec.replay_scoring == "trace":
        outcome = replay_and_verify(main, store)
        replay_score = reproducibility_success(main, outcome)
    else:
        replay_score = int(
            all(r.terminal is Terminal.DONE for r in repeats[:2])
            and repeats[1].final_outputs == main.final_outputs
        )

    failing = replace(spec.config, inject_failure=True)
    failure_run = execute_run(failing, store, workload_registry(inject_failure=True, unseeded=spec.config.unseeded))
    if spec.failure_scoring == "trace":
        failure_score = failure_visibility(failure_run.trace)
    else:
        failure_score = diagnostics_visibility(failure_run, InjectedTrainingFault.__name__)

    evidence = PipelineEvidence(spec, main, repeats, failure_run, outcome)
    for label, run in (("main", main), ("failure", failure_run)):
        path = _persist(run, workdir, f"{spec.pipeline.value}-{label}")
        if path is not None:
            evidence.trace_files[label] = path

    row = MetricsRow(
        spec.pipeline,
        replay=float(replay_score),
        trace=trace_completeness(main.logged_count, main.executed_count),
        failure=float(failure_score),
        variance=float(variance(repeats)),
    )
    return row, evidence


def run_experiment_suite(config: SuiteConfig | None = None, evidence: list | None = None) -> list[MetricsRow]:
    config = config or SuiteConfig()
    if config.runs < 2:
        raise ValueError("the suite needs at least 2 runs per pipeline")
    with tempfile.TemporaryDirectory(prefix="provenact-suite-") as tmp:
        workdir = Path(config.workdir) if config.workdir is not None else Path(tmp)
        workdir.mkdir(parents=True, exist_ok=True)
        rows = []
        for spec in pipeline_specs(config.seed):
            row, ev = evaluate_pipeline(spec, config.runs, workdir)
            rows.append(row)
            if evidence is not None:
                evidence.append(ev)
    return rows


EXPECTED_TABLE = {
    Pipeline.SCRIPT_BASED: (1.0, 0.0, 1.0, 0.0),
    Pipeline.NAIVE_LAM: (0.0, 0.0, 1.0, 1.0),
    Pipeline.RLAM_CONSTRAINED: (1.0, 1.0, 1.0, 0.0),
}


def matches_expected(rows: list[MetricsRow]) -> bool:
    return {r.pipeline: r.values() for r in rows} == EXPECTED_TABLE and len(rows) == 3


def format_table(rows: list[MetricsRow]) -> str:
    header = ("Pipeline", "Replay", "Trace", "Failure", "Variance")
    body = [(r.pipeline.value, *(f"{v:.1f}" for v in r.values())) for r in rows]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    lines = []
    for line in [header, *body]:
        cells = [line[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(line[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def report_bytes(rows: list[MetricsRow]) -> bytes:
    return canonical.to_bytes({
        "columns": ["replay", "trace", "failure", "variance"],
        "rows": [{"pipeline": r.pipeline.value, "replay": r.replay, "trace": r.trace,
                  "failure": r.failure, "variance": r.variance} for r in rows],
    }) + b"\n"
