"""Deterministic execution engine and the failure-aware planner loop."""

from __future__ import annotations

import enum
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from types import MappingProxyType

from . import __version__, canonical
from .action import (
    Action,
    ArtifactAbsent,
    ArtifactExists,
    ParamEquals,
    Violation,
    validate_action,
)
from .adapters import AdapterFailure, AdapterRegistry
from .errors import ActionRejected, InvariantViolation, PlannerError, ResolutionError
from .planner import Done, HistoryEntry, ObservableState, Planner, Propose, resolve_reference
from .store import ArtifactStore, ContentHash
from .trace import ExecutionTrace, FailureRecord, Status, TraceNode, append_node

log = logging.getLogger(__name__)

DEFAULT_ENVIRONMENT_ID = "local"


@dataclass(frozen=True)
class EnvironmentBinding:
    environment_id: str
    engine_version: str
    adapter_versions: Mapping[str, str]
    seed_policy: Mapping[str, object]

    def __post_init__(self) -> None:
        object.__setattr__(self, "adapter_versions", MappingProxyType(dict(self.adapter_versions)))
        object.__setattr__(self, "seed_policy", canonical.freeze(dict(self.seed_policy)))

    def to_dict(self) -> dict:
        return {
            "environment_id": self.environment_id,
            "engine_version": self.engine_version,
            "adapter_versions": dict(self.adapter_versions),
            "seed_policy": canonical.thaw(self.seed_policy),
        }

    @property
    def env_hash(self) -> ContentHash:
        return ContentHash.of(canonical.to_bytes(self.to_dict()))


def environment_binding(
    registry: AdapterRegistry,
    engine_version: str = __version__,
    environment_id: str = DEFAULT_ENVIRONMENT_ID,
) -> EnvironmentBinding:
    unseeded = [name for name, a in registry.items() if not a.deterministic]
    return EnvironmentBinding(
        environment_id=environment_id,
        engine_version=engine_version,
        adapter_versions={name: a.version for name, a in registry.items()},
        seed_policy={"source": "action.metadata.seeds", "unseeded_adapters": unseeded},
    )


@dataclass(frozen=True)
class ExecutionPolicy:
    provenance_enabled: bool = True
    max_iterations: int = 10
    fail_fast: bool = False

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class Terminal(str, enum.Enum):
    DONE = "Done"
    ITERATION_CAP = "IterationCapReached"
    UNRECOVERED_FAILURE = "UnrecoveredFailure"


@dataclass
class RunResult:
    trace: ExecutionTrace | None
    final_outputs: dict[str, ContentHash]
    executed_count: int
    iterations_used: int
    terminal: Terminal
    # surfaced error messages (the only failure signal when provenance is off)
    diagnostics: list[str] = field(default_factory=list)
    logged_count: int = 0


class EngineContext:
    """Mutable per-run state: registry, store, binding, trace and counters.

    When provenance is disabled the run still needs to pass artifacts
    between steps; that happens through a private scratch table that is
    never exposed or persisted.
    """

    def __init__(
        self,
        registry: AdapterRegistry,
        store: ArtifactStore,
        policy: ExecutionPolicy | None = None,
        trace_id: str = "trace",
        trace: ExecutionTrace | None = None,
        environment_id: str = DEFAULT_ENVIRONMENT_ID,
    ) -> None:
        self.registry = registry
        self.store = store
        self.policy = policy or ExecutionPolicy()
        self.binding = environment_binding(registry, environment_id=environment_id)
        self.env_hash = self.binding.env_hash
        if self.policy.provenance_enabled:
            bad = [name for name, a in registry.items() if not a.deterministic]
            if bad:
                raise InvariantViolation(f"unseeded adapters are not allowed with provenance on: {bad}")
            self.trace = trace if trace is not None else ExecutionTrace(trace_id)
            self._nodes = self.trace
        else:
            self.trace = None
            self._nodes = ExecutionTrace(trace_id)
        self.executed_count = 0
        self.initial_length = len(self._nodes)
        self.clock = max((n.finished_at + 1 for n in self._nodes.nodes), default=0)

    # -- views ---------------------------------------------------------------

    def available_artifacts(self) -> dict[str, ContentHash]:
        """Latest successful producer of each artifact name."""
        out: dict[str, ContentHash] = {}
        for n in self._nodes.nodes:
            if n.status is not Status.FAILED:
                out.update(n.outputs)
        return out

    def unrecovered_failures(self) -> list[str]:
        recovered = {n.recovery_of for n in self._nodes.nodes if n.recovery_of and n.status is Status.SUCCESS}
        # a successful recovery of a recovery also clears the original
        chain = {n.node_id: n.recovery_of for n in self._nodes.nodes if n.recovery_of}
        for r in list(recovered):
            while r in chain:
                r = chain[r]
                recovered.add(r)
        return [n.node_id for n in self._nodes.nodes if n.status is Status.FAILED and n.node_id not in recovered]

    def observable_state(self, mode: str, iteration: int, pending: FailureRecord | None = None) -> ObservableState:
        if mode in ("history_free", "scripted"):
            return ObservableState(iteration=iteration)
        history = tuple(
            HistoryEntry(n.node_id, n.action.action_type, n.status, tuple(n.outputs))
            for n in self._nodes.nodes
        )
        unrecovered = self.unrecovered_failures()
        failed_node = unrecovered[-1] if unrecovered else None
        last_failure = pending
        if last_failure is None and failed_node is not None:
            last_failure = self._nodes[failed_node].failure
        return ObservableState(
            history=history,
            last_failure=last_failure,
            available_artifacts=tuple(sorted(self.available_artifacts().items())),
            last_failed_node=failed_node,
            iteration=iteration,
        )

    def logged_count(self) -> int:
        """Nodes this context appended to the real trace (0 with provenance off)."""
        if self.trace is None:
            return 0
        return sum(1 for n in self.trace.nodes[self.initial_length:] if n.status is not Status.REPLAYED)

    def next_node_id(self) -> str:
        return f"a{len(self._nodes)}"

    def stamp(self, action: Action) -> Action:
        """Assign the positional id, logical timestamp and environment id."""
        md = replace(action.metadata, logical_timestamp=self.clock, environment_id=self.binding.environment_id)
        return replace(action, id=self.next_node_id(), metadata=md)

    # -- pipeline helpers ----------------------------------------------------

    def check_preconditions(self, action: Action) -> list[Violation]:
        have = self.available_artifacts()
        found = []
        for p in action.preconditions:
            if isinstance(p, ArtifactExists) and p.name not in have:
                found.append(Violation("PreconditionFailed", f"ArtifactExists({p.name})"))
            elif isinstance(p, ArtifactAbsent) and p.name in have:
                found.append(Violation("PreconditionFailed", f"ArtifactAbsent({p.name})"))
            elif isinstance(p, ParamEquals) and action.parameters.get(p.name) != p.value:
                found.append(Violation("PreconditionFailed", f"ParamEquals({p.name})"))
        return found

    def resolve_inputs(self, action: Action) -> tuple[dict[str, bytes], list[str]]:
        payloads: dict[str, bytes] = {}
        parents: list[str] = []
        for name, ref in action.inputs.items():
            if ref.is_inline:
                payloads[name] = canonical.to_bytes(ref.inline_value)
                continue
            if ref.content is not None:
                h = ref.content
            else:
                h = resolve_reference(ref, self._nodes)
                parents.append(ref.parse_symbolic()[0])
            payloads[name] = self.store.get(h)
        return payloads, parents


def execute_action(action: Action, ctx: EngineContext, recovery_of: str | None = None) -> TraceNode:
    """Validate, check, resolve, dispatch, verify effects, count, log.

    Raises ActionRejected or ResolutionError before dispatch. Adapter
    failures and effect mismatches come back as a Failed node.
    """
    report = validate_action(action, ctx.registry)
    if not report.ok:
        raise ActionRejected(f"{action.id}: invalid action: {', '.join(map(str, report.violations))}", report.violations)
    if action.id in ctx._nodes:
        raise ActionRejected(f"duplicate action id {action.id}", (Violation("DuplicateId", action.id),))
    unmet = ctx.check_preconditions(action)
    if unmet:
        raise ActionRejected(f"{action.id}: preconditions not met: {', '.join(map(str, unmet))}", tuple(unmet))
    if recovery_of is not None:
        target = ctx._nodes.get(recovery_of)
        if target is None or target.status is not Status.FAILED:
            raise PlannerError(f"recovery target {recovery_of!r} is not a Failed node")
    payloads, parents = ctx.resolve_inputs(action)
    if recovery_of is not None:
        parents.append(recovery_of)
    pos = {nid: i for i, nid in enumerate(ctx._nodes.node_ids())}
    parents = sorted(set(parents), key=pos.__getitem__)

    adapter = ctx.registry.get(action.action_type)
    failure = None
    outputs: dict[str, ContentHash] = {}
    try:
        produced = adapter(payloads, action.parameters, action.metadata.seeds)
    except AdapterFailure as exc:
        partial = {k: ctx.store.put(v) for k, v in sorted(exc.partial_outputs.items())}
        failure = FailureRecord(exc.failure_type, str(exc), partial)
    except Exception as exc:  # adapters are untrusted: any exception is a recorded failure
        failure = FailureRecord(type(exc).__name__, str(exc), {})
    else:
        stored = {k: ctx.store.put(v) for k, v in sorted(produced.items())}
        missing = [name for name in action.produces if name not in stored]
        if missing:
            failure = FailureRecord("EffectMismatch", f"declared outputs not produced: {missing}", stored)
        else:
            outputs = stored
    ctx.executed_count += 1

    node = TraceNode(
        node_id=action.id,
        action=action,
        status=Status.FAILED if failure else Status.SUCCESS,
        outputs=outputs,
        env_hash=ctx.env_hash,
        started_at=ctx.clock,
        finished_at=ctx.clock + 1,
        parents=tuple(parents),
        failure=failure,
        recovery_of=recovery_of,
    )
    ctx.clock += 2
    append_node(ctx._nodes, node)
    if failure:
        log.info("%s %s failed: %s", action.id, action.action_type, failure.failure_type)
    return node


def run_workflow(planner: Planner, policy: ExecutionPolicy, ctx: EngineContext, start_iteration: int = 0) -> RunResult:
    """Ask the planner for actions until DONE, the iteration cap, or an unrecovered failure.

    An iteration is one proposed action. The DONE signal ends the loop
    without consuming one, so a planner that finishes five actions and
    then signals DONE reports ``iterations_used == 5``. A planner still
    proposing once ``max_iterations`` actions have been taken ends with
    ``IterationCapReached``.
    """
    if ctx.policy != policy:
        raise InvariantViolation("run policy differs from the context's policy")
    diagnostics: list[str] = []
    pending: FailureRecord | None = None
    terminal = None
    used = 0
    while terminal is None:
        state = ctx.observable_state(planner.mode, start_iteration + used, pending)
        counted = False
        try:
            proposal = planner.propose(state)
            if isinstance(proposal, Done):
                terminal = Terminal.UNRECOVERED_FAILURE if ctx.unrecovered_failures() else Terminal.DONE
                break
            if not isinstance(proposal, Propose):
                raise PlannerError(f"malformed proposal {proposal!r}")
            if used == policy.max_iterations:
                terminal = Terminal.UNRECOVERED_FAILURE if ctx.unrecovered_failures() else Terminal.ITERATION_CAP
                break
            used += 1
            counted = True
            node = execute_action(ctx.stamp(proposal.action), ctx, recovery_of=proposal.recovery_target)
        except (ActionRejected, ResolutionError, PlannerError) as exc:
            # never dispatched, so not a trace node; surfaced and fed back instead
            diagnostics.append(f"{type(exc).__name__}: {exc}")
            pending = FailureRecord(type(exc).__name__, str(exc))
            if policy.fail_fast:
                terminal = Terminal.UNRECOVERED_FAILURE
            elif not counted:
                # a proposal that could not even be formed still costs an iteration
                used += 1
                if used >= policy.max_iterations:
                    terminal = Terminal.UNRECOVERED_FAILURE if ctx.unrecovered_failures() else Terminal.ITERATION_CAP
            continue
        pending = None
        if node.status is Status.FAILED:
            diagnostics.append(f"{node.failure.failure_type}: {node.failure.error_context}")
            if policy.fail_fast:
                terminal = Terminal.UNRECOVERED_FAILURE

    logged = ctx.logged_count()
    if ctx.trace is not None and logged != ctx.executed_count:
        raise InvariantViolation(f"executed {ctx.executed_count} actions but logged {logged}")
    return RunResult(
        trace=ctx.trace,
        final_outputs=ctx.available_artifacts(),
        executed_count=ctx.executed_count,
        iterations_used=used,
        terminal=terminal,
        diagnostics=diagnostics,
        logged_count=logged,
    )
