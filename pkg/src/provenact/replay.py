"""Replay from the trace alone, and forks that reuse a logged prefix."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Any

from . import canonical
from .adapters import AdapterRegistry
from .engine import EngineContext, ExecutionPolicy, RunResult, execute_action, run_workflow
from .errors import EmptyModifications, MissingArtifact, ModifiedPrefixNode, NotFound, UnknownNode
from .planner import Planner, planner_from_config
from .store import ArtifactStore, ContentHash
from .trace import ExecutionTrace, Status, TraceNode, topo_order


@dataclass
class ReplayResult:
    outputs: dict[str, dict[str, ContentHash]]
    payloads: dict[ContentHash, bytes] = field(default_factory=dict, repr=False)
    dispatch_count: int = 0
    identical: bool | None = None


def replay(trace: ExecutionTrace, store: ArtifactStore) -> ReplayResult:
    """Reconstruct every node's outputs from the store in topological order.

    No adapter is consulted. Failed nodes contribute their partial outputs.
    """
    outputs: dict[str, dict[str, ContentHash]] = {}
    payloads: dict[ContentHash, bytes] = {}
    for node_id in topo_order(trace):
        node = trace[node_id]
        produced = dict(node.all_outputs)
        for name, h in produced.items():
            if h not in payloads:
                try:
                    payloads[h] = store.get(h)
                except NotFound:
                    raise MissingArtifact(f"{node_id}/{name}: {h.hex} not in store") from None
        outputs[node_id] = produced
    return ReplayResult(outputs=outputs, payloads=payloads, dispatch_count=0)


def verify_replay(original: ExecutionTrace | None, result: ReplayResult | None, store: ArtifactStore) -> int:
    """1 iff the replayed bytes equal the original artifacts byte for byte and nothing was dispatched."""
    if original is None or result is None:
        return 0
    ok = result.dispatch_count == 0 and set(result.outputs) == set(original.node_ids())
    for node in original.nodes if ok else ():
        logged = dict(node.all_outputs)
        if result.outputs[node.node_id] != logged:
            ok = False
            break
        for h in logged.values():
            payload = result.payloads.get(h)
            try:
                reference = store.get(h)
            except NotFound:
                reference = None
            if payload is None or payload != reference or ContentHash.of(payload) != h:
                ok = False
                break
        if not ok:
            break
    result.identical = ok
    return int(ok)


@dataclass(frozen=True)
class ForkSpec:
    """Diverge from ``source_trace`` at ``at_node`` with new parameter values.

    Keys may be bare parameter names or ``<node_id>.<param>``; qualified
    keys must name ``at_node``.
    """

    source_trace: str
    at_node: str
    modifications: Mapping[str, Any]

    def __post_init__(self) -> None:
        object.__setattr__(self, "modifications", canonical.freeze(dict(self.modifications)))

    def parameter_updates(self) -> dict[str, Any]:
        out = {}
        for key, value in self.modifications.items():
            node, sep, param = key.rpartition(".")
            if sep and node != self.at_node:
                raise ModifiedPrefixNode(f"{key!r} targets {node!r}, not the fork point {self.at_node!r}")
            out[param if sep else key] = value
        return out

    def fork_trace_id(self) -> str:
        digest = canonical.sha256_hex(canonical.to_bytes({
            "source": self.source_trace,
            "at": self.at_node,
            "set": canonical.thaw(self.modifications),
        }))
        return f"{self.source_trace}-fork-{digest[:12]}"


def _replayed_copy(node: TraceNode) -> TraceNode:
    # failed prefix nodes keep their status: a Replayed node cannot carry a failure
    if node.status is Status.SUCCESS:
        return replace(node, status=Status.REPLAYED)
    return node


def fork_run(
    spec: ForkSpec,
    source: ExecutionTrace,
    registry: AdapterRegistry,
    store: ArtifactStore,
    policy: ExecutionPolicy | None = None,
    planner: Planner | None = None,
) -> RunResult:
    """Copy the prefix, re-execute the modified action, then resume the planner loop."""
    if spec.source_trace != source.trace_id:
        raise UnknownNode(f"fork spec names trace {spec.source_trace!r}, got {source.trace_id!r}")
    if spec.at_node not in source:
        raise UnknownNode(spec.at_node)
    if not spec.modifications:
        raise EmptyModifications(spec.at_node)
    updates = spec.parameter_updates()
    original = source[spec.at_node]
    unknown = [k for k in updates if k not in original.action.parameters]
    if unknown:
        raise KeyError(f"{spec.at_node} has no parameter(s) {unknown}")

    cut = source.node_ids().index(spec.at_node)
    trace = ExecutionTrace(
        spec.fork_trace_id(),
        [_replayed_copy(n) for n in source.nodes[:cut]],
        fork_of=(source.trace_id, spec.at_node),
    )
    policy = policy or ExecutionPolicy()
    if not policy.provenance_enabled:
        raise ValueError("forking needs provenance: the new branch is itself a trace")
    ctx = EngineContext(registry, store, policy, trace=trace)

    params = dict(canonical.thaw(original.action.parameters))
    params.update(canonical.thaw(updates))
    md = replace(original.action.metadata, logical_timestamp=ctx.clock, environment_id=ctx.binding.environment_id)
    action = replace(original.action, parameters=params, metadata=md)
    execute_action(action, ctx, recovery_of=original.recovery_of)

    planner = planner or planner_from_config(original.action.metadata.planner_config)
    return run_workflow(planner, policy, ctx, start_iteration=len(trace))


def fork(
    spec: ForkSpec,
    source: ExecutionTrace,
    registry: AdapterRegistry,
    store: ArtifactStore,
    policy: ExecutionPolicy | None = None,
    planner: Planner | None = None,
) -> ExecutionTrace:
    return fork_run(spec, source, registry, store, policy, planner).trace
