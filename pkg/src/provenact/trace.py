"""Append-only execution trace DAG and its line-oriented file format."""

from __future__ import annotations

import enum
import heapq
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from . import canonical
from .action import Action
from .errors import DanglingParent, DuplicateNodeId, ParseError
from .store import ContentHash

FORMAT = "provenact-trace/1"
SUFFIX = ".rlam-trace"

_EMPTY: Mapping = MappingProxyType({})


class Status(str, enum.Enum):
    SUCCESS = "Success"
    FAILED = "Failed"
    REPLAYED = "Replayed"


def _freeze_hashes(m: Mapping[str, ContentHash]) -> Mapping[str, ContentHash]:
    for v in m.values():
        if not isinstance(v, ContentHash):
            raise TypeError(f"expected ContentHash, got {type(v).__name__}")
    return MappingProxyType(dict(m))


def _hashes_to_dict(m: Mapping[str, ContentHash]) -> dict:
    return {k: v.hex for k, v in m.items()}


def _hashes_from_dict(d: Mapping) -> dict:
    return {k: ContentHash.from_hex(v) for k, v in d.items()}


@dataclass(frozen=True)
class FailureRecord:
    failure_type: str
    error_context: str = ""
    partial_outputs: Mapping[str, ContentHash] = _EMPTY

    def __post_init__(self) -> None:
        if not self.failure_type:
            raise ValueError("failure_type must be non-empty")
        object.__setattr__(self, "partial_outputs", _freeze_hashes(self.partial_outputs))

    def to_dict(self) -> dict:
        return {
            "failure_type": self.failure_type,
            "error_context": self.error_context,
            "partial_outputs": _hashes_to_dict(self.partial_outputs),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> FailureRecord:
        return cls(d["failure_type"], d["error_context"], _hashes_from_dict(d["partial_outputs"]))


@dataclass(frozen=True)
class TraceNode:
    node_id: str
    action: Action
    status: Status
    outputs: Mapping[str, ContentHash]
    env_hash: ContentHash
    started_at: int
    finished_at: int
    parents: tuple[str, ...] = ()
    failure: FailureRecord | None = None
    recovery_of: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "outputs", _freeze_hashes(self.outputs))
        object.__setattr__(self, "parents", tuple(self.parents))
        if (self.status is Status.FAILED) != (self.failure is not None):
            raise ValueError("a FailureRecord is present iff status is Failed")
        if self.node_id != self.action.id:
            raise ValueError("node_id must equal the action id")
        if self.finished_at < self.started_at:
            raise ValueError("finished_at precedes started_at")

    @property
    def all_outputs(self) -> Mapping[str, ContentHash]:
        """Outputs plus partial outputs of a failure (partials never shadow)."""
        if self.failure is None:
            return self.outputs
        merged = dict(self.failure.partial_outputs)
        merged.update(self.outputs)
        return merged

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "action": self.action.to_dict(),
            "status": self.status.value,
            "outputs": _hashes_to_dict(self.outputs),
            "env_hash": self.env_hash.hex,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "parents": list(self.parents),
            "failure": None if self.failure is None else self.failure.to_dict(),
            "recovery_of": self.recovery_of,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> TraceNode:
        return cls(
            node_id=d["node_id"],
            action=Action.from_dict(d["action"]),
            status=Status(d["status"]),
            outputs=_hashes_from_dict(d["outputs"]),
            env_hash=ContentHash.from_hex(d["env_hash"]),
            started_at=d["started_at"],
            finished_at=d["finished_at"],
            parents=tuple(d["parents"]),
            failure=None if d["failure"] is None else FailureRecord.from_dict(d["failure"]),
            recovery_of=d["recovery_of"],
        )


@dataclass
class ExecutionTrace:
    """Append-only node list. Append order is always a topological order."""

    trace_id: str
    nodes: list[TraceNode] = field(default_factory=list)
    fork_of: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        self._index = {n.node_id: i for i, n in enumerate(self.nodes)}
        if self.fork_of is not None:
            self.fork_of = tuple(self.fork_of)

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    def __getitem__(self, node_id: str) -> TraceNode:
        return self.nodes[self._index[node_id]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExecutionTrace):
            return NotImplemented
        return (self.trace_id, self.nodes, self.fork_of) == (other.trace_id, other.nodes, other.fork_of)

    def get(self, node_id: str) -> TraceNode | None:
        i = self._index.get(node_id)
        return None if i is None else self.nodes[i]

    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]


def append_node(trace: ExecutionTrace, node: TraceNode) -> str:
    if node.node_id in trace._index:
        raise DuplicateNodeId(node.node_id)
    for p in node.parents:
        if p not in trace._index:
            raise DanglingParent(f"{node.node_id} -> {p}")
    if node.recovery_of is not None:
        target = trace.get(node.recovery_of)
        if target is None or target.status is not Status.FAILED:
            raise DanglingParent(f"recovery_of must name a Failed node: {node.recovery_of}")
    trace._index[node.node_id] = len(trace.nodes)
    trace.nodes.append(node)
    return node.node_id


def topo_order(trace: ExecutionTrace) -> list[str]:
    """Kahn's algorithm; ties broken by ascending append position."""
    pos = trace._index
    children: dict[str, list[str]] = {n.node_id: [] for n in trace.nodes}
    pending = {}
    for n in trace.nodes:
        uniq = set(n.parents)
        pending[n.node_id] = len(uniq)
        for p in uniq:
            children[p].append(n.node_id)
    ready = [pos[nid] for nid, k in pending.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = trace.nodes[heapq.heappop(ready)].node_id
        order.append(nid)
        for c in children[nid]:
            pending[c] -= 1
            if pending[c] == 0:
                heapq.heappush(ready, pos[c])
    return order


def header_record(trace: ExecutionTrace) -> dict:
    return {
        "format": FORMAT,
        "trace_id": trace.trace_id,
        "fork_of": None if trace.fork_of is None else list(trace.fork_of),
    }


def save_trace(trace: ExecutionTrace) -> bytes:
    lines = [canonical.dumps(header_record(trace))]
    lines.extend(canonical.dumps(n.to_dict()) for n in trace.nodes)
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_trace(data: bytes) -> ExecutionTrace:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("not valid UTF-8", line=text_line(data, exc.start), offset=exc.start) from None
    if not text.endswith("\n"):
        raise ParseError("missing final newline (truncated file?)", line=text.count("\n") + 1, offset=len(data))
    lines = text[:-1].split("\n")
    offset = 0
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=lineno, offset=offset + exc.pos) from None
        offset += len(line.encode("utf-8")) + 1

    header = records[0]
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise ParseError(f"expected header with format {FORMAT!r}", line=1)
    fork_of = header.get("fork_of")
    trace = ExecutionTrace(header["trace_id"], fork_of=None if fork_of is None else tuple(fork_of))
    for lineno, rec in enumerate(records[1:], start=2):
        try:
            node = TraceNode.from_dict(rec)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"malformed node record: {exc}", line=lineno) from None
        try:
            append_node(trace, node)
        except (DanglingParent, DuplicateNodeId) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", line=lineno) from None
    return trace


def text_line(data: bytes, pos: int) -> int:
    return data[:pos].count(b"\n") + 1


def referenced_hashes(trace: ExecutionTrace) -> list[ContentHash]:
    """Every output and partial-output hash named by the trace, in append order."""
    seen: dict[ContentHash, None] = {}
    for n in trace.nodes:
        for h in n.all_outputs.values():
            seen.setdefault(h)
    return list(seen)


def audit_trace(trace: ExecutionTrace, store) -> list[ContentHash]:
    """Hashes referenced by the trace but missing from ``store``."""
    return [h for h in referenced_hashes(trace) if h not in store]
