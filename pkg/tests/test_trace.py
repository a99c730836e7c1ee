from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provenact.action import Action
from provenact.errors import DanglingParent, DuplicateNodeId, ParseError
from provenact.store import ContentHash
from provenact.trace import (
    ExecutionTrace,
    FailureRecord,
    Status,
    TraceNode,
    append_node,
    audit_trace,
    load_trace,
    save_trace,
    topo_order,
)

from .conftest import GOLDEN

ENV = ContentHash.of(b"env")


def node(node_id, parents=(), status=Status.SUCCESS, t=0, **kw) -> TraceNode:
    failure = kw.pop("failure", None)
    if status is Status.FAILED and failure is None:
        failure = FailureRecord("Boom", "it broke")
    return TraceNode(
        node_id=node_id,
        action=Action(node_id, "noop"),
        status=status,
        outputs=kw.pop("outputs", {"out": ContentHash.of(node_id.encode())}),
        env_hash=ENV,
        started_at=t,
        finished_at=t + 1,
        parents=tuple(parents),
        failure=failure,
        **kw,
    )


def chain(n: int) -> ExecutionTrace:
    trace = ExecutionTrace("chain")
    for i in range(n):
        append_node(trace, node(f"a{i}", [f"a{i-1}"] if i else [], t=2 * i))
    return trace


def brute_force_first_order(edges: dict[str, tuple[str, ...]], ids: list[str]) -> list[str]:
    """Enumerate every permutation; keep the valid ones; take the smallest by append position."""
    pos = {nid: i for i, nid in enumerate(ids)}
    valid = []
    for perm in itertools.permutations(ids):
        seen = {}
        for i, nid in enumerate(perm):
            seen[nid] = i
        if all(seen[p] < seen[c] for c in ids for p in edges[c]):
            valid.append(perm)
    return list(min(valid, key=lambda p: [pos[x] for x in p]))


def test_append_root():
    trace = ExecutionTrace("t")
    assert append_node(trace, node("a0")) == "a0"
    assert len(trace) == 1


def test_append_dangling_parent():
    trace = ExecutionTrace("t")
    with pytest.raises(DanglingParent):
        append_node(trace, node("a1", ["missing"]))
    assert len(trace) == 0


def test_append_duplicate():
    trace = chain(1)
    with pytest.raises(DuplicateNodeId):
        append_node(trace, node("a0"))


def test_chain_append_order_is_topological():
    trace = chain(5)
    ids = trace.node_ids()
    edges = {n.node_id: n.parents for n in trace.nodes}
    assert ids == ["a0", "a1", "a2", "a3", "a4"]
    assert topo_order(trace) == ids == brute_force_first_order(edges, ids)


def test_topo_empty():
    assert topo_order(ExecutionTrace("t")) == []


def test_topo_diamond():
    trace = ExecutionTrace("d")
    for nid, parents in [("a0", []), ("a1", ["a0"]), ("a2", ["a0"]), ("a3", ["a1", "a2"])]:
        append_node(trace, node(nid, parents))
    edges = {n.node_id: n.parents for n in trace.nodes}
    assert topo_order(trace) == ["a0", "a1", "a2", "a3"] == brute_force_first_order(edges, trace.node_ids())


def test_failure_invariant():
    with pytest.raises(ValueError):
        TraceNode("a0", Action("a0", "x"), Status.SUCCESS, {}, ENV, 0, 1, failure=FailureRecord("X"))
    with pytest.raises(ValueError):
        TraceNode("a0", Action("a0", "x"), Status.FAILED, {}, ENV, 0, 1)
    with pytest.raises(ValueError):
        FailureRecord("")


def test_recovery_of_must_name_failed_node():
    trace = ExecutionTrace("t")
    append_node(trace, node("a0"))
    with pytest.raises(DanglingParent):
        append_node(trace, node("a1", ["a0"], recovery_of="a0"))
    append_node(trace, node("a1", ["a0"], status=Status.FAILED))
    append_node(trace, node("a2", ["a1"], recovery_of="a1"))
    assert trace["a2"].recovery_of == "a1"


def test_node_has_at_least_eight_fields():
    d = node("a0").to_dict()
    required = {"node_id", "action", "status", "outputs", "env_hash", "started_at", "finished_at", "parents"}
    assert required <= set(d)


# --- persistence --------------------------------------------------------------

def test_golden_trace_round_trip():
    data = (GOLDEN / "canonical.rlam-trace").read_bytes()
    trace = load_trace(data)
    assert len(trace) == 5
    assert save_trace(trace) == data
    assert load_trace(save_trace(trace)) == trace


def test_empty_trace_is_header_only():
    data = save_trace(ExecutionTrace("empty"))
    assert data.count(b"\n") == 1
    assert load_trace(data) == ExecutionTrace("empty")


def test_truncated_file():
    data = (GOLDEN / "canonical.rlam-trace").read_bytes()
    with pytest.raises(ParseError) as info:
        load_trace(data[: len(data) // 2])
    assert info.value.line >= 1
    with pytest.raises(ParseError):
        load_trace(b"")


def test_malformed_line_reports_position():
    data = save_trace(chain(2)).replace(b'"status":"Success"', b'"status":Success', 1)
    with pytest.raises(ParseError) as info:
        load_trace(data)
    assert info.value.line == 2
    assert info.value.offset > 0


def test_dangling_parent_in_file():
    trace = chain(3)
    lines = save_trace(trace).split(b"\n")
    del lines[2]  # drop a1, orphaning a2
    with pytest.raises(ParseError) as info:
        load_trace(b"\n".join(lines))
    assert "DanglingParent" in str(info.value)


def test_fork_header_round_trip():
    trace = chain(2)
    trace.fork_of = ("src", "a1")
    again = load_trace(save_trace(trace))
    assert again.fork_of == ("src", "a1")


def test_audit_reports_missing_hashes(store):
    trace = chain(2)
    assert len(audit_trace(trace, store)) == 2
    store.put(b"a0")
    store.put(b"a1")
    assert audit_trace(trace, store) == []


# --- generated DAGs ------------------------------------------------------------

@st.composite
def dags(draw, max_nodes=8):
    n = draw(st.integers(min_value=0, max_value=max_nodes))
    trace = ExecutionTrace("g")
    for i in range(n):
        parents = draw(st.lists(st.integers(0, i - 1), unique=True, max_size=i)) if i else []
        status = draw(st.sampled_from([Status.SUCCESS, Status.FAILED, Status.REPLAYED]))
        append_node(trace, node(f"n{i}", [f"n{p}" for p in sorted(parents)], status=status, t=2 * i))
    return trace


@settings(max_examples=40, deadline=None)
@given(dags())
def test_topo_order_matches_brute_force(trace):
    ids = trace.node_ids()
    edges = {n.node_id: n.parents for n in trace.nodes}
    order = topo_order(trace)
    pos = {nid: i for i, nid in enumerate(order)}
    assert all(pos[p] < pos[c] for c in ids for p in edges[c])
    assert order == brute_force_first_order(edges, ids)


@settings(max_examples=100, deadline=None)
@given(dags())
def test_edges_acyclic_by_construction(trace):
    pos = {nid: i for i, nid in enumerate(trace.node_ids())}
    for n in trace.nodes:
        assert all(pos[p] < pos[n.node_id] for p in n.parents)


@settings(max_examples=100, deadline=None)
@given(dags())
def test_persistence_is_byte_stable(trace):
    data = save_trace(trace)
    again = load_trace(data)
    assert again == trace
    assert save_trace(again) == data
