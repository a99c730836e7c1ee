"""Exit criteria. Each test is tagged with the criterion it checks; a
PASS/FAIL line per criterion is printed in the pytest terminal summary."""

from __future__ import annotations

import io
import json
import time

import pytest

from provenact.cli import main
from provenact.config import RunConfig, execute_run
from provenact.engine import EngineContext, ExecutionPolicy, Terminal, run_workflow
from provenact.metrics import (
    EXPECTED_TABLE,
    failure_visibility,
    run_experiment_suite,
    variance,
)
from provenact.planner import HistoryFedPlanner, Propose
from provenact.replay import ForkSpec, fork_run, replay, verify_replay
from provenact.store import ArtifactStore
from provenact.trace import Status, load_trace, save_trace
from provenact.workload import WorkloadConfig, make_action, workload_registry

C1 = "1. Table reproduction"
C2 = "2. Replay correctness"
C3 = "3. Determinism"
C4 = "4. Fork isolation"
C5 = "5. Failure auditability"
C6 = "6. Control-loop bounds"
C7 = "7. Trace node richness"
C8 = "8. Property suites"

NODE_FIELDS = ("node_id", "action", "status", "outputs", "env_hash", "started_at", "finished_at", "parents")


@pytest.mark.criterion(C1)
def test_table_reproduction():
    start = time.perf_counter()
    rows = run_experiment_suite()
    elapsed = time.perf_counter() - start
    assert {r.pipeline: r.values() for r in rows} == EXPECTED_TABLE
    assert [r.pipeline for r in rows] == list(EXPECTED_TABLE)
    assert elapsed < 60.0


@pytest.mark.criterion(C1)
def test_table_reproduction_via_cli():
    out = io.StringIO()
    assert main(["evaluate"], out=out) == 0
    lines = out.getvalue().splitlines()
    assert [line.split() for line in lines[1:]] == [
        ["ScriptBased", "1.0", "0.0", "1.0", "0.0"],
        ["NaiveLAM", "0.0", "0.0", "1.0", "1.0"],
        ["RLAMConstrained", "1.0", "1.0", "1.0", "0.0"],
    ]


@pytest.mark.criterion(C2)
def test_replay_correctness(store):
    registry = workload_registry()
    result = execute_run(RunConfig(), store, registry)
    before = registry.total_calls()
    outcome = replay(result.trace, store)
    assert registry.total_calls() - before == 0
    assert outcome.dispatch_count == 0
    assert verify_replay(result.trace, outcome, store) == 1


@pytest.mark.criterion(C3)
def test_determinism(tmp_path):
    traces, runs = [], []
    for i in range(5):
        store = ArtifactStore(tmp_path / f"run{i}")
        result = execute_run(RunConfig(seed=42), store)
        runs.append(result)
        traces.append(save_trace(result.trace))
    assert len(set(traces)) == 1
    assert len({tuple(sorted((k, h.hex) for k, h in r.final_outputs.items())) for r in runs}) == 1
    assert variance(runs) == 0


@pytest.mark.criterion(C4)
def test_fork_isolation(store, tmp_path):
    source = execute_run(RunConfig(), store).trace
    path = tmp_path / "source.rlam-trace"
    path.write_bytes(save_trace(source))
    before = path.read_bytes()

    train = next(n.node_id for n in source.nodes if n.action.action_type == "train")
    registry = workload_registry()
    new = fork_run(ForkSpec(source.trace_id, train, {"learning_rate": 0.2}), load_trace(before), registry, store).trace

    assert registry.total_calls() == 2
    assert {a.name: a.calls for _, a in registry.items() if a.calls} == {"train": 1, "evaluate": 1}
    prefix = [n for n in new.nodes if n.status is Status.REPLAYED]
    assert [n.node_id for n in prefix] == ["a0", "a1", "a2"]
    assert all(n.outputs == source[n.node_id].outputs for n in prefix)
    downstream = [n for n in new.nodes if n.status is not Status.REPLAYED]
    assert any(n.outputs != source[n.node_id].outputs for n in downstream)
    assert path.read_bytes() == before


@pytest.mark.criterion(C5)
def test_failure_auditability(store, tmp_path):
    result = execute_run(RunConfig(inject_failure=True), store)
    failed = [n for n in result.trace.nodes if n.status is Status.FAILED]
    assert len(failed) == 1
    f = failed[0].failure
    assert f.failure_type == "InjectedTrainingFault"
    assert f.error_context
    assert "checkpoint" in f.partial_outputs
    recovery = [n for n in result.trace.nodes if n.recovery_of == failed[0].node_id]
    assert len(recovery) == 1 and recovery[0].status is Status.SUCCESS
    assert failure_visibility(result.trace) == 1

    naive_path = tmp_path / "naive.rlam-trace"
    code = main(["run", "--planner", "history_free", "--provenance", "off", "--fail-fast",
                 "--inject-failure", "train", "--out", str(naive_path)], out=io.StringIO())
    assert code == 1
    assert not naive_path.exists()


class _NeverDone:
    mode = "scripted"

    def propose(self, state):
        return Propose(make_action("load_data", WorkloadConfig(), {}))


@pytest.mark.criterion(C6)
def test_control_loop_bounds(store):
    ctx = EngineContext(workload_registry(), store, ExecutionPolicy(max_iterations=10))
    result = run_workflow(HistoryFedPlanner(WorkloadConfig()), ctx.policy, ctx)
    assert result.terminal is Terminal.DONE
    assert result.iterations_used <= 5

    ctx = EngineContext(workload_registry(), store, ExecutionPolicy(max_iterations=10))
    result = run_workflow(_NeverDone(), ctx.policy, ctx)
    assert result.terminal is Terminal.ITERATION_CAP
    assert result.iterations_used == 10


@pytest.mark.criterion(C7)
def test_trace_node_richness(store):
    for config in (RunConfig(), RunConfig(inject_failure=True)):
        trace = execute_run(config, store).trace
        for line in save_trace(trace).splitlines()[1:]:
            record = json.loads(line)
            assert set(NODE_FIELDS) <= set(record)
            assert len(record) >= 8
        for node in trace.nodes:
            assert all(getattr(node, f) is not None for f in NODE_FIELDS)


# Criterion 8 aggregates the property suites that live in the unit test modules;
# they are re-exported here so they run and report under this criterion.
from .test_action import test_round_trip as _round_trip  # noqa: E402
from .test_engine import test_executed_equals_logged as _executed_equals_logged  # noqa: E402
from .test_store import test_get_put_identity as _get_put_identity  # noqa: E402
from .test_trace import test_persistence_is_byte_stable as _trace_round_trip  # noqa: E402
from .test_trace import test_topo_order_matches_brute_force as _topo_brute  # noqa: E402
from .test_workload import test_gradient_matches_central_differences as _gradient_check  # noqa: E402

test_property_action_round_trip = pytest.mark.criterion(C8)(_round_trip)
test_property_trace_round_trip = pytest.mark.criterion(C8)(_trace_round_trip)
test_property_store_identity = pytest.mark.criterion(C8)(_get_put_identity)
test_property_topo_order = pytest.mark.criterion(C8)(_topo_brute)
test_property_gradient = pytest.mark.criterion(C8)(_gradient_check)
test_property_executed_equals_logged = pytest.mark.criterion(C8)(_executed_equals_logged)
