from __future__ import annotations


import pytest
from hypothesis import given
from hypothesis import strategies as st

from provenact.action import Action
from provenact.config import RunConfig, execute_run
from provenact.engine import Terminal
from provenact.errors import InvariantViolation
from provenact.metrics import (
    EXPECTED_TABLE,
    MetricsRow,
    Pipeline,
    SuiteConfig,
    diagnostics_visibility,
    failure_visibility,
    format_table,
    matches_expected,
    replay_and_verify,
    report_bytes,
    reproducibility_success,
    run_experiment_suite,
    trace_completeness,
    variance,
)
from provenact.store import ContentHash
from provenact.trace import ExecutionTrace, FailureRecord, Status, TraceNode, append_node
from provenact.workload import workload_registry

from .conftest import GOLDEN

ENV = ContentHash.of(b"env")


def test_expected_table_values():
    # Execution Correctness Results: Replay, Trace, Failure, Variance
    assert EXPECTED_TABLE == {
        Pipeline.SCRIPT_BASED: (1.0, 0.0, 1.0, 0.0),
        Pipeline.NAIVE_LAM: (0.0, 0.0, 1.0, 1.0),
        Pipeline.RLAM_CONSTRAINED: (1.0, 1.0, 1.0, 0.0),
    }


@pytest.mark.parametrize("logged, executed, expected", [(5, 5, 1.0), (0, 5, 0.0), (0, 0, 1.0), (3, 4, 0.75)])
def test_trace_completeness(logged, executed, expected):
    assert trace_completeness(logged, executed) == expected


def test_trace_completeness_invariant():
    with pytest.raises(InvariantViolation):
        trace_completeness(6, 5)


@given(st.integers(0, 50), st.integers(1, 50), st.integers(1, 10))
def test_trace_completeness_monotone(logged, executed, bump):
    if logged + bump <= executed:
        assert trace_completeness(logged + bump, executed) >= trace_completeness(logged, executed)
    if logged <= executed:
        assert trace_completeness(logged, executed + bump) <= trace_completeness(logged, executed)


def test_reproducibility_success(store, canonical_run):
    result = canonical_run[0]
    assert reproducibility_success(result, replay_and_verify(result, store)) == 1
    naive = execute_run(RunConfig(planner="history_free", provenance=False), store)
    assert reproducibility_success(naive, replay_and_verify(naive, store)) == 0
    script = execute_run(RunConfig(planner="scripted", provenance=False), store)
    assert reproducibility_success(script, replay_and_verify(script, store)) == 0


def test_reproducibility_implies_full_completeness(store, canonical_run):
    result = canonical_run[0]
    if reproducibility_success(result, replay_and_verify(result, store)):
        assert trace_completeness(result.logged_count, result.executed_count) == 1.0


def _n(nid, action_type, status=Status.SUCCESS, parents=(), recovery_of=None, failure=None):
    if status is Status.FAILED and failure is None:
        failure = FailureRecord("InjectedTrainingFault", "boom", {"checkpoint": ContentHash.of(b"c")})
    return TraceNode(nid, Action(nid, action_type), status, {}, ENV, 0, 1, parents, failure, recovery_of)


def test_failure_visibility_recovered(store):
    result = execute_run(RunConfig(inject_failure=True), store)
    assert failure_visibility(result.trace) == 1


def test_failure_visibility_unlinked_recovery():
    trace = ExecutionTrace("t")
    append_node(trace, _n("a0", "train", Status.FAILED))
    append_node(trace, _n("a1", "train"))
    assert failure_visibility(trace) == 0


def test_failure_visibility_without_recovery(store):
    result = execute_run(RunConfig(inject_failure=True, fail_fast=True), store)
    assert result.terminal is Terminal.UNRECOVERED_FAILURE
    assert failure_visibility(result.trace) == 1


def test_failure_visibility_no_trace_or_no_failure(canonical_run):
    assert failure_visibility(None) == 0
    assert failure_visibility(canonical_run[0].trace) == 0


def test_diagnostics_visibility(store):
    result = execute_run(RunConfig(planner="scripted", provenance=False, fail_fast=True, inject_failure=True), store)
    assert result.trace is None
    assert diagnostics_visibility(result, "InjectedTrainingFault") == 1
    assert diagnostics_visibility(result, "SomethingElse") == 0


def test_variance_identical_runs(store):
    registry = workload_registry()
    runs = [execute_run(RunConfig(), store, registry) for _ in range(5)]
    assert variance(runs) == 0
    scripted = [execute_run(RunConfig(planner="scripted", provenance=False), store) for _ in range(2)]
    assert variance(scripted) == 0


def test_variance_with_unseeded_adapter(store):
    config = RunConfig(planner="history_free", provenance=False, unseeded=True)
    registry = workload_registry(unseeded=True)
    runs = [execute_run(config, store, registry) for _ in range(3)]
    assert variance(runs) == 1


def test_variance_needs_two_runs(canonical_run):
    with pytest.raises(ValueError):
        variance([canonical_run[0]])


def test_metrics_row_ranges():
    with pytest.raises(ValueError):
        MetricsRow(Pipeline.NAIVE_LAM, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        MetricsRow(Pipeline.NAIVE_LAM, 0.0, 1.5, 1.0, 1.0)


def test_suite_default_and_k2_agree():
    rows5 = run_experiment_suite()
    rows2 = run_experiment_suite(SuiteConfig(runs=2))
    assert matches_expected(rows5)
    assert rows5 == rows2


def test_suite_report_matches_golden():
    rows = run_experiment_suite()
    assert report_bytes(rows) == (GOLDEN / "report.json").read_bytes()
    assert format_table(rows) == (GOLDEN / "table.txt").read_text()


def test_suite_needs_repeats():
    with pytest.raises(ValueError):
        run_experiment_suite(SuiteConfig(runs=1))
