"""
Failures stay in the trace
==========================

Inject a fault into training. The failed node keeps its error metadata
and a partial checkpoint; the planner's recovery attempt is a new node
that points back at it.
"""

import tempfile

from provenact.config import RunConfig, execute_run
from provenact.metrics import failure_visibility
from provenact.store import ArtifactStore

store = ArtifactStore(tempfile.mkdtemp())
result = execute_run(RunConfig(inject_failure=True), store)

for node in result.trace.nodes:
    line = f"{node.node_id} {node.action.action_type:<10} {node.status.value:<8} parents={list(node.parents)}"
    if node.failure:
        line += f" failure={node.failure.failure_type} partial={list(node.failure.partial_outputs)}"
    if node.recovery_of:
        line += f" recovery_of={node.recovery_of}"
    print(line)

print("failure visibility:", failure_visibility(result.trace))

# Without provenance and with fail-fast the same fault only surfaces as a message.
naive = execute_run(RunConfig(planner="history_free", provenance=False, fail_fast=True, inject_failure=True), store)
print(naive.terminal.value, naive.trace, naive.diagnostics)
