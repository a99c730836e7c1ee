"""
Forking at the training step
============================

Change the learning rate of a finished run. The first three nodes are
copied as ``Replayed``; only ``train`` and ``evaluate`` run again, and the
source trace is left untouched.
"""

import tempfile

from provenact import canonical
from provenact.config import RunConfig, execute_run
from provenact.replay import ForkSpec, fork_run
from provenact.store import ArtifactStore
from provenact.workload import workload_registry

store = ArtifactStore(tempfile.mkdtemp())
source = execute_run(RunConfig(), store).trace

registry = workload_registry()
result = fork_run(ForkSpec(source.trace_id, "a3", {"learning_rate": 0.02}), source, registry, store)
branch = result.trace

for node in branch.nodes:
    same = node.outputs == source[node.node_id].outputs
    print(f"{node.node_id} {node.action.action_type:<10} {node.status.value:<8} same outputs: {same}")
print("adapter calls:", registry.total_calls())

# The model changed; compare the weights.
for trace in (source, branch):
    model = canonical.loads(store.get(trace["a3"].outputs["model"]))
    print(model["learning_rate"], [round(w, 4) for w in model["weights"]])
