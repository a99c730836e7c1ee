"""Planner contract, the three deterministic planners, and reference resolution."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

from . import canonical
from .action import Action, ArtifactRef, SYMBOLIC_REF
from .errors import PlannerError, ResolutionError
from .store import ContentHash
from .trace import FailureRecord, Status
from .workload import (
    REQUIRED_ARTIFACTS,
    STAGE_OUTPUT,
    STAGES,
    WorkloadConfig,
    make_action,
)

PLANNER_MODES = ("scripted", "history_free", "history_fed")


@dataclass(frozen=True)
class HistoryEntry:
    node_id: str
    action_type: str
    status: Status
    output_names: tuple[str, ...]


@dataclass(frozen=True)
class ObservableState:
    """What the planner is shown before each proposal.

    History-free planners get an empty ``history``, no ``last_failure`` and
    no ``available_artifacts``; only ``iteration`` advances.
    """

    history: tuple[HistoryEntry, ...] = ()
    last_failure: FailureRecord | None = None
    available_artifacts: tuple[tuple[str, ContentHash], ...] = ()
    last_failed_node: str | None = None
    iteration: int = 0

    def available_names(self) -> set[str]:
        return {name for name, _ in self.available_artifacts}


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Propose:
    action: Action
    recovery_target: str | None = None


ActionProposal = Union[Done, Propose]
DONE = Done()


def resolve_reference(ref: ArtifactRef | str, trace) -> ContentHash:
    """Look up ``@node:<id>/output:<name>`` in a trace, partial outputs included."""
    text = ref.symbolic if isinstance(ref, ArtifactRef) else ref
    m = SYMBOLIC_REF.fullmatch(text or "")
    if m is None:
        raise ResolutionError(f"malformed reference: {text!r}")
    node = trace.get(m["node"])
    if node is None:
        raise ResolutionError(f"unknown node in {text}")
    outputs = node.all_outputs
    if m["output"] not in outputs:
        raise ResolutionError(f"node {m['node']} has no output {m['output']!r}")
    return outputs[m["output"]]


def _positional_producers() -> dict[str, str]:
    # blind planners assume stage i lands at node a<i>
    return {STAGE_OUTPUT[s]: f"a{i}" for i, s in enumerate(STAGES)}


def fixed_plan(config: WorkloadConfig, planner_config: Mapping) -> list[Action]:
    producers = _positional_producers()
    return [make_action(s, config, producers, planner_config) for s in STAGES]


class Planner:
    mode: str = ""

    def propose(self, state: ObservableState) -> ActionProposal:
        raise NotImplementedError

    @property
    def config(self) -> dict:
        return {"name": self.mode}


class ScriptedPlanner(Planner):
    """Replays a fixed list of proposals, then DONE."""

    mode = "scripted"

    def __init__(self, script: Sequence[ActionProposal | Action], workload: WorkloadConfig | None = None) -> None:
        self.workload = workload
        self.script = [p if isinstance(p, (Done, Propose)) else Propose(p) for p in script]

    @classmethod
    def for_workload(cls, workload: WorkloadConfig) -> ScriptedPlanner:
        planner = cls([], workload)
        planner.script = [Propose(a) for a in fixed_plan(workload, planner.config)]
        return planner

    @property
    def config(self) -> dict:
        return _planner_config(self.mode, self.workload)

    def propose(self, state: ObservableState) -> ActionProposal:
        if state.iteration < len(self.script):
            return self.script[state.iteration]
        return DONE


class HistoryFreePlanner(Planner):
    """Naive planner: emits the k-th step of its plan without looking at history.

    With ``loop=True`` the plan wraps around and DONE is never emitted,
    re-proposing work that has already been done.
    """

    mode = "history_free"

    def __init__(self, workload: WorkloadConfig | None = None, loop: bool = False) -> None:
        self.workload = workload or WorkloadConfig()
        self.loop = loop
        self.plan = fixed_plan(self.workload, self.config)

    @property
    def config(self) -> dict:
        return _planner_config(self.mode, self.workload)

    def propose(self, state: ObservableState) -> ActionProposal:
        k = state.iteration
        if self.loop:
            return Propose(self.plan[k % len(self.plan)])
        return Propose(self.plan[k]) if k < len(self.plan) else DONE


class HistoryFedPlanner(Planner):
    """Chooses the first stage whose output is missing; DONE once all exist.

    After a failure it proposes a recovery of the failed stage, resuming
    from a ``checkpoint`` partial output when one was left behind.
    """

    mode = "history_fed"

    def __init__(self, workload: WorkloadConfig | None = None) -> None:
        self.workload = workload or WorkloadConfig()

    @property
    def config(self) -> dict:
        return _planner_config(self.mode, self.workload)

    def propose(self, state: ObservableState) -> ActionProposal:
        producers: dict[str, str] = {}
        types: dict[str, str] = {}
        for entry in state.history:
            types[entry.node_id] = entry.action_type
            if entry.status is not Status.FAILED:
                for name in entry.output_names:
                    producers[name] = entry.node_id

        if state.last_failure is not None and state.last_failed_node is not None:
            failed = state.last_failed_node
            stage = types.get(failed)
            if stage not in STAGES:
                raise PlannerError(f"cannot plan recovery for node {failed!r}")
            extra = {}
            if "checkpoint" in state.last_failure.partial_outputs:
                extra["checkpoint"] = ArtifactRef.ref(failed, "checkpoint")
            action = self._make(stage, producers, extra)
            return Propose(action, recovery_target=failed)

        have = state.available_names()
        for stage in STAGES:
            if STAGE_OUTPUT[stage] not in have:
                return Propose(self._make(stage, producers))
        return DONE

    def _make(self, stage, producers, extra=None) -> Action:
        try:
            return make_action(stage, self.workload, producers, self.config, extra)
        except KeyError as exc:
            raise PlannerError(f"{stage}: no producer for {exc.args[0]!r}") from None


class RemotePlanner(Planner):
    """Delegates to a text-completion callable; off by default, never used in tests of the suite.

    The callable receives a JSON prompt and must answer with either
    ``{"done": true}`` or ``{"action": <action record>, "recovery_target": <id|null>}``.
    """

    mode = "remote"

    def __init__(self, complete: Callable[[str], str], model: str = "", temperature: str = "0.0") -> None:
        self.complete = complete
        self.model = model
        self.temperature = temperature

    @property
    def config(self) -> dict:
        return {"name": self.mode, "model": self.model, "temperature": self.temperature}

    def prompt(self, state: ObservableState) -> str:
        return canonical.dumps({
            "required_artifacts": list(REQUIRED_ARTIFACTS),
            "available_artifacts": [[n, h.hex] for n, h in state.available_artifacts],
            "history": [[e.node_id, e.action_type, e.status.value, list(e.output_names)] for e in state.history],
            "last_failure": None if state.last_failure is None else state.last_failure.to_dict(),
            "last_failed_node": state.last_failed_node,
        })

    def propose(self, state: ObservableState) -> ActionProposal:
        reply = self.complete(self.prompt(state))
        try:
            data = json.loads(reply)
            if data.get("done") is True:
                return DONE
            return Propose(Action.from_dict(data["action"]), data.get("recovery_target"))
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise PlannerError(f"unparseable planner reply: {exc}") from None


def _planner_config(mode: str, workload: WorkloadConfig | None) -> dict:
    cfg = {"name": mode, "temperature": "0.0"}
    if workload is not None:
        cfg.update(
            seed=workload.seed,
            n_rows=workload.n_rows,
            learning_rate=workload.learning_rate,
            iterations=workload.iterations,
        )
    return cfg


def make_planner(mode: str, workload: WorkloadConfig | None = None) -> Planner:
    workload = workload or WorkloadConfig()
    if mode == "scripted":
        return ScriptedPlanner.for_workload(workload)
    if mode == "history_free":
        return HistoryFreePlanner(workload)
    if mode == "history_fed":
        return HistoryFedPlanner(workload)
    raise ValueError(f"unknown planner mode {mode!r}; expected one of {PLANNER_MODES}")


def planner_from_config(planner_config: Mapping) -> Planner:
    """Rebuild a shipped planner from the ``planner_config`` stamped on its actions."""
    cfg = dict(planner_config)
    workload = WorkloadConfig(
        seed=cfg.get("seed", 42),
        n_rows=cfg.get("n_rows", 200),
        learning_rate=cfg.get("learning_rate", 0.1),
        iterations=cfg.get("iterations", 200),
    )
    return make_planner(cfg.get("name", "history_fed"), workload)
