"""Action schema, canonical serialization and admission checks."""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Union

from . import canonical
from .errors import ParseError
from .store import ContentHash

_NAME = r"[A-Za-z0-9_.\-]+"
SYMBOLIC_REF = re.compile(rf"@node:(?P<node>{_NAME})/output:(?P<output>{_NAME})")

_EMPTY: Mapping = MappingProxyType({})


@dataclass(frozen=True)
class ArtifactRef:
    """Exactly one of an inline value, a content hash, or a symbolic reference."""

    inline_value: Any = None
    content: ContentHash | None = None
    symbolic: str | None = None
    is_inline: bool = False

    def __post_init__(self) -> None:
        n = int(self.is_inline) + (self.content is not None) + (self.symbolic is not None)
        if n != 1:
            raise ValueError("ArtifactRef needs exactly one of inline_value, content, symbolic")
        if self.is_inline:
            object.__setattr__(self, "inline_value", canonical.freeze(self.inline_value))

    @classmethod
    def inline(cls, value: Any) -> ArtifactRef:
        return cls(inline_value=value, is_inline=True)

    @classmethod
    def of_hash(cls, h: ContentHash) -> ArtifactRef:
        return cls(content=h)

    @classmethod
    def ref(cls, node_id: str, output: str) -> ArtifactRef:
        return cls(symbolic=f"@node:{node_id}/output:{output}")

    def parse_symbolic(self) -> tuple[str, str] | None:
        """``(node_id, output_name)`` if this is a well-formed symbolic ref."""
        if self.symbolic is None:
            return None
        m = SYMBOLIC_REF.fullmatch(self.symbolic)
        return (m["node"], m["output"]) if m else None

    def to_dict(self) -> dict:
        if self.is_inline:
            return {"inline": canonical.thaw(self.inline_value)}
        if self.content is not None:
            return {"content": self.content.hex}
        return {"symbolic": self.symbolic}

    @classmethod
    def from_dict(cls, d: Mapping) -> ArtifactRef:
        if set(d) == {"inline"}:
            return cls.inline(d["inline"])
        if set(d) == {"content"}:
            return cls(content=ContentHash.from_hex(d["content"]))
        if set(d) == {"symbolic"}:
            return cls(symbolic=str(d["symbolic"]))
        raise ValueError(f"bad artifact ref: {dict(d)!r}")


@dataclass(frozen=True)
class ArtifactExists:
    name: str

    def to_dict(self) -> dict:
        return {"kind": "artifact_exists", "name": self.name}


@dataclass(frozen=True)
class ArtifactAbsent:
    name: str

    def to_dict(self) -> dict:
        return {"kind": "artifact_absent", "name": self.name}


@dataclass(frozen=True)
class ParamEquals:
    name: str
    value: Any

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", canonical.freeze(self.value))

    def to_dict(self) -> dict:
        return {"kind": "param_equals", "name": self.name, "value": canonical.thaw(self.value)}


Predicate = Union[ArtifactExists, ArtifactAbsent, ParamEquals]


@dataclass(frozen=True)
class Produces:
    name: str

    def to_dict(self) -> dict:
        return {"kind": "produces", "name": self.name}


EffectDecl = Produces


def predicate_from_dict(d: Mapping) -> Predicate:
    kind = d.get("kind")
    if kind == "artifact_exists":
        return ArtifactExists(d["name"])
    if kind == "artifact_absent":
        return ArtifactAbsent(d["name"])
    if kind == "param_equals":
        return ParamEquals(d["name"], d["value"])
    raise ValueError(f"unknown predicate kind: {kind!r}")


def effect_from_dict(d: Mapping) -> EffectDecl:
    if d.get("kind") != "produces":
        raise ValueError(f"unknown effect kind: {d.get('kind')!r}")
    return Produces(d["name"])


def _check_seed(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {v!r}")
    return v


@dataclass(frozen=True)
class Metadata:
    logical_timestamp: int = 0
    environment_id: str = ""
    planner_config: Mapping[str, Any] = _EMPTY
    seeds: Mapping[str, int] = _EMPTY

    def __post_init__(self) -> None:
        if self.logical_timestamp < 0:
            raise ValueError("logical_timestamp must be non-negative")
        object.__setattr__(self, "planner_config", canonical.freeze(self.planner_config))
        seeds = {k: _check_seed(v) for k, v in self.seeds.items()}
        object.__setattr__(self, "seeds", MappingProxyType(seeds))

    def to_dict(self) -> dict:
        return {
            "logical_timestamp": self.logical_timestamp,
            "environment_id": self.environment_id,
            "planner_config": canonical.thaw(self.planner_config),
            "seeds": dict(self.seeds),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Metadata:
        return cls(
            logical_timestamp=d["logical_timestamp"],
            environment_id=d["environment_id"],
            planner_config=d["planner_config"],
            seeds=d["seeds"],
        )


@dataclass(frozen=True)
class Action:
    """Immutable declarative description of one executable step."""

    id: str
    action_type: str
    inputs: Mapping[str, ArtifactRef] = _EMPTY
    parameters: Mapping[str, Any] = _EMPTY
    preconditions: tuple[Predicate, ...] = ()
    effects: tuple[EffectDecl, ...] = ()
    metadata: Metadata = field(default_factory=Metadata)

    def __post_init__(self) -> None:
        for name, ref in self.inputs.items():
            if not isinstance(ref, ArtifactRef):
                raise TypeError(f"input {name!r} is not an ArtifactRef")
        object.__setattr__(self, "inputs", MappingProxyType(dict(self.inputs)))
        object.__setattr__(self, "parameters", canonical.freeze(dict(self.parameters)))
        object.__setattr__(self, "preconditions", tuple(self.preconditions))
        object.__setattr__(self, "effects", tuple(self.effects))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "action_type": self.action_type,
            "inputs": {k: v.to_dict() for k, v in self.inputs.items()},
            "parameters": canonical.thaw(self.parameters),
            "preconditions": [p.to_dict() for p in self.preconditions],
            "effects": [e.to_dict() for e in self.effects],
            "metadata": self.metadata.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Action:
        return cls(
            id=d["id"],
            action_type=d["action_type"],
            inputs={k: ArtifactRef.from_dict(v) for k, v in d["inputs"].items()},
            parameters=d["parameters"],
            preconditions=tuple(predicate_from_dict(p) for p in d["preconditions"]),
            effects=tuple(effect_from_dict(e) for e in d["effects"]),
            metadata=Metadata.from_dict(d["metadata"]),
        )

    @property
    def produces(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.effects)


def canonical_bytes(action: Action) -> bytes:
    return canonical.to_bytes(action.to_dict())


def parse_action(data: bytes) -> Action:
    """Inverse of :func:`canonical_bytes`."""
    try:
        return Action.from_dict(canonical.loads(data))
    except ValueError as exc:
        raise ParseError(str(exc), line=1, offset=getattr(exc, "pos", 0) or 0) from exc
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed action record: {exc}", line=1) from exc


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.detail})" if self.detail else self.kind


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


def validate_action(action: Action, registry) -> ValidationReport:
    """Check an action against the adapter registry; every problem is reported."""
    found: list[Violation] = []
    adapter = registry.get(action.action_type)
    if adapter is None:
        found.append(Violation("UnknownActionType", action.action_type))
    else:
        for name in adapter.required_inputs:
            if name not in action.inputs:
                found.append(Violation("MissingInput", name))
        for name in adapter.required_parameters:
            if name not in action.parameters:
                found.append(Violation("MissingParameter", name))
        for name in adapter.required_seeds:
            if name not in action.metadata.seeds:
                found.append(Violation("MissingSeed", name))
    for name, ref in action.inputs.items():
        if ref.symbolic is not None and ref.parse_symbolic() is None:
            found.append(Violation("MalformedReference", f"{name}={ref.symbolic}"))
    seen: set[str] = set()
    for effect in action.effects:
        if effect.name in seen:
            found.append(Violation("DuplicateEffect", effect.name))
        seen.add(effect.name)
    return ValidationReport(tuple(found))
