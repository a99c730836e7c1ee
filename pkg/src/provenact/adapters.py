"""Adapter contract: the only channel through which an action has effects."""

from __future__ import annotations

from collections.abc import Mapping

from .errors import DuplicateAdapter


class AdapterFailure(Exception):
    """Raised by an adapter to report a failed execution.

    ``partial_outputs`` maps output names to payload bytes produced before
    the failure; the engine stores and records them.
    """

    def __init__(self, message: str, partial_outputs: Mapping[str, bytes] | None = None) -> None:
        super().__init__(message)
        self.partial_outputs = dict(partial_outputs or {})

    @property
    def failure_type(self) -> str:
        return type(self).__name__


class Adapter:
    """Base class for adapters.

    Subclasses set the declaration attributes and implement :meth:`run`.
    Randomness may only come from ``seeds`` (copied from the action
    metadata); an adapter that draws on anything else must set
    ``deterministic = False``.
    """

    name: str = ""
    version: str = "0"
    required_inputs: tuple[str, ...] = ()
    optional_inputs: tuple[str, ...] = ()
    required_parameters: tuple[str, ...] = ()
    required_seeds: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    deterministic: bool = True

    def __init__(self) -> None:
        self.calls = 0

    def __call__(self, inputs: Mapping[str, bytes], parameters: Mapping, seeds: Mapping[str, int]) -> dict[str, bytes]:
        self.calls += 1
        return self.run(inputs, parameters, seeds)

    def run(self, inputs: Mapping[str, bytes], parameters: Mapping, seeds: Mapping[str, int]) -> dict[str, bytes]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}@{self.version}>"


class AdapterRegistry:
    """Name -> adapter mapping consulted by validation and dispatch."""

    def __init__(self) -> None:
        self._adapters: dict[str, Adapter] = {}

    def get(self, name: str) -> Adapter | None:
        return self._adapters.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._adapters

    def __iter__(self):
        return iter(sorted(self._adapters))

    def __len__(self) -> int:
        return len(self._adapters)

    def items(self):
        return sorted(self._adapters.items())

    def total_calls(self) -> int:
        return sum(a.calls for a in self._adapters.values())


def register_adapter(registry: AdapterRegistry, name: str, adapter: Adapter) -> AdapterRegistry:
    if name in registry._adapters:
        raise DuplicateAdapter(name)
    registry._adapters[name] = adapter
    return registry
