"""Catalog of reconfigurable stack parameters.

The registry is the single source of truth for which (module, node, param)
paths exist, what value type each parameter carries, and which values are
legal. It is loaded from a JSON data file so deployments can extend the
catalog without code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterator, Union

ConfigValue = Union[bool, float, str]

ParamPath = tuple[str, str, str]

VALUE_TYPES = ("boolean", "number", "enum")


class RegistryError(Exception):
    """Malformed registry document or violated registry invariant."""


@dataclass(frozen=True)
class ParamDescriptor:
    """Declared shape of one parameter: type, legal values, default."""

    value_type: str
    default: ConfigValue
    unit: str | None = None
    minimum: float | None = None
    maximum: float | None = None
    tokens: tuple[str, ...] = ()

    def check(self, value: ConfigValue) -> str | None:
        """Return None when `value` is legal for this descriptor, else a message."""
        if self.value_type == "boolean":
            if type(value) is not bool:
                return f"expected boolean, got {type(value).__name__}"
            return None
        if self.value_type == "number":
            if type(value) is bool or not isinstance(value, (int, float)):
                return f"expected number, got {type(value).__name__}"
            v = float(value)
            if self.minimum is not None and v < self.minimum:
                return f"value {v} below minimum {self.minimum}"
            if self.maximum is not None and v > self.maximum:
                return f"value {v} above maximum {self.maximum}"
            return None
        if self.value_type == "enum":
            if not isinstance(value, str):
                return f"expected enum token, got {type(value).__name__}"
            if value not in self.tokens:
                return f"token {value!r} not in {sorted(self.tokens)}"
            return None
        return f"unknown value type {self.value_type!r}"

    def violation_code(self, value: ConfigValue) -> str | None:
        """Classify an illegal value as TypeMismatch or OutOfRange (None when legal)."""
        if self.check(value) is None:
            return None
        if self.value_type == "number" and type(value) is not bool and isinstance(value, (int, float)):
            return "OutOfRange"
        if self.value_type == "enum" and isinstance(value, str):
            # A string of the right kind but outside the token set is a range error.
            return "OutOfRange"
        return "TypeMismatch"


@dataclass
class ParamRegistry:
    """Hierarchical module -> node -> param catalog."""

    _tree: dict[str, dict[str, dict[str, ParamDescriptor]]] = field(default_factory=dict)

    def add(self, module: str, node: str, param: str, descriptor: ParamDescriptor) -> None:
        nodes = self._tree.setdefault(module, {})
        params = nodes.setdefault(node, {})
        if param in params:
            raise RegistryError(f"duplicate parameter path {module}/{node}/{param}")
        bad = descriptor.check(descriptor.default)
        if bad is not None:
            raise RegistryError(f"default for {module}/{node}/{param} violates its own constraint: {bad}")
        params[param] = descriptor

    def has_module(self, module: str) -> bool:
        return module in self._tree

    def has_node(self, module: str, node: str) -> bool:
        return node in self._tree.get(module, {})

    def lookup(self, module: str, node: str, param: str) -> ParamDescriptor | None:
        return self._tree.get(module, {}).get(node, {}).get(param)

    def paths(self) -> Iterator[tuple[ParamPath, ParamDescriptor]]:
        for module, nodes in self._tree.items():
            for node, params in nodes.items():
                for param, desc in params.items():
                    yield (module, node, param), desc

    def defaults(self) -> dict[ParamPath, ConfigValue]:
        return {path: desc.default for path, desc in self.paths()}

    def __len__(self) -> int:
        return sum(1 for _ in self.paths())

    @classmethod
    def from_dict(cls, doc: dict) -> "ParamRegistry":
        registry = cls()
        modules = doc.get("modules")
        if not isinstance(modules, dict):
            raise RegistryError("registry document must carry a 'modules' mapping")
        for module, mod_doc in modules.items():
            nodes = mod_doc.get("nodes", {})
            for node, node_doc in nodes.items():
                for param, raw in node_doc.get("params", {}).items():
                    registry.add(module, node, param, _descriptor_from_dict(module, node, param, raw))
        return registry


def _descriptor_from_dict(module: str, node: str, param: str, raw: dict) -> ParamDescriptor:
    where = f"{module}/{node}/{param}"
    value_type = raw.get("type")
    if value_type not in VALUE_TYPES:
        raise RegistryError(f"{where}: unknown value type {value_type!r}")
    if "default" not in raw:
        raise RegistryError(f"{where}: missing default value")
    default = raw["default"]
    if value_type == "number" and type(default) is not bool and isinstance(default, (int, float)):
        default = float(default)
    return ParamDescriptor(
        value_type=value_type,
        default=default,
        unit=raw.get("unit"),
        minimum=float(raw["min"]) if raw.get("min") is not None else None,
        maximum=float(raw["max"]) if raw.get("max") is not None else None,
        tokens=tuple(raw.get("tokens", ())),
    )


def load_registry(path: str | Path) -> ParamRegistry:
    """Load a registry JSON file; raises RegistryError on malformed content."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RegistryError(f"registry file is not valid JSON: {exc}") from exc
    return ParamRegistry.from_dict(doc)


@lru_cache(maxsize=1)
def shipped_registry() -> ParamRegistry:
    """The registry bundled with the package (cached; treat as immutable)."""
    text = resources.files("flexlane.data").joinpath("registry.json").read_text(encoding="utf-8")
    return ParamRegistry.from_dict(json.loads(text))
