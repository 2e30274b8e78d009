"""Tool specifications, strict input validation and dispatch."""

from __future__ import annotations

import json
import math
import re
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Any

from .state import AgentState, Halt

TYPES = ("string", "number", "integer", "boolean", "object", "array")
CRITICALITY = ("essential", "auxiliary")
ESSENTIAL_TOOLS = ("generate_function", "load_data", "fit_model", "generate_strain_function")


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    type: str  # one of TYPES, or alternatives joined by "|"
    required: bool = False
    description: str = ""

    def __post_init__(self):
        for t in self.type.split("|"):
            if t not in TYPES:
                raise ValueError(f"unknown field type {t!r}")

    def accepts(self, value) -> bool:
        return any(_is_type(value, t) for t in self.type.split("|"))


def _is_type(v, t: str) -> bool:
    if t == "string":
        return isinstance(v, str)
    if t == "boolean":
        return isinstance(v, bool)
    if t == "integer":
        return isinstance(v, int) and not isinstance(v, bool)
    if t == "number":
        return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    if t == "object":
        return isinstance(v, dict)
    return isinstance(v, list)


Executor = Callable[[dict[str, Any], AgentState], str]


@dataclass(frozen=True)
class ToolSpec:
    """A tool the agent may call.

    ``pattern_fields`` admits families of optional fields such as
    ``initial_<name>`` whose names are only known once a function exists.
    """

    name: str
    description: str
    input_schema: Mapping[str, Field]
    criticality: str
    executor: Executor
    pattern_fields: Mapping[str, Field] = field(default_factory=dict)

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.name):
            raise ValueError(f"bad tool name {self.name!r}")
        if self.criticality not in CRITICALITY:
            raise ValueError(f"criticality must be one of {CRITICALITY}")
        object.__setattr__(self, "input_schema", dict(self.input_schema))
        object.__setattr__(self, "pattern_fields", dict(self.pattern_fields))

    def schema_json(self) -> str:
        """Compact schema text for prompts, e.g. ``{"filename": "string (required)"}``."""
        d = {k: f.type + (" (required)" if f.required else "") for k, f in self.input_schema.items()}
        d.update({f"<{pat}>": f.type for pat, f in self.pattern_fields.items()})
        return json.dumps(d, ensure_ascii=False)


@dataclass(frozen=True)
class DispatchResult:
    observation: str
    outcome: str  # ok | tool_error
    criticality: str | None
    halt: str | None = None  # a halting status requested by the tool


class ToolRegistry:
    def __init__(self, specs=()):
        self._tools: dict[str, ToolSpec] = {}
        for s in specs:
            self.register(s)

    def register(self, spec: ToolSpec) -> None:
        if spec.name in self._tools:
            raise RegistryError(f"duplicate tool {spec.name!r}")
        self._tools[spec.name] = spec

    def __contains__(self, name) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def __iter__(self):
        return iter(self._tools.values())

    def names(self) -> list[str]:
        return list(self._tools)

    def get(self, name: str) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            raise RegistryError(f"unknown tool {name!r}") from None

    def describe(self) -> str:
        return "\n".join(f"- {s.name}: {s.description} Input schema: {s.schema_json()}" for s in self)

    def dispatch(self, name: str, inp: dict[str, Any], state: AgentState) -> DispatchResult:
        if name not in self._tools:
            return DispatchResult(f"Error: unknown tool {name!r}", "tool_error", None)
        spec = self._tools[name]
        label = "Error" if spec.criticality == "essential" else "Warning"
        problems = validate_input(spec, inp)
        if problems:
            return DispatchResult(f"{label}: invalid input for {name}: {'; '.join(problems)}", "tool_error",
                                  spec.criticality)
        try:
            obs = spec.executor(dict(inp), state)
        except Halt as exc:
            return DispatchResult(f"Error: {exc}", "tool_error", spec.criticality, exc.status)
        except Exception as exc:  # tool failures become observations
            return DispatchResult(f"{label}: {name} failed: {exc}", "tool_error", spec.criticality)
        return DispatchResult(obs, "ok", spec.criticality)


def validate_input(spec: ToolSpec, inp) -> list[str]:
    """Violations of ``spec``'s schema: missing, mistyped or unknown fields."""
    if not isinstance(inp, dict):
        return ["input must be a JSON object"]
    out = []
    for k, f in spec.input_schema.items():
        if f.required and k not in inp:
            out.append(f"missing required field {k!r}")
    for k, v in inp.items():
        f = spec.input_schema.get(k)
        if f is None:
            f = next((pf for pat, pf in spec.pattern_fields.items() if re.fullmatch(pat, k)), None)
        if f is None:
            out.append(f"unknown field {k!r}")
        elif not f.accepts(v):
            out.append(f"field {k!r} must be {f.type.replace('|', ' or ')}, got {type(v).__name__}")
    return out


def fmt_num(v: float) -> str:
    """Four significant digits; scientific notation for magnitudes below 1e-3."""
    if v is None:
        return "n/a"
    v = float(v)
    if not math.isfinite(v):
        return str(v)
    if v != 0 and abs(v) < 1e-3:
        return f"{v:.3e}"
    return f"{v:#.4g}"
