"""The reasoning loop: prompt, parse THOUGHT/ACTION, dispatch, record."""

from __future__ import annotations

import datetime as _dt
import json
import re
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .assets import prompt_text
from .datastore import summarize
from .reporting import trace_to_jsonl
from .llm import ChatBackend, ChatSettings, LLMError, Message, make_request
from .state import ActionRequest, AgentState, HistoryEntry, ParseFailure
from .toolregistry import ToolRegistry, fmt_num

LLM_KEY = "__llm__"  # failure counter for backend errors


@dataclass(frozen=True)
class Policy:
    max_iterations: int = 20
    history_window: int = 10
    retries: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.history_window < 0:
            raise ValueError("history_window must be >= 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class Task:
    """What the prompt needs to know about the task."""

    system_prompt: str
    description: str


# --------------------------------------------------------------------------
# Prompt


def state_summary(state: AgentState) -> str:
    lines = []
    lines.append("data: " + (summarize(state.data) if state.data is not None else "not loaded"))
    fn = state.function
    if fn is None:
        lines.append("function: not loaded")
    else:
        lines.append(f"function: {fn.dsl_source} (parameters: {', '.join(fn.params)}; "
                     f"variable: {fn.variable}; source: {fn.card.source})")
    if state.model is None:
        lines.append("model: not loaded")
    else:
        ps = ", ".join(f"{k}={fmt_num(v)}" for k, v in state.model.params.items())
        lines.append(f"model: {ps}, resnorm={fmt_num(state.model.resnorm)}, fit space {state.model.fit_space}")
    v = state.validation
    if v is None:
        lines.append("validation: not loaded")
    else:
        text = f"validation: R²={fmt_num(v.r2)}, RMSE={fmt_num(v.rmse)}"
        if v.r2_log is not None:
            text += f", R²(log)={fmt_num(v.r2_log)}"
        lines.append(text)
    r = state.region
    if r is None:
        lines.append("region: not loaded")
    else:
        lines.append(f"region: [{fmt_num(r.x_min)}, {fmt_num(r.x_max)}], "
                     f"{r.points_selected}/{r.points_total} points ({r.method})")
    return "\n".join(lines)


def format_entry(e: HistoryEntry) -> str:
    if isinstance(e.action, ActionRequest):
        action = json.dumps(e.action.to_dict(), ensure_ascii=False)
    elif isinstance(e.action, ParseFailure):
        action = "(unparseable)"
    else:
        action = "(none)"
    return f"ITERATION {e.iteration}\nTHOUGHT: {e.thought}\nACTION: {action}\nOBSERVATION: {e.observation}"


def build_prompt(task: Task, registry: ToolRegistry, state: AgentState, history_window: int = 10) -> list[Message]:
    if len(registry) == 0:
        raise ValueError("registry is empty")
    recent = state.history[-history_window:] if history_window else []
    elided = len(state.history) - len(recent)
    hist = []
    if elided:
        hist.append(f"[{elided} earlier entries elided]")
    hist += [format_entry(e) for e in recent]
    user = "\n\n".join([
        f"TASK:\n{task.description}",
        f"AVAILABLE TOOLS:\n{registry.describe()}",
        f"CURRENT STATE:\n{state_summary(state)}",
        "RECENT HISTORY:\n" + ("\n\n".join(hist) if hist else "(none yet)"),
        prompt_text("response_format").rstrip("\n"),
    ])
    return [Message("system", task.system_prompt), Message("user", user)]


# --------------------------------------------------------------------------
# Parsing

_FENCE_LINE = re.compile(r"^[ \t]*```[A-Za-z0-9_-]*[ \t]*$", re.M)
_THOUGHT = re.compile(r"^[ \t]*THOUGHT:", re.M)
_ACTION = re.compile(r"^[ \t]*ACTION:", re.M)


def _balanced_object(text: str, start: int) -> str | None:
    """The ``{...}`` slice beginning at ``start``, honouring JSON strings."""
    depth = 0
    in_str = False
    esc = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def parse_response(text: str) -> tuple[str, ActionRequest] | ParseFailure:
    """Split a reply into its thought and tool call.

    Markers are case-sensitive and must start a line. Anything after the
    closing brace of the action object is ignored.
    """
    body = _FENCE_LINE.sub("", text)
    t = _THOUGHT.search(body)
    a = _ACTION.search(body)
    if t is None:
        return ParseFailure("missing THOUGHT: marker", text)
    if a is None or a.start() < t.end():
        return ParseFailure("missing ACTION: marker after THOUGHT:", text)
    thought = body[t.end():a.start()].strip()
    brace = body.find("{", a.end())
    if brace < 0:
        return ParseFailure("no JSON object after ACTION:", text)
    raw = _balanced_object(body, brace)
    if raw is None:
        return ParseFailure("unbalanced braces in ACTION object", text)
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        return ParseFailure(f"malformed ACTION object: {exc.msg} at char {exc.pos}", text)
    if not isinstance(obj, dict) or "tool" not in obj:
        return ParseFailure('ACTION object lacks "tool"', text)
    tool, inp = obj["tool"], obj.get("input", {})
    if inp is None:
        inp = {}
    if not isinstance(tool, str) or not tool:
        return ParseFailure('"tool" must be a nonempty string', text)
    if not isinstance(inp, dict):
        return ParseFailure('"input" must be a JSON object', text)
    return thought, ActionRequest(tool, inp)


# --------------------------------------------------------------------------
# Loop


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


class Agent:
    """Runs the loop for one task; owns the consecutive-failure counters."""

    def __init__(self, task: Task, registry: ToolRegistry, backend: ChatBackend,
                 settings: ChatSettings = ChatSettings(), policy: Policy = Policy(),
                 clock: Callable[[], str] = _now):
        self.task = task
        self.registry = registry
        self.backend = backend
        self.settings = settings
        self.policy = policy
        self.clock = clock
        self.failures: dict[str, int] = {}

    def _record(self, state: AgentState, thought: str, action, observation: str, outcome: str,
                criticality: str | None = None) -> HistoryEntry:
        entry = HistoryEntry(len(state.history) + 1, thought, action, observation, outcome,
                             self.clock(), criticality)
        state.history.append(entry)
        return entry

    def _count(self, state: AgentState, key: str, failed: bool) -> None:
        if not failed:
            self.failures[key] = 0
            return
        self.failures[key] = self.failures.get(key, 0) + 1
        if self.failures[key] > self.policy.retries:
            state.status = "halted_essential_failure"

    def step(self, state: AgentState) -> AgentState:
        if state.status != "running":
            raise RuntimeError(f"cannot step a run with status {state.status!r}")
        messages = build_prompt(self.task, self.registry, state, self.policy.history_window)
        try:
            reply = self.backend.complete(make_request(self.settings.model, messages, self.settings.temperature))
        except LLMError as exc:
            self._record(state, "", None, f"Error: LLM request failed: {exc}", "tool_error", "essential")
            self._count(state, LLM_KEY, True)
            return state
        self.failures[LLM_KEY] = 0

        parsed = parse_response(reply.content)
        if isinstance(parsed, ParseFailure):
            self._record(state, "", parsed, f"Parse error: {parsed.reason}", "parse_error")
            return state
        thought, action = parsed
        result = self.registry.dispatch(action.tool, action.input, state)
        self._record(state, thought, action, result.observation, result.outcome, result.criticality)
        if result.halt:
            state.status = result.halt
        elif result.criticality == "essential":
            self._count(state, action.tool, result.outcome != "ok")
        return state

    def run(self, state: AgentState | None = None) -> AgentState:
        state = state or AgentState()
        while state.status == "running":
            if len(state.history) >= self.policy.max_iterations:
                state.status = "halted_max_iter"
                break
            self.step(state)
        return state


def run(task: Task, registry: ToolRegistry, backend: ChatBackend, settings: ChatSettings = ChatSettings(),
        policy: Policy = Policy(), trace_path: str | Path | None = None,
        trace_config: dict[str, Any] | None = None, clock: Callable[[], str] = _now) -> AgentState:
    """Loop until finalize, a halt, or the iteration limit; then write the trace."""
    agent = Agent(task, registry, backend, settings, policy, clock)
    state = AgentState()
    try:
        agent.run(state)
    finally:
        if trace_path is not None:
            trace_to_jsonl(state, trace_path, trace_config)
    return state
