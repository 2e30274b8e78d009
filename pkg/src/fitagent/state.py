"""Agent working memory and the history record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .datastore import Dataset
from .fitcore import FitResult, ValidationMetrics
from .regionsel import RegionSelection

STATUSES = ("running", "done", "halted_no_equation", "halted_max_iter", "halted_essential_failure")
OUTCOMES = ("ok", "tool_error", "parse_error")


class Halt(Exception):
    """Raised by a tool executor to stop the run with a given status."""

    def __init__(self, status: str, message: str):
        if status not in STATUSES or status in ("running", "done"):
            raise ValueError(f"not a halting status: {status!r}")
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class ActionRequest:
    tool: str
    input: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.tool, str) or not self.tool:
            raise ValueError("tool name must be a nonempty string")
        if not isinstance(self.input, dict):
            raise ValueError("tool input must be an object")

    def to_dict(self) -> dict[str, Any]:
        return {"tool": self.tool, "input": self.input}


@dataclass(frozen=True)
class ParseFailure:
    reason: str
    text: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"parse_failure": self.reason}


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    thought: str
    action: ActionRequest | ParseFailure | None
    observation: str
    outcome: str
    timestamp: str = ""
    criticality: str | None = None  # of the tool that ran, if any

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == "parse_error" and isinstance(self.action, ActionRequest):
            raise ValueError("parse_error entries carry no tool call")

    @property
    def tool(self) -> str | None:
        return self.action.tool if isinstance(self.action, ActionRequest) else None

    @property
    def is_warning(self) -> bool:
        return self.outcome == "tool_error" and self.criticality == "auxiliary"

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "thought": self.thought,
            "action": self.action.to_dict() if self.action is not None else None,
            "observation": self.observation,
            "outcome": self.outcome,
            "criticality": self.criticality,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "HistoryEntry":
        a = d.get("action")
        if a is None:
            action = None
        elif "parse_failure" in a:
            action = ParseFailure(a["parse_failure"])
        else:
            action = ActionRequest(a["tool"], a.get("input", {}))
        return cls(d["iteration"], d["thought"], action, d["observation"], d["outcome"],
                   d.get("timestamp", ""), d.get("criticality"))


@dataclass
class AgentState:
    data: Dataset | None = None
    function: Any = None  # eqgen.GeneratedFunction
    model: FitResult | None = None
    validation: ValidationMetrics | None = None
    region: RegionSelection | None = None
    history: list[HistoryEntry] = field(default_factory=list)
    status: str = "running"
    # case-specific scratch space
    initial: dict[str, float] = field(default_factory=dict)
    extraction: Any = None  # arxivextract.ExtractedEquation
    pdf_text: str | None = None
    plots: list[str] = field(default_factory=list)
    exports: list[str] = field(default_factory=list)
    summary: str = ""

    def fit_data(self) -> Dataset:
        if self.data is None:
            raise RuntimeError("no data loaded")
        return self.region.apply(self.data) if self.region is not None else self.data

    def clear_fit(self) -> None:
        self.model = None
        self.validation = None
