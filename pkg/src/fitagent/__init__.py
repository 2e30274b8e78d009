"""Autonomous equation-fitting agent: an LLM proposes a law, the tools fit and check it."""

from .agentloop import Agent, Policy, Task, build_prompt, parse_response, run
from .exprdsl import evaluate, evaluate_array, parse, print_canonical
from .fitcore import ParamModel, fit_lm, validate
from .state import AgentState, HistoryEntry
from .tasks import TASKS, TaskConfig, build_registry, make_task
from .toolregistry import ToolRegistry, ToolSpec

__version__ = "0.1.0"

__all__ = [
    "Agent", "AgentState", "HistoryEntry", "ParamModel", "Policy", "TASKS", "Task", "TaskConfig",
    "ToolRegistry", "ToolSpec", "build_prompt", "build_registry", "evaluate", "evaluate_array",
    "fit_lm", "make_task", "parse", "parse_response", "print_canonical", "run", "validate",
]
