from __future__ import annotations

import json
from pathlib import Path

import pytest

from fitagent import agentloop
from fitagent.agentloop import Policy, Task
from fitagent.assets import fixture_path
from fitagent.llm import ChatSettings, ScriptedBackend
from fitagent.tasks import build_registry, make_task

FIXTURES = fixture_path("hall_petch.jsonl").parent
SETTINGS = ChatSettings.for_model("gpt-5")

# Lines collected by test_acceptance.py and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def fixed_clock() -> str:
    return "2000-01-01T00:00:00.000+00:00"


def scripted_run(task: str, data_path: Path | str | None, responses: list[str], out_dir: Path,
                 policy: Policy = Policy(), **overrides):
    """Run the real agent against canned LLM replies; returns (state, backend)."""
    backend = ScriptedBackend(responses)
    cfg = make_task(task, str(data_path) if data_path else None, out_dir=str(out_dir), settings=SETTINGS,
                    retries=policy.retries, **overrides)
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, backend), backend,
                          SETTINGS, policy, clock=fixed_clock)
    return state, backend


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def act(thought: str, tool: str, inp: dict | None = None) -> str:
    return f"THOUGHT: {thought}\nACTION: " + json.dumps({"tool": tool, "input": inp or {}})


def codegen(expr: str, test_params: dict) -> str:
    return f"EXPRESSION: {expr}\nTEST_PARAMS: {json.dumps(test_params)}"


HP_RECALL = (
    "EQUATION: sigma = sigma0 + k / sqrt(d)\n"
    "PARAMETERS:\n"
    "- sigma0: friction stress (MPa)\n"
    "- k: strengthening coefficient (MPa um^0.5)\n"
    "UNITS: d in um, sigma in MPa"
)


def hp_script(filename: str) -> list[str]:
    return [
        act("Load the data.", "load_data", {"filename": filename}),
        act("Get the equation.", "generate_function"),
        HP_RECALL,
        codegen("sigma0 + k * d^(-0.5)", {"sigma0": 40, "k": 10}),
        act("Fit.", "fit_model", {"initial_params": {"sigma0": 40, "k": 10}}),
        act("Validate.", "validate_fit"),
        act("Finish.", "finalize"),
    ]
