"""Author the replay transcripts shipped in src/fitagent/fixtures.

Each transcript is produced by running the real agent against a scripted
backend and recording every request/response pair. Re-run after any change
to prompts, tool descriptions or observation formats:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fitagent import agentloop, synth
from fitagent.agentloop import Policy, Task
from fitagent.llm import ChatSettings, RecordingBackend, ScriptedBackend
from fitagent.tasks import build_registry, make_task

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "fitagent" / "fixtures"
SETTINGS = ChatSettings.for_model("gpt-5")


def act(thought: str, tool: str, inp: dict | None = None) -> str:
    return f"THOUGHT: {thought}\nACTION: " + json.dumps({"tool": tool, "input": inp or {}})


def codegen(expr: str, test_params: dict) -> str:
    return f"EXPRESSION: {expr}\nTEST_PARAMS: {json.dumps(test_params)}"


HP_RECALL = (
    "EQUATION: sigma = sigma0 + k / sqrt(d)\n"
    "PARAMETERS:\n"
    "- sigma0: friction stress (MPa)\n"
    "- k: strengthening coefficient (MPa um^0.5)\n"
    "UNITS: d in um, sigma and sigma0 in MPa"
)
PARIS_RECALL = (
    "EQUATION: da/dN = C * (dK)^m\n"
    "PARAMETERS:\n"
    "- C: Paris coefficient (m/cycle per (MPa sqrt(m))^m)\n"
    "- m: Paris exponent (dimensionless)\n"
    "UNITS: da/dN in m/cycle, dK in MPa sqrt(m)"
)
KUHN_RECALL = (
    "EQUATION: Delta E = h^2 (N + 1) / (8 m L^2) + V0 (1 - 1/N)\n"
    "PARAMETERS:\n"
    "- V0: amplitude of the periodic potential, the long-chain gap limit (hartree)\n"
    "UNITS: h and m in atomic units, L in bohr, Delta E in hartree"
)
KUHN_EXTRACT = (
    "LATEX: \\Delta E=\\frac{h^{2}}{8mL^{2}}(N+1)+V_{0}\\left(1-\\frac{1}{N}\\right)\n"
    "CHECKLIST:\n" + "\n".join(f"{i}. yes" for i in range(1, 12))
)
STRAIN_MODIFY = (
    "EQUATION: E(eps) = Eh * (h^2 (s + 1) / (8 m (l0 (1 + delta))^2) + v0 (1 + gamma) (1 - 1/s)), "
    "delta = eps for eps <= 0 and eps^2 otherwise, gamma = 2.5 eps (1 - eps/0.25)\n"
    "PARAMETERS:\n"
    "- v0: potential amplitude of the unstrained chain (hartree)\n"
    "UNITS: eps dimensionless, l0 in bohr, E in eV"
)
STRAIN_EXPR = (
    "Eh * ((h^2/(8*m)) * (s + 1) / (l0 * (1 + piecewise(eps <= 0 : eps ; eps^2)))^2"
    " + v0 * (1 + 2.5 * eps * (1 - eps/0.25)) * (1 - 1/s))"
)


def tail(fit_input: dict | None = None) -> list[str]:
    return [
        act("The function passed its test. Fit it to the data.", "fit_model", fit_input),
        act("Check the quality of the fit.", "validate_fit"),
        act("The fit looks good. Make the diagnostic figures.", "create_plots"),
        act("Save the fitted parameters.", "export_results", {"format": "json"}),
        act("Everything is done; report the result.", "finalize"),
    ]


CASES = {
    "hall_petch": dict(
        task="hall-petch", data="hp_clean.csv", table=lambda: synth.hall_petch_table(),
        script=[
            act("Start by loading the grain size data.", "load_data", {"filename": "hp_clean.csv"}),
            act("Data loaded. Get the Hall-Petch equation from the LLM.", "generate_function"),
            HP_RECALL,
            codegen("sigma0 + k * d^(-0.5)", {"sigma0": 40, "k": 10}),
            *tail({"initial_params": {"sigma0": 40, "k": 10}}),
        ],
    ),
    "paris": dict(
        task="paris", data="paris.csv", table=lambda: synth.paris_table(),
        script=[
            act("Load the crack growth data.", "load_data", {"filename": "paris.csv"}),
            act("Obtain the Paris law from the LLM.", "generate_function"),
            PARIS_RECALL,
            codegen("C * dK^m", {"C": 1e-11, "m": 3}),
            act("The curve spans several regimes. Isolate Region II first.", "auto_select_region"),
            act("Estimate starting values from a log-log line.", "calc_initial"),
            *tail(),
        ],
    ),
    "kuhn_recall": dict(
        task="kuhn-recall", data="kuhn.csv", table=lambda: synth.kuhn_table(),
        script=[
            act("Load the helicene gap data.", "load_data", {"filename": "kuhn.csv"}),
            act("Recall Kuhn's equation.", "generate_function"),
            KUHN_RECALL,
            codegen("h^2 * (N + 1) / (8 * m * L^2) + V0 * (1 - 1/N)", {"V0": 0.05}),
            *tail(),
        ],
    ),
    "kuhn_extract": dict(
        task="kuhn-extract", data="kuhn.csv", table=lambda: synth.kuhn_table(),
        script=[
            act("Load the helicene gap data.", "load_data", {"filename": "kuhn.csv"}),
            act("Try to read the source article PDF.", "extract_text", {"path": "source.pdf"}),
            act("Only one character came back, so the PDF route is useless. Use the HTML version.",
                "extract_equation_html", {"paper_id": "2101.00001", "test_params": {"V0": 0.05}}),
            KUHN_EXTRACT,
            *tail(),
        ],
    ),
    "strain_kuhn": dict(
        task="strain-kuhn", data="strain.csv", table=lambda: synth.strain_table(),
        script=[
            act("Load the strain and gap data.", "load_data", {"filename": "strain.csv"}),
            act("Ask for a strain-dependent version of the base equation.", "generate_strain_function"),
            STRAIN_MODIFY,
            codegen(STRAIN_EXPR, {"v0": 0.05}),
            act("Fit v0 to the data.", "fit_model"),
            act("Check the fit.", "validate_fit"),
            act("Tabulate the fitted response over the strain grid.", "calculate_response"),
            act("Plot the results.", "plot_results"),
            act("Save the results.", "export_results", {"format": "json"}),
            act("Done.", "finalize"),
        ],
    ),
}


def build(name: str, spec: dict, out_root: Path) -> None:
    data = spec["table"]().write_csv(FIXTURES / spec["data"])
    scripted = ScriptedBackend(spec["script"])
    scripted.metadata = {"backend": "scripted", "fixture": name, "model": SETTINGS.model}
    rec = RecordingBackend(scripted, FIXTURES / f"{name}.jsonl")
    overrides = {"out_dir": str(out_root / name), "settings": SETTINGS}
    if spec["task"] == "kuhn-extract":
        overrides["html_base"] = FIXTURES.as_uri()
    cfg = make_task(spec["task"], str(data), **overrides)
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, rec), rec,
                          SETTINGS, Policy())
    unused = len(scripted.responses) - len(scripted.requests)
    if state.status != "done" or unused:
        for e in state.history:
            print(e.iteration, e.outcome, e.observation)
        raise SystemExit(f"{name}: status {state.status}, {unused} unused responses")
    print(f"{name}: {rec.count} exchanges, {len(state.history)} iterations, {state.summary.splitlines()[1]}")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        for name, spec in CASES.items():
            build(name, spec, Path(tmp))


if __name__ == "__main__":
    main()
