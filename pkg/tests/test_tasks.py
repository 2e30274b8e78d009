import json

import pytest
from conftest import SETTINGS, act, codegen, scripted_run

from fitagent import synth
from fitagent.llm import ReplayBackend
from fitagent.tasks import CORE_TOOLS, TASKS, build_registry, make_task
from fitagent.assets import prompt_text

HALL_PETCH_PROMPT = (
    "You are an agent helping fit grain size and yield strength data using the Hall-Petch equation. "
    "At each step: 1) Think about what to do next, 2) Choose an action, 3) Observe results. "
    "Be concise and specific."
)


def test_hall_petch_system_prompt_is_exact():
    assert make_task("hall-petch").system_prompt == HALL_PETCH_PROMPT
    assert prompt_text("system_hall_petch") == HALL_PETCH_PROMPT


@pytest.mark.parametrize("name", TASKS)
def test_every_task_builds_a_registry(name):
    cfg = make_task(name, "data.csv")
    reg = build_registry(cfg, ReplayBackend.__new__(ReplayBackend))
    assert set(CORE_TOOLS) <= set(reg.names())
    assert cfg.header()["data_file"] == "data.csv"
    for spec in reg:
        expected = "essential" if spec.name in ("load_data", "generate_function", "fit_model",
                                                "generate_strain_function") else "auxiliary"
        assert spec.criticality == expected


def test_unknown_task():
    with pytest.raises(ValueError, match="unknown task"):
        make_task("bogus")


def test_header_has_no_directories():
    cfg = make_task("paris", "/some/where/private/fcg.csv", region_bounds=(3.8, 36.8))
    text = json.dumps(cfg.header())
    assert "/some/where" not in text and cfg.header()["region_bounds"] == [3.8, 36.8]


@pytest.mark.parametrize("fixture,task,table", [
    ("hall_petch", "hall-petch", "hp_clean.csv"),
    ("paris", "paris", "paris.csv"),
    ("kuhn_recall", "kuhn-recall", "kuhn.csv"),
    ("kuhn_extract", "kuhn-extract", "kuhn.csv"),
    ("strain_kuhn", "strain-kuhn", "strain.csv"),
])
def test_fixtures_replay_strictly(fixtures_dir, tmp_path, fixture, task, table):
    from fitagent import agentloop
    from fitagent.agentloop import Policy, Task

    backend = ReplayBackend.from_file(fixtures_dir / f"{fixture}.jsonl")
    cfg = make_task(task, str(fixtures_dir / table), out_dir=str(tmp_path), settings=SETTINGS,
                    html_base=fixtures_dir.as_uri())
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, backend), backend,
                          SETTINGS, Policy())
    assert state.status == "done"
    assert backend.position == len(backend.transcript)
    assert (tmp_path / "results.json").exists()


def test_kuhn_task_binds_covariates(tmp_path):
    data = synth.kuhn_table().write_csv(tmp_path / "k.csv")
    script = [
        act("load", "load_data", {"filename": "k.csv"}),
        act("gen", "generate_function"),
        "EQUATION: E = h^2 (N+1)/(8 m L^2) + V0\nPARAMETERS:\n- V0: offset\nUNITS: hartree",
        codegen("h^2*(N + 1)/(8*m*L^2) + V0", {"V0": 0.05}),
        act("fit", "fit_model", {"initial_V0": 0.05}),
        act("val", "validate_fit"),
        act("end", "finalize"),
    ]
    state, backend = scripted_run("kuhn-recall", data, script, tmp_path / "out")
    assert state.status == "done"
    assert state.model.params["V0"] == pytest.approx(0.058099, abs=1e-6)
    assert state.validation.r2 == pytest.approx(0.9923, abs=1e-4)
    codegen_prompt = backend.requests[3].messages[1].content
    assert "not fit parameters: N, L, pi, h, m" in codegen_prompt


def test_fit_model_initial_value_precedence(tmp_path):
    data = synth.paris_table().write_csv(tmp_path / "p.csv")
    script = [
        act("load", "load_data", {"filename": "p.csv"}),
        act("gen", "generate_function"),
        "EQUATION: da/dN = C dK^m\nPARAMETERS:\n- C: coefficient\n- m: exponent\nUNITS: SI",
        codegen("C * dK^m", {"C": 1e-11, "m": 3}),
        act("region", "auto_select_region"),
        act("guess", "calc_initial"),
        act("fit", "fit_model", {"initial_m": 3.0}),
        act("end", "finalize"),
    ]
    state, _ = scripted_run("paris", data, script, tmp_path / "out")
    assert state.status == "done"
    assert "Initial estimates: C = 8.710e-12, m = 3.258" in state.history[3].observation
    assert state.model.params["m"] == pytest.approx(synth.PARIS_TRUE.m, rel=1e-9)


def test_strain_response_tool(tmp_path):
    data = synth.strain_table().write_csv(tmp_path / "s.csv")
    expr = ("Eh*((pi^2/2)*(s + 1)/(l0*(1 + piecewise(eps <= 0 : eps ; eps^2)))^2"
            " + v0*(1 + 2.5*eps*(1 - eps/0.25))*(1 - 1/s))")
    script = [
        act("load", "load_data", {"filename": "s.csv"}),
        act("gen", "generate_strain_function"),
        "EQUATION: E = Eh*(base with delta and gamma)\nPARAMETERS:\n- v0: potential\nUNITS: eV",
        codegen(expr, {"v0": 0.05}),
        act("fit", "fit_model"),
        act("resp", "calculate_response", {"strains": [0.0, 0.25]}),
        act("end", "finalize"),
    ]
    state, _ = scripted_run("strain-kuhn", data, script, tmp_path / "out")
    assert state.status == "done"
    assert state.model.params["v0"] == pytest.approx(synth.KUHN_V0, rel=1e-9)
    assert state.history[3].observation.startswith("Response with fitted parameters (eps: value): 0.000: 3.561")


def test_load_data_failure_is_essential(tmp_path):
    script = [act("load", "load_data", {"filename": "missing.csv"})] * 3
    state, _ = scripted_run("hall-petch", None, script, tmp_path, )
    assert state.status == "halted_essential_failure"
    assert "missing file" in state.history[0].observation


def test_export_stays_in_output_dir(tmp_path):
    data = synth.hall_petch_table().write_csv(tmp_path / "hp.csv")
    from conftest import hp_script

    script = hp_script("hp.csv")[:-1] + [act("x", "export_results", {"format": "csv", "filename": "../../evil.csv"}),
                                         act("end", "finalize")]
    state, _ = scripted_run("hall-petch", data, script, tmp_path / "out")
    assert (tmp_path / "out" / "evil.csv").exists() and not (tmp_path.parent / "evil.csv").exists()
