import json

import pytest

from fitagent import cli, synth
from fitagent.llm import RecordingBackend, ScriptedBackend


def run(*args):
    return cli.main(list(args))


def test_synth_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--case", "hall-petch", "--noise", "7", "--seed", "5", "--out", str(tmp_path / f"{name}.csv")) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    run("synth", "--case", "hall-petch", "--noise", "7", "--seed", "6", "--out", str(tmp_path / "c.csv"))
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


@pytest.mark.parametrize("case,header", [
    ("hall-petch", "d_um,sigma_MPa"), ("paris", "dK_MPa_sqrt_m,dadN_m_per_cycle"),
    ("kuhn", "n_rings,L_bohr,gap_hartree"), ("strain", "epsilon,gap_eV"),
])
def test_synth_cases(tmp_path, case, header):
    out = tmp_path / "d.csv"
    assert run("synth", "--case", case, "--out", str(out)) == 0
    assert out.read_text().splitlines()[0] == header


def test_replay_run_writes_outputs(tmp_path, fixtures_dir, capsys):
    data = synth.hall_petch_table().write_csv(tmp_path / "hp_clean.csv")
    code = run("run", "--task", "hall-petch", "--data", str(data), "--backend", "replay",
               "--transcript", str(fixtures_dir / "hall_petch.jsonl"), "--out", str(tmp_path / "runs"))
    assert code == 0
    out = capsys.readouterr().out
    assert "ITERATION 1" in out and "=== FINAL RESULTS ===" in out and "Equation source: LLM knowledge" in out
    res = json.loads((tmp_path / "runs" / "results.json").read_text())
    assert res["parameters"]["k"] == pytest.approx(9.4836)
    header = json.loads((tmp_path / "runs" / "trace.jsonl").read_text().splitlines()[0])["header"]
    assert header["config"]["data_file"] == "hp_clean.csv" and header["status"] == "done"


def test_live_without_key_exits_1(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("FITAGENT_API_KEY", raising=False)
    data = synth.hall_petch_table().write_csv(tmp_path / "hp.csv")
    assert run("run", "--task", "hall-petch", "--data", str(data), "--backend", "live", "--out", str(tmp_path)) == 1
    assert "missing credential" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["run", "--task", "nope"],
    ["run", "--task", "paris", "--region-bounds", "5:1"],
    ["run", "--task", "hall-petch", "--data", "/does/not/exist.csv", "--backend", "replay", "--transcript", "x"],
    ["run", "--task", "hall-petch", "--backend", "replay"],
    ["run", "--task", "hall-petch", "--max-iterations", "0", "--backend", "replay", "--transcript", "x"],
    ["synth", "--case", "zzz", "--out", "x.csv"],
])
def test_flag_errors_exit_1(args):
    assert run(*args) == 1


def record(tmp_path, script, data):
    from fitagent import agentloop
    from fitagent.agentloop import Policy, Task
    from fitagent.tasks import build_registry, make_task

    path = tmp_path / "t.jsonl"
    rec = RecordingBackend(ScriptedBackend(script), path)
    cfg = make_task("hall-petch", str(data), out_dir=str(tmp_path / "rec"))
    agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, rec), rec, cfg.settings, Policy())
    return path


def act(tool, inp=None):
    return "THOUGHT: x\nACTION: " + json.dumps({"tool": tool, "input": inp or {}})


def test_exit_codes_follow_status(tmp_path):
    data = synth.hall_petch_table().write_csv(tmp_path / "hp.csv")
    base = ["run", "--task", "hall-petch", "--data", str(data), "--backend", "replay", "--out", str(tmp_path / "o")]

    t = record(tmp_path, [act("load_data", {"filename": "missing.csv"})] * 3, data)
    assert run(*base, "--transcript", str(t)) == 3

    t = record(tmp_path, [act("validate_fit")] * 20, data)
    assert run(*base, "--transcript", str(t), "--max-iterations", "4") == 4

    t = record(tmp_path, [act("finalize")], data)
    assert run(*base, "--transcript", str(t)) == 0


def test_record_mode_over_replay(tmp_path, fixtures_dir):
    data = synth.hall_petch_table().write_csv(tmp_path / "hp_clean.csv")
    copy = tmp_path / "copy.jsonl"
    code = run("run", "--task", "hall-petch", "--data", str(data), "--backend", "record", "--transcript", str(copy),
               "--record-from", str(fixtures_dir / "hall_petch.jsonl"), "--out", str(tmp_path / "o"))
    assert code == 0
    assert copy.read_bytes() == (fixtures_dir / "hall_petch.jsonl").read_bytes()


def test_region_bounds_flag(tmp_path, fixtures_dir):
    data = synth.paris_table().write_csv(tmp_path / "paris.csv")
    code = run("run", "--task", "paris", "--data", str(data), "--backend", "replay", "--lenient",
               "--transcript", str(fixtures_dir / "paris.jsonl"), "--region-bounds", "3.8:36.8",
               "--out", str(tmp_path / "o"))
    assert code == 0
    res = json.loads((tmp_path / "o" / "results.json").read_text())
    assert res["region"]["method"] == "manual" and res["region"]["points_selected"] == 25
