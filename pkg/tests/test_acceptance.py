"""One test per acceptance criterion; each prints a PASS/FAIL line."""

from __future__ import annotations

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, FIXTURES, HP_RECALL, SETTINGS, act, codegen, hp_script, scripted_run

from fitagent import agentloop, cli, synth
from fitagent.agentloop import Policy, Task
from fitagent.arxivextract import latex_to_dsl
from fitagent.datastore import Dataset, load_csv
from fitagent.exprdsl import evaluate_array, parse
from fitagent.fitcore import ParamModel, fit_lm, jacobian_fd, loglog_linearize, validate
from fitagent.llm import RecordingBackend, ReplayBackend, ScriptedBackend
from fitagent.physmodels import (
    KUHN_DSL,
    PARIS_DSL,
    STRAIN_KUHN_DSL,
    HallPetchParams,
    KuhnParams,
    ParisParams,
    StrainKuhnParams,
    hall_petch_partials,
    kuhn_gap,
    kuhn_partials,
    paris_partials,
    strain_delta,
    strain_gamma,
    strain_kuhn,
    strain_kuhn_partials,
)
from fitagent.regionsel import auto_select_region
from fitagent.reporting import normalize_trace_text
from fitagent.tasks import ATOMIC, build_registry, make_task

HP_SEED = 0


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def replay_hall_petch(tmp: Path):
    data = synth.hall_petch_table().write_csv(tmp / "hp_clean.csv")
    cfg = make_task("hall-petch", str(data), out_dir=str(tmp / "out"), settings=SETTINGS)
    backend = ReplayBackend.from_file(FIXTURES / "hall_petch.jsonl")
    t0 = time.perf_counter()
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, backend), backend,
                          SETTINGS, Policy())
    return state, time.perf_counter() - t0


def test_criterion_01_hall_petch_noiseless_recovery(tmp_path):
    state, elapsed = replay_hall_petch(tmp_path)
    p = state.model.params if state.model else {}
    ok = (
        state.status == "done"
        and rel(p["sigma0"], synth.HP_TRUE.sigma0) <= 1e-6
        and rel(p["k"], synth.HP_TRUE.k) <= 1e-6
        and abs(state.validation.r2 - 1.0) <= 1e-12
        and elapsed < 5.0
    )
    report(1, ok, f"status={state.status} params={p} R2={state.validation.r2!r} time={elapsed:.2f}s")


def test_criterion_02_hall_petch_noisy_robustness(tmp_path):
    """Literal criterion: 13 points on 3..23 um with sigma = 7 MPa noise.

    Over that grain-size range the noiseless curve varies by only about
    3.5 MPa, so 7 MPa noise swamps it and R^2 >= 0.90 cannot be reached.
    This test is left failing on purpose; see the millimetre-scale test
    below for the regime where the threshold is meaningful.
    """
    data = synth.hall_petch_table(noise=7.0, seed=HP_SEED).write_csv(tmp_path / "hp_noisy.csv")
    state, _ = scripted_run("hall-petch", data, hp_script("hp_noisy.csv"), tmp_path / "out")
    p = state.model.params
    r2 = state.validation.r2
    ok = (state.status == "done" and r2 >= 0.90 and rel(p["sigma0"], synth.HP_TRUE.sigma0) <= 0.15
          and rel(p["k"], synth.HP_TRUE.k) <= 0.15)
    report(2, ok, f"status={state.status} R2={r2:.4f} sigma0={p['sigma0']:.4f} k={p['k']:.4f} (seed {HP_SEED})")


def test_hall_petch_noisy_mm_scale_medians():
    """Same noise with grain sizes in mm: median R^2 and errors over 200 seeds meet the thresholds."""
    model = ParamModel.from_source("sigma0 + k * d^(-0.5)", "d")
    r2s, e0, ek = [], [], []
    for seed in range(200):
        t = synth.hall_petch_table(noise=7.0, seed=seed, unit="mm")
        d = Dataset(t.rows[:, 0], t.rows[:, 1])
        fit = fit_lm(model, d, {"sigma0": 40.0, "k": 10.0})
        r2s.append(validate(model, fit, d).r2)
        e0.append(rel(fit.params["sigma0"], synth.HP_TRUE.sigma0))
        ek.append(rel(fit.params["k"], synth.HP_TRUE.k))
    assert np.median(r2s) >= 0.90
    assert np.median(e0) <= 0.15
    assert np.median(ek) <= 0.15


def test_criterion_03_paris_pipeline(tmp_path):
    table = synth.paris_table()
    d = Dataset(table.rows[:, 0], table.rows[:, 1])
    sel = auto_select_region(d)
    only_region_ii = sel.indices == tuple(range(15, 40))
    in_band = 2.0 <= sel.slope_min and sel.slope_max <= 4.0
    region = sel.apply(d)
    model = ParamModel.from_source(PARIS_DSL, "dK")
    c0, m0 = loglog_linearize(region)
    fit = fit_lm(model, region, {"C": c0, "m": m0}, fit_space="log10")
    v = validate(model, fit, region)

    # the same numbers through the replayed agent
    data = table.write_csv(tmp_path / "paris.csv")
    cfg = make_task("paris", str(data), out_dir=str(tmp_path / "out"), settings=SETTINGS)
    backend = ReplayBackend.from_file(FIXTURES / "paris.jsonl")
    state = agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, backend), backend,
                          SETTINGS, Policy())
    ok = (
        only_region_ii and in_band
        and rel(fit.params["m"], synth.PARIS_TRUE.m) <= 0.01
        and rel(fit.params["C"], synth.PARIS_TRUE.C) <= 0.05
        and v.r2_log >= 0.999
        and state.status == "done"
        and state.region.indices == sel.indices
        and rel(state.model.params["m"], synth.PARIS_TRUE.m) <= 0.01
    )
    report(3, ok, f"region={sel.points_selected} pts [{sel.x_min:.3f}, {sel.x_max:.3f}] "
                  f"slopes=[{sel.slope_min:.3f}, {sel.slope_max:.3f}] C={fit.params['C']:.5e} "
                  f"m={fit.params['m']:.5f} R2log={v.r2_log:.6f} agent={state.status}")


def test_criterion_04_kuhn_recovery():
    table = synth.kuhn_table()
    n, L, y = table.column("n_rings"), table.column("L_bohr"), table.column("gap_hartree")
    d = Dataset(n, y, extra={"N": 4 * n + 2, "L": L})
    canonical = ParamModel.from_source(KUHN_DSL["canonical"], "n", ("N", "L"), {"pi": math.pi})
    variant = ParamModel.from_source(KUHN_DSL["recall_gpt5"], "n", ("N", "L"), {"pi": math.pi})
    fc = fit_lm(canonical, d, {"V0": 0.05})
    fv = fit_lm(variant, d, {"V0": 0.05})
    r2c = validate(canonical, fc, d).r2
    r2v = validate(variant, fv, d).r2
    ok = len(n) == 11 and rel(fc.params["V0"], synth.KUHN_V0) <= 1e-6 and abs(r2c - r2v) <= 0.01
    report(4, ok, f"V0={fc.params['V0']!r} R2(canonical)={r2c:.6f} R2(recall_gpt5)={r2v:.6f} "
                  f"V0(recall_gpt5)={fv.params['V0']:.6f}")


def test_criterion_05_strain_identities():
    p = StrainKuhnParams(s=10, l0=26.5, v0=synth.KUHN_V0)
    base = kuhn_gap(p.s, p.l0, KuhnParams(p.v0))
    at0 = float(strain_kuhn(0.0, p))
    g0, g25 = float(strain_gamma(0.0)), float(strain_gamma(0.25))
    dm, dp = float(strain_delta(-0.1)), float(strain_delta(0.1))
    ok = at0 == float(base) and g0 == 0.0 and g25 == 0.0 and dm == -0.1 and math.isclose(dp, 0.01, rel_tol=0, abs_tol=1e-17)
    report(5, ok, f"E(0)={at0!r} base={float(base)!r} gamma(0)={g0} gamma(0.25)={g25} delta(-0.1)={dm} delta(0.1)={dp!r}")


def test_criterion_06_agent_robustness(tmp_path):
    data = synth.hall_petch_table().write_csv(tmp_path / "hp.csv")
    script = [
        act("Load the data.", "load_data", {"filename": "hp.csv"}),
        'THOUGHT: Get the equation.\nACTION: {"tool": "generate_function", "input": {}',  # (a) malformed
        act("Get the equation.", "generate_function"),
        HP_RECALL,
        codegen("sigma0 + k * d^(-0.5)", {"sigma0": 40, "k": 10}),
        act("Validate before fitting.", "validate_fit"),  # (b) auxiliary failure
        act("Fit with a bad start.", "fit_model", {"initial_params": {"nope": 1}}),  # (c) essential failure
        act("Fit again.", "fit_model"),
        act("Validate.", "validate_fit"),
        act("Done.", "finalize"),
    ]
    state, backend = scripted_run("hall-petch", data, script, tmp_path / "out")
    parse_errors = sum(e.outcome == "parse_error" for e in state.history)
    warnings = sum(e.is_warning for e in state.history)
    essential_errors = sum(e.outcome == "tool_error" and e.criticality == "essential" for e in state.history)
    ok = state.status == "done" and parse_errors == 1 and warnings == 1 and essential_errors == 1
    report(6, ok, f"status={state.status} parse_errors={parse_errors} warnings={warnings} "
                  f"essential_failures={essential_errors} iterations={len(state.history)}")


def test_criterion_07_no_fallback(tmp_path):
    retries = 2
    data = synth.hall_petch_table().write_csv(tmp_path / "hp.csv")
    bad = "I would rather not say which equation applies."
    script = [act("Load.", "load_data", {"filename": "hp.csv"}), act("Equation.", "generate_function")]
    script += [bad] * (retries + 1)
    state, backend = scripted_run("hall-petch", data, script, tmp_path / "out", Policy(retries=retries))
    generation_calls = len(backend.requests) - 2

    # same transcript through the command line for the exit status
    scripted = ScriptedBackend(script)
    rec = RecordingBackend(scripted, tmp_path / "bad.jsonl")
    cfg = make_task("hall-petch", str(data), out_dir=str(tmp_path / "rec"), settings=SETTINGS)
    agentloop.run(Task(cfg.system_prompt, cfg.description), build_registry(cfg, rec), rec, SETTINGS, Policy())
    code = cli.main(["run", "--task", "hall-petch", "--data", str(data), "--backend", "replay",
                     "--transcript", str(tmp_path / "bad.jsonl"), "--out", str(tmp_path / "cli")])
    ok = (state.status == "halted_no_equation" and generation_calls == retries + 1 and state.model is None
          and code == 2 and not (tmp_path / "cli" / "results.json").exists())
    report(7, ok, f"status={state.status} attempts={generation_calls} model={state.model} exit={code}")


def test_criterion_08_replay_determinism(tmp_path):
    synth.hall_petch_table().write_csv(tmp_path / "hp_clean.csv")
    texts = []
    for run in ("a", "b"):
        code = cli.main(["run", "--task", "hall-petch", "--data", str(tmp_path / "hp_clean.csv"),
                         "--backend", "replay", "--transcript", str(FIXTURES / "hall_petch.jsonl"),
                         "--out", str(tmp_path / run)])
        assert code == 0
        texts.append(normalize_trace_text((tmp_path / run / "trace.jsonl").read_text(encoding="utf-8")))
    ok = texts[0].encode() == texts[1].encode()
    report(8, ok, f"normalized traces identical: {ok} ({len(texts[0])} bytes)")


KUHN_LATEX = r"\Delta E=\frac{h^{2}}{8mL^{2}}(N+1)+V_{0}\left(1-\frac{1}{N}\right)"


def test_criterion_09_extraction_fidelity():
    source = latex_to_dsl(KUHN_LATEX)
    expr = parse(source, {"N", "L", "h", "m"})
    rng = np.random.default_rng(9)
    N = rng.integers(2, 200, 100).astype(float)
    L = rng.uniform(1.0, 500.0, 100)
    V0 = rng.uniform(0.001, 1.0, 100)
    worst = 0.0
    for i in range(100):
        got = evaluate_array(expr, {"N": N[i], "L": L[i], **{k: ATOMIC[k] for k in ("h", "m")}}, {"V0": V0[i]})[0]
        want = float(kuhn_gap(N[i], L[i], KuhnParams(V0[i])))
        worst = max(worst, rel(got, want))
    report(9, worst <= 1e-12, f"dsl={source!r} worst relative error={worst:.2e}")


def _jacobian_cases(rng):
    """(model, dataset, theta, analytic partials) for each physics model at 50 points."""
    d = rng.uniform(1.0, 50.0, 50)
    hp = HallPetchParams(rng.uniform(10, 100), rng.uniform(1, 20))
    yield ("hall_petch", ParamModel.from_source("sigma0 + k * d^(-0.5)", "d"), Dataset(d, d),
           {"sigma0": hp.sigma0, "k": hp.k}, hall_petch_partials(d, hp))

    dK = rng.uniform(2.0, 60.0, 50)
    pp = ParisParams(10 ** rng.uniform(-13, -9), rng.uniform(2, 4))
    yield ("paris", ParamModel.from_source(PARIS_DSL, "dK"), Dataset(dK, dK),
           {"C": pp.C, "m": pp.m}, paris_partials(dK, pp))

    N = rng.integers(10, 100, 50).astype(float)
    L = rng.uniform(20, 300, 50)
    kp = KuhnParams(rng.uniform(0.01, 0.2))
    yield ("kuhn", ParamModel.from_source(KUHN_DSL["canonical"], "N", ("L",), {"pi": math.pi}),
           Dataset(N, N, extra={"L": L}), {"V0": kp.V0}, kuhn_partials(N, L, kp))

    eps = rng.uniform(-0.2, 0.3, 50)
    sp = StrainKuhnParams(10, rng.uniform(15, 40), rng.uniform(0.01, 0.2))
    yield ("strain_kuhn", ParamModel.from_source(STRAIN_KUHN_DSL, "eps", (), {"pi": math.pi, "s": sp.s}),
           Dataset(eps, eps), {"l0": sp.l0, "v0": sp.v0}, strain_kuhn_partials(eps, sp))


def _monotone(history) -> bool:
    return all(b <= a for a, b in zip(history, history[1:]))


def test_criterion_10_numerical_hygiene(tmp_path):
    rng = np.random.default_rng(10)
    worst = 0.0
    for name, model, data, theta, partials in _jacobian_cases(rng):
        J = jacobian_fd(model, theta, data)
        for j, p in enumerate(model.params):
            a = partials[p]
            err = np.max(np.abs(J[:, j] - a) / np.maximum(np.abs(a), 1e-300))
            worst = max(worst, float(err))

    # accepted-step resnorms of every fit this test performs
    histories = []
    for seed in range(5):
        t = synth.hall_petch_table(noise=7.0, seed=seed)
        d = Dataset(t.rows[:, 0], t.rows[:, 1])
        histories.append(fit_lm(ParamModel.from_source("sigma0 + k * d^(-0.5)", "d"), d,
                                {"sigma0": 1.0, "k": 1.0}).history)
    pt = synth.paris_table(noise=0.05, seed=1)
    histories.append(fit_lm(ParamModel.from_source(PARIS_DSL, "dK"), Dataset(pt.rows[:, 0], pt.rows[:, 1]),
                            {"C": 1e-11, "m": 3.0}, fit_space="log10").history)
    kt = synth.kuhn_table()
    kd = Dataset(kt.column("n_rings"), kt.column("gap_hartree"),
                 extra={"N": 4 * kt.column("n_rings") + 2, "L": kt.column("L_bohr")})
    histories.append(fit_lm(ParamModel.from_source(KUHN_DSL["recall_gpt4"], "n", ("N", "L"), {"pi": math.pi}),
                            kd, {"V0": 1.0}).history)
    st = synth.strain_table()
    histories.append(fit_lm(ParamModel.from_source(STRAIN_KUHN_DSL, "eps", (), {"pi": math.pi, "s": 10}),
                            Dataset(st.rows[:, 0], st.rows[:, 1] / 27.2114), {"l0": 20.0, "v0": 0.1}).history)
    monotone = all(_monotone(h) for h in histories)
    ok = worst <= 1e-6 and monotone
    report(10, ok, f"worst Jacobian relative error={worst:.2e}; {len(histories)} fits non-increasing: {monotone}")


@pytest.mark.skipif(not (os.environ.get("FITAGENT_HP_CSV") and os.environ.get("FITAGENT_FCG_CSV")),
                    reason="set FITAGENT_HP_CSV and FITAGENT_FCG_CSV to the original datasets")
def test_criterion_11_original_datasets():
    def first_two(path):
        header = Path(path).read_text(encoding="utf-8").splitlines()[0].split(",")
        return load_csv(path, header[0].strip(), header[1].strip())

    hp = first_two(os.environ["FITAGENT_HP_CSV"])
    m_hp = ParamModel.from_source("sigma0 + k * d^(-0.5)", "d")
    f_hp = fit_lm(m_hp, hp, {"sigma0": 40.0, "k": 10.0})
    r2_hp = validate(m_hp, f_hp, hp).r2

    fcg = first_two(os.environ["FITAGENT_FCG_CSV"])
    region = auto_select_region(fcg).apply(fcg)
    m_p = ParamModel.from_source(PARIS_DSL, "dK")
    c0, s0 = loglog_linearize(region)
    f_p = fit_lm(m_p, region, {"C": c0, "m": s0}, fit_space="log10")
    r2_log = validate(m_p, f_p, region).r2_log
    checks = [
        rel(f_hp.params["sigma0"], 38.4577), rel(f_hp.params["k"], 9.4836), rel(r2_hp, 0.9499),
        rel(f_p.params["C"], 8.7102e-12), rel(f_p.params["m"], 3.2583), rel(r2_log, 0.9963),
    ]
    report(11, max(checks) <= 0.005, f"HP={f_hp.params} R2={r2_hp:.4f} Paris={f_p.params} R2log={r2_log:.4f}")
