"""Case-study task configurations and the tool executors bound to them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import arxivextract, eqgen, reporting
from .assets import prompt_text
from .datastore import load_csv, split_unit, summarize
from .exprdsl import BinOp, Param, evaluate_array, free_names, parse, walk
from .fitcore import fit_lm, loglog_linearize, validate
from .llm import ChatBackend, ChatSettings
from .physmodels import H_PLANCK, HARTREE_TO_EV, M_ELECTRON
from .regionsel import auto_select_region, manual_region
from .state import AgentState, Halt
from .toolregistry import Field, ToolRegistry, ToolSpec, fmt_num

TASKS = ("hall-petch", "paris", "kuhn-recall", "kuhn-extract", "strain-kuhn", "generic")
CORE_TOOLS = ("load_data", "generate_function", "fit_model", "test_function", "validate_fit",
              "create_plots", "export_results", "finalize")

ATOMIC = {"pi": math.pi, "h": H_PLANCK, "m": M_ELECTRON}
UNSTRAINED_KUHN = "E(s) = h^2 (s + 1) / (8 m l0^2) + v0 (1 - 1/s)"


@dataclass
class TaskConfig:
    name: str
    system_prompt: str
    description: str
    law: str
    data_path: str | None = None
    x_column: str = "x"
    y_column: str = "y"
    extra_columns: dict[str, str] = field(default_factory=dict)  # DSL name -> CSV column
    derived_columns: dict[str, str] = field(default_factory=dict)  # DSL name -> DSL expression of x
    signature: eqgen.FunctionSignature = field(default_factory=lambda: eqgen.FunctionSignature("x"))
    recall_context: str = ""
    fit_space: str = "linear"
    linearization: str = "parity"
    region_bounds: tuple[float, float] | None = None
    slope_band: tuple[float, float] = (2.0, 4.0)
    window: int = 5
    band_factor: float = 10.0
    retries: int = 2
    settings: ChatSettings = field(default_factory=ChatSettings)
    out_dir: str | None = None
    html_base: str = arxivextract.DEFAULT_HTML_BASE
    html_keywords: tuple[str, ...] = ("Kuhn", "HOMO")
    extraction_target: str = ""
    base_equation: str | None = None
    response_grid: tuple[float, ...] = ()
    extra_tools: tuple[str, ...] = ()

    def header(self) -> dict[str, Any]:
        """Run settings recorded in the trace header (no machine-specific paths)."""
        return {
            "task": self.name,
            "data_file": Path(self.data_path).name if self.data_path else None,
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "fit_space": self.fit_space,
            "retries": self.retries,
            "band_factor": self.band_factor,
            "region_bounds": list(self.region_bounds) if self.region_bounds else None,
        }


def _description(goal: str, data_path: str | None, notes: str = "") -> str:
    lines = [goal]
    if data_path:
        lines.append(f"Data file: {Path(data_path).name}")
    lines.append("The equation must come from the LLM. There is no fallback equation.")
    if notes:
        lines.append(notes)
    return "\n".join(lines)


def make_task(name: str, data_path: str | None = None, *, x_column: str | None = None,
              y_column: str | None = None, context: str | None = None, **overrides) -> TaskConfig:
    """Default configuration for one of :data:`TASKS`; keyword overrides win."""
    if name == "hall-petch":
        cfg = TaskConfig(
            name=name,
            system_prompt=prompt_text("system_hall_petch"),
            description=_description("Fit the Hall-Petch model to grain size and yield strength data.", data_path),
            law="Hall-Petch",
            x_column="d_um",
            y_column="sigma_MPa",
            signature=eqgen.FunctionSignature("d"),
            recall_context="The Hall-Petch relation giving yield strength sigma as a function of the "
                           "average grain diameter d (micrometres), in MPa.",
            linearization="inverse_sqrt",
        )
    elif name == "paris":
        cfg = TaskConfig(
            name=name,
            system_prompt=prompt_text("system_paris"),
            description=_description(
                "Fit the Paris law to fatigue crack growth data (growth rate da/dN against the stress "
                "intensity factor range dK).",
                data_path,
                "Only the stable growth regime (Region II) should be fitted.",
            ),
            law="Paris law",
            x_column="dK_MPa_sqrt_m",
            y_column="dadN_m_per_cycle",
            signature=eqgen.FunctionSignature("dK"),
            recall_context="The Paris law for fatigue crack growth rate da/dN (m/cycle) in the stable "
                           "regime as a function of the stress intensity factor range dK (MPa sqrt(m)).",
            fit_space="log10",
            linearization="loglog",
            extra_tools=("auto_select_region", "select_region", "calc_initial"),
        )
    elif name in ("kuhn-recall", "kuhn-extract"):
        sig = eqgen.FunctionSignature(
            "n", ("N", "L"), dict(ATOMIC),
            "Hartree atomic units: h = 2*pi, electron mass m = 1, L in bohr, gap in hartree. "
            "N is the number of pi electrons (N = 4n + 2) and L the conjugation length.",
        )
        extract = name == "kuhn-extract"
        cfg = TaskConfig(
            name=name,
            system_prompt=prompt_text("system_kuhn_extract" if extract else "system_kuhn_recall"),
            description=_description(
                "Fit Kuhn's equation to HOMO-LUMO gaps (hartree) of helicenes with n rings, "
                "N = 4n + 2 pi electrons and conjugation length L (bohr).",
                data_path,
                "Take the equation from the source article (arXiv id 2101.00001)." if extract else "",
            ),
            law="Kuhn",
            x_column="n_rings",
            y_column="gap_hartree",
            extra_columns={"L": "L_bohr"},
            derived_columns={"N": "4*n + 2"},
            signature=sig,
            recall_context="Kuhn's equation for the HOMO-LUMO gap Delta E of a conjugated chain in terms "
                           "of the number of pi electrons N and the conjugation length L.",
            extraction_target="Kuhn's equation for the HOMO-LUMO gap Delta E of a conjugated chain",
            extra_tools=("extract_text", "extract_equation_html") if extract else (),
        )
    elif name == "strain-kuhn":
        consts = {**ATOMIC, "s": 10.0, "l0": 26.5, "Eh": HARTREE_TO_EV}
        consts.update(overrides.pop("strain_constants", {}))
        sig = eqgen.FunctionSignature(
            "eps", (), consts,
            "Atomic units: h = 2*pi, m = 1, l0 in bohr. The data are in eV; multiply a gap in "
            "hartree by Eh to convert. s is the monomer count.",
        )
        cfg = TaskConfig(
            name=name,
            system_prompt=prompt_text("system_strain_kuhn"),
            description=_description(
                "Model the HOMO-LUMO gap (eV) of a strained helicene as a function of strain eps.",
                data_path,
                f"Base equation: {UNSTRAINED_KUHN}",
            ),
            law="strain-modified Kuhn",
            x_column="epsilon",
            y_column="gap_eV",
            signature=sig,
            recall_context="Tensile and compressive strain shift the gap by different amounts, so the "
                           "two signs of eps may need different terms.",
            base_equation=UNSTRAINED_KUHN,
            response_grid=(-0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2, 0.25),
            extra_tools=("generate_strain_function", "calculate_response", "plot_results"),
        )
    elif name == "generic":
        xc, yc = x_column or "x", y_column or "y"
        xs, ys = split_unit(xc)[0], split_unit(yc)[0]
        cfg = TaskConfig(
            name=name,
            system_prompt=prompt_text("system_generic"),
            description=_description(f"Find and fit a law relating {ys} to {xs}.", data_path),
            law="empirical",
            x_column=xc,
            y_column=yc,
            signature=eqgen.FunctionSignature(xs),
            recall_context=context or f"A physical law giving {ys} as a function of {xs}.",
        )
    else:
        raise ValueError(f"unknown task {name!r}; choose from {', '.join(TASKS)}")
    cfg.data_path = data_path
    if x_column:
        cfg.x_column = x_column
    if y_column:
        cfg.y_column = y_column
    if context and name != "generic":
        cfg.recall_context = context
    return replace(cfg, **overrides)


# --------------------------------------------------------------------------
# Tool executors


def _power_roles(fn) -> tuple[str, str] | None:
    """(prefactor, exponent) parameter names of a two-parameter power law."""
    if fn is None or len(fn.params) != 2:
        return None
    for e in walk(fn.expr):
        if (isinstance(e, BinOp) and e.op == "^" and isinstance(e.right, Param)
                and fn.variable in free_names(e.left)[0]):
            exp = e.right.name
            return next(p for p in fn.params if p != exp), exp
    return None


class Toolkit:
    """Executors for one task run, closed over its configuration and backend."""

    def __init__(self, cfg: TaskConfig, backend: ChatBackend):
        self.cfg = cfg
        self.backend = backend

    # -- helpers

    def _need_data(self, state: AgentState):
        if state.data is None:
            raise RuntimeError("no data loaded; call load_data first")

    def _need_function(self, state: AgentState):
        if state.function is None:
            raise RuntimeError("no function yet; generate one first")

    def _need_model(self, state: AgentState):
        if state.model is None:
            raise RuntimeError("no fitted model; call fit_model first")

    def _resolve(self, filename: str) -> Path:
        p = Path(filename)
        if p.is_absolute() or p.is_file():
            return p
        if self.cfg.data_path:
            q = Path(self.cfg.data_path).parent / p
            if q.is_file():
                return q
        return p

    def _out(self, name: str) -> Path:
        if not self.cfg.out_dir:
            raise RuntimeError("no output directory configured")
        base = Path(name).name
        if not base or base in (".", ".."):
            raise RuntimeError(f"bad output file name {name!r}")
        return Path(self.cfg.out_dir) / base

    # -- core tools

    def load_data(self, inp, state: AgentState) -> str:
        path = self._resolve(inp["filename"])
        d = load_csv(path, self.cfg.x_column, self.cfg.y_column, self.cfg.extra_columns)
        if self.cfg.derived_columns:
            var = self.cfg.signature.variable
            cols = {}
            for k, src in self.cfg.derived_columns.items():
                cols[k] = evaluate_array(parse(src, {var}), {var: d.x}, {}, n=d.n)
            d = d.with_extra(**cols)
        state.data = d
        state.region = None
        state.clear_fit()
        return f"Loaded {summarize(d)}"

    def _function_obs(self, fn: eqgen.GeneratedFunction) -> str:
        return (
            f"LLM generated: {fn.dsl_source}\n"
            f"Based on equation: {fn.card.equation}\n"
            f"Function test passed; parameters: {', '.join(fn.params)}"
        )

    def _install(self, state: AgentState, fn) -> None:
        state.function = fn
        state.initial = {k: v for k, v in state.initial.items() if k in ("prefactor", "exponent")}
        state.clear_fit()

    def generate_function(self, inp, state: AgentState) -> str:
        self._need_data(state)
        try:
            fn = eqgen.generate_function(
                self.cfg.recall_context, self.cfg.signature, state.data, self.backend,
                self.cfg.settings, self.cfg.retries, self.cfg.band_factor,
            )
        except eqgen.NoEquation as exc:
            raise Halt("halted_no_equation", str(exc)) from exc
        self._install(state, fn)
        return self._function_obs(fn)

    def generate_strain_function(self, inp, state: AgentState) -> str:
        self._need_data(state)
        try:
            fn = eqgen.generate_strain_function(
                self.cfg.base_equation or UNSTRAINED_KUHN, self.cfg.recall_context, self.cfg.signature,
                state.data, self.backend, self.cfg.settings, self.cfg.retries, self.cfg.band_factor,
            )
        except eqgen.NoEquation as exc:
            raise Halt("halted_no_equation", str(exc)) from exc
        self._install(state, fn)
        return self._function_obs(fn)

    def test_function(self, inp, state: AgentState) -> str:
        self._need_data(state)
        self._need_function(state)
        fn = state.function
        tp = inp.get("test_params", fn.test_params)
        if isinstance(tp, list):
            if len(tp) != len(fn.params):
                raise ValueError(f"expected {len(fn.params)} test values ({', '.join(fn.params)}), got {len(tp)}")
            tp = dict(zip(fn.params, tp))
        unknown = set(tp) - set(fn.params)
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        rep = eqgen.test_function(fn.model, state.data, tp, inp.get("band_factor", self.cfg.band_factor))
        if not rep.passed:
            raise RuntimeError("function test failed: " + "; ".join(rep.failures))
        lo, hi = rep.band
        return f"Function test passed: {len(rep.probes)} probes within [{fmt_num(lo)}, {fmt_num(hi)}]"

    def _initial(self, p: str, inp, state: AgentState) -> float:
        given = inp.get("initial_params", {})
        if p in given:
            return given[p]
        if f"initial_{p}" in inp:
            return inp[f"initial_{p}"]
        if p in state.initial:
            return state.initial[p]
        roles = _power_roles(state.function)
        if roles and "prefactor" in state.initial:
            return state.initial["prefactor" if p == roles[0] else "exponent"]
        return state.function.test_params.get(p, 1.0)

    def fit_model(self, inp, state: AgentState) -> str:
        self._need_data(state)
        self._need_function(state)
        fn = state.function
        given = inp.get("initial_params", {})
        named = {k[len("initial_"):] for k in inp if k.startswith("initial_") and k != "initial_params"}
        unknown = (set(given) | named) - set(fn.params)
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        for k, v in given.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"initial value for {k} must be a finite number")
        init = {p: float(self._initial(p, inp, state)) for p in fn.params}
        space = inp.get("fit_space", self.cfg.fit_space)
        res = fit_lm(fn.model, state.fit_data(), init, fit_space=space)
        state.model = res
        state.validation = None
        parts = ", ".join(f"{k} = {fmt_num(v)}" for k, v in res.params.items())
        tail = "" if res.converged else f" (not converged: {res.message})"
        return f"Fit complete: {parts}, resnorm = {fmt_num(res.resnorm)}{tail}"

    def validate_fit(self, inp, state: AgentState) -> str:
        self._need_model(state)
        data = state.fit_data()
        v = validate(state.function.model, state.model, data)
        state.validation = v
        unit = "" if data.y_unit == "unknown" else f" {data.y_unit}"
        line = f"Validation: R²={fmt_num(v.r2)}"
        if v.r2_log is not None:
            line += f", R²(log)={fmt_num(v.r2_log)}"
        line += f", RMSE={fmt_num(v.rmse)}{unit}"
        extra = []
        if v.adjusted_r2 is not None:
            extra.append(f"Adjusted R²={fmt_num(v.adjusted_r2)}")
        if v.rmse_log is not None:
            extra.append(f"RMSE(log)={fmt_num(v.rmse_log)}")
        return line + ("\n" + ", ".join(extra) if extra else "")

    def create_plots(self, inp, state: AgentState) -> str:
        self._need_model(state)
        if not self.cfg.out_dir:
            raise RuntimeError("no output directory configured")
        files = reporting.emit_plots(state, self.cfg.out_dir, self.cfg.linearization)
        svgs = [f.name for f in files if f.suffix == ".svg"]
        state.plots = [str(f) for f in files]
        return f"Created {len(svgs)} figures: {', '.join(svgs)}"

    def export_results(self, inp, state: AgentState) -> str:
        fmt = inp.get("format", "json")
        if fmt not in reporting.EXPORT_FORMATS:
            raise ValueError(f"unknown format {fmt!r}; use json, csv or table")
        name = inp.get("filename") or f"results{reporting.EXPORT_FORMATS[fmt]}"
        path = reporting.export_results(state, fmt, self._out(name), self.cfg.name)
        state.exports.append(str(path))
        return f"Results exported to {path.name}"

    def finalize(self, inp, state: AgentState) -> str:
        state.summary = final_summary(state, self.cfg)
        state.status = "done"
        return state.summary

    # -- Paris tools

    def _region_obs(self, sel, state: AgentState, head: str) -> str:
        d = state.data
        unit = "" if d.x_unit == "unknown" else f" {d.x_unit}"
        text = (f"{head}: {d.x_symbol} range [{fmt_num(sel.x_min)}, {fmt_num(sel.x_max)}]{unit}, "
                f"{sel.points_selected} points out of {sel.points_total}")
        if sel.slope_min is not None:
            lo, hi = self.cfg.slope_band
            text += f"\nDetected slope range: [{sel.slope_min:.2f}, {sel.slope_max:.2f}] (acceptable range: {lo:g}-{hi:g})"
        return text

    def auto_select_region(self, inp, state: AgentState) -> str:
        self._need_data(state)
        if self.cfg.region_bounds is not None:
            lo, hi = self.cfg.region_bounds
            sel = manual_region(state.data, lo, hi, self.cfg.window)
            head = "Region II set by configured bounds"
        else:
            band = (inp.get("slope_min", self.cfg.slope_band[0]), inp.get("slope_max", self.cfg.slope_band[1]))
            sel = auto_select_region(state.data, band, inp.get("window", self.cfg.window))
            head = "Auto-selected Region II"
        state.region = sel
        state.clear_fit()
        return self._region_obs(sel, state, head)

    def select_region(self, inp, state: AgentState) -> str:
        self._need_data(state)
        sel = manual_region(state.data, inp["x_min"], inp["x_max"], self.cfg.window)
        state.region = sel
        state.clear_fit()
        return self._region_obs(sel, state, "Selected region")

    def calc_initial(self, inp, state: AgentState) -> str:
        self._need_data(state)
        pre, slope = loglog_linearize(state.fit_data())
        state.initial["prefactor"] = pre
        state.initial["exponent"] = slope
        roles = _power_roles(state.function)
        names = roles or ("prefactor", "exponent")
        if roles:
            state.initial[roles[0]] = pre
            state.initial[roles[1]] = slope
        return f"Initial estimates: {names[0]} = {fmt_num(pre)}, {names[1]} = {fmt_num(slope)}"

    # -- literature tools

    def extract_text(self, inp, state: AgentState) -> str:
        path = inp.get("path", "source.pdf")
        text = arxivextract.extract_text_from_pdf(path)
        state.pdf_text = text
        return f"Extracted {len(text)} characters from PDF: {path}"

    def extract_equation_html(self, inp, state: AgentState) -> str:
        self._need_data(state)
        pid = inp["paper_id"]
        keywords = tuple(inp.get("keywords", self.cfg.html_keywords))
        url, window = arxivextract.fetch_arxiv_html(pid, keywords, self.cfg.html_base)
        ext = arxivextract.extract_equation_from_html(
            window, self.cfg.extraction_target, self.backend, self.cfg.settings, url)
        state.extraction = ext
        source = arxivextract.latex_to_dsl(ext.latex)
        card = eqgen.EquationCard(ext.latex, {}, f"extracted from {url}", "literature_extraction")
        fn = eqgen.build_function(card, source, self.cfg.signature, state.data,
                                  inp.get("test_params", {}), self.cfg.band_factor)
        self._install(state, fn)
        s, t = ext.confidence
        return (
            f"Fetched HTML for arXiv:{pid} ({len(window)} characters kept)\n"
            f"Extracted LaTeX from HTML (confidence {s}/{t}): {ext.latex}\n"
            f"Translated to: {source}; function test passed; parameters: {', '.join(fn.params)}"
        )

    # -- strain tools

    def calculate_response(self, inp, state: AgentState) -> str:
        self._need_function(state)
        fn = state.function
        grid = np.array(inp.get("strains", self.cfg.response_grid) or self.cfg.response_grid, dtype=float)
        if grid.size == 0:
            raise ValueError("no strain values given")
        params = state.model.params if state.model is not None else {p: fn.test_params.get(p, 1.0) for p in fn.params}
        env = {fn.variable: grid, **fn.model.constants}
        vals = evaluate_array(fn.expr, env, params, n=grid.size)
        pairs = ", ".join(f"{fmt_num(e)}: {fmt_num(v)}" for e, v in zip(grid, vals))
        src = "fitted" if state.model is not None else "test"
        return f"Response with {src} parameters ({fn.variable}: value): {pairs}"

    def plot_results(self, inp, state: AgentState) -> str:
        return self.create_plots(inp, state)

    # -- registry

    def specs(self) -> dict[str, ToolSpec]:
        law = self.cfg.law
        S = Field
        return {
            "load_data": ToolSpec("load_data", "Load the experimental data table from a CSV file.",
                                  {"filename": S("string", True)}, "essential", self.load_data),
            "generate_function": ToolSpec(
                "generate_function",
                f"Ask the LLM to recall the {law} equation from memory and compile it to an expression "
                f"(no fallback: the run halts if this keeps failing).",
                {}, "essential", self.generate_function),
            "fit_model": ToolSpec(
                "fit_model", "Nonlinear least-squares fit of the current function to the data.",
                {"initial_params": S("object"), "fit_space": S("string")}, "essential", self.fit_model,
                pattern_fields={r"initial_[A-Za-z_][A-Za-z0-9_]*": S("number")}),
            "test_function": ToolSpec(
                "test_function", "Check the current function on sample inputs.",
                {"test_params": S("object|array"), "band_factor": S("number")}, "auxiliary", self.test_function),
            "validate_fit": ToolSpec("validate_fit", "Goodness-of-fit metrics (R², RMSE, residuals).",
                                     {}, "auxiliary", self.validate_fit),
            "create_plots": ToolSpec("create_plots", "Write diagnostic figures (original, linearized, residuals).",
                                     {}, "auxiliary", self.create_plots),
            "export_results": ToolSpec(
                "export_results", "Save the fit results to a file (format json, csv or table).",
                {"format": S("string"), "filename": S("string")}, "auxiliary", self.export_results),
            "finalize": ToolSpec("finalize", "Finish the task and report the results.", {}, "auxiliary",
                                 self.finalize),
            "auto_select_region": ToolSpec(
                "auto_select_region",
                "Find the stable-growth (Region II) window from local log-log slopes.",
                {"slope_min": S("number"), "slope_max": S("number"), "window": S("integer")},
                "auxiliary", self.auto_select_region),
            "select_region": ToolSpec(
                "select_region", "Restrict fitting to x_min <= x <= x_max.",
                {"x_min": S("number", True), "x_max": S("number", True)}, "auxiliary", self.select_region),
            "calc_initial": ToolSpec(
                "calc_initial", "Initial power-law estimates from a straight-line fit in log-log space.",
                {}, "auxiliary", self.calc_initial),
            "extract_text": ToolSpec("extract_text", "Extract the text of the source PDF.",
                                     {"path": S("string")}, "auxiliary", self.extract_text),
            "extract_equation_html": ToolSpec(
                "extract_equation_html",
                "Fetch the HTML rendering of an arXiv paper and extract the target equation from it.",
                {"paper_id": S("string", True), "keywords": S("array"), "test_params": S("object")},
                "auxiliary", self.extract_equation_html),
            "generate_strain_function": ToolSpec(
                "generate_strain_function",
                "Ask the LLM to extend the base Kuhn equation with a strain dependence and compile it.",
                {}, "essential", self.generate_strain_function),
            "calculate_response": ToolSpec(
                "calculate_response", "Evaluate the current function over a list of strains.",
                {"strains": S("array")}, "auxiliary", self.calculate_response),
            "plot_results": ToolSpec("plot_results", "Same as create_plots.", {}, "auxiliary", self.plot_results),
        }


def build_registry(cfg: TaskConfig, backend: ChatBackend) -> ToolRegistry:
    specs = Toolkit(cfg, backend).specs()
    return ToolRegistry(specs[n] for n in (*CORE_TOOLS, *cfg.extra_tools))


def final_summary(state: AgentState, cfg: TaskConfig) -> str:
    fn = state.function
    if fn is None or state.model is None:
        return "Task complete. No model was fitted."
    src = reporting.PROVENANCE.get(fn.card.source, fn.card.source)
    lines = [f"Task complete! Final model (from {src}): {fn.dsl_source}"]
    lines.append("Fitted: " + ", ".join(f"{k} = {fmt_num(v)}" for k, v in state.model.params.items()))
    v = state.validation
    if v is not None:
        unit = "" if state.data.y_unit == "unknown" else f" {state.data.y_unit}"
        stats = f"R² = {fmt_num(v.r2)}"
        if v.r2_log is not None:
            stats += f", R²(log) = {fmt_num(v.r2_log)}"
        lines.append(f"{stats}, RMSE = {fmt_num(v.rmse)}{unit}")
    if state.region is not None:
        r = state.region
        lines.append(f"Region ({r.method}): [{fmt_num(r.x_min)}, {fmt_num(r.x_max)}], "
                     f"{r.points_selected}/{r.points_total} points")
    lines.append(f"Equation source: {src}")
    return "\n".join(lines)

