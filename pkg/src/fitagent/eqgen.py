"""Equation generation: recall, code generation to the DSL, testing, halt.

There is deliberately no built-in equation anywhere in this module. When
every attempt fails the caller gets :class:`NoEquation` and nothing else.
"""

from __future__ import annotations

import json
import math
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .assets import render_prompt
from .datastore import Dataset
from .exprdsl import DomainError, DSLError, Expr, evaluate_array, free_names
from .fitcore import ParamModel
from .llm import ChatBackend, ChatSettings, LLMError, ask

SOURCES = ("parametric_recall", "literature_extraction", "strain_modification")
RECALL_SYSTEM = "You are a materials scientist answering from memory. Follow the reply format exactly."
CODEGEN_SYSTEM = "You translate equations into a small math expression language. Follow the reply format exactly."
PROBES = 5


class GenerationStepError(RuntimeError):
    """One pipeline step failed; ``step`` is recall, codegen or test."""

    def __init__(self, step: str, message: str):
        super().__init__(f"{step}: {message}")
        self.step = step
        self.detail = message


@dataclass(frozen=True)
class Attempt:
    number: int
    ok: bool
    step: str  # last step reached
    detail: str


class NoEquation(RuntimeError):
    """Raised when every pipeline attempt failed; the run must halt."""

    def __init__(self, attempts: Sequence[Attempt]):
        self.attempts = tuple(attempts)
        causes = "; ".join(f"attempt {a.number} {a.detail}" for a in self.attempts)
        super().__init__(f"no equation after {len(self.attempts)} attempt(s): {causes}")


@dataclass(frozen=True)
class EquationCard:
    equation: str
    parameters: Mapping[str, str] = field(default_factory=dict)
    unit_notes: str = ""
    source: str = "parametric_recall"

    def __post_init__(self):
        if not self.equation.strip():
            raise ValueError("equation text is empty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown equation source {self.source!r}")
        missing = [p for p in self.parameters if p not in self.equation]
        if missing:
            raise ValueError(f"declared parameters not in the equation: {', '.join(missing)}")
        object.__setattr__(self, "parameters", dict(self.parameters))

    def describe(self) -> str:
        lines = [self.equation]
        lines += [f"- {k}: {v}" for k, v in self.parameters.items()]
        if self.unit_notes:
            lines.append(self.unit_notes)
        return "\n".join(lines)


@dataclass(frozen=True)
class Probe:
    x: float
    params: Mapping[str, float]
    y: float
    within_band: bool


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    passed: bool
    probes: tuple[Probe, ...]
    band: tuple[float, float]
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class FunctionSignature:
    """The names a generated expression may use besides its fit parameters."""

    variable: str
    covariates: tuple[str, ...] = ()
    constants: Mapping[str, float] = field(default_factory=dict)
    note: str = ""

    def bound(self) -> set[str]:
        return {self.variable, *self.covariates, *self.constants}

    def prompt_note(self) -> str:
        extra = [*self.covariates, *self.constants]
        text = ""
        if extra:
            text = "These names are bound for you and are not fit parameters: " + ", ".join(extra) + "."
        if self.note:
            text = f"{text}\n{self.note}".strip()
        return text

    def model(self, source: str) -> ParamModel:
        return ParamModel.from_source(source, self.variable, self.covariates, self.constants)


@dataclass(frozen=True)
class CodegenOutput:
    source: str
    test_params: dict[str, float]


@dataclass(frozen=True)
class GeneratedFunction:
    card: EquationCard
    dsl_source: str
    expr: Expr
    variable: str
    params: tuple[str, ...]
    test_report: TestReport
    model: ParamModel
    test_params: Mapping[str, float] = field(default_factory=dict)
    attempts: tuple[Attempt, ...] = ()


def _as_signature(sig: FunctionSignature | str) -> FunctionSignature:
    return sig if isinstance(sig, FunctionSignature) else FunctionSignature(sig)


# --------------------------------------------------------------------------
# Step 1: recall


_MARKER = re.compile(r"^[ \t]*(EQUATION|PARAMETERS|UNITS):[ \t]*", re.M)
_PARAM_LINE = re.compile(r"^\s*[-*•]?\s*([^\s:]+)\s*:\s*(.+?)\s*$")


def _strip_fences(text: str) -> str:
    return re.sub(r"^\s*```[A-Za-z0-9_-]*\s*$", "", text, flags=re.M)


def parse_card(text: str, source: str = "parametric_recall") -> EquationCard:
    """Split a reply on its EQUATION / PARAMETERS / UNITS markers."""
    text = _strip_fences(text)
    marks = list(_MARKER.finditer(text))
    sections: dict[str, str] = {}
    for i, m in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        sections.setdefault(m.group(1), text[m.end():end].strip())
    if "EQUATION" not in sections or "PARAMETERS" not in sections:
        raise GenerationStepError("recall", "reply lacks the EQUATION/PARAMETERS markers")
    equation = " ".join(sections["EQUATION"].split())
    if not equation:
        raise GenerationStepError("recall", "EQUATION section is empty")
    params, notes = {}, []
    for line in sections["PARAMETERS"].splitlines():
        if not line.strip():
            continue
        m = _PARAM_LINE.match(line)
        if m and m.group(1) in equation:
            params[m.group(1)] = m.group(2)
        else:
            notes.append(line.strip())
    unit_notes = "\n".join(notes + ([sections["UNITS"]] if sections.get("UNITS") else []))
    return EquationCard(equation, params, unit_notes, source)


def recall_equation(context: str, backend: ChatBackend, settings: ChatSettings = ChatSettings()) -> EquationCard:
    """Ask for the governing equation from memory; no data values are sent."""
    reply = ask(backend, settings, RECALL_SYSTEM, render_prompt("recall", context=context))
    return parse_card(reply, "parametric_recall")


def modify_for_strain(base_equation: str, context: str, backend: ChatBackend,
                      settings: ChatSettings = ChatSettings()) -> EquationCard:
    reply = ask(backend, settings, RECALL_SYSTEM,
                render_prompt("strain_modify", base=base_equation, context=context))
    return parse_card(reply, "strain_modification")


# --------------------------------------------------------------------------
# Step 2: code generation

_LHS = re.compile(r"^\s*[A-Za-z_][A-Za-z0-9_]*\s*(\([^()=]*\))?\s*=(?!=)\s*")
_EXPR_LINE = re.compile(r"^[ \t]*EXPRESSION:[ \t]*(.+)$", re.M)
_PARAMS_LINE = re.compile(r"^[ \t]*TEST_PARAMS:[ \t]*(\{.*\})[ \t]*$", re.M)
_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.S)


def extract_expression(reply: str) -> str:
    """Pull one expression out of a reply that may carry prose or fences."""
    m = _EXPR_LINE.search(reply)
    if m:
        text = m.group(1)
    else:
        fenced = _FENCE.findall(reply)
        text = fenced[0] if fenced else reply
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        text = lines[0] if len(lines) == 1 else " ".join(lines)
    text = text.strip().strip("`").strip()
    text = _LHS.sub("", text, count=1)
    return text.rstrip(";").strip()


def extract_test_params(reply: str) -> dict[str, float]:
    m = _PARAMS_LINE.search(reply)
    if not m:
        return {}
    try:
        obj = json.loads(m.group(1))
    except json.JSONDecodeError:
        return {}
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v):
                out[str(k)] = float(v)
    return out


def check_source(source: str, signature: FunctionSignature, card: EquationCard | None = None) -> ParamModel:
    """Parse ``source`` and check its names against the signature and card."""
    if not source:
        raise GenerationStepError("codegen", "no expression found in reply")
    try:
        model = signature.model(source)
    except DSLError as exc:
        raise GenerationStepError("codegen", f"expression {source!r} does not parse: {exc}") from exc
    except ValueError as exc:
        raise GenerationStepError("codegen", str(exc)) from exc
    used_vars, _ = free_names(model.expr)
    data_names = {signature.variable, *signature.covariates}
    if not used_vars & data_names:
        raise GenerationStepError("codegen", f"expression does not use {' or '.join(sorted(data_names))}")
    if not model.params:
        raise GenerationStepError("codegen", "expression has no fit parameters")
    if card is not None and card.parameters and len(model.params) > len(card.parameters):
        raise GenerationStepError(
            "codegen",
            f"expression has {len(model.params)} parameters but the equation declares {len(card.parameters)}",
        )
    return model


def codegen(card: EquationCard, signature: FunctionSignature | str, backend: ChatBackend,
            settings: ChatSettings = ChatSettings()) -> CodegenOutput:
    signature = _as_signature(signature)
    params = "\n".join(f"- {k}: {v}" for k, v in card.parameters.items()) or "(none listed)"
    if card.unit_notes:
        params += "\n" + card.unit_notes
    prompt = render_prompt(
        "codegen",
        equation=card.equation,
        parameters=params,
        variable=signature.variable,
        bound_names=signature.prompt_note(),
    )
    reply = ask(backend, settings, CODEGEN_SYSTEM, prompt)
    source = extract_expression(reply)
    check_source(source, signature, card)
    return CodegenOutput(source, extract_test_params(reply))


# --------------------------------------------------------------------------
# Step 3: testing


def probe_points(x: np.ndarray, count: int = PROBES) -> np.ndarray:
    """Endpoint-inclusive probes; log-spaced when x > 0 spans over a decade."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if lo > 0 and hi / lo > 10:
        return np.logspace(math.log10(lo), math.log10(hi), count)
    return np.linspace(lo, hi, count)


def _probe_rows(data: Dataset, count: int) -> np.ndarray:
    order = data.sort_order()
    picks = np.unique(np.round(np.linspace(0, data.n - 1, count)).astype(int))
    return order[picks]


def test_function(model: ParamModel, data: Dataset, test_params: Mapping[str, float] | None = None,
                  band_factor: float = 10.0) -> TestReport:
    """Evaluate at sample inputs and check outputs are finite and in band.

    Parameters missing from ``test_params`` are set to 1.0. Models with
    covariates are probed at spread data rows, since a synthetic x would
    have no matching covariate values.
    """
    if band_factor < 1:
        raise ValueError("band_factor must be >= 1")
    test_params = dict(test_params or {})
    theta = {p: float(test_params.get(p, 1.0)) for p in model.params}
    ymin, ymax = float(data.y.min()), float(data.y.max())
    lo = min(ymin / band_factor, ymin * band_factor)
    hi = max(ymax * band_factor, ymax / band_factor)

    if model.covariates:
        rows = _probe_rows(data, PROBES)
        envs = []
        for r in rows:
            env = {model.variable: np.array([data.x[r]]), **model.constants}
            env.update({c: np.array([data.extra[c][r]]) for c in model.covariates if c in data.extra})
            envs.append((float(data.x[r]), env))
    else:
        envs = [(float(x), {model.variable: np.array([x]), **model.constants}) for x in probe_points(data.x)]

    probes, failures = [], []
    for x, env in envs:
        try:
            y = float(evaluate_array(model.expr, env, theta, n=1)[0])
        except (DomainError, DSLError) as exc:
            probes.append(Probe(x, theta, math.nan, False))
            failures.append(f"x={x:.4g}: {exc}")
            continue
        ok = lo <= y <= hi
        probes.append(Probe(x, theta, y, ok))
        if not ok:
            failures.append(f"x={x:.4g}: output {y:.4g} outside [{lo:.4g}, {hi:.4g}]")
    return TestReport(not failures, tuple(probes), (lo, hi), tuple(failures))


test_function.__test__ = False  # keep pytest from collecting it on import


# --------------------------------------------------------------------------
# Whole pipeline


def build_function(card: EquationCard, source: str, signature: FunctionSignature | str, data: Dataset,
                   test_params: Mapping[str, float] | None = None, band_factor: float = 10.0,
                   attempts: Sequence[Attempt] = ()) -> GeneratedFunction:
    signature = _as_signature(signature)
    model = check_source(source, signature, card)
    report = test_function(model, data, test_params, band_factor)
    if not report.passed:
        raise GenerationStepError("test", "; ".join(report.failures))
    return GeneratedFunction(
        card=card,
        dsl_source=source,
        expr=model.expr,
        variable=signature.variable,
        params=model.params,
        test_report=report,
        model=model,
        test_params=dict(test_params or {}),
        attempts=tuple(attempts),
    )


def _pipeline(first_step, signature, data, backend, settings, retries, band_factor) -> GeneratedFunction:
    if retries < 0:
        raise ValueError("retries must be >= 0")
    attempts: list[Attempt] = []
    for k in range(1, retries + 2):
        step = "recall"
        try:
            card = first_step()
            step = "codegen"
            out = codegen(card, signature, backend, settings)
            step = "test"
            fn = build_function(card, out.source, signature, data, out.test_params, band_factor)
        except GenerationStepError as exc:
            attempts.append(Attempt(k, False, exc.step, str(exc)))
            continue
        except (LLMError, ValueError) as exc:
            attempts.append(Attempt(k, False, step, f"{step}: {exc}"))
            continue
        attempts.append(Attempt(k, True, "test", "ok"))
        return GeneratedFunction(**{**fn.__dict__, "attempts": tuple(attempts)})
    raise NoEquation(attempts)


def generate_function(context: str, signature: FunctionSignature | str, data: Dataset, backend: ChatBackend,
                      settings: ChatSettings = ChatSettings(), retries: int = 2,
                      band_factor: float = 10.0) -> GeneratedFunction:
    """Recall, translate and test an equation, retrying the whole pipeline.

    Raises :class:`NoEquation` after ``retries + 1`` failed attempts.
    """
    signature = _as_signature(signature)
    return _pipeline(lambda: recall_equation(context, backend, settings),
                     signature, data, backend, settings, retries, band_factor)


def generate_strain_function(base_equation: str, context: str, signature: FunctionSignature | str,
                             data: Dataset, backend: ChatBackend, settings: ChatSettings = ChatSettings(),
                             retries: int = 2, band_factor: float = 10.0) -> GeneratedFunction:
    """As :func:`generate_function`, with recall replaced by a modification prompt."""
    signature = _as_signature(signature)
    return _pipeline(lambda: modify_for_strain(base_equation, context, backend, settings),
                     signature, data, backend, settings, retries, band_factor)
