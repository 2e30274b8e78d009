"""Trace persistence, result export and diagnostic plots."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .datastore import Dataset
from .state import AgentState, HistoryEntry
from .toolregistry import fmt_num

EXPORT_FORMATS = {"json": ".json", "csv": ".csv", "table": ".txt", "table-text": ".txt"}
PROVENANCE = {
    "parametric_recall": "LLM knowledge",
    "literature_extraction": "literature extraction",
    "strain_modification": "LLM modification of the base equation",
}
LINEARIZATIONS = ("inverse_sqrt", "loglog", "parity")


class ReportError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Traces


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def trace_lines(state: AgentState, config: dict[str, Any] | None = None, normalize: bool = False) -> list[str]:
    header = {
        "header": {
            "config": dict(config or {}),
            "status": state.status,
            "iterations": len(state.history),
        }
    }
    lines = [_dumps(header)]
    for e in state.history:
        d = e.to_dict()
        if normalize:
            d["timestamp"] = None
        lines.append(_dumps(d))
    return lines


def trace_to_jsonl(state: AgentState, path: str | Path, config: dict[str, Any] | None = None,
                   normalize: bool = False) -> None:
    """Header line (config + final status) followed by one line per entry.

    ``normalize`` blanks the wall-clock timestamps so replayed runs can be
    compared byte for byte.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(trace_lines(state, config, normalize)) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write trace {path}: {exc}") from exc


def read_trace(path: str | Path) -> tuple[dict[str, Any], list[HistoryEntry]]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ReportError(f"{path}: empty trace")
    header = json.loads(lines[0])
    if "header" not in header:
        raise ReportError(f"{path}: first line is not a trace header")
    return header["header"], [HistoryEntry.from_dict(json.loads(ln)) for ln in lines[1:]]


def normalize_trace_text(text: str) -> str:
    """Blank per-entry timestamps in an already written trace."""
    out = []
    for ln in text.splitlines():
        obj = json.loads(ln)
        if "timestamp" in obj:
            obj["timestamp"] = None
        out.append(_dumps(obj))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Export


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def results_dict(state: AgentState, task: str = "") -> dict[str, Any]:
    if state.model is None:
        raise ReportError("no fitted model to export")
    if state.validation is None:
        raise ReportError("fit has not been validated yet")
    fn = state.function
    v = state.validation
    out: dict[str, Any] = {
        "task": task,
        "equation": {
            "source": fn.dsl_source,
            "text": fn.card.equation,
            "variable": fn.variable,
            "provenance": PROVENANCE.get(fn.card.source, fn.card.source),
        },
        "parameters": {k: _num(x) for k, x in state.model.params.items()},
        "resnorm": _num(state.model.resnorm),
        "iterations": state.model.iterations,
        "converged": state.model.converged,
        "fit_space": state.model.fit_space,
        "metrics": {
            "r2": _num(v.r2),
            "adjusted_r2": _num(v.adjusted_r2),
            "rmse": _num(v.rmse),
            "r2_log": _num(v.r2_log),
            "rmse_log": _num(v.rmse_log),
            "n": v.n,
            "p": v.p,
        },
        "region": None,
    }
    if state.region is not None:
        r = state.region
        out["region"] = {
            "method": r.method,
            "x_min": r.x_min,
            "x_max": r.x_max,
            "points_selected": r.points_selected,
            "points_total": r.points_total,
            "slope_min": r.slope_min,
            "slope_max": r.slope_max,
        }
    return out


def _metric_rows(res: dict[str, Any]) -> list[tuple[str, Any]]:
    rows = [("resnorm", res["resnorm"])]
    rows += [(k, res["metrics"][k]) for k in ("r2", "adjusted_r2", "rmse", "r2_log", "rmse_log")]
    return rows


def export_results(state: AgentState, fmt: str, path: str | Path, task: str = "") -> Path:
    """Write fitted parameters, metrics and provenance as json, csv or a text table."""
    if fmt not in EXPORT_FORMATS:
        raise ReportError(f"unknown export format {fmt!r}; use one of {', '.join(EXPORT_FORMATS)}")
    res = results_dict(state, task)
    if fmt == "json":
        text = json.dumps(res, indent=2, ensure_ascii=False) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(res["parameters"]))
        w.writerow([repr(x) for x in res["parameters"].values()])
        for k, x in _metric_rows(res):
            w.writerow([k, "" if x is None else repr(x)])
        w.writerow(["equation", res["equation"]["source"]])
        w.writerow(["equation_source", res["equation"]["provenance"]])
        text = buf.getvalue()
    else:
        width = max(len(k) for k in [*res["parameters"], "adjusted_r2"]) + 2
        lines = [
            f"Equation: {res['equation']['source']}",
            f"Equation source: {res['equation']['provenance']}",
            "",
            f"{'parameter'.ljust(width)}value",
        ]
        lines += [f"{k.ljust(width)}{fmt_num(x)}" for k, x in res["parameters"].items()]
        lines += ["", f"{'metric'.ljust(width)}value"]
        lines += [f"{k.ljust(width)}{fmt_num(x)}" for k, x in _metric_rows(res)]
        if res["region"]:
            r = res["region"]
            lines += ["", f"region ({r['method']}): [{fmt_num(r['x_min'])}, {fmt_num(r['x_max'])}], "
                          f"{r['points_selected']}/{r['points_total']} points"]
        text = "\n".join(lines) + "\n"
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


# --------------------------------------------------------------------------
# Plots


def _series_rows(series: dict[str, tuple[np.ndarray, np.ndarray]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "y"])
    for name, (xs, ys) in series.items():
        for a, b in zip(xs, ys):
            w.writerow([name, repr(float(a)), repr(float(b))])
    return buf.getvalue()


def read_sidecar(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out: dict[str, tuple[list, list]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            xs, ys = out.setdefault(row["series"], ([], []))
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}


def plot_series(state: AgentState, linearization: str = "parity") -> dict[str, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Numeric content of the three diagnostic figures."""
    if linearization not in LINEARIZATIONS:
        raise ReportError(f"unknown linearization {linearization!r}")
    if state.data is None or state.model is None or state.function is None:
        raise ReportError("plots need loaded data and a fitted model")
    model = state.function.model
    params = state.model.params
    full = state.data
    fit = state.fit_data()
    order = fit.sort_order()
    fx = fit.x[order]
    fy = fit.y[order]
    pred = model.predict(params, fit)[order]

    original = {"data": (full.x, full.y)}
    if state.region is not None:
        original["region"] = (fx, fy)
    if model.covariates:
        original["fit"] = (fx, pred)
    else:
        lo, hi = float(fx.min()), float(fx.max())
        if lo > 0 and hi / lo > 10:
            grid = np.logspace(math.log10(lo), math.log10(hi), 200)
        else:
            grid = np.linspace(lo, hi, 200)
        g = Dataset(grid, np.zeros_like(grid), fit.x_name, fit.y_name)
        original["fit"] = (grid, model.predict(params, g))

    if linearization == "inverse_sqrt":
        linear = {"data": (fx ** -0.5, fy), "fit": (fx ** -0.5, pred)}
    elif linearization == "loglog":
        linear = {"data": (np.log10(fx), np.log10(fy)), "fit": (np.log10(fx), np.log10(pred))}
    else:
        linear = {"data": (fy, pred), "identity": (np.array([fy.min(), fy.max()]), np.array([fy.min(), fy.max()]))}

    if state.model.fit_space == "log10":
        resid = np.log10(fy) - np.log10(pred)
    else:
        resid = fy - pred
    residuals = {"residual": (fx, resid)}
    return {"fig_original": original, "fig_linearized": linear, "fig_residuals": residuals}


_AXES = {
    "inverse_sqrt": ("{x}^(-1/2)", "{y}"),
    "loglog": ("log10 {x}", "log10 {y}"),
    "parity": ("observed {y}", "predicted {y}"),
}


def emit_plots(state: AgentState, directory: str | Path, linearization: str = "parity") -> list[Path]:
    """Write three SVG figures, each with a CSV sidecar of its plotted series."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = plot_series(state, linearization)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    xs, ys = state.data.x_symbol, state.data.y_symbol
    labels = {
        "fig_original": (xs, ys, "Data and fitted model"),
        "fig_linearized": (*(a.format(x=xs, y=ys) for a in _AXES[linearization]), "Linearized view"),
        "fig_residuals": (xs, "residual (log10)" if state.model.fit_space == "log10" else "residual", "Residuals"),
    }
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "fitagent", "svg.fonttype": "none"}):
        for name, ser in series.items():
            fig, ax = plt.subplots(figsize=(6, 4.5))
            for label, (a, b) in ser.items():
                if label in ("fit", "identity"):
                    ax.plot(a, b, "-", label=label)
                elif label == "residual":
                    ax.axhline(0.0, color="0.6", lw=0.8)
                    ax.plot(a, b, "o", label=label)
                else:
                    ax.plot(a, b, "o", label=label, alpha=0.5 if label == "data" and "region" in ser else 1.0)
            if name == "fig_original" and linearization == "loglog":
                ax.set_xscale("log")
                ax.set_yscale("log")
            xl, yl, title = labels[name]
            ax.set_xlabel(xl)
            ax.set_ylabel(yl)
            ax.set_title(title)
            ax.legend()
            fig.tight_layout()
            svg = directory / f"{name}.svg"
            fig.savefig(svg, format="svg", metadata={"Date": None})
            plt.close(fig)
            side = directory / f"{name}.csv"
            side.write_text(_series_rows(ser), encoding="utf-8")
            written += [svg, side]
    return written
