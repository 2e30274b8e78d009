"""Equation extraction from arXiv HTML pages and a small LaTeX-to-DSL bridge."""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import urlparse
from urllib.request import url2pathname

import httpx

from .assets import render_prompt
from .llm import ChatBackend, ChatSettings, ask

DEFAULT_HTML_BASE = "https://ar5iv.org/html"
WINDOW_CHARS = 3000
CHECKLIST_ITEMS = (
    "left-hand side is the energy gap",
    "contains h^2",
    "contains 8m in a denominator",
    "contains L^2 in a denominator",
    "contains the factor (N+1)",
    "contains V_0",
    "contains the factor (1 - 1/N)",
    "contains an equality sign",
    "contains no prose",
    "is a single equation",
    "braces are balanced",
)
EXTRACT_SYSTEM = "You extract equations from scientific text. Follow the reply format exactly."

_ARXIV_ID = re.compile(r"^(\d{4}\.\d{4,5}|[a-z\-]+(\.[A-Z]{2})?/\d{7})(v\d+)?$")


class ExtractionError(RuntimeError):
    pass


class FetchError(ExtractionError):
    pass


class LatexError(ValueError):
    pass


@dataclass(frozen=True)
class ExtractedEquation:
    latex: str
    confidence: tuple[int, int]
    source_url: str
    context_window: str

    def __post_init__(self):
        score, total = self.confidence
        if not 0 <= score <= total:
            raise ValueError(f"confidence {score}/{total} out of range")
        if not self.latex.strip():
            raise ValueError("latex is empty")


# --------------------------------------------------------------------------
# Fetching


class _TextExtractor(HTMLParser):
    """Visible text with <math> elements replaced by their LaTeX alttext."""

    _SKIP = {"script", "style", "head", "noscript"}
    _BLOCK = {"p", "div", "br", "li", "tr", "h1", "h2", "h3", "h4", "h5", "h6", "table", "section"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip = 0
        self._math = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip += 1
        elif tag == "math":
            if self._math == 0 and not self._skip:
                alt = dict(attrs).get("alttext")
                if alt:
                    self.parts.append(f" ${alt}$ ")
            self._math += 1
        elif tag in self._BLOCK:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip:
            self._skip -= 1
        elif tag == "math" and self._math:
            self._math -= 1
        elif tag in self._BLOCK:
            self.parts.append("\n")

    def handle_data(self, data):
        if not self._skip and not self._math:
            self.parts.append(data)

    def text(self) -> str:
        raw = "".join(self.parts)
        lines = (" ".join(line.split()) for line in raw.splitlines())
        return "\n".join(line for line in lines if line)


def html_to_text(html: str) -> str:
    p = _TextExtractor()
    p.feed(html)
    p.close()
    return p.text()


def text_window(text: str, keywords=(), width: int = WINDOW_CHARS) -> str:
    """A ``width``-character slice centred on the first keyword hit."""
    pos = -1
    for kw in keywords:
        pos = text.find(kw)
        if pos >= 0:
            break
    if pos < 0 or len(text) <= width:
        return text[:width]
    start = max(0, min(pos - width // 2, len(text) - width))
    return text[start:start + width]


def paper_url(paper_id: str, base: str = DEFAULT_HTML_BASE) -> str:
    if not _ARXIV_ID.match(paper_id):
        raise FetchError(f"not an arXiv id: {paper_id!r}")
    return f"{base.rstrip('/')}/{paper_id}"


def _get(url: str, timeout: float) -> str:
    parsed = urlparse(url)
    if parsed.scheme == "file":
        path = Path(url2pathname(parsed.path))
        for candidate in (path, path.with_suffix(".html"), Path(str(path) + ".html")):
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8")
        raise FetchError(f"no such file: {path}")
    try:
        resp = httpx.get(url, timeout=timeout, follow_redirects=True)
    except httpx.HTTPError as exc:
        raise FetchError(f"GET {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise FetchError(f"GET {url} returned HTTP {resp.status_code}")
    return resp.text


def fetch_arxiv_html(paper_id: str, keywords=(), base: str = DEFAULT_HTML_BASE,
                     timeout: float = 60.0) -> tuple[str, str]:
    """Fetch a rendered paper and return ``(url, window)``.

    The window holds at most 3000 characters of visible text, with math
    shown as its LaTeX alttext. A ``file:`` base reads local pages, trying
    ``<id>`` and ``<id>.html``.
    """
    url = paper_url(paper_id, base)
    html = _get(url, timeout)
    if not html.strip():
        raise FetchError(f"empty page at {url}")
    text = html_to_text(html)
    if not text:
        raise FetchError(f"no visible text at {url}")
    return url, text_window(text, keywords)


def extract_text_from_pdf(path: str) -> str:
    """Always-degraded PDF reader.

    PDF parsing is out of scope; this returns a single character so the
    agent has a failure to notice and route around.
    """
    return " "


# --------------------------------------------------------------------------
# Backend extraction

_LATEX_LINE = re.compile(r"^[ \t]*LATEX:[ \t]*(.*)$", re.M)
_CHECK_HEAD = re.compile(r"^[ \t]*CHECKLIST:[ \t]*$", re.M)
_CHECK_ITEM = re.compile(r"^[ \t]*(\d{1,2})[.)][ \t]*(?:[^\n]*?:[ \t]*)?(yes|no)\b", re.M | re.I)


def parse_extraction(reply: str, url: str, window: str) -> ExtractedEquation:
    m = _LATEX_LINE.search(reply)
    head = _CHECK_HEAD.search(reply)
    if not m or not head:
        raise ExtractionError("reply lacks the LATEX/CHECKLIST markers")
    latex = m.group(1).strip().strip("$").strip()
    if not latex:
        raise ExtractionError("LATEX section is empty")
    answers = {}
    for item in _CHECK_ITEM.finditer(reply, head.end()):
        k = int(item.group(1))
        if 1 <= k <= len(CHECKLIST_ITEMS):
            answers.setdefault(k, item.group(2).lower() == "yes")
    score = sum(answers.values())
    return ExtractedEquation(latex, (score, len(CHECKLIST_ITEMS)), url, window)


def extract_equation_from_html(window: str, target: str, backend: ChatBackend,
                               settings: ChatSettings = ChatSettings(), url: str = "") -> ExtractedEquation:
    if not window.strip():
        raise ExtractionError("empty text window")
    reply = ask(backend, settings, EXTRACT_SYSTEM, render_prompt("extract", target=target, window=window))
    return parse_extraction(reply, url, window)


def structural_score(latex: str) -> tuple[int, int]:
    """Independent count of the checklist items that can be checked by text."""
    flat = re.sub(r"\s+", "", latex)
    lhs, eq, rhs = flat.partition("=")
    checks = [
        bool(eq) and ("\\DeltaE" in lhs or "E_g" in lhs or "\\Delta{E}" in lhs),
        "h^2" in flat or "h^{2}" in flat,
        "8m" in flat,
        "L^2" in flat or "L^{2}" in flat,
        "(N+1)" in flat,
        "V_0" in flat or "V_{0}" in flat,
        bool(re.search(r"1-\\frac\{1\}\{N\}|1-1/N", flat)),
        bool(eq),
        not re.search(r"[A-Za-z]{4,}", re.sub(r"\\[A-Za-z]+", "", flat)),
        flat.count("=") == 1,
        _balanced(flat),
    ]
    return sum(checks), len(checks)


def _balanced(s: str) -> bool:
    depth = {"{": 0, "(": 0, "[": 0}
    close = {"}": "{", ")": "(", "]": "["}
    for ch in s:
        if ch in depth:
            depth[ch] += 1
        elif ch in close:
            depth[close[ch]] -= 1
            if depth[close[ch]] < 0:
                return False
    return all(v == 0 for v in depth.values())


# --------------------------------------------------------------------------
# LaTeX -> DSL

_DROP = {"\\left", "\\right", "\\,", "\\;", "\\!", "\\quad", "\\displaystyle"}
_TIMES = {"\\cdot", "\\times"}
_GREEK = {f"\\{g}": g for g in (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "kappa", "lambda", "mu", "nu",
    "xi", "pi", "rho", "sigma", "tau", "phi", "chi", "psi", "omega",
)}
_GREEK["\\varepsilon"] = "epsilon"
_TEX_TOKEN = re.compile(
    r"\s*(?:(\\[A-Za-z]+|\\[,;!])|(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+)|([A-Za-z])|([{}()\[\]^_+\-*/=]))"
)


def _tex_tokens(latex: str) -> list[str]:
    out, pos = [], 0
    latex = latex.strip()
    while pos < len(latex):
        m = _TEX_TOKEN.match(latex, pos)
        if not m:
            if latex[pos:].strip() == "":
                break
            raise LatexError(f"unexpected character {latex[pos]!r} at offset {pos}")
        tok = next(g for g in m.groups() if g is not None)
        pos = m.end()
        if tok in _DROP:
            continue
        out.append(tok)
    return out


class _TexParser:
    """Turns a token stream into DSL text; implicit products become ``*``."""

    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, t):
        got = self.take()
        if got != t:
            raise LatexError(f"unbalanced group: expected {t!r}, got {got!r}")

    def sequence(self, stop: set) -> str:
        parts: list[str] = []
        need_op = False
        while self.peek() is not None and self.peek() not in stop:
            t = self.peek()
            if t in ("+", "-", "*", "/"):
                self.take()
                parts.append(f" {t} " if parts else t)
                need_op = False
                continue
            if t in _TIMES:
                self.take()
                parts.append(" * ")
                need_op = False
                continue
            if t in ("}", ")", "]"):
                raise LatexError(f"unbalanced group: stray {t!r}")
            if t in ("^", "_"):
                raise LatexError(f"dangling {t!r}")
            atom = self.postfix(self.atom())
            if need_op:
                parts.append("*")
            parts.append(atom)
            need_op = True
        return "".join(parts)

    def group(self) -> str:
        t = self.take()
        if t == "{":
            body = self.sequence({"}"})
            self.expect("}")
            return f"({body})"
        if t is None:
            raise LatexError("unbalanced group: input ended early")
        if t.isdigit() and len(t) > 1:
            # an unbraced argument is one character: \frac12 is 1/2
            self.toks[self.i - 1:self.i] = [t[0], t[1:]]
            return t[0]
        self.i -= 1
        return self.atom()

    def atom(self) -> str:
        t = self.take()
        if t is None:
            raise LatexError("unbalanced group: input ended early")
        if t == "\\frac":
            num = self.group()
            den = self.group()
            return f"({_unwrap(num)})/({_unwrap(den)})"
        if t == "\\sqrt":
            return f"sqrt({_unwrap(self.group())})"
        if t in ("\\exp", "\\log", "\\ln"):
            name = {"\\exp": "exp", "\\log": "log", "\\ln": "log"}[t]
            return f"{name}({_unwrap(self.group())})"
        if t in _GREEK:
            return self.subscripted(_GREEK[t])
        if t == "\\Delta":
            nxt = self.peek()
            if nxt is not None and re.fullmatch(r"[A-Za-z]", nxt):
                self.take()
                return "Delta" + nxt
            return "Delta"
        if t.startswith("\\"):
            raise LatexError(f"unsupported macro {t}")
        if t in ("(", "["):
            close = ")" if t == "(" else "]"
            body = self.sequence({close})
            self.expect(close)
            return f"({body})"
        if t == "{":
            body = self.sequence({"}"})
            self.expect("}")
            return f"({body})"
        if re.fullmatch(r"[A-Za-z]", t):
            return self.subscripted(t)
        if re.match(r"[\d.]", t):
            return t
        raise LatexError(f"unexpected token {t!r}")

    def subscripted(self, name: str) -> str:
        if self.peek() == "_":
            self.take()
            return name + _subscript(self.take_group_raw())
        return name

    def take_group_raw(self) -> str:
        t = self.take()
        if t == "{":
            parts = []
            while self.peek() not in ("}", None):
                parts.append(self.take())
            self.expect("}")
            return "".join(parts)
        if t is None:
            raise LatexError("unbalanced group: input ended early")
        return t

    def postfix(self, atom: str) -> str:
        if self.peek() == "^":
            self.take()
            exp = self.group()
            return f"{atom}^{exp}"
        return atom


def _unwrap(s: str) -> str:
    if s.startswith("(") and s.endswith(")"):
        depth = 0
        for i, ch in enumerate(s):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0 and i < len(s) - 1:
                return s
        return s[1:-1]
    return s


def _subscript(raw: str) -> str:
    if not re.fullmatch(r"[A-Za-z0-9]+", raw):
        raise LatexError(f"unsupported subscript {raw!r}")
    return raw


def latex_to_dsl(latex: str) -> str:
    """Translate a small LaTeX subset into DSL source.

    Supported: ``\\frac``, ``\\sqrt``, ``^``, ``_`` (fused into the name,
    so ``V_0`` becomes ``V0``), ``\\left( ... \\right)``, parentheses,
    numbers, single-letter symbols, ``+ - \\cdot \\times``. Juxtaposition is
    multiplication. Anything left of ``=`` is dropped.
    """
    latex = latex.strip().strip("$").strip()
    if latex.count("=") > 1:
        raise LatexError("more than one '=' in the equation")
    if "=" in latex:
        latex = latex.split("=", 1)[1]
    toks = _tex_tokens(latex)
    if not toks:
        raise LatexError("empty equation")
    p = _TexParser(toks)
    out = p.sequence(set())
    if p.peek() is not None:
        raise LatexError(f"unbalanced group near {p.peek()!r}")
    return out
