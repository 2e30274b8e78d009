"""Access to prompt templates and fixture files shipped inside the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from string import Template


def prompt_text(name: str) -> str:
    return resources.files("fitagent").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")


def render_prompt(name: str, **values: str) -> str:
    """Fill ``$name`` placeholders; JSON braces in templates stay literal."""
    return Template(prompt_text(name)).substitute(values)


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("fitagent").joinpath("fixtures", name)))
