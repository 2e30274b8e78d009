"""Hand-coded reference relationships used as oracles and data generators.

Kuhn-type gaps are computed in hartree atomic units (hbar = m_e = 1, so
h = 2*pi and h^2 / (8 m_e) = pi^2 / 2). Convert to eV only for display.

The tension term ``gamma(eps) = gain * eps * (1 - eps / peak)`` is kept in
its printed form: it vanishes at ``eps = peak`` and has its maximum at
``peak / 2``, even though the modelled tension response is described as
peaking at 25 % strain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

H_PLANCK = 2 * math.pi
M_ELECTRON = 1.0
HARTREE_TO_EV = 27.2114
KINETIC_PREFACTOR = H_PLANCK ** 2 / (8 * M_ELECTRON)  # == pi**2 / 2

KUHN_FORMS = ("canonical", "recall_gpt5", "recall_gpt4")


@dataclass(frozen=True)
class HallPetchParams:
    sigma0: float  # MPa
    k: float  # MPa * um^0.5


@dataclass(frozen=True)
class ParisParams:
    C: float  # (m/cycle) / (MPa sqrt(m))^m
    m: float


@dataclass(frozen=True)
class KuhnParams:
    V0: float  # hartree
    form: str = "canonical"

    def __post_init__(self):
        if self.form not in KUHN_FORMS:
            raise ValueError(f"unknown Kuhn form {self.form!r}")


@dataclass(frozen=True)
class StrainKuhnParams:
    s: float
    l0: float  # bohr
    v0: float  # hartree
    tension_gain: float = 2.5
    peak_strain: float = 0.25

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("monomer count s must be >= 2")
        if self.l0 <= 0:
            raise ValueError("reference length l0 must be positive")


def _positive(name, v):
    if np.any(np.asarray(v) <= 0):
        raise ValueError(f"{name} must be positive")


def hall_petch(d, p: HallPetchParams):
    _positive("grain size d", d)
    return p.sigma0 + p.k * np.power(d, -0.5)


def paris(dK, p: ParisParams):
    _positive("stress intensity range dK", dK)
    return p.C * np.power(dK, p.m)


def kuhn_gap(N, L, p: KuhnParams):
    if np.any(np.asarray(N) < 2):
        raise ValueError("pi-electron count N must be >= 2")
    _positive("chain length L", L)
    N = np.asarray(N, dtype=float)
    L = np.asarray(L, dtype=float)
    kinetic = KINETIC_PREFACTOR / L ** 2
    if p.form == "canonical":
        return kinetic * (N + 1) + p.V0 * (1 - 1 / N)
    if p.form == "recall_gpt5":
        return kinetic * (N + 1) + p.V0
    return kinetic * N + p.V0


def strain_delta(eps):
    eps = np.asarray(eps, dtype=float)
    return np.where(eps <= 0, eps, eps ** 2)


def strain_gamma(eps, tension_gain: float = 2.5, peak_strain: float = 0.25):
    eps = np.asarray(eps, dtype=float)
    return tension_gain * eps * (1 - eps / peak_strain)


def strain_kuhn(eps, p: StrainKuhnParams):
    delta = strain_delta(eps)
    if np.any(1 + delta <= 0):
        raise ValueError("strain collapses the chain length (1 + delta <= 0)")
    gamma = strain_gamma(eps, p.tension_gain, p.peak_strain)
    length = p.l0 * (1 + delta)
    return KINETIC_PREFACTOR * (p.s + 1) / length ** 2 + p.v0 * (1 + gamma) * (1 - 1 / p.s)


# Analytic partial derivatives with respect to the fit parameters.


def hall_petch_partials(d, p: HallPetchParams) -> dict[str, np.ndarray]:
    d = np.asarray(d, dtype=float)
    return {"sigma0": np.ones_like(d), "k": d ** -0.5}


def paris_partials(dK, p: ParisParams) -> dict[str, np.ndarray]:
    dK = np.asarray(dK, dtype=float)
    power = dK ** p.m
    return {"C": power, "m": p.C * power * np.log(dK)}


def kuhn_partials(N, L, p: KuhnParams) -> dict[str, np.ndarray]:
    N = np.asarray(N, dtype=float)
    if p.form == "canonical":
        return {"V0": 1 - 1 / N}
    return {"V0": np.ones_like(N)}


def strain_kuhn_partials(eps, p: StrainKuhnParams) -> dict[str, np.ndarray]:
    """Partials with respect to v0 and l0."""
    stretch = 1 + strain_delta(eps)
    gamma = strain_gamma(eps, p.tension_gain, p.peak_strain)
    return {
        "v0": (1 + gamma) * (1 - 1 / p.s),
        "l0": -2 * KINETIC_PREFACTOR * (p.s + 1) / (p.l0 ** 3 * stretch ** 2),
    }


# DSL forms of the same relationships. ``pi`` is bound as a constant.
HALL_PETCH_DSL = "sigma0 + k * d^(-0.5)"
PARIS_DSL = "C * dK^m"
KUHN_DSL = {
    "canonical": "(pi^2/2) * (N + 1) / L^2 + V0 * (1 - 1/N)",
    "recall_gpt5": "(pi^2/2) * (N + 1) / L^2 + V0",
    "recall_gpt4": "(pi^2/2) * N / L^2 + V0",
}
STRAIN_KUHN_DSL = (
    "(pi^2/2) * (s + 1) / (l0 * (1 + piecewise(eps <= 0 : eps ; eps^2)))^2"
    " + v0 * (1 + 2.5 * eps * (1 - eps/0.25)) * (1 - 1/s)"
)
