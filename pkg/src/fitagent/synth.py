"""Synthetic oracle datasets with known generating parameters."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .physmodels import (
    HARTREE_TO_EV,
    HallPetchParams,
    KuhnParams,
    ParisParams,
    StrainKuhnParams,
    hall_petch,
    kuhn_gap,
    paris,
    strain_kuhn,
)

HP_TRUE = HallPetchParams(sigma0=38.4577, k=9.4836)
PARIS_TRUE = ParisParams(C=8.7102e-12, m=3.2583)
PARIS_RANGE = (3.8, 36.8)
KUHN_V0 = 0.059506  # hartree
KUHN_LENGTH_PER_ELECTRON = 2.65  # bohr; synthetic stand-in for the zig-zag length
STRAIN_TRUE = StrainKuhnParams(s=10, l0=26.5, v0=KUHN_V0)
CASES = ("hall-petch", "paris", "kuhn", "strain")


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: np.ndarray  # shape (n, len(columns))

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(float(v)) for v in r])
        return path


def hall_petch_table(n: int = 13, noise: float = 0.0, seed: int = 0, unit: str = "um",
                     p: HallPetchParams = HP_TRUE) -> Table:
    """Grain sizes 3..23 um (or the same values in mm), optional Gaussian noise in MPa."""
    if unit not in ("um", "mm"):
        raise ValueError("unit must be 'um' or 'mm'")
    d = np.linspace(3.0, 23.0, n)
    if unit == "mm":
        d = d / 1000.0
    sigma = hall_petch(d, p)
    if noise > 0:
        sigma = sigma + np.random.default_rng(seed).normal(0.0, noise, n)
    return Table((f"d_{unit}", "sigma_MPa"), np.column_stack([d, sigma]))


def paris_table(n_low: int = 15, n_mid: int = 25, n_high: int = 10, slope_low: float = 8.0,
                slope_high: float = 9.0, noise: float = 0.0, seed: int = 0,
                p: ParisParams = PARIS_TRUE) -> Table:
    """Three-region crack-growth curve on an equal log10 spacing.

    The middle ``n_mid`` points span [3.8, 36.8] exactly and follow the
    Paris law; the tails continue the curve with steeper slopes.
    """
    lo, hi = PARIS_RANGE
    step = math.log10(hi / lo) / (n_mid - 1)
    u_mid = np.linspace(math.log10(lo), math.log10(hi), n_mid)
    u_low = math.log10(lo) - step * np.arange(n_low, 0, -1)
    u_high = math.log10(hi) + step * np.arange(1, n_high + 1)
    x = 10.0 ** np.concatenate([u_low, u_mid, u_high])
    y_lo, y_hi = paris(lo, p), paris(hi, p)
    y = np.concatenate([
        y_lo * (x[:n_low] / lo) ** slope_low,
        paris(x[n_low:n_low + n_mid], p),
        y_hi * (x[n_low + n_mid:] / hi) ** slope_high,
    ])
    x[n_low:n_low + n_mid][[0, -1]] = [lo, hi]
    if noise > 0:
        y = y * 10.0 ** np.random.default_rng(seed).normal(0.0, noise, y.size)
    return Table(("dK_MPa_sqrt_m", "dadN_m_per_cycle"), np.column_stack([x, y]))


def kuhn_table(form: str = "canonical", v0: float = KUHN_V0, rings=range(6, 17)) -> Table:
    """Helicene gaps in hartree for n rings, N = 4n + 2 and L = 2.65 N bohr."""
    n = np.array(list(rings), dtype=float)
    N = 4 * n + 2
    L = KUHN_LENGTH_PER_ELECTRON * N
    gap = kuhn_gap(N, L, KuhnParams(v0, form))
    return Table(("n_rings", "L_bohr", "gap_hartree"), np.column_stack([n, L, gap]))


def strain_table(n: int = 15, p: StrainKuhnParams = STRAIN_TRUE) -> Table:
    """Strain-modified gap in eV on eps in [-0.1, 0.25]."""
    eps = np.linspace(-0.1, 0.25, n)
    gap = strain_kuhn(eps, p) * HARTREE_TO_EV
    return Table(("epsilon", "gap_eV"), np.column_stack([eps, gap]))


def make_case(case: str, seed: int = 0, noise: float = 0.0, unit: str = "um") -> Table:
    if case == "hall-petch":
        return hall_petch_table(noise=noise, seed=seed, unit=unit)
    if case == "paris":
        return paris_table(noise=noise, seed=seed)
    if case == "kuhn":
        return kuhn_table()
    if case == "strain":
        return strain_table()
    raise ValueError(f"unknown case {case!r}; choose from {', '.join(CASES)}")
