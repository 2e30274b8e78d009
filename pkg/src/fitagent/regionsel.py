"""Selection of the power-law (Region II) window in log-log crack-growth data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datastore import Dataset


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class RegionSelection:
    indices: tuple[int, ...]  # into the original dataset, in ascending-x order
    x_min: float
    x_max: float
    points_selected: int
    points_total: int
    slope_min: float | None
    slope_max: float | None
    method: str  # "auto" | "manual"

    def apply(self, data: Dataset) -> Dataset:
        return data.subset(self.indices)


def local_slopes(u: np.ndarray, v: np.ndarray, window: int) -> np.ndarray:
    """Least-squares slope of ``v`` on ``u`` over a centered window.

    Entries within ``window // 2`` of either end are NaN.
    """
    half = window // 2
    out = np.full(u.size, np.nan)
    for i in range(half, u.size - half):
        uu = u[i - half:i + half + 1]
        vv = v[i - half:i + half + 1]
        du = uu - uu.mean()
        sxx = du @ du
        if sxx > 0:
            out[i] = (du @ (vv - vv.mean())) / sxx
    return out


def _line_sse(u, v) -> float:
    A = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    r = v - A @ coef
    return float(r @ r)


def _positive(data: Dataset) -> bool:
    return bool(np.all(data.x > 0) and np.all(data.y > 0))


def auto_select_region(
    data: Dataset,
    slope_band: tuple[float, float] = (2.0, 4.0),
    window: int = 5,
) -> RegionSelection:
    """Pick the longest contiguous run of points with an in-band local slope.

    Each interior point gets a slope from a centered ``window``-point fit in
    (log10 x, log10 y). The longest run of in-band centers wins; ties go to
    the run whose points lie closest to their own log-log line. The
    returned window spans every point used by the run's local fits, i.e.
    the run of centers widened by ``window // 2`` on each side.
    """
    lo, hi = slope_band
    if not lo < hi:
        raise RegionError(f"slope band must satisfy lo < hi, got {slope_band}")
    if window < 3 or window % 2 == 0:
        raise RegionError(f"window must be an odd count >= 3, got {window}")
    if data.n < window:
        raise RegionError(f"need at least {window} points, got {data.n}")
    if not _positive(data):
        raise RegionError("automatic region selection needs all x > 0 and y > 0")

    order = data.sort_order()
    u = np.log10(data.x[order])
    v = np.log10(data.y[order])
    slopes = local_slopes(u, v, window)
    marked = (slopes >= lo) & (slopes <= hi)
    if not marked.any():
        raise RegionError(f"no point has a local slope within [{lo:g}, {hi:g}]")

    half = window // 2
    runs = []
    start = None
    for i, m in enumerate(np.append(marked, False)):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))  # centers [start, i)
            start = None

    def key(run):
        a, b = run
        lo_i, hi_i = a - half, b - 1 + half
        return (-(b - a), _line_sse(u[lo_i:hi_i + 1], v[lo_i:hi_i + 1]), a)

    a, b = min(runs, key=key)
    lo_i, hi_i = a - half, b - 1 + half
    if hi_i - lo_i + 1 < 2:
        raise RegionError("best run has fewer than 2 points")
    sel = order[lo_i:hi_i + 1]
    inner = slopes[a:b]
    return RegionSelection(
        indices=tuple(int(i) for i in sel),
        x_min=float(data.x[sel].min()),
        x_max=float(data.x[sel].max()),
        points_selected=int(sel.size),
        points_total=data.n,
        slope_min=float(inner.min()),
        slope_max=float(inner.max()),
        method="auto",
    )


def manual_region(data: Dataset, x_min: float, x_max: float, window: int = 5) -> RegionSelection:
    """Select every point with ``x_min <= x <= x_max``."""
    if not x_min < x_max:
        raise RegionError(f"x_min must be below x_max, got [{x_min}, {x_max}]")
    order = data.sort_order()
    xs = data.x[order]
    sel = order[(xs >= x_min) & (xs <= x_max)]
    if sel.size < 2:
        raise RegionError(f"only {sel.size} point(s) within [{x_min:g}, {x_max:g}]")
    smin = smax = None
    sub = data.subset(sel)
    if _positive(sub) and sub.n >= window:
        s = local_slopes(np.log10(sub.x), np.log10(sub.y), window)
        s = s[np.isfinite(s)]
        if s.size:
            smin, smax = float(s.min()), float(s.max())
    return RegionSelection(
        indices=tuple(int(i) for i in sel),
        x_min=float(sub.x.min()),
        x_max=float(sub.x.max()),
        points_selected=int(sel.size),
        points_total=data.n,
        slope_min=smin,
        slope_max=smax,
        method="manual",
    )
