"""One-dimensional minimization of risk curves over the ridge parameter.

Golden-section search in log-lambda space, guarded by a coarse grid so a
multi-modal curve cannot trap the search in a local basin.  Callers supply
a deterministic curve (common random numbers baked in) and, optionally, the
analytic null-estimator risk standing in for the lambda -> infinity limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LambdaSearchResult", "minimize_over_lambda", "sweep_lambda"]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_GRID_POINTS = 40


@dataclass(frozen=True)
class LambdaSearchResult:
    lambda_opt: float
    risk_at_opt: float
    bracket: tuple[float, float]
    evaluations: int
    converged: bool
    analytic_lambda: float | None = None


class _CountingCurve:
    def __init__(self, curve):
        self._curve = curve
        self.evaluations = 0

    def __call__(self, lam: float) -> float:
        self.evaluations += 1
        value = float(self._curve(lam))
        if not math.isfinite(value):
            raise ValueError(f"curve returned non-finite value at lambda={lam!r}")
        return value


def _golden_section_log(curve, lo: float, hi: float, rel_tol: float):
    """Minimize curve(exp(t)) on [log lo, log hi] to relative width rel_tol."""
    a, b = math.log(lo), math.log(hi)
    c = b - (b - a) * _INVPHI
    d = a + (b - a) * _INVPHI
    fc, fd = curve(math.exp(c)), curve(math.exp(d))
    while (b - a) > rel_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INVPHI
            fc = curve(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INVPHI
            fd = curve(math.exp(d))
    t = c if fc < fd else d
    return math.exp(t), min(fc, fd), (math.exp(a), math.exp(b))


def minimize_over_lambda(
    curve,
    lo: float,
    hi: float,
    rel_tol: float = 1e-4,
    null_risk: float | None = None,
) -> LambdaSearchResult:
    """Minimize a risk curve over lambda in [lo, hi].

    The curve is probed on a coarse log grid (plus a short linear segment
    near zero when lo == 0), then refined by golden-section search in log
    space around the grid minimum.  The final answer is the best of the
    refined candidate, the lower endpoint, and - when ``null_risk`` is
    given - the analytic lambda -> infinity limit, reported at ``hi``.
    """
    if lo > hi:
        raise ValueError(f"need lo <= hi, got lo={lo} > hi={hi}")
    if lo < 0:
        raise ValueError("lo must be >= 0")
    f = _CountingCurve(curve)

    if hi == lo:
        val = f(lo)
        return LambdaSearchResult(lo, val, (lo, hi), f.evaluations, True)

    pos_lo = lo if lo > 0 else hi * 1e-12
    grid = list(np.geomspace(pos_lo, hi, _GRID_POINTS))
    if lo == 0.0:
        grid = [0.0] + list(np.linspace(0.0, pos_lo, 5)[1:-1]) + grid
    else:
        grid = [lo] + grid
    values = [f(g) for g in grid]
    best = int(np.argmin(values))

    # refine inside the grid cell around the coarse minimum
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, len(grid) - 1)]
    left = max(left, pos_lo)
    right = max(right, left * (1 + rel_tol))
    lam, val, bracket = _golden_section_log(f, left, right, rel_tol)
    if values[best] < val:
        lam, val = grid[best], values[best]
        converged = best in (0, len(grid) - 1)  # endpoint minimum is exact
    else:
        converged = True

    if values[0] <= val:  # lower endpoint wins
        lam, val = grid[0], values[0]
        bracket = (grid[0], bracket[1])
    if null_risk is not None and null_risk < val:
        lam, val = hi, float(null_risk)
        bracket = (bracket[0], hi)
    lam = min(max(lam, lo), hi)
    return LambdaSearchResult(
        lambda_opt=lam,
        risk_at_opt=val,
        bracket=bracket,
        evaluations=f.evaluations,
        converged=converged,
    )


def sweep_lambda(curve, grid) -> list[tuple[float, float]]:
    """Evaluate the curve on an ordered lambda grid."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")
    return [(float(lam), float(curve(lam))) for lam in grid]
