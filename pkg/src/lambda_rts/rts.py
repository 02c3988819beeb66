"""Per-unit estimation of alpha-returns to scale.

For unit j the goodness-of-fit program is a two-variable LP

    max lam  s.t.  lam <= beta * f[k] + g[k]  (k in units),  beta >= 0

with ``beta = 1/alpha``. Its objective ``h(beta) = min_k (beta f[k] + g[k])``
is concave and piecewise linear, so the optimum is found exactly by
locating where the lower envelope of the increasing lines meets the
lower envelope of the others. The set of optimal ``beta`` is then read off
the constraints in closed form.

Line conventions on ``beta in [0, inf]``: a line with ``f = inf`` or
``g = inf`` is never binding (the unit cannot cover the evaluated point
at any alpha); a line with ``f = -inf`` only arises for a zero output
vector and pins the envelope at ``-inf``. At ``beta = inf`` a line is
``-inf``, ``g`` or ``inf`` according to the sign of ``f``.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .core import INF, Dataset, LogRatioRow, log_ratio_matrices, recip

DEGENERATE_WIDTH = 1e-9
BINDING_TOL = 1e-10
_FEAS_TOL = 1e-12
_MAX_BETA = sys.float_info.max


class InconsistentOptimumError(RuntimeError):
    """The supplied optimum leaves no feasible beta."""


class BetaInterval(NamedTuple):
    lo: float
    hi: float

    def contains(self, beta: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= beta <= self.hi + tol


@dataclass(frozen=True)
class AlphaInterval:
    """Closed interval ``[lo, hi]`` inside ``[0, inf]`` of optimal alphas."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0 <= self.lo <= self.hi):
            raise ValueError(f"invalid alpha interval [{self.lo}, {self.hi}]")

    @property
    def is_singleton(self) -> bool:
        return self.lo == self.hi

    def contains(self, alpha: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= alpha <= self.hi + tol

    def to_beta(self) -> BetaInterval:
        return BetaInterval(recip(self.hi), recip(self.lo))


class RtsClass(str, enum.Enum):
    IRS = "IRS"
    DRS = "DRS"
    CRS_NOT_REJECTED = "CRS"


@dataclass(frozen=True)
class SolverResult:
    """Optimum of the goodness-of-fit program for unit ``j``.

    ``lambda_star`` is the optimal log score (always <= 0 for sample
    units); ``beta_star`` is the reported maximizer and ``binding`` the
    constraints active there.
    """

    j: int
    lambda_star: float
    beta_star: float
    binding: frozenset[int]


def _active_lines(f: NDArray, g: NDArray) -> tuple[NDArray, NDArray, bool]:
    """Finite lines plus a flag for a ``-inf`` envelope."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(f == -INF):
        return f[:0], g[:0], True
    keep = np.isfinite(f) & np.isfinite(g)
    return f[keep], g[keep], False


def envelope(f: NDArray, g: NDArray, beta: float) -> float:
    """``min_k (beta f[k] + g[k])`` with the package line conventions."""
    f, g, pinned = _active_lines(f, g)
    if pinned:
        return -INF
    if f.size == 0:
        return INF
    if beta == INF:
        vals = np.where(f > 0, INF, np.where(f < 0, -INF, g))
        return float(vals.min())
    with np.errstate(over="ignore"):
        return float((beta * f + g).min())


def argmax_beta(f: NDArray, g: NDArray) -> float:
    """One maximizer of the envelope over ``[0, inf]``.

    Increasing lines form ``inc``; the remaining lines form a
    nonincreasing ``dec``. ``inc >= dec`` holds exactly from
    ``t = min_b max_a (g_b - g_a)/(f_a - f_b)`` on, so the envelope peaks at
    ``max(t, 0)``.
    """
    f, g, pinned = _active_lines(f, g)
    if pinned:
        return 0.0
    up = f > 0
    if not up.any():
        return 0.0
    if up.all():
        return INF
    fa, ga = f[up], g[up]
    fb, gb = f[~up], g[~up]
    with np.errstate(over="ignore"):
        cross = (gb[:, None] - ga[None, :]) / (fa[None, :] - fb[:, None])
    t = float(cross.max(axis=1).min())
    return max(t, 0.0)


def sup_on_interval(f: NDArray, g: NDArray, lo: float, hi: float, peak: float | None = None) -> tuple[float, float]:
    """``(value, beta)`` maximizing the envelope over ``[lo, hi]``.

    Concavity makes clamping any global maximizer to the interval exact.
    """
    if peak is None:
        peak = argmax_beta(f, g)
    beta = min(max(peak, lo), hi)
    return envelope(f, g, beta), beta


def beta_feasible_interval(row: LogRatioRow, lambda_star: float) -> BetaInterval:
    """All ``beta >= 0`` keeping every constraint at or above ``lambda_star``.

    Constraints are met up to a relative slack of ``1e-12``. Intervals narrower than ``DEGENERATE_WIDTH`` collapse to their midpoint.
    """
    f, g, pinned = _active_lines(row.f, row.g)
    if pinned:
        return BetaInterval(0.0, INF)
    slack = _FEAS_TOL * (1.0 + abs(lambda_star))
    flat = f == 0
    if np.any(g[flat] < lambda_star - slack):
        raise InconsistentOptimumError(f"row {row.j}: flat constraint below lambda*={lambda_star}")
    # bounds use lambda* - slack so rounding in lambda* cannot empty the set
    up, down = f > 0, f < 0
    floor = lambda_star - slack
    with np.errstate(over="ignore"):
        lo = float(((floor - g[up]) / f[up]).max()) if up.any() else 0.0
        hi = float(((floor - g[down]) / f[down]).min()) if down.any() else INF
    # a decreasing line bounds beta even when the quotient overflows; an
    # overflowing lower bound leaves beta = inf as the only representable optimum
    if down.any():
        hi = min(hi, _MAX_BETA)
    lo = max(lo, 0.0)
    if hi < lo:
        if lo - hi > DEGENERATE_WIDTH * (1.0 + lo):
            raise InconsistentOptimumError(f"row {row.j}: empty beta interval [{lo}, {hi}]")
    if hi - lo < DEGENERATE_WIDTH:
        mid = 0.5 * lo + 0.5 * hi
        return BetaInterval(mid, mid)
    return BetaInterval(lo, hi)


def _report_beta(iv: BetaInterval) -> float:
    if iv.hi == INF:
        return iv.lo
    return 0.5 * iv.lo + 0.5 * iv.hi


def _binding(row: LogRatioRow, beta: float, lam: float) -> frozenset[int]:
    f, g = np.asarray(row.f), np.asarray(row.g)
    live = np.isfinite(f) & np.isfinite(g)
    vals = np.full(f.shape, INF)
    if beta == INF:
        vals[live] = np.where(f[live] > 0, INF, np.where(f[live] < 0, -INF, g[live]))
    else:
        with np.errstate(over="ignore"):
            vals[live] = beta * f[live] + g[live]
    tol = BINDING_TOL * (1.0 + abs(lam))
    return frozenset(int(k) for k in np.flatnonzero(np.abs(vals - lam) <= tol))


def _solve(row: LogRatioRow) -> tuple[SolverResult, BetaInterval]:
    peak = argmax_beta(row.f, row.g)
    lam = envelope(row.f, row.g, peak)
    iv = beta_feasible_interval(row, lam)
    beta = _report_beta(iv)
    return SolverResult(row.j, lam, beta, _binding(row, beta, lam)), iv


def solve_goodness_of_fit(row: LogRatioRow) -> SolverResult:
    """Exact optimum of the goodness-of-fit program for one unit.

    The reported ``beta_star`` is the midpoint of the optimal set when it
    is bounded and its finite endpoint otherwise.
    """
    return _solve(row)[0]


def alpha_interval(iv: BetaInterval) -> AlphaInterval:
    return AlphaInterval(recip(iv.hi), recip(iv.lo))


def classify_rts(iv: AlphaInterval, eps: float = 1e-6) -> RtsClass:
    if iv.lo > 1.0 + eps:
        return RtsClass.IRS
    if iv.hi < 1.0 - eps:
        return RtsClass.DRS
    return RtsClass.CRS_NOT_REJECTED


@dataclass(frozen=True)
class DmuEstimate:
    """Full per-unit estimate: optimum, optimal beta/alpha sets and class."""

    solver: SolverResult
    beta: BetaInterval
    alpha: AlphaInterval
    rts: RtsClass


def estimate_row(row: LogRatioRow, eps: float = 1e-6) -> DmuEstimate:
    res, biv = _solve(row)
    aiv = alpha_interval(biv)
    return DmuEstimate(res, biv, aiv, classify_rts(aiv, eps))


def estimate_dataset(d: Dataset, eps: float = 1e-6) -> list[DmuEstimate]:
    """Estimate every unit of ``d``; rows are independent of each other."""
    F, G = log_ratio_matrices(d)
    return [estimate_row(LogRatioRow(j, F[j], G[j]), eps) for j in range(d.J)]


@dataclass(frozen=True)
class OracleResult:
    lambda_star: float
    beta_star: float
    unbounded: bool


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def oracle_grid_max(
    row: LogRatioRow,
    beta_max: float = 1e6,
    n_grid: int = 100_000,
    refine_iter: int = 200,
) -> OracleResult:
    """Brute-force maximizer of the envelope: dense grid then golden section.

    Used as an independent check on :func:`solve_goodness_of_fit`; it shares
    no code with the exact solver.
    """
    f = np.asarray(row.f, dtype=float)
    g = np.asarray(row.g, dtype=float)
    live = np.isfinite(f) & np.isfinite(g)
    f, g = f[live], g[live]

    def h(b):
        return np.min(np.multiply.outer(np.atleast_1d(b), f) + g, axis=-1)

    if f.size == 0:
        return OracleResult(INF, 0.0, True)
    grid = np.concatenate(([0.0], np.logspace(-9, math.log10(beta_max), n_grid - 1)))
    vals = np.empty(grid.size)
    step = max(1, 4_000_000 // max(f.size, 1))
    for s in range(0, grid.size, step):
        vals[s : s + step] = h(grid[s : s + step])
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    c, dd = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    hc, hd = float(h(c)[0]), float(h(dd)[0])
    for _ in range(refine_iter):
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
        if hc < hd:
            a, c, hc = c, dd, hd
            dd = a + _GOLDEN * (b - a)
            hd = float(h(dd)[0])
        else:
            b, dd, hd = dd, c, hc
            c = b - _GOLDEN * (b - a)
            hc = float(h(c)[0])
    cands = [(vals[i], grid[i]), (hc, c), (hd, dd)]
    best_val, best_beta = max(cands, key=lambda t: t[0])
    slope_end = float(np.min(f[np.isclose(f * grid[-1] + g, vals[-1], rtol=0, atol=1e-12)], initial=INF))
    unbounded = bool(abs(vals[-1] - best_val) <= 1e-12 and slope_end >= 0)
    return OracleResult(float(best_val), float(best_beta), unbounded)
