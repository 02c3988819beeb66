"""Closed-form Farrell measures for individual, union and FDH technologies.

An individual technology of unit k under alpha-returns to scale is

    Q_alpha(x_k, y_k) = {(x, y): x >= lam**(1/alpha) x_k, y <= lam y_k, lam >= 0}

and the union technology is the union of these over the sample. The
input score of a point is ``ry(k)**(1/alpha) * rx(k)`` where ``ry`` is the
smallest output scaling of ``y_k`` covering ``y`` and ``rx`` the largest
input ratio ``x_k / x``. Infeasibility is reported as an ``inf`` score so
aggregation by ``min`` stays total.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from .core import INF, Dataset, check_point, input_ratios, output_ratios

if TYPE_CHECKING:
    from .technology import LambdaCollection


class UnsupportedLimitError(ValueError):
    """No closed form exists for the requested limiting returns to scale."""


class Gamma(str, enum.Enum):
    """Scaling regimes of the classical individual FDH technologies."""

    CRS = "CRS"
    NIRS = "NIRS"
    NDRS = "NDRS"
    VRS = "VRS"


@dataclass(frozen=True)
class Individual:
    k: int
    alpha: float


@dataclass(frozen=True)
class UnionTech:
    alpha: float


@dataclass(frozen=True)
class GammaNC:
    gamma: Gamma


@dataclass(frozen=True)
class GlobalLambda:
    lambdas: "LambdaCollection"


TechnologySpec = Union[Individual, UnionTech, GammaNC, GlobalLambda]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if math.isnan(alpha) or alpha < 0:
        raise ValueError(f"alpha must lie in [0, inf], got {alpha}")
    return alpha


def _gauge(ry: NDArray, rx: NDArray, alpha: float) -> NDArray:
    """Elementwise input score from output and input ratios."""
    ry = np.asarray(ry, dtype=float)
    rx = np.asarray(rx, dtype=float)
    out = np.empty(np.broadcast(ry, rx).shape)
    if alpha == INF:
        # outputs scale freely: only the carrier condition (ry finite) matters
        out[...] = np.where(np.isfinite(ry), rx, INF)
    elif alpha == 0:
        out[...] = np.where(ry < 1, 0.0, np.where(ry == 1, rx, INF))
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            out[...] = np.power(ry, 1.0 / alpha) * rx
            spill = ~np.isfinite(out) & np.isfinite(ry) & np.isfinite(rx) & (ry > 0)
            if np.any(spill):
                logv = np.log(ry[spill]) / alpha + np.log(rx[spill])
                out[spill] = np.exp(logv)
    # y = 0 is producible from nothing: (0, 0) lies in every individual technology
    out[ry == 0] = 0.0
    return out


def _point_ratios(d: Dataset, x, y) -> tuple[NDArray, NDArray]:
    x, y = check_point(d, x, y)
    return output_ratios(y, d.Y), input_ratios(x, d.X)


def phi_k(d: Dataset, k: int, x: Sequence[float], y: Sequence[float], alpha: float) -> float:
    """Input score of ``(x, y)`` against the individual technology of unit ``k``.

    At ``alpha = inf`` outputs scale for free, so the score is the input
    ratio alone whenever ``car(y)`` lies inside ``car(y_k)``. At
    ``alpha = 0`` inputs scale for free: the score is 0 when ``y`` is
    strictly covered by ``y_k``, the input ratio when it is covered exactly
    and ``inf`` otherwise.
    """
    alpha = _check_alpha(alpha)
    ry, rx = _point_ratios(d, x, y)
    return float(_gauge(ry[k], rx[k], alpha))


def phi_union(d: Dataset, x: Sequence[float], y: Sequence[float], alpha: float) -> float:
    """Input score against the union technology: ``min_k phi_k``."""
    alpha = _check_alpha(alpha)
    ry, rx = _point_ratios(d, x, y)
    return float(_gauge(ry, rx, alpha).min())


def psi_k(d: Dataset, k: int, x: Sequence[float], y: Sequence[float], alpha: float) -> float:
    """Output score: the largest ``mu`` with ``(x, mu*y)`` in the technology of unit ``k``.

    Only finite positive ``alpha`` is supported. The input term is taken
    over ``car(x_k)``; an input of ``x_k`` that ``x`` lacks forces
    ``mu = 0``.
    """
    alpha = _check_alpha(alpha)
    if alpha == 0 or alpha == INF:
        raise UnsupportedLimitError(f"no closed-form output score at alpha={alpha}")
    x, y = check_point(d, x, y)
    xk, yk = d.X[k], d.Y[k]
    cy = y > 0
    if not cy.any():
        return INF
    out_term = float(np.min(yk[cy] / y[cy]))
    in_term = float(np.min(x[xk > 0] / xk[xk > 0]))
    if out_term == 0 or in_term == 0:
        return 0.0
    try:
        return out_term * in_term**alpha
    except OverflowError:
        return INF


def member_q_alpha(d: Dataset, k: int, x, y, alpha: float) -> bool:
    return phi_k(d, k, x, y, alpha) <= 1.0


def _scale_choice(dmin: NDArray, gamma: Gamma) -> NDArray:
    """Smallest admissible scale ``delta`` in ``gamma`` that is at least ``dmin``."""
    if gamma is Gamma.CRS:
        return dmin.copy()
    if gamma is Gamma.NIRS:
        return np.where(dmin <= 1, dmin, INF)
    if gamma is Gamma.NDRS:
        return np.maximum(dmin, 1.0)
    if gamma is Gamma.VRS:
        return np.where(dmin <= 1, 1.0, INF)
    raise ValueError(f"unknown regime {gamma!r}")


def gamma_scores(ry: NDArray, rx: NDArray, gamma: Gamma | str) -> NDArray:
    """Per-unit FDH input scores ``delta* * rx`` (``inf`` when infeasible)."""
    gamma = Gamma(gamma)
    delta = _scale_choice(np.asarray(ry, dtype=float), gamma)
    with np.errstate(invalid="ignore"):
        out = delta * np.asarray(rx, dtype=float)
    # delta = 0 only when y = 0; the origin-scaled unit then dominates every x
    out[delta == 0] = 0.0
    return out


def fdh_gamma_input_efficiency(d: Dataset, x, y, gamma: Gamma | str) -> float:
    """Input score against the non-convex FDH technology under regime ``gamma``."""
    ry, rx = _point_ratios(d, x, y)
    return float(gamma_scores(ry, rx, gamma).min())


def member_q_gamma(d: Dataset, k: int, x, y, gamma: Gamma | str) -> bool:
    ry, rx = _point_ratios(d, x, y)
    return bool(gamma_scores(ry[k : k + 1], rx[k : k + 1], gamma)[0] <= 1.0)


def input_score(d: Dataset, tech: TechnologySpec, x, y) -> float:
    """Dispatch an input score by technology kind."""
    if isinstance(tech, Individual):
        return phi_k(d, tech.k, x, y, tech.alpha)
    if isinstance(tech, UnionTech):
        return phi_union(d, x, y, tech.alpha)
    if isinstance(tech, GammaNC):
        return fdh_gamma_input_efficiency(d, x, y, tech.gamma)
    if isinstance(tech, GlobalLambda):
        from .technology import phi_global

        return phi_global(d, tech.lambdas, x, y)
    raise TypeError(f"unsupported technology {tech!r}")


__all__ = [
    "Gamma",
    "GammaNC",
    "GlobalLambda",
    "Individual",
    "TechnologySpec",
    "UnionTech",
    "UnsupportedLimitError",
    "fdh_gamma_input_efficiency",
    "gamma_scores",
    "input_score",
    "member_q_alpha",
    "member_q_gamma",
    "phi_k",
    "phi_union",
    "psi_k",
]
