"""Global intersection technology built from the per-unit alpha intervals.

The global technology is ``T = intersection over alpha in L of U_alpha`` where
``U_alpha`` is the union technology at ``alpha`` and ``L`` is the union of
the optimal alpha intervals of every unit. A smaller set has a larger
input gauge, so the score against ``T`` is the supremum over ``L`` of the
union scores. That supremum is found exactly in ``beta = 1/alpha``
coordinates, where the log union score is a concave piecewise-linear
function of ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .core import INF, Dataset, DomainError, log_ratio_matrices, point_log_ratios, recip
from .rts import AlphaInterval, DmuEstimate, argmax_beta, envelope, estimate_dataset, sup_on_interval

MERGE_RTOL = 1e-9
MEMBER_TOL = 1e-9


def _close(a: float, b: float) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= MERGE_RTOL * max(1.0, abs(a), abs(b))


def normalize_intervals(intervals: Iterable[AlphaInterval]) -> tuple[AlphaInterval, ...]:
    """Sorted, pairwise disjoint cover of the union of closed intervals.

    Endpoints within ``MERGE_RTOL`` of each other are treated as equal, so
    intervals meeting at a floating-point-perturbed shared endpoint merge.
    """
    ivs = sorted(intervals, key=lambda iv: (iv.lo, iv.hi))
    out: list[AlphaInterval] = []
    for iv in ivs:
        if out and (iv.lo <= out[-1].hi or _close(iv.lo, out[-1].hi)):
            last = out[-1]
            out[-1] = AlphaInterval(last.lo, max(last.hi, iv.hi))
        else:
            out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class LambdaCollection:
    """Per-unit optimal alpha intervals and their normalized union."""

    per_dmu: Mapping[int, AlphaInterval]
    union: tuple[AlphaInterval, ...]
    global_lo: float
    global_hi: float
    beta_union: tuple[tuple[float, float], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_union", tuple(tuple(iv.to_beta()) for iv in self.union))

    def __contains__(self, alpha: float) -> bool:
        return any(iv.contains(alpha) for iv in self.union)

    @property
    def is_connected(self) -> bool:
        return len(self.union) == 1


def lambda_star(intervals: Mapping[int, AlphaInterval] | Sequence[AlphaInterval]) -> LambdaCollection:
    """Aggregate per-unit intervals into their union and global bounds."""
    if not isinstance(intervals, Mapping):
        intervals = dict(enumerate(intervals))
    per = dict(intervals)
    union = normalize_intervals(per.values())
    lo = min((iv.lo for iv in per.values()), default=INF)
    hi = max((iv.hi for iv in per.values()), default=0.0)
    return LambdaCollection(per, union, lo, hi)


def from_alphas(alphas: Iterable[float]) -> LambdaCollection:
    """Collection of singleton intervals, one per listed alpha."""
    return lambda_star([AlphaInterval(a, a) for a in alphas])


def from_estimates(estimates: Sequence[DmuEstimate]) -> LambdaCollection:
    return lambda_star({e.solver.j: e.alpha for e in estimates})


def gauge_from_logs(f, g, beta_union: Sequence[tuple[float, float]]) -> float:
    """Max over the beta intervals of the union log-score, exponentiated."""
    if not beta_union:
        raise DomainError("empty alpha collection")
    peak = argmax_beta(f, g)
    best = max(sup_on_interval(f, g, lo, hi, peak)[0] for lo, hi in beta_union)
    return math.exp(best) if best < INF else INF


def phi_global(d: Dataset, lc: LambdaCollection, x, y) -> float:
    """Input score of ``(x, y)`` against the intersection technology of ``lc``."""
    f, g = point_log_ratios(d, x, y)
    return gauge_from_logs(f, g, lc.beta_union)


def member_global(d: Dataset, lc: LambdaCollection, x, y, tol: float = MEMBER_TOL) -> bool:
    return phi_global(d, lc, x, y) <= 1.0 + tol


def phi_extrapolation(
    d: Dataset,
    bounds: Mapping[int, AlphaInterval] | LambdaCollection,
    which: Literal["lower", "upper"],
    x,
    y,
) -> float:
    """Score against the lower or upper extrapolation.

    The technology intersects, over units j, the union technologies at
    the lower (resp. upper) optimal alpha of j; its gauge is the max of
    the union gauges.
    """
    if isinstance(bounds, LambdaCollection):
        bounds = bounds.per_dmu
    if which not in ("lower", "upper"):
        raise ValueError(f"which must be 'lower' or 'upper', got {which!r}")
    if not bounds:
        raise DomainError("no per-unit bounds")
    f, g = point_log_ratios(d, x, y)
    best = -INF
    for iv in bounds.values():
        beta = recip(iv.lo if which == "lower" else iv.hi)
        best = max(best, envelope(f, g, beta))
    return math.exp(best) if best < INF else INF


# ---------------------------------------------------------------- diagnostics


def _frontier_probes(d: Dataset, alphas: Sequence[float], n_probes: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Points ``(lam**(1/alpha) x_k, lam y_k)`` at log-spaced ``lam``.

    These lie on the boundary of the individual technology of unit k at
    ``alpha``; zero and infinite alphas move along the input ray and the
    output ray respectively.
    """
    alphas = [a for a in alphas] or [1.0]
    per = max(1, n_probes // max(1, len(alphas) * d.J))
    lams = np.logspace(-1, 1, per) if per > 1 else np.array([2.0])
    probes = []
    for a in alphas:
        for k in range(d.J):
            xk, yk = d.X[k], d.Y[k]
            for lam in lams:
                if a == INF:
                    probes.append((xk.copy(), lam * yk))
                elif a == 0:
                    probes.append((lam * xk, yk.copy()))
                else:
                    probes.append((lam ** (1.0 / a) * xk, lam * yk))
                if len(probes) >= n_probes:
                    return probes
    return probes


def _endpoints(lc: LambdaCollection) -> list[float]:
    pts = []
    for iv in lc.union:
        pts.extend([iv.lo] if iv.is_singleton else [iv.lo, iv.hi])
    return pts


def intersect_collections(a: Sequence[AlphaInterval], b: Sequence[AlphaInterval]) -> tuple[AlphaInterval, ...]:
    out = []
    for u in a:
        for v in b:
            lo, hi = max(u.lo, v.lo), min(u.hi, v.hi)
            if lo <= hi or _close(lo, hi):
                out.append(AlphaInterval(lo, max(lo, hi)))
    return normalize_intervals(out)


@dataclass
class RationalizationReport:
    """Outcome of :func:`check_rationalization`; ``passed`` summarizes all checks."""

    members_ok: bool
    self_scores_ok: bool
    monotone_ok: bool
    strict_enlargements: list[dict] = field(default_factory=list)
    counterexamples: list[dict] = field(default_factory=list)
    n_probes: int = 0

    @property
    def passed(self) -> bool:
        return self.members_ok and self.self_scores_ok and self.monotone_ok and not self.strict_enlargements


def check_rationalization(
    d: Dataset,
    lambdas: LambdaCollection | None = None,
    estimates: Sequence[DmuEstimate] | None = None,
    n_probes: int = 256,
    tol: float = 1e-9,
) -> RationalizationReport:
    """Verify that the intersection technology rationalizes the data.

    Checks, for the collection ``lambdas`` (the data's own collection by
    default):

    (a) every observation is a member;
    (b) each observation's global score equals ``exp(lambda*_j)``;
    (c) on frontier probes, trimming ``lambdas`` down to the alphas
        actually optimal for some unit never shrinks the technology, and
        any strict enlargement is recorded: it means ``lambdas`` carries
        alphas the data does not support, so the technology is not the
        minimal one.
    """
    if estimates is None:
        estimates = estimate_dataset(d)
    own = from_estimates(estimates)
    lc = own if lambdas is None else lambdas
    F, G = log_ratio_matrices(d)
    rep = RationalizationReport(True, True, True)

    for e in estimates:
        j = e.solver.j
        score = gauge_from_logs(F[j], G[j], lc.beta_union)
        target = math.exp(e.solver.lambda_star)
        if score > 1.0 + tol:
            rep.members_ok = False
            rep.counterexamples.append({"check": "member", "dmu": j, "phi_global": score})
        if abs(score - target) > tol:
            rep.self_scores_ok = False
            rep.counterexamples.append({"check": "self_score", "dmu": j, "phi_global": score, "expected": target})

    trimmed = intersect_collections(lc.union, own.union)
    trimmed_beta = tuple(tuple(iv.to_beta()) for iv in trimmed)
    probes = _frontier_probes(d, _endpoints(lc), n_probes)
    rep.n_probes = len(probes)
    for x, y in probes:
        f, g = point_log_ratios(d, x, y)
        full = gauge_from_logs(f, g, lc.beta_union)
        if not (0 < full < INF):
            continue
        # move the probe onto the frontier of the technology under test
        x = x * full
        f, g = point_log_ratios(d, x, y)
        base = gauge_from_logs(f, g, lc.beta_union)
        cut = gauge_from_logs(f, g, trimmed_beta) if trimmed_beta else 0.0
        if cut > base * (1.0 + tol):
            rep.monotone_ok = False
            rep.counterexamples.append({"check": "monotone", "x": x.tolist(), "y": y.tolist(), "full": base, "trimmed": cut})
        elif cut < base * (1.0 - tol):
            rep.strict_enlargements.append({"x": x.tolist(), "y": y.tolist(), "full": base, "trimmed": cut})
    return rep


@dataclass(frozen=True)
class MinimalityWitness:
    """Result of probing whether dropping ``alpha`` enlarges the technology."""

    alpha: float
    witness: tuple[tuple[float, ...], tuple[float, ...]] | None
    probes: int

    @property
    def found(self) -> bool:
        return self.witness is not None


def minimality_probe(d: Dataset, alphas: Sequence[float], n_probes: int = 256, tol: float = 1e-9) -> list[MinimalityWitness]:
    """Search, for each alpha in ``alphas``, for a point gained by dropping it.

    A witness lies in the intersection over the remaining alphas but not in
    the full intersection. Failing to find one is inconclusive, never a
    proof. A single alpha is vacuously minimal and no probes are run.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) <= 1:
        return [MinimalityWitness(a, None, 0) for a in alphas]
    out = []
    for idx, a in enumerate(alphas):
        rest = alphas[:idx] + alphas[idx + 1 :]
        rest_beta = tuple((recip(r), recip(r)) for r in rest)
        full_beta = rest_beta + ((recip(a), recip(a)),)
        witness, used = None, 0
        for x, y in _frontier_probes(d, rest, n_probes):
            used += 1
            f, g = point_log_ratios(d, x, y)
            s = gauge_from_logs(f, g, rest_beta)
            if not (0 < s < INF):
                continue
            x = x * s
            f, g = point_log_ratios(d, x, y)
            if gauge_from_logs(f, g, full_beta) > 1.0 + tol:
                witness = (tuple(x.tolist()), tuple(y.tolist()))
                break
        out.append(MinimalityWitness(a, witness, used))
    return out
