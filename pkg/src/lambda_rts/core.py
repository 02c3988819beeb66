"""Domain types, dataset validation and extended-ratio arithmetic.

Extended reals are plain Python/numpy floats; ``math.inf`` is the
distinguished infinite element. The conventions used throughout the
package are ``a/0 = inf`` for ``a > 0``, ``1/inf = 0``, ``1/0 = inf`` and
``ln(inf) = inf``. Ratios of the form ``0/0`` only arise for components
outside both carriers and are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

INF = math.inf


class DomainError(ValueError):
    """An operation was called outside its mathematical domain."""


class DatasetValidationError(ValueError):
    """Raised by :func:`validate_dataset`; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid dataset")


def recip(v: float) -> float:
    """Extended reciprocal on [0, inf]: 1/0 = inf and 1/inf = 0."""
    if v == 0:
        return INF
    if v == INF:
        return 0.0
    return 1.0 / v


def ext_div(a: float, b: float) -> float:
    """``a / b`` for nonnegative a, b with ``a/0 = inf`` when ``a > 0``."""
    if b == 0:
        if a > 0:
            return INF
        raise DomainError("0/0 is undefined")
    return a / b


def ext_log(v: float) -> float:
    """Natural log on [0, inf] with ln(0) = -inf and ln(inf) = inf."""
    if v == 0:
        return -INF
    return math.log(v)


@dataclass(frozen=True)
class ProductionUnit:
    """One observed decision-making unit: inputs ``x`` produce outputs ``y``."""

    id: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    period: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))


def unit_violations(unit: ProductionUnit) -> list[str]:
    """Problems with a single unit, independent of the rest of the data."""
    problems = []
    for name, vec in (("x", unit.x), ("y", unit.y)):
        if not vec:
            problems.append(f"unit {unit.id!r}: empty {name} vector")
            continue
        if any(not math.isfinite(v) for v in vec):
            problems.append(f"unit {unit.id!r}: non-finite value in {name}")
        elif any(v < 0 for v in vec):
            problems.append(f"unit {unit.id!r}: negative value in {name}")
        elif not any(v > 0 for v in vec):
            kind = "input" if name == "x" else "output"
            problems.append(f"unit {unit.id!r}: all-zero {kind} vector")
    return problems


@dataclass(frozen=True)
class Dataset:
    """A validated cross-section of ``J`` units sharing input/output dimensions.

    Build instances with :func:`validate_dataset`. ``X`` and ``Y`` are
    read-only ``(J, n)`` and ``(J, p)`` arrays in unit order.
    """

    units: tuple[ProductionUnit, ...]
    X: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    Y: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        X = np.array([u.x for u in self.units], dtype=float)
        Y = np.array([u.y for u in self.units], dtype=float)
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def J(self) -> int:
        return len(self.units)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def ids(self) -> list[str]:
        return [u.id for u in self.units]

    def __len__(self) -> int:
        return len(self.units)


def validate_dataset(units: Iterable[ProductionUnit]) -> Dataset:
    """Check ``units`` and return a :class:`Dataset`.

    Rejects negative, non-finite, all-zero-input and all-zero-output units,
    dimension mismatches and ids duplicated within a period. Nothing is
    imputed: all violations are collected and raised together as a
    :class:`DatasetValidationError`.
    """
    units = tuple(units)
    if not units:
        raise DatasetValidationError(["dataset has no units"])
    violations: list[str] = []
    n, p = len(units[0].x), len(units[0].y)
    seen: set[tuple[str | None, str]] = set()
    for u in units:
        if len(u.x) != n or len(u.y) != p:
            violations.append(
                f"unit {u.id!r}: dimension mismatch (n={len(u.x)}, p={len(u.y)}; expected n={n}, p={p})"
            )
        key = (u.period, u.id)
        if key in seen:
            violations.append(f"unit {u.id!r}: duplicate id in period {u.period!r}")
        seen.add(key)
        violations.extend(unit_violations(u))
    if violations:
        raise DatasetValidationError(violations)
    return Dataset(units)


def carrier(v: Sequence[float]) -> frozenset[int]:
    """Support of a nonnegative vector: the (0-based) indices of positive entries."""
    return frozenset(i for i, vi in enumerate(v) if vi > 0)


def ratio_max(num: Sequence[float], den: Sequence[float], idx: Iterable[int]) -> float:
    """``max_{i in idx} num[i] / den[i]`` with ``a/0 = inf``."""
    idx = list(idx)
    if not idx:
        raise DomainError("ratio_max over an empty index set")
    return max(ext_div(num[i], den[i]) for i in idx)


def ratio_matrix(num: NDArray, den: NDArray) -> NDArray:
    """``R[j, k] = max_l num[j, l] / den[k, l]`` under the package conventions.

    Components with ``num[j, l] == 0`` never raise the max (they contribute
    0, covering the ignored 0/0 case); ``num > 0`` over ``den == 0`` is
    ``inf``. Rows of ``num`` that are entirely zero yield 0.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num[:, None, :] / den[None, :, :]
    r = np.where(num[:, None, :] > 0, r, 0.0)
    return r.max(axis=2)


def output_ratios(y: Sequence[float], Y: NDArray) -> NDArray:
    """Per unit k: smallest scaling of ``y_k`` covering ``y`` (``max_h y_h / Y[k,h]``)."""
    return ratio_matrix(np.asarray(y, dtype=float)[None, :], Y)[0]


def input_ratios(x: Sequence[float], X: NDArray) -> NDArray:
    """Per unit k: ``max_{i in car(x)} X[k,i] / x_i``, or ``inf`` if ``x_i = 0 < X[k,i]``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = X / x[None, :]
    r = np.where(X > 0, r, 0.0)
    return r.max(axis=1)


def input_ratio_matrix(X: NDArray) -> NDArray:
    """``Rx[j, k] = max_i X[k, i] / X[j, i]`` with the unreachable-input rule."""
    X = np.asarray(X, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = X[None, :, :] / X[:, None, :]
    r = np.where(X[None, :, :] > 0, r, 0.0)
    return r.max(axis=2)


def _log(a: NDArray) -> NDArray:
    with np.errstate(divide="ignore"):
        return np.log(a)


@dataclass(frozen=True)
class LogRatioRow:
    """Coefficients of the goodness-of-fit program for unit ``j``.

    ``f[k]`` is the log of the output scaling needed for unit k to cover
    ``y_j``; ``g[k]`` is the log input ratio of unit k relative to ``x_j``.
    Both may be ``+inf``; ``f[j] == g[j] == 0``.
    """

    j: int
    f: NDArray[np.float64]
    g: NDArray[np.float64]


def log_ratio_matrices(d: Dataset) -> tuple[NDArray, NDArray]:
    """``(F, G)`` with rows ``F[j] = f_j`` and ``G[j] = g_j`` for every unit."""
    F = _log(ratio_matrix(d.Y, d.Y))
    G = _log(input_ratio_matrix(d.X))
    np.fill_diagonal(F, 0.0)
    np.fill_diagonal(G, 0.0)
    return F, G


def log_ratio_row(d: Dataset, j: int) -> LogRatioRow:
    if not 0 <= j < d.J:
        raise IndexError(f"unit index {j} outside 0..{d.J - 1}")
    f = _log(output_ratios(d.Y[j], d.Y))
    g = _log(input_ratios(d.X[j], d.X))
    f[j] = 0.0
    g[j] = 0.0
    return LogRatioRow(j, f, g)


def point_log_ratios(d: Dataset, x: Sequence[float], y: Sequence[float]) -> tuple[NDArray, NDArray]:
    """``(f, g)`` of an arbitrary point ``(x, y)`` against every unit of ``d``."""
    x, y = check_point(d, x, y)
    return _log(output_ratios(y, d.Y)), _log(input_ratios(x, d.X))


def check_point(d: Dataset, x: Sequence[float], y: Sequence[float]) -> tuple[NDArray, NDArray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (d.n,) or y.shape != (d.p,):
        raise DomainError(f"point has shape ({x.size}, {y.size}); dataset has n={d.n}, p={d.p}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("point has non-finite components")
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("point has negative components")
    if not np.any(x > 0):
        raise DomainError("input vector has an empty carrier")
    return x, y
