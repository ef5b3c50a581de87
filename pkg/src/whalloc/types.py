"""Shared domain types and their validation.

Warehouse indices are 0-based throughout the Python API; column ``K`` of a
penalty or allocation matrix is the "not assigned" column. Quantities are
exact integers (``int64`` arrays), probabilities and penalties are floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateSku,
    InvalidPenalty,
    InvalidProbabilities,
    NegativeQuantity,
    ShapeMismatch,
    ValidationError,
)

PROB_TOL = 1e-9


def _frozen(a, dtype=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Sku:
    id: str
    attributes: Mapping[str, str] = field(default_factory=dict)
    article_type: str = ""
    gender: str = ""

    @property
    def partition(self) -> tuple[str, str]:
        return (self.article_type, self.gender)


@dataclass(frozen=True)
class PurchaseOrder:
    id: str
    lines: tuple[tuple[Sku, int], ...]
    business_unit: str = ""
    period: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple((s, int(q)) for s, q in self.lines))

    @property
    def skus(self) -> list[Sku]:
        return [s for s, _ in self.lines]

    @property
    def sku_ids(self) -> list[str]:
        return [s.id for s, _ in self.lines]

    @property
    def quantities(self) -> np.ndarray:
        return np.array([q for _, q in self.lines], dtype=np.int64)

    @property
    def M(self) -> int:
        return len(self.lines)

    @property
    def N(self) -> int:
        return int(sum(q for _, q in self.lines))


@dataclass(frozen=True)
class WarehouseSet:
    warehouses: tuple[str, ...]
    capacities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "warehouses", tuple(self.warehouses))
        object.__setattr__(self, "capacities", _frozen(self.capacities, np.int64))
        if len(self.warehouses) < 1:
            raise ShapeMismatch("a warehouse set needs at least one warehouse")
        if self.capacities.shape != (len(self.warehouses),):
            raise ShapeMismatch(
                f"{len(self.warehouses)} warehouses but capacity vector of shape "
                f"{self.capacities.shape}"
            )
        bad = np.flatnonzero(self.capacities < 0)
        if bad.size:
            raise NegativeQuantity(
                f"negative capacity for warehouse {self.warehouses[bad[0]]!r}",
                where=int(bad[0]),
            )

    @property
    def K(self) -> int:
        return len(self.warehouses)


@dataclass(frozen=True)
class ValidatedInstance:
    po: PurchaseOrder
    warehouses: WarehouseSet
    existing: np.ndarray


def instance_violations(
    po: PurchaseOrder, ws: WarehouseSet | None = None, existing=None
) -> list[ValidationError]:
    """Every invariant violation found in the (PO, warehouses, inventory) triple."""
    found: list[ValidationError] = []
    seen: dict[str, int] = {}
    for i, (sku, qty) in enumerate(po.lines):
        if not sku.id:
            found.append(ValidationError(f"line {i}: empty sku id", where=i))
        if sku.id in seen:
            found.append(DuplicateSku(sku.id, where=i))
        seen.setdefault(sku.id, i)
        if qty < 1:
            found.append(
                NegativeQuantity(f"line {i} ({sku.id!r}): quantity {qty} < 1", where=i)
            )
    if existing is not None and ws is not None:
        e = np.asarray(existing)
        if e.shape != (po.M, ws.K):
            found.append(
                ShapeMismatch(
                    f"existing inventory has shape {e.shape}, expected {(po.M, ws.K)}",
                    where=e.shape,
                )
            )
        elif (e < 0).any():
            i, j = map(int, np.argwhere(e < 0)[0])
            found.append(
                NegativeQuantity(f"existing inventory [{i}, {j}] is negative", where=(i, j))
            )
    return found


def validate_instance(po: PurchaseOrder, ws: WarehouseSet, existing=None) -> ValidatedInstance:
    """Check an allocation instance, raising the first violation.

    The raised error's ``violations`` attribute lists everything that was
    found, not just the first problem.
    """
    found = instance_violations(po, ws, existing)
    if found:
        err = found[0]
        err.violations = found
        raise err
    if existing is None:
        existing = np.zeros((po.M, ws.K), dtype=np.int64)
    return ValidatedInstance(po, ws, _frozen(existing, np.int64))


def check_split_probabilities(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2:
        raise ShapeMismatch(f"split probabilities must be 2-D, got shape {P.shape}")
    if (P < 0).any() or (P > 1).any():
        raise InvalidProbabilities("split probabilities must lie in [0, 1]")
    err = np.abs(P.sum(axis=1) - 1.0)
    if (err > PROB_TOL).any():
        i = int(np.argmax(err))
        raise InvalidProbabilities(f"row {i} sums to {P[i].sum()!r}, not 1", where=i)
    return P


def check_ideal_splits(I, quantities) -> np.ndarray:
    I = np.asarray(I)
    q = np.asarray(quantities, dtype=np.int64)
    if I.ndim != 2 or I.shape[0] != q.shape[0]:
        raise ShapeMismatch(f"ideal splits of shape {I.shape} for {q.shape[0]} skus")
    if not np.issubdtype(I.dtype, np.integer):
        raise ValidationError("ideal splits must be integers")
    if (I < 0).any():
        raise NegativeQuantity("ideal splits must be nonnegative")
    bad = np.flatnonzero(I.sum(axis=1) != q)
    if bad.size:
        raise ValidationError(f"row {bad[0]} of the ideal splits does not sum to N_i", where=int(bad[0]))
    return I.astype(np.int64)


@dataclass(frozen=True)
class PenaltyMatrix:
    """Redistribution costs: ``matrix[u, v]`` is the cost of placing a unit
    whose ideal warehouse is ``u`` in warehouse ``v``; column ``K`` is the
    non-assignment penalty.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix, float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[1] != m.shape[0] + 1:
            raise ShapeMismatch(f"penalty matrix must be K x (K+1), got {m.shape}")
        if not np.isfinite(m).all() or (m < 0).any():
            raise InvalidPenalty("penalties must be finite and nonnegative")
        na = m[:, -1]
        if (na != na[0]).any():
            raise InvalidPenalty("the non-assignment column must be constant")
        top = m[:, :-1].max()
        if not na[0] > top:
            raise InvalidPenalty(
                f"lambda_na={na[0]!r} must exceed every assignment penalty (max {top!r})"
            )

    @classmethod
    def from_costs(cls, costs, lambda_na: float | None = None) -> "PenaltyMatrix":
        """Append the non-assignment column to a K x K cost matrix.

        The default ``lambda_na`` is ``K * max(costs) + 1``, large enough that
        no chain of at most K reassignments is ever worth leaving a unit out.
        """
        c = np.asarray(costs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeMismatch(f"cost matrix must be square, got {c.shape}")
        if lambda_na is None:
            lambda_na = default_lambda_na(c)
        col = np.full((c.shape[0], 1), float(lambda_na))
        return cls(np.hstack([c, col]))

    @classmethod
    def from_distances(cls, distances, lambda_na: float | None = None) -> "PenaltyMatrix":
        d = np.asarray(distances, dtype=float)
        if not np.allclose(d, d.T):
            raise InvalidPenalty("distance table must be symmetric")
        d = d.copy()
        np.fill_diagonal(d, 0.0)
        return cls.from_costs(d, lambda_na)

    @property
    def K(self) -> int:
        return self.matrix.shape[0]

    @property
    def lambda_na(self) -> float:
        return float(self.matrix[0, -1])

    @property
    def truncated(self) -> np.ndarray:
        return self.matrix[:, :-1]

    def scaled(self, factor: float) -> "PenaltyMatrix":
        return PenaltyMatrix(self.matrix * factor)


def default_lambda_na(costs) -> float:
    c = np.asarray(costs, dtype=float)
    return c.shape[0] * float(c.max(initial=0.0)) + 1.0


@dataclass(frozen=True)
class AllocationMatrix:
    """Final allocation; the last column holds units left unassigned."""

    values: np.ndarray
    sku_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.int64))
        object.__setattr__(self, "sku_ids", tuple(self.sku_ids))
        if self.values.ndim != 2 or self.values.shape[1] < 2:
            raise ShapeMismatch(f"allocation must be M x (K+1), got {self.values.shape}")
        if (self.values < 0).any():
            raise NegativeQuantity("allocations must be nonnegative")
        if self.sku_ids and len(self.sku_ids) != self.values.shape[0]:
            raise ShapeMismatch("one sku id per allocation row is required")

    @property
    def assigned(self) -> np.ndarray:
        return self.values[:, :-1]

    @property
    def unassigned(self) -> np.ndarray:
        return self.values[:, -1]

    def __eq__(self, other):
        if not isinstance(other, AllocationMatrix):
            return NotImplemented
        return self.sku_ids == other.sku_ids and np.array_equal(self.values, other.values)

    __hash__ = None


def rows_conserved(X, quantities) -> bool:
    """Every sku's allocation, unassigned column included, adds up to N_i."""
    X = np.asarray(X)
    return bool(np.array_equal(X.sum(axis=1), np.asarray(quantities)))


def within_capacity(X, capacities) -> bool:
    X = np.asarray(X)
    return bool((X[:, :-1].sum(axis=0) <= np.asarray(capacities)).all())


@dataclass(frozen=True)
class PurchaseEvent:
    sku_id: str
    pincode: str
    timestamp: datetime
    nearest_warehouse_index: int
    two_day_serviceable_by: frozenset[int] = frozenset()


def as_capacity_vector(capacities: Sequence[int] | np.ndarray | WarehouseSet) -> np.ndarray:
    if isinstance(capacities, WarehouseSet):
        return np.asarray(capacities.capacities, dtype=np.int64)
    c = np.asarray(capacities)
    if c.dtype.kind == "f":
        if not np.all(np.isinf(c) | (c == np.floor(c))):
            raise ValidationError("capacities must be integers")
    if (c < 0).any():
        raise NegativeQuantity("capacities must be nonnegative")
    return c
