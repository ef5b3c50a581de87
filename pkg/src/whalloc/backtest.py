"""Replay purchase orders against capacity scenarios and score the result.

Three allocation policies are compared on the same event stream:

* ideal        -- rounded ideal splits, capacities ignored
* constrained  -- the optimal capacity-feasible allocation
* heuristic    -- each sku split in proportion to remaining capacity,
                  blind to where demand comes from

Metrics come from a stock-depleting fulfilment simulation: events are
served in time order from the buyer's nearest warehouse when it has stock,
otherwise from the cheapest warehouse (by the penalty row of the nearest
warehouse) that does. Events whose sku has no stock anywhere are left out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NoEvents, ScenarioGap, ShapeMismatch
from .ideal import ideal_splits, largest_remainder
from .solver import SolveReport, allocate
from .split_model import build_split_matrix
from .types import AllocationMatrix, PenaltyMatrix, PurchaseEvent, PurchaseOrder

log = logging.getLogger(__name__)

POLICIES = ("ideal", "constrained", "heuristic")


@dataclass(frozen=True)
class CapacityScenario:
    """Capacity vectors keyed by (business unit, period).

    Warehouses absent from a row of the source table are unavailable and
    carry capacity 0.
    """

    name: str
    warehouses: tuple[str, ...]
    table: Mapping[tuple[str, str], np.ndarray]

    def capacities(self, business_unit: str, period: str) -> np.ndarray:
        for key in ((business_unit, period), (business_unit, "*"), ("*", period), ("*", "*")):
            if key in self.table:
                return np.array(self.table[key], dtype=np.int64)
        raise ScenarioGap(
            f"scenario {self.name!r} has no capacities for business unit "
            f"{business_unit!r}, period {period!r}",
            where=(business_unit, period),
        )


@dataclass
class LedgerEntry:
    po_id: str
    business_unit: str
    period: str
    sku_ids: tuple[str, ...]
    ideal: np.ndarray
    allocation: AllocationMatrix
    report: SolveReport | None = None


@dataclass
class BacktestState:
    policy: str
    initial: dict[tuple[str, str], np.ndarray]
    remaining: dict[tuple[str, str], np.ndarray]
    ledger: list[LedgerEntry] = field(default_factory=list)

    def stock(self, which: str = "allocation") -> dict[str, np.ndarray]:
        """Total units per sku per warehouse over the whole ledger."""
        out: dict[str, np.ndarray] = {}
        for entry in self.ledger:
            X = entry.ideal if which == "ideal" else entry.allocation.assigned
            for sku_id, row in zip(entry.sku_ids, X):
                out[sku_id] = out.get(sku_id, 0) + np.asarray(row, dtype=np.int64)
        return out

    @property
    def unassigned(self) -> int:
        return int(sum(e.allocation.unassigned.sum() for e in self.ledger))


def _split_rows(split_source, po: PurchaseOrder) -> np.ndarray:
    if isinstance(split_source, Mapping):
        return np.asarray(split_source[po.id], dtype=float)
    return build_split_matrix(split_source, po)


def replay(
    pos: Sequence[PurchaseOrder],
    scenario: CapacityScenario,
    split_source,
    penalty: PenaltyMatrix,
    existing: Mapping[str, np.ndarray] | None = None,
    solver: str = "flow",
) -> BacktestState:
    """Allocate each PO in turn, deducting what it used from the capacities.

    ``split_source`` is a fitted model/registry, or a mapping from PO id to a
    precomputed split probability matrix. Units left unassigned are dropped.
    """
    state = BacktestState("constrained", {}, {})
    for po in pos:
        key = (po.business_unit, po.period)
        if key not in state.remaining:
            caps = scenario.capacities(*key)
            if caps.shape != (penalty.K,):
                raise ShapeMismatch(f"scenario row {key} has {caps.shape[0]} warehouses")
            state.initial[key] = caps.copy()
            state.remaining[key] = caps
        E = None if existing is None else existing.get(po.id)
        I = ideal_splits(_split_rows(split_source, po), po.quantities, E)
        X, _, report = allocate(I, penalty, state.remaining[key], solver=solver, sku_ids=po.sku_ids)
        state.remaining[key] = state.remaining[key] - X.assigned.sum(axis=0)
        dropped = int(X.unassigned.sum())
        if dropped:
            log.info("%s: %d units not assigned to any warehouse", po.id, dropped)
        state.ledger.append(LedgerEntry(po.id, po.business_unit, po.period, tuple(po.sku_ids), I, X, report))
    return state


def heuristic_baseline(po: PurchaseOrder, capacities) -> AllocationMatrix:
    """Split each sku in proportion to the remaining capacities.

    Skus are taken in PO order and each one's share is deducted before the
    next, so the result is always capacity-feasible; whatever does not fit
    is left unassigned.
    """
    room = np.array(capacities, dtype=np.int64)
    K = room.shape[0]
    X = np.zeros((po.M, K + 1), dtype=np.int64)
    for i, n in enumerate(po.quantities.tolist()):
        total = int(room.sum())
        placed = min(n, total)
        if placed:
            row = largest_remainder(placed * room / total, placed)
            X[i, :K] = row
            room -= row
        X[i, K] = n - placed
    return AllocationMatrix(X, po.sku_ids)


def replay_heuristic(pos: Sequence[PurchaseOrder], scenario: CapacityScenario) -> BacktestState:
    state = BacktestState("heuristic", {}, {})
    for po in pos:
        key = (po.business_unit, po.period)
        if key not in state.remaining:
            state.initial[key] = scenario.capacities(*key)
            state.remaining[key] = state.initial[key].copy()
        X = heuristic_baseline(po, state.remaining[key])
        state.remaining[key] = state.remaining[key] - X.assigned.sum(axis=0)
        state.ledger.append(
            LedgerEntry(po.id, po.business_unit, po.period, tuple(po.sku_ids), X.assigned, X)
        )
    return state


@dataclass
class Tally:
    fulfilled: int = 0
    nearest: int = 0
    two_day: int = 0
    unserved: int = 0

    @property
    def ru(self) -> float:
        if not self.fulfilled:
            raise NoEvents("no event could be fulfilled; RU is undefined")
        return self.nearest / self.fulfilled

    @property
    def tdd(self) -> float:
        if not self.fulfilled:
            raise NoEvents("no event could be fulfilled; 2DD is undefined")
        return self.two_day / self.fulfilled


def _as_stock(allocations) -> dict[str, np.ndarray]:
    if isinstance(allocations, BacktestState):
        return allocations.stock()
    if isinstance(allocations, Mapping):
        return {k: np.asarray(v, dtype=np.int64) for k, v in allocations.items()}
    stock: dict[str, np.ndarray] = {}
    for X in allocations:
        for sku_id, row in zip(X.sku_ids, X.assigned):
            stock[sku_id] = stock.get(sku_id, 0) + row
    return stock


def simulate_fulfillment(
    allocations,
    events: Iterable[PurchaseEvent],
    penalty: PenaltyMatrix | None = None,
    group_of: Mapping[str, str] | None = None,
) -> dict[str | None, Tally]:
    """Serve events from stock; returns tallies overall (key None) and per group."""
    events = sorted(events, key=lambda e: e.timestamp)
    if not events:
        raise NoEvents("no purchase events to evaluate")
    stock = {k: np.array(v, dtype=np.int64) for k, v in _as_stock(allocations).items()}
    K = len(next(iter(stock.values()))) if stock else 0
    if penalty is not None:
        fallback = [np.argsort(penalty.truncated[j], kind="stable") for j in range(penalty.K)]
    else:
        fallback = [np.arange(K) for _ in range(K)]
    tallies: dict[str | None, Tally] = {None: Tally()}
    for ev in events:
        row = stock.get(ev.sku_id)
        groups = [None]
        if group_of is not None and ev.sku_id in group_of:
            groups.append(group_of[ev.sku_id])
        near = ev.nearest_warehouse_index
        src = None
        if row is not None:
            if row[near] > 0:
                src = near
            else:
                for j in fallback[near]:
                    if row[j] > 0:
                        src = int(j)
                        break
        for g in groups:
            t = tallies.setdefault(g, Tally())
            if src is None:
                t.unserved += 1
                continue
            t.fulfilled += 1
            t.nearest += src == near
            t.two_day += src in ev.two_day_serviceable_by
        if src is not None:
            row[src] -= 1
    return tallies


def estimate_ru(allocations, events, penalty: PenaltyMatrix | None = None) -> float:
    """Fraction of fulfilled events served by the buyer's nearest warehouse."""
    return simulate_fulfillment(allocations, events, penalty)[None].ru


def estimate_2dd(allocations, events, penalty: PenaltyMatrix | None = None) -> float:
    """Fraction of fulfilled events served by a warehouse with 2-day reach."""
    return simulate_fulfillment(allocations, events, penalty)[None].tdd


@dataclass
class Metrics:
    ru_ideal: float
    ru_constrained: float
    ru_heuristic: float
    tdd_ideal: float
    tdd_constrained: float
    tdd_heuristic: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


@dataclass
class MetricsReport:
    scenario: str
    overall: Metrics
    by_unit: dict[str, Metrics]
    unassigned: int
    events: int

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "overall": self.overall.as_dict(),
            "by_unit": {k: m.as_dict() for k, m in self.by_unit.items()},
            "unassigned": self.unassigned,
            "events": self.events,
        }


def report(
    state: BacktestState,
    heuristic: BacktestState,
    events: Sequence[PurchaseEvent],
    penalty: PenaltyMatrix | None = None,
    scenario: str = "",
) -> MetricsReport:
    group_of = {}
    for entry in state.ledger:
        for sku_id in entry.sku_ids:
            group_of[sku_id] = entry.business_unit
    runs = {
        "ideal": simulate_fulfillment(state.stock("ideal"), events, penalty, group_of),
        "constrained": simulate_fulfillment(state.stock(), events, penalty, group_of),
        "heuristic": simulate_fulfillment(heuristic.stock(), events, penalty, group_of),
    }

    def metrics(g):
        return Metrics(
            runs["ideal"][g].ru,
            runs["constrained"][g].ru,
            runs["heuristic"][g].ru,
            runs["ideal"][g].tdd,
            runs["constrained"][g].tdd,
            runs["heuristic"][g].tdd,
        )

    units = sorted({g for g in runs["ideal"] if g is not None})
    return MetricsReport(
        scenario,
        metrics(None),
        {u: metrics(u) for u in units},
        state.unassigned,
        len(events),
    )


def run_backtest(pos, scenario, split_source, penalty, events, existing=None, solver="flow"):
    """Replay both policies on one scenario and score them. Returns
    ``(report, constrained_state, heuristic_state)``."""
    state = replay(pos, scenario, split_source, penalty, existing, solver)
    heur = replay_heuristic(pos, scenario)
    return report(state, heur, events, penalty, scenario.name), state, heur
