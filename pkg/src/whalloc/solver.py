"""Capacity-feasible allocations that distort the ideal splits as little as possible.

Both formulations (one binary variable per exploded item, or one integer
per sku/ideal/final warehouse triple) charge each unit ``L[ideal, final]``.
That cost does not depend on the sku, so both collapse to the same
K-source, (K+1)-sink transportation problem over aggregate supplies
``S_u = sum_i I[i, u]``, which min-cost flow solves exactly and integrally.
The optimal aggregate flow is then split back to skus in a fixed order.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import InstanceTooLarge, ShapeMismatch, ValidationError
from .flow import MinCostFlow
from .types import AllocationMatrix, PenaltyMatrix, as_capacity_vector

FLOAT_EPS = 1e-9
COST_SCALE = 10**6
ORACLE_MAX_UNITS = 20
ORACLE_MAX_WAREHOUSES = 3


@dataclass
class SolveReport:
    objective: float
    solver: str
    iterations: int
    wall_time: float
    warm_start_used: bool = False
    warm_start_rejected: bool = False


@dataclass(frozen=True)
class ExplodedOrder:
    """One row per unit of the order: its sku and its ideal warehouse."""

    sku_index: np.ndarray
    ideal: np.ndarray
    K: int

    @property
    def N(self) -> int:
        return int(self.sku_index.shape[0])

    @property
    def items(self) -> list[tuple[int, int]]:
        return list(zip(self.sku_index.tolist(), self.ideal.tolist()))

    @property
    def W(self) -> np.ndarray:
        w = np.zeros((self.N, self.K), dtype=np.int64)
        w[np.arange(self.N), self.ideal] = 1
        return w


def explode(I, po=None) -> ExplodedOrder:
    """Expand ideal splits to one item per unit, in sku order then warehouse order."""
    I = np.asarray(I, dtype=np.int64)
    if po is not None and not np.array_equal(I.sum(axis=1), po.quantities):
        raise ValidationError("ideal splits do not match the order quantities")
    M, K = I.shape
    rows = np.repeat(np.arange(M), K)
    cols = np.tile(np.arange(K), M)
    counts = I.ravel()
    return ExplodedOrder(np.repeat(rows, counts), np.repeat(cols, counts), K)


def _integer_costs(matrix: np.ndarray):
    """Costs as exact ints scaled by 10**6, or None if some entry needs more digits."""
    out = []
    for x in matrix.ravel().tolist():
        d = Decimal(repr(float(x)))
        if d.as_tuple().exponent < -6:
            return None
        out.append(int(d * COST_SCALE))
    return np.array(out, dtype=object).reshape(matrix.shape)


def _check_inputs(I, L: PenaltyMatrix, C):
    I = np.asarray(I)
    if I.ndim != 2 or I.shape[1] != L.K:
        raise ShapeMismatch(f"ideal splits of shape {I.shape} with a {L.K}-warehouse penalty matrix")
    if (I < 0).any():
        raise ValidationError("ideal splits must be nonnegative")
    C = as_capacity_vector(C)
    if C.shape != (L.K,):
        raise ShapeMismatch(f"capacity vector of shape {C.shape} for {L.K} warehouses")
    return I.astype(np.int64), C


def _valid_warm_start(Y0, I, C) -> bool:
    Y0 = np.asarray(Y0)
    M, K = I.shape
    if Y0.shape != (M, K, K + 1) or Y0.dtype.kind not in "iu":
        return False
    if (Y0 < 0).any() or not np.array_equal(Y0.sum(axis=2), I):
        return False
    return bool((Y0.sum(axis=(0, 1))[:K] <= C).all())


def transport(supply, L: PenaltyMatrix, capacities, warm_flow=None):
    """Optimal aggregate flow ``f[u, v]`` for supplies at ideal warehouses.

    ``capacities`` may contain ``inf``. A warm flow (already feasible) is
    improved by cycle cancelling instead of building the flow from scratch.
    Returns ``(f, cost, iterations)``; cost is in the units of ``L``.
    """
    S = [int(s) for s in supply]
    K = len(S)
    N = sum(S)
    caps = [int(min(c, N)) for c in np.asarray(capacities, dtype=float)]
    icosts = _integer_costs(L.matrix)
    if icosts is not None:
        costs, eps, scale = icosts, 0.0, COST_SCALE
    else:
        costs, eps, scale = L.matrix.tolist(), FLOAT_EPS, 1
        costs = np.array(costs, dtype=object)

    src, sink = 0, 2 * K + 2
    g = MinCostFlow(2 * K + 3, eps=eps)
    out_edges = {}
    sink_edges = []
    for u in range(K):
        g.add_edge(src, 1 + u, S[u], 0)
    for u in range(K):
        for v in range(K + 1):
            out_edges[u, v] = g.add_edge(1 + u, K + 1 + v, S[u], costs[u, v])
    for v in range(K):
        sink_edges.append(g.add_edge(K + 1 + v, sink, caps[v], 0))
    sink_edges.append(g.add_edge(2 * K + 1, sink, N, 0))

    if warm_flow is None:
        sent, iterations = g.successive_shortest_paths(src, sink, N)
        assert sent == N, "the non-assignment sink makes every instance feasible"
    else:
        wf = np.asarray(warm_flow, dtype=np.int64)
        for u in range(K):
            g.push(u * 2, S[u])
            for v in range(K + 1):
                g.push(out_edges[u, v], int(wf[u, v]))
        for v in range(K + 1):
            g.push(sink_edges[v], int(wf[:, v].sum()))
        iterations = g.cancel_negative_cycles()

    f = np.zeros((K, K + 1), dtype=np.int64)
    for (u, v), e in out_edges.items():
        f[u, v] = g.flow[e]
    cost = g.total_cost()
    return f, (cost / scale if scale != 1 else float(cost)), iterations


def disaggregate(I, f) -> np.ndarray:
    """Split aggregate flow back to skus: skus in order, then (u, v) ascending."""
    I = np.asarray(I, dtype=np.int64)
    M, K = I.shape
    rem = np.array(f, dtype=np.int64)
    Y = np.zeros((M, K, K + 1), dtype=np.int64)
    for i in range(M):
        for u in range(K):
            need = int(I[i, u])
            v = 0
            while need:
                take = min(need, int(rem[u, v]))
                if take:
                    Y[i, u, v] = take
                    rem[u, v] -= take
                    need -= take
                v += 1
    return Y


def ip_objective(Y, L: PenaltyMatrix) -> float:
    """Total redistribution cost: the sum over skus of trace(Y_i L^T)."""
    return float(sum(np.trace(Yi @ L.matrix.T) for Yi in np.asarray(Y, dtype=float)))


def bip_objective(Y, W, L: PenaltyMatrix) -> float:
    """Item-level cost: each assigned item pays L'[ideal, final], the rest pay lambda_na.

    The per-item assignment cost is the diagonal of ``W L' Y^T``.
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    assign = float(np.einsum("nk,kj,nj->", W, L.truncated, Y))
    z = 1.0 - Y.sum(axis=1)
    return assign + L.lambda_na * float(z.sum())


def all_unassigned_start(I) -> np.ndarray:
    I = np.asarray(I, dtype=np.int64)
    M, K = I.shape
    Y = np.zeros((M, K, K + 1), dtype=np.int64)
    Y[:, :, K] = I
    return Y


def greedy_start(I, C) -> np.ndarray:
    """Keep units at their ideal warehouse while it has room; leave the rest out."""
    I = np.asarray(I, dtype=np.int64)
    M, K = I.shape
    room = np.minimum(np.asarray(C, dtype=float), I.sum()).astype(np.int64)
    Y = np.zeros((M, K, K + 1), dtype=np.int64)
    for i in range(M):
        for u in range(K):
            keep = min(int(I[i, u]), int(room[u]))
            room[u] -= keep
            Y[i, u, u] = keep
            Y[i, u, K] = I[i, u] - keep
    return Y


def solve_ip(I, L: PenaltyMatrix, C, warm_start=None):
    """Sku-level integer program, solved exactly through the aggregate flow.

    ``warm_start`` is an optional feasible tensor (see :func:`greedy_start`);
    an infeasible one is ignored and flagged on the report.
    """
    t0 = time.perf_counter()
    I, C = _check_inputs(I, L, C)
    supply = I.sum(axis=0)
    warm_flow = None
    rejected = False
    if warm_start is not None:
        if _valid_warm_start(warm_start, I, C):
            warm_flow = np.asarray(warm_start).sum(axis=0)
        else:
            rejected = True
    f, cost, iterations = transport(supply, L, C, warm_flow)
    Y = disaggregate(I, f)
    report = SolveReport(
        objective=cost,
        solver="flow",
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        warm_start_used=warm_flow is not None,
        warm_start_rejected=rejected,
    )
    return Y, report


def solve_bip(ex: ExplodedOrder, L: PenaltyMatrix, C):
    """Item-level binary program. Returns ``(Y, report)`` with ``Y`` of shape N x K;
    an all-zero row means the item is not assigned.
    """
    t0 = time.perf_counter()
    if ex.K != L.K:
        raise ShapeMismatch(f"{ex.K}-warehouse order with a {L.K}-warehouse penalty matrix")
    C = as_capacity_vector(C)
    supply = np.bincount(ex.ideal, minlength=ex.K)
    f, cost, iterations = transport(supply, L, C)
    Y = np.zeros((ex.N, ex.K), dtype=np.int64)
    for u in range(ex.K):
        items = np.flatnonzero(ex.ideal == u)
        start = 0
        for v in range(ex.K):
            Y[items[start : start + f[u, v]], v] = 1
            start += int(f[u, v])
    report = SolveReport(cost, "flow-bip", iterations, time.perf_counter() - t0)
    return Y, report


def extract_allocation(Y, sku_ids=()) -> AllocationMatrix:
    """Collapse a sku flow tensor to per-warehouse quantities plus the unassigned column."""
    return AllocationMatrix(np.asarray(Y, dtype=np.int64).sum(axis=1), sku_ids)


def bip_allocation(ex: ExplodedOrder, Y, M: int, sku_ids=()) -> AllocationMatrix:
    Y = np.asarray(Y, dtype=np.int64)
    X = np.zeros((M, ex.K + 1), dtype=np.int64)
    np.add.at(X[:, :-1], ex.sku_index, Y)
    X[:, -1] = np.bincount(ex.sku_index, minlength=M) - X[:, :-1].sum(axis=1)
    return AllocationMatrix(X, sku_ids)


def _compositions(n: int, parts: int) -> np.ndarray:
    """All ways to put n identical units into ``parts`` bins (stars and bars)."""
    rows = []
    for bars in itertools.combinations(range(n + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(n + parts - 1 - prev - 1)
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, parts)


def brute_force_solve(I, L: PenaltyMatrix, C):
    """Exhaustive reference solver for tiny instances (tests only).

    Enumerates every final-warehouse choice for every unit. Units sharing an
    ideal warehouse are interchangeable, so each multiset of choices per ideal
    warehouse is visited once. Partial assignments that already overflow a
    capacity are dropped; loads only grow, so nothing feasible is lost.
    """
    I, C = _check_inputs(I, L, C)
    M, K = I.shape
    N = int(I.sum())
    if N > ORACLE_MAX_UNITS or K > ORACLE_MAX_WAREHOUSES:
        raise InstanceTooLarge(f"N={N}, K={K} exceeds N<={ORACLE_MAX_UNITS}, K<={ORACLE_MAX_WAREHOUSES}")
    caps = np.minimum(np.asarray(C, dtype=float), N)
    Lm = L.matrix
    supply = I.sum(axis=0)

    cost = np.zeros(1)
    load = np.zeros((1, K), dtype=np.int64)
    picks = np.zeros((1, 0), dtype=np.int64)
    options = []
    for u in range(K):
        comps = _compositions(int(supply[u]), K + 1)
        options.append(comps)
        c_u = comps @ Lm[u]
        cost = (cost[:, None] + c_u[None, :]).ravel()
        load = (load[:, None, :] + comps[None, :, :K]).reshape(-1, K)
        picks = np.hstack(
            [np.repeat(picks, len(comps), axis=0), np.tile(np.arange(len(comps)), picks.shape[0])[:, None]]
        )
        ok = (load <= caps).all(axis=1)
        cost, load, picks = cost[ok], load[ok], picks[ok]

    best = int(np.argmin(cost))
    f = np.vstack([options[u][picks[best, u]] for u in range(K)])

    Y = np.zeros((M, K, K + 1), dtype=np.int64)
    left = f.copy()
    for i in range(M):
        for u in range(K):
            for v in range(K + 1):
                take = min(I[i, u] - Y[i, u].sum(), left[u, v])
                Y[i, u, v] = take
                left[u, v] -= take
    return Y, float(cost[best])


def allocate(I, L: PenaltyMatrix, C, solver: str = "flow", sku_ids=(), warm_start=None):
    """Ideal splits to a feasible allocation. ``solver`` is ``"flow"`` or ``"oracle"``."""
    if solver == "flow":
        Y, report = solve_ip(I, L, C, warm_start=warm_start)
    elif solver == "oracle":
        t0 = time.perf_counter()
        Y, obj = brute_force_solve(I, L, C)
        report = SolveReport(obj, "oracle", 0, time.perf_counter() - t0)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return extract_allocation(Y, sku_ids), Y, report
