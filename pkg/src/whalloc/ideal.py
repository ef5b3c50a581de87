"""Ideal (capacity-unconstrained) splits of a purchase order across warehouses."""

from __future__ import annotations

import numpy as np

from .types import check_split_probabilities


def fractional_splits_no_inventory(P, quantities) -> np.ndarray:
    P = check_split_probabilities(P)
    q = np.asarray(quantities, dtype=float)
    return q[:, None] * P


def nonneg_projection(target, existing_row, n: int) -> np.ndarray:
    """Inward quantities ``F >= 0`` with ``sum(F) == n`` that bring
    ``existing_row + F`` as close as possible (least squares) to ``target``.

    Works on the free set of coordinates: the equality-constrained optimum
    spreads the slack evenly, negative coordinates get pinned at zero, and
    the rest is re-solved. Each pass pins at least one coordinate, so it ends
    after at most K passes.
    """
    d = np.asarray(target, dtype=float) - np.asarray(existing_row, dtype=float)
    free = np.ones(d.shape[0], dtype=bool)
    out = np.zeros_like(d)
    while True:
        shift = (n - d[free].sum()) / free.sum()
        trial = d + shift
        neg = free & (trial < 0)
        if not neg.any():
            out[free] = trial[free]
            return out
        free &= ~neg


def fractional_splits_with_inventory(P, quantities, existing) -> np.ndarray:
    """Inward quantities so that post-inward stock mirrors the demand split.

    Per sku: ``total = N + sum(E)``, ``target = P * total``, ``F = target - E``.
    Rows where that would go negative fall back to :func:`nonneg_projection`.
    """
    P = check_split_probabilities(P)
    q = np.asarray(quantities, dtype=np.int64)
    E = np.asarray(existing, dtype=np.int64)
    total = (q + E.sum(axis=1)).astype(float)
    target = total[:, None] * P
    F = target - E
    for i in np.flatnonzero((F < 0).any(axis=1)):
        F[i] = nonneg_projection(target[i], E[i], int(q[i]))
    return F


def largest_remainder(values, total: int) -> np.ndarray:
    """Round ``values`` to integers summing to ``total``.

    Floors everything, then hands the leftover units to the largest
    fractional parts; ties go to the lowest index.
    """
    v = np.asarray(values, dtype=float)
    base = np.floor(v).astype(np.int64)
    frac = v - base
    left = int(total - base.sum())
    if left > 0:
        order = np.argsort(-frac, kind="stable")
        base[order[:left]] += 1
    elif left < 0:
        # float noise pushed the floors over the total; take from the smallest remainders
        order = np.argsort(frac, kind="stable")
        order = [j for j in order if base[j] > 0]
        base[order[:-left]] -= 1
    return base


def round_to_integers(F, quantities) -> np.ndarray:
    q = np.asarray(quantities, dtype=np.int64)
    F = np.asarray(F, dtype=float)
    out = np.zeros(F.shape, dtype=np.int64)
    for i in range(F.shape[0]):
        out[i] = largest_remainder(F[i], int(q[i]))
    return out


def ideal_splits(P, quantities, existing=None) -> np.ndarray:
    """Integer ideal split matrix ``I`` (rows sum to the order quantities)."""
    if existing is None or not np.any(existing):
        F = fractional_splits_no_inventory(P, quantities)
    else:
        F = fractional_splits_with_inventory(P, quantities, existing)
    return round_to_integers(F, quantities)
