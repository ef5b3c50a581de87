"""World configuration and the seeded synthetic world generator.

A world fixes the warehouse order, which warehouse is nearest to each
pincode, which warehouses reach each pincode within two days, and the
redistribution penalties. The generator additionally draws a sku catalogue
whose regional demand depends on its attributes, purchase orders, two
reference-shaped capacity scenarios, and purchase event logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .types import PenaltyMatrix, PurchaseEvent, PurchaseOrder, Sku


@dataclass(frozen=True)
class PincodeInfo:
    nearest: int
    two_day: frozenset[int] = frozenset()


@dataclass
class WorldConfig:
    warehouses: list[str]
    pincodes: dict[str, PincodeInfo]
    penalty: PenaltyMatrix
    seed: int = 0
    distances: list[list[float]] | None = None
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        K = len(self.warehouses)
        if self.penalty.K != K:
            raise ValidationError(f"penalty matrix is for {self.penalty.K} warehouses, world has {K}")
        for code, info in self.pincodes.items():
            if not 0 <= info.nearest < K:
                raise ValidationError(f"pincode {code!r} maps to warehouse index {info.nearest}")

    @property
    def K(self) -> int:
        return len(self.warehouses)

    def warehouse_index(self, name: str) -> int:
        return self.warehouses.index(name)

    def event(self, sku_id: str, pincode: str, timestamp: datetime) -> PurchaseEvent:
        try:
            info = self.pincodes[pincode]
        except KeyError:
            raise ValidationError(f"pincode {pincode!r} is not in the world map") from None
        return PurchaseEvent(sku_id, pincode, timestamp, info.nearest, info.two_day)


# -- generator ---------------------------------------------------------------

BUSINESS_UNITS = {
    "Apparel": [("Tshirts", "Men"), ("Dresses", "Women"), ("Jeans", "Women")],
    "Footwear": [("Casual Shoes", "Men"), ("Heels", "Women")],
    "Personal Care": [("Lipstick", "Women")],
}

ATTRIBUTES = {
    "brand": ([f"brand{k:02d}" for k in range(10)], 1.6),
    "colour": (["black", "blue", "green", "maroon", "white", "yellow"], 0.8),
    "fabric": (["cotton", "denim", "linen", "polyester"], 0.6),
    "price_band": (["budget", "mid", "premium"], 0.7),
    "size": (["S", "M", "L", "XL"], 0.3),
    "sleeve": (["full", "half", "none"], 0.4),
}

# Capacity shares per warehouse, in the proportions of the two reference
# scenarios; None marks a warehouse that does not stock the business unit.
SCENARIO_SHARES = {
    "scenario1": {
        "Apparel": [1005714, 502857, 377143, 754286],
        "Footwear": [91429, 45714, 34286, 68571],
        "Personal Care": [102857, None, 17143, None],
    },
    "scenario2": {
        "Apparel": [550979, 721502, 844438, 546241],
        "Footwear": [50089, 65591, 76768, 49658],
        "Personal Care": [56350, None, 38384, None],
    },
}

PERIODS = ("2019-04", "2019-05")

DEFAULTS = {
    "warehouses": ["W1", "W2", "W3", "W4"],
    "sites": [[0.0, 0.0], [10.0, 2.0], [4.0, 9.0], [-6.0, 7.0]],
    "pincodes_per_cluster": 30,
    "two_day_radius": 4.0,
    "regional_base": {
        "Apparel": [0.35, 0.2, 0.2, 0.25],
        "Footwear": [0.35, 0.2, 0.2, 0.25],
        "Personal Care": [0.5, 0.1, 0.3, 0.1],
    },
    "skus_per_partition": 40,
    "history_events_per_sku": 60,
    "pos_per_unit_period": 6,
    "lines_per_po": [8, 20],
    "quantity_range": [20, 160],
    "sell_through": 0.85,
    "capacity_slack": 1.1,
}


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class SyntheticWorld:
    config: WorldConfig
    catalog: list[tuple[Sku, str]]
    true_split: dict[str, np.ndarray]
    history: list[tuple[str, str, str]]
    purchase_orders: list[PurchaseOrder]
    scenarios: list[tuple[str, str, str, str, int]]
    events: list[tuple[str, str, str]]


def _timestamp(rng, start: datetime, days: int) -> str:
    return (start + timedelta(seconds=int(rng.integers(0, days * 86400)))).isoformat()


def generate_world(seed: int = 7, **overrides) -> SyntheticWorld:
    """Draw a complete synthetic world. Identical seeds give identical worlds."""
    params = {**DEFAULTS, **overrides}
    rng = np.random.default_rng(seed)
    names = list(params["warehouses"])
    sites = np.asarray(params["sites"], dtype=float)
    K = len(names)

    # pincodes scattered around each warehouse; some fall outside 2-day reach
    pincodes: dict[str, PincodeInfo] = {}
    cluster_codes: list[list[str]] = [[] for _ in range(K)]
    radius = params["two_day_radius"]
    for j in range(K):
        for n in range(params["pincodes_per_cluster"]):
            for _ in range(100):
                spot = sites[j] + rng.normal(0.0, 2.6, size=2)
                d = np.linalg.norm(sites - spot, axis=1)
                if int(np.argmin(d)) == j:
                    break
            code = f"{j + 1}{n:04d}"
            pincodes[code] = PincodeInfo(j, frozenset(int(k) for k in np.flatnonzero(d <= radius)))
            cluster_codes[j].append(code)

    dist = np.linalg.norm(sites[:, None, :] - sites[None, :, :], axis=2)
    distances = np.round(dist).tolist()
    penalty = PenaltyMatrix.from_distances(distances)
    config = WorldConfig(names, pincodes, penalty, seed, distances, {"seed": seed, **params})

    # regional effect of every attribute value, centred so that the
    # business unit's base split stays the typical one
    effects = {}
    for name, (values, scale) in ATTRIBUTES.items():
        raw = rng.normal(0.0, scale, size=(len(values), K))
        raw -= raw.mean(axis=0)
        effects[name] = dict(zip(values, raw))

    catalog = []
    true_split = {}
    for bu, partitions in BUSINESS_UNITS.items():
        base = np.log(np.asarray(params["regional_base"][bu], dtype=float))
        for article, gender in partitions:
            tag = "".join(w[0] for w in article.split()) + gender[0]
            for n in range(params["skus_per_partition"]):
                attrs = {name: str(rng.choice(values)) for name, (values, _) in ATTRIBUTES.items()}
                sku = Sku(f"{tag}-{n:03d}", attrs, article, gender)
                z = base + sum(effects[a][v] for a, v in attrs.items())
                catalog.append((sku, bu))
                true_split[sku.id] = _softmax(z)

    def draw_events(sku_id, count, start, days):
        regions = rng.choice(K, size=count, p=true_split[sku_id])
        return [
            (_timestamp(rng, start, days), sku_id, str(rng.choice(cluster_codes[r])))
            for r in regions
        ]

    history = []
    for sku, _ in catalog:
        count = int(rng.poisson(params["history_events_per_sku"]))
        history += draw_events(sku.id, count, datetime(2019, 1, 1), 90)
    history.sort()

    by_unit = {}
    for sku, bu in catalog:
        by_unit.setdefault(bu, []).append(sku)
    pos = []
    lo, hi = params["lines_per_po"]
    qlo, qhi = params["quantity_range"]
    for period in PERIODS:
        for bu, skus in by_unit.items():
            for n in range(params["pos_per_unit_period"]):
                pick = rng.choice(len(skus), size=min(int(rng.integers(lo, hi + 1)), len(skus)), replace=False)
                lines = [(skus[k], int(rng.integers(qlo, qhi + 1))) for k in sorted(pick)]
                po_id = f"PO-{period}-{bu.replace(' ', '')}-{n + 1:02d}"
                pos.append(PurchaseOrder(po_id, tuple(lines), bu, period))

    demand: dict[tuple[str, str], int] = {}
    for po in pos:
        demand[po.business_unit, po.period] = demand.get((po.business_unit, po.period), 0) + po.N
    scenarios = []
    for scen, table in SCENARIO_SHARES.items():
        for period in PERIODS:
            for bu, shares in table.items():
                total = sum(s for s in shares if s is not None)
                budget = demand.get((bu, period), 0) * params["capacity_slack"]
                for j, s in enumerate(shares):
                    if s is not None:
                        scenarios.append((scen, names[j], period, bu, int(round(budget * s / total))))

    bought: dict[str, int] = {}
    for po in pos:
        for sku, q in po.lines:
            bought[sku.id] = bought.get(sku.id, 0) + q
    events = []
    for sku_id in sorted(bought):
        count = int(rng.binomial(bought[sku_id], params["sell_through"]))
        events += draw_events(sku_id, count, datetime(2019, 4, 15), 90)
    events.sort()

    return SyntheticWorld(config, catalog, true_split, history, pos, scenarios, events)


def training_corpus(config: WorldConfig, records, catalog: Mapping[str, Sku]):
    """Label each (timestamp, sku_id, pincode) record with the buyer's nearest warehouse."""
    from .split_model import TrainingCorpus

    skus, labels = [], []
    for _, sku_id, pincode in records:
        if sku_id not in catalog:
            raise ValidationError(f"event for sku {sku_id!r} missing from the catalogue")
        skus.append(catalog[sku_id])
        labels.append(config.event(sku_id, pincode, datetime.min).nearest_warehouse_index)
    return TrainingCorpus(skus, np.array(labels, dtype=np.int64), config.K)
