"""Warehouse allocation for purchase orders.

Pipeline: demand split probabilities per sku (:mod:`whalloc.split_model`),
integer ideal splits (:mod:`whalloc.ideal`), and the cheapest
capacity-feasible redistribution of those splits (:mod:`whalloc.solver`).
:mod:`whalloc.backtest` replays orders against capacity scenarios and
estimates regional utilisation and two-day delivery.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateLabels,
    DuplicateSku,
    EmptyCorpus,
    InstanceTooLarge,
    NegativeQuantity,
    NoEvents,
    ParseError,
    ScenarioGap,
    ShapeMismatch,
    ValidationError,
)
from .ideal import ideal_splits  # noqa: E402
from .solver import allocate, brute_force_solve, solve_bip, solve_ip  # noqa: E402
from .types import (  # noqa: E402
    AllocationMatrix,
    PenaltyMatrix,
    PurchaseOrder,
    Sku,
    WarehouseSet,
    validate_instance,
)
