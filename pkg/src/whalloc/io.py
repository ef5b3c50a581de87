"""CSV and JSON file formats.

All CSV readers skip blank lines and lines starting with ``#``; every
writer starts its file with ``#`` lines naming the tool version, the seed
and a SHA-256 digest of each input, so outputs can be traced to inputs.

Formats (columns in any order unless noted):

* purchase orders   ``po_id,period,business_unit,sku_id,quantity,article_type,gender,attr:<name>...``
                    (only ``sku_id`` and ``quantity`` are required)
* catalogue         ``sku_id,business_unit,article_type,gender,attr:<name>...``
* events            ``timestamp,sku_id,pincode`` (ISO 8601 timestamps)
* capacities        ``[scenario,]warehouse,period,business_unit,capacity``;
                    ``*`` or a missing column matches anything, ``inf`` is unlimited
* split matrices    ``[po_id,]sku_id,<warehouse>...`` (probabilities or existing stock)
* allocations       ``po_id,sku_id,<warehouse>...,unassigned``
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .backtest import CapacityScenario
from .errors import ParseError, ValidationError
from .types import AllocationMatrix, PenaltyMatrix, PurchaseOrder, Sku, instance_violations
from .world import PincodeInfo, WorldConfig

UNLIMITED = 10**15
WORLD_FORMAT = "whalloc-world"


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def header_lines(seed=None, inputs: Mapping[str, object] | None = None) -> list[str]:
    lines = [f"# whalloc {__version__}", f"# seed {seed if seed is not None else '-'}"]
    for name, path in (inputs or {}).items():
        if path is not None:
            lines.append(f"# input {name} {Path(path).name} sha256={digest(path)}")
    return lines


def _read_rows(path) -> tuple[list[str], list[tuple[int, dict]]]:
    """Header and (line number, row dict) pairs of a commented CSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(str(path), 0, "file not found") from None
    except OSError as exc:
        raise ParseError(str(path), 0, str(exc)) from None
    numbered = [
        (n, line)
        for n, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise ParseError(str(path), 1, "no header row")
    reader = csv.reader([line for _, line in numbered])
    header = [h.strip() for h in next(reader)]
    rows = []
    for (n, _), values in zip(numbered[1:], reader):
        if len(values) != len(header):
            raise ParseError(str(path), n, f"expected {len(header)} fields, got {len(values)}")
        rows.append((n, dict(zip(header, (v.strip() for v in values)))))
    return header, rows


def _require(path, header, names):
    missing = [c for c in names if c not in header]
    if missing:
        raise ParseError(str(path), 1, f"missing column(s): {', '.join(missing)}")


def _int(path, n, value, what) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(str(path), n, f"{what} {value!r} is not an integer") from None


def _float(path, n, value, what) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(str(path), n, f"{what} {value!r} is not a number") from None


def _sku_from(row: Mapping[str, str]) -> Sku:
    attrs = {k[5:]: v for k, v in row.items() if k.startswith("attr:")}
    return Sku(row["sku_id"], attrs, row.get("article_type", ""), row.get("gender", ""))


def load_po_file(path) -> list[PurchaseOrder]:
    """Purchase orders in file order; rows are grouped by ``po_id``."""
    header, rows = _read_rows(path)
    _require(path, header, ["sku_id", "quantity"])
    groups: dict[str, dict] = {}
    for n, row in rows:
        qty = _int(path, n, row["quantity"], "quantity")
        po_id = row.get("po_id") or "PO-1"
        g = groups.setdefault(
            po_id, {"lines": [], "bu": row.get("business_unit", ""), "period": row.get("period", "")}
        )
        g["lines"].append((_sku_from(row), qty))
    pos = []
    for po_id, g in groups.items():
        po = PurchaseOrder(po_id, tuple(g["lines"]), g["bu"], g["period"])
        found = instance_violations(po)
        if found:
            found[0].violations = found
            raise found[0]
        pos.append(po)
    return pos


def write_po_file(path, pos: Sequence[PurchaseOrder], header: Sequence[str] = ()) -> None:
    attr_names = sorted({a for po in pos for s in po.skus for a in s.attributes})
    cols = ["po_id", "period", "business_unit", "sku_id", "quantity", "article_type", "gender"]
    cols += [f"attr:{a}" for a in attr_names]
    rows = []
    for po in pos:
        for sku, q in po.lines:
            rows.append(
                [po.id, po.period, po.business_unit, sku.id, q, sku.article_type, sku.gender]
                + [sku.attributes.get(a, "") for a in attr_names]
            )
    _write_csv(path, cols, rows, header)


def load_catalog(path) -> tuple[dict[str, Sku], dict[str, str]]:
    """Skus by id, and each sku's business unit."""
    header, rows = _read_rows(path)
    _require(path, header, ["sku_id"])
    skus, units = {}, {}
    for n, row in rows:
        if row["sku_id"] in skus:
            raise ParseError(str(path), n, f"sku {row['sku_id']!r} listed twice")
        skus[row["sku_id"]] = _sku_from(row)
        units[row["sku_id"]] = row.get("business_unit", "")
    return skus, units


def write_catalog(path, catalog: Iterable[tuple[Sku, str]], header: Sequence[str] = ()) -> None:
    catalog = list(catalog)
    attr_names = sorted({a for s, _ in catalog for a in s.attributes})
    cols = ["sku_id", "business_unit", "article_type", "gender"] + [f"attr:{a}" for a in attr_names]
    rows = [
        [s.id, bu, s.article_type, s.gender] + [s.attributes.get(a, "") for a in attr_names]
        for s, bu in catalog
    ]
    _write_csv(path, cols, rows, header)


def load_event_records(path) -> list[tuple[str, str, str]]:
    header, rows = _read_rows(path)
    _require(path, header, ["timestamp", "sku_id", "pincode"])
    out = []
    for n, row in rows:
        try:
            datetime.fromisoformat(row["timestamp"])
        except ValueError:
            raise ParseError(str(path), n, f"bad timestamp {row['timestamp']!r}") from None
        out.append((row["timestamp"], row["sku_id"], row["pincode"]))
    return out


def load_events(path, world: WorldConfig):
    return [world.event(s, p, datetime.fromisoformat(ts)) for ts, s, p in load_event_records(path)]


def write_events(path, records: Iterable[tuple[str, str, str]], header: Sequence[str] = ()) -> None:
    _write_csv(path, ["timestamp", "sku_id", "pincode"], [list(r) for r in records], header)


def load_scenarios(path, warehouses: Sequence[str]) -> dict[str, CapacityScenario]:
    header, rows = _read_rows(path)
    _require(path, header, ["warehouse", "capacity"])
    tables: dict[str, dict] = {}
    for n, row in rows:
        wh = row["warehouse"]
        if wh not in warehouses:
            raise ParseError(str(path), n, f"unknown warehouse {wh!r}")
        raw = row["capacity"].lower()
        cap = UNLIMITED if raw in ("inf", "unlimited") else _int(path, n, raw, "capacity")
        if cap < 0:
            raise ValidationError(f"{path}:{n}: negative capacity {cap}", where=n)
        key = (row.get("business_unit") or "*", row.get("period") or "*")
        table = tables.setdefault(row.get("scenario") or "default", {})
        vec = table.setdefault(key, np.zeros(len(warehouses), dtype=np.int64))
        vec[list(warehouses).index(wh)] = cap
    return {
        name: CapacityScenario(name, tuple(warehouses), table) for name, table in tables.items()
    }


def write_scenarios(path, rows: Iterable[tuple], header: Sequence[str] = ()) -> None:
    cols = ["scenario", "warehouse", "period", "business_unit", "capacity"]
    _write_csv(path, cols, [list(r) for r in rows], header)


def load_sku_matrix(path, warehouses: Sequence[str], integer: bool = False) -> dict[tuple[str, str], np.ndarray]:
    """Rows keyed by (po_id or "", sku_id)."""
    header, rows = _read_rows(path)
    _require(path, header, ["sku_id", *warehouses])
    out = {}
    for n, row in rows:
        conv = _int if integer else _float
        vec = np.array([conv(path, n, row[w], w) for w in warehouses])
        out[(row.get("po_id", ""), row["sku_id"])] = vec
    return out


def matrix_for(po: PurchaseOrder, rows: Mapping[tuple[str, str], np.ndarray], K: int, default=None):
    """Stack the rows belonging to one PO (falling back to rows without a po_id)."""
    out = []
    for sku_id in po.sku_ids:
        vec = rows.get((po.id, sku_id), rows.get(("", sku_id)))
        if vec is None:
            if default is None:
                raise ValidationError(f"no row for sku {sku_id!r} of {po.id}")
            vec = np.full(K, default)
        out.append(vec)
    return np.array(out).reshape(len(out), K)


def write_sku_matrix(path, warehouses, blocks: Iterable[tuple[PurchaseOrder, np.ndarray]], header=()) -> None:
    rows = []
    for po, P in blocks:
        for sku_id, row in zip(po.sku_ids, P):
            rows.append([po.id, sku_id] + [repr(float(x)) for x in row])
    _write_csv(path, ["po_id", "sku_id", *warehouses], rows, header)


def write_allocations(path, warehouses, blocks: Iterable[tuple[str, AllocationMatrix]], header=()) -> None:
    rows = []
    for po_id, X in blocks:
        for sku_id, row in zip(X.sku_ids, X.values):
            rows.append([po_id, sku_id] + [int(v) for v in row])
    _write_csv(path, ["po_id", "sku_id", *warehouses, "unassigned"], rows, header)


def load_allocations(path, warehouses: Sequence[str]) -> dict[str, AllocationMatrix]:
    header, rows = _read_rows(path)
    _require(path, header, ["sku_id", *warehouses, "unassigned"])
    cols = [*warehouses, "unassigned"]
    groups: dict[str, tuple[list, list]] = {}
    for n, row in rows:
        ids, vals = groups.setdefault(row.get("po_id", ""), ([], []))
        ids.append(row["sku_id"])
        vals.append([_int(path, n, row[c], c) for c in cols])
    return {
        po_id: AllocationMatrix(np.array(vals, dtype=np.int64).reshape(len(vals), len(cols)), ids)
        for po_id, (ids, vals) in groups.items()
    }


def _write_csv(path, cols, rows, header=()) -> None:
    buf = _io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# -- world config ------------------------------------------------------------


def world_to_dict(world: WorldConfig) -> dict:
    doc = {"format": WORLD_FORMAT, "version": 1, "seed": world.seed, "warehouses": world.warehouses}
    if world.distances is not None:
        doc["distances"] = world.distances
        doc["lambda_na"] = world.penalty.lambda_na
    else:
        doc["penalties"] = world.penalty.truncated.tolist()
        doc["lambda_na"] = world.penalty.lambda_na
    doc["pincodes"] = {
        code: {
            "nearest": world.warehouses[info.nearest],
            "two_day": [world.warehouses[j] for j in sorted(info.two_day)],
        }
        for code, info in sorted(world.pincodes.items())
    }
    if world.generator:
        doc["generator"] = world.generator
    return doc


def save_world(path, world: WorldConfig) -> None:
    Path(path).write_text(json.dumps(world_to_dict(world), indent=1) + "\n", encoding="utf-8")


def load_world(path, lambda_na: float | None = None) -> WorldConfig:
    """Read a world file; ``lambda_na`` overrides the value stored in it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(str(path), 0, "file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.msg) from None
    if doc.get("format") != WORLD_FORMAT:
        raise ParseError(str(path), 1, f"not a {WORLD_FORMAT} file")
    try:
        names = list(doc["warehouses"])
        lam = lambda_na if lambda_na is not None else doc.get("lambda_na")
        if "distances" in doc:
            penalty = PenaltyMatrix.from_distances(doc["distances"], lam)
        else:
            penalty = PenaltyMatrix.from_costs(doc["penalties"], lam)
        pincodes = {}
        for code, info in doc["pincodes"].items():
            if info["nearest"] not in names:
                raise ParseError(str(path), 0, f"pincode {code!r}: unknown warehouse {info['nearest']!r}")
            pincodes[code] = PincodeInfo(
                names.index(info["nearest"]),
                frozenset(names.index(w) for w in info.get("two_day", [])),
            )
    except (KeyError, TypeError) as exc:
        raise ParseError(str(path), 0, f"malformed world file: {exc!r}") from None
    return WorldConfig(names, pincodes, penalty, int(doc.get("seed", 0)), doc.get("distances"), doc.get("generator", {}))


# -- backtest outputs ----------------------------------------------------------

METRIC_ROWS = [
    ("ru_ideal", "RU (ideal splits)"),
    ("ru_constrained", "RU (constrained splits)"),
    ("ru_heuristic", "RU (heuristic baseline)"),
    ("tdd_ideal", "2DD (ideal splits)"),
    ("tdd_constrained", "2DD (constrained splits)"),
    ("tdd_heuristic", "2DD (heuristic baseline)"),
]


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def metrics_table_rows(summary: Mapping) -> list[list[str]]:
    """``unit,metric,<scenario>...`` rows from a backtest summary document."""
    scenarios = list(summary["scenarios"])
    units = ["All"] + sorted(summary["scenarios"][scenarios[0]]["by_unit"])
    rows = []
    for unit in units:
        for key, label in METRIC_ROWS:
            vals = []
            for s in scenarios:
                block = summary["scenarios"][s]
                m = block["overall"] if unit == "All" else block["by_unit"].get(unit)
                vals.append(_fmt(m[key]) if m else "")
            rows.append([unit, label, *vals])
    return rows


def write_metrics_csv(path, summary: Mapping, header=()) -> None:
    cols = ["business_unit", "metric", *summary["scenarios"]]
    _write_csv(path, cols, metrics_table_rows(summary), header)


def render_text_report(summary: Mapping) -> str:
    scenarios = list(summary["scenarios"])
    out = []
    by_unit: dict[str, list] = {}
    for unit, label, *vals in metrics_table_rows(summary):
        by_unit.setdefault(unit, []).append((label, vals))
    width = max(len(label) for _, label in METRIC_ROWS)
    for unit, rows in by_unit.items():
        title = "All business units" if unit == "All" else unit
        out.append(f"{title} RU and 2DD estimates")
        out.append(f"{'Metric':<{width}}  " + "  ".join(f"{s:>10}" for s in scenarios))
        for i, (label, vals) in enumerate(rows):
            if i == 3:
                out.append("-" * (width + 12 * len(scenarios)))
            out.append(f"{label:<{width}}  " + "  ".join(f"{v:>10}" for v in vals))
        out.append("")
    for s in scenarios:
        out.append(f"{s}: {summary['scenarios'][s]['unassigned']} units not assigned")
    return "\n".join(out) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(str(path), 0, "file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.msg) from None
