import json
import shutil

import numpy as np
import pytest

from conftest import DEMO, FIXTURES
from whalloc import io as wio
from whalloc.cli import main
from whalloc.errors import DuplicateSku, NegativeQuantity, ParseError
from whalloc.types import AllocationMatrix

TIGHT = FIXTURES / "tight"
WH = ["A", "B", "C"]


def run(*args):
    return main([str(a) for a in args])


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- file parsing ---------------------------------------------------------------


def test_po_file_round_trip(tmp_path):
    pos = wio.load_po_file(DEMO / "pos.csv")
    wio.write_po_file(tmp_path / "pos.csv", pos)
    again = wio.load_po_file(tmp_path / "pos.csv")
    assert [p.lines for p in again] == [p.lines for p in pos]
    assert [(p.business_unit, p.period) for p in again] == [(p.business_unit, p.period) for p in pos]


def test_po_parse_errors(tmp_path):
    with pytest.raises(ParseError) as err:
        wio.load_po_file(write(tmp_path / "a.csv", "sku_id,quantity\nA,3\nB,three\n"))
    assert err.value.line == 3
    with pytest.raises(ParseError):
        wio.load_po_file(write(tmp_path / "b.csv", "sku_id,qty\nA,3\n"))
    with pytest.raises(ParseError):
        wio.load_po_file(write(tmp_path / "c.csv", "sku_id,quantity\nA,3,4\n"))
    with pytest.raises(ParseError):
        wio.load_po_file(tmp_path / "missing.csv")


def test_po_validation_errors(tmp_path):
    with pytest.raises(DuplicateSku):
        wio.load_po_file(write(tmp_path / "d.csv", "sku_id,quantity\nA,3\nA,1\n"))
    with pytest.raises(NegativeQuantity):
        wio.load_po_file(write(tmp_path / "z.csv", "sku_id,quantity\nA,0\n"))


def test_allocation_round_trip(tmp_path):
    X = AllocationMatrix(np.array([[1, 2, 0, 3], [0, 0, 5, 0]]), ["x", "y"])
    wio.write_allocations(tmp_path / "a.csv", WH, [("P", X)], ["# comment"])
    assert wio.load_allocations(tmp_path / "a.csv", WH) == {"P": X}


def test_scenarios_file(tmp_path):
    text = "scenario,warehouse,business_unit,capacity\ns,A,Apparel,5\ns,B,Apparel,inf\ns,A,,2\n"
    s = wio.load_scenarios(write(tmp_path / "s.csv", text), WH)["s"]
    assert s.capacities("Apparel", "2019-04").tolist() == [5, wio.UNLIMITED, 0]
    assert s.capacities("Footwear", "2019-04").tolist() == [2, 0, 0]
    with pytest.raises(ParseError):
        wio.load_scenarios(write(tmp_path / "t.csv", "warehouse,capacity\nZ,1\n"), WH)


def test_world_round_trip(tmp_path):
    world = wio.load_world(DEMO / "world.json")
    wio.save_world(tmp_path / "w.json", world)
    assert (tmp_path / "w.json").read_text() == (DEMO / "world.json").read_text()
    assert wio.load_world(DEMO / "world.json", lambda_na=1e6).penalty.lambda_na == 1e6


# -- allocate -------------------------------------------------------------------


def allocate(tmp_path, caps, *extra):
    out = tmp_path / "alloc.csv"
    code = run(
        "allocate", "--world", TIGHT / "world.json", "--po", TIGHT / "po.csv",
        "--probs", TIGHT / "probs.csv", "--capacities", caps, "--out", out, *extra,
    )
    return code, out


def test_uncapacitated_allocation_is_the_ideal_split(tmp_path):
    code, out = allocate(tmp_path, TIGHT / "unlimited.csv")
    assert code == 0
    assert wio.load_allocations(out, WH) == wio.load_allocations(TIGHT / "expected_unlimited.csv", WH)


@pytest.mark.parametrize("solver", ["flow", "oracle"])
def test_tight_allocation_matches_golden(tmp_path, solver):
    code, out = allocate(tmp_path, TIGHT / "capacities.csv", "--solver", solver, "--report", tmp_path / "r.json")
    assert code == 0
    assert wio.load_allocations(out, WH) == wio.load_allocations(TIGHT / "expected_tight.csv", WH)
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["orders"][0]["objective"] == 21
    assert rep["orders"][0]["unassigned"] == 1


def test_output_header_records_inputs(tmp_path):
    _, out = allocate(tmp_path, TIGHT / "capacities.csv")
    head = [l for l in out.read_text().splitlines() if l.startswith("#")]
    assert head[0].startswith("# whalloc ")
    assert any(l.startswith("# input po po.csv sha256=") for l in head)


def test_lambda_override_rejected_when_too_small(tmp_path, capsys):
    code, _ = allocate(tmp_path, TIGHT / "capacities.csv", "--lambda-na", "4")
    assert code == 1
    assert "lambda_na" in capsys.readouterr().err


def test_duplicate_sku_exit_code(tmp_path, capsys):
    po = write(tmp_path / "po.csv", "po_id,sku_id,quantity\nPO-1,s1,4\nPO-1,s1,2\n")
    code = run("allocate", "--world", TIGHT / "world.json", "--po", po, "--probs", TIGHT / "probs.csv",
               "--capacities", TIGHT / "capacities.csv", "--out", tmp_path / "o.csv")
    assert code == 1
    assert "DuplicateSku('s1')" in capsys.readouterr().err


def test_zero_quantity_exit_code(tmp_path):
    po = write(tmp_path / "po.csv", "po_id,sku_id,quantity\nPO-1,s1,0\n")
    code = run("allocate", "--world", TIGHT / "world.json", "--po", po, "--probs", TIGHT / "probs.csv",
               "--capacities", TIGHT / "capacities.csv", "--out", tmp_path / "o.csv")
    assert code == 1


def test_missing_model_exit_code(tmp_path):
    code = run("allocate", "--world", TIGHT / "world.json", "--po", TIGHT / "po.csv",
               "--model", tmp_path / "nope.json", "--capacities", TIGHT / "capacities.csv",
               "--out", tmp_path / "o.csv")
    assert code == 2


def test_malformed_po_exit_code(tmp_path):
    po = write(tmp_path / "po.csv", "po_id,sku_id,quantity\nPO-1,s1,many\n")
    code = run("allocate", "--world", TIGHT / "world.json", "--po", po, "--probs", TIGHT / "probs.csv",
               "--capacities", TIGHT / "capacities.csv", "--out", tmp_path / "o.csv")
    assert code == 2


# -- demo world -----------------------------------------------------------------


def test_committed_demo_world_is_reproducible(tmp_path):
    assert run("gen-world", "--seed", 7, "--out", tmp_path) == 0
    for name in ("world.json", "catalog.csv", "history_events.csv", "pos.csv", "scenarios.csv", "events.csv"):
        assert (tmp_path / name).read_bytes() == (DEMO / name).read_bytes(), name


@pytest.mark.slow
def test_committed_model_is_reproducible(tmp_path):
    code = run("train", "--world", DEMO / "world.json", "--catalog", DEMO / "catalog.csv",
               "--events", DEMO / "history_events.csv", "--out", tmp_path / "model.json")
    assert code == 0
    assert (tmp_path / "model.json").read_bytes() == (DEMO / "model.json").read_bytes()


def test_predict_splits(tmp_path):
    code = run("predict-splits", "--world", DEMO / "world.json", "--po", DEMO / "pos.csv",
               "--model", DEMO / "model.json", "--out", tmp_path / "p.csv", "--ideal-out", tmp_path / "i.csv")
    assert code == 0
    world = wio.load_world(DEMO / "world.json")
    rows = wio.load_sku_matrix(tmp_path / "p.csv", world.warehouses)
    assert all(abs(v.sum() - 1) < 1e-9 for v in rows.values())
    pos = {p.id: p for p in wio.load_po_file(DEMO / "pos.csv")}
    for po_id, X in wio.load_allocations(tmp_path / "i.csv", world.warehouses).items():
        assert np.array_equal(X.values.sum(axis=1), pos[po_id].quantities)


def backtest(out, *extra):
    return run("backtest", "--world", DEMO / "world.json", "--po", DEMO / "pos.csv",
               "--scenarios", DEMO / "scenarios.csv", "--events", DEMO / "events.csv",
               "--model", DEMO / "model.json", "--out", out, *extra)


def test_backtest_outputs_and_report(tmp_path):
    assert backtest(tmp_path / "bt", "--scenario", "scenario1", "--figures") == 0
    names = {p.name for p in (tmp_path / "bt").iterdir()}
    assert {"summary.json", "metrics.csv", "report.txt", "allocations_scenario1.csv",
            "heuristic_scenario1.csv", "metrics_all.png", "metrics_apparel.png"} <= names
    shutil.copy(tmp_path / "bt" / "summary.json", tmp_path / "s.json")
    assert run("report", "--in", tmp_path / "s.json", "--out", tmp_path / "rep") == 0
    assert (tmp_path / "rep" / "report.txt").read_text() == (tmp_path / "bt" / "report.txt").read_text()
    assert (tmp_path / "rep" / "metrics_footwear.png").stat().st_size > 0


def test_unknown_scenario(tmp_path):
    assert backtest(tmp_path / "bt", "--scenario", "scenario9") == 1


def test_empty_events_file(tmp_path, capsys):
    events = write(tmp_path / "events.csv", "timestamp,sku_id,pincode\n")
    code = run("backtest", "--world", DEMO / "world.json", "--po", DEMO / "pos.csv",
               "--scenarios", DEMO / "scenarios.csv", "--events", events,
               "--model", DEMO / "model.json", "--out", tmp_path / "bt")
    assert code == 1
    assert "no purchase events" in capsys.readouterr().err
