"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 unreadable/unparseable input,
3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as wio
from . import split_model
from .backtest import replay, run_backtest
from .errors import DegenerateLabels, ParseError, ValidationError, WhallocError
from .ideal import ideal_splits
from .world import generate_world, training_corpus

log = logging.getLogger("whalloc")

EXIT_OK, EXIT_VALIDATION, EXIT_PARSE, EXIT_INTERNAL = 0, 1, 2, 3


def _split_source(args, world, pos):
    if getattr(args, "model", None):
        return split_model.load(args.model)
    if getattr(args, "probs", None):
        rows = wio.load_sku_matrix(args.probs, world.warehouses)
        return {po.id: wio.matrix_for(po, rows, world.K) for po in pos}
    raise ValidationError("one of --model or --probs is required")


def _existing(args, world, pos):
    if not getattr(args, "existing", None):
        return None
    rows = wio.load_sku_matrix(args.existing, world.warehouses, integer=True)
    return {po.id: wio.matrix_for(po, rows, world.K, default=0).astype(np.int64) for po in pos}


def _pick_scenarios(path, world, name):
    scenarios = wio.load_scenarios(path, world.warehouses)
    if name is None:
        return scenarios
    if name not in scenarios:
        raise ValidationError(f"scenario {name!r} not in {path} (have: {', '.join(scenarios)})")
    return {name: scenarios[name]}


def cmd_gen_world(args) -> int:
    seed = args.seed if args.seed is not None else 7
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w = generate_world(seed)
    head = wio.header_lines(seed)
    wio.save_world(out / "world.json", w.config)
    wio.write_catalog(out / "catalog.csv", w.catalog, head)
    wio.write_events(out / "history_events.csv", w.history, head)
    wio.write_po_file(out / "pos.csv", w.purchase_orders, head)
    wio.write_scenarios(out / "scenarios.csv", w.scenarios, head)
    wio.write_events(out / "events.csv", w.events, head)
    print(f"wrote synthetic world (seed {seed}) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    world = wio.load_world(args.world)
    catalog, _ = wio.load_catalog(args.catalog)
    corpus = training_corpus(world, wio.load_event_records(args.events), catalog)
    seed = args.seed if args.seed is not None else world.seed
    hyper = dict(step=args.step, l2=args.l2, epochs=args.epochs, hidden=args.hidden, seed=seed)
    if args.global_only:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateLabels)
            model = split_model.fit(corpus, args.kind, **hyper)
        for w in caught:
            log.warning("%s", w.message)
    else:
        model = split_model.fit_registry(corpus, args.kind, **hyper)
    split_model.save(model, args.out, world.warehouses)
    print(f"{args.kind} model on {len(corpus)} rows: training log loss {split_model.log_loss(model, corpus):.4f}")
    return EXIT_OK


def cmd_predict_splits(args) -> int:
    world = wio.load_world(args.world)
    pos = wio.load_po_file(args.po)
    model = split_model.load(args.model)
    existing = _existing(args, world, pos)
    blocks, ideal_blocks = [], []
    for po in pos:
        P = split_model.build_split_matrix(model, po)
        blocks.append((po, P))
        I = ideal_splits(P, po.quantities, None if existing is None else existing[po.id])
        X = np.hstack([I, np.zeros((po.M, 1), dtype=np.int64)])
        ideal_blocks.append((po.id, wio.AllocationMatrix(X, po.sku_ids)))
    head = wio.header_lines(world.seed, {"po": args.po, "model": args.model, "existing": args.existing})
    wio.write_sku_matrix(args.out, world.warehouses, blocks, head)
    if args.ideal_out:
        wio.write_allocations(args.ideal_out, world.warehouses, ideal_blocks, head)
    return EXIT_OK


def cmd_allocate(args) -> int:
    world = wio.load_world(args.world, args.lambda_na)
    pos = wio.load_po_file(args.po)
    scenarios = _pick_scenarios(args.capacities, world, args.scenario)
    if len(scenarios) != 1:
        raise ValidationError(f"{args.capacities} holds several scenarios; choose one with --scenario")
    scenario = next(iter(scenarios.values()))
    source = _split_source(args, world, pos)
    state = replay(pos, scenario, source, world.penalty, _existing(args, world, pos), args.solver)
    inputs = {
        "po": args.po,
        "world": args.world,
        "model": args.model,
        "probs": args.probs,
        "existing": args.existing,
        "capacities": args.capacities,
    }
    head = wio.header_lines(world.seed, inputs)
    wio.write_allocations(args.out, world.warehouses, [(e.po_id, e.allocation) for e in state.ledger], head)
    summary = {
        "tool": f"whalloc {__version__}",
        "solver": args.solver,
        "lambda_na": world.penalty.lambda_na,
        "orders": [
            {
                "po_id": e.po_id,
                "objective": e.report.objective,
                "solver": e.report.solver,
                "iterations": e.report.iterations,
                "wall_time": e.report.wall_time,
                "warm_start_used": e.report.warm_start_used,
                "unassigned": int(e.allocation.unassigned.sum()),
            }
            for e in state.ledger
        ],
    }
    if args.report:
        wio.write_json(args.report, summary)
    total = sum(o["objective"] for o in summary["orders"])
    print(f"allocated {len(pos)} order(s); total redistribution cost {total:g}")
    return EXIT_OK


def _render(summary, out_dir, figures: bool) -> None:
    out_dir = Path(out_dir)
    text = wio.render_text_report(summary)
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    head = [f"# whalloc {__version__}", f"# seed {summary.get('seed', '-')}"]
    wio.write_metrics_csv(out_dir / "metrics.csv", summary, head)
    if figures:
        from .plotting import render_figures

        for path in render_figures(summary, out_dir):
            log.info("wrote %s", path)
    sys.stdout.write(text)


def cmd_backtest(args) -> int:
    world = wio.load_world(args.world, args.lambda_na)
    if args.seed is not None:
        world.seed = args.seed
    pos = wio.load_po_file(args.po)
    scenarios = _pick_scenarios(args.scenarios, world, args.scenario)
    events = wio.load_events(args.events, world)
    source = _split_source(args, world, pos)
    existing = _existing(args, world, pos)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {
        "po": args.po,
        "world": args.world,
        "scenarios": args.scenarios,
        "events": args.events,
        "model": args.model,
        "probs": args.probs,
        "existing": args.existing,
    }
    head = wio.header_lines(world.seed, inputs)
    summary = {
        "tool": f"whalloc {__version__}",
        "seed": world.seed,
        "inputs": {k: wio.digest(v) for k, v in inputs.items() if v},
        "solver": args.solver,
        "scenarios": {},
    }
    for name, scenario in scenarios.items():
        rep, state, heur = run_backtest(pos, scenario, source, world.penalty, events, existing, args.solver)
        summary["scenarios"][name] = rep.as_dict()
        blocks = [(e.po_id, e.allocation) for e in state.ledger]
        wio.write_allocations(out / f"allocations_{name}.csv", world.warehouses, blocks, head)
        blocks = [(e.po_id, e.allocation) for e in heur.ledger]
        wio.write_allocations(out / f"heuristic_{name}.csv", world.warehouses, blocks, head)
    wio.write_json(out / "summary.json", summary)
    _render(summary, out, args.figures)
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    summary = wio.read_json(src / "summary.json" if src.is_dir() else src)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent)
    out.mkdir(parents=True, exist_ok=True)
    _render(summary, out, not args.no_figures)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="whalloc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"whalloc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-world", help="write a seeded synthetic world")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_world)

    t = sub.add_parser("train", help="fit split models from labelled purchase events")
    t.add_argument("--world", required=True)
    t.add_argument("--catalog", required=True)
    t.add_argument("--events", required=True)
    t.add_argument("--kind", choices=split_model.KINDS, default="logistic")
    t.add_argument("--step", type=float, default=0.1)
    t.add_argument("--l2", type=float, default=1e-4)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--hidden", type=int, default=16)
    t.add_argument("--seed", type=int)
    t.add_argument("--global-only", action="store_true", help="one model for all partitions")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("predict-splits", help="split probabilities (and ideal splits) for POs")
    s.add_argument("--world", required=True)
    s.add_argument("--po", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--existing")
    s.add_argument("--out", required=True)
    s.add_argument("--ideal-out")
    s.set_defaults(func=cmd_predict_splits)

    def solver_flags(q):
        q.add_argument("--solver", choices=("flow", "oracle"), default="flow")
        q.add_argument("--lambda-na", type=float)
        q.add_argument("--scenario")
        src = q.add_mutually_exclusive_group(required=True)
        src.add_argument("--model")
        src.add_argument("--probs")
        q.add_argument("--existing")

    a = sub.add_parser("allocate", help="capacity-feasible allocations for POs")
    a.add_argument("--world", required=True)
    a.add_argument("--po", required=True)
    a.add_argument("--capacities", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--report")
    solver_flags(a)
    a.set_defaults(func=cmd_allocate)

    b = sub.add_parser("backtest", help="replay POs against capacity scenarios and score RU/2DD")
    b.add_argument("--world", required=True)
    b.add_argument("--po", required=True)
    b.add_argument("--scenarios", required=True)
    b.add_argument("--events", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--figures", action="store_true", help="also render PNG figures")
    solver_flags(b)
    b.set_defaults(func=cmd_backtest)

    r = sub.add_parser("report", help="render tables and figures from a backtest summary")
    r.add_argument("--in", dest="input", required=True, help="backtest output dir or summary.json")
    r.add_argument("--out")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"whalloc: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"whalloc: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except WhallocError as exc:
        print(f"whalloc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"whalloc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
