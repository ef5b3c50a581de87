"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also repeated in the terminal summary. Running the file
directly (``python3 tests/test_acceptance.py``) prints the lines only.
"""

import contextlib
import io
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import ACCEPTANCE_LINES, DEMO, random_instance  # noqa: E402
from whalloc import io as wio  # noqa: E402
from whalloc import split_model as sm  # noqa: E402
from whalloc.backtest import run_backtest  # noqa: E402
from whalloc.cli import main as cli  # noqa: E402
from whalloc.ideal import (  # noqa: E402
    fractional_splits_with_inventory,
    round_to_integers,
)
from whalloc.solver import (  # noqa: E402
    brute_force_solve,
    explode,
    extract_allocation,
    solve_bip,
    solve_ip,
)
from whalloc.types import PenaltyMatrix, rows_conserved, within_capacity  # noqa: E402
from whalloc.world import training_corpus  # noqa: E402


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def oracle_instances(count=500, seed=2024):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, max_m=5, max_k=3, max_n=4, max_cost=9) for _ in range(count)]


def criterion_1():
    t0 = time.perf_counter()
    bad = 0
    for I, L, C in oracle_instances():
        Y, rep = solve_ip(I, L, C)
        _, obj = brute_force_solve(I, L, C)
        X = extract_allocation(Y).values
        if rep.objective != obj or not rows_conserved(X, I.sum(axis=1)) or not within_capacity(X, C):
            bad += 1
    dt = time.perf_counter() - t0
    return record(1, bad == 0 and dt < 60, f"oracle equivalence, {bad} mismatches in 500, {dt:.1f}s (< 60s)")


def criterion_2():
    bad = 0
    for I, L, C in oracle_instances():
        ip = solve_ip(I, L, C)[1].objective
        bip = solve_bip(explode(I), L, C)[1].objective
        bad += ip != bip
    return record(2, bad == 0, f"BIP and IP objectives equal, {bad} mismatches in 500")


def criterion_3(seed=31):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(100):
        I, L, _ = random_instance(rng, max_m=8, max_k=6, max_n=12, zero_diag=True)
        C = I.sum(axis=0) + rng.integers(0, 5, size=L.K)
        Y, rep = solve_ip(I, L, C)
        X = extract_allocation(Y).values
        bad += not (np.array_equal(X[:, :-1], I) and X[:, -1].sum() == 0 and rep.objective == 0)
    return record(3, bad == 0, f"uncapacitated identity, {bad} failures in 100")


def criterion_4(seed=41):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(100):
        I, L, C = random_instance(rng, max_m=8, max_k=6, max_n=12)
        X = extract_allocation(solve_ip(I, L, C)[0]).values
        bad += X[:, -1].sum() != max(0, int(I.sum()) - int(C.sum()))
    return record(4, bad == 0, f"unassigned = max(0, N - sum C), {bad} failures in 100")


def criterion_5(seed=51):
    rng = np.random.default_rng(seed)
    M, K, N = 2000, 10, 1_000_000
    q = rng.multinomial(N - M, np.ones(M) / M) + 1
    P = rng.dirichlet(np.ones(K), size=M)
    I = round_to_integers(P * q[:, None], q)
    sites = rng.uniform(0, 100, size=(K, 2))
    D = np.round(np.linalg.norm(sites[:, None] - sites[None], axis=2), 1)
    L = PenaltyMatrix.from_distances(D)
    C = rng.integers(N // (2 * K), N // K, size=K)
    t0 = time.perf_counter()
    Y, rep = solve_ip(I, L, C)
    dt = time.perf_counter() - t0
    X = extract_allocation(Y).values
    ok = dt < 10 and rows_conserved(X, q) and within_capacity(X, C) and int(I.sum()) == N
    return record(5, ok, f"M=2000, K=10, N=1e6 solved in {dt:.2f}s (< 10s)")


def active_set_oracle(target, existing, n):
    d = target - existing
    K = len(d)
    best, best_obj = None, np.inf
    for mask in range(1, 2**K):
        free = np.array([(mask >> k) & 1 for k in range(K)], dtype=bool)
        F = np.zeros(K)
        F[free] = d[free] + (n - d[free].sum()) / free.sum()
        if (F < -1e-12).any():
            continue
        obj = np.sum((F - d) ** 2)
        if obj < best_obj:
            best, best_obj = F, obj
    return best


def criterion_6(seed=61):
    rng = np.random.default_rng(seed)
    worst_free, worst_clamped, n_free, n_clamped = 0.0, 0.0, 0, 0
    for r in range(200):
        K = int(rng.integers(2, 7))
        n = int(rng.integers(1, 60))
        # alternate light and heavy existing stock so both regimes occur
        E = rng.integers(0, 4 if r % 2 else 80, size=K)
        P = rng.dirichlet(np.ones(K))
        F = fractional_splits_with_inventory(P[None], [n], E[None])[0]
        closed = P * (n + E.sum()) - E
        if (closed >= 0).all():
            n_free += 1
            worst_free = max(worst_free, np.abs(F - closed).max())
        else:
            n_clamped += 1
            ref = active_set_oracle(P * (n + E.sum()), E.astype(float), n)
            worst_clamped = max(worst_clamped, np.abs(F - ref).max())
    ok = worst_free <= 1e-9 and worst_clamped <= 1e-8 and n_free and n_clamped
    return record(
        6, bool(ok),
        f"ideal splits: {n_free} unclamped rows max err {worst_free:.1e} (<= 1e-9), "
        f"{n_clamped} clamped rows max err {worst_clamped:.1e} (<= 1e-8)",
    )


def criterion_7(seed=71):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(1000):
        K = int(rng.integers(1, 12))
        n = int(rng.integers(1, 1000))
        F = rng.dirichlet(np.ones(K)) * n
        I = round_to_integers(F[None], [n])[0]
        bad += I.sum() != n or (np.abs(I - F) >= 1).any() or (I < 0).any()
    return record(7, bad == 0, f"rounding preserves N_i and |I - F| < 1, {bad} failures in 1000")


def gradient_error(kind, X, Y, seed=81):
    rng = np.random.default_rng(seed)
    params = sm.init_params(kind, X.shape[1], Y.shape[1], rng, hidden=8)
    for k in params:
        params[k] = params[k] + 0.2 * rng.standard_normal(params[k].shape)
    loss_grad = sm.logistic_loss_grad if kind == "logistic" else sm.mlp_loss_grad
    _, grads = loss_grad(params, X, Y, 1e-4)
    names = sorted(params)
    worst, h = 0.0, 1e-6
    for _ in range(20):
        name = names[rng.integers(len(names))]
        idx = tuple(int(rng.integers(0, s)) for s in params[name].shape)
        saved = params[name][idx]
        params[name][idx] = saved + h
        up = loss_grad(params, X, Y, 1e-4)[0]
        params[name][idx] = saved - h
        down = loss_grad(params, X, Y, 1e-4)[0]
        params[name][idx] = saved
        num = (up - down) / (2 * h)
        worst = max(worst, abs(num - grads[name][idx]) / max(abs(num), abs(grads[name][idx]), 1e-8))
    return worst


def criterion_8():
    world = wio.load_world(DEMO / "world.json")
    catalog, _ = wio.load_catalog(DEMO / "catalog.csv")
    corpus = training_corpus(world, wio.load_event_records(DEMO / "history_events.csv"), catalog)
    train, test = corpus.split(0.8, seed=0)

    rows = train.skus[:200]
    enc = sm.FeatureEncoder.fit(s.attributes for s in rows)
    X = enc.encode_many([s.attributes for s in rows])
    Y = sm.one_hot(train.labels[:200], corpus.n_classes)
    grad_err = max(gradient_error("logistic", X, Y), gradient_error("mlp", X, Y))

    base = sm.log_loss(sm.fit(train, "baseline"), test)
    lr = sm.log_loss(sm.fit(train, "logistic", seed=world.seed), test)

    K = corpus.n_classes
    uniform = sm.SplitClassifier("logistic", K, {"W": np.zeros((enc.dim, K)), "b": np.zeros(K)}, enc)
    u_err = abs(sm.log_loss(uniform, test) - np.log(K))

    ok = grad_err < 1e-4 and base - lr >= 0.05 and u_err <= 1e-9
    return record(
        8, ok,
        f"gradient rel err {grad_err:.1e} (< 1e-4); held-out log loss logistic {lr:.3f} vs "
        f"baseline {base:.3f}, gap {base - lr:.3f} (>= 0.05); |uniform - ln K| {u_err:.1e}",
    )


def criterion_9():
    t0 = time.perf_counter()
    world = wio.load_world(DEMO / "world.json")
    pos = wio.load_po_file(DEMO / "pos.csv")
    events = wio.load_events(DEMO / "events.csv", world)
    model = sm.load(DEMO / "model.json")
    scenarios = wio.load_scenarios(DEMO / "scenarios.csv", world.warehouses)
    ok, parts = len(world.warehouses) == 4 and len(scenarios) == 2, []
    for name, scenario in scenarios.items():
        m = run_backtest(pos, scenario, model, world.penalty, events)[0].overall
        gap = m.ru_constrained - m.ru_heuristic
        ok &= m.ru_ideal >= m.ru_constrained >= m.ru_heuristic
        ok &= m.tdd_ideal >= m.tdd_constrained >= m.tdd_heuristic
        ok &= gap >= 0.10
        parts.append(
            f"{name} RU {m.ru_ideal:.3f}/{m.ru_constrained:.3f}/{m.ru_heuristic:.3f} "
            f"2DD {m.tdd_ideal:.3f}/{m.tdd_constrained:.3f}/{m.tdd_heuristic:.3f} gap {gap:.3f}"
        )
    dt = time.perf_counter() - t0
    ok &= dt < 120
    return record(9, bool(ok), f"backtest orderings ideal/constrained/heuristic: {'; '.join(parts)}; {dt:.1f}s")


def criterion_10():
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for run in ("a", "b"):
            out = Path(tmp) / run
            args = [
                "backtest", "--world", DEMO / "world.json", "--po", DEMO / "pos.csv",
                "--scenarios", DEMO / "scenarios.csv", "--events", DEMO / "events.csv",
                "--model", DEMO / "model.json", "--seed", "7", "--figures", "--out", out,
            ]
            with warnings.catch_warnings(), contextlib.redirect_stdout(io.StringIO()):
                warnings.simplefilter("ignore")
                code = cli([str(a) for a in args])
            outs.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
        (ca, a), (cb, b) = outs
        same = ca == cb == 0 and a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    return record(10, same, f"two backtest runs byte-identical across {len(a)} output files")


def test_criterion_1_oracle_equivalence():
    assert criterion_1()


def test_criterion_2_formulation_equivalence():
    assert criterion_2()


def test_criterion_3_uncapacitated_identity():
    assert criterion_3()


def test_criterion_4_non_assignment_bound():
    assert criterion_4()


def test_criterion_5_scale():
    assert criterion_5()


def test_criterion_6_ideal_splits():
    assert criterion_6()


def test_criterion_7_rounding():
    assert criterion_7()


def test_criterion_8_classifier():
    assert criterion_8()


def test_criterion_9_backtest_orderings():
    assert criterion_9()


def test_criterion_10_determinism():
    assert criterion_10()


if __name__ == "__main__":
    results = [globals()[f"criterion_{n}"]() for n in range(1, 11)]
    sys.exit(0 if all(results) else 1)
