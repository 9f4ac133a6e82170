"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Every count and parity is compared exactly; only the runtime budgets and the
derivative tolerance (1e-6 relative) are numeric limits.
"""

import json
import subprocess
import sys
import time

from acceptance_log import record
from exprgen import expressions, richardson
from folicheck import cli
from folicheck import degree as D
from folicheck.exprdsl import Env, eval_dual, evaluate
from folicheck.report import run_check, run_oracle, run_sweep
from folicheck.scenarios import BUILTIN_IDS, builtin

SEEDS = range(100)


def _cli_json(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_1_torus_covering(capsys):
    cli.main(["check", "torus_pq", "--p", "2", "--q", "3"])  # warm-up: imports and caches
    capsys.readouterr()
    t0 = time.perf_counter()
    code, out = _cli_json(capsys, "check", "torus_pq", "--p", "2", "--q", "3")
    dt = time.perf_counter() - t0
    d = json.loads(out)
    ok = (
        code == 0
        and d["transverse_everywhere"] is True
        and d["certificate"]["holds"] is True
        and d["zero_count"] == 0
        and d["degree"]["integer_degree"] == 3
        and d["degree"]["sheet_count"] == 3
        and all(v["status"] == "pass" for k, v in d["verdicts"].items() if k != "pd_class")
        and d["verdicts"]["pd_class"]["status"] in ("pass", "n/a")
        and dt < 1.0
    )
    record(1, ok, f"torus 2/3: degree {d['degree']['integer_degree']}, sheets {d['degree']['sheet_count']}, "
                  f"zeros {d['zero_count']}, exit {code}, {dt:.2f} s (< 1 s)")
    assert ok


def test_2_parity_obstruction():
    t0 = time.perf_counter()
    rows, summary = run_sweep(builtin("klein_nonTO"), SEEDS, [0.01, 0.05, 0.1])
    dt = time.perf_counter() - t0
    done = [r for r in rows if r["status"] in ("ok", "verdict_failed")]
    odd = all(r["count_mod2"] == 1 for r in done)
    table = run_check(builtin("klein_nonTO")).data["w1"]["S"]
    ok = (
        len(done) == len(rows) == 300
        and odd
        and summary["verdict_failures"] == 0
        and all(r["w1_L"] == "S=1" for r in done)
        and table == {"TS": 0, "nu": 1, "L": 1}
        and dt < 30
    )
    record(2, ok, f"klein 100 seeds x 3 eps: {len(done)}/{len(rows)} generic, all odd={odd}, "
                  f"table {table}, {dt:.1f} s (< 30 s)")
    assert ok


def test_3_pd_class():
    t0 = time.perf_counter()
    bad = []
    for seed in range(25):
        d = run_check(builtin("rp2_product"), eps=0.05, seed=seed).data
        good = (
            d["locus_nonempty"]
            and d["curve_count"] >= 1
            and d["crossing_parity"] == {"Sigma": 0, "gamma": 1}
            and d["grid_doubling"]["stable"]
            and d["verdicts"]["pd_class"]["status"] == "pass"
        )
        if not good:
            bad.append(seed)
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    record(3, ok, f"rp2 product 25 seeds: gamma parity 1, Sigma parity 0, doubling stable; "
                  f"failures {bad}, {dt:.1f} s (< 60 s)")
    assert ok


def test_4_degree_criterion():
    t0 = time.perf_counter()
    rows, summary = run_sweep(builtin("torus_zero_winding"), SEEDS)
    dt = time.perf_counter() - t0
    zw_ok = all(
        r["status"] == "ok"
        and r["certified"] is True
        and r["winding_degree"] == 0
        and r["zero_count"] >= 2
        and r["zero_count"] % 2 == 0
        and r["degree_criterion"] == D.CONFIRMED
        for r in rows
    )
    inconsistent = 0
    for sid in BUILTIN_IDS:
        _, s = run_sweep(builtin(sid), SEEDS)
        inconsistent += s["inconsistent"]
    ok = zw_ok and len(rows) == 100 and inconsistent == 0 and dt < 30
    record(4, ok, f"zero-winding 100 seeds: degree 0, even count >= 2, confirmed every run={zw_ok}, "
                  f"{dt:.1f} s (< 30 s); catalog x 100 inconsistent runs: {inconsistent}")
    assert ok


def test_5_oriented_null():
    rows, _ = run_sweep(builtin("oriented_null"), range(50))
    done = [r for r in rows if r["status"] == "ok"]
    ok = len(done) == 50 and all(r["w1_L"] == "S=0" and r["zero_count"] % 2 == 0 for r in done)
    counts = sorted({r["zero_count"] for r in done})
    record(5, ok, f"oriented null 50 seeds: pairings 0, counts {counts} all even")
    assert ok


def test_6_oracle_agreement():
    disagree = []
    for sid in BUILTIN_IDS:
        sc = builtin(sid)
        for seed in range(10):
            _, cmp = run_oracle(sc, sc.eps or 0.05, seed)
            if not cmp.agree:
                disagree.append((sid, seed))
    ok = not disagree
    record(6, ok, f"oracle vs pipeline, 5 scenarios x 10 seeds: disagreements {disagree}")
    assert ok


def test_7_ad_correctness():
    worst = 0.0
    for e, p in expressions(1000, seed=1):
        env = Env({"t": (p["t"], [1.0, 0.0]), "a": (p["a"], [0.0, 1.0])}, {})
        _, g = eval_dual(e, env)
        for i, var in enumerate(("t", "a")):
            fd = richardson(lambda x: evaluate(e, {**p, var: x}), p[var])
            worst = max(worst, abs(g[i] - fd) / (1 + abs(g[i])))
    ok = worst <= 1e-6
    record(7, ok, f"1000 random expressions: worst relative derivative error {worst:.2e} (<= 1e-6)")
    assert ok


def test_8_determinism():
    commands = [
        ["check", "rp2_product", "--seed", "4"],
        ["check", "klein_nonTO", "--eps", "0.05", "--seed", "7"],
        ["sweep", "torus_zero_winding", "--seeds", "0-4", "--format", "json"],
        ["sweep", "klein_nonTO", "--seeds", "0-4", "--eps", "0.01,0.1"],
        ["oracle", "oriented_null", "--seeds", "0-2"],
        ["verify"],
        ["list-scenarios"],
    ]
    differ = []
    for argv in commands:
        outs = [
            subprocess.run([sys.executable, "-m", "folicheck", *argv], capture_output=True, check=False).stdout
            for _ in range(2)
        ]
        if outs[0] != outs[1] or not outs[0]:
            differ.append(" ".join(argv[:2]))
    ok = not differ
    record(8, ok, f"{len(commands)} commands run twice in fresh processes: differing outputs {differ}")
    assert ok
