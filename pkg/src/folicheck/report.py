"""Running a scenario end to end and serialising the outcome."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import degree as deg
from .config import Config, default_config
from .detline import w1_identity_check
from .errors import FoliCheckError, GenericityFailed
from .oracle import compare
from .scenarios import Scenario
from .tangency import Verdict, crossing_parities, extract_zero_curve_2d, parity_check, pd_class_check, perturb_until_generic

EXIT_OK, EXIT_ERROR, EXIT_VERDICT, EXIT_GENERICITY, EXIT_ORACLE = 0, 1, 2, 3, 4


# -- canonical JSON --------------------------------------------------------------


def _canon(x):
    if isinstance(x, dict):
        return {str(k): _canon(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    if isinstance(x, np.ndarray):
        return _canon(x.tolist())
    return x


def canonical_json(obj) -> str:
    return json.dumps(_canon(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- the report ------------------------------------------------------------------


@dataclass
class Report:
    data: dict
    verdicts: dict = field(default_factory=dict)
    locus: object = None
    degree: object = None
    pd: object = None

    @property
    def failed(self) -> list:
        return sorted(k for k, v in self.verdicts.items() if v.passed is False)

    @property
    def exit_code(self) -> int:
        return EXIT_VERDICT if self.failed else EXIT_OK

    def to_json(self) -> str:
        return canonical_json(self.data)


def _tolerances(cfg: Config, grid):
    return {
        "tau_nd": cfg.tau_nd,
        "delta_sep": cfg.delta_sep,
        "grid": grid,
        "max_tries": cfg.max_tries,
        "preimage_grid": cfg.preimage_grid,
    }


def _grid_doubling(locus, pd, cfg) -> dict:
    """Re-extract Z at twice the grid and compare crossing parities."""
    fine = 2 * locus.grid_n
    cs = extract_zero_curve_2d(locus.section, fine, cfg, certify=False)
    table = crossing_parities(cs.curves, locus.section)
    base = {k: v["parity"] for k, v in pd.details["loops"].items()}
    again = {k: v["parity"] for k, v in table.items()}
    return {"grid": fine, "curve_count": len(cs.curves), "parities": again, "stable": again == base}


def run_check(
    sc: Scenario,
    eps: float | None = None,
    seed: int | None = None,
    grid: int | None = None,
    max_tries: int | None = None,
    cfg: Config | None = None,
    doubling: bool = True,
    timing: bool = False,
) -> Report:
    """Perturb, locate Z, pair w1, compute degrees and collect verdicts.

    Raises GenericityFailed when no attempt certifies.
    """
    t0 = time.perf_counter()
    cfg = (cfg or default_config()).with_overrides(max_tries=max_tries)
    eps = sc.eps if eps is None else float(eps)
    seed = sc.seed if seed is None else int(seed)
    fam = sc.family(eps, seed)
    emb, locus = perturb_until_generic(sc.embedding, sc.foliation, fam, cfg.max_tries, cfg, grid)
    ds = locus.section
    cert = locus.certificate
    data = {
        "scenario": sc.id,
        "n": sc.n,
        "seed": seed,
        "eps": eps,
        "attempt": locus.attempt,
        "tolerances": _tolerances(cfg, locus.grid_n),
        "transverse_everywhere": bool(locus.empty and cert.holds),
        "locus_nonempty": not locus.empty,
        "certificate": cert.as_dict(),
    }
    ident = w1_identity_check(ds)
    data["w1"] = {n: {"TS": a, "nu": b, "L": c} for n, a, b, c in ident.rows}
    verdicts = {"w1_identity": _identity_verdict(ident)}
    pd = None
    if sc.n == 1:
        data["zeros"] = [{"t": z.t, "derivative": z.derivative} for z in locus.zeros]
        data["zero_count"] = len(locus.zeros)
        data["zero_count_mod2"] = len(locus.zeros) % 2
        verdicts["parity"] = parity_check(locus, ds)
        verdicts["pd_class"] = pd_class_check(locus, ds)
    else:
        data["curves"] = [
            {"vertices": c.n_vertices, "length": c.length(), "seam_crossings": len(c.seam_crossings)}
            for c in locus.curves
        ]
        data["curve_count"] = len(locus.curves)
        verdicts["parity"] = parity_check(locus, ds)
        pd = pd_class_check(locus, ds)
        verdicts["pd_class"] = pd
        data["crossing_parity"] = {k: v["parity"] for k, v in pd.details["loops"].items()}
        if doubling:
            data["grid_doubling"] = _grid_doubling(locus, pd, cfg)
    dr = None
    if sc.foliation.is_submersion:
        dr = deg.degree_report(emb, sc.foliation, locus, cfg)
        data["degree"] = dr.as_dict()
    else:
        data["degree"] = {"applicable": False, "reason": "foliation is not presented by a submersion"}
    verdicts["degree_criterion"] = deg.degree_criterion_verdict(sc.foliation, dr, locus)
    data["verdicts"] = {k: v.as_dict() for k, v in verdicts.items()}
    if timing:
        data["wall_time_s"] = time.perf_counter() - t0
    return Report(data, verdicts, locus, dr, pd)


def _identity_verdict(ident):
    return Verdict("w1_identity", ident.passed, {"rows": ident.as_dict()["rows"]})


# -- expectations -------------------------------------------------------------------


def report_fields(data: dict) -> dict:
    """Flatten a report into the keys used by expectation blocks."""
    out = {
        "transverse_everywhere": data["transverse_everywhere"],
        "locus_nonempty": data["locus_nonempty"],
    }
    if "zero_count" in data:
        out["zero_count"] = data["zero_count"]
        out["zero_count_mod2"] = data["zero_count_mod2"]
    if "curve_count" in data:
        out["curve_count_min"] = data["curve_count"]
    d = data.get("degree", {})
    if isinstance(d.get("integer_degree"), int):
        out["winding_degree"] = d["integer_degree"]
    if "mod2_degree" in d:
        out["mod2_degree"] = d["mod2_degree"]
    if isinstance(d.get("sheet_count"), int):
        out["sheet_count"] = d["sheet_count"]
    for loop, row in data["w1"].items():
        for col, bit in row.items():
            out[f"w1.{loop}.{col}"] = bit
    for loop, bit in data.get("crossing_parity", {}).items():
        out[f"crossing_parity.{loop}"] = bit
    for name, v in data["verdicts"].items():
        out[f"verdict.{name}"] = v["status"]
    return out


def check_expectations(expected: dict, data: dict) -> list:
    """Mismatches as (key, expected, actual) triples."""
    got = report_fields(data)
    bad = []
    for key, want in sorted(expected.items()):
        have = got.get(key)
        if key == "curve_count_min":
            ok = have is not None and have >= want
        else:
            ok = have == want
        if not ok:
            bad.append((key, want, have))
    return bad


# -- sweeps -----------------------------------------------------------------------------

# seeds only matter once the perturbation is switched on
SWEEP_EPS = 0.05

SWEEP_COLUMNS = (
    "scenario",
    "seed",
    "eps",
    "status",
    "attempt",
    "zero_count",
    "curve_count",
    "count_mod2",
    "w1_L",
    "crossing_parity",
    "winding_degree",
    "mod2_degree",
    "transverse",
    "certified",
    "degree_criterion",
    "verdicts_pass",
    "error",
)


def _row(sc, seed, eps, cfg, grid):
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(scenario=sc.id, seed=seed, eps=eps)
    try:
        rep = run_check(sc, eps, seed, grid, cfg=cfg, doubling=False)
    except GenericityFailed as e:
        row.update(status="genericity_failed", error=str(e))
        return row, None
    except FoliCheckError as e:
        row.update(status="error", error=f"{type(e).__name__}: {e}")
        return row, None
    d = rep.data
    row["status"] = "ok" if not rep.failed else "verdict_failed"
    row["attempt"] = d["attempt"]
    if "zero_count" in d:
        row["zero_count"] = d["zero_count"]
        row["count_mod2"] = d["zero_count_mod2"]
    else:
        row["curve_count"] = d["curve_count"]
    row["w1_L"] = " ".join(f"{k}={v['L']}" for k, v in sorted(d["w1"].items()))
    row["crossing_parity"] = " ".join(f"{k}={v}" for k, v in sorted(d.get("crossing_parity", {}).items()))
    g = d["degree"]
    if isinstance(g.get("integer_degree"), int):
        row["winding_degree"] = g["integer_degree"]
    if "mod2_degree" in g:
        row["mod2_degree"] = g["mod2_degree"]
    row["transverse"] = d["transverse_everywhere"]
    row["certified"] = d["certificate"]["holds"]
    row["degree_criterion"] = d["verdicts"]["degree_criterion"].get("outcome", "")
    row["verdicts_pass"] = not rep.failed
    return row, rep


def run_sweep(sc: Scenario, seeds, eps_values=None, grid=None, cfg=None):
    """One row per (seed, eps), ordered by (seed, eps), and an aggregate summary.

    Without explicit eps values an unperturbed scenario is swept at SWEEP_EPS.
    """
    cfg = cfg or default_config()
    eps_values = list(eps_values) if eps_values else [sc.eps or SWEEP_EPS]
    rows = []
    for seed in sorted(seeds):
        for eps in sorted(eps_values):
            rows.append(_row(sc, seed, eps, cfg, grid)[0])
    return rows, aggregate(rows)


def aggregate(rows) -> dict:
    ok = [r for r in rows if r["status"] in ("ok", "verdict_failed")]
    parities = sorted({str(r["count_mod2"]) for r in ok if r["count_mod2"] != ""})
    crossing = sorted({r["crossing_parity"] for r in ok if r["crossing_parity"]})
    return {
        "runs": len(rows),
        "completed": len(ok),
        "errors": sum(r["status"] == "error" for r in rows),
        "genericity_failed": sum(r["status"] == "genericity_failed" for r in rows),
        "verdict_failures": sum(r["status"] == "verdict_failed" for r in rows),
        "parity_constant": len(parities) <= 1,
        "parities": parities,
        "crossing_parities_constant": len(crossing) <= 1,
        "inconsistent": sum(r["degree_criterion"] == deg.INCONSISTENT for r in rows),
    }


def sweep_csv(rows, summary) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(v) for k, v in r.items()})
    for k in sorted(summary):
        w.writerow({"scenario": "aggregate", "status": k, "error": _csv_cell(summary[k])})
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    return v


# -- oracle ------------------------------------------------------------------------------


def run_oracle(sc: Scenario, eps=None, seed=None, grid=None, max_tries=None, cfg=None):
    rep = run_check(sc, eps, seed, grid, max_tries, cfg, doubling=False)
    cmp = compare(rep.locus, rep.pd, rep.degree, sc.foliation)
    return rep, cmp


__all__ = [
    "Report",
    "run_check",
    "run_sweep",
    "run_oracle",
    "canonical_json",
    "report_fields",
    "check_expectations",
    "sweep_csv",
    "aggregate",
]
