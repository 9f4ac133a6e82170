"""Command-line entry point.

Commands: check, sweep, oracle, verify, list-scenarios.  Exit codes: 0 all
verdicts pass, 1 error, 2 verdict failure, 3 no certified generic attempt,
4 oracle disagreement.
"""

from __future__ import annotations

import argparse
import re
import sys

from . import report as R
from .config import default_config
from .errors import FoliCheckError, GenericityFailed, ParseError
from .scenarios import BUILTIN_IDS, builtin, builtin_params, resolve


def _seeds(text: str) -> list:
    """'0-99', '1,4,9' or a mix such as '0-4,10'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)-(-?\d+)", part)
        if m:
            out.extend(range(int(m[1]), int(m[2]) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return n


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; 2 is reserved for verdict failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(R.EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="folicheck", description="Tangency and transversality checks for submanifolds of foliated model spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, many=False):
        p.add_argument("scenario", help="builtin id or path to a scenario file")
        p.add_argument("--p", type=int, help="torus_pq: slope numerator")
        p.add_argument("--q", type=int, help="torus_pq: slope denominator")
        p.add_argument("--amp", type=float, help="torus_zero_winding: theta amplitude")
        p.add_argument("--r", type=float, help="oriented_null: circle radius")
        if many:
            p.add_argument("--eps", type=_floats, help="perturbation sizes, comma separated")
            p.add_argument("--seeds", type=_seeds, default=None, help="seed list such as 0-99 or 1,2,3")
        else:
            p.add_argument("--eps", type=float, help="perturbation size")
        p.add_argument("--seed", type=int, help="perturbation seed; attempt k uses seed + k")
        p.add_argument("--grid", type=_positive, help="tangency grid resolution")
        p.add_argument("--max-tries", type=_positive, help="perturbation attempts before giving up")
        p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("check", help="run one scenario and print its report")
    common(p)
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical reports)")
    p.add_argument("--no-doubling", action="store_true", help="skip the grid-doubling stability check")

    p = sub.add_parser("sweep", help="run a scenario over seeds and eps values")
    common(p, many=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("oracle", help="compare the pipeline with dense brute-force scans")
    common(p, many=True)

    p = sub.add_parser("verify", help="run every builtin against its expectations")
    p.add_argument("--out")

    p = sub.add_parser("list-scenarios", help="list builtin scenarios")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    return ap


def _scenario(args):
    params = {k: getattr(args, k) for k in ("p", "q", "amp", "r") if getattr(args, k, None) is not None}
    if args.scenario in BUILTIN_IDS:
        allowed = builtin_params(args.scenario)
        extra = set(params) - set(allowed)
        if extra:
            raise FoliCheckError(f"--{sorted(extra)[0]} does not apply to {args.scenario}")
    return resolve(args.scenario, params or None)


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_check(args) -> int:
    sc = _scenario(args)
    rep = R.run_check(sc, args.eps, args.seed, args.grid, args.max_tries, doubling=not args.no_doubling, timing=args.timing)
    _emit(rep.to_json(), args.out)
    return rep.exit_code


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    seeds = args.seeds or ([args.seed] if args.seed is not None else [sc.seed])
    cfg = default_config().with_overrides(max_tries=args.max_tries)
    rows, summary = R.run_sweep(sc, seeds, args.eps, args.grid, cfg)
    if args.format == "csv":
        _emit(R.sweep_csv(rows, summary), args.out)
    else:
        _emit(R.canonical_json({"rows": rows, "aggregate": summary}), args.out)
    return R.EXIT_VERDICT if summary["verdict_failures"] or summary["inconsistent"] else R.EXIT_OK


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    seeds = args.seeds or ([args.seed] if args.seed is not None else [sc.seed])
    eps_values = args.eps or ([None] if args.seeds is None else [sc.eps or R.SWEEP_EPS])
    runs, agree = [], True
    for seed in seeds:
        for eps in eps_values:
            rep, cmp = R.run_oracle(sc, eps, seed, args.grid, args.max_tries)
            agree &= cmp.agree
            runs.append({"seed": seed, "eps": rep.data["eps"], "comparison": cmp.as_dict()})
    _emit(R.canonical_json({"scenario": sc.id, "agree": agree, "runs": runs}), args.out)
    return R.EXIT_OK if agree else R.EXIT_ORACLE


def cmd_verify(args) -> int:
    rows, ok = {}, True
    for sid in BUILTIN_IDS:
        sc = builtin(sid)
        try:
            rep = R.run_check(sc)
        except GenericityFailed as e:
            rows[sid] = {"pass": False, "error": str(e)}
            ok = False
            continue
        bad = R.check_expectations(sc.expected, rep.data)
        rows[sid] = {
            "pass": not bad and not rep.failed,
            "checked": len(sc.expected),
            "mismatches": [{"key": k, "expected": w, "actual": h} for k, w, h in bad],
        }
        ok &= rows[sid]["pass"]
    _emit(R.canonical_json({"pass": ok, "scenarios": rows}), args.out)
    return R.EXIT_OK if ok else R.EXIT_VERDICT


def cmd_list(args) -> int:
    items = []
    for sid in BUILTIN_IDS:
        sc = builtin(sid)
        items.append({
            "id": sid,
            "n": sc.n,
            "model": sc.model.kind,
            "foliation": sc.foliation_id,
            "eps": sc.eps,
            "params": list(builtin_params(sid)),
            "description": sc.description,
        })
    if args.format == "json":
        _emit(R.canonical_json(items), args.out)
    else:
        lines = [f"{i['id']:<20} n={i['n']}  {i['model']:<12} {i['foliation']:<18} {i['description']}" for i in items]
        _emit("\n".join(lines) + "\n", args.out)
    return R.EXIT_OK


COMMANDS = {"check": cmd_check, "sweep": cmd_sweep, "oracle": cmd_oracle, "verify": cmd_verify, "list-scenarios": cmd_list}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except GenericityFailed as e:
        diag = {"error": "GenericityFailed", "message": str(e)}
        if e.best is not None:
            best = e.best
            cert = getattr(best, "certificate", best)
            diag["best_attempt"] = cert.as_dict() if hasattr(cert, "as_dict") else str(cert)
        sys.stdout.write(R.canonical_json(diag))
        return R.EXIT_GENERICITY
    except ParseError as e:
        print(f"folicheck: parse error: {e}", file=sys.stderr)
        return R.EXIT_ERROR
    except FoliCheckError as e:
        print(f"folicheck: {type(e).__name__}: {e}", file=sys.stderr)
        return R.EXIT_ERROR
    except (OSError, ValueError) as e:
        print(f"folicheck: {e}", file=sys.stderr)
        return R.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
