"""Command-line harness: gen, opt, simulate, lowerbound, audit, bench.

Exit codes: 0 success, 1 bound or audit violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from . import adversary
from .adversary import LB_RATIO, LbParams, fuzz_instance, gen_random_sbounded, run_lb_adversary
from .algorithms import lc_constants, make_policy, run
from .audit import audit_run
from .core import PHI, InvalidInstance, dumps_instance, load_instance, loads_instance, schedule_to_dict
from .offline import InstanceTooLarge, brute_force_optimal, optimal_schedule

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
TOL = 1e-9


class UsageError(Exception):
    pass


def constants() -> dict:
    lc = lc_constants()
    return {
        "phi": PHI,
        "sqrt3": math.sqrt(3),
        "lc_alpha": lc.alpha,
        "lc_delta": lc.delta,
        "lc_ratio": lc.ratio,
        "lb_ratio": LB_RATIO,
    }


def bundled_instance(name: str):
    """Load one of the shipped fixtures, e.g. ``paper_s3`` or ``edf_phi_separation``."""
    text = resources.files("pktsched").joinpath("data", f"{name}.json").read_text()
    return loads_instance(text)


def _read_instance(path):
    try:
        if path.startswith("bundled:"):
            return bundled_instance(path.split(":", 1)[1])
        return load_instance(path)
    except (OSError, json.JSONDecodeError, InvalidInstance) as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc


def _policy(spec):
    try:
        return make_policy(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def default_bound(spec: str) -> float:
    policy = _policy(spec)
    if spec == "greedy":
        return 2.0
    if spec == "toggleh":
        return PHI
    if spec.startswith("lcalpha"):
        return policy.consts.ratio
    return policy.alpha


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2)
    if path and path != "-":
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# bench


@dataclass
class ExperimentConfig:
    alg: str
    lookahead: Optional[int] = None
    s: int = 4
    instances: int = 1000
    seed: int = 0
    max_count: int = 30
    bound: Optional[float] = None
    threads: int = 1


@dataclass
class RatioReport:
    alg: str
    bound: float
    rows: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max((r[3] for r in self.rows), default=0.0)

    @property
    def mean_ratio(self) -> float:
        return math.fsum(r[3] for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def exceeding(self) -> int:
        return sum(1 for r in self.rows if r[3] > self.bound + TOL)

    def aggregate(self) -> dict:
        return {
            "alg": self.alg,
            "count": len(self.rows),
            "max_ratio": self.max_ratio,
            "mean_ratio": self.mean_ratio,
            "bound": self.bound,
            "count_exceeding": self.exceeding,
            "constants": constants(),
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance_id", "alg", "opt", "ratio"])
        for row in self.rows:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
        return buf.getvalue()


def ratio_on(spec: str, inst, lookahead: int) -> tuple:
    alg = run(_policy(spec), inst, lookahead).weight
    opt = optimal_schedule(inst).weight
    ratio = opt / alg if alg > 0 else (1.0 if opt == 0 else math.inf)
    return alg, opt, ratio


def _threads(requested: Optional[int]) -> int:
    cap = int(os.environ.get("PKTSCHED_THREADS", "0") or 0)
    n = requested or cap or 1
    return min(n, cap) if cap else n


def cmd_bench(config: ExperimentConfig) -> RatioReport:
    bound = config.bound if config.bound is not None else default_bound(config.alg)
    lookahead = config.lookahead
    if lookahead is None:
        lookahead = _policy(config.alg).min_lookahead

    def one(i):
        inst = fuzz_instance(config.seed * 1_000_003 + i, config.s, config.max_count)
        return (i, *ratio_on(config.alg, inst, lookahead))

    with ThreadPoolExecutor(max_workers=_threads(config.threads)) as pool:
        rows = list(pool.map(one, range(config.instances)))
    rows.sort(key=lambda r: r[0])
    return RatioReport(config.alg, bound, rows)


# ---------------------------------------------------------------------------
# subcommands


def _gen(args):
    inst = gen_random_sbounded(args.seed, args.count, args.s, args.horizon or args.count, args.dist)
    text = dumps_instance(inst)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _opt(args):
    inst = _read_instance(args.instance)
    try:
        res = brute_force_optimal(inst) if args.oracle else optimal_schedule(inst)
    except InstanceTooLarge as exc:
        raise UsageError(str(exc)) from exc
    if args.json:
        _emit(res.to_dict())
    else:
        print(f"weight {res.weight!r}")
        for t, pid in res.schedule.assignments.items():
            print(f"  slot {t}: packet {pid}")
    return EXIT_OK


def _simulate(args):
    inst = _read_instance(args.instance)
    policy = _policy(args.alg)
    try:
        trace = run(policy, inst, policy.min_lookahead if args.lookahead is None else args.lookahead)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data = trace.to_dict()
    data["schedule"] = schedule_to_dict(trace.schedule)["slots"]
    if args.trace:
        _emit(data, args.trace)
    if args.json:
        _emit({"policy": trace.policy, "weight": trace.weight, "schedule": data["schedule"]})
    elif not args.trace:
        _emit(data)
    else:
        print(f"{trace.policy}: weight {trace.weight!r}, {len(trace.schedule)} packets sent")
    return EXIT_OK


def _lowerbound(args):
    try:
        params = LbParams(args.n, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = run_lb_adversary(_policy(args.alg), params)
    ws = adversary.lb_weights(params)
    if out.stopped_early:
        formula = adversary.ratio_case1(out.k, ws)
        alg_f, opt_f = adversary.case1_profits(out.k, ws)
    else:
        formula = adversary.ratio_case2(params.n, ws)
        alg_f, opt_f = adversary.case2_profits(params.n, ws)
    report = out.to_dict()
    report.update({
        "alg": args.alg,
        "n": params.n,
        "delta": params.delta,
        "formula_ratio": formula,
        "formula_alg_weight": alg_f,
        "formula_opt_weight": opt_f,
        "ratio_R0": adversary.ratio_case1(0, ws),
        "ratio_Rhat_n": adversary.ratio_case2(params.n, ws),
        "limit": LB_RATIO,
        "constants": constants(),
    })
    if args.report:
        _emit(report, args.report)
    if args.json or not args.report:
        _emit(report)
    else:
        print(f"{args.alg}: k={out.k} ratio={out.ratio!r} (limit {LB_RATIO!r})")
    return EXIT_OK


def _audit(args):
    spec = args.alg
    s, lookahead = (4, 0) if spec == "toggleh" else (2, 1)
    if args.instance:
        cases = [("instance", _read_instance(args.instance))]
    elif args.seed_fuzz:
        cases = [(args.seed * 1_000_003 + i, fuzz_instance(args.seed * 1_000_003 + i, s))
                 for i in range(args.seed_fuzz)]
    else:
        raise UsageError("audit needs --instance or --seed-fuzz")
    results = []
    for key, inst in cases:
        try:
            trace = run(_policy(spec), inst, lookahead)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rep = audit_run(trace, optimal_schedule(inst))
        results.append((key, rep))
    failed = [(k, r) for k, r in results if not r.passed]
    if len(results) == 1:
        body = results[0][1].to_dict()
    else:
        body = {
            "alg": spec,
            "instances": len(results),
            "failed": len(failed),
            "verdict": "fail" if failed else "pass",
            "failures": [{"seed": k, "witness": r.witness, "reasons": r.failures[:5]} for k, r in failed],
        }
    body["constants"] = constants()
    if args.json:
        _emit(body)
    else:
        print(f"{spec} audit: {len(results) - len(failed)}/{len(results)} pass")
        for k, r in failed[:10]:
            print(f"  {k}: witness slot {r.witness}: {r.failures[0]}")
    return EXIT_VIOLATION if failed else EXIT_OK


def _bench(args):
    cfg = ExperimentConfig(args.alg, args.lookahead, args.s, args.instances, args.seed, args.max_count,
                           args.bound, args.threads)
    try:
        report = cmd_bench(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(report.csv_text())
    agg = report.aggregate()
    if args.report:
        _emit(agg, args.report)
    if args.json or not args.report:
        _emit(agg)
    else:
        print(f"{cfg.alg}: max ratio {report.max_ratio!r} over {len(report.rows)} instances (bound {report.bound!r})")
    return EXIT_VIOLATION if report.exceeding else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pktsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = common(sub.add_parser("gen", help="write a random s-bounded instance"))
    p.add_argument("--s", type=int, default=4)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--dist", choices=adversary.WEIGHT_DISTS, default="uniform")
    p.add_argument("--out")
    p.set_defaults(func=_gen)

    p = common(sub.add_parser("opt", help="offline optimum of an instance"))
    p.add_argument("--instance", required=True)
    p.add_argument("--oracle", action="store_true", help="use exhaustive search instead")
    p.set_defaults(func=_opt)

    p = common(sub.add_parser("simulate", help="run an online policy on an instance"))
    p.add_argument("--alg", required=True)
    p.add_argument("--lookahead", type=int, choices=(0, 1), default=None,
                   help="defaults to what the policy needs")
    p.add_argument("--instance", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=_simulate)

    p = common(sub.add_parser("lowerbound", help="play the adaptive lookahead game"))
    p.add_argument("--alg", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--report")
    p.set_defaults(func=_lowerbound)

    p = common(sub.add_parser("audit", help="replay the charging scheme on runs"))
    p.add_argument("--alg", required=True, choices=("toggleh", "lcalpha"))
    p.add_argument("--instance")
    p.add_argument("--seed-fuzz", type=int, default=0, metavar="N")
    p.set_defaults(func=_audit)

    p = common(sub.add_parser("bench", help="ratio against the optimum over seeded instances"))
    p.add_argument("--alg", required=True)
    p.add_argument("--lookahead", type=int, choices=(0, 1), default=None,
                   help="defaults to what the policy needs")
    p.add_argument("--s", type=int, default=4)
    p.add_argument("--instances", "-N", type=int, default=1000)
    p.add_argument("--max-count", type=int, default=30)
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--csv")
    p.add_argument("--report")
    p.set_defaults(func=_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pktsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
