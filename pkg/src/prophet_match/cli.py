"""Command-line pipeline: generate -> moments -> solve -> simulate -> report.

Exit codes: 0 success, 2 validation failure, 3 size limit, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import bench, oracle
from ._seeding import derive
from .model import (ArrivalOrder, InstanceError, SizeLimitError, check_instance, check_order,
                    dumps, instance_from_json, instance_to_json, order_from_json, order_to_json)
from .moments import (compute_moments_exact, compute_moments_mc, moments_from_json,
                      moments_to_json, prophet_value)
from .policy import (exact_expected_welfare, make_orders, result_from_dict, result_to_csv,
                     result_to_json, simulate)
from .pricing import (NonConvergenceError, solution_from_dict, solution_to_dict,
                      solution_to_json, solve_prices)

EXIT_OK, EXIT_INVALID, EXIT_SIZE, EXIT_NONCONVERGENCE = 0, 2, 3, 4
DEFAULT_ORDERS = "batch-lb,ascending-mean,descending-mean,random:3"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror}") from exc


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path} is not valid JSON: {exc}") from exc


def _load_instance(path: str):
    return check_instance(instance_from_json(_read(path)))


def parse_orders(instance, text: str, seed: int) -> list[tuple[str, ArrivalOrder]]:
    """Parse ``batch-lb,ascending-mean,descending-mean,random:K,given:PATH,exhaustive``."""
    orders = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        name, _, arg = token.partition(":")
        if name == "given":
            order = check_order(instance, order_from_json(_read(arg)))
            orders.append((f"given:{Path(arg).name}", order))
        elif name == "random":
            orders.extend(make_orders(instance, "random", seed, int(arg or 1)))
        else:
            try:
                orders.extend(make_orders(instance, name, seed))
            except ValueError as exc:
                raise InstanceError(str(exc)) from exc
    if not orders:
        raise InstanceError("no arrival orders requested")
    return orders


# -- subcommands ----------------------------------------------------------------------

def cmd_moments(args) -> int:
    instance = _load_instance(args.instance)
    if args.mc is not None:
        if args.mc < 1:
            raise InstanceError("--mc needs at least one trial")
        moments = compute_moments_mc(instance, args.mc, args.seed, threads=args.threads)
    else:
        moments = compute_moments_exact(instance, limit=args.limit)
    _write(moments_to_json(moments), args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    moments = moments_from_json(_read(args.moments))
    if args.eps is not None and not args.eps > 0:
        raise InstanceError("--eps must be positive")
    _write(solution_to_json(solve_prices(moments, args.eps)), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    instance = _load_instance(args.instance)
    solution = solution_from_dict(_load_json(args.prices))
    if args.trials < 1:
        raise InstanceError("--trials must be >= 1")
    orders = parse_orders(instance, args.orders, args.seed)
    result = simulate(instance, solution.prices, orders, args.trials, args.seed,
                      threads=args.threads)
    _write(result_to_csv(result) if args.format == "csv" else result_to_json(result), args.output)
    return EXIT_OK


def _emit_instance(instance, order, args):
    _write(instance_to_json(instance), args.output)
    if args.order_out:
        _write(order_to_json(order), args.order_out)


def cmd_gen_lb(args) -> int:
    if args.n < 1:
        raise InstanceError("--n must be >= 1")
    instance, order = bench.gen_lower_bound(args.n)
    _emit_instance(instance, order, args)
    return EXIT_OK


def cmd_gen_random(args) -> int:
    try:
        instance = bench.gen_random(args.n, args.m, args.edges, args.max_support,
                                    args.value_scale, args.seed)
    except ValueError as exc:
        raise InstanceError(str(exc)) from exc
    _emit_instance(instance, ArrivalOrder.identity(instance), args)
    return EXIT_OK


def lowerbound_report(n: int, trials: int, seed: int, eps: float | None = None,
                      threads: int = 1) -> dict:
    """Full pipeline on the lower-bound family under its batch order.

    For ``n <= 2`` moments and expectations are exact and the optimal online
    value is added; larger ``n`` use Monte Carlo moments and simulation.
    """
    instance, order = bench.gen_lower_bound(n)
    out = {"n": n, "trials": trials, "seed": seed, "opt_floor": bench.opt_floor(n)}
    if n <= 2:
        moments = compute_moments_exact(instance)
        solution = solve_prices(moments, eps)
        exact = exact_expected_welfare(instance, solution.prices, order)
        out.update(exact=True, E_opt_est=exact["opt"], stderr_opt=0.0,
                   vadd_value=exact["welfare"], stderr_vadd=0.0,
                   dp_value=oracle.optimal_online_value(instance, order))
        out["ratio"] = exact["opt"] / exact["welfare"] if exact["welfare"] > 0 else None
        out["stderr_ratio"] = 0.0
    else:
        moments = compute_moments_mc(instance, trials, derive(seed, 1), threads=threads)
        solution = solve_prices(moments, eps)
        rep = simulate(instance, solution.prices, [("batch-lb", order)], trials,
                       derive(seed, 2), threads=threads).reports[0]
        out.update(exact=False, E_opt_est=rep.mean_opt, stderr_opt=rep.stderr_opt,
                   vadd_value=rep.mean_welfare, stderr_vadd=rep.stderr_welfare,
                   ratio=rep.ratio, stderr_ratio=rep.stderr_ratio)
    out["moments_opt"] = prophet_value(moments)
    out["solver"] = {"iterations": solution.iterations,
                     "final_residual": solution.final_residual,
                     "certificate": solution.certificate}
    return out


def cmd_lowerbound(args) -> int:
    if args.n < 1:
        raise InstanceError("--n must be >= 1")
    _write(dumps(lowerbound_report(args.n, args.trials, args.seed, args.eps, args.threads)),
           args.output)
    return EXIT_OK


def _report_rows(path: str) -> list[dict]:
    """Flatten one artifact into (source, item, metric, value) rows."""
    data = _load_json(path)
    src = Path(path).name
    rows = []
    if isinstance(data, dict) and "orders" in data:
        for rep in result_from_dict(data).reports:
            for key in ("mean_welfare", "stderr_welfare", "mean_revenue", "mean_surplus",
                        "mean_opt", "stderr_opt", "ratio", "stderr_ratio"):
                rows.append({"source": src, "item": rep.order_strategy, "metric": key,
                             "value": getattr(rep, key)})
    elif isinstance(data, dict) and "certificate" in data and "l" in data:
        sol = solution_to_dict(solution_from_dict(data))
        for key in ("iterations", "final_residual"):
            rows.append({"source": src, "item": "solver", "metric": key, "value": sol[key]})
        for key, val in sol["certificate"].items():
            rows.append({"source": src, "item": "certificate", "metric": key, "value": val})
    elif isinstance(data, dict) and "E_opt_est" in data:
        for key in ("E_opt_est", "stderr_opt", "vadd_value", "stderr_vadd", "dp_value",
                    "ratio", "stderr_ratio", "opt_floor"):
            if key in data:
                rows.append({"source": src, "item": f"G_{data['n']}", "metric": key,
                             "value": data[key]})
    else:
        raise InstanceError(f"{path}: not a simulation, price or lower-bound artifact")
    return rows


def cmd_report(args) -> int:
    rows = [row for path in args.inputs for row in _report_rows(path)]
    if args.format == "json":
        _write(dumps(rows), args.output)
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.DictWriter(buf, ["source", "item", "metric", "value"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        value = row["value"]
        writer.writerow({**row, "value": "" if value is None else repr(value)})
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prophet-match", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True, threads=True):
        p.add_argument("-o", "--output", help="output path (default: stdout)")
        if seed:
            p.add_argument("--seed", type=int, default=1, help="base random seed (default: 1)")
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="worker processes; results do not depend on it")

    p = sub.add_parser("moments", help="estimate the M and Q matrices")
    p.add_argument("instance")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact enumeration (default)")
    mode.add_argument("--mc", type=int, metavar="TRIALS", help="Monte Carlo with TRIALS profiles")
    p.add_argument("--limit", type=int, default=10**6, help="enumeration limit for --exact")
    common(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("solve", help="solve for vertex prices")
    p.add_argument("moments")
    p.add_argument("--eps", type=float, help="target combined residual (default: 1e-9 * max(1, sum M))")
    common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate the threshold policy")
    p.add_argument("instance")
    p.add_argument("prices")
    p.add_argument("--orders", default=DEFAULT_ORDERS,
                   help="comma list of batch-lb, ascending-mean, descending-mean, random:K, "
                        f"given:PATH, exhaustive (default: {DEFAULT_ORDERS})")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-lb", help="generate the three-batch lower-bound instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--order-out", help="also write the batch arrival order here")
    common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_gen_lb)

    p = sub.add_parser("gen-random", help="generate a random instance")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--edges", type=int, default=6)
    p.add_argument("--max-support", type=int, default=2)
    p.add_argument("--value-scale", type=float, default=1.0)
    p.add_argument("--order-out", help="also write the identity arrival order here")
    common(p, threads=False)
    p.set_defaults(func=cmd_gen_random)

    p = sub.add_parser("lowerbound", help="run the pipeline on the lower-bound family")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--eps", type=float)
    common(p)
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("report", help="tabulate simulation, price or lower-bound artifacts")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
