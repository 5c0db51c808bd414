"""Command-line surface.

Subcommands: ``rate`` (one bound/rate row), ``sweep`` (CSV over an M
grid), ``nsat`` (saturation-number estimates), ``instance`` (emit a
saturating instance as JSON or DOT), and ``verify`` (seeded randomized
property suites).

Exit codes: 0 success, 1 property violation, 2 usage error, 3 domain
error, 4 I/O error.  Output is byte-deterministic for fixed flags and
seed; rationals render exactly as ``p/q`` unless ``--decimal`` asks for
12 significant digits (round-half-even).  ``CCBOUND_THREADS`` caps the
worker threads used by sweeps.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Optional, Union

from .bounds import (
    SearchConfig,
    achievable_rate,
    bound_value_function,
    cdb_bound,
    cutset_bound,
    han_bound,
    m_grid_with_corners,
    proposed_bound,
    uncoded_rate,
)
from .errors import CodedCachingError, InputError
from .labeling import run_labeling
from .model import (
    CACHE,
    DELIVERY,
    ROOT,
    ProblemInstance,
    SystemParams,
    instance_to_json,
)
from .saturation import SaturationEstimate, build_saturating_instance, reuse_files
from .verify import run_suites

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

METHODS = ("uncoded", "achievable", "cutset", "proposed", "han", "cdb")


def format_rational(value: Union[Fraction, float], decimal: bool = False) -> str:
    if isinstance(value, float):
        return "inf" if value == float("inf") else repr(value)
    value = Fraction(value)
    if not decimal:
        return str(value)
    with localcontext() as ctx:
        ctx.prec = 12
        ctx.rounding = ROUND_HALF_EVEN
        return str(Decimal(value.numerator) / Decimal(value.denominator))


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


@dataclass
class OutputRecord:
    """One table/CSV row of rates and bounds at a single cache size."""

    cache: Fraction
    rate_uncoded: Fraction
    rate_achievable: Fraction
    lb_cutset: Fraction
    lb_proposed: Fraction
    lb_han: Fraction
    lb_cdb: Fraction
    gap: Union[Fraction, float]

    FIELDS = ("M", "R_uncoded", "R_achievable", "LB_cutset", "LB_proposed",
              "LB_han", "LB_cdb", "gap")

    def values(self) -> tuple:
        return (self.cache, self.rate_uncoded, self.rate_achievable, self.lb_cutset,
                self.lb_proposed, self.lb_han, self.lb_cdb, self.gap)

    def rendered(self, decimal: bool = False) -> list[str]:
        return [format_rational(v, decimal) for v in self.values()]


def compute_record(params: SystemParams, m: Fraction,
                   search: Optional[SearchConfig], evaluator=None) -> OutputRecord:
    proposed = evaluator(m) if evaluator is not None else proposed_bound(params, m, search)[0]
    achievable = achievable_rate(params, m)
    if proposed == 0:
        gap_value: Union[Fraction, float] = Fraction(1) if achievable == 0 else float("inf")
    else:
        gap_value = achievable / proposed
    return OutputRecord(
        cache=m,
        rate_uncoded=uncoded_rate(params, m),
        rate_achievable=achievable,
        lb_cutset=cutset_bound(params, m),
        lb_proposed=proposed,
        lb_han=han_bound(params, m),
        lb_cdb=cdb_bound(params, m),
        gap=gap_value,
    )


def _search_from_args(args) -> SearchConfig:
    return SearchConfig(
        alpha_max=args.alpha_max,
        beta_max=args.beta_max,
        full_split_enumeration=args.full_split,
    )


def _add_search_flags(parser) -> None:
    parser.add_argument("--alpha-max", type=int, default=None,
                        help="largest alpha searched (default: N)")
    parser.add_argument("--beta-max", type=int, default=None,
                        help="largest beta searched (default: 2K)")
    parser.add_argument("--full-split", action="store_true",
                        help="enumerate every split, not just the balanced one")


def cmd_rate(args) -> int:
    params = SystemParams(args.files, args.users)
    record = compute_record(params, args.cache, _search_from_args(args))
    selected = METHODS if args.method == "all" else (args.method,)
    field_of = {
        "uncoded": ("R_uncoded", record.rate_uncoded),
        "achievable": ("R_achievable", record.rate_achievable),
        "cutset": ("LB_cutset", record.lb_cutset),
        "proposed": ("LB_proposed", record.lb_proposed),
        "han": ("LB_han", record.lb_han),
        "cdb": ("LB_cdb", record.lb_cdb),
    }
    if args.json:
        payload = {"M": format_rational(record.cache, args.decimal)}
        for method in selected:
            name, value = field_of[method]
            payload[name] = format_rational(value, args.decimal)
        if args.method == "all":
            payload["gap"] = format_rational(record.gap, args.decimal)
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"M = {format_rational(record.cache, args.decimal)}")
        for method in selected:
            name, value = field_of[method]
            print(f"{name} = {format_rational(value, args.decimal)}")
        if args.method == "all":
            print(f"gap = {format_rational(record.gap, args.decimal)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.points < 2:
        print("error: --points must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    params = SystemParams(args.files, args.users)
    search = _search_from_args(args)
    grid = m_grid_with_corners(params, args.points)
    evaluator = bound_value_function(params, search)

    threads = max(1, int(os.environ.get("CCBOUND_THREADS", "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(
                lambda m: compute_record(params, m, search, evaluator), grid
            ))
    else:
        records = [compute_record(params, m, search, evaluator) for m in grid]

    try:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(OutputRecord.FIELDS)
            for record in records:
                writer.writerow(record.rendered(args.decimal))
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_nsat(args) -> int:
    estimate = SaturationEstimate.compute(args.alpha, args.beta, args.users, exact=args.exact)
    print(f"alpha={estimate.alpha} beta={estimate.beta} users={estimate.users}")
    print(f"upper_construction {estimate.upper_construction}")
    if estimate.upper_analytic is not None:
        print(f"upper_analytic {estimate.upper_analytic}")
    else:
        print("upper_analytic n/a (beta > users)")
    print(f"upper_trivial {estimate.upper_trivial}")
    if estimate.exact is not None:
        print(f"exact {estimate.exact}")
    return EXIT_OK


def instance_to_dot(instance: ProblemInstance) -> str:
    """DOT digraph; each edge carries the new-file set of its tail node."""
    labeling = run_labeling(instance)
    lines = ["digraph instance {"]
    for node in instance.tree.nodes:
        if node.kind == CACHE:
            label = f"Z{node.cache_id}"
        elif node.kind == DELIVERY:
            label = "X(" + ",".join(str(d) for d in node.demands) + ")"
        elif node.kind == ROOT:
            label = "v*"
        else:
            label = f"u{node.id}"
        lines.append(f'  n{node.id} [label="{label}"];')
    for node in instance.tree.nodes:
        if node.parent is None:
            continue
        new_files = sorted(labeling.new_files[node.id])
        edge_label = "{" + ",".join(f"W{f}" for f in new_files) + "}"
        lines.append(f'  n{node.id} -> n{node.parent} [label="{edge_label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_instance(args) -> int:
    instance = build_saturating_instance(args.alpha, args.beta, args.users)
    if not args.raw:
        instance = reuse_files(instance)
    if args.format == "json":
        print(json.dumps(instance_to_json(instance), indent=2, sort_keys=True))
    else:
        print(instance_to_dot(instance), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    results = run_suites(args.suite, args.seed, args.trials)
    failed = False
    for result in results:
        status = "pass" if result.ok else "FAIL"
        print(f"suite {result.name}: {status} ({result.trials} trials, "
              f"{len(result.failures)} failures)")
        for message, instance_doc in result.failures:
            failed = True
            print(f"  violation: {message}")
            if instance_doc is not None:
                print("  counterexample: " + json.dumps(instance_doc, sort_keys=True))
    return EXIT_PROPERTY_FAILURE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccbound",
        description="Rate bounds for coded caching via labeled directed in-trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rate = sub.add_parser("rate", help="print rates/bounds at one cache size")
    p_rate.add_argument("--files", type=int, required=True, metavar="N")
    p_rate.add_argument("--users", type=int, required=True, metavar="K")
    p_rate.add_argument("--cache", type=parse_rational, required=True, metavar="M",
                        help='cache size, exact rational like "16/3" or "5.5"')
    p_rate.add_argument("--method", choices=("all",) + METHODS, default="all")
    p_rate.add_argument("--json", action="store_true")
    p_rate.add_argument("--decimal", action="store_true",
                        help="render 12 significant digits instead of p/q")
    _add_search_flags(p_rate)
    p_rate.set_defaults(func=cmd_rate)

    p_sweep = sub.add_parser("sweep", help="write a CSV over an M grid")
    p_sweep.add_argument("--files", type=int, required=True, metavar="N")
    p_sweep.add_argument("--users", type=int, required=True, metavar="K")
    p_sweep.add_argument("--points", type=int, default=25, metavar="P")
    p_sweep.add_argument("--out", required=True, metavar="FILE")
    p_sweep.add_argument("--decimal", action="store_true")
    _add_search_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_nsat = sub.add_parser("nsat", help="saturation-number estimates")
    p_nsat.add_argument("--alpha", type=int, required=True)
    p_nsat.add_argument("--beta", type=int, required=True)
    p_nsat.add_argument("--users", type=int, required=True)
    p_nsat.add_argument("--exact", action="store_true",
                        help="exhaustive search (small parameters only)")
    p_nsat.set_defaults(func=cmd_nsat)

    p_inst = sub.add_parser("instance", help="emit a saturating instance")
    p_inst.add_argument("--alpha", type=int, required=True)
    p_inst.add_argument("--beta", type=int, required=True)
    p_inst.add_argument("--users", type=int, required=True)
    p_inst.add_argument("--format", choices=("json", "dot"), required=True)
    p_inst.add_argument("--raw", action="store_true",
                        help="skip the file-reuse pass (all-distinct files)")
    p_inst.set_defaults(func=cmd_instance)

    p_verify = sub.add_parser("verify", help="run randomized property suites")
    p_verify.add_argument("--seed", type=int, default=42)
    p_verify.add_argument("--trials", type=int, default=100)
    p_verify.add_argument("--suite", choices=("all", "psi", "permute", "gap", "nsat"),
                          default="all")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except CodedCachingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
