"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 internal inconsistency, 3 precision
exhausted.  Results go to stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from . import game as gamecore
from .errors import EnumerationCapError, InconsistencyError, PrecisionError
from .game import GameError, check_class_properties, to_dot
from .generate import generate
from .oracle import DEFAULT_CAP, describe, solve_exact
from .params import derive_params
from .solver import ClassificationResult, NotErgodicError, SizeGateError, SolverConfig, classify

EXIT_OK, EXIT_INPUT, EXIT_INCONSISTENT, EXIT_PRECISION = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    mode: str = "practical"
    b_exponent: int = 8
    precision_bits: int | None = None
    enumeration_cap: int = DEFAULT_CAP
    seed: int = 0
    output: str = "json"
    force: bool = False

    def __post_init__(self):
        for name in ("b_exponent", "enumeration_cap"):
            if getattr(self, name) <= 0:
                raise GameError(f"{name} must be positive")
        if self.precision_bits is not None and self.precision_bits <= 0:
            raise GameError("precision_bits must be positive")
        if not 0 <= self.seed < 2**64:
            raise GameError("seed must be a 64-bit unsigned integer")

    def solver(self) -> SolverConfig:
        return SolverConfig(
            mode=self.mode,
            b_exponent=self.b_exponent,
            precision_bits=self.precision_bits,
            cap=self.enumeration_cap,
            force=self.force,
        )


def fmt(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def result_to_dict(game, res: ClassificationResult) -> dict:
    T, B = sorted(res.top), sorted(res.bottom)
    pairs = {}
    for name, S, pair in (("top", T, res.strategies_top), ("bottom", B, res.strategies_bottom)):
        sub = gamecore.induced_subgame(game, S)
        sigma, tau = pair
        pairs[name] = {"max": describe(sub, sigma), "min": describe(sub, tau)}
    return {
        "t_max": fmt(res.t_max),
        "t_min": fmt(res.t_min),
        "T": T,
        "B": B,
        "ergodic": res.ergodic,
        "certified": res.certified,
        "strategies": pairs,
        "b_exponent": res.b_exponent,
        "notes": list(res.notes),
    }


def _oracle_dict(game, sol) -> dict:
    return {
        "values": {v: fmt(x) for v, x in sorted(sol.values.items())},
        "max_strategy": describe(game, sol.max_strategy),
        "min_strategy": describe(game, sol.min_strategy),
        "certified": sol.certified,
    }


def _text(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    for key, val in obj.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(_text(val, indent + 1))
        elif isinstance(val, list):
            lines.append(f"{pad}{key}: {' '.join(map(str, val))}")
        else:
            lines.append(f"{pad}{key}: {val}")
    return "\n".join(line for line in lines if line)


def _emit(args, obj):
    if isinstance(obj, str):
        out = obj
    elif args.format == "text":
        out = _text(obj)
    else:
        out = json.dumps(obj, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def _load(args):
    return gamecore.load(args.game, shift_negative=args.shift_negative, merge_unequal=args.merge_unequal)


def cmd_validate(args, cfg):
    g = _load(args)
    p = derive_params(g, cfg.mode, cfg.b_exponent)
    params = {
        "mode": p.mode,
        "n": p.n,
        "k": p.k,
        "U": p.U,
        "D": p.D,
        "lambda_sq": fmt(p.lambda_sq),
        "max_den": p.max_den,
        "L": p.L,
        "b": f"{p.base.n}^sqrt({fmt(p.base.exponent_sq)})",
        "offset": g.offset,
    }
    _emit(args, {"game": g.to_dict(), "params": params})


def cmd_classify(args, cfg):
    g = _load(args)
    _emit(args, result_to_dict(g, classify(g, cfg.solver())))


def cmd_solve(args, cfg):
    g = _load(args)
    res = classify(g, cfg.solver())
    if not res.ergodic or res.top != frozenset(g.positions):
        print(f"notice: {NotErgodicError(res.top, res.t_max, res.t_min)}", file=sys.stderr)
        _emit(args, {"ergodic": False, "classification": result_to_dict(g, res)})
        return
    sigma, tau = res.strategies_top
    out = {
        "ergodic": True,
        "value": fmt(res.t_max),
        "max_strategy": describe(g, sigma),
        "min_strategy": describe(g, tau),
        "certified": res.certified,
    }
    _emit(args, out)


def cmd_oracle(args, cfg):
    g = _load(args)
    _emit(args, _oracle_dict(g, solve_exact(g, cfg.enumeration_cap)))


def cmd_generate(args, cfg):
    g = generate(args.n, args.k, args.U, args.D, (args.min_degree, args.max_degree), cfg.seed)
    _emit(args, g.to_dict())


def compare(g, cfg: RunConfig) -> dict:
    """Pipeline classification against the oracle; an empty ``diffs`` list
    means they agree."""
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_res = pool.submit(classify, g, cfg.solver())
        fut_sol = pool.submit(solve_exact, g, cfg.enumeration_cap)
        res, sol = fut_res.result(), fut_sol.result()
    t_max, t_min = max(sol.values.values()), min(sol.values.values())
    T = sorted(v for v in g.positions if sol.values[v] == t_max)
    B = sorted(v for v in g.positions if sol.values[v] == t_min)
    expected = {"t_max": fmt(t_max), "t_min": fmt(t_min), "T": T, "B": B}
    got = {"t_max": fmt(res.t_max), "t_min": fmt(res.t_min), "T": sorted(res.top), "B": sorted(res.bottom)}
    diffs = [{"field": key, "oracle": expected[key], "pipeline": got[key]} for key in expected if expected[key] != got[key]]
    violations = check_class_properties(g, T, B)
    return {
        "diffs": diffs,
        "certified": res.certified,
        "oracle": expected,
        "pipeline": got,
        "class_conditions_ok": not any(violations.values()),
    }


def cmd_compare(args, cfg):
    g = _load(args)
    report = compare(g, cfg)
    _emit(args, report)
    if report["diffs"]:
        raise InconsistencyError(f"{len(report['diffs'])} difference(s) between pipeline and oracle")


def cmd_export_dot(args, cfg):
    _emit(args, to_dot(_load(args)))


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "classify": cmd_classify,
    "oracle": cmd_oracle,
    "generate": cmd_generate,
    "compare": cmd_compare,
    "export-dot": cmd_export_dot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("paper", "practical"), default="practical")
    common.add_argument("--b-exponent", type=int, default=8, help="c in b = n^c (practical mode)")
    common.add_argument("--precision-bits", type=int, default=None, help="ellipsoid precision (env BWR_PRECISION_BITS)")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="strategy enumeration cap of the oracle")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="write the result to this file")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--force", action="store_true", help="run paper mode beyond the size gate")

    parser = argparse.ArgumentParser(prog="bwr", description="Solve BWR-games exactly and by convex programming.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "generate":
            p.add_argument("-n", type=int, required=True)
            p.add_argument("-k", type=int, default=0)
            p.add_argument("-U", type=int, default=3)
            p.add_argument("-D", type=int, default=2)
            p.add_argument("--min-degree", type=int, default=1)
            p.add_argument("--max-degree", type=int, default=3)
        else:
            p.add_argument("game", help="game JSON file")
            p.add_argument("--shift-negative", action="store_true", help="shift negative rewards into [0, U]")
            p.add_argument("--merge-unequal", action="store_true", help="accept parallel Random arcs with unequal rewards")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    bits = args.precision_bits
    if bits is None and os.environ.get("BWR_PRECISION_BITS"):
        try:
            bits = int(os.environ["BWR_PRECISION_BITS"])
        except ValueError:
            print("error: BWR_PRECISION_BITS must be an integer", file=sys.stderr)
            return EXIT_INPUT
    try:
        cfg = RunConfig(args.mode, args.b_exponent, bits, args.cap, args.seed, args.format, args.force)
        COMMANDS[args.command](args, cfg)
    except (GameError, SizeGateError, EnumerationCapError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InconsistencyError as exc:
        print(f"inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except PrecisionError as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    return EXIT_OK


def main() -> None:
    sys.exit(run())
