"""Command-line entry point: run one verification and write a JSON (or CSV) report.

Exit status is 0 when every asserted (in)equality holds, 2 when one fails
(the report then carries a witness) and 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

from .config import ParitySpec
from .graph import GraphError, load_graph
from .measure import (
    CapLimitExceeded,
    InstanceTooLarge,
    ModelParams,
    first_description_sum,
    load_model,
    partition_sum,
)
from .spin_oracle import compare_rpm_spin
from .switching import (
    F_links,
    F_one,
    derivative_check,
    griffiths_gap,
    switching_sides,
    verify_injectivity,
    weight_identity_even,
    weight_identity_odd,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _vertices(text: str) -> list[str]:
    return [v for v in (s.strip() for s in text.split(",")) if v]


def _default_max_states() -> int:
    raw = os.environ.get("RPMLAB_MAX_STATES")
    if raw is None:
        return 2_000_000
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"RPMLAB_MAX_STATES must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--max-states", type=int, default=None)

    model = _Parser(add_help=False)
    model.add_argument("--graph", required=True, help="graph JSON file")
    model.add_argument("--model", help="model JSON file (default: homogeneous couplings)")
    model.add_argument("--N", type=int, default=2, help="colours when --model is absent")
    model.add_argument("--beta", type=_rational, default=Fraction(3, 10))
    model.add_argument("--eta", choices=("free", "plus"), default="free")
    model.add_argument("--A", type=_vertices, default=[])
    model.add_argument("--B", type=_vertices, default=None)

    parser = _Parser(prog="rpmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-weights", parents=[common], help="vertex-weight product identities")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--kmax", type=int, default=8)

    p = sub.add_parser("verify-equivalence", parents=[common, model], help="two descriptions agree")
    p.add_argument("--cap", type=int, default=2)

    p = sub.add_parser("verify-switching", parents=[common, model], help="capped switching inequality")
    p.add_argument("--cap", type=int, default=2)
    p.add_argument("--functional", choices=("one", "links"), default="one")

    p = sub.add_parser("verify-injectivity", parents=[common, model], help="exhaustive injection check")
    p.add_argument("--cap", type=int, default=2)

    p = sub.add_parser("griffiths", parents=[common, model], help="correlation gap")
    p.add_argument("--tol", type=_rational, default=Fraction(1, 10**9))
    p.add_argument("--max-cap", type=int, default=40)

    p = sub.add_parser("derivative", parents=[common, model], help="finite-difference monotonicity")
    p.add_argument("--edge", type=int, required=True)
    p.add_argument("--colour", type=int, default=1)
    p.add_argument("--step", type=_rational, default=Fraction(1, 1000))
    p.add_argument("--tol", type=_rational, default=Fraction(1, 10**9))
    p.add_argument("--allowance", type=float, default=1e-6)
    p.add_argument("--max-cap", type=int, default=40)

    p = sub.add_parser("spin-compare", parents=[common, model], help="RPM against spin quadrature/MC")
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=_rational, default=Fraction(1, 10**9))
    return parser


def _load(args) -> ModelParams:
    g = load_graph(args.graph)
    if args.model:
        p = load_model(g, args.model)
    else:
        p = ModelParams.homogeneous(g, args.N, args.beta, args.eta)
    for v in list(args.A) + list(args.B or []):
        if v not in g.vertex_index:
            raise UsageError(f"unknown vertex {v!r}")
    return p


def _sets(args) -> dict:
    return {"A": sorted(args.A), "B": None if args.B is None else sorted(args.B)}


def cmd_verify_weights(args):
    N, rows = args.N, []
    if N < 2:
        raise UsageError("the identities need N >= 2")
    fn = weight_identity_even if N % 2 == 0 else weight_identity_odd
    for k in range(args.kmax + 1):
        for r in range(k + 1):
            lhs, rhs = fn(N, k, r)
            rows.append({"N": N, "k": k, "r": r, "lhs": str(lhs), "rhs": str(rhs), "equal": lhs == rhs})
    ok = all(r["equal"] for r in rows)
    return {"check": "weights", "N": N, "kmax": args.kmax, "holds": ok, "rows": rows}, ok


def cmd_verify_equivalence(args):
    p = _load(args)
    spec = ParitySpec(args.A, args.B)
    first = first_description_sum(p, spec, args.cap, args.max_states)
    second = partition_sum(p, spec, args.cap)
    ok = first == second
    report = {"check": "equivalence", **_sets(args), "cap": args.cap,
              "first_description": str(first), "pre_coloured": str(second), "holds": ok}
    return report, ok


def cmd_verify_switching(args):
    p = _load(args)
    if args.B is None:
        raise UsageError("--B is required")
    F = F_one if args.functional == "one" else F_links
    rep = switching_sides(p, args.A, args.B, F, args.cap)
    report = {**rep.to_json(), **_sets(args), "functional": args.functional}
    return report, rep.holds


def cmd_verify_injectivity(args):
    p = _load(args)
    if args.B is None:
        raise UsageError("--B is required")
    rep = verify_injectivity(p, args.A, args.B, args.cap, args.max_states)
    report = {"check": "injectivity", **_sets(args), "cap": args.cap, **rep.to_json()}
    ok = rep.injective and rep.side_condition_failures == 0
    return report, ok


def cmd_griffiths(args):
    p = _load(args)
    if args.B is None:
        raise UsageError("--B is required")
    rep = griffiths_gap(p, args.A, args.B, args.tol, exact=True, max_cap=args.max_cap)
    report = {"check": "griffiths", **_sets(args), "tol": str(args.tol), **rep.to_json()}
    return report, report["holds"]


def cmd_derivative(args):
    p = _load(args)
    value = derivative_check(p, args.A, args.edge, args.colour, args.step, args.tol, True, args.max_cap)
    ok = value >= -args.allowance
    report = {"check": "derivative", **_sets(args), "edge": args.edge, "colour": args.colour,
              "step": str(args.step), "value": str(value), "float": float(value), "holds": ok}
    return report, ok


def cmd_spin_compare(args):
    p = _load(args)
    out = compare_rpm_spin(p, args.A, args.B, args.tol, args.samples, args.seed, args.threads)
    return {"check": "spin-compare", **out}, out["ok"]


COMMANDS = {
    "verify-weights": cmd_verify_weights,
    "verify-equivalence": cmd_verify_equivalence,
    "verify-switching": cmd_verify_switching,
    "verify-injectivity": cmd_verify_injectivity,
    "griffiths": cmd_griffiths,
    "derivative": cmd_derivative,
    "spin-compare": cmd_spin_compare,
}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v, sort_keys=True)
        else:
            out[key] = v
    return out


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    rows = report.get("rows") or [{k: v for k, v in report.items() if k != "rows"}]
    rows = [_flatten(r) for r in rows]
    fields = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.max_states is None:
            args.max_states = _default_max_states()
        report, ok = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, InstanceTooLarge, CapLimitExceeded, OSError, ValueError, KeyError) as exc:
        print(f"rpmlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
