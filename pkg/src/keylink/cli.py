"""``keylink`` command line.

JSON goes to stdout (or ``--out``); one-line human summaries go to stderr.
Exit codes: 0 ok, 1 usage, 2 invalid input, 3 audit violation.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import __version__
from .access import AccessStructureError, parse_access_structure, random_structure, user_degree
from .audit import NonIdealStructure, check_collusion, check_concrete, check_soundness
from .kdf import DEFAULT_KEY_BITS, PRFS, parse_seeds, resource_key
from .kps import (
    GraphError,
    build_bounded,
    build_complete_circulant,
    build_star,
    parse_edge_list,
)
from .linker import (
    ForestError,
    InstanceTooLarge,
    exhaustive_link,
    greedy_link,
    lower_bound,
    parse_forest,
    storage_report,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class InvalidInput(Exception):
    pass


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None


def _emit(obj: object, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(line: str) -> None:
    print(line, file=sys.stderr)


def _load_structure(path: str, strict: bool = True):
    return parse_access_structure(_read(path), strict=strict)


def cmd_analyze(args: argparse.Namespace) -> int:
    s = _load_structure(args.structure, strict=not args.non_strict)
    per_user = {u: user_degree(s, u) for u in s.sorted_users()}
    max_unlinked = max(per_user.values(), default=0)
    bound = lower_bound(s)
    _emit(
        {
            "n": s.n,
            "m": s.m,
            "resources": len(s.resources),
            "lower_bound": bound,
            "per_user_unlinked": per_user,
            "max_unlinked": max_unlinked,
            "avg_unlinked": sum(per_user.values()) / s.n if s.n else 0.0,
        },
        args.out,
    )
    _summary(f"n={s.n} m={s.m} bound={bound} max_unlinked={max_unlinked}")
    return EXIT_OK


def cmd_link(args: argparse.Namespace) -> int:
    s = _load_structure(args.structure)
    forest = exhaustive_link(s) if args.exhaustive else greedy_link(s)
    report = storage_report(s, forest)
    _emit({**forest.to_dict(), "report": report.to_dict()}, args.out)
    if args.report:
        _emit(report.to_dict(), args.report)
    _summary(
        f"links={len(forest.links)} max_storage={report.max_storage} "
        f"bound={report.lower_bound} avg_storage={float(report.avg_storage):.3f}"
    )
    return EXIT_OK


def cmd_derive(args: argparse.Namespace) -> int:
    forest = parse_forest(_read(args.forest))
    seeds = parse_seeds(_read(args.seeds), args.keylen)
    structure = _load_structure(args.structure) if args.structure else None
    known = set(forest.links) | set(forest.links.values()) | set(seeds)
    if structure is None and args.resource not in known:
        raise InvalidInput(f"unknown resource {args.resource!r}")
    try:
        key = resource_key(structure, forest, seeds, args.resource, PRFS[args.prf])
    except KeyError as exc:
        raise InvalidInput(exc.args[0]) from None
    print(key.hex())
    return EXIT_OK


def cmd_kps(args: argparse.Namespace) -> int:
    if args.scheme == "star":
        _, plan = build_star(_int_param(args.param))
    elif args.scheme == "complete":
        _, plan = build_complete_circulant(_int_param(args.param), extend=args.extend)
    else:
        _, plan = build_bounded(parse_edge_list(_read(args.param).decode("utf-8")))
    _emit(plan.to_dict(), args.out)
    if args.structure_out:
        Path(args.structure_out).write_text(plan.structure.to_json() + "\n")
    if args.forest_out:
        Path(args.forest_out).write_text(plan.forest.to_json() + "\n")
    _summary(
        f"scheme={plan.scheme} nodes={len(plan.nodes)} keys={len(plan.pairs.resources)} "
        f"max_storage={plan.max_storage} bound={plan.lower_bound}"
        + (" (extension)" if plan.extension else "")
    )
    return EXIT_OK


def _int_param(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InvalidInput(f"expected an integer node count, got {text!r}") from None


def cmd_verify(args: argparse.Namespace) -> int:
    s = _load_structure(args.structure)
    forest = parse_forest(_read(args.forest))
    if args.coalitions < 1:
        raise InvalidInput("--coalitions must be at least 1")
    if args.coalitions == 1:
        report = check_soundness(s, forest)
    else:
        report = check_collusion(s, forest, args.coalitions, rng=random.Random(args.seed))
    out = report.to_dict()
    ok = report.ok
    if args.seeds:
        concrete = check_concrete(s, forest, parse_seeds(_read(args.seeds), args.keylen), PRFS[args.prf])
        out["concrete"] = concrete.to_dict()
        ok = ok and concrete.ok
    out["ok"] = ok
    _emit(out, args.out)
    _summary(
        f"{'OK' if ok else 'VIOLATIONS'}: coalitions_checked={report.coalitions_checked} "
        f"violations={len(report.violations)}"
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_gen_random(args: argparse.Namespace) -> int:
    rng = random.Random(args.seed)
    s = random_structure(args.users, args.resources, rng)
    _emit(s.to_dict(), args.out)
    _summary(f"n={s.n} m={s.m} seed={args.seed}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write JSON output here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--prf", choices=sorted(PRFS), default="hmac-sha256")
    common.add_argument("--keylen", type=int, default=DEFAULT_KEY_BITS, help="key length in bits")

    parser = _Parser(prog="keylink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="storage numbers before linking")
    p.add_argument("structure")
    p.add_argument("--non-strict", action="store_true", help="allow repeated privileged sets")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("link", parents=[common], help="compute a link forest")
    p.add_argument("structure")
    p.add_argument("--exhaustive", action="store_true", help="optimal search (at most 12 resources)")
    p.add_argument("--report", help="also write the storage report to this file")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("derive", parents=[common], help="compute one resource key")
    p.add_argument("forest")
    p.add_argument("seeds")
    p.add_argument("resource")
    p.add_argument("--structure", help="structure file used to validate the resource id")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("kps", parents=[common], help="sensor-network key pre-distribution plans")
    p.add_argument("scheme", choices=["star", "complete", "bounded"])
    p.add_argument("param", help="node count (star, complete) or edge-list file (bounded)")
    p.add_argument("--extend", action="store_true", help="allow even n for the complete scheme")
    p.add_argument("--structure-out", help="write the linked access structure here")
    p.add_argument("--forest-out", help="write the link forest here")
    p.set_defaults(func=cmd_kps)

    p = sub.add_parser("verify", parents=[common], help="audit a forest for soundness and collusion")
    p.add_argument("structure")
    p.add_argument("forest")
    p.add_argument("--coalitions", type=int, default=1, help="largest coalition size to check")
    p.add_argument("--seeds", help="seed file; also recompute real keys (concrete mode)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-random", parents=[common], help="random ideal structure for testing")
    p.add_argument("--users", type=int, default=6)
    p.add_argument("--resources", type=int, default=10)
    p.set_defaults(func=cmd_gen_random)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        InvalidInput,
        AccessStructureError,
        ForestError,
        GraphError,
        InstanceTooLarge,
        NonIdealStructure,
        ValueError,
    ) as exc:
        print(f"keylink: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
