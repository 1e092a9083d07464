"""Command line front end: run scenario scripts and the built-in experiments.

Angles are radians.  An axis flag takes THETA or THETA,PHI.  The default
trial count may be overridden by the NOCOLLAPSE_TRIALS environment variable;
when that happens the report metadata says so.  `run` exits nonzero if any
expect assertion was violated, `convivial` if any communication round was.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import scenarios, script
from .qstate import AxisSpec

TRIALS_ENV = "NOCOLLAPSE_TRIALS"


def _parse_axis(text: str) -> AxisSpec:
    parts = text.split(",")
    if len(parts) == 1:
        return AxisSpec(float(parts[0]))
    if len(parts) == 2:
        return AxisSpec(float(parts[0]), float(parts[1]))
    raise argparse.ArgumentTypeError(f"axis must be THETA or THETA,PHI, got {text!r}")


def _axis_text(axis: AxisSpec) -> str:
    return f"{axis.theta!r},{axis.phi!r}"


def _default_trials(fallback: int) -> tuple[int, bool]:
    env = os.environ.get(TRIALS_ENV)
    if env is None:
        return fallback, False
    return int(env), True


def _add_common(parser: argparse.ArgumentParser, trials_default: int | None) -> None:
    if trials_default is not None:
        parser.add_argument(
            "--trials", type=int, default=None, help=f"trial count (default {trials_default})"
        )
    parser.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    parser.add_argument(
        "--format", choices=("table", "csv"), default="table", dest="fmt"
    )
    parser.add_argument("--out", type=Path, default=None, help="write output to a file")


def _resolve_trials(args: argparse.Namespace, fallback: int) -> tuple[int, bool]:
    if getattr(args, "trials", None) is not None:
        return args.trials, False
    return _default_trials(fallback)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _kv_block(fmt: str, pairs: list[tuple[str, str]], rows: list[str]) -> str:
    lines = [f"# {k}={v}" for k, v in pairs]
    lines.extend(rows)
    if fmt == "table":
        lines = [line[2:] if line.startswith("# ") else line for line in lines]
    return "\n".join(lines) + "\n"


def _cmd_run(args: argparse.Namespace) -> int:
    trials, from_env = _resolve_trials(args, 10000)
    program = script.parse_scenario(Path(args.file).read_text(encoding="utf-8"))
    report = script.run_program(program, trials, args.seed)
    report.metadata["trials_from_env"] = "1" if from_env else "0"
    _emit(script.emit_report(report, args.fmt), args.out)
    return 0 if report.total_violations == 0 else 1


def _cmd_epr(args: argparse.Namespace) -> int:
    trials, from_env = _resolve_trials(args, 100000)
    rounds = scenarios._epr_bulk(args.axis_a, args.axis_b, trials, args.seed, want_bob=True)
    label_counts = {}
    for label, values in (
        ("alice_result", rounds["alice"]),
        ("bob_report", rounds["reported"]),
        ("bob_result", rounds["bob"]),
    ):
        label_counts[label] = {
            int(v): int(c) for v, c in zip(*np.unique(values, return_counts=True))
        }
    tuple_counts: dict[tuple[int, ...], int] = {}
    for a, r in zip(rounds["alice"].tolist(), rounds["reported"].tolist()):
        tuple_counts[(a, r)] = tuple_counts.get((a, r), 0) + 1
    opposite = sum(c for (a, r), c in tuple_counts.items() if r == 1 - a)
    report = script.Report(
        trials=trials,
        seed=args.seed,
        labels=("alice_result", "bob_report", "bob_result"),
        label_counts=label_counts,
        tally_labels=("alice_result", "bob_report"),
        tuple_counts=tuple_counts,
        expectations=[("opposite", "alice_result", "bob_report", trials - opposite)],
        metadata={
            "version": script.VERSION,
            "seed": str(args.seed),
            "trials": str(trials),
            "trials_from_env": "1" if from_env else "0",
            "axis_a": _axis_text(args.axis_a),
            "axis_b": _axis_text(args.axis_b),
        },
    )
    _emit(script.emit_report(report, args.fmt), args.out)
    return 0


def _cmd_chsh(args: argparse.Namespace) -> int:
    trials, from_env = _resolve_trials(args, 1000000)
    axes = (args.axis_a, args.axis_a_prime, args.axis_b, args.axis_b_prime)
    if args.classical:
        s = scenarios.classical_chsh_statistic(trials, args.seed)
        engine = "classical-hidden-signs"
    else:
        s = scenarios.chsh_statistic(*axes, trials, args.seed)
        engine = "quantum"
    pairs = [
        ("version", script.VERSION),
        ("seed", str(args.seed)),
        ("trials_per_pair", str(trials)),
        ("trials_from_env", "1" if from_env else "0"),
        ("engine", engine),
        ("axis_a", _axis_text(args.axis_a)),
        ("axis_a_prime", _axis_text(args.axis_a_prime)),
        ("axis_b", _axis_text(args.axis_b)),
        ("axis_b_prime", _axis_text(args.axis_b_prime)),
        ("S", format(s, "#.10g")),
        ("abs_S", format(abs(s), "#.10g")),
    ]
    _emit(_kv_block(args.fmt, pairs, []), args.out)
    return 0


def _cmd_mixture(args: argparse.Namespace) -> int:
    trials, from_env = _resolve_trials(args, 100000)
    result = scenarios.mixture_same_spin_probability(trials, args.seed, axis=args.axis)
    pairs = [
        ("version", script.VERSION),
        ("seed", str(args.seed)),
        ("trials", str(trials)),
        ("trials_from_env", "1" if from_env else "0"),
        ("axis", _axis_text(args.axis)),
        ("mixture_both_plus_frequency", format(result.mixture_frequency, "#.10g")),
        ("singlet_both_plus_frequency", format(result.singlet_frequency, "#.10g")),
    ]
    _emit(_kv_block(args.fmt, pairs, []), args.out)
    return 0


def _cmd_nosignal(args: argparse.Namespace) -> int:
    deviation = scenarios.no_signaling_deviation(
        args.axis_a, args.axis_a_prime, args.axis_b
    )
    pairs = [
        ("version", script.VERSION),
        ("axis_a", _axis_text(args.axis_a)),
        ("axis_a_prime", _axis_text(args.axis_a_prime)),
        ("axis_b", _axis_text(args.axis_b)),
        ("max_marginal_deviation", format(deviation, ".6e")),
    ]
    _emit(_kv_block(args.fmt, pairs, []), args.out)
    return 0


def _cmd_convivial(args: argparse.Namespace) -> int:
    trials, from_env = _resolve_trials(args, 100000)
    violations = scenarios.conviviality_violations(trials, args.seed, args.preparation)
    pairs = [
        ("version", script.VERSION),
        ("seed", str(args.seed)),
        ("trials", str(trials)),
        ("trials_from_env", "1" if from_env else "0"),
        ("preparation", args.preparation),
        ("violations", str(violations)),
    ]
    _emit(_kv_block(args.fmt, pairs, []), args.out)
    return 0 if violations == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nocollapse",
        description="Measurement without collapse: unitary global state, "
        "per-observer branch commitments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario script")
    p.add_argument("file", help="scenario script path")
    _add_common(p, 10000)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("epr", help="two observers measure a singlet and compare notes")
    p.add_argument("--axis-a", type=_parse_axis, default=AxisSpec(0.0))
    p.add_argument("--axis-b", type=_parse_axis, default=AxisSpec(0.0))
    _add_common(p, 100000)
    p.set_defaults(func=_cmd_epr)

    p = sub.add_parser("chsh", help="CHSH statistic at four axis settings")
    p.add_argument("--axis-a", type=_parse_axis, default=AxisSpec(0.0))
    p.add_argument("--axis-a-prime", type=_parse_axis, default=AxisSpec(math.pi / 2.0))
    p.add_argument("--axis-b", type=_parse_axis, default=AxisSpec(math.pi / 4.0))
    p.add_argument(
        "--axis-b-prime", type=_parse_axis, default=AxisSpec(3.0 * math.pi / 4.0)
    )
    p.add_argument(
        "--classical",
        action="store_true",
        help="use the local hidden-sign stub instead of the quantum engine",
    )
    _add_common(p, 1000000)
    p.set_defaults(func=_cmd_chsh)

    p = sub.add_parser("mixture", help="mixture vs singlet both-plus frequency")
    p.add_argument("--axis", type=_parse_axis, default=AxisSpec(math.pi / 2.0))
    _add_common(p, 100000)
    p.set_defaults(func=_cmd_mixture)

    p = sub.add_parser("nosignal", help="Bob's marginal across Alice's settings")
    p.add_argument("--axis-a", type=_parse_axis, default=AxisSpec(0.0))
    p.add_argument("--axis-a-prime", type=_parse_axis, default=AxisSpec(math.pi / 2.0))
    p.add_argument("--axis-b", type=_parse_axis, default=AxisSpec(0.0))
    p.add_argument("--format", choices=("table", "csv"), default="table", dest="fmt")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=_cmd_nosignal)

    p = sub.add_parser("convivial", help="count answers contradicting the asker")
    p.add_argument(
        "--preparation", choices=("singlet", "mixture"), default="singlet"
    )
    _add_common(p, 100000)
    p.set_defaults(func=_cmd_convivial)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
