"""Line-oriented scenario scripts: parse, run over many seeded worlds, report.

Grammar (one statement per line, `#` starts a comment, tokens split on
whitespace, angles are radians):

    reg NAME DIM KIND                    KIND in {system, apparatus, brain}
    init I1 ... Ik                       one basis index per declared register
    singlet U V                          other registers start at |0>
    unitary TARGET x-flip
    unitary TARGET z-phase
    unitary TARGET rot THETA PHI ANGLE
    premeasure SYS axis THETA PHI into PTR
    observer NAME SEED
    perceive OBS REG as LABEL
    ask OBS REG as LABEL
    expect_equal LABEL LABEL
    expect_opposite LABEL LABEL
    tally LABEL [LABEL ...]

Declarations precede use; exactly one `init` or `singlet` appears after the
registers and before any dynamics.  Runs are deterministic functions of
(program, trials, seed).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .observer import World
from .qstate import (
    AxisSpec,
    RegisterLayout,
    REGISTER_KINDS,
    axis_rotation,
    make_product_state,
    singlet_state,
    x_flip,
    z_phase,
)
from .scenarios import TrialRecord

VERSION = "0.1.0"

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ScenarioParseError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class RegStmt:
    name: str
    dim: int
    kind: str


@dataclass(frozen=True)
class InitStmt:
    indices: tuple[int, ...]


@dataclass(frozen=True)
class SingletStmt:
    u: str
    v: str


@dataclass(frozen=True)
class UnitaryStmt:
    target: str
    generator: str  # "x-flip" | "z-phase" | "rot"
    theta: float = 0.0
    phi: float = 0.0
    angle: float = 0.0


@dataclass(frozen=True)
class PremeasureStmt:
    system: str
    theta: float
    phi: float
    pointer: str


@dataclass(frozen=True)
class ObserverStmt:
    name: str
    seed: int


@dataclass(frozen=True)
class PerceiveStmt:
    observer: str
    register: str
    label: str


@dataclass(frozen=True)
class AskStmt:
    asker: str
    register: str
    label: str


@dataclass(frozen=True)
class ExpectEqualStmt:
    left: str
    right: str


@dataclass(frozen=True)
class ExpectOppositeStmt:
    left: str
    right: str


@dataclass(frozen=True)
class TallyStmt:
    labels: tuple[str, ...]


Statement = (
    RegStmt
    | InitStmt
    | SingletStmt
    | UnitaryStmt
    | PremeasureStmt
    | ObserverStmt
    | PerceiveStmt
    | AskStmt
    | ExpectEqualStmt
    | ExpectOppositeStmt
    | TallyStmt
)


@dataclass(frozen=True)
class ScenarioProgram:
    statements: tuple[Statement, ...]


@dataclass
class Report:
    """Aggregated outcome of running a program over many worlds."""

    trials: int
    seed: int
    labels: tuple[str, ...]
    label_counts: dict[str, dict[int, int]]
    tally_labels: tuple[str, ...]
    tuple_counts: dict[tuple[int, ...], int]
    expectations: list[tuple[str, str, str, int]]  # (kind, left, right, violations)
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return sum(v for _, _, _, v in self.expectations)


class _LineParser:
    def __init__(self, line_no: int, tokens: list[str]) -> None:
        self.line_no = line_no
        self.tokens = tokens
        self.pos = 0

    def fail(self, message: str) -> ScenarioParseError:
        return ScenarioParseError(self.line_no, message)

    def take(self, what: str) -> str:
        if self.pos >= len(self.tokens):
            raise self.fail(f"missing {what}")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def name(self, what: str) -> str:
        token = self.take(what)
        if not _NAME_RE.match(token):
            raise self.fail(f"invalid {what} {token!r}")
        return token

    def keyword(self, literal: str) -> None:
        token = self.take(f"keyword '{literal}'")
        if token != literal:
            raise self.fail(f"expected '{literal}', got {token!r}")

    def integer(self, what: str) -> int:
        token = self.take(what)
        try:
            return int(token)
        except ValueError:
            raise self.fail(f"{what} must be an integer, got {token!r}") from None

    def number(self, what: str) -> float:
        token = self.take(what)
        try:
            return float(token)
        except ValueError:
            raise self.fail(f"{what} must be a decimal literal, got {token!r}") from None

    def done(self) -> None:
        if self.pos != len(self.tokens):
            raise self.fail(f"unexpected trailing token {self.tokens[self.pos]!r}")


class _Validator:
    """Static checks shared by the parser and the pretty-print round trip."""

    def __init__(self) -> None:
        self.registers: dict[str, RegStmt] = {}
        self.observers: set[str] = set()
        self.labels: dict[str, str] = {}  # label -> register
        self.initialized = False
        self.dynamics_seen = False
        self.tally_seen = False

    def check(self, line: int, stmt: Statement) -> None:
        def fail(msg: str) -> None:
            raise ScenarioParseError(line, msg)

        if isinstance(stmt, RegStmt):
            if self.initialized or self.dynamics_seen:
                fail(f"register '{stmt.name}' declared after initialization")
            if stmt.name in self.registers:
                fail(f"duplicate register '{stmt.name}'")
            self.registers[stmt.name] = stmt
            return
        if isinstance(stmt, (InitStmt, SingletStmt)):
            if self.initialized:
                fail("program already initialized; only one init/singlet allowed")
            if self.dynamics_seen:
                fail("initialization must precede dynamics")
            if not self.registers:
                fail("initialization before any register declaration")
            if isinstance(stmt, InitStmt):
                if len(stmt.indices) != len(self.registers):
                    fail(
                        f"init expects {len(self.registers)} indices, "
                        f"got {len(stmt.indices)}"
                    )
                for reg, idx in zip(self.registers.values(), stmt.indices):
                    if not 0 <= idx < reg.dim:
                        fail(f"index {idx} out of range for register '{reg.name}'")
            else:
                for name in (stmt.u, stmt.v):
                    if name not in self.registers:
                        fail(f"undeclared register '{name}'")
                    if self.registers[name].dim != 2:
                        fail(f"singlet register '{name}' must have dim 2")
                if stmt.u == stmt.v:
                    fail("singlet registers must be distinct")
            self.initialized = True
            return
        if isinstance(stmt, ObserverStmt):
            if not self.initialized:
                fail("observer declared before initialization")
            if stmt.name in self.observers:
                fail(f"duplicate observer '{stmt.name}'")
            if stmt.name in self.registers:
                fail(f"observer '{stmt.name}' collides with a register name")
            self.observers.add(stmt.name)
            return
        # everything below is dynamics; undeclared identifiers outrank
        # ordering complaints in the reported error
        if isinstance(stmt, UnitaryStmt):
            if stmt.target not in self.registers:
                fail(f"undeclared register '{stmt.target}'")
            if not self.initialized:
                fail("dynamics before initialization")
            if self.registers[stmt.target].dim != 2:
                fail(f"unitary generators act on dim-2 registers, '{stmt.target}' is not")
            self.dynamics_seen = True
            return
        if isinstance(stmt, PremeasureStmt):
            for name in (stmt.system, stmt.pointer):
                if name not in self.registers:
                    fail(f"undeclared register '{name}'")
            if not self.initialized:
                fail("dynamics before initialization")
            if stmt.system == stmt.pointer:
                fail("premeasure system and pointer must differ")
            self.dynamics_seen = True
            return
        if isinstance(stmt, (PerceiveStmt, AskStmt)):
            observer = stmt.observer if isinstance(stmt, PerceiveStmt) else stmt.asker
            if observer not in self.observers:
                fail(f"undeclared observer '{observer}'")
            if stmt.register not in self.registers:
                fail(f"undeclared register '{stmt.register}'")
            if not self.initialized:
                fail("dynamics before initialization")
            if isinstance(stmt, AskStmt) and self.registers[stmt.register].kind != "brain":
                fail(f"ask target '{stmt.register}' must be a brain register")
            if stmt.label in self.labels:
                fail(f"duplicate label '{stmt.label}'")
            if stmt.label in self.registers or stmt.label in self.observers:
                fail(f"label '{stmt.label}' collides with a declared name")
            self.labels[stmt.label] = stmt.register
            self.dynamics_seen = True
            return
        if isinstance(stmt, (ExpectEqualStmt, ExpectOppositeStmt)):
            for label in (stmt.left, stmt.right):
                if label not in self.labels:
                    fail(f"undeclared label '{label}'")
            if isinstance(stmt, ExpectOppositeStmt):
                for label in (stmt.left, stmt.right):
                    if self.registers[self.labels[label]].dim != 2:
                        fail(f"expect_opposite needs dim-2 outcomes, label '{label}' is not")
            return
        if isinstance(stmt, TallyStmt):
            if self.tally_seen:
                fail("duplicate tally")
            self.tally_seen = True
            if len(set(stmt.labels)) != len(stmt.labels):
                fail("tally labels must be distinct")
            for label in stmt.labels:
                if label not in self.labels:
                    fail(f"undeclared label '{label}'")
            return
        raise AssertionError(f"unhandled statement {stmt!r}")


def _parse_statement(p: _LineParser, keyword: str) -> Statement:
    if keyword == "reg":
        name = p.name("register name")
        dim = p.integer("register dim")
        kind = p.take("register kind")
        if kind not in REGISTER_KINDS:
            raise p.fail(f"unknown register kind {kind!r}")
        if dim < 2:
            raise p.fail(f"register dim must be >= 2, got {dim}")
        return RegStmt(name, dim, kind)
    if keyword == "init":
        indices = []
        while p.pos < len(p.tokens):
            indices.append(p.integer("basis index"))
        if not indices:
            raise p.fail("init needs at least one basis index")
        return InitStmt(tuple(indices))
    if keyword == "singlet":
        return SingletStmt(p.name("register name"), p.name("register name"))
    if keyword == "unitary":
        target = p.name("target register")
        generator = p.take("generator")
        if generator == "rot":
            theta = p.number("theta")
            phi = p.number("phi")
            angle = p.number("angle")
            return UnitaryStmt(target, "rot", theta, phi, angle)
        if generator in ("x-flip", "z-phase"):
            return UnitaryStmt(target, generator)
        raise p.fail(f"unknown unitary generator {generator!r}")
    if keyword == "premeasure":
        system = p.name("system register")
        p.keyword("axis")
        theta = p.number("theta")
        phi = p.number("phi")
        p.keyword("into")
        pointer = p.name("pointer register")
        return PremeasureStmt(system, theta, phi, pointer)
    if keyword == "observer":
        return ObserverStmt(p.name("observer name"), p.integer("seed"))
    if keyword == "perceive":
        observer = p.name("observer name")
        register = p.name("register name")
        p.keyword("as")
        return PerceiveStmt(observer, register, p.name("label"))
    if keyword == "ask":
        asker = p.name("observer name")
        register = p.name("register name")
        p.keyword("as")
        return AskStmt(asker, register, p.name("label"))
    if keyword == "expect_equal":
        return ExpectEqualStmt(p.name("label"), p.name("label"))
    if keyword == "expect_opposite":
        return ExpectOppositeStmt(p.name("label"), p.name("label"))
    if keyword == "tally":
        labels = []
        while p.pos < len(p.tokens):
            labels.append(p.name("label"))
        if not labels:
            raise p.fail("tally needs at least one label")
        return TallyStmt(tuple(labels))
    raise p.fail(f"unknown keyword {keyword!r}")


def parse_scenario(text: str) -> ScenarioProgram:
    """Parse a scenario script; errors carry the 1-based line number."""
    statements: list[Statement] = []
    validator = _Validator()
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        p = _LineParser(line_no, line.split())
        stmt = _parse_statement(p, p.take("keyword"))
        p.done()
        validator.check(line_no, stmt)
        statements.append(stmt)
    return ScenarioProgram(tuple(statements))


def format_scenario(program: ScenarioProgram) -> str:
    """Canonical text form; parse_scenario(format_scenario(p)) == p."""
    lines = []
    for stmt in program.statements:
        if isinstance(stmt, RegStmt):
            lines.append(f"reg {stmt.name} {stmt.dim} {stmt.kind}")
        elif isinstance(stmt, InitStmt):
            lines.append("init " + " ".join(str(i) for i in stmt.indices))
        elif isinstance(stmt, SingletStmt):
            lines.append(f"singlet {stmt.u} {stmt.v}")
        elif isinstance(stmt, UnitaryStmt):
            if stmt.generator == "rot":
                lines.append(
                    f"unitary {stmt.target} rot {stmt.theta!r} {stmt.phi!r} {stmt.angle!r}"
                )
            else:
                lines.append(f"unitary {stmt.target} {stmt.generator}")
        elif isinstance(stmt, PremeasureStmt):
            lines.append(
                f"premeasure {stmt.system} axis {stmt.theta!r} {stmt.phi!r} into {stmt.pointer}"
            )
        elif isinstance(stmt, ObserverStmt):
            lines.append(f"observer {stmt.name} {stmt.seed}")
        elif isinstance(stmt, PerceiveStmt):
            lines.append(f"perceive {stmt.observer} {stmt.register} as {stmt.label}")
        elif isinstance(stmt, AskStmt):
            lines.append(f"ask {stmt.asker} {stmt.register} as {stmt.label}")
        elif isinstance(stmt, ExpectEqualStmt):
            lines.append(f"expect_equal {stmt.left} {stmt.right}")
        elif isinstance(stmt, ExpectOppositeStmt):
            lines.append(f"expect_opposite {stmt.left} {stmt.right}")
        elif isinstance(stmt, TallyStmt):
            lines.append("tally " + " ".join(stmt.labels))
        else:
            raise AssertionError(f"unhandled statement {stmt!r}")
    return "\n".join(lines) + "\n"


def _run_single(program: ScenarioProgram, seed: int, trial: int) -> TrialRecord:
    regs = [s for s in program.statements if isinstance(s, RegStmt)]
    layout = RegisterLayout.of(*[(r.name, r.dim, r.kind) for r in regs])
    world: World | None = None
    outcomes: dict[str, int] = {}
    for stmt in program.statements:
        if isinstance(stmt, InitStmt):
            world = World(make_product_state(layout, stmt.indices), seed=seed, trial=trial)
        elif isinstance(stmt, SingletStmt):
            world = World(singlet_state(layout, stmt.u, stmt.v), seed=seed, trial=trial)
        elif isinstance(stmt, ObserverStmt):
            assert world is not None
            world.new_observer(stmt.name, stmt.seed)
        elif isinstance(stmt, UnitaryStmt):
            assert world is not None
            if stmt.generator == "x-flip":
                op = x_flip(stmt.target)
            elif stmt.generator == "z-phase":
                op = z_phase(stmt.target)
            else:
                op = axis_rotation(stmt.target, AxisSpec(stmt.theta, stmt.phi), stmt.angle)
            world.apply_unitary(op)
        elif isinstance(stmt, PremeasureStmt):
            assert world is not None
            world.premeasure_along(stmt.system, AxisSpec(stmt.theta, stmt.phi), stmt.pointer)
        elif isinstance(stmt, PerceiveStmt):
            assert world is not None
            outcomes[stmt.label] = world.perceive(stmt.observer, stmt.register).outcome
        elif isinstance(stmt, AskStmt):
            assert world is not None
            outcomes[stmt.label] = world.ask(stmt.asker, stmt.register).outcome
    return TrialRecord(trial, outcomes, (seed, trial))


def run_program(program: ScenarioProgram, trials: int, seed: int) -> Report:
    """Execute the program on `trials` fresh worlds with derived streams."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    labels = tuple(
        s.label for s in program.statements if isinstance(s, (PerceiveStmt, AskStmt))
    )
    expectations = [
        s for s in program.statements if isinstance(s, (ExpectEqualStmt, ExpectOppositeStmt))
    ]
    tally = next((s for s in program.statements if isinstance(s, TallyStmt)), None)
    label_counts: dict[str, dict[int, int]] = {label: {} for label in labels}
    tuple_counts: dict[tuple[int, ...], int] = {}
    violation_counts = [0] * len(expectations)
    for trial in range(trials):
        try:
            record = _run_single(program, seed, trial)
        except Exception as exc:
            raise RuntimeError(f"trial {trial}: {exc}") from exc
        for label, outcome in record.outcomes.items():
            counts = label_counts[label]
            counts[outcome] = counts.get(outcome, 0) + 1
        if tally is not None:
            key = tuple(record.outcomes[label] for label in tally.labels)
            tuple_counts[key] = tuple_counts.get(key, 0) + 1
        for i, expectation in enumerate(expectations):
            left = record.outcomes[expectation.left]
            right = record.outcomes[expectation.right]
            if isinstance(expectation, ExpectEqualStmt):
                ok = left == right
            else:
                ok = left == 1 - right
            if not ok:
                violation_counts[i] += 1
    return Report(
        trials=trials,
        seed=seed,
        labels=labels,
        label_counts=label_counts,
        tally_labels=tally.labels if tally is not None else (),
        tuple_counts=tuple_counts,
        expectations=[
            (
                "equal" if isinstance(e, ExpectEqualStmt) else "opposite",
                e.left,
                e.right,
                violation_counts[i],
            )
            for i, e in enumerate(expectations)
        ],
        metadata={"version": VERSION, "seed": str(seed), "trials": str(trials)},
    )


def _frequency(count: int, trials: int) -> str:
    return format(count / trials, "#.10g")


def emit_report(report: Report, format: str = "table") -> str:
    """Render a report; csv output is byte-deterministic for fixed inputs."""
    if format == "csv":
        return _emit_csv(report)
    if format == "table":
        return _emit_table(report)
    raise ValueError(f"unknown report format {format!r}")


def _metadata_lines(report: Report) -> list[str]:
    lines = []
    for key in sorted(report.metadata):
        lines.append(f"# {key}={report.metadata[key]}")
    for kind, left, right, violations in report.expectations:
        lines.append(f"# expect_{kind}:{left},{right} violations={violations}")
    return lines


def _emit_csv(report: Report) -> str:
    lines = _metadata_lines(report)
    lines.append("tuple,count,frequency")
    joint_rows = [
        (":".join(str(i) for i in key), count)
        for key, count in report.tuple_counts.items()
    ]
    for key, count in sorted(joint_rows):
        lines.append(f"{key},{count},{_frequency(count, report.trials)}")
    lines.append("label,outcome,count,frequency")
    marginal_rows = []
    for label in report.labels:
        for outcome, count in report.label_counts[label].items():
            marginal_rows.append((label, str(outcome), count))
    for label, outcome, count in sorted(marginal_rows):
        lines.append(f"{label},{outcome},{count},{_frequency(count, report.trials)}")
    return "\n".join(lines) + "\n"


def _emit_table(report: Report) -> str:
    lines = ["scenario report"]
    meta = " ".join(f"{k}={report.metadata[k]}" for k in sorted(report.metadata))
    lines.append(f"  {meta}")
    if report.expectations:
        lines.append("  assertions:")
        for kind, left, right, violations in report.expectations:
            lines.append(f"    expect_{kind}({left}, {right}): {violations} violations")
    if report.labels:
        lines.append("  marginals:")
        width = max(len("label"), *(len(label) for label in report.labels))
        lines.append(f"    {'label'.ljust(width)}  outcome  count  frequency")
        for label in report.labels:
            for outcome in sorted(report.label_counts[label]):
                count = report.label_counts[label][outcome]
                lines.append(
                    f"    {label.ljust(width)}  {str(outcome).ljust(7)}  "
                    f"{str(count).ljust(5)}  {_frequency(count, report.trials)}"
                )
    if report.tally_labels:
        lines.append(f"  joint ({', '.join(report.tally_labels)}):")
        lines.append("    tuple  count  frequency")
        rows = [
            (":".join(str(i) for i in key), count)
            for key, count in report.tuple_counts.items()
        ]
        for key, count in sorted(rows):
            lines.append(
                f"    {key.ljust(5)}  {str(count).ljust(5)}  "
                f"{_frequency(count, report.trials)}"
            )
    return "\n".join(lines) + "\n"
