"""Acceptance suite: one test per exit criterion, each printing a pass line
with its measured runtime.  Tolerances are fixed here, not tuned."""

import itertools
import math
import time

import numpy as np
import pytest
from conftest import hanging_on_chain_probability, random_layout, random_state

from nocollapse import cli, scenarios
from nocollapse.observer import World
from nocollapse.oracle import enumerate_branches
from nocollapse.premeasure import premeasure_along
from nocollapse.qstate import (
    AXIS_X,
    AXIS_Z,
    AxisSpec,
    apply_unitary,
    axis_basis_unitary,
    commitment_probability,
    fidelity,
    make_product_state,
    RegisterLayout,
    singlet_state,
)
from nocollapse.script import parse_scenario, run_program


def report(number, name, elapsed, budget):
    print(f"ACCEPTANCE {number} {name}: PASS ({elapsed:.2f}s < {budget:.0f}s)")


def run_cli_csv(argv, capsys):
    code = cli.main(argv + ["--format", "csv"])
    return code, capsys.readouterr().out


def meta(text, key):
    for line in text.splitlines():
        stripped = line[2:] if line.startswith("# ") else line
        if stripped.startswith(key + "="):
            return stripped.split("=", 1)[1]
    raise KeyError(key)


def random_axis(rng):
    return AxisSpec(math.acos(1 - 2 * rng.random()), 2 * math.pi * rng.random())


def test_criterion_1_perfect_anticorrelation(capsys):
    start = time.perf_counter()
    code, out = run_cli_csv(
        ["epr", "--axis-a", "0", "--axis-b", "0", "--trials", "100000", "--seed", "0"],
        capsys,
    )
    elapsed = time.perf_counter() - start
    assert code == 0
    rows = {
        line.split(",")[0]: int(line.split(",")[1])
        for line in out.splitlines()
        if line and line[0] in "01" and ":" in line.split(",")[0]
    }
    opposite = rows.get("0:1", 0) + rows.get("1:0", 0)
    assert opposite == 100000, f"only {opposite}/100000 trials anticorrelated"
    assert rows.get("0:0", 0) == 0 and rows.get("1:1", 0) == 0
    assert elapsed < 5.0
    with capsys.disabled():
        report(1, "perfect anticorrelation (100000/100000 opposite)", elapsed, 5)


def test_criterion_2_mixture_vs_singlet(capsys):
    start = time.perf_counter()
    code, out = run_cli_csv(["mixture", "--trials", "100000", "--seed", "0"], capsys)
    elapsed = time.perf_counter() - start
    assert code == 0
    mixture = float(meta(out, "mixture_both_plus_frequency"))
    singlet = float(meta(out, "singlet_both_plus_frequency"))
    assert 0.2445 <= mixture <= 0.2555, f"mixture frequency {mixture} outside 4-sigma band"
    assert singlet == 0.0, f"singlet both-plus frequency {singlet} != 0"
    assert elapsed < 10.0
    with capsys.disabled():
        report(2, f"mixture {mixture:.4f} in [0.2445, 0.2555], singlet exactly 0", elapsed, 10)


def test_criterion_3_chsh_violation(capsys):
    start = time.perf_counter()
    s = scenarios.canonical_chsh_statistic(1000000, seed=0)
    classical = scenarios.classical_chsh_statistic(1000000, seed=0)
    elapsed = time.perf_counter() - start
    assert abs(abs(s) - 2.8284) <= 0.02, f"|S| = {abs(s)} outside 2.8284 +/- 0.02"
    assert abs(classical) <= 2.01, f"classical stub |S| = {abs(classical)} > 2.01"
    assert elapsed < 60.0
    with capsys.disabled():
        report(
            3,
            f"CHSH |S| = {abs(s):.4f} (quantum), {abs(classical):.2f} (classical stub)",
            elapsed,
            60,
        )


def test_criterion_4_no_signaling(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for axis_a, axis_a_prime, axis_b in [
        (AXIS_Z, AXIS_X, AXIS_Z),
        (AXIS_Z, AXIS_X, AxisSpec(0.7, 0.2)),
        (random_axis(rng), random_axis(rng), random_axis(rng)),
        (random_axis(rng), random_axis(rng), random_axis(rng)),
    ]:
        worst = max(worst, scenarios.no_signaling_deviation(axis_a, axis_a_prime, axis_b))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12, f"marginal deviation {worst} >= 1e-12"
    assert elapsed < 1.0
    with capsys.disabled():
        report(4, f"no-signaling deviation {worst:.2e} < 1e-12", elapsed, 1)


def test_criterion_5_conviviality(capsys):
    start = time.perf_counter()
    violations = scenarios.conviviality_violations(100000, seed=0)
    elapsed = time.perf_counter() - start
    assert violations == 0, f"{violations} conviviality violations"
    assert elapsed < 10.0
    with capsys.disabled():
        report(5, "conviviality, 0 violations in 100000 rounds", elapsed, 10)


def test_criterion_6_repeatability(capsys):
    start = time.perf_counter()
    violations = scenarios.repeatability_violations(100000, seed=0)
    elapsed = time.perf_counter() - start
    assert violations == 0, f"{violations} re-perception mismatches"
    assert elapsed < 10.0
    with capsys.disabled():
        report(6, "repeatability, 0 mismatches in 100000 trials", elapsed, 10)


def test_criterion_7_global_state_invariance(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    # every scenario's standalone path asserts byte-identity internally;
    # exercise them all and re-check one world externally
    for trial in range(200):
        scenarios.epr_trial(random_axis(rng), random_axis(rng), seed=3, trial=trial)
    for trial in range(200):
        scenarios.conviviality_trial(4, trial)
    for trial in range(100):
        scenarios.mixture_trial(AXIS_X, seed=5, trial=trial)
    for trial in range(100):
        assert scenarios.repeatability_trial(6, trial) == 0
    world = scenarios.build_epr_world(random_axis(rng), random_axis(rng), seed=7)
    alice = world.new_observer("alice", 0)
    bob = world.new_observer("bob", 0)
    snapshot = world.state.amps.tobytes()
    state_object = world.state
    for observer, register in [
        (alice, "O_A"), (bob, "O_B"), (alice, "U"), (bob, "V"), (alice, "A"), (bob, "B"),
    ]:
        world.perceive(observer, register)
        assert world.state is state_object
        assert world.state.amps.tobytes() == snapshot
    world.ask(alice, "O_B")
    world.ask(bob, "O_A")
    assert world.state.amps.tobytes() == snapshot
    program = parse_scenario(
        "reg U 2 system\nreg V 2 system\nreg A 2 apparatus\nreg O 2 brain\n"
        "singlet U V\npremeasure U axis 0.7 0.1 into A\npremeasure A axis 0.0 0.0 into O\n"
        "observer o 1\nperceive o A as a\nask o O as h\nexpect_equal a h\n"
    )
    assert run_program(program, trials=200, seed=8).total_violations == 0
    elapsed = time.perf_counter() - start
    with capsys.disabled():
        report(7, "global state bit-identical across every perceive/ask", elapsed, math.inf)


def test_criterion_8_oracle_equivalence(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        layout = random_layout(rng, max_registers=6)
        state = random_state(rng, layout)
        names = list(layout.names)
        rng.shuffle(names)
        table = enumerate_branches(state, names).as_dict()
        for outcomes in itertools.product(
            *[range(layout.register(n).dim) for n in names]
        ):
            chain = hanging_on_chain_probability(state, names, outcomes)
            worst = max(worst, abs(chain - table.get(outcomes, 0.0)))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12, f"chain/branch probability deviation {worst}"
    assert elapsed < 30.0
    with capsys.disabled():
        report(8, f"oracle equivalence on 100 random worlds, max dev {worst:.1e}", elapsed, 30)


def test_criterion_9_numerical_hygiene(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    qubits = RegisterLayout.of(("U", 2, "system"), ("V", 2, "system"), ("A", 2, "apparatus"))

    # unitarity / normalization: premeasurement and rotations preserve norm to 1e-12
    for _ in range(50):
        state = random_state(rng, qubits)
        axis = random_axis(rng)
        rotated = apply_unitary(state, axis_basis_unitary(axis, "V"))
        assert abs(np.linalg.norm(rotated.amps) - 1.0) < 1e-12
        premeasured, _ = premeasure_along(state, "U", axis, "A")
        assert abs(np.linalg.norm(premeasured.amps) - 1.0) < 1e-12

    # probability additivity at 1e-12
    mixed_layout = RegisterLayout.of(("a", 2, "system"), ("b", 3, "system"), ("c", 2, "system"))
    for _ in range(50):
        state = random_state(rng, mixed_layout)
        base = {"c": int(rng.integers(2))}
        total = sum(commitment_probability(state, {**base, "b": o}) for o in range(3))
        assert abs(total - commitment_probability(state, base)) < 1e-12

    # singlet rotation invariance over 100 random axes at 1e-12
    singlet = singlet_state(qubits, "U", "V")
    for _ in range(100):
        axis = random_axis(rng)
        rotated = apply_unitary(singlet, axis_basis_unitary(axis, "U"))
        rotated = apply_unitary(rotated, axis_basis_unitary(axis, "V"))
        assert abs(fidelity(singlet, rotated) - 1.0) < 1e-12

    # singlet anticorrelation is exactly zero, not approximately
    assert commitment_probability(singlet, {"U": 0, "V": 0}) == 0.0
    assert commitment_probability(singlet, {"U": 1, "V": 1}) == 0.0

    # construction-time norm tolerance is 1e-10
    from nocollapse.qstate import StateVector

    good = np.zeros(8, dtype=complex)
    good[0] = 1.0 + 0.5e-10
    StateVector(qubits, good / 1.0)  # within tolerance
    bad = np.zeros(8, dtype=complex)
    bad[0] = 1.0 + 1e-9
    with pytest.raises(ValueError):
        StateVector(qubits, bad)

    elapsed = time.perf_counter() - start
    with capsys.disabled():
        report(9, "numerical hygiene suites at 1e-12/1e-10", elapsed, math.inf)
