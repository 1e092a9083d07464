"""Independent ground truth: textbook collapse dynamics and exhaustive branch tables.

Collapse exists only here.  The core simulation never projects a state; this
module supplies the von Neumann prescription and the full relative-state
decomposition so the commitment machinery can be checked against both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qstate import PROB_FLOOR, StateVector, register_marginal
from .streams import sample_index

ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class BranchTable:
    """Joint outcome tuples with their Born probabilities; zero entries omitted."""

    registers: tuple[str, ...]
    entries: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self) -> None:
        total = 0.0
        seen = set()
        for outcomes, prob in self.entries:
            if prob < 0.0:
                raise ValueError(f"negative branch probability {prob!r}")
            if outcomes in seen:
                raise ValueError(f"duplicate branch tuple {outcomes!r}")
            seen.add(outcomes)
            total += prob
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"branch probabilities sum to {total!r}, not 1")

    def probability(self, outcomes: tuple[int, ...]) -> float:
        for entry_outcomes, prob in self.entries:
            if entry_outcomes == outcomes:
                return prob
        return 0.0

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {outcomes: prob for outcomes, prob in self.entries}


def collapse_measure(
    state: StateVector, register: str, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Von Neumann measurement: sample the register's marginal, project, renormalize."""
    marginal = register_marginal(state, register)
    outcome = sample_index(marginal, float(rng.random()))
    prob = float(marginal[outcome])
    if prob < PROB_FLOOR:
        raise RuntimeError(
            f"collapse selected a branch of probability {prob!r} on register "
            f"'{register}'; refusing to renormalize"
        )
    layout = state.layout
    axis = layout.axis(register)
    tensor = np.array(state.tensor())
    indexer: list = [slice(None)] * len(layout.registers)
    for value in range(layout.registers[axis].dim):
        if value != outcome:
            indexer[axis] = value
            tensor[tuple(indexer)] = 0.0
    flat = tensor.reshape(-1)
    flat = flat / np.linalg.norm(flat)
    return outcome, StateVector(layout, flat)


def enumerate_branches(state: StateVector, registers: Sequence[str]) -> BranchTable:
    """Every joint outcome over `registers` with its Born probability."""
    layout = state.layout
    axes = [layout.axis(name) for name in registers]
    if len(set(axes)) != len(axes):
        raise ValueError("branch registers must be distinct")
    count = 1
    for a in axes:
        count *= layout.registers[a].dim
    if count > ENUMERATION_CAP:
        raise ValueError(
            f"combinatorial cap exceeded: {count} outcome tuples (cap {ENUMERATION_CAP})"
        )
    probs = np.abs(state.tensor()) ** 2
    other = tuple(i for i in range(probs.ndim) if i not in axes)
    joint = probs.sum(axis=other) if other else probs
    # summed axes drop out in ascending order; reorder to the requested register order
    kept = [a for a in range(probs.ndim) if a in axes]
    joint = np.transpose(joint, [kept.index(a) for a in axes])
    entries = []
    for flat_index, prob in enumerate(joint.reshape(-1)):
        p = float(prob)
        if p <= PROB_FLOOR:
            continue
        entries.append((tuple(np.unravel_index(flat_index, joint.shape)), p))
    entries = [(tuple(int(i) for i in outcomes), p) for outcomes, p in entries]
    return BranchTable(tuple(registers), tuple(entries))


def sequential_collapse_run(
    state: StateVector, registers: Sequence[str], rng: np.random.Generator
) -> tuple[int, ...]:
    """Measure the registers in order with collapse after each; the standard story."""
    outcomes = []
    current = state
    for register in registers:
        outcome, current = collapse_measure(current, register, rng)
        outcomes.append(outcome)
    return tuple(outcomes)


def collapse_chain_probability(
    state: StateVector, registers: Sequence[str], outcomes: Sequence[int]
) -> float:
    """Exact probability that sequential collapse yields `outcomes`, no sampling."""
    prob = 1.0
    current = state
    layout = state.layout
    for register, outcome in zip(registers, outcomes):
        marginal = register_marginal(current, register)
        step = float(marginal[outcome])
        prob *= step
        if step <= PROB_FLOOR:
            return 0.0
        axis = layout.axis(register)
        tensor = np.array(current.tensor())
        indexer: list = [slice(None)] * len(layout.registers)
        for value in range(layout.registers[axis].dim):
            if value != outcome:
                indexer[axis] = value
                tensor[tuple(indexer)] = 0.0
        flat = tensor.reshape(-1)
        current = StateVector(layout, flat / np.linalg.norm(flat))
    return prob
