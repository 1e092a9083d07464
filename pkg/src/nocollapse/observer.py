"""Per-observer branch commitments over a shared, never-collapsed global state.

A World owns one global StateVector that only unitaries and premeasurements
may replace.  Each observer carries an ordered commitment history; perceiving
a register samples its Born-rule distribution conditioned on that history and
appends the outcome.  Perception never touches the state.  Awareness values
record what an observer saw; they are not vectors and no operation combines
them with states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import streams
from .premeasure import PremeasureRecord, premeasure_composite
from .qstate import (
    PROB_FLOOR,
    AxisSpec,
    BranchStructureError,
    Commitment,
    StateVector,
    UnitaryOp,
    apply_unitary,
)


class InternalInconsistencyError(RuntimeError):
    """An observer's commitment set reached probability zero (should be unreachable)."""


class UnrecordedResultError(ValueError):
    """Asked about a brain register no premeasurement ever wrote to."""


@dataclass(frozen=True)
class Awareness:
    """A perceived definite outcome.  Deliberately not embeddable in a state."""

    observer: str
    register: str
    outcome: int
    event_id: int


class Observer:
    """An identity, a seeded random stream, and a commitment history."""

    def __init__(self, id: str, seed: int, stream_base: bytes) -> None:
        self.id = id
        self.seed = seed
        self.commitments: list[Commitment] = []
        self._stream_base = stream_base
        self._outcomes: dict[str, int] = {}
        self._events: dict[str, int] = {}

    def outcome(self, register: str) -> int | None:
        """The committed outcome on a register, or None if uncommitted."""
        return self._outcomes.get(register)

    @property
    def outcome_map(self) -> dict[str, int]:
        return dict(self._outcomes)


class World:
    """One global state, its observers, and the event log."""

    def __init__(self, state: StateVector, seed: int = 0, trial: int = 0) -> None:
        self._state = state
        self.seed = seed
        self.trial = trial
        self.event_counter = 0
        self.premeasure_log: list[PremeasureRecord] = []
        self._observers: dict[str, Observer] = {}

    @property
    def state(self) -> StateVector:
        return self._state

    @property
    def observers(self) -> dict[str, Observer]:
        return dict(self._observers)

    def new_observer(self, id: str, seed: int) -> Observer:
        if id in self._observers:
            raise ValueError(f"duplicate observer id {id!r}")
        obs = Observer(id, seed, streams.stream_base(self.seed, seed, id))
        self._observers[id] = obs
        return obs

    def _resolve(self, observer: Observer | str) -> Observer:
        if isinstance(observer, str):
            try:
                return self._observers[observer]
            except KeyError:
                raise ValueError(f"unknown observer {observer!r}") from None
        if self._observers.get(observer.id) is not observer:
            raise ValueError(f"observer {observer.id!r} does not belong to this world")
        return observer

    def _guard_targets(self, targets: tuple[str, ...]) -> None:
        for name in targets:
            for obs in self._observers.values():
                if obs.outcome(name) is not None:
                    raise BranchStructureError(
                        f"branch structure violated: register '{name}' carries a "
                        f"commitment by observer '{obs.id}'"
                    )

    def apply_unitary(self, op: UnitaryOp) -> None:
        """Evolve the global state.  Refused on registers any observer committed to."""
        for name in op.targets:
            self._state.layout.axis(name)
        self._guard_targets(op.targets)
        self._state = apply_unitary(self._state, op)

    def premeasure_along(
        self, system: str, axis: AxisSpec | None, pointer: str
    ) -> PremeasureRecord:
        """Unitarily correlate `pointer` with `system`'s axis eigenbasis and log it."""
        op = premeasure_composite(self._state.layout, system, axis, pointer)
        self._guard_targets(op.targets)
        self._state = apply_unitary(self._state, op)
        record = PremeasureRecord(system, pointer, axis, self.event_counter)
        self.event_counter += 1
        self.premeasure_log.append(record)
        return record

    def conditional_distribution(
        self, observer: Observer | str, register: str
    ) -> np.ndarray:
        """Born distribution over `register`, conditioned on the observer's branch.

        A committed register yields the point mass on its committed outcome.
        """
        obs = self._resolve(observer)
        layout = self._state.layout
        axis = layout.axis(register)
        dim = layout.registers[axis].dim
        committed = obs.outcome(register)
        if committed is not None:
            dist = np.zeros(dim)
            dist[committed] = 1.0
            return dist
        if obs._outcomes:
            indexer: list = [slice(None)] * len(layout.registers)
            target_pos = axis
            for name, outcome in obs._outcomes.items():
                pos = layout.axis(name)
                indexer[pos] = outcome
                if pos < axis:
                    target_pos -= 1
            sub = self._state.tensor()[tuple(indexer)]
        else:
            target_pos = axis
            sub = self._state.tensor()
        probs = np.abs(sub) ** 2
        other = tuple(i for i in range(probs.ndim) if i != target_pos)
        dist = probs.sum(axis=other)
        base = float(dist.sum())
        if base <= PROB_FLOOR:
            raise InternalInconsistencyError(
                f"observer '{obs.id}' holds a zero-probability commitment set"
            )
        return dist / base

    def _commit(self, obs: Observer, register: str, outcome: int) -> Awareness:
        event_id = self.event_counter
        self.event_counter += 1
        obs.commitments.append(Commitment(register, outcome, event_id))
        obs._outcomes[register] = outcome
        obs._events[register] = event_id
        return Awareness(obs.id, register, outcome, event_id)

    def perceive(self, observer: Observer | str, register: str) -> Awareness:
        """Sample one branch of `register` by the Born rule and hang on to it.

        The global state is untouched.  Re-perceiving a committed register
        returns the committed outcome and consumes no randomness.
        """
        obs = self._resolve(observer)
        committed = obs.outcome(register)
        if committed is not None:
            return Awareness(obs.id, register, committed, obs._events[register])
        state_before = self._state
        dist = self.conditional_distribution(obs, register)
        u = streams.uniform_at(
            streams.event_key(obs._stream_base, self.event_counter), self.trial
        )
        outcome = streams.sample_index(dist, u)
        assert self._state is state_before  # perception must not move the state
        return self._commit(obs, register, outcome)

    def ask(self, asker: Observer | str, askee_brain_register: str) -> Awareness:
        """Hear another observer's report: a measurement of their brain register.

        The answer is sampled from the asker's own conditional branch, so it
        can never contradict anything the asker already perceived.
        """
        reg = self._state.layout.register(askee_brain_register)
        if reg.kind != "brain":
            raise ValueError(
                f"register '{askee_brain_register}' has kind '{reg.kind}', not 'brain'"
            )
        if not any(rec.pointer == askee_brain_register for rec in self.premeasure_log):
            raise UnrecordedResultError(
                f"asking about an unrecorded result: register "
                f"'{askee_brain_register}' was never correlated by a premeasurement"
            )
        return self.perceive(asker, askee_brain_register)
