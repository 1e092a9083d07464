"""Built-in experiments: EPR anticorrelation, mixture discrimination, CHSH,
no-signaling, conviviality, and repeatability.

Correlations between the two parties are always read the only way the model
allows: the first observer asks the second, and the answer is her own
measurement of the second observer's brain register.  Statistical estimators
run trials as a vectorized ensemble; each trial draws from the same
counter-based streams as a standalone World with matching seed and trial
index, so single-trial runs reproduce ensemble entries bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .observer import World
from .premeasure import premeasure_along
from .qstate import (
    AXIS_X,
    AxisSpec,
    RegisterLayout,
    StateVector,
    commitment_probability,
    make_product_state,
    register_marginal,
    singlet_state,
    x_flip,
)

# Observers inside scenario worlds derive their streams from the world seed
# alone; their own seed parameter is fixed.
_OBS_SEED = 0

_EPR_LAYOUT = RegisterLayout.of(
    ("U", 2, "system"),
    ("V", 2, "system"),
    ("A", 2, "apparatus"),
    ("B", 2, "apparatus"),
    ("O_A", 2, "brain"),
    ("O_B", 2, "brain"),
)
_PAIR_LAYOUT = RegisterLayout.of(
    ("U", 2, "system"),
    ("V", 2, "system"),
    ("A", 2, "apparatus"),
    ("B", 2, "apparatus"),
)
_SHARED_LAYOUT = RegisterLayout.of(
    ("S", 2, "system"),
    ("P_A", 2, "apparatus"),
    ("P_B", 2, "apparatus"),
    ("O_A", 2, "brain"),
    ("O_B", 2, "brain"),
)
_REPEAT_LAYOUT = RegisterLayout.of(
    ("S", 2, "system"),
    ("A", 2, "apparatus"),
)

# Event ids assigned by the world counter in the EPR and shared-electron
# protocols: four premeasurements, then the sampled perceptions.
_EV_ALICE_SEES = 4
_EV_BOB_SEES = 5
_EV_ALICE_ASKS = 6
_EV_BOB_ASKS = 7
# Pair protocol (no brain registers): two premeasurements, two perceptions.
_EV_READ_A = 2
_EV_READ_B = 3

_STATE_CHUNK = 1 << 14


@dataclass(frozen=True)
class TrialRecord:
    """One trial's labeled outcomes plus the stream identifiers that produced it."""

    trial: int
    outcomes: dict[str, int]
    seed_path: tuple[int, int]


@dataclass(frozen=True)
class CorrelationEstimate:
    """Sample mean of sign products with its binomial standard error."""

    value: float
    trials: int
    standard_error: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"correlation {self.value!r} outside [-1, 1]")
        expected = math.sqrt(max(0.0, 1.0 - self.value**2) / self.trials)
        if abs(self.standard_error - expected) > 1e-9:
            raise ValueError("standard_error inconsistent with value and trials")


@dataclass(frozen=True)
class MixtureComparison:
    """Both-plus frequencies for the mixture and for the singlet, same settings."""

    mixture_frequency: float
    singlet_frequency: float
    trials: int


def _observer_uniforms(
    seed: int, observer_id: str, event_id: int, n: int, start: int = 0
) -> np.ndarray:
    base = streams.stream_base(seed, _OBS_SEED, observer_id)
    return streams.uniforms(streams.event_key(base, event_id), n, start)


def _ancillary_uniforms(seed: int, tag: str, n: int, start: int = 0) -> np.ndarray:
    base = streams.stream_base(seed, _OBS_SEED, tag)
    return streams.uniforms(streams.event_key(base, 0), n, start)


def _ancillary_uniform(seed: int, tag: str, trial: int) -> float:
    base = streams.stream_base(seed, _OBS_SEED, tag)
    return streams.uniform_at(streams.event_key(base, 0), trial)


def _draw_binary(p_zero, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF draw over {0, 1}; zero-probability outcomes skipped."""
    return (u >= p_zero).astype(np.int64)


def sign(outcome) -> np.ndarray:
    """Outcome-to-sign mapping: 0 -> +1, 1 -> -1."""
    return 1 - 2 * np.asarray(outcome)


# ---------------------------------------------------------------------------
# single-trial worlds


def _epr_initial_state(preparation: str, prep_pick: int, layout: RegisterLayout) -> StateVector:
    if preparation == "singlet":
        return singlet_state(layout, "U", "V")
    if preparation == "mixture":
        indices = [0] * len(layout.registers)
        indices[0], indices[1] = (0, 1) if prep_pick == 0 else (1, 0)
        return make_product_state(layout, indices)
    raise ValueError(f"unknown preparation {preparation!r}")


def _prep_pick(seed: int, trial: int) -> int:
    return int(_ancillary_uniform(seed, "~prep", trial) >= 0.5)


def build_epr_world(
    axis_a: AxisSpec,
    axis_b: AxisSpec,
    seed: int,
    trial: int = 0,
    preparation: str = "singlet",
) -> World:
    """The EPR trial world after all premeasurements, before any perception."""
    pick = _prep_pick(seed, trial) if preparation == "mixture" else 0
    world = World(_epr_initial_state(preparation, pick, _EPR_LAYOUT), seed=seed, trial=trial)
    world.premeasure_along("U", axis_a, "A")
    world.premeasure_along("V", axis_b, "B")
    world.premeasure_along("A", None, "O_A")
    world.premeasure_along("B", None, "O_B")
    return world


def epr_trial(
    axis_a: AxisSpec,
    axis_b: AxisSpec,
    seed: int,
    trial: int = 0,
    preparation: str = "singlet",
) -> tuple[int, int, int]:
    """One full EPR round.

    Returns (alice_outcome, bob_reported_to_alice, bob_outcome): Alice
    perceives her brain register, Bob his, then Alice asks Bob.  The global
    state is asserted bit-identical across all three perceptions.
    """
    world = build_epr_world(axis_a, axis_b, seed, trial, preparation)
    alice = world.new_observer("alice", _OBS_SEED)
    bob = world.new_observer("bob", _OBS_SEED)
    snapshot = world.state.amps.tobytes()
    alice_outcome = world.perceive(alice, "O_A").outcome
    bob_outcome = world.perceive(bob, "O_B").outcome
    reported = world.ask(alice, "O_B").outcome
    if world.state.amps.tobytes() != snapshot:
        raise AssertionError("global state changed under perception")
    return alice_outcome, reported, bob_outcome


# ---------------------------------------------------------------------------
# ensemble engine


def _epr_template_state(
    axis_a: AxisSpec, axis_b: AxisSpec, preparation: str = "singlet", prep_pick: int = 0
) -> StateVector:
    state = _epr_initial_state(preparation, prep_pick, _EPR_LAYOUT)
    state, _ = premeasure_along(state, "U", axis_a, "A")
    state, _ = premeasure_along(state, "V", axis_b, "B")
    state, _ = premeasure_along(state, "A", None, "O_A")
    state, _ = premeasure_along(state, "B", None, "O_B")
    return state


def _joint_table(state: StateVector, reg_row: str, reg_col: str) -> np.ndarray:
    """2x2 joint Born table over two dim-2 registers of a prepared state."""
    table = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            table[i, j] = commitment_probability(state, {reg_row: i, reg_col: j})
    return table


def _conditional_thresholds(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row P(col=0 | row) and the row marginal P(row=0), normalized as the
    world machinery normalizes them."""
    row_sums = q.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond0 = np.where(row_sums > 0.0, q[..., 0] / row_sums, 1.0)
    p_row0 = row_sums[..., 0] / row_sums.sum(axis=-1)
    return p_row0, cond0


def _frozen_bytes(arr: np.ndarray) -> bytes:
    arr.setflags(write=False)
    return arr.tobytes()


def _sample_epr_rounds(
    q: np.ndarray,
    n: int,
    seed: int,
    want_bob: bool = False,
    want_bob_ask: bool = False,
) -> dict[str, np.ndarray]:
    """Sample the perceive/ask rounds of the EPR protocol from joint tables.

    q is the Born table over (O_A, O_B): either one (2, 2) table shared by
    all trials or a per-trial (n, 2, 2) stack.  Verifies the tables are not
    mutated by sampling (the ensemble image of global-state invariance).
    """
    snapshot = _frozen_bytes(q)
    p_a0, cond_b0_given_a = _conditional_thresholds(q)
    alice = _draw_binary(
        p_a0 if np.ndim(p_a0) else float(p_a0),
        _observer_uniforms(seed, "alice", _EV_ALICE_SEES, n),
    )
    if q.ndim == 2:
        ask_threshold = cond_b0_given_a[alice]
    else:
        ask_threshold = cond_b0_given_a[np.arange(n), alice]
    reported = _draw_binary(
        ask_threshold, _observer_uniforms(seed, "alice", _EV_ALICE_ASKS, n)
    )
    out = {"alice": alice, "reported": reported}
    if want_bob or want_bob_ask:
        qt = np.swapaxes(q, -2, -1)
        p_b0, cond_a0_given_b = _conditional_thresholds(qt)
        bob = _draw_binary(
            p_b0 if np.ndim(p_b0) else float(p_b0),
            _observer_uniforms(seed, "bob", _EV_BOB_SEES, n),
        )
        out["bob"] = bob
        if want_bob_ask:
            if q.ndim == 2:
                bob_ask_threshold = cond_a0_given_b[bob]
            else:
                bob_ask_threshold = cond_a0_given_b[np.arange(n), bob]
            out["bob_heard"] = _draw_binary(
                bob_ask_threshold, _observer_uniforms(seed, "bob", _EV_BOB_ASKS, n)
            )
    if q.tobytes() != snapshot:
        raise AssertionError("branch tables changed under sampling")
    return out


def _epr_bulk(
    axis_a: AxisSpec,
    axis_b: AxisSpec,
    trials: int,
    seed: int,
    preparation: str = "singlet",
    want_bob: bool = False,
) -> dict[str, np.ndarray]:
    """Outcome arrays for `trials` independent EPR worlds at fixed axes."""
    if preparation == "singlet":
        q = _joint_table(_epr_template_state(axis_a, axis_b), "O_A", "O_B")
        return _sample_epr_rounds(q, trials, seed, want_bob=want_bob)
    q0 = _joint_table(_epr_template_state(axis_a, axis_b, "mixture", 0), "O_A", "O_B")
    q1 = _joint_table(_epr_template_state(axis_a, axis_b, "mixture", 1), "O_A", "O_B")
    pick = _draw_binary(0.5, _ancillary_uniforms(seed, "~prep", trials))
    q_stack = np.where(pick[:, None, None] == 0, q0, q1)
    return _sample_epr_rounds(q_stack, trials, seed, want_bob=want_bob)


# ---------------------------------------------------------------------------
# batched premeasurement for per-trial axes


def _axis_matrices(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """(n, 2, 2) stack of eigenbasis rotations, one per trial."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    phase = np.exp(1j * phi)
    mats = np.empty((theta.size, 2, 2), dtype=np.complex128)
    mats[:, 0, 0] = c
    mats[:, 0, 1] = s / phase
    mats[:, 1, 0] = -s * phase
    mats[:, 1, 1] = c
    return mats


def _rotate_batch(states: np.ndarray, reg_axis: int, mats: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(states, reg_axis + 1, -1)
    rotated = np.einsum("tij,t...j->t...i", mats, moved)
    return np.moveaxis(rotated, -1, reg_axis + 1)


def _fanout_batch(states: np.ndarray, sys_axis: int, ptr_axis: int) -> np.ndarray:
    moved = np.moveaxis(states, (sys_axis + 1, ptr_axis + 1), (-2, -1))
    out = moved.copy()
    out[..., 1, :] = np.roll(moved[..., 1, :], 1, axis=-1)
    return np.moveaxis(out, (-2, -1), (sys_axis + 1, ptr_axis + 1))


def _premeasure_batch(
    states: np.ndarray, sys_axis: int, ptr_axis: int, mats: np.ndarray | None
) -> np.ndarray:
    if mats is None:
        return _fanout_batch(states, sys_axis, ptr_axis)
    states = _rotate_batch(states, sys_axis, mats)
    states = _fanout_batch(states, sys_axis, ptr_axis)
    return _rotate_batch(states, sys_axis, np.conj(np.swapaxes(mats, 1, 2)))


def _epr_pointer_joints(
    theta_a: np.ndarray, phi_a: np.ndarray, theta_b: np.ndarray, phi_b: np.ndarray
) -> np.ndarray:
    """Per-trial (n, 2, 2) Born tables over (O_A, O_B) for singlet EPR worlds."""
    n = theta_a.size
    base = singlet_state(_EPR_LAYOUT, "U", "V").tensor()
    out = np.empty((n, 2, 2))
    for lo in range(0, n, _STATE_CHUNK):
        hi = min(lo + _STATE_CHUNK, n)
        states = np.broadcast_to(base, (hi - lo,) + base.shape).copy()
        states = _premeasure_batch(states, 0, 2, _axis_matrices(theta_a[lo:hi], phi_a[lo:hi]))
        states = _premeasure_batch(states, 1, 3, _axis_matrices(theta_b[lo:hi], phi_b[lo:hi]))
        states = _premeasure_batch(states, 2, 4, None)
        states = _premeasure_batch(states, 3, 5, None)
        probs = np.abs(states) ** 2
        out[lo:hi] = probs.sum(axis=(1, 2, 3, 4))
    return out


def _shared_electron_joints(
    chi: np.ndarray, eta: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """Per-trial tables over (O_A, O_B) when both observers measure one electron.

    The electron starts in the superposition cos(chi/2)|0> + e^{i eta} sin(chi/2)|1>
    and is premeasured twice along the same axis, once into each observer's chain.
    """
    n = chi.size
    base = make_product_state(_SHARED_LAYOUT, [0] * 5).tensor()
    out = np.empty((n, 2, 2))
    for lo in range(0, n, _STATE_CHUNK):
        hi = min(lo + _STATE_CHUNK, n)
        states = np.broadcast_to(base, (hi - lo,) + base.shape).copy()
        states = _rotate_batch(states, 0, _axis_matrices(chi[lo:hi], eta[lo:hi]))
        mats = _axis_matrices(theta[lo:hi], phi[lo:hi])
        states = _premeasure_batch(states, 0, 1, mats)
        states = _premeasure_batch(states, 0, 2, mats)
        states = _premeasure_batch(states, 1, 3, None)
        states = _premeasure_batch(states, 2, 4, None)
        probs = np.abs(states) ** 2
        out[lo:hi] = probs.sum(axis=(1, 2, 3))
    return out


# ---------------------------------------------------------------------------
# experiments


def estimate_correlation(
    axis_a: AxisSpec, axis_b: AxisSpec, trials: int, seed: int
) -> CorrelationEstimate:
    """Mean sign product between Alice's outcome and the value she hears from Bob.

    The singlet gives E = -cos(angle between the axes) analytically.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rounds = _epr_bulk(axis_a, axis_b, trials, seed)
    value = float(np.mean(sign(rounds["alice"]) * sign(rounds["reported"])))
    se = math.sqrt(max(0.0, 1.0 - value**2) / trials)
    return CorrelationEstimate(value, trials, se)


_CANONICAL_CHSH = (
    AxisSpec(0.0),
    AxisSpec(math.pi / 2.0),
    AxisSpec(math.pi / 4.0),
    AxisSpec(3.0 * math.pi / 4.0),
)


def chsh_statistic(
    axis_a: AxisSpec,
    axis_a_prime: AxisSpec,
    axis_b: AxisSpec,
    axis_b_prime: AxisSpec,
    trials_per_pair: int,
    seed: int,
) -> float:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b') from four independent runs.

    Local-realist models satisfy |S| <= 2; the quantum maximum is 2*sqrt(2),
    reached at the canonical planar angles (0, pi/2, pi/4, 3pi/4).
    """
    pairs = (
        (axis_a, axis_b, "pair-ab"),
        (axis_a, axis_b_prime, "pair-ab'"),
        (axis_a_prime, axis_b, "pair-a'b"),
        (axis_a_prime, axis_b_prime, "pair-a'b'"),
    )
    e = [
        estimate_correlation(x, y, trials_per_pair, streams.derive_seed(seed, tag)).value
        for x, y, tag in pairs
    ]
    return e[0] - e[1] + e[2] + e[3]


def canonical_chsh_statistic(trials_per_pair: int, seed: int) -> float:
    return chsh_statistic(*_CANONICAL_CHSH, trials_per_pair, seed)


_SATURATING_TABLE = (1, 1, 1, -1)


def classical_chsh_statistic(
    trials_per_pair: int,
    seed: int,
    table: tuple[int, int, int, int] | None = _SATURATING_TABLE,
) -> float:
    """CHSH under a local hidden-sign model, estimated exactly like the quantum run.

    Each trial carries a predetermined sign for every setting (a, a', b, b');
    outcomes are read off the table, so no correlation can exceed the local
    bound |S| <= 2.  A fixed `table` is randomized per trial by a global sign
    flip; `table=None` draws all four signs independently per trial.
    """
    e = []
    for k, (ia, ib) in enumerate(((0, 2), (0, 3), (1, 2), (1, 3))):
        pair_seed = streams.derive_seed(seed, f"classical-pair{k}")
        if table is not None:
            if any(s not in (-1, 1) for s in table):
                raise ValueError("hidden sign table entries must be +1 or -1")
            flips = sign(_draw_binary(0.5, _ancillary_uniforms(pair_seed, "~flip", trials_per_pair)))
            s_a = table[ia] * flips
            s_b = table[ib] * flips
        else:
            s_a = sign(_draw_binary(0.5, _ancillary_uniforms(pair_seed, f"~sign{ia}", trials_per_pair)))
            s_b = sign(_draw_binary(0.5, _ancillary_uniforms(pair_seed, f"~sign{ib}", trials_per_pair)))
        e.append(float(np.mean(s_a * s_b)))
    return e[0] - e[1] + e[2] + e[3]


def mixture_trial(
    axis: AxisSpec, seed: int, trial: int = 0, preparation: str = "mixture"
) -> tuple[int, int]:
    """One experimenter reads both apparatus registers of a prepared pair world."""
    pick = _prep_pick(seed, trial) if preparation == "mixture" else 0
    if preparation == "mixture":
        state = make_product_state(_PAIR_LAYOUT, [0, 1, 0, 0] if pick == 0 else [1, 0, 0, 0])
    else:
        state = singlet_state(_PAIR_LAYOUT, "U", "V")
    world = World(state, seed=seed, trial=trial)
    world.premeasure_along("U", axis, "A")
    world.premeasure_along("V", axis, "B")
    experimenter = world.new_observer("experimenter", _OBS_SEED)
    snapshot = world.state.amps.tobytes()
    a = world.perceive(experimenter, "A").outcome
    b = world.perceive(experimenter, "B").outcome
    if world.state.amps.tobytes() != snapshot:
        raise AssertionError("global state changed under perception")
    return a, b


def _pair_template_state(axis: AxisSpec, preparation: str, prep_pick: int) -> StateVector:
    if preparation == "mixture":
        indices = [0, 1, 0, 0] if prep_pick == 0 else [1, 0, 0, 0]
        state = make_product_state(_PAIR_LAYOUT, indices)
    else:
        state = singlet_state(_PAIR_LAYOUT, "U", "V")
    state, _ = premeasure_along(state, "U", axis, "A")
    state, _ = premeasure_along(state, "V", axis, "B")
    return state


def _both_plus_frequency(axis: AxisSpec, trials: int, seed: int, preparation: str) -> float:
    if preparation == "mixture":
        q0 = _joint_table(_pair_template_state(axis, "mixture", 0), "A", "B")
        q1 = _joint_table(_pair_template_state(axis, "mixture", 1), "A", "B")
        pick = _draw_binary(0.5, _ancillary_uniforms(seed, "~prep", trials))
        q = np.where(pick[:, None, None] == 0, q0, q1)
    else:
        q = _joint_table(_pair_template_state(axis, "singlet", 0), "A", "B")
    snapshot = _frozen_bytes(q)
    p_a0, cond_b0_given_a = _conditional_thresholds(q)
    a = _draw_binary(
        p_a0 if np.ndim(p_a0) else float(p_a0),
        _observer_uniforms(seed, "experimenter", _EV_READ_A, trials),
    )
    threshold = cond_b0_given_a[a] if q.ndim == 2 else cond_b0_given_a[np.arange(trials), a]
    b = _draw_binary(threshold, _observer_uniforms(seed, "experimenter", _EV_READ_B, trials))
    if q.tobytes() != snapshot:
        raise AssertionError("branch tables changed under sampling")
    return float(np.mean((a == 0) & (b == 0)))


def mixture_same_spin_probability(
    trials: int, seed: int, axis: AxisSpec = AXIS_X
) -> MixtureComparison:
    """Frequency of both spins reading "+" along `axis` (x by default).

    Each mixture trial prepares |+->_z or |-+>_z with probability one half;
    the singlet is run under identical settings.  The mixture converges to
    1/4 along x while the singlet gives exactly 0 -- the ensembles are
    empirically distinguishable even though both have uniform marginals.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return MixtureComparison(
        mixture_frequency=_both_plus_frequency(
            axis, trials, streams.derive_seed(seed, "mixture"), "mixture"
        ),
        singlet_frequency=_both_plus_frequency(
            axis, trials, streams.derive_seed(seed, "singlet"), "singlet"
        ),
        trials=trials,
    )


def no_signaling_deviation(
    axis_a: AxisSpec, axis_a_prime: AxisSpec, axis_b: AxisSpec
) -> float:
    """How much Bob's exact pointer marginal reacts to Alice's choices: it doesn't.

    Compares three worlds (Alice premeasured along a, along a', not at all)
    and additionally re-reads the marginal after Alice perceives her pointer.
    The returned maximum absolute difference is analytically zero; anything
    above 1e-12 would signal a broken mechanism.
    """
    singlet = singlet_state(_PAIR_LAYOUT, "U", "V")

    def bob_marginal(alice_axis: AxisSpec | None) -> tuple[np.ndarray, World]:
        world = World(singlet, seed=0, trial=0)
        if alice_axis is not None:
            world.premeasure_along("U", alice_axis, "A")
        world.premeasure_along("V", axis_b, "B")
        return register_marginal(world.state, "B"), world

    m_a, world_a = bob_marginal(axis_a)
    m_a_prime, _ = bob_marginal(axis_a_prime)
    m_none, _ = bob_marginal(None)
    alice = world_a.new_observer("alice", _OBS_SEED)
    world_a.perceive(alice, "A")
    m_a_after = register_marginal(world_a.state, "B")
    deviation = 0.0
    for x, y in ((m_a, m_a_prime), (m_a, m_none), (m_a_prime, m_none), (m_a, m_a_after)):
        deviation = max(deviation, float(np.max(np.abs(x - y))))
    return deviation


# ---------------------------------------------------------------------------
# conviviality


def _conviviality_axes(seed: int, trials: int) -> dict[str, np.ndarray]:
    u = {
        tag: _ancillary_uniforms(seed, f"~{tag}", trials)
        for tag in ("protocol", "theta_a", "phi_a", "theta_b", "phi_b", "chi", "eta")
    }
    draws = {
        "protocol": u["protocol"],
        "theta_a": np.arccos(1.0 - 2.0 * u["theta_a"]),
        "phi_a": 2.0 * math.pi * u["phi_a"],
        "theta_b": np.arccos(1.0 - 2.0 * u["theta_b"]),
        "phi_b": 2.0 * math.pi * u["phi_b"],
        "chi": np.arccos(1.0 - 2.0 * u["chi"]),
        "eta": 2.0 * math.pi * u["eta"],
    }
    same_axis = (draws["protocol"] >= 1.0 / 3.0) & (draws["protocol"] < 2.0 / 3.0)
    draws["theta_b"] = np.where(same_axis, draws["theta_a"], draws["theta_b"])
    draws["phi_b"] = np.where(same_axis, draws["phi_a"], draws["phi_b"])
    return draws


def conviviality_trial(
    seed: int, trial: int, preparation: str = "singlet"
) -> tuple[str, dict[str, int]]:
    """One randomized communication round on a standalone World.

    Returns the protocol name and the four outcomes: what each observer saw
    and what each heard when asking the other.
    """
    sel = _ancillary_uniform(seed, "~protocol", trial)
    axis_a = AxisSpec(
        float(np.arccos(1.0 - 2.0 * _ancillary_uniform(seed, "~theta_a", trial))),
        2.0 * math.pi * _ancillary_uniform(seed, "~phi_a", trial),
    )
    axis_b = AxisSpec(
        float(np.arccos(1.0 - 2.0 * _ancillary_uniform(seed, "~theta_b", trial))),
        2.0 * math.pi * _ancillary_uniform(seed, "~phi_b", trial),
    )
    if sel < 1.0 / 3.0:
        protocol = "shared-electron"
        chi = float(np.arccos(1.0 - 2.0 * _ancillary_uniform(seed, "~chi", trial)))
        eta = 2.0 * math.pi * _ancillary_uniform(seed, "~eta", trial)
        amps = np.zeros(_SHARED_LAYOUT.dim, dtype=np.complex128)
        amps[0] = math.cos(chi / 2.0)
        amps[1 << 4] = math.sin(chi / 2.0) * complex(math.cos(eta), math.sin(eta))
        world = World(StateVector(_SHARED_LAYOUT, amps), seed=seed, trial=trial)
        world.premeasure_along("S", axis_a, "P_A")
        world.premeasure_along("S", axis_a, "P_B")
        world.premeasure_along("P_A", None, "O_A")
        world.premeasure_along("P_B", None, "O_B")
    else:
        protocol = "same-axis" if sel < 2.0 / 3.0 else "free-axes"
        if protocol == "same-axis":
            axis_b = axis_a
        world = build_epr_world(axis_a, axis_b, seed, trial, preparation)
    alice = world.new_observer("alice", _OBS_SEED)
    bob = world.new_observer("bob", _OBS_SEED)
    snapshot = world.state.amps.tobytes()
    outcomes = {
        "alice": world.perceive(alice, "O_A").outcome,
        "bob": world.perceive(bob, "O_B").outcome,
    }
    outcomes["alice_heard"] = world.ask(alice, "O_B").outcome
    outcomes["bob_heard"] = world.ask(bob, "O_A").outcome
    if world.state.amps.tobytes() != snapshot:
        raise AssertionError("global state changed under perception")
    return protocol, outcomes


def conviviality_violations(trials: int, seed: int, preparation: str = "singlet") -> int:
    """Count communication rounds whose answer contradicts the asker's branch.

    Per trial, a protocol is drawn: both observers measure one shared
    electron along a random axis, or an EPR pair along equal or independent
    random axes.  Both observers perceive and then each asks the other.  A
    violation is an answer of conditional probability zero given the asker's
    commitments; for the sharp cases the stronger identity is demanded
    (shared electron: the answer equals the asker's own value; same-axis
    singlet: it is opposite).  The count is analytically zero.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    draws = _conviviality_axes(seed, trials)
    shared = draws["protocol"] < 1.0 / 3.0
    same_axis = (draws["protocol"] >= 1.0 / 3.0) & (draws["protocol"] < 2.0 / 3.0)
    q = np.empty((trials, 2, 2))
    epr_mask = ~shared
    if preparation == "singlet":
        if np.any(epr_mask):
            q[epr_mask] = _epr_pointer_joints(
                draws["theta_a"][epr_mask],
                draws["phi_a"][epr_mask],
                draws["theta_b"][epr_mask],
                draws["phi_b"][epr_mask],
            )
    elif preparation == "mixture":
        pick = _draw_binary(0.5, _ancillary_uniforms(seed, "~prep", trials))
        for pick_value in (0, 1):
            mask = epr_mask & (pick == pick_value)
            if not np.any(mask):
                continue
            q[mask] = _mixture_pointer_joints(
                draws["theta_a"][mask],
                draws["phi_a"][mask],
                draws["theta_b"][mask],
                draws["phi_b"][mask],
                pick_value,
            )
    else:
        raise ValueError(f"unknown preparation {preparation!r}")
    if np.any(shared):
        q[shared] = _shared_electron_joints(
            draws["chi"][shared],
            draws["eta"][shared],
            draws["theta_a"][shared],
            draws["phi_a"][shared],
        )
    rounds = _sample_epr_rounds(q, trials, seed, want_bob=True, want_bob_ask=True)
    alice, bob = rounds["alice"], rounds["bob"]
    alice_heard, bob_heard = rounds["reported"], rounds["bob_heard"]
    idx = np.arange(trials)
    violations = 0
    # an answer sampled from a zero-probability branch contradicts the asker
    violations += int(np.sum(q[idx, alice, alice_heard] <= 0.0))
    violations += int(np.sum(q[idx, bob_heard, bob] <= 0.0))
    if preparation == "singlet":
        violations += int(np.sum(same_axis & (alice_heard != 1 - alice)))
        violations += int(np.sum(same_axis & (bob_heard != 1 - bob)))
    violations += int(np.sum(shared & (alice_heard != alice)))
    violations += int(np.sum(shared & (bob_heard != bob)))
    return violations


def _mixture_pointer_joints(
    theta_a: np.ndarray,
    phi_a: np.ndarray,
    theta_b: np.ndarray,
    phi_b: np.ndarray,
    prep_pick: int,
) -> np.ndarray:
    n = theta_a.size
    indices = [0, 1, 0, 0, 0, 0] if prep_pick == 0 else [1, 0, 0, 0, 0, 0]
    base = make_product_state(_EPR_LAYOUT, indices).tensor()
    out = np.empty((n, 2, 2))
    for lo in range(0, n, _STATE_CHUNK):
        hi = min(lo + _STATE_CHUNK, n)
        states = np.broadcast_to(base, (hi - lo,) + base.shape).copy()
        states = _premeasure_batch(states, 0, 2, _axis_matrices(theta_a[lo:hi], phi_a[lo:hi]))
        states = _premeasure_batch(states, 1, 3, _axis_matrices(theta_b[lo:hi], phi_b[lo:hi]))
        states = _premeasure_batch(states, 2, 4, None)
        states = _premeasure_batch(states, 3, 5, None)
        probs = np.abs(states) ** 2
        out[lo:hi] = probs.sum(axis=(1, 2, 3, 4))
    return out


# ---------------------------------------------------------------------------
# repeatability


_X_FLIP_S = x_flip("S")


def _premeasured_qubit_state(theta: float, phi: float) -> StateVector:
    """|0> premeasured along (theta, phi) into its pointer, in closed form.

    Equals premeasure_along(|00>, "S", axis, "A") exactly (pinned by a test);
    built directly because repeatability burns through many small worlds.
    """
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    phase = complex(math.cos(phi), math.sin(phi))
    amps = np.array([c * c, s * s, phase * s * c, -phase * s * c])
    return StateVector(_REPEAT_LAYOUT, amps)


def repeatability_trial(
    seed: int, trial: int, theta: float | None = None, phi: float | None = None
) -> int:
    """One standalone re-perception round; returns its mismatch count.

    A system premeasured along a random axis is perceived by two observers
    (they may well hang on to different branches), every fourth trial kicks
    the still uncommitted system register with a unitary, and every
    commitment is re-perceived once.  Re-perception consumes no randomness,
    which is asserted via the event counter.
    """
    if theta is None:
        theta = float(np.arccos(1.0 - 2.0 * _ancillary_uniform(seed, "~theta", trial)))
    if phi is None:
        phi = 2.0 * math.pi * _ancillary_uniform(seed, "~phi", trial)
    world = World(_premeasured_qubit_state(theta, phi), seed=seed, trial=trial)
    alice = world.new_observer("alice", _OBS_SEED)
    bob = world.new_observer("bob", _OBS_SEED)
    snapshot = world.state.amps.tobytes()
    first = {
        ("alice", "A"): world.perceive(alice, "A").outcome,
        ("bob", "A"): world.perceive(bob, "A").outcome,
    }
    if world.state.amps.tobytes() != snapshot:
        raise AssertionError("global state changed under perception")
    if trial % 4 == 0:
        world.apply_unitary(_X_FLIP_S)
    snapshot = world.state.amps.tobytes()
    counter_before = world.event_counter
    mismatches = 0
    for (who, register), outcome in first.items():
        if world.perceive(who, register).outcome != outcome:
            mismatches += 1
    if world.event_counter != counter_before:
        raise AssertionError("re-perception consumed randomness")
    if world.state.amps.tobytes() != snapshot:
        raise AssertionError("global state changed under re-perception")
    return mismatches


def repeatability_violations(trials: int, seed: int) -> int:
    """Total re-perception mismatches over independent trials; analytically zero."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    thetas = np.arccos(1.0 - 2.0 * _ancillary_uniforms(seed, "~theta", trials))
    phis = 2.0 * math.pi * _ancillary_uniforms(seed, "~phi", trials)
    return sum(
        repeatability_trial(seed, t, float(thetas[t]), float(phis[t]))
        for t in range(trials)
    )
