"""Shared helpers for building randomized worlds and exact chain probabilities."""

import numpy as np

from nocollapse.observer import World
from nocollapse.qstate import RegisterLayout, StateVector


def random_layout(rng, max_registers=6):
    k = int(rng.integers(2, max_registers + 1))
    dims = [int(rng.integers(2, 4)) for _ in range(k)]
    return RegisterLayout.of(*[(f"r{i}", d, "system") for i, d in enumerate(dims)])


def random_state(rng, layout):
    amps = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return StateVector(layout, amps / np.linalg.norm(amps))


def hanging_on_chain_probability(state, registers, outcomes, world_seed=0):
    """Exact probability of an observer committing to `outcomes` register by
    register, as the product of its conditional distributions."""
    world = World(state, seed=world_seed)
    observer = world.new_observer("prober", 0)
    prob = 1.0
    for register, outcome in zip(registers, outcomes):
        dist = world.conditional_distribution(observer, register)
        prob *= float(dist[outcome])
        if prob == 0.0:
            return 0.0
        world._commit(observer, register, outcome)
    return prob
