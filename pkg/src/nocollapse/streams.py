"""Counter-based random streams and the shared inverse-CDF sampling rule.

Every sampled event in a world draws exactly one uniform from a Philox
stream keyed by (world seed, observer seed, observer id, event id), indexed
by the world's trial number.  Batch estimators read the same streams with
vectorized draws, so trial t of a bulk run reproduces a standalone world
run bit for bit.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np
from numpy.random import Generator, Philox

# One Philox counter block yields four doubles; a trial consumes the first
# double of its own block so trial indices map to counter positions.
_BLOCK = 4


class _PhiloxPool(threading.local):
    """Reusable bit generator; fresh Philox construction is ~7x slower than
    assigning the state of a cached one."""

    def __init__(self) -> None:
        self.bit_generator = Philox(key=np.zeros(2, dtype=np.uint64))
        self.generator = Generator(self.bit_generator)
        self.template = self.bit_generator.state


_pool = _PhiloxPool()


def stream_base(world_seed: int, observer_seed: int, observer_id: str) -> bytes:
    return hashlib.sha256(
        f"{world_seed}|{observer_seed}|{observer_id}".encode()
    ).digest()


def event_key(base: bytes, event_id: int) -> np.ndarray:
    digest = hashlib.sha256(base + event_id.to_bytes(8, "little", signed=False)).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def uniform_at(key: np.ndarray, trial: int) -> float:
    """The single uniform for one (stream, trial) cell."""
    state = dict(_pool.template)
    state["state"] = {
        "counter": np.array([trial, 0, 0, 0], dtype=np.uint64),
        "key": key,
    }
    state["buffer_pos"] = 4
    state["has_uint32"] = 0
    state["uinteger"] = 0
    _pool.bit_generator.state = state
    return float(_pool.generator.random())


def uniforms(key: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    """Uniforms for trials start..start+n-1 of one stream, matching uniform_at."""
    bg = Philox(key=key)
    if start:
        bg.advance(start)
    return Generator(bg).random(n * _BLOCK)[::_BLOCK]


def derive_seed(seed: int, tag: str) -> int:
    """A stable 63-bit sub-seed for an independently named stream family."""
    digest = hashlib.sha256(f"{seed}|{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over outcome indices in ascending order.

    Zero-probability entries are never selected; if floating-point shortfall
    pushes u past the accumulated total, the last positive outcome wins.
    """
    if probs.shape[0] == 2:
        p0 = float(probs[0])
        if u < p0:
            return 0
        if u < p0 + float(probs[1]):
            return 1
        return 1 if probs[1] > 0.0 else 0
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u, side="right"))
    if i >= probs.size:
        i = int(np.flatnonzero(probs > 0.0)[-1])
    return i


def sample_indices(prob_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized sample_index: one draw per row of prob_rows."""
    cdf = np.cumsum(prob_rows, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    overflow = idx >= prob_rows.shape[1]
    if np.any(overflow):
        last_positive = (prob_rows.shape[1] - 1) - np.argmax(
            prob_rows[overflow, ::-1] > 0.0, axis=1
        )
        idx[overflow] = last_positive
    return idx
