"""Entangling pointer interactions: copy a register's basis value into a pointer.

A premeasurement is purely unitary.  It correlates an apparatus or brain
register with a system's measurement eigenbasis and leaves the global state
in a superposition of record branches; nothing is projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import (
    AxisSpec,
    RegisterLayout,
    StateVector,
    UnitaryOp,
    _unchecked_unitary,
    apply_unitary,
    axis_basis_matrix,
)


@dataclass(frozen=True)
class PremeasureRecord:
    """One logged pointer correlation; axis is None for a computational-basis copy."""

    system: str
    pointer: str
    axis: AxisSpec | None
    event_id: int


def fanout_matrix(sys_dim: int, pointer_dim: int) -> np.ndarray:
    """Permutation |i>|j> -> |i>|(j+i) mod pointer_dim| on the (system, pointer) pair.

    With the pointer at |0> this is the copy map |i>|0> -> |i>|i>.  Requires
    pointer_dim >= sys_dim so distinct system values stay distinguishable.
    """
    if sys_dim < 2 or pointer_dim < sys_dim:
        raise ValueError(
            f"fan-out needs pointer dim >= system dim >= 2, got {sys_dim}, {pointer_dim}"
        )
    size = sys_dim * pointer_dim
    m = np.zeros((size, size), dtype=np.complex128)
    for i in range(sys_dim):
        for j in range(pointer_dim):
            m[i * pointer_dim + (j + i) % pointer_dim, i * pointer_dim + j] = 1.0
    return m


def fanout_unitary(d: int, system: str, pointer: str) -> UnitaryOp:
    """Equal-dim fan-out as a UnitaryOp on (system, pointer)."""
    return UnitaryOp((system, pointer), fanout_matrix(d, d))


def premeasure_composite(
    layout: RegisterLayout, system: str, axis: AxisSpec | None, pointer: str
) -> UnitaryOp:
    """The full premeasurement unitary (R† x I) . fanout . (R x I) on (system, pointer)."""
    sys_reg = layout.register(system)
    ptr_reg = layout.register(pointer)
    if system == pointer:
        raise ValueError("premeasurement needs distinct system and pointer registers")
    if ptr_reg.dim < sys_reg.dim:
        raise ValueError(
            f"pointer '{pointer}' (dim {ptr_reg.dim}) cannot record "
            f"register '{system}' (dim {sys_reg.dim})"
        )
    if axis is None:
        composite = fanout_matrix(sys_reg.dim, ptr_reg.dim)
    else:
        if sys_reg.dim != 2:
            raise ValueError(
                f"axis-parameterized premeasurement needs a dim-2 system, "
                f"got '{system}' with dim {sys_reg.dim}"
            )
        # (R† x I) . fanout . (R x I) assembled directly as
        # sum_m (axis-branch-m projector) x (pointer shift by m)
        r = axis_basis_matrix(axis)
        d_p = ptr_reg.dim
        if d_p == 2:
            p = (r[0].conj()[:, None] * r[0]).ravel()  # keep-pointer branch projector
            q = (r[1].conj()[:, None] * r[1]).ravel()  # flip-pointer branch projector
            composite = np.array(
                [
                    [p[0], q[0], p[1], q[1]],
                    [q[0], p[0], q[1], p[1]],
                    [p[2], q[2], p[3], q[3]],
                    [q[2], p[2], q[3], p[3]],
                ]
            )
        else:
            eye = np.eye(d_p)
            blocks = np.zeros((2, d_p, 2, d_p), dtype=np.complex128)
            for m in range(2):
                projector = np.outer(np.conj(r[m]), r[m])
                shift = np.roll(eye, m, axis=0)
                blocks += projector[:, None, :, None] * shift[None, :, None, :]
            composite = blocks.reshape(2 * d_p, 2 * d_p)
    # a product/sum of unitaries and permutations; unitary by construction
    return _unchecked_unitary((system, pointer), composite)


def premeasure_along(
    state: StateVector,
    system: str,
    axis: AxisSpec | None,
    pointer: str,
    event_id: int = 0,
) -> tuple[StateVector, PremeasureRecord]:
    """Correlate `pointer` with the axis eigenbasis of `system`, unitarily.

    After the interaction the pointer's computational index records the
    axis-eigenvalue branch while the system is left in the matching axis
    eigenstate within each branch.  Norm is preserved; no branch is selected.
    Pass axis=None to copy in the computational basis (used to chain an
    apparatus record into a brain register).
    """
    op = premeasure_composite(state.layout, system, axis, pointer)
    return apply_unitary(state, op), PremeasureRecord(system, pointer, axis, event_id)
