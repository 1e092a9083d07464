"""Dense state vectors over named multi-register Hilbert spaces.

Registers are indexed row-major in declaration order, first register most
significant.  All values are immutable after construction; every operation
returns a new value.  The state is only ever rewritten by unitaries --
nothing in this package projects it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NORM_TOL = 1e-10        # Euclidean norm of a state on construction
UNITARY_TOL = 1e-10     # max entrywise deviation of U†U from I
PROB_FLOOR = 1e-12      # probabilities at or below this count as zero

REGISTER_KINDS = ("system", "apparatus", "brain")
DEFAULT_DIM_CAP = 1 << 20

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

_SQRT_HALF = 1.0 / math.sqrt(2.0)


class BranchStructureError(RuntimeError):
    """Dynamics tried to rewrite a register some observer is committed to."""


@dataclass(frozen=True)
class Register:
    name: str
    dim: int
    kind: str = "system"

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise ValueError(f"invalid register name {self.name!r}")
        if self.dim < 2:
            raise ValueError(f"register '{self.name}' needs dim >= 2, got {self.dim}")
        if self.kind not in REGISTER_KINDS:
            raise ValueError(f"register '{self.name}' has unknown kind {self.kind!r}")


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; total dimension is the product of their dims."""

    registers: tuple[Register, ...]
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self) -> None:
        names = [r.name for r in self.registers]
        if not names:
            raise ValueError("layout needs at least one register")
        if len(set(names)) != len(names):
            raise ValueError("register names must be unique")
        dim = 1
        for r in self.registers:
            dim *= r.dim
        if dim > self.dim_cap:
            raise ValueError(f"total dimension {dim} exceeds cap {self.dim_cap}")
        object.__setattr__(self, "_axis", {r.name: i for i, r in enumerate(self.registers)})
        object.__setattr__(self, "_dim", dim)

    @classmethod
    def of(cls, *specs: tuple, dim_cap: int = DEFAULT_DIM_CAP) -> "RegisterLayout":
        """Build a layout from (name, dim) or (name, dim, kind) tuples."""
        return cls(tuple(Register(*spec) for spec in specs), dim_cap=dim_cap)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def axis(self, name: str) -> int:
        try:
            return self._axis[name]
        except KeyError:
            raise ValueError(f"unknown register {name!r}") from None

    def register(self, name: str) -> Register:
        return self.registers[self.axis(name)]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized complex amplitudes over a layout's full product space."""

    layout: RegisterLayout
    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.layout.dim,):
            raise ValueError(f"expected {self.layout.dim} amplitudes, got {amps.shape}")
        norm = math.sqrt(float(np.vdot(amps, amps).real))
        # written so that a NaN or infinite amplitude also fails the check
        if not abs(norm - 1.0) <= NORM_TOL:
            raise ValueError(f"state norm {norm!r} is not 1 within {NORM_TOL}")
        object.__setattr__(self, "amps", _readonly(amps))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per register (read-only view)."""
        return self.amps.reshape(self.layout.shape)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """A unitary matrix acting on an ordered subset of registers."""

    targets: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("unitary needs at least one target register")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("unitary targets must be distinct")
        m = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"unitary matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m.view(np.float64))):
            raise ValueError("unitary matrix must be finite")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if dev > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max |U†U - I| = {dev:.3e})")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class AxisSpec:
    """A spin measurement direction: polar angle theta, azimuth phi (radians)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


AXIS_Z = AxisSpec(0.0)
AXIS_X = AxisSpec(math.pi / 2.0)


@dataclass(frozen=True)
class Commitment:
    """An observer's recorded (register, outcome) pair."""

    register: str
    outcome: int
    event_id: int


def make_product_state(layout: RegisterLayout, indices: Sequence[int]) -> StateVector:
    """Computational basis state |i1>|i2>...|ik> in register order."""
    if len(indices) != len(layout.registers):
        raise ValueError(
            f"expected {len(layout.registers)} indices, got {len(indices)}"
        )
    flat = 0
    for reg, idx in zip(layout.registers, indices):
        if not 0 <= idx < reg.dim:
            raise ValueError(
                f"index {idx} out of range for register '{reg.name}' (dim {reg.dim})"
            )
        flat = flat * reg.dim + idx
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[flat] = 1.0
    return StateVector(layout, amps)


def singlet_state(layout: RegisterLayout, reg_u: str, reg_v: str) -> StateVector:
    """Two-qubit singlet (|01> - |10>)/sqrt(2) on (reg_u, reg_v), rest at |0>.

    The resulting state is invariant, up to global phase, under the same
    single-qubit rotation applied to both registers.
    """
    if reg_u == reg_v:
        raise ValueError("singlet needs two distinct registers")
    for name in (reg_u, reg_v):
        if layout.register(name).dim != 2:
            raise ValueError(f"singlet register '{name}' must have dim 2")
    tensor = np.zeros(layout.shape, dtype=np.complex128)
    base = [0] * len(layout.registers)
    au, av = layout.axis(reg_u), layout.axis(reg_v)
    up_down = list(base)
    up_down[au], up_down[av] = 0, 1
    down_up = list(base)
    down_up[au], down_up[av] = 1, 0
    tensor[tuple(up_down)] = _SQRT_HALF
    tensor[tuple(down_up)] = -_SQRT_HALF
    return StateVector(layout, tensor.reshape(-1))


def apply_unitary(state: StateVector, op: UnitaryOp) -> StateVector:
    """Apply op to its target registers; all other index groups are untouched."""
    layout = state.layout
    axes = [layout.axis(name) for name in op.targets]
    block = 1
    for a in axes:
        block *= layout.registers[a].dim
    if block != op.dim:
        raise ValueError(
            f"unitary of dim {op.dim} does not match target dims (product {block})"
        )
    if axes == list(range(len(axes))):
        # targets already lead the index in order; no axis shuffling needed
        t = op.matrix @ state.amps.reshape(block, -1)
        return StateVector(layout, t.reshape(-1))
    t = np.moveaxis(state.amps.reshape(layout.shape), axes, range(len(axes)))
    moved_shape = t.shape
    t = op.matrix @ t.reshape(block, -1)
    t = np.moveaxis(t.reshape(moved_shape), range(len(axes)), axes)
    return StateVector(layout, t.reshape(-1))


def _unchecked_unitary(targets: tuple[str, ...], matrix: np.ndarray) -> UnitaryOp:
    """Wrap a matrix that is unitary by construction, skipping revalidation."""
    op = object.__new__(UnitaryOp)
    object.__setattr__(op, "targets", targets)
    object.__setattr__(
        op, "matrix", _readonly(np.ascontiguousarray(matrix, dtype=np.complex128))
    )
    return op


def axis_basis_matrix(axis: AxisSpec) -> np.ndarray:
    """2x2 rotation R with R|axis,+> = |0> and R|axis,-> = |1>.

    Convention: |axis,+> = (cos(theta/2), e^{i phi} sin(theta/2)), the +1
    eigenvector of n.sigma.  R is the identity for the z axis.
    """
    c = math.cos(axis.theta / 2.0)
    s = math.sin(axis.theta / 2.0)
    phase = complex(math.cos(axis.phi), math.sin(axis.phi))
    return np.array([[c, s / phase], [-s * phase, c]], dtype=np.complex128)


def axis_basis_unitary(axis: AxisSpec, target: str) -> UnitaryOp:
    """Rotation into the eigenbasis of spin along `axis`, acting on `target`."""
    return UnitaryOp((target,), axis_basis_matrix(axis))


def x_flip(target: str) -> UnitaryOp:
    """Basis exchange |0> <-> |1|."""
    return UnitaryOp((target,), np.array([[0, 1], [1, 0]], dtype=np.complex128))


def z_phase(target: str) -> UnitaryOp:
    """Phase flip diag(1, -1)."""
    return UnitaryOp((target,), np.array([[1, 0], [0, -1]], dtype=np.complex128))


def axis_rotation(target: str, axis: AxisSpec, angle: float) -> UnitaryOp:
    """exp(-i angle/2 n.sigma) for the unit vector n of `axis`."""
    nx, ny, nz = axis.unit_vector()
    n_sigma = np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]], dtype=np.complex128)
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return UnitaryOp((target,), c * np.eye(2) - 1j * s * n_sigma)


def _as_outcome_map(
    layout: RegisterLayout, commitments: Mapping[str, int] | Iterable[Commitment]
) -> dict[str, int]:
    if isinstance(commitments, Mapping):
        items = list(commitments.items())
    else:
        items = [(c.register, c.outcome) for c in commitments]
    out: dict[str, int] = {}
    for name, outcome in items:
        reg = layout.register(name)
        if not 0 <= outcome < reg.dim:
            raise ValueError(
                f"outcome {outcome} out of range for register '{name}' (dim {reg.dim})"
            )
        if name in out:
            raise ValueError(f"multiple commitments on register '{name}'")
        out[name] = outcome
    return out


def commitment_probability(
    state: StateVector, commitments: Mapping[str, int] | Iterable[Commitment]
) -> float:
    """Squared norm of the state restricted to the committed outcomes.

    Equivalently the Born probability of the joint outcome: projectors on
    distinct registers commute, so the order of commitments is irrelevant.
    The empty set gives 1.0 on any normalized state.
    """
    outcome_map = _as_outcome_map(state.layout, commitments)
    indexer: list = [slice(None)] * len(state.layout.registers)
    for name, outcome in sorted(outcome_map.items(), key=lambda kv: state.layout.axis(kv[0])):
        indexer[state.layout.axis(name)] = outcome
    sub = state.tensor()[tuple(indexer)]
    return float(np.sum(np.abs(sub) ** 2))


def register_marginal(state: StateVector, register: str) -> np.ndarray:
    """Born probabilities of each outcome of one register, other registers summed out."""
    axis = state.layout.axis(register)
    probs = np.abs(state.tensor()) ** 2
    other = tuple(i for i in range(len(state.layout.registers)) if i != axis)
    return probs.sum(axis=other)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2; insensitive to global phase."""
    return float(np.abs(np.vdot(a.amps, b.amps)) ** 2)
