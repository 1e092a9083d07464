import math

import numpy as np
import pytest

from nocollapse.premeasure import (
    PremeasureRecord,
    fanout_matrix,
    fanout_unitary,
    premeasure_along,
    premeasure_composite,
)
from nocollapse.qstate import (
    AXIS_X,
    AXIS_Z,
    AxisSpec,
    RegisterLayout,
    StateVector,
    apply_unitary,
    axis_basis_matrix,
    commitment_probability,
    make_product_state,
    singlet_state,
)

SQ2 = 1.0 / math.sqrt(2.0)


def qubits(*names):
    return RegisterLayout.of(*[(n, 2, "system") for n in names])


class TestFanout:
    def test_d2_permutation(self):
        m = fanout_matrix(2, 2)
        # |1,0> -> |1,1> and |0,0> -> |0,0>
        one_zero = np.zeros(4)
        one_zero[2] = 1.0
        np.testing.assert_array_equal(m @ one_zero, [0, 0, 0, 1])
        zero_zero = np.zeros(4)
        zero_zero[0] = 1.0
        np.testing.assert_array_equal(m @ zero_zero, [1, 0, 0, 0])

    def test_copies_superposition(self):
        layout = qubits("s", "p")
        alpha, beta = 0.6, 0.8
        state = StateVector(layout, np.array([alpha, 0, beta, 0]))
        out = apply_unitary(state, fanout_unitary(2, "s", "p"))
        np.testing.assert_allclose(out.amps, [alpha, 0, 0, beta], atol=1e-15)

    def test_involution_for_d2(self):
        # composing the d=2 fan-out with itself gives the identity by hand:
        # (j+1)+1 = j mod 2
        m = fanout_matrix(2, 2)
        np.testing.assert_array_equal(m @ m, np.eye(4))

    def test_d3_cyclic(self):
        m = fanout_matrix(3, 3)
        assert np.max(np.abs(m.conj().T @ m - np.eye(9))) < 1e-15
        # |2,2> -> |2,(2+2)%3> = |2,1>
        vec = np.zeros(9)
        vec[8] = 1.0
        out = m @ vec
        assert out[2 * 3 + 1] == 1.0

    def test_rejects_small_pointer(self):
        with pytest.raises(ValueError, match="pointer dim"):
            fanout_matrix(3, 2)


class TestPremeasureComposite:
    def test_matches_kron_reference(self):
        layout = RegisterLayout.of(("s", 2, "system"), ("p", 3, "apparatus"))
        for theta, phi in [(0.0, 0.0), (0.7, 1.1), (math.pi / 2, 0.0), (2.9, 5.3)]:
            axis = AxisSpec(theta, phi)
            got = premeasure_composite(layout, "s", axis, "p").matrix
            r = axis_basis_matrix(axis)
            rot = np.kron(r, np.eye(3))
            ref = rot.conj().T @ fanout_matrix(2, 3) @ rot
            np.testing.assert_allclose(got, ref, atol=1e-14)

    def test_dim2_pointer_matches_kron_reference(self):
        layout = qubits("s", "p")
        rng = np.random.default_rng(3)
        for _ in range(25):
            axis = AxisSpec(math.acos(1 - 2 * rng.random()), 2 * math.pi * rng.random())
            got = premeasure_composite(layout, "s", axis, "p").matrix
            r = axis_basis_matrix(axis)
            rot = np.kron(r, np.eye(2))
            ref = rot.conj().T @ fanout_matrix(2, 2) @ rot
            np.testing.assert_allclose(got, ref, atol=1e-14)
            assert np.max(np.abs(got.conj().T @ got - np.eye(4))) < 1e-12

    def test_same_register_rejected(self):
        layout = qubits("s", "p")
        with pytest.raises(ValueError, match="distinct"):
            premeasure_composite(layout, "s", AXIS_Z, "s")


class TestPremeasureAlong:
    def test_z_axis_reproduces_fanout(self):
        layout = qubits("s", "A")
        alpha, beta = 0.6, 0.8
        state = StateVector(layout, np.array([alpha, 0, beta, 0]))
        out, record = premeasure_along(state, "s", AXIS_Z, "A", event_id=4)
        np.testing.assert_allclose(out.amps, [alpha, 0, 0, beta], atol=1e-15)
        assert record == PremeasureRecord(system="s", pointer="A", axis=AXIS_Z, event_id=4)

    def test_singlet_double_premeasure_support(self):
        # two hand applications of the fan-out to the singlet leave weight
        # only on (U,V,A,B) in {(0,1,0,1), (1,0,1,0)}
        layout = qubits("U", "V", "A", "B")
        state = singlet_state(layout, "U", "V")
        state, _ = premeasure_along(state, "U", AXIS_Z, "A")
        state, _ = premeasure_along(state, "V", AXIS_Z, "B")
        tensor = state.tensor()
        expected = np.zeros((2, 2, 2, 2), dtype=complex)
        expected[0, 1, 0, 1] = SQ2
        expected[1, 0, 1, 0] = -SQ2
        np.testing.assert_allclose(tensor, expected, atol=1e-14)

    def test_eigenstate_input_stays_product(self):
        layout = qubits("s", "A")
        plus_x = StateVector(layout, np.array([SQ2, 0, SQ2, 0]))
        out, _ = premeasure_along(plus_x, "s", AXIS_X, "A")
        assert commitment_probability(out, {"A": 0}) == pytest.approx(1.0, abs=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(29)
        layout = qubits("s", "A", "B")
        for _ in range(25):
            amps = rng.normal(size=8) + 1j * rng.normal(size=8)
            state = StateVector(layout, amps / np.linalg.norm(amps))
            axis = AxisSpec(math.acos(1 - 2 * rng.random()), 2 * math.pi * rng.random())
            out, _ = premeasure_along(state, "s", axis, "A")
            assert abs(np.linalg.norm(out.amps) - 1.0) < 1e-12

    def test_recording_fidelity(self):
        # pointer statistics equal the Born probabilities of the axis outcome
        # on the pre-interaction system state
        rng = np.random.default_rng(31)
        layout = qubits("s", "A")
        for _ in range(25):
            amps = rng.normal(size=2) + 1j * rng.normal(size=2)
            amps /= np.linalg.norm(amps)
            state = make_product_state(layout, [0, 0])
            state = StateVector(layout, np.kron(amps, [1, 0]))
            axis = AxisSpec(math.acos(1 - 2 * rng.random()), 2 * math.pi * rng.random())
            born = np.abs(axis_basis_matrix(axis) @ amps) ** 2
            out, _ = premeasure_along(state, "s", axis, "A")
            for k in range(2):
                assert abs(commitment_probability(out, {"A": k}) - born[k]) < 1e-12

    def test_idempotent_correlation(self):
        # premeasuring the same system along the same axis into a fresh
        # pointer yields perfectly correlated pointers
        rng = np.random.default_rng(37)
        layout = qubits("s", "A", "B")
        for _ in range(10):
            amps = rng.normal(size=2) + 1j * rng.normal(size=2)
            amps /= np.linalg.norm(amps)
            state = StateVector(layout, np.kron(amps, [1, 0, 0, 0]))
            axis = AxisSpec(math.acos(1 - 2 * rng.random()), 2 * math.pi * rng.random())
            state, _ = premeasure_along(state, "s", axis, "A")
            state, _ = premeasure_along(state, "s", axis, "B")
            mismatch = commitment_probability(state, {"A": 0, "B": 1})
            mismatch += commitment_probability(state, {"A": 1, "B": 0})
            assert mismatch < 1e-12

    def test_chain_into_brain(self):
        # apparatus -> brain copy in the computational basis (axis=None)
        layout = RegisterLayout.of(
            ("s", 2, "system"), ("A", 2, "apparatus"), ("O", 2, "brain")
        )
        alpha, beta = 0.6, 0.8
        state = StateVector(layout, np.kron([alpha, beta], [1, 0, 0, 0]))
        state, _ = premeasure_along(state, "s", AXIS_Z, "A")
        state, record = premeasure_along(state, "A", None, "O")
        assert record.axis is None
        tensor = state.tensor()
        assert tensor[0, 0, 0] == pytest.approx(alpha)
        assert tensor[1, 1, 1] == pytest.approx(beta)

    def test_wrong_dims_rejected(self):
        layout = RegisterLayout.of(("s", 3, "system"), ("p", 2, "apparatus"))
        with pytest.raises(ValueError, match="cannot record"):
            premeasure_along(make_product_state(layout, [0, 0]), "s", None, "p")
        with pytest.raises(ValueError, match="dim-2 system"):
            premeasure_composite(
                RegisterLayout.of(("s", 3, "system"), ("p", 3, "apparatus")),
                "s",
                AXIS_Z,
                "p",
            )
