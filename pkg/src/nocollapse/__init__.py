"""Quantum measurement without collapse.

The global state of a world evolves only unitarily.  Observers never change
it: perceiving a register samples one branch by the Born rule conditioned on
the observer's previous commitments, and communication between observers is
itself such a measurement.  A separate oracle provides textbook collapse
dynamics and exhaustive branch enumeration for equivalence checks.
"""

from .observer import Awareness, InternalInconsistencyError, Observer, UnrecordedResultError, World
from .oracle import BranchTable, collapse_measure, enumerate_branches, sequential_collapse_run
from .premeasure import PremeasureRecord, fanout_unitary, premeasure_along
from .qstate import (
    AXIS_X,
    AXIS_Z,
    AxisSpec,
    BranchStructureError,
    Commitment,
    Register,
    RegisterLayout,
    StateVector,
    UnitaryOp,
    apply_unitary,
    axis_basis_unitary,
    axis_rotation,
    commitment_probability,
    fidelity,
    make_product_state,
    register_marginal,
    singlet_state,
    x_flip,
    z_phase,
)
from .scenarios import (
    CorrelationEstimate,
    MixtureComparison,
    TrialRecord,
    chsh_statistic,
    classical_chsh_statistic,
    conviviality_violations,
    epr_trial,
    estimate_correlation,
    mixture_same_spin_probability,
    no_signaling_deviation,
    repeatability_violations,
)
from .script import Report, ScenarioProgram, emit_report, format_scenario, parse_scenario, run_program

__version__ = "0.1.0"
