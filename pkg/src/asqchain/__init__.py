"""Simulation and planning tools for chains of Andreev spin qubits.

Units throughout: energies in GHz (E/h), times in ns, currents in uA,
fluxes in flux quanta, phases in radians. The Python API indexes qubits
from 0; files and the command line label them from 1.
"""

__version__ = "0.1.0"

from ._accel import backend
from .coupling import (
    CouplingReport,
    compare_with_oracle,
    coupling_report,
    effective_total_ej,
    extract_couplings_walsh,
    oracle_energies,
    pairwise_coupling,
)
from .dynamics import cphase_gate, evolve, ising_quench, max_qubits, spectator_infidelity
from .errors import (
    AsqChainError,
    BranchIdentificationError,
    ConvergenceError,
    DegenerateCouplingError,
    FitError,
    NearResonanceWarning,
    ValidationError,
)
from .io import load_config
from .planner import (
    BiasModel,
    FluxPlan,
    crosstalk_monte_carlo,
    plan_all_to_all,
    plan_idle,
    plan_pair,
    plan_readout,
)
from .readout import (
    ReadoutCircuit,
    ResonatorSpec,
    avoided_crossing_scan,
    circuit_levels,
    dispersive_sweep,
    dressed_resonator_freq,
    joint_readout_ladder,
)
from .scenarios import load_scenario, run_scenario
from .spin import AsqParams, ChainConfig, build_spin_hamiltonian, rotate_coupling
from .tuneup import VirtualDevice, run_tuneup

__all__ = [
    "AsqChainError",
    "AsqParams",
    "BiasModel",
    "BranchIdentificationError",
    "ChainConfig",
    "ConvergenceError",
    "CouplingReport",
    "DegenerateCouplingError",
    "FitError",
    "FluxPlan",
    "NearResonanceWarning",
    "ReadoutCircuit",
    "ResonatorSpec",
    "ValidationError",
    "VirtualDevice",
    "avoided_crossing_scan",
    "backend",
    "build_spin_hamiltonian",
    "circuit_levels",
    "compare_with_oracle",
    "coupling_report",
    "cphase_gate",
    "crosstalk_monte_carlo",
    "dispersive_sweep",
    "dressed_resonator_freq",
    "effective_total_ej",
    "evolve",
    "extract_couplings_walsh",
    "ising_quench",
    "joint_readout_ladder",
    "load_config",
    "load_scenario",
    "max_qubits",
    "oracle_energies",
    "pairwise_coupling",
    "plan_all_to_all",
    "plan_idle",
    "plan_pair",
    "plan_readout",
    "rotate_coupling",
    "run_scenario",
    "run_tuneup",
    "spectator_infidelity",
]
