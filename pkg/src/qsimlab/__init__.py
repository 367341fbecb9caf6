"""Fermionic lattice dynamics on an emulated noisy quantum computer."""

__version__ = "0.1.0"

from .circuit import Circuit, Gate, GateTimings
from .device import (DeviceModel, LayoutScore, build_pipeline, enumerate_chain_layouts,
                     estimate_duration, estimate_fidelity, merge_1q, rewrite_to_rzx,
                     scaled_rzx_error, score_layout)
from .errors import QsimError
from .evolution import (LCUPlan, TrotterPlan, exact_evolve, lcu_evolve, suzuki_p,
                        trotter_circuit, trotter_error)
from .fermion import (FermionExpr, TightBindingSpec, jordan_wigner, tight_binding,
                      tight_binding_pauli)
from .measurement import (Estimate, SpectroscopyPlan, SpectrumResult, aux_overlap, correlation,
                          fft_spectrum, measure_pauli, spectroscopy)
from .mitigation import ConfusionMatrix, calibrate, mitigate, postselect
from .pauli import PauliSum, PauliTerm
from .prep import SlaterSpec, basis_excitation, ghz, givens_circuit, slater_circuit
from .state import NoiseSpec, QuantumState, apply_channel, expectation, run, sample

__all__ = [
    "Circuit", "ConfusionMatrix", "DeviceModel", "Estimate", "FermionExpr", "Gate", "GateTimings",
    "LCUPlan", "LayoutScore", "NoiseSpec", "PauliSum", "PauliTerm", "QsimError", "QuantumState",
    "SlaterSpec", "SpectroscopyPlan", "SpectrumResult", "TightBindingSpec", "TrotterPlan",
    "__version__", "apply_channel", "aux_overlap", "basis_excitation", "build_pipeline",
    "calibrate", "correlation", "enumerate_chain_layouts", "estimate_duration",
    "estimate_fidelity", "exact_evolve", "expectation", "fft_spectrum", "ghz", "givens_circuit",
    "jordan_wigner", "lcu_evolve", "measure_pauli", "merge_1q", "mitigate", "postselect",
    "rewrite_to_rzx", "run", "sample", "scaled_rzx_error", "score_layout", "slater_circuit",
    "spectroscopy", "suzuki_p", "tight_binding", "tight_binding_pauli", "trotter_circuit",
    "trotter_error",
]
