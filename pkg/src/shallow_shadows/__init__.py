"""Robust shallow classical shadows: simulation, frame calibration and mitigated estimation."""
from __future__ import annotations

__version__ = "0.1.0"

from .pauli import (DenseState, IrrepLabel, PauliString, irrep_label, pauli_expectation,
                    pauli_weight, walsh_hadamard)
from .circuits import (MPO, Circuit, Topology, block_brickwork, brickwork, circuit_unitary,
                       cnot_layer_mpo, sample_circuit, single_qubit_cliffords)
from .noise import (NOISELESS, GUENoise, NoiseModel, PauliChannel, apply_noise_event,
                    calibrate_gamma, depolarizing, incoherent_noise_unitary,
                    infidelity_of_unitary, sample_gue)
from .simulator import (AcquisitionSpec, RecordSet, ShadowRecord, acquire, outcome_distribution,
                        run_shot)
from .tt import (FitResult, TensorTrain, mals_fit, tt_add, tt_elementwise_inverse_fit, tt_entry,
                 tt_round, tt_scale, tt_svd, tt_to_dense)
from .calibration import (FrameSpectrum, estimate_f, exact_f, exact_f_tt_pauli_noise, ideal_f,
                          noiseless_f, phi_dense, phi_tt)
from .estimation import (Estimate, Observable, bias_of_estimation, dual_eval, estimate,
                         worst_case_bias, worst_case_bias_by_support)
from .experiments import ExperimentConfig, run_experiment

__all__ = [
    "__version__", "annotations", "DenseState", "IrrepLabel", "PauliString", "irrep_label",
    "pauli_expectation", "pauli_weight", "walsh_hadamard", "MPO", "Circuit", "Topology",
    "block_brickwork", "brickwork", "circuit_unitary", "cnot_layer_mpo", "sample_circuit",
    "single_qubit_cliffords", "NOISELESS", "GUENoise", "NoiseModel", "PauliChannel",
    "apply_noise_event", "calibrate_gamma", "depolarizing", "incoherent_noise_unitary",
    "infidelity_of_unitary", "sample_gue", "AcquisitionSpec", "RecordSet", "ShadowRecord",
    "acquire", "outcome_distribution", "run_shot", "FitResult", "TensorTrain", "mals_fit",
    "tt_add", "tt_elementwise_inverse_fit", "tt_entry", "tt_round", "tt_scale", "tt_svd",
    "tt_to_dense", "FrameSpectrum", "estimate_f", "exact_f", "exact_f_tt_pauli_noise",
    "ideal_f", "noiseless_f", "phi_dense", "phi_tt", "Estimate", "Observable",
    "bias_of_estimation", "dual_eval", "estimate", "worst_case_bias",
    "worst_case_bias_by_support", "ExperimentConfig", "run_experiment",
]
