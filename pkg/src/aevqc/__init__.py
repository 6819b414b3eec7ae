"""Amplitude-encoded variational quantum circuit heads for image classifiers.

A numpy/Cython state-vector simulator with adjoint gradients, the circuit
head that replaces global pooling, a small classical backbone and baseline,
and a trainer/evaluator to compare the two.
"""

from .quantum import Circuit, Gate, StateVector, apply_gate, run_circuit, z_expectations, zero_state
from .encoding import amplitude_encode, qubits_needed
from .grad import grad_input, grad_params_adjoint, grad_params_shift, head_vjp
from .head import AnsatzSpec, QuantumHead, build_ansatz, count_head_params, head_forward
from .data import DatasetSplit, MetricsReport, compute_metrics, load_image_dir, synth_dataset
from .pipeline import (
    Model, ModelConfig, TrainConfig, build_model, evaluate, load_checkpoint, save_checkpoint, train,
)

__version__ = "0.1.0"
