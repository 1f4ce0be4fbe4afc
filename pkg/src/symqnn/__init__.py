"""Permutation-equivariant quantum neural networks for point-cloud classification.

A small dense statevector simulator, Z feature maps over Euclidean/Minkowski
inner products, S_n twirling of Pauli generators, symmetric and
hardware-efficient ansatze, a native COBYLA trainer, synthetic datasets and
the multi-seed / gradient-variance experiment drivers.
"""
from .ansatz import assemble_model, build, build_baseline, build_fully_symmetric, build_rotational
from .circuit import ArityError, CompositionError, ParamCircuit
from .encoding import (
    FeatureScaler,
    InvariantFeatures,
    PointCloudSample,
    euclidean_features,
    fit_scaler,
    inner_products_euclidean,
    inner_products_minkowski,
    minkowski_features,
    z_feature_map,
)
from .experiments import ExperimentConfig, ExperimentReport, VarianceScanResult, bp_variance_scan, run_classification
from .metrics import auc, roc_curve
from .statevector import CapacityError, Gate, PauliString, apply_circuit, expectation, init_state
from .symmetry import Permutation, enumerate_group, induce_on_pairs, twirl, verify_equivariance
from .training import Model, TrainConfig, TrainResult, fit_model, make_model, parameter_shift_gradient, predict, train

__version__ = "0.1.0"

__all__ = [
    "ArityError", "CapacityError", "CompositionError", "ExperimentConfig", "ExperimentReport", "FeatureScaler",
    "Gate", "InvariantFeatures", "Model", "ParamCircuit", "PauliString", "Permutation", "PointCloudSample",
    "TrainConfig", "TrainResult", "VarianceScanResult", "apply_circuit", "assemble_model", "auc", "bp_variance_scan",
    "build", "build_baseline", "build_fully_symmetric", "build_rotational", "enumerate_group", "euclidean_features",
    "expectation", "fit_model", "fit_scaler", "induce_on_pairs", "init_state", "inner_products_euclidean",
    "inner_products_minkowski", "make_model", "minkowski_features", "parameter_shift_gradient", "predict",
    "roc_curve", "run_classification", "train", "twirl", "verify_equivariance", "z_feature_map",
]
