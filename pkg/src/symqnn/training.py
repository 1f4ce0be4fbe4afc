"""Model evaluation, losses, parameter-shift gradients and COBYLA training."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import ansatz as ansatz_lib
from .circuit import ArityError, ParamCircuit
from .cobyla import minimize_cobyla
from .encoding import (
    FeatureScaler,
    PointCloudSample,
    block_groups,
    center_points,
    normalize_size,
    encode_batch,
    euclidean_features,
    fit_scaler,
    flatten_baseline,
    minkowski_features,
    z_feature_map,
)
from .statevector import PauliString, apply_circuit, expectation, init_state, run_gates

log = logging.getLogger(__name__)

PREPROCESSING = ("flatten", "euclidean", "minkowski")
SHIFT = np.pi / 2
# encoded-state cache ceiling, in complex amplitudes (256 MiB)
CACHE_AMPLITUDES = 1 << 24


@dataclass(frozen=True)
class Model:
    """Encoder settings plus ansatz; ``scaler`` is filled in by :func:`fit_model`."""

    ansatz: ParamCircuit
    preprocessing: str = "euclidean"
    include_self: bool = True
    scaler: FeatureScaler | None = None
    tie_blocks: bool = False
    center: bool = False
    normalize_scale: bool = False
    observable: PauliString | None = None

    def __post_init__(self):
        if self.preprocessing not in PREPROCESSING:
            raise ValueError(f"preprocessing must be one of {PREPROCESSING}, got {self.preprocessing!r}")

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params

    @property
    def obs(self) -> PauliString:
        return self.observable if self.observable is not None else PauliString.z_all(self.n_qubits)

    def features(self, points: np.ndarray) -> np.ndarray:
        """Raw (unscaled) features, shape (N, n_qubits) for a batch of clouds."""
        pts = np.asarray(points, dtype=np.float64)
        if self.normalize_scale:
            pts = normalize_size(pts)
        elif self.center:
            pts = center_points(pts)
        if self.preprocessing == "flatten":
            out = flatten_baseline(pts)
        elif self.preprocessing == "euclidean":
            out = euclidean_features(pts, self.include_self)
        else:
            out = minkowski_features(pts, self.include_self)
        if out.shape[-1] != self.n_qubits:
            raise ValueError(f"preprocessing yields {out.shape[-1]} features, encoder needs {self.n_qubits}")
        return out

    def angles(self, points: np.ndarray) -> np.ndarray:
        if self.scaler is None:
            raise ValueError("model has no fitted scaler; call fit_model first")
        return self.scaler.transform(self.features(points))

    def circuit_for(self, sample: PointCloudSample) -> ParamCircuit:
        """Full encoder + ansatz circuit for one sample."""
        enc = z_feature_map(self.angles(sample.points[None])[0])
        return ansatz_lib.assemble_model(enc, self.ansatz)

    def to_dict(self) -> dict:
        return {
            "ansatz": self.ansatz.to_dict(),
            "preprocessing": self.preprocessing,
            "include_self": self.include_self,
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "tie_blocks": self.tie_blocks,
            "center": self.center,
            "normalize_scale": self.normalize_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        return cls(
            ParamCircuit.from_dict(d["ansatz"]),
            d["preprocessing"],
            d["include_self"],
            None if d.get("scaler") is None else FeatureScaler.from_dict(d["scaler"]),
            d.get("tie_blocks", False),
            d.get("center", False),
            d.get("normalize_scale", False),
        )


def make_model(kind: str, n_points: int, dim: int, layers: int, preprocessing: str | None = None,
               include_self: bool = True, center: bool = False, normalize_scale: bool = False) -> Model:
    """Model of one of the three kinds; invariant kinds default to Euclidean features."""
    if preprocessing is None:
        preprocessing = "flatten" if kind == "baseline" else "euclidean"
    if kind == "baseline" and preprocessing != "flatten":
        raise ValueError("baseline model uses flattened coordinates")
    if kind != "baseline" and preprocessing == "flatten":
        raise ValueError(f"{kind} model needs inner-product features")
    circuit = ansatz_lib.build(kind, n_points, dim, layers, include_self)
    return Model(circuit, preprocessing, include_self, None, tie_blocks=kind == "fully_symmetric",
                 center=center, normalize_scale=normalize_scale)


def fit_model(model: Model, train_points: np.ndarray) -> Model:
    """Fit the feature scaler on training clouds only."""
    feats = model.features(train_points)
    groups = None
    if model.tie_blocks:
        n_points = np.asarray(train_points).shape[-2]
        groups = block_groups(n_points, model.include_self)
    return replace(model, scaler=fit_scaler(feats, groups))


def _points_labels(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2:
        return np.asarray(dataset[0], dtype=np.float64), np.asarray(dataset[1])
    if isinstance(dataset, PointCloudSample):
        dataset = [dataset]
    samples = list(dataset)
    if not samples:
        raise ValueError("empty dataset")
    return np.stack([s.points for s in samples]), np.array([s.label for s in samples])


class BatchEvaluator:
    """Evaluates a model on a fixed batch of clouds for many parameter vectors.

    Encoded states are computed once and reused when they fit in the cache
    budget; otherwise each call re-encodes chunk by chunk.
    """

    def __init__(self, model: Model, points: np.ndarray, cache_limit: int = CACHE_AMPLITUDES):
        self.model = model
        self.angles = model.angles(points)
        dim = 1 << model.n_qubits
        self.chunk = max(1, cache_limit // dim)
        self._cache = encode_batch(self.angles) if len(self.angles) * dim <= cache_limit else None

    def __len__(self) -> int:
        return len(self.angles)

    def _states(self):
        if self._cache is not None:
            yield 0, self._cache.copy()
            return
        for start in range(0, len(self.angles), self.chunk):
            yield start, encode_batch(self.angles[start : start + self.chunk])

    def run_angles(self, gate_angles: np.ndarray) -> np.ndarray:
        gates = self.model.ansatz.gates
        obs = self.model.obs
        out = np.empty(len(self.angles))
        for start, states in self._states():
            run_gates(states, gates, gate_angles)
            out[start : start + len(states)] = expectation(states, obs)
        return out

    def __call__(self, params: Sequence[float]) -> np.ndarray:
        return self.run_angles(self.model.ansatz.gate_angles(params))


def predict_batch(model: Model, points: np.ndarray, params: Sequence[float]) -> np.ndarray:
    return BatchEvaluator(model, np.asarray(points, dtype=np.float64))(params)


def predict(model: Model, sample: PointCloudSample, params: Sequence[float]) -> float:
    """Expectation of the observable after encoder + ansatz for one sample."""
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.size != model.n_params:
        raise ArityError(f"model expects {model.n_params} parameters, got {params.size}")
    return float(predict_batch(model, sample.points[None], params)[0])


def _check_lengths(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise ValueError("empty prediction set")
    return p, y


def mse_loss(predictions, labels) -> float:
    """Mean squared error divided by 4, so outputs in [-1, 1] give a loss in [0, 1]."""
    p, y = _check_lengths(predictions, labels)
    return float(np.mean((p - y) ** 2) / 4.0)


def offset_activation(predictions, b: float) -> np.ndarray:
    return -np.abs(np.asarray(predictions, dtype=np.float64) - b)


def offset_loss(predictions, labels, b: float) -> float:
    """sum_i (-|y_hat_i - b| - y_i)^2; a plain sum, not normalized by n."""
    p, y = _check_lengths(predictions, labels)
    return float(np.sum((offset_activation(p, b) - y) ** 2))


def offset_loss_grad_b(predictions, labels, b: float) -> float:
    """d/db of :func:`offset_loss`, valid away from y_hat_i = b."""
    p, y = _check_lengths(predictions, labels)
    return float(np.sum(2.0 * (offset_activation(p, b) - y) * np.sign(p - b)))


def circuit_shift_gradient(circuit: ParamCircuit, states: np.ndarray, params, slot: int,
                           observable: PauliString | None = None) -> np.ndarray | float:
    """d<O>/d(params[slot]) by the two-term shift rule, summed over every gate on the slot.

    ``states`` are the (batch of) input states the circuit acts on.
    """
    angles = circuit.gate_angles(params)
    if not 0 <= slot < circuit.n_params:
        raise IndexError(f"slot {slot} outside [0, {circuit.n_params})")
    obs = observable if observable is not None else PauliString.z_all(circuit.n_qubits)
    grad = np.zeros(states.shape[:-1]) if states.ndim > 1 else 0.0
    for gi in circuit.slot_map[slot]:
        kind = circuit.gates[gi].kind
        if kind not in ("RY", "RZ", "RZZ"):
            raise ValueError(f"no shift rule for {kind} on slot {slot}")
        plus, minus = angles.copy(), angles.copy()
        plus[gi] += SHIFT
        minus[gi] -= SHIFT
        f_plus = expectation(run_gates(np.array(states, copy=True), circuit.gates, plus), obs)
        f_minus = expectation(run_gates(np.array(states, copy=True), circuit.gates, minus), obs)
        grad = grad + 0.5 * (f_plus - f_minus)
    return grad


def parameter_shift_gradient(model: Model, sample: PointCloudSample, params, slot: int) -> float:
    state = encode_batch(model.angles(sample.points[None]))
    return float(circuit_shift_gradient(model.ansatz, state, params, slot, model.obs)[0])


@dataclass
class TrainConfig:
    max_iterations: int = 100
    initial_step: float = 0.5
    tolerance: float = 1e-4
    seed: int = 0
    use_offset_loss: bool = False
    initial_offset: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class TrainResult:
    best_params: np.ndarray
    best_offset: float | None
    loss_history: list[float]
    evaluations: int
    initial_params: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)
    monitor_history: list[float] | None = None
    message: str = ""

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]

    def to_dict(self) -> dict:
        return {
            "best_params": [float(v) for v in self.best_params],
            "best_offset": self.best_offset,
            "loss_history": list(map(float, self.loss_history)),
            "monitor_history": None if self.monitor_history is None else list(map(float, self.monitor_history)),
            "evaluations": self.evaluations,
            "initial_params": [float(v) for v in self.initial_params],
            "seed": self.seed,
            "config": self.config,
            "message": self.message,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainResult":
        return cls(np.asarray(d["best_params"]), d["best_offset"], d["loss_history"], d["evaluations"],
                   np.asarray(d["initial_params"]), d["seed"], d.get("config", {}), d.get("monitor_history"),
                   d.get("message", ""))


def make_objective(evaluator: BatchEvaluator, labels: np.ndarray, n_params: int, use_offset: bool):
    labels = np.asarray(labels, dtype=np.float64)
    if use_offset:
        def objective(x):
            return offset_loss(evaluator(x[:n_params]), labels, x[n_params])
    else:
        def objective(x):
            return mse_loss(evaluator(x), labels)
    return objective


def train(model: Model, dataset, config: TrainConfig, monitor=None) -> TrainResult:
    """Fit ``model`` (scaler already fitted) on ``dataset`` with COBYLA.

    ``dataset``/``monitor`` are ``(points, labels)`` tuples or sample lists.
    ``monitor`` gets the training loss function evaluated at the best-so-far
    parameters after every evaluation (e.g. full-dataset loss).
    """
    points, labels = _points_labels(dataset)
    rng = np.random.default_rng(config.seed)
    x0 = rng.uniform(0.0, 2.0 * np.pi, model.n_params)
    if config.use_offset_loss:
        x0 = np.append(x0, config.initial_offset)
    objective = make_objective(BatchEvaluator(model, points), labels, model.n_params, config.use_offset_loss)

    monitor_fn = None
    monitor_history: list[float] | None = None
    if monitor is not None:
        m_points, m_labels = _points_labels(monitor)
        monitor_fn = make_objective(BatchEvaluator(model, m_points), m_labels, model.n_params,
                                    config.use_offset_loss)
        monitor_history = []
        state = {"best": np.inf, "value": np.nan}

        def tracked(x):
            f = objective(x)
            if f < state["best"]:
                state["best"] = f
                state["value"] = monitor_fn(x)
            monitor_history.append(state["value"])
            return f
    else:
        tracked = objective

    res = minimize_cobyla(tracked, x0, config.initial_step, min(config.tolerance, config.initial_step),
                          config.max_iterations)
    best = res.x
    params, offset = (best[:-1], float(best[-1])) if config.use_offset_loss else (best, None)
    log.info("seed %d: loss %.5f after %d evaluations (%s)", config.seed, res.fun, res.nfev, res.message)
    return TrainResult(params, offset, res.history, res.nfev, x0[: model.n_params], config.seed,
                       asdict(config), monitor_history, res.message)


def decision_scores(model: Model, points: np.ndarray, params, offset: float | None = None) -> np.ndarray:
    """Classifier scores: y_hat, or -|y_hat - b| for offset-activation models."""
    y = predict_batch(model, points, params)
    return y if offset is None else offset_activation(y, offset)


def initial_state_for(model: Model, sample: PointCloudSample) -> np.ndarray:
    """Reference path: encoder circuit applied gate by gate to |0...0>."""
    enc = z_feature_map(model.angles(sample.points[None])[0])
    return apply_circuit(init_state(model.n_qubits), enc)
