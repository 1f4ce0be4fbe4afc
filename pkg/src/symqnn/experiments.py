"""Multi-seed classification runs, ROC aggregation and the gradient-variance scan.

Reports are plain JSON documents (see ``SCHEMA_VERSION``). Everything random is
derived from one integer seed: the dataset and each initialization get their
own child of ``np.random.SeedSequence(seed)``, so adding initializations never
changes the earlier ones.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .datasets import (
    DecayConfig,
    LabeledDataset,
    ShapeConfig,
    generate_decays,
    generate_shapes,
    mass_cut_scores,
    read_csv,
)
from .encoding import encode_batch
from .metrics import auc, roc_band, roc_curve
from .training import (
    Model,
    TrainConfig,
    TrainResult,
    circuit_shift_gradient,
    decision_scores,
    fit_model,
    make_model,
    train,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
TASKS = ("shapes2d", "decay", "bp_scan")
MODELS = ("baseline", "rotational", "fully_symmetric")
SCAN_AXES = ("dimension", "n_points", "n_qubits")

# desk-scale defaults per task; None fields of ExperimentConfig resolve to these
TASK_DEFAULTS = {
    "shapes2d": dict(n_train=300, n_test=100, iterations=100, include_self=True, use_offset_loss=False,
                     normalize_scale=True, n_points=4, dim=2),
    "decay": dict(n_train=1000, n_test=400, iterations=150, include_self=False, use_offset_loss=True,
                  normalize_scale=False, n_points=4, dim=4),
}

# (n_points, dim) grids of the variance scan
SCAN_GRID = {
    "dimension": [(3, 2), (3, 3), (3, 4)],
    "n_points": [(3, 2), (4, 2), (5, 2)],
    "n_qubits": [(3, 2), (4, 2), (5, 2), (4, 3), (4, 4)],
}


@dataclass
class ExperimentConfig:
    task: str = "shapes2d"
    model: str = "fully_symmetric"
    layers: int = 2
    n_inits: int = 3
    iterations: int | None = None
    seed: int = 0
    n_train: int | None = None
    n_test: int | None = None
    include_self: bool | None = None
    use_offset_loss: bool | None = None
    normalize_scale: bool | None = None
    initial_step: float = 1.0
    tolerance: float = 1e-4
    data: str | None = None
    output: str | None = None
    workers: int = 1
    # variance scan
    scan_samples: int = 100
    scan_inputs: int = 10
    scan_axes: tuple[str, ...] = SCAN_AXES
    scan_models: tuple[str, ...] = ("baseline", "fully_symmetric")

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.n_inits < 1:
            raise ValueError("n_inits must be >= 1")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.scan_samples < 2:
            raise ValueError("scan_samples must be >= 2")
        if self.scan_inputs < 1:
            raise ValueError("scan_inputs must be >= 1")
        self.scan_axes = tuple(self.scan_axes)
        self.scan_models = tuple(self.scan_models)
        bad = [a for a in self.scan_axes if a not in SCAN_AXES] + [m for m in self.scan_models if m not in MODELS]
        if bad:
            raise ValueError(f"unknown scan axis/model: {bad}")

    def resolved(self) -> "ExperimentConfig":
        """Copy with task defaults filled into every ``None`` field."""
        if self.task not in TASK_DEFAULTS:
            return self
        defaults = TASK_DEFAULTS[self.task]
        updates = {k: v for k, v in defaults.items() if hasattr(self, k) and getattr(self, k) is None}
        return replace(self, **updates)

    @property
    def geometry(self) -> tuple[int, int]:
        d = TASK_DEFAULTS.get(self.task, TASK_DEFAULTS["shapes2d"])
        return d["n_points"], d["dim"]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scan_axes"] = list(self.scan_axes)
        out["scan_models"] = list(self.scan_models)
        return out


def derive_seeds(seed: int, n_inits: int) -> tuple[int, list[int]]:
    """Dataset seed and one seed per initialization, all children of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_inits + 1)
    ints = [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]
    return ints[0], ints[1:]


def load_dataset(config: ExperimentConfig, data_seed: int) -> LabeledDataset:
    cfg = config.resolved()
    if cfg.data is not None:
        ds = read_csv(cfg.data)
        if len(ds.test_idx) == 0:
            ds = ds.with_split(min(cfg.n_train, len(ds) - 1), None)
        return ds
    n = cfg.n_train + cfg.n_test
    if cfg.task == "shapes2d":
        ds = generate_shapes(ShapeConfig(n_samples=n, seed=data_seed))
    elif cfg.task == "decay":
        ds = generate_decays(DecayConfig(n_samples=n, seed=data_seed))
    else:
        raise ValueError(f"task {cfg.task!r} has no classification dataset")
    return ds.with_split(cfg.n_train, cfg.n_test)


def build_model(config: ExperimentConfig, n_points: int, dim: int) -> Model:
    cfg = config.resolved()
    prep = "flatten" if cfg.model == "baseline" else ("minkowski" if cfg.task == "decay" else "euclidean")
    return make_model(cfg.model, n_points, dim, cfg.layers, prep, include_self=cfg.include_self,
                      normalize_scale=cfg.normalize_scale)


def structure(model: Model) -> dict:
    c = model.ansatz
    return {
        "n_qubits": model.n_qubits,
        "n_params": model.n_params,
        "depth": c.depth(),
        "gate_counts": {k: c.count(k) for k in sorted({g.kind for g in c.gates})},
    }


def loss_quantiles(histories: list[list[float]]) -> dict:
    """Pointwise 25/50/75% curves; shorter (converged) histories hold their final value."""
    if not histories:
        return {"q25": [], "median": [], "q75": []}
    length = max(len(h) for h in histories)
    H = np.array([list(h) + [h[-1]] * (length - len(h)) for h in histories], dtype=np.float64)
    q25, med, q75 = np.quantile(H, [0.25, 0.5, 0.75], axis=0)
    return {"q25": q25.tolist(), "median": med.tolist(), "q75": q75.tolist()}


def _run_seed(args) -> dict:
    model, train_xy, full_xy, test_xy, tcfg = args
    try:
        res = train(model, train_xy, tcfg, monitor=full_xy)
        scores = decision_scores(model, test_xy[0], res.best_params, res.best_offset)
        roc = roc_curve(scores, test_xy[1])
        return {"status": "ok", "result": res.to_dict(), "roc": roc, "auc": auc(roc)}
    except Exception as exc:  # keep the other seeds
        log.exception("seed %d failed", tcfg.seed)
        return {"status": f"failed: {type(exc).__name__}: {exc}", "result": None, "roc": None, "auc": None}


@dataclass
class ExperimentReport:
    config: dict
    structure: dict
    model: dict
    seeds: list[dict]
    loss: dict
    full_loss: dict
    roc_band: dict | None
    auc: dict
    reference: dict | None = None
    timestamp: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    @property
    def aucs(self) -> list[float]:
        return [s["auc"] for s in self.seeds if s["status"] == "ok"]

    @property
    def median_auc(self) -> float:
        return float(np.median(self.aucs)) if self.aucs else float("nan")

    def body(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "structure": self.structure,
            "model": self.model,
            "seeds": self.seeds,
            "loss": self.loss,
            "full_loss": self.full_loss,
            "roc_band": self.roc_band,
            "auc": self.auc,
            "reference": self.reference,
        }

    def checksum(self) -> str:
        return _checksum(self.body())

    def to_dict(self) -> dict:
        return {**self.body(), "timestamp": self.timestamp, "checksum": self.checksum()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(d["config"], d["structure"], d["model"], d["seeds"], d["loss"], d["full_loss"],
                   d["roc_band"], d["auc"], d.get("reference"), d.get("timestamp", ""))

    @classmethod
    def read(cls, path) -> "ExperimentReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def train_results(self) -> list[TrainResult | None]:
        return [None if s["result"] is None else TrainResult.from_dict(s["result"]) for s in self.seeds]

    def export_roc_csv(self, path) -> None:
        """Band (fpr, mean, std) followed by each seed's raw curve."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["curve", "fpr", "tpr", "tpr_std"])
            if self.roc_band is not None:
                b = self.roc_band
                for f, m, s in zip(b["fpr"], b["tpr_mean"], b["tpr_std"]):
                    w.writerow(["mean", repr(f), repr(m), repr(s)])
            for s in self.seeds:
                for f, t in s["roc"] or []:
                    w.writerow([f"seed{s['seed']}", repr(f), repr(t), ""])


def _checksum(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def run_classification(config: ExperimentConfig) -> ExperimentReport:
    """Train ``n_inits`` initializations, score the test split, aggregate losses and ROCs."""
    cfg = config.resolved()
    if cfg.task not in ("shapes2d", "decay"):
        raise ValueError(f"run_classification needs a classification task, got {cfg.task!r}")
    data_seed, init_seeds = derive_seeds(cfg.seed, cfg.n_inits)
    ds = load_dataset(cfg, data_seed)
    if len(ds.train_idx) == 0 or len(ds.test_idx) == 0:
        raise ValueError("dataset needs non-empty train and test splits")
    _, n_points, dim = ds.points.shape
    model = fit_model(build_model(cfg, n_points, dim), ds.train()[0])
    train_xy, test_xy = ds.train(), ds.test()
    full_xy = (ds.points, ds.labels)

    jobs = []
    for s in init_seeds:
        tcfg = TrainConfig(max_iterations=cfg.iterations, initial_step=cfg.initial_step,
                           tolerance=min(cfg.tolerance, cfg.initial_step), seed=s,
                           use_offset_loss=cfg.use_offset_loss)
        jobs.append((model, train_xy, full_xy, test_xy, tcfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(_run_seed, jobs))
    else:
        outs = [_run_seed(j) for j in jobs]

    seeds = [{"seed": s, **o} for s, o in zip(init_seeds, outs)]
    ok = [o for o in outs if o["status"] == "ok"]
    aucs = np.array([o["auc"] for o in ok])
    auc_summary = {
        "per_seed": [o["auc"] for o in outs],
        "mean": float(aucs.mean()) if ok else None,
        "std": float(aucs.std()) if ok else None,
        "median": float(np.median(aucs)) if ok else None,
    }
    reference = None
    if cfg.task == "decay":
        ref_roc = roc_curve(mass_cut_scores(test_xy[0]), test_xy[1])
        reference = {"name": "mass_cut", "auc": auc(ref_roc)}
    report = ExperimentReport(
        config=cfg.to_dict(),
        structure=structure(model),
        model=model.to_dict(),
        seeds=seeds,
        loss=loss_quantiles([o["result"]["loss_history"] for o in ok]),
        full_loss=loss_quantiles([o["result"]["monitor_history"] for o in ok]),
        roc_band=roc_band([o["roc"] for o in ok]) if ok else None,
        auc=auc_summary,
        reference=reference,
    )
    log.info("%s/%s: median AUC %.4f over %d seeds", cfg.task, cfg.model, report.median_auc, len(ok))
    if cfg.output:
        report.write(cfg.output)
    return report


def evaluate_report(report: ExperimentReport, dataset: LabeledDataset, split: str = "test") -> dict:
    """Re-score every trained seed of ``report`` on ``dataset`` (its test split, or ``"all"``)."""
    model = Model.from_dict(report.model)
    if split == "all":
        pts, labels = dataset.points, dataset.labels
    else:
        pts, labels = dataset.test() if split == "test" else dataset.train()
    out = []
    for s, res in zip(report.seeds, report.train_results()):
        if res is None:
            out.append({"seed": s["seed"], "auc": None})
            continue
        scores = decision_scores(model, pts, res.best_params, res.best_offset)
        out.append({"seed": s["seed"], "auc": auc(roc_curve(scores, labels))})
    vals = [o["auc"] for o in out if o["auc"] is not None]
    return {"split": split, "n": int(len(labels)), "seeds": out,
            "median": float(np.median(vals)) if vals else None}


# --- gradient variance ---------------------------------------------------------


@dataclass
class VarianceScanResult:
    """One row per (axis, model, configuration): variance of d<O>/d(theta_0) over random inits.

    ``variance`` is the median over the held-fixed inputs of each input's
    variance; the per-input values are kept in ``per_input_variance``.
    """

    entries: list[dict]
    samples: int
    layers: int
    seed: int
    inputs: int = 1

    def select(self, axis: str, model: str) -> list[dict]:
        return [e for e in self.entries if e["axis"] == axis and e["model"] == model]

    def variance(self, axis: str, model: str, **match) -> float:
        for e in self.select(axis, model):
            if all(e[k] == v for k, v in match.items()):
                return e["variance"]
        raise KeyError(f"no {model} entry on {axis} with {match}")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "samples": self.samples, "inputs": self.inputs,
                "layers": self.layers, "seed": self.seed, "entries": self.entries}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "VarianceScanResult":
        return cls(d["entries"], d["samples"], d["layers"], d["seed"], d.get("inputs", 1))

    def export_csv(self, path) -> None:
        cols = ["axis", "model", "n_points", "dim", "n_qubits", "n_params", "variance", "mean"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for e in self.entries:
                w.writerow([e[c] for c in cols])


def gradient_samples(model: Model, points: np.ndarray, n_samples: int, rng: np.random.Generator,
                     slot: int = 0) -> np.ndarray:
    """d<O>/d(theta_slot) at ``n_samples`` uniform parameter draws, for one cloud."""
    if model.n_params == 0 or slot >= model.n_params or not model.ansatz.slot_map[slot]:
        return np.zeros(n_samples)
    state = encode_batch(model.angles(points[None]))
    grads = np.empty(n_samples)
    for k in range(n_samples):
        params = rng.uniform(0.0, 2.0 * np.pi, model.n_params)
        grads[k] = circuit_shift_gradient(model.ansatz, state, params, slot, model.obs)[0]
    return grads


def bp_variance_scan(config: ExperimentConfig) -> VarianceScanResult:
    """Gradient variance of the first ansatz slot over random initializations.

    For every configuration, ``scan_inputs`` Gaussian clouds are each held
    fixed while ``scan_samples`` parameter vectors are drawn; the feature
    scaler is fitted on a reference batch of 256 clouds from the same
    distribution. A single input's variance depends strongly on where its
    encoded angles fall, so the reported value is the median over inputs.
    """
    entries = []
    for axis in config.scan_axes:
        for n_points, dim in SCAN_GRID[axis]:
            data_rng = np.random.default_rng([config.seed, n_points, dim])
            reference = data_rng.normal(size=(256, n_points, dim))
            inputs = data_rng.normal(size=(config.scan_inputs, n_points, dim))
            for kind in config.scan_models:
                prep = "flatten" if kind == "baseline" else "euclidean"
                model = fit_model(make_model(kind, n_points, dim, config.layers, prep, include_self=True),
                                  reference)
                rng = np.random.default_rng([config.seed, n_points, dim, MODELS.index(kind)])
                grads = np.stack([gradient_samples(model, x, config.scan_samples, rng) for x in inputs])
                per_input = np.var(grads, axis=1, ddof=1)
                entries.append({
                    "axis": axis, "model": kind, "n_points": n_points, "dim": dim,
                    "n_qubits": model.n_qubits, "n_params": model.n_params,
                    "variance": float(np.median(per_input)), "mean": float(np.mean(grads)),
                    "per_input_variance": per_input.tolist(),
                })
                log.info("%s %s n=%d d=%d: var %.3e", axis, kind, n_points, dim, entries[-1]["variance"])
    result = VarianceScanResult(entries, config.scan_samples, config.layers, config.seed, config.scan_inputs)
    if config.output:
        result.write(config.output)
    return result
