"""Synthetic point-cloud datasets (2D shapes, four-lepton decays), the mass-cut
reference classifier, and CSV / manifest I/O."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoding import MINKOWSKI, PointCloudSample

SQUARE = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0], [2.0, 2.0]])
TRIANGLE = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0], [1.0, 1.0]])


class KinematicsError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class LabeledDataset:
    """Clouds stored as one (N, n, d) array with a train/test index split."""

    points: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray = field(default=None)
    test_idx: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 3 or len(self.points) != len(self.labels):
            raise ValueError("points must be (N, n, d) with one label per cloud")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        if self.train_idx is None:
            self.train_idx = np.arange(len(self.labels))
        if self.test_idx is None:
            self.test_idx = np.setdiff1d(np.arange(len(self.labels)), self.train_idx)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        both = np.concatenate([self.train_idx, self.test_idx])
        if len(both) != len(self.labels) or not np.array_equal(np.sort(both), np.arange(len(self.labels))):
            raise ValueError("train/test split must be disjoint and exhaustive")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def samples(self) -> list[PointCloudSample]:
        return [PointCloudSample(p, int(y)) for p, y in zip(self.points, self.labels)]

    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[self.train_idx], self.labels[self.train_idx]

    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[self.test_idx], self.labels[self.test_idx]

    def with_split(self, n_train: int, n_test: int | None = None) -> "LabeledDataset":
        """First ``n_train`` clouds train, the next ``n_test`` (default: the rest) test."""
        n_test = len(self) - n_train if n_test is None else n_test
        if n_train + n_test > len(self):
            raise ValueError(f"split {n_train}+{n_test} exceeds {len(self)} samples")
        keep = n_train + n_test
        return LabeledDataset(self.points[:keep], self.labels[:keep], np.arange(n_train), np.arange(n_train, keep))


def _balanced_labels(n: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.where(np.arange(n) < (n + 1) // 2, 1, -1)
    return rng.permutation(labels)


def _shuffle_split(n: int, train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    n_train = int(round(n * train_fraction))
    return np.arange(n_train), np.arange(n_train, n)


@dataclass
class ShapeConfig:
    n_samples: int = 1600
    translation_max: float = 5.0
    resize_range: tuple[float, float] = (0.5, 5.0)
    smear_range: tuple[float, float] = (-0.5, 0.5)
    rotate: bool = True
    shuffle: bool = True
    seed: int = 0
    train_fraction: float = 0.75

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least two samples so both classes appear")
        for name in ("resize_range", "smear_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered, got {(lo, hi)}")
            setattr(self, name, (float(lo), float(hi)))
        if self.translation_max < 0:
            raise ValueError("translation_max must be >= 0")


def generate_shapes(config: ShapeConfig) -> LabeledDataset:
    """Squares (+1) and triangles (-1) with random resize, rotation, translation, smearing, shuffling."""
    rng = np.random.default_rng(config.seed)
    n = config.n_samples
    labels = _balanced_labels(n, rng)
    templates = np.where(labels[:, None, None] == 1, SQUARE, TRIANGLE)
    centroid = templates.mean(axis=1, keepdims=True)
    scale = rng.uniform(*config.resize_range, size=(n, 1, 1))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n) if config.rotate else np.zeros(n)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # (n, 2, 2)
    shift = rng.uniform(-config.translation_max, config.translation_max, size=(n, 1, 2))
    smear = rng.uniform(*config.smear_range, size=(n, 4, 2))
    rel = scale * (templates - centroid)
    pts = centroid + np.einsum("nij,nkj->nki", rot, rel) + shift + smear
    if config.shuffle:
        order = np.argsort(rng.random((n, 4)), axis=1)
        pts = np.take_along_axis(pts, order[:, :, None], axis=1)
    train, test = _shuffle_split(n, config.train_fraction)
    return LabeledDataset(pts, labels, train, test)


def is_square(points: np.ndarray, rtol: float = 1e-9) -> bool:
    """Geometric oracle for unsmeared clouds: the two longest pairwise distances coincide."""
    pts = np.asarray(points)
    d = sorted(np.linalg.norm(pts[i] - pts[j]) for i in range(len(pts)) for j in range(i + 1, len(pts)))
    return math.isclose(d[-1], d[-2], rel_tol=rtol)


# --- relativistic kinematics -------------------------------------------------


def invariant_mass(p: np.ndarray) -> np.ndarray:
    """sqrt(E^2 - |p|^2) of (..., 4) four-vectors (clipped at zero)."""
    p = np.asarray(p, dtype=np.float64)
    m2 = np.sum(p * p * MINKOWSKI, axis=-1)
    return np.sqrt(np.maximum(m2, 0.0))


def boost(p: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Lorentz boost of four-vector(s) ``p`` by velocity ``beta`` (frame moving with -beta sees p boosted)."""
    p = np.asarray(p, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    b2 = float(beta @ beta)
    if b2 >= 1.0:
        raise KinematicsError(f"|beta| = {math.sqrt(b2)} >= 1")
    if b2 == 0.0:
        return p.copy()
    gamma = 1.0 / math.sqrt(1.0 - b2)
    bp = p[..., 1:] @ beta
    e = gamma * (p[..., 0] + bp)
    coef = (gamma - 1.0) * bp / b2 + gamma * p[..., 0]
    vec = p[..., 1:] + coef[..., None] * beta
    return np.concatenate([e[..., None], vec], axis=-1)


def breakup_momentum(M: float, m1: float, m2: float) -> float:
    if m1 < 0 or m2 < 0 or m1 + m2 > M * (1 + 1e-12):
        raise KinematicsError(f"cannot decay M={M} into {m1} + {m2}")
    arg = (M * M - (m1 + m2) ** 2) * (M * M - (m1 - m2) ** 2)
    return math.sqrt(max(arg, 0.0)) / (2.0 * M)


def two_body_decay(parent, m1: float, m2: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic two-body decay in the parent rest frame, boosted to the lab."""
    parent = np.asarray(parent, dtype=np.float64)
    M = float(invariant_mass(parent))
    p = breakup_momentum(M, m1, m2)
    cos_t = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    n = np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t])
    d1 = np.concatenate([[math.sqrt(p * p + m1 * m1)], p * n])
    d2 = np.concatenate([[math.sqrt(p * p + m2 * m2)], -p * n])
    beta = parent[1:] / parent[0]
    d1, d2 = boost(d1, beta), boost(d2, beta)
    # put any rounding residue on the second daughter so the sum is the parent
    d2 = d2 + (parent - d1 - d2)
    return d1, d2


@dataclass
class DecayConfig:
    n_samples: int = 8000
    higgs_mass: float = 125.0
    higgs_width: float = 1.5
    z_mass: float = 91.19
    z_width: float = 2.5
    zstar_mass_range: tuple[float, float] = (12.0, 40.0)
    background_4body_mass_range: tuple[float, float] = (80.0, 250.0)
    mean_pt: float = 20.0
    seed: int = 0
    train_fraction: float = 0.75
    max_resample: int = 1000

    def __post_init__(self):
        for name in ("zstar_mass_range", "background_4body_mass_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} must be ordered and non-negative")
            setattr(self, name, (float(lo), float(hi)))
        if self.n_samples < 2:
            raise ValueError("need at least two samples so both classes appear")


def _parent_at_rest_then_kicked(mass: float, mean_pt: float, rng: np.random.Generator) -> np.ndarray:
    pt = rng.exponential(mean_pt) if mean_pt > 0 else 0.0
    phi = rng.uniform(0.0, 2.0 * np.pi)
    px, py = pt * math.cos(phi), pt * math.sin(phi)
    return np.array([math.sqrt(mass * mass + pt * pt), px, py, 0.0])


def _breit_wigner(rng, mass, width):
    return mass + 0.5 * width * math.tan(math.pi * (rng.random() - 0.5))


def _four_leptons(parent, m_a, m_b, rng):
    za, zb = two_body_decay(parent, m_a, m_b, rng)
    l1, l2 = two_body_decay(za, 0.0, 0.0, rng)
    l3, l4 = two_body_decay(zb, 0.0, 0.0, rng)
    return np.stack([l1, l2, l3, l4])


def _signal_event(cfg: DecayConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    for _ in range(cfg.max_resample):
        m_h = cfg.higgs_mass + (rng.normal(0.0, cfg.higgs_width) if cfg.higgs_width > 0 else 0.0)
        m_z = _breit_wigner(rng, cfg.z_mass, cfg.z_width)
        m_zs = rng.uniform(*cfg.zstar_mass_range)
        if 0 < m_z and m_z + m_zs < m_h:
            parent = _parent_at_rest_then_kicked(m_h, cfg.mean_pt, rng)
            return _four_leptons(parent, m_z, m_zs, rng), parent
    raise GenerationError(f"no kinematically allowed signal event in {cfg.max_resample} tries")


def _background_event(cfg: DecayConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    M = rng.uniform(*cfg.background_4body_mass_range)
    lo, hi = cfg.zstar_mass_range
    m_b = rng.uniform(lo, min(hi, 0.5 * M))
    for _ in range(cfg.max_resample):
        m_a = _breit_wigner(rng, cfg.z_mass, cfg.z_width)
        if 0 < m_a and m_a + m_b < M:
            break
    else:
        # below the Z-like threshold: off-shell intermediate
        m_a = rng.uniform(m_b, M - m_b)
    parent = _parent_at_rest_then_kicked(M, cfg.mean_pt, rng)
    return _four_leptons(parent, m_a, m_b, rng), parent


def generate_decays(config: DecayConfig, return_parents: bool = False):
    """Signal H -> Z Z* -> 4l (+1) against a flat-mass four-lepton continuum (-1).

    Each event is four massless lepton four-vectors (E, px, py, pz) in GeV,
    shuffled so lepton order carries no information.
    """
    rng = np.random.default_rng(config.seed)
    labels = _balanced_labels(config.n_samples, rng)
    events = np.empty((config.n_samples, 4, 4))
    parents = np.empty((config.n_samples, 4))
    for i, y in enumerate(labels):
        ev, parent = _signal_event(config, rng) if y == 1 else _background_event(config, rng)
        events[i] = ev[rng.permutation(4)]
        parents[i] = parent
    train, test = _shuffle_split(config.n_samples, config.train_fraction)
    ds = LabeledDataset(events, labels, train, test)
    return (ds, parents) if return_parents else ds


def four_body_mass(points: np.ndarray) -> np.ndarray:
    return invariant_mass(np.asarray(points).sum(axis=-2))


def mass_cut_scores(dataset: LabeledDataset | np.ndarray, higgs_mass: float = 125.0) -> np.ndarray:
    """-|m_4l - m_H|: thresholding sweeps a symmetric window around the Higgs mass."""
    pts = dataset.points if isinstance(dataset, LabeledDataset) else np.asarray(dataset)
    return -np.abs(four_body_mass(pts) - higgs_mass)


# --- CSV ---------------------------------------------------------------------

_COORD = re.compile(r"^p(\d+)_(\d+)$")


def write_csv(dataset: LabeledDataset, path) -> None:
    """Columns p{i}_{k} (point i, coordinate k), label, split."""
    N, n, d = dataset.points.shape
    split = np.empty(N, dtype=object)
    split[dataset.train_idx] = "train"
    split[dataset.test_idx] = "test"
    header = [f"p{i}_{k}" for i in range(n) for k in range(d)] + ["label", "split"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for pts, y, s in zip(dataset.points, dataset.labels, split):
            w.writerow([repr(float(v)) for v in pts.reshape(-1)] + [int(y), s])


def read_csv(path) -> LabeledDataset:
    """Parse the layout written by :func:`write_csv`; the split column is optional (default train)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(1, "empty file") from None
        if "label" not in header:
            raise ParseError(1, "missing 'label' column")
        coords = {}
        for col, name in enumerate(header):
            m = _COORD.match(name)
            if m:
                coords[(int(m.group(1)), int(m.group(2)))] = col
            elif name not in ("label", "split"):
                raise ParseError(1, f"unexpected column {name!r}")
        if not coords:
            raise ParseError(1, "no p{i}_{k} coordinate columns")
        n = max(i for i, _ in coords) + 1
        d = max(k for _, k in coords) + 1
        if len(coords) != n * d:
            raise ParseError(1, f"coordinate columns do not form a full {n}x{d} grid")
        order = [coords[(i, k)] for i in range(n) for k in range(d)]
        y_col = header.index("label")
        s_col = header.index("split") if "split" in header else None

        points, labels, splits = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = np.array([float(row[c]) for c in order])
                y = int(float(row[y_col]))
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            if not np.all(np.isfinite(vals)):
                raise ParseError(line, "non-finite coordinate")
            if y not in (-1, 1):
                raise ParseError(line, f"label must be -1 or +1, got {y}")
            s = row[s_col].strip() if s_col is not None else "train"
            if s not in ("train", "test"):
                raise ParseError(line, f"split must be train or test, got {s!r}")
            points.append(vals.reshape(n, d))
            labels.append(y)
            splits.append(s)
    if not points:
        raise ParseError(2, "no data rows")
    splits = np.array(splits)
    return LabeledDataset(np.stack(points), np.array(labels), np.flatnonzero(splits == "train"),
                          np.flatnonzero(splits == "test"))


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(dataset: LabeledDataset, csv_path, config, manifest_path) -> dict:
    """JSON sidecar: generator config echo, counts and the CSV's sha256."""
    cfg = asdict(config) if config is not None and hasattr(config, "__dataclass_fields__") else config
    manifest = {
        "config": cfg,
        "seed": None if cfg is None else cfg.get("seed"),
        "counts": {
            "total": len(dataset),
            "train": int(len(dataset.train_idx)),
            "test": int(len(dataset.test_idx)),
            "positive": int(np.sum(dataset.labels == 1)),
            "negative": int(np.sum(dataset.labels == -1)),
        },
        "shape": list(dataset.points.shape[1:]),
        "csv": str(Path(csv_path).name),
        "sha256": file_checksum(csv_path),
    }
    Path(manifest_path).write_text(json.dumps(manifest, indent=2, default=list))
    return manifest
