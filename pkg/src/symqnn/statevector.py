"""Dense statevector simulation for the small gate set used by the QNN circuits.

Conventions:

- qubit 0 is the least-significant bit of the amplitude index;
- rotations are ``exp(-i * angle * G / 2)`` with ``G`` in {Y, Z, Z(x)Z};
- every routine accepts either a single state of shape ``(2**n,)`` or a batch
  of shape ``(batch, 2**n)``; gates act on the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

MAX_QUBITS = 24

ROTATIONS = frozenset({"RY", "RZ", "RZZ"})
FIXED = frozenset({"H", "CNOT", "SWAP"})
GATE_ARITY = {"H": 1, "RY": 1, "RZ": 1, "RZZ": 2, "CNOT": 2, "SWAP": 2}

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class CapacityError(ValueError):
    """Register or group size above the supported ceiling."""


class NumericalConsistencyError(ArithmeticError):
    """An expectation value came out with a non-negligible imaginary part."""


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    param_slot: int | None = None
    fixed_angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {GATE_ARITY[self.kind]} target(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise IndexError(f"negative qubit index in {self.targets}")
        if self.kind in ROTATIONS:
            if (self.param_slot is None) == (self.fixed_angle is None):
                raise ValueError(f"{self.kind} needs exactly one of param_slot / fixed_angle")
        elif self.param_slot is not None or self.fixed_angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "targets": list(self.targets)}
        if self.param_slot is not None:
            out["param_slot"] = self.param_slot
        if self.fixed_angle is not None:
            out["fixed_angle"] = self.fixed_angle
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "Gate":
        return cls(d["kind"], tuple(d["targets"]), d.get("param_slot"), d.get("fixed_angle"))


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis with a real coefficient.

    ``ops`` is stored as a sorted tuple of ``(qubit, letter)`` pairs so that
    instances hash and compare by support.
    """

    ops: tuple[tuple[int, str], ...]
    coefficient: float = 1.0

    def __init__(self, ops: Mapping[int, str] | tuple = (), coefficient: float = 1.0):
        items = ops.items() if isinstance(ops, Mapping) else ops
        norm = []
        for q, p in items:
            p = p.upper()
            if p not in "XYZ" or len(p) != 1:
                raise ValueError(f"unknown Pauli letter {p!r}")
            norm.append((int(q), p))
        qubits = [q for q, _ in norm]
        if len(set(qubits)) != len(qubits):
            raise ValueError("repeated qubit in Pauli string")
        object.__setattr__(self, "ops", tuple(sorted(norm)))
        object.__setattr__(self, "coefficient", float(coefficient))

    @classmethod
    def z_all(cls, n_qubits: int) -> "PauliString":
        return cls({q: "Z" for q in range(n_qubits)})

    @classmethod
    def z_sum(cls, n_qubits: int) -> list["PauliString"]:
        return [cls({q: "Z"}) for q in range(n_qubits)]

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    def as_dict(self) -> dict[int, str]:
        return dict(self.ops)

    def relabel(self, qubit_map: Mapping[int, int] | np.ndarray) -> "PauliString":
        return PauliString({int(qubit_map[q]): p for q, p in self.ops}, self.coefficient)

    def with_coefficient(self, c: float) -> "PauliString":
        return PauliString(self.ops, c)

    def commutes_with(self, other: "PauliString") -> bool:
        mine = dict(self.ops)
        clashes = sum(1 for q, p in other.ops if q in mine and mine[q] != p)
        return clashes % 2 == 0

    def label(self) -> str:
        return "".join(f"{p}{q}" for q, p in self.ops) or "I"

    def __repr__(self) -> str:
        return f"PauliString({self.coefficient:g}*{self.label()})"


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def init_state(n_qubits: int, batch: int | None = None) -> np.ndarray:
    """|0...0> on ``n_qubits`` qubits, optionally replicated ``batch`` times."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    shape = (1 << n_qubits,) if batch is None else (batch, 1 << n_qubits)
    state = np.zeros(shape, dtype=np.complex128)
    state[..., 0] = 1.0
    return state


def _view1(state: np.ndarray, q: int) -> np.ndarray:
    # (batch, high, bit q, low)
    return state.reshape(-1, state.shape[-1] >> (q + 1), 2, 1 << q)


def _view2(state: np.ndarray, a: int, b: int):
    """View with the two target bits as separate axes; returns (view, axis_a, axis_b)."""
    hi, lo = max(a, b), min(a, b)
    dim = state.shape[-1]
    v = state.reshape(-1, dim >> (hi + 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    return v, (2 if a == hi else 4), (2 if b == hi else 4)


def _index(axis_a: int, bit_a: int, axis_b: int, bit_b: int):
    idx = [slice(None)] * 6
    idx[axis_a] = bit_a
    idx[axis_b] = bit_b
    return tuple(idx)


def _apply_inplace(state: np.ndarray, kind: str, targets: tuple[int, ...], angle: float | None) -> None:
    if kind == "RZ":
        v = _view1(state, targets[0])
        v[:, :, 0, :] *= np.exp(-0.5j * angle)
        v[:, :, 1, :] *= np.exp(0.5j * angle)
    elif kind == "RY":
        v = _view1(state, targets[0])
        c, s = np.cos(0.5 * angle), np.sin(0.5 * angle)
        a0 = v[:, :, 0, :].copy()
        v[:, :, 0, :] *= c
        v[:, :, 0, :] -= s * v[:, :, 1, :]
        v[:, :, 1, :] *= c
        v[:, :, 1, :] += s * a0
    elif kind == "H":
        v = _view1(state, targets[0])
        a0 = v[:, :, 0, :].copy()
        v[:, :, 0, :] += v[:, :, 1, :]
        v[:, :, 1, :] -= a0
        v[:, :, 1, :] *= -1.0
        v *= _INV_SQRT2
    elif kind == "RZZ":
        v, ia, ib = _view2(state, *targets)
        same, diff = np.exp(-0.5j * angle), np.exp(0.5j * angle)
        v[_index(ia, 0, ib, 0)] *= same
        v[_index(ia, 1, ib, 1)] *= same
        v[_index(ia, 0, ib, 1)] *= diff
        v[_index(ia, 1, ib, 0)] *= diff
    elif kind == "CNOT":
        v, ic, it = _view2(state, *targets)
        x, y = _index(ic, 1, it, 0), _index(ic, 1, it, 1)
        tmp = v[x].copy()
        v[x] = v[y]
        v[y] = tmp
    elif kind == "SWAP":
        v, ia, ib = _view2(state, *targets)
        x, y = _index(ia, 0, ib, 1), _index(ia, 1, ib, 0)
        tmp = v[x].copy()
        v[x] = v[y]
        v[y] = tmp
    else:
        raise ValueError(f"unknown gate kind {kind!r}")


def _check_targets(gate: Gate, n: int) -> None:
    for t in gate.targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} outside register of {n} qubits")


def apply_gate(state: np.ndarray, gate: Gate, angle: float | None = None) -> np.ndarray:
    """Return a new state with ``gate`` applied.

    For slotted rotations ``angle`` is required; for fixed-angle rotations it
    overrides ``gate.fixed_angle`` when given.
    """
    n = n_qubits_of(state)
    _check_targets(gate, n)
    if gate.is_rotation:
        if angle is None:
            if gate.fixed_angle is None:
                raise ValueError(f"{gate.kind} on slot {gate.param_slot} needs an angle")
            angle = gate.fixed_angle
    out = np.array(state, dtype=np.complex128, copy=True)
    _apply_inplace(out, gate.kind, gate.targets, angle)
    return out


def run_gates(state: np.ndarray, gates, angles: np.ndarray) -> np.ndarray:
    """Apply ``gates`` with per-gate ``angles`` to ``state`` in place and return it.

    ``angles[k]`` is ignored for non-rotation gates. No validation; callers are
    expected to have checked targets once (see :class:`symqnn.circuit.ParamCircuit`).
    """
    if not state.flags.c_contiguous:
        raise ValueError("in-place gate application needs a C-contiguous buffer")
    for gate, angle in zip(gates, angles):
        _apply_inplace(state, gate.kind, gate.targets, angle)
    return state


def apply_circuit(state: np.ndarray, circuit, params=()) -> np.ndarray:
    """Apply a :class:`~symqnn.circuit.ParamCircuit` and return the new state."""
    n = n_qubits_of(state)
    if circuit.n_qubits != n:
        raise ValueError(f"circuit acts on {circuit.n_qubits} qubits, state has {n}")
    angles = circuit.gate_angles(params)
    out = np.array(state, dtype=np.complex128, copy=True)
    return run_gates(out, circuit.gates, angles)


_PARITY_CACHE: dict[int, np.ndarray] = {}


def parity_signs(n_qubits: int, qubits=None) -> np.ndarray:
    """(-1)**popcount(index & mask) over the register, as float64."""
    if qubits is None:
        if n_qubits not in _PARITY_CACHE:
            signs = np.ones(1, dtype=np.float64)
            for _ in range(n_qubits):
                signs = np.concatenate([signs, -signs])
            _PARITY_CACHE[n_qubits] = signs
        return _PARITY_CACHE[n_qubits]
    mask = 0
    for q in qubits:
        mask |= 1 << q
    bits = np.bitwise_count(np.arange(1 << n_qubits) & mask)
    return np.where(bits % 2 == 0, 1.0, -1.0)


def apply_pauli(state: np.ndarray, pauli: PauliString) -> np.ndarray:
    """``P |psi>`` without the coefficient."""
    n = n_qubits_of(state)
    flip = 0
    z_mask = 0
    n_y = 0
    for q, p in pauli.ops:
        if not 0 <= q < n:
            raise IndexError(f"Pauli acts on qubit {q} outside register of {n} qubits")
        if p in "XY":
            flip |= 1 << q
        if p in "YZ":
            z_mask |= 1 << q
        n_y += p == "Y"
    idx = np.arange(1 << n)
    # P|x> = i^{n_y} (-1)^{popcount(x & z_mask)} |x ^ flip>  (Y = i X Z)
    signs = np.where(np.bitwise_count(idx & z_mask) % 2 == 0, 1.0, -1.0)
    phase = 1j ** n_y
    out = np.empty_like(state, dtype=np.complex128)
    out[..., idx ^ flip] = phase * signs * state
    return out


def expectation(state: np.ndarray, observable: PauliString | list[PauliString]) -> float | np.ndarray:
    """<psi|O|psi> for a Pauli string (or a sum of them), real-valued.

    Batched states give an array of expectations.
    """
    if isinstance(observable, (list, tuple)):
        return sum(expectation(state, term) for term in observable)
    n = n_qubits_of(state)
    if all(p == "Z" for _, p in observable.ops):
        qubits = observable.qubits
        if any(not 0 <= q < n for q in qubits):
            raise IndexError(f"observable {observable} outside register of {n} qubits")
        signs = parity_signs(n) if len(qubits) == n else parity_signs(n, qubits)
        value = (np.abs(state) ** 2) @ signs
        return observable.coefficient * (float(value) if np.ndim(value) == 0 else value)
    raw = np.sum(np.conj(state) * apply_pauli(state, observable), axis=-1)
    if np.max(np.abs(np.imag(raw))) >= 1e-10:
        raise NumericalConsistencyError(f"imaginary part {np.max(np.abs(np.imag(raw))):.3e} in <{observable}>")
    value = observable.coefficient * np.real(raw)
    return float(value) if np.ndim(value) == 0 else value


def pauli_matrix(pauli: PauliString, n_qubits: int) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a Pauli string including its coefficient."""
    if n_qubits > 12:
        raise CapacityError("dense Pauli matrices limited to 12 qubits")
    eye = np.eye(1 << n_qubits, dtype=np.complex128)
    # columns of P are P|x>
    return pauli.coefficient * apply_pauli(eye.T, pauli).T


def norm(state: np.ndarray) -> float | np.ndarray:
    return np.sqrt(np.sum(np.abs(state) ** 2, axis=-1))
