"""Parameterized circuits: an ordered gate list plus shared parameter slots."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .statevector import Gate


class ArityError(ValueError):
    """Parameter vector length does not match the circuit's slot count."""


class CompositionError(ValueError):
    """Two circuits cannot be concatenated."""


@dataclass(frozen=True)
class ParamCircuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    n_params: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for t in g.targets:
                if t >= self.n_qubits:
                    raise IndexError(f"{g.kind} target {t} outside {self.n_qubits}-qubit register")
            if g.param_slot is not None and not 0 <= g.param_slot < self.n_params:
                raise ValueError(f"slot {g.param_slot} outside [0, {self.n_params})")

    @property
    def slot_map(self) -> dict[int, list[int]]:
        """slot -> indices of the gates reading it."""
        out: dict[int, list[int]] = {k: [] for k in range(self.n_params)}
        for i, g in enumerate(self.gates):
            if g.param_slot is not None:
                out[g.param_slot].append(i)
        return out

    def unused_slots(self) -> list[int]:
        return [k for k, idx in self.slot_map.items() if not idx]

    def gate_angles(self, params: Sequence[float] = ()) -> np.ndarray:
        """Per-gate angle array; NaN for gates without an angle."""
        params = np.asarray(params, dtype=np.float64).reshape(-1)
        if params.size != self.n_params:
            raise ArityError(f"circuit expects {self.n_params} parameters, got {params.size}")
        angles = np.full(len(self.gates), np.nan)
        for i, g in enumerate(self.gates):
            if g.param_slot is not None:
                angles[i] = params[g.param_slot]
            elif g.fixed_angle is not None:
                angles[i] = g.fixed_angle
        return angles

    def then(self, other: "ParamCircuit") -> "ParamCircuit":
        """Concatenate; ``other``'s slots are shifted past ours."""
        if other.n_qubits != self.n_qubits:
            raise CompositionError(f"cannot compose {self.n_qubits}-qubit and {other.n_qubits}-qubit circuits")
        shifted = [
            Gate(g.kind, g.targets, g.param_slot + self.n_params, None) if g.param_slot is not None else g
            for g in other.gates
        ]
        meta = {**self.metadata, **other.metadata}
        return ParamCircuit(self.n_qubits, self.gates + tuple(shifted), self.n_params + other.n_params, meta)

    def depth(self) -> int:
        """Greedy parallel-layer count over this gate list (no transpilation)."""
        front = [0] * self.n_qubits
        for g in self.gates:
            level = max(front[t] for t in g.targets) + 1
            for t in g.targets:
                front[t] = level
        return max(front, default=0)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "metadata": self.metadata,
            "gates": [g.to_dict() for g in self.gates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamCircuit":
        return cls(d["n_qubits"], tuple(Gate.from_dict(g) for g in d["gates"]), d["n_params"], d.get("metadata", {}))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "ParamCircuit":
        return cls.from_dict(json.loads(text))


def concat(circuits: Iterable[ParamCircuit]) -> ParamCircuit:
    circuits = list(circuits)
    if not circuits:
        raise CompositionError("nothing to concatenate")
    out = circuits[0]
    for c in circuits[1:]:
        out = out.then(c)
    return out
