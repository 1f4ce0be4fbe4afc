"""Builders for the three QNN bodies: baseline, rotation-invariant and fully symmetric."""
from __future__ import annotations

from .circuit import CompositionError, ParamCircuit
from .encoding import n_invariant_features
from .statevector import CapacityError, Gate, PauliString
from .symmetry import MAX_GROUP_POINTS, RegisterLayout, TwirledGenerator, twirl


def hardware_efficient(n_qubits: int, layers: int, builder: str = "hardware_efficient") -> ParamCircuit:
    """``layers`` x [RY column, CNOT ladder q_k -> q_k+1] followed by a final RY column."""
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    gates: list[Gate] = []
    slot = 0
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), param_slot=slot))
            slot += 1
        for q in range(n_qubits - 1):
            gates.append(Gate("CNOT", (q, q + 1)))
    for q in range(n_qubits):
        gates.append(Gate("RY", (q,), param_slot=slot))
        slot += 1
    return ParamCircuit(n_qubits, tuple(gates), slot, {"builder": builder, "layers": layers})


def build_baseline(n_points: int, dim: int, layers: int) -> ParamCircuit:
    return hardware_efficient(n_points * dim, layers, "baseline")


def build_rotational(n_points: int, layers: int, include_self: bool = True) -> ParamCircuit:
    return hardware_efficient(n_invariant_features(n_points, include_self), layers, "rotational")


def twirled_layer(gen: TwirledGenerator, slot: int) -> list[Gate]:
    """Commuting rotations for exp(-i theta/2 * sum(orbit)), all on one slot."""
    gates = []
    for p in gen.orbit:
        letters = "".join(letter for _, letter in p.ops)
        if letters == "Y":
            gates.append(Gate("RY", p.qubits, param_slot=slot))
        elif letters == "ZZ":
            gates.append(Gate("RZZ", p.qubits, param_slot=slot))
        else:
            raise ValueError(f"no native gate for generator {p}")
    return gates


def symmetric_generators(n_points: int, include_self: bool = True) -> list[tuple[str, TwirledGenerator | None]]:
    """Twirled generators of one fully symmetric layer, in application order.

    ZZ blocks come first: a trailing diagonal ZZ layer would commute with the
    global Z observable and leave its slot inert. Entries are ``None`` where
    the seed does not exist (n_points = 2 has a single pair qubit), in which
    case the slot is kept but drives no gate.
    """
    layout = RegisterLayout(n_points, include_self)
    out: list[tuple[str, TwirledGenerator | None]] = []
    if include_self:
        seed = PauliString({layout.self_qubit(0): "Z", layout.self_qubit(1): "Z"})
        out.append(("ZZ_self", twirl(seed, n_points, "self", include_self)))
    if n_points >= 3:
        seed = PauliString({layout.pair_qubit(0, 1): "Z", layout.pair_qubit(0, 2): "Z"})
        out.append(("ZZ_pair", twirl(seed, n_points, "pair", include_self)))
    else:
        out.append(("ZZ_pair", None))
    if include_self:
        out.append(("Y_self", twirl(PauliString({layout.self_qubit(0): "Y"}), n_points, "self", include_self)))
    out.append(("Y_pair", twirl(PauliString({layout.pair_qubit(0, 1): "Y"}), n_points, "pair", include_self)))
    return out


def build_fully_symmetric(n_points: int, layers: int, include_self: bool = True) -> ParamCircuit:
    if not 2 <= n_points <= MAX_GROUP_POINTS:
        raise CapacityError(f"fully symmetric ansatz supports 2 <= n_points <= {MAX_GROUP_POINTS}")
    if layers < 0:
        raise ValueError(f"layers must be >= 0, got {layers}")
    layout = RegisterLayout(n_points, include_self)
    gens = symmetric_generators(n_points, include_self)
    gates: list[Gate] = []
    slot = 0
    for _ in range(layers):
        for _, gen in gens:
            if gen is not None:
                gates.extend(twirled_layer(gen, slot))
            slot += 1
    return ParamCircuit(
        layout.n_qubits,
        tuple(gates),
        slot,
        {"builder": "fully_symmetric", "layers": layers, "blocks": [name for name, _ in gens]},
    )


def assemble_model(encoder: ParamCircuit, ansatz: ParamCircuit) -> ParamCircuit:
    """Encoder (fixed angles only) followed by the ansatz."""
    if encoder.n_params:
        raise CompositionError("encoder fragment must not carry trainable slots")
    if encoder.n_qubits not in (0, ansatz.n_qubits):
        raise CompositionError(f"encoder has {encoder.n_qubits} qubits, ansatz has {ansatz.n_qubits}")
    if not encoder.gates:
        return ansatz
    return encoder.then(ansatz)


def build(kind: str, n_points: int, dim: int, layers: int, include_self: bool = True) -> ParamCircuit:
    if kind == "baseline":
        return build_baseline(n_points, dim, layers)
    if kind == "rotational":
        return build_rotational(n_points, layers, include_self)
    if kind == "fully_symmetric":
        return build_fully_symmetric(n_points, layers, include_self)
    raise ValueError(f"unknown model kind {kind!r}")
