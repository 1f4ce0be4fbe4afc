"""S_n acting on inner-product registers: induced qubit permutations and twirling.

A point permutation ``sigma`` sends the feature ``q_ij`` to slot
``q_sigma(i)sigma(j)``, so on the qubit register it acts as a qubit
relabeling that keeps the self block and the pair block closed. Conjugating a
Pauli string by such a relabeling only moves its support, which is what makes
twirling a pure orbit computation here.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np

from .statevector import CapacityError, PauliString, pauli_matrix

MAX_GROUP_POINTS = 6
MAX_DENSE_QUBITS = 10


class TwirlNotFactorizableError(ValueError):
    """Orbit members do not commute, so exp(-i theta T[G]) is not a product of gates."""


class BlockError(ValueError):
    """Seed generator support does not match the declared block."""


@dataclass(frozen=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"{img} is not a bijection on 0..{len(img) - 1}")
        object.__setattr__(self, "image", img)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, *cycles: Sequence[int], one_based: bool = True) -> "Permutation":
        """Build from cycle notation, e.g. ``from_cycles(3, (1, 2, 3))`` sends 1->2->3->1."""
        img = list(range(n))
        off = 1 if one_based else 0
        for cyc in cycles:
            cyc = [c - off for c in cyc]
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                img[a] = b
        return cls(tuple(img))

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    def compose(self, other: "Permutation") -> "Permutation":
        """``self o other``: apply ``other`` first."""
        return Permutation(tuple(self.image[other.image[i]] for i in range(self.n)))

    __matmul__ = compose

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(tuple(inv))

    def apply_to_points(self, points: np.ndarray) -> np.ndarray:
        """Move point ``i`` to position ``sigma(i)``."""
        pts = np.asarray(points)
        out = np.empty_like(pts)
        out[list(self.image)] = pts
        return out


@dataclass(frozen=True)
class InducedQubitPermutation:
    """Qubit relabeling of one block, local indices ``0..len-1``."""

    block: str
    qubit_map: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.qubit_map) != list(range(len(self.qubit_map))):
            raise ValueError("induced map is not a bijection")

    def compose(self, other: "InducedQubitPermutation") -> "InducedQubitPermutation":
        if other.block != self.block:
            raise BlockError("cannot compose permutations of different blocks")
        return InducedQubitPermutation(self.block, tuple(self.qubit_map[j] for j in other.qubit_map))

    def matrix(self) -> np.ndarray:
        """Permutation matrix P with P e_k = e_map(k) on the block's feature vector."""
        m = len(self.qubit_map)
        P = np.zeros((m, m))
        P[list(self.qubit_map), list(range(m))] = 1.0
        return P


def enumerate_group(n: int) -> list[Permutation]:
    if not 1 <= n <= MAX_GROUP_POINTS:
        raise CapacityError(f"S_n enumeration supports 1 <= n <= {MAX_GROUP_POINTS}, got {n}")
    return [Permutation(p) for p in permutations(range(n))]


@lru_cache(maxsize=None)
def _pair_index(n: int) -> dict[tuple[int, int], int]:
    return {(i, j): k for k, (i, j) in enumerate((i, j) for i in range(n) for j in range(i + 1, n))}


def induce_on_pairs(sigma: Permutation, n: int | None = None) -> InducedQubitPermutation:
    n = sigma.n if n is None else n
    idx = _pair_index(n)
    out = [0] * len(idx)
    for (i, j), k in idx.items():
        a, b = sigma(i), sigma(j)
        out[k] = idx[(min(a, b), max(a, b))]
    return InducedQubitPermutation("pair", tuple(out))


def induce_on_self(sigma: Permutation, n: int | None = None) -> InducedQubitPermutation:
    return InducedQubitPermutation("self", tuple(sigma.image))


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit positions of ``q_ii`` / ``q_ij`` for an ``n_points`` inner-product register."""

    n_points: int
    include_self: bool = True

    @property
    def n_self(self) -> int:
        return self.n_points if self.include_self else 0

    @property
    def n_pair(self) -> int:
        return self.n_points * (self.n_points - 1) // 2

    @property
    def n_qubits(self) -> int:
        return self.n_self + self.n_pair

    def self_qubit(self, i: int) -> int:
        if not self.include_self:
            raise BlockError("layout has no self block")
        return i

    def pair_qubit(self, i: int, j: int) -> int:
        if i == j:
            raise BlockError(f"({i}, {j}) is a self term")
        return self.n_self + _pair_index(self.n_points)[(min(i, j), max(i, j))]

    def self_qubits(self) -> list[int]:
        return list(range(self.n_self))

    def pair_qubits(self) -> list[int]:
        return list(range(self.n_self, self.n_qubits))

    def block_of(self, qubit: int) -> str:
        if not 0 <= qubit < self.n_qubits:
            raise IndexError(f"qubit {qubit} outside {self.n_qubits}-qubit register")
        return "self" if qubit < self.n_self else "pair"

    def register_map(self, sigma: Permutation) -> tuple[int, ...]:
        """Global qubit relabeling induced by ``sigma`` on both blocks."""
        out = list(range(self.n_qubits))
        if self.include_self:
            out[: self.n_self] = induce_on_self(sigma, self.n_points).qubit_map
        pair = induce_on_pairs(sigma, self.n_points).qubit_map
        for k, v in enumerate(pair):
            out[self.n_self + k] = self.n_self + v
        return tuple(out)


def basis_permutation(qubit_map: Sequence[int], n_qubits: int) -> np.ndarray:
    """Image of every computational basis index under a qubit relabeling."""
    src = np.arange(1 << n_qubits)
    dst = np.zeros_like(src)
    for a, b in enumerate(qubit_map):
        dst |= ((src >> a) & 1) << b
    return dst


def qubit_permutation_unitary(qubit_map: Sequence[int], n_qubits: int | None = None) -> np.ndarray:
    """Dense unitary U moving the state of qubit ``a`` onto qubit ``qubit_map[a]``.

    Satisfies ``U P_a U^dagger = P_{qubit_map[a]}`` for every single-qubit Pauli.
    """
    n = len(qubit_map) if n_qubits is None else n_qubits
    if n > MAX_DENSE_QUBITS + 2:
        raise CapacityError(f"dense permutation unitary limited to {MAX_DENSE_QUBITS + 2} qubits")
    dst = basis_permutation(qubit_map, n)
    src = np.arange(1 << n)
    U = np.zeros((1 << n, 1 << n))
    U[dst, src] = 1.0
    return U


@dataclass(frozen=True)
class TwirledGenerator:
    """Orbit average of a seed Pauli string; every member carries 1/|orbit|."""

    seed: PauliString
    orbit: tuple[PauliString, ...]
    n_qubits: int

    @property
    def coefficient(self) -> float:
        return 1.0 / len(self.orbit)

    def supports(self) -> set[tuple]:
        return {p.ops for p in self.orbit}

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=np.complex128)
        for p in self.orbit:
            out += pauli_matrix(p, self.n_qubits)
        return out

    def __repr__(self) -> str:
        terms = " + ".join(p.label() for p in self.orbit)
        return f"TwirledGenerator((1/{len(self.orbit)})*({terms}))"


def _check_block(seed: PauliString, layout: RegisterLayout, block: str) -> None:
    if block not in ("self", "pair", "both"):
        raise ValueError(f"block must be self, pair or both, got {block!r}")
    for q in seed.qubits:
        b = layout.block_of(q)
        if block != "both" and b != block:
            raise BlockError(f"seed {seed} touches the {b} block but block={block!r}")


def twirl(seed: PauliString, n: int, block: str = "pair", include_self: bool = True) -> TwirledGenerator:
    """Average ``seed`` over the induced action of S_n on the inner-product register."""
    layout = RegisterLayout(n, include_self)
    _check_block(seed, layout, block)
    base = seed.with_coefficient(1.0)
    seen: dict[tuple, PauliString] = {}
    for sigma in enumerate_group(n):
        img = base.relabel(layout.register_map(sigma))
        seen.setdefault(img.ops, img)
    orbit = tuple(p.with_coefficient(1.0 / len(seen)) for _, p in sorted(seen.items()))
    for i, a in enumerate(orbit):
        for b in orbit[i + 1 :]:
            if not a.commutes_with(b):
                raise TwirlNotFactorizableError(f"{a} and {b} do not commute")
    return TwirledGenerator(seed, orbit, layout.n_qubits)


def twirl_generator(gen: TwirledGenerator, n: int, include_self: bool = True) -> TwirledGenerator:
    """Twirl an already twirled generator (orbit-wise; used for idempotence checks)."""
    layout = RegisterLayout(n, include_self)
    acc: dict[tuple, float] = {}
    group = enumerate_group(n)
    for p in gen.orbit:
        for sigma in group:
            img = p.relabel(layout.register_map(sigma))
            acc[img.ops] = acc.get(img.ops, 0.0) + p.coefficient / len(group)
    orbit = tuple(PauliString(ops, c) for ops, c in sorted(acc.items()))
    return TwirledGenerator(gen.seed, orbit, layout.n_qubits)


def induced_unitaries(n: int, include_self: bool = True) -> list[np.ndarray]:
    layout = RegisterLayout(n, include_self)
    if layout.n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense check limited to {MAX_DENSE_QUBITS} qubits, register has {layout.n_qubits}")
    return [qubit_permutation_unitary(layout.register_map(s), layout.n_qubits) for s in enumerate_group(n)]


def _as_permutation(U: np.ndarray) -> np.ndarray | None:
    """Column images of a 0/1 permutation matrix, or None if ``U`` is not one."""
    perm = np.argmax(U, axis=0)
    cols = np.arange(U.shape[1])
    if np.array_equal(np.sort(perm), cols) and np.all(U[perm, cols] == 1) and np.count_nonzero(U) == len(cols):
        return perm
    return None


def max_commutator(matrix: np.ndarray, unitaries: Iterable[np.ndarray]) -> float:
    """Largest |entry| of [M, U] over ``unitaries``.

    Permutation matrices take an exact gather path: (M U) = M[:, perm] and
    (U M)[perm] = M, which avoids dense products on 10-qubit registers.
    """
    M = np.asarray(matrix)
    worst = 0.0
    for U in unitaries:
        perm = _as_permutation(U)
        if perm is None:
            comm = M @ U - U @ M
        else:
            UM = np.empty_like(M)
            UM[perm] = M
            comm = M[:, perm] - UM
        worst = max(worst, float(np.max(np.abs(comm))))
    return worst


def verify_equivariance(gen: TwirledGenerator | PauliString | np.ndarray, n: int, include_self: bool = True,
                        atol: float = 1e-12) -> bool:
    """True iff the generator commutes with every induced permutation unitary."""
    layout = RegisterLayout(n, include_self)
    if layout.n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense check limited to {MAX_DENSE_QUBITS} qubits, register has {layout.n_qubits}")
    if isinstance(gen, TwirledGenerator):
        M = gen.matrix()
    elif isinstance(gen, PauliString):
        M = pauli_matrix(gen, layout.n_qubits)
    else:
        M = np.asarray(gen)
    # U M U^T for a permutation matrix U is an index shuffle of M; comparing it
    # with M gives the same max-abs entry as the commutator, without dense products
    worst = 0.0
    for sigma in enumerate_group(n):
        dst = basis_permutation(layout.register_map(sigma), layout.n_qubits)
        conj = np.empty_like(M)
        conj[np.ix_(dst, dst)] = M
        worst = max(worst, float(np.max(np.abs(conj - M))))
    return worst < atol
