"""
Gate-level circuits with scalar-depth accounting.

Scalar depth is the number of CNOT gates. A CNOT may carry a `slot` tag, its
ordinal position in the target computation; every transformation below keeps
the tag of the CNOT it was derived from, so noise that drifts along the target
computation follows the same positions inside calibration circuits.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import MAX_SIM_QUBITS
from ..errors import CircuitError
from .states import PAULIS

SINGLE_QUBIT_KINDS = ("I", "H", "X", "Y", "Z", "S", "Sdg", "RX", "RZ")
GATE_KINDS = SINGLE_QUBIT_KINDS + ("CNOT",)
ROTATION_KINDS = ("RX", "RZ")

_SELF_INVERSE = {"I", "H", "X", "Y", "Z", "CNOT"}
_PAULI_FROM_BITS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS_FROM_PAULI = {v: k for k, v in _PAULI_FROM_BITS.items()}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...]
    theta: Optional[float] = None
    slot: Optional[int] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        expected = 2 if self.kind == "CNOT" else 1
        if len(qubits) != expected:
            raise CircuitError(f"{self.kind} takes {expected} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise CircuitError(f"{self.kind} needs distinct qubits, got {qubits}")
        if any(q < 0 for q in qubits):
            raise CircuitError(f"negative qubit index in {qubits}")
        if self.kind in ROTATION_KINDS:
            if self.theta is None:
                raise CircuitError(f"{self.kind} needs an angle")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise CircuitError(f"{self.kind} takes no angle")
        if self.slot is not None and self.kind != "CNOT":
            raise CircuitError("only CNOT gates carry a slot tag")

    @property
    def is_entangling(self) -> bool:
        return self.kind == "CNOT"

    def inverse(self) -> "Gate":
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == "S":
            return replace(self, kind="Sdg")
        if self.kind == "Sdg":
            return replace(self, kind="S")
        return replace(self, theta=-self.theta)


def gate(kind: str, *qubits: int, theta: Optional[float] = None) -> Gate:
    return Gate(kind, tuple(qubits), theta)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError(f"circuit needs at least one qubit, got {self.n_qubits}")
        gates = tuple(self.gates)
        for g in gates:
            if max(g.qubits) >= self.n_qubits:
                raise CircuitError(f"{g.kind} on {g.qubits} is outside a {self.n_qubits}-qubit register")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)


def gate_matrix(g: Gate) -> np.ndarray:
    """Local matrix of a gate; for CNOT the first listed qubit is the control."""
    if g.kind in ("I", "X", "Y", "Z"):
        return PAULIS[g.kind]
    if g.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if g.kind == "S":
        return np.diag([1, 1j]).astype(complex)
    if g.kind == "Sdg":
        return np.diag([1, -1j]).astype(complex)
    if g.kind == "RX":
        c, s = np.cos(g.theta / 2), np.sin(g.theta / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if g.kind == "RZ":
        return np.diag([np.exp(-0.5j * g.theta), np.exp(0.5j * g.theta)])
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def embed_operator(op: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """
    Lift a k-qubit operator acting on `qubits` (in that order) to the full register.

    Args:
        op: 2^k x 2^k matrix
        qubits: Target qubit indices, qubit 0 is the most significant bit
        n_qubits: Register size

    Returns:
        2^n x 2^n matrix
    """
    qubits = list(qubits)
    rest = [q for q in range(n_qubits) if q not in qubits]
    order = qubits + rest
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    position = [order.index(q) for q in range(n_qubits)]
    axes = position + [n_qubits + p for p in position]
    dim = 2 ** n_qubits
    return full.reshape([2] * (2 * n_qubits)).transpose(axes).reshape(dim, dim)


@lru_cache(maxsize=4096)
def _embedded(kind: str, qubits: Tuple[int, ...], theta: Optional[float], n_qubits: int) -> np.ndarray:
    matrix = embed_operator(gate_matrix(Gate(kind, qubits, theta)), qubits, n_qubits)
    matrix.setflags(write=False)
    return matrix


def embedded_gate(g: Gate, n_qubits: int) -> np.ndarray:
    return _embedded(g.kind, g.qubits, g.theta, n_qubits)


def scalar_depth(c: Circuit) -> int:
    return sum(1 for g in c.gates if g.is_entangling)


def inverse(c: Circuit) -> Circuit:
    return Circuit(c.n_qubits, tuple(g.inverse() for g in reversed(c.gates)))


def power(c: Circuit, k: int) -> Circuit:
    if k < 1:
        raise CircuitError(f"power must be >= 1, got {k}")
    return Circuit(c.n_qubits, c.gates * k)


def concat(*circuits: Circuit) -> Circuit:
    if not circuits:
        raise CircuitError("nothing to concatenate")
    n = circuits[0].n_qubits
    if any(c.n_qubits != n for c in circuits):
        raise CircuitError("cannot concatenate circuits on different registers")
    return Circuit(n, tuple(g for c in circuits for g in c.gates))


def fragment(c: Circuit, boundaries: Sequence[int]) -> List[Circuit]:
    """
    Split a circuit at the given gate indices; each boundary starts a new fragment.
    """
    bounds = list(boundaries)
    if any(b <= 0 or b >= len(c.gates) for b in bounds):
        raise CircuitError(f"boundaries {bounds} must lie strictly inside 0..{len(c.gates)}")
    if any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise CircuitError(f"boundaries {bounds} must be strictly increasing")
    edges = [0] + bounds + [len(c.gates)]
    return [Circuit(c.n_qubits, c.gates[a:b]) for a, b in zip(edges, edges[1:])]


def qcna_fold(c: Circuit, round: int) -> Circuit:
    """Replace every CNOT with 2*round+1 copies of itself (noise scale 1, 3, 5 or 7)."""
    if round not in (0, 1, 2, 3):
        raise CircuitError(f"QCNA round must be 0..3, got {round}")
    folded = []
    for g in c.gates:
        folded.extend([g] * (2 * round + 1) if g.is_entangling else [g])
    return Circuit(c.n_qubits, tuple(folded))


def _conjugate_through_cnot(control_pauli: str, target_pauli: str) -> Tuple[str, str]:
    # CNOT P CNOT^dagger in symplectic form: x_t ^= x_c, z_c ^= z_t
    xc, zc = _BITS_FROM_PAULI[control_pauli]
    xt, zt = _BITS_FROM_PAULI[target_pauli]
    return _PAULI_FROM_BITS[(xc, zc ^ zt)], _PAULI_FROM_BITS[(xt ^ xc, zt)]


def randomized_compile(c: Circuit, rng_seed: int) -> Circuit:
    """
    Pauli-twirl every CNOT: a random Pauli pair goes in front, and the pair it
    becomes after passing through the CNOT goes behind, so the circuit unitary
    is unchanged up to global phase. Identity draws are kept as explicit I gates,
    giving exactly four single-qubit gates per CNOT.
    """
    rng = np.random.default_rng(rng_seed)
    out = []
    for g in c.gates:
        if not g.is_entangling:
            out.append(g)
            continue
        control, target = g.qubits
        pc, pt = (_PAULI_FROM_BITS[tuple(bits)] for bits in rng.integers(0, 2, size=(2, 2)))
        qc, qt = _conjugate_through_cnot(pc, pt)
        out.extend([
            Gate(pc, (control,)),
            Gate(pt, (target,)),
            g,
            Gate(qc, (control,)),
            Gate(qt, (target,)),
        ])
    return Circuit(c.n_qubits, tuple(out))


def tag_entangling_slots(c: Circuit, start: int = 0) -> Circuit:
    """Give the k-th CNOT the slot tag start + k."""
    tagged = []
    slot = start
    for g in c.gates:
        if g.is_entangling:
            tagged.append(replace(g, slot=slot))
            slot += 1
        else:
            tagged.append(g)
    return Circuit(c.n_qubits, tuple(tagged))


def circuit_unitary(c: Circuit) -> np.ndarray:
    if c.n_qubits > MAX_SIM_QUBITS:
        raise CircuitError(f"{c.n_qubits} qubits exceeds the dense limit of {MAX_SIM_QUBITS}")
    unitary = np.eye(2 ** c.n_qubits, dtype=complex)
    for g in c.gates:
        unitary = embedded_gate(g, c.n_qubits) @ unitary
    return unitary


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """|Tr(A^dagger B)|/d, which is 1 exactly when A and B agree up to a global phase."""
    return float(abs(np.trace(np.asarray(a).conj().T @ np.asarray(b))) / np.asarray(a).shape[0])


# ---------- text serialization ----------

def circuit_to_text(c: Circuit) -> str:
    """
    One gate per line, `KIND q[,q2][,theta]`, after a `QUBITS n` header.
    A tagged CNOT ends with ` @slot`.
    """
    lines = [f"QUBITS {c.n_qubits}"]
    for g in c.gates:
        fields = [str(q) for q in g.qubits]
        if g.theta is not None:
            fields.append(repr(g.theta))
        line = f"{g.kind} {','.join(fields)}"
        if g.slot is not None:
            line += f" @{g.slot}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    n_qubits = None
    gates = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "QUBITS":
                n_qubits = int(parts[1])
                continue
            kind = parts[0]
            fields = parts[1].split(",")
            slot = None
            if len(parts) > 2:
                if not parts[2].startswith("@"):
                    raise ValueError(f"unexpected token {parts[2]!r}")
                slot = int(parts[2][1:])
            n_wires = 2 if kind == "CNOT" else 1
            qubits = tuple(int(f) for f in fields[:n_wires])
            theta = float(fields[n_wires]) if len(fields) > n_wires else None
            gates.append(Gate(kind, qubits, theta, slot))
        except (IndexError, ValueError) as e:
            raise CircuitError(f"line {number}: cannot parse {raw!r} ({e})")
    if n_qubits is None:
        raise CircuitError("missing QUBITS header")
    return Circuit(n_qubits, tuple(gates))


def circuits_to_text(circuits: Iterable[Circuit]) -> str:
    return "\n".join(circuit_to_text(c) for c in circuits)
