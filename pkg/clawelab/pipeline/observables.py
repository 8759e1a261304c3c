"""
Benchmark observables for the two-site Fermi-Hubbard model.

Qubit 0 carries spin up and qubit 1 spin down. The Bell-basis purity estimator
runs two copies of a 2-qubit circuit on a 4-qubit register, copy A on (0, 1)
and copy B on (2, 3), then a Bell stage CNOT(0->2), H(0) on the spin-up pair.
The singlet outcome is q0=1, q2=1 and Tr(rho_up^2) = 1 - 2 P(singlet).
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import InvalidStateError
from .circuits import Circuit, Gate, tag_entangling_slots
from .qpu import ShotRecord, diagonal_weight, estimate_from_counts
from .states import DensityMatrix, Observable, expectation, partial_trace, pure_state, purity

SPIN_QUBIT = {"up": 0, "down": 1}
PURITY_FLOOR = 0.5  # one-qubit marginal


@dataclass(frozen=True)
class RenyiEstimate:
    purity: float
    entropy: float  # nats


def electronic_overlap() -> Observable:
    """E_o = |00><00| + |11><11|."""
    return Observable.from_diagonal([1.0, 0.0, 0.0, 1.0], "E_o")


def overlap_calibration_state() -> DensityMatrix:
    """
    (|01> + |10>)/sqrt(2), the default calibration state of the overlap benchmark.

    The |++> preparation maps it to (|00> - |11>)/sqrt(2), where E_o = 1 is conserved
    by the x-zz and zz-x steps, so memory states never sit at the ITS value.
    """
    return pure_state(np.array([0, 1, 1, 0]) / np.sqrt(2))


def copy_swap() -> np.ndarray:
    """Permutation exchanging copy A (qubits 0, 1) with copy B (qubits 2, 3)."""
    swap = np.zeros((16, 16))
    for i in range(16):
        swap[((i & 3) << 2) | (i >> 2), i] = 1.0
    return swap


def bba_calibration_state() -> DensityMatrix:
    """
    (I - SWAP)/12 on the two copies, the default calibration state of the Rényi benchmark.

    It commutes with every U x U, so memory fragments built from two copies of the
    same circuit leave it unchanged and Pi stays at 2/3, away from the ITS value 1/2.
    """
    return DensityMatrix.from_array((np.eye(16) - copy_swap()) / 12)


def renyi_from_purity(value: float) -> RenyiEstimate:
    """Second Rényi entropy -ln(purity)/2 in nats."""
    if value <= 0:
        raise InvalidStateError(f"purity must be positive, got {value}")
    return RenyiEstimate(float(value), float(-0.5 * np.log(value)))


def clip_purity(value: float) -> Tuple[float, bool]:
    """Clip a one-qubit purity estimate into [1/2, 1]; the flag says whether it moved."""
    clipped = float(np.clip(value, PURITY_FLOOR, 1.0))
    return clipped, clipped != value


def renyi_direct(rho: DensityMatrix, spin: str = "up") -> RenyiEstimate:
    if rho.n_qubits != 2:
        raise InvalidStateError(f"expected a 2-qubit state, got {rho.n_qubits} qubits")
    if spin not in SPIN_QUBIT:
        raise InvalidStateError(f"spin must be 'up' or 'down', got {spin!r}")
    reduced = partial_trace(rho, [1 - SPIN_QUBIT[spin]])
    return renyi_from_purity(purity(reduced))


def _on_copy(g: Gate, offset: int) -> Gate:
    return Gate(g.kind, tuple(q + offset for q in g.qubits), g.theta)


def bba_circuit(base: Circuit) -> Circuit:
    """
    Two interleaved copies of a 2-qubit circuit followed by the Bell stage.
    Scalar depth is twice the base depth plus one.
    """
    if base.n_qubits != 2:
        raise InvalidStateError(f"BBA needs a 2-qubit base circuit, got {base.n_qubits} qubits")
    gates: List[Gate] = []
    for g in base.gates:
        gates.append(_on_copy(g, 0))
        gates.append(_on_copy(g, 2))
    gates.append(Gate("CNOT", (0, 2)))
    gates.append(Gate("H", (0,)))
    return tag_entangling_slots(Circuit(4, tuple(gates)))


def bba_boundaries(boundaries: Sequence[int]) -> List[int]:
    """Map fragment boundaries of a base circuit onto its interleaved BBA circuit."""
    return [2 * b for b in boundaries]


def bba_singlet_projector() -> Observable:
    weights = [1.0 if bits[0] == "1" and bits[2] == "1" else 0.0 for bits in (format(i, "04b") for i in range(16))]
    return Observable.from_diagonal(weights, "P_singlet")


def bba_purity_observable() -> Observable:
    """Pi = I - 2 P_singlet, whose expectation after the Bell stage is Tr(rho_up^2)."""
    singlet = bba_singlet_projector()
    return Observable(4, np.eye(16) - 2 * singlet.data, "BBA purity")


def bba_purity_from_counts(rec: ShotRecord) -> float:
    return estimate_from_counts(rec, diagonal_weight(bba_purity_observable()))


def bba_purity_exact(rho: DensityMatrix) -> float:
    return expectation(rho, bba_purity_observable())
