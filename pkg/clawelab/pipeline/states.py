"""
Dense density matrices and observables.

Qubit 0 is the most-significant bit of the basis index, so |q0 q1 ... q_{n-1}>
maps to index int("q0q1...", 2). Every module in the package follows this.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from ..config import MAX_SIM_QUBITS, VALIDITY_TOL
from ..errors import InvalidStateError

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def qubits_for_dimension(dim: int) -> int:
    """Return n for a dimension 2^n, raising InvalidStateError otherwise."""
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise InvalidStateError(f"dimension {dim} is not a power of two >= 2")
    if n > MAX_SIM_QUBITS:
        raise InvalidStateError(f"{n} qubits exceeds the dense simulation limit of {MAX_SIM_QUBITS}")
    return n


def _frozen(data: np.ndarray) -> np.ndarray:
    data = np.array(data, dtype=complex, copy=True)
    data.setflags(write=False)
    return data


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace Hermitian positive semi-definite matrix on n qubits."""

    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        dim = 2 ** self.n_qubits
        if self.n_qubits < 1 or data.shape != (dim, dim):
            raise InvalidStateError(
                f"expected a {dim}x{dim} matrix for {self.n_qubits} qubits, got shape {data.shape}"
            )
        trace = np.trace(data)
        if abs(trace - 1.0) > VALIDITY_TOL:
            raise InvalidStateError(f"trace is {trace.real:.3e}{trace.imag:+.3e}j, expected 1")
        if np.max(np.abs(data - data.conj().T)) > VALIDITY_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        lowest = np.linalg.eigvalsh(data).min()
        if lowest < -VALIDITY_TOL:
            raise InvalidStateError(f"density matrix has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, data: np.ndarray) -> "DensityMatrix":
        data = np.asarray(data)
        return cls(qubits_for_dimension(data.shape[0]), data)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def probabilities(self) -> np.ndarray:
        """Computational-basis outcome probabilities (the real diagonal)."""
        return np.real(np.diag(self.data)).copy()


@dataclass(frozen=True, eq=False)
class Observable:
    n_qubits: int
    data: np.ndarray
    label: str = ""

    def __post_init__(self):
        data = _frozen(self.data)
        dim = 2 ** self.n_qubits
        if data.shape != (dim, dim):
            raise InvalidStateError(
                f"observable {self.label!r}: expected {dim}x{dim}, got shape {data.shape}"
            )
        if np.max(np.abs(data - data.conj().T)) > VALIDITY_TOL:
            raise InvalidStateError(f"observable {self.label!r} is not Hermitian")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_diagonal(cls, weights: Sequence[float], label: str = "") -> "Observable":
        weights = np.asarray(weights, dtype=float)
        return cls(qubits_for_dimension(len(weights)), np.diag(weights), label)

    @property
    def is_diagonal(self) -> bool:
        return bool(np.max(np.abs(self.data - np.diag(np.diag(self.data)))) <= VALIDITY_TOL)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()


def pauli_operator(label: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, e.g. 'ZZ' or 'XI'."""
    try:
        return reduce(np.kron, [PAULIS[p] for p in label.upper()])
    except KeyError:
        raise InvalidStateError(f"invalid Pauli string {label!r}")


def pauli_observable(label: str) -> Observable:
    return Observable(len(label), pauli_operator(label), label.upper())


def pure_state(amplitudes: Sequence[complex]) -> DensityMatrix:
    """
    Build |psi><psi| from a normalized amplitude vector of length 2^n.
    """
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = qubits_for_dimension(len(psi))
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > VALIDITY_TOL:
        raise InvalidStateError(f"amplitudes are not normalized (norm^2 = {norm:.12f})")
    return DensityMatrix(n, np.outer(psi, psi.conj()))


def basis_state(bits: str) -> DensityMatrix:
    """Computational basis state from a bitstring, qubit 0 first."""
    if not bits or set(bits) - {"0", "1"}:
        raise InvalidStateError(f"invalid bitstring {bits!r}")
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return pure_state(psi)


def infinite_temperature(n: int) -> DensityMatrix:
    """The maximally mixed state identity/2^n."""
    if n < 1:
        raise InvalidStateError(f"qubit count must be >= 1, got {n}")
    dim = 2 ** n
    return DensityMatrix(n, np.eye(dim, dtype=complex) / dim)


def random_pure_state(n: int, rng: np.random.Generator) -> DensityMatrix:
    psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return pure_state(psi / np.linalg.norm(psi))


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(a.n_qubits + b.n_qubits, np.kron(a.data, b.data))


def partial_trace(rho: DensityMatrix, traced_qubits: Iterable[int]) -> DensityMatrix:
    """
    Trace out the given qubits, keeping the rest in their original order.

    Args:
        rho: State on n qubits
        traced_qubits: Indices to remove; must be distinct and leave at least one qubit

    Returns:
        Reduced DensityMatrix on the remaining qubits
    """
    traced = list(traced_qubits)
    n = rho.n_qubits
    if len(set(traced)) != len(traced):
        raise InvalidStateError(f"duplicate qubit indices in {traced}")
    if any(q < 0 or q >= n for q in traced):
        raise InvalidStateError(f"qubit indices {traced} out of range for {n} qubits")
    if len(traced) >= n:
        raise InvalidStateError("cannot trace out every qubit")
    if not traced:
        return rho

    letters = "abcdefghijklmnopqrstuvwxyzABCDEF"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for q in traced:
        cols[q] = rows[q]
    kept = [q for q in range(n) if q not in traced]
    out = "".join(rows[q] for q in kept) + "".join(cols[q] for q in kept)
    spec = "".join(rows) + "".join(cols) + "->" + out

    tensor_form = rho.data.reshape([2] * (2 * n))
    reduced = np.einsum(spec, tensor_form)
    dim = 2 ** len(kept)
    return DensityMatrix(len(kept), reduced.reshape(dim, dim))


def expectation(rho: DensityMatrix, observable: Observable) -> float:
    """Tr(rho O), real up to numerical residue."""
    if rho.n_qubits != observable.n_qubits:
        raise InvalidStateError(
            f"state has {rho.n_qubits} qubits but observable {observable.label!r} has {observable.n_qubits}"
        )
    value = np.einsum("ij,ji->", rho.data, observable.data)
    if abs(value.imag) > VALIDITY_TOL:
        raise InvalidStateError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def is_unitary(matrix: np.ndarray, tol: float = VALIDITY_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))) <= tol)


def apply_unitary(rho: DensityMatrix, unitary: np.ndarray) -> DensityMatrix:
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != rho.data.shape:
        raise InvalidStateError(f"unitary shape {unitary.shape} does not match state {rho.data.shape}")
    if not is_unitary(unitary):
        raise InvalidStateError("matrix is not unitary")
    return DensityMatrix(rho.n_qubits, unitary @ rho.data @ unitary.conj().T)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.einsum("ij,ji->", rho.data, rho.data)))
