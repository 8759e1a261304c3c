"""
Quantum channels: Kraus sets, the global depolarizing map, and superoperators.

Superoperators use column stacking: vec(rho) = rho.reshape(-1, order="F"), so
vec(A rho B) = (B^T kron A) vec(rho) and a Kraus set {M_k} has superoperator
sum_k conj(M_k) kron M_k. Distances between superoperators are Frobenius norms.
"""

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple, Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from ..config import VALIDITY_TOL
from ..errors import ChannelError
from .states import DensityMatrix, PAULIS, is_unitary, pauli_operator, qubits_for_dimension

_TWIRL_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """
    A channel in operator-sum form, rho -> sum_k M_k rho M_k^dagger.

    Complete positivity holds for any Kraus set; trace preservation is checked
    by is_cptp and enforced when the channel is applied.
    """

    n_qubits: int
    kraus: Tuple[np.ndarray, ...]

    def __post_init__(self):
        dim = 2 ** self.n_qubits
        if not self.kraus:
            raise ChannelError("a Kraus channel needs at least one operator")
        ops = []
        for k, op in enumerate(self.kraus):
            op = np.array(op, dtype=complex, copy=True)
            if op.shape != (dim, dim):
                raise ChannelError(f"Kraus operator {k} has shape {op.shape}, expected {(dim, dim)}")
            op.setflags(write=False)
            ops.append(op)
        object.__setattr__(self, "kraus", tuple(ops))

    @classmethod
    def from_operators(cls, kraus: Sequence[np.ndarray]) -> "KrausChannel":
        return cls(qubits_for_dimension(np.asarray(kraus[0]).shape[0]), tuple(kraus))

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


@dataclass(frozen=True)
class DepolarizingSpec:
    n_qubits: int
    epsilon: float

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ChannelError(f"qubit count must be >= 1, got {self.n_qubits}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ChannelError(f"depolarizing strength must lie in [0, 1], got {self.epsilon}")


class DepolarizingFit(NamedTuple):
    epsilon: float
    residual: float


# ---------- Kraus builders ----------

def unitary_channel(unitary: np.ndarray) -> KrausChannel:
    unitary = np.asarray(unitary, dtype=complex)
    if not is_unitary(unitary):
        raise ChannelError("matrix is not unitary")
    return KrausChannel.from_operators([unitary])


def bit_flip_channel(p: float) -> KrausChannel:
    if not 0.0 <= p <= 1.0:
        raise ChannelError("p must be in [0, 1]")
    return KrausChannel(1, (np.sqrt(1 - p) * PAULIS["I"], np.sqrt(p) * PAULIS["X"]))


def pauli_depolarizing_channel(n_qubits: int, p: float) -> KrausChannel:
    """
    Depolarizing channel (1-p) rho + p I/2^n written with n-qubit Pauli Kraus operators.

    Args:
        n_qubits: Number of qubits the channel acts on
        p: Depolarizing probability in [0, 1]

    Returns:
        KrausChannel with 4^n operators
    """
    if not 0.0 <= p <= 1.0:
        raise ChannelError("p must be in [0, 1]")
    weight = p / 4 ** n_qubits
    ops = []
    for labels in product("IXYZ", repeat=n_qubits):
        label = "".join(labels)
        scale = 1 - p + weight if set(label) == {"I"} else weight
        ops.append(np.sqrt(scale) * pauli_operator(label))
    return KrausChannel(n_qubits, tuple(ops))


def compose_kraus(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """Channel applying `first` then `second`."""
    if first.n_qubits != second.n_qubits:
        raise ChannelError("cannot compose channels on different qubit counts")
    return KrausChannel(first.n_qubits, tuple(b @ a for a in first.kraus for b in second.kraus))


# ---------- Kraus application ----------

def is_cptp(channel: KrausChannel, tol: float = VALIDITY_TOL) -> bool:
    """True iff sum_k M_k^dagger M_k equals the identity within tol."""
    total = sum(op.conj().T @ op for op in channel.kraus)
    return bool(np.max(np.abs(total - np.eye(channel.dim))) <= tol)


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for op in kraus:
        out += op @ rho @ op.conj().T
    return out


def apply_channel(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if channel.n_qubits != rho.n_qubits:
        raise ChannelError(f"channel acts on {channel.n_qubits} qubits, state has {rho.n_qubits}")
    if not is_cptp(channel):
        raise ChannelError("channel is not trace preserving")
    return DensityMatrix(rho.n_qubits, apply_kraus(channel.kraus, rho.data))


# ---------- global depolarizing ----------

def depolarize_array(rho: np.ndarray, epsilon: float) -> np.ndarray:
    # linear form, also valid on traceless operators
    dim = rho.shape[0]
    return (1 - epsilon) * rho + epsilon * np.trace(rho) * np.eye(dim) / dim


def depolarize(spec: DepolarizingSpec, rho: DensityMatrix) -> DensityMatrix:
    """D rho = (1 - eps) rho + eps I/2^n, applied as the affine map."""
    if spec.n_qubits != rho.n_qubits:
        raise ChannelError(f"channel acts on {spec.n_qubits} qubits, state has {rho.n_qubits}")
    return DensityMatrix(rho.n_qubits, depolarize_array(rho.data, spec.epsilon))


def iterate_depolarize(epsilon: float, k: int) -> Tuple[float, float]:
    """
    Weights of k repeated depolarizing channels: rho -> signal*rho + floor*I/2^n.

    Returns:
        (signal, floor) with signal = (1-eps)^k and floor = eps * sum_{m<k} (1-eps)^m
    """
    if k < 0:
        raise ChannelError(f"iteration count must be >= 0, got {k}")
    if not 0.0 <= epsilon <= 1.0:
        raise ChannelError(f"depolarizing strength must lie in [0, 1], got {epsilon}")
    signal = (1 - epsilon) ** k
    floor = epsilon * sum((1 - epsilon) ** m for m in range(k))
    return signal, floor


# ---------- superoperators ----------

def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvectorize(vec: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(len(vec))))
    return np.asarray(vec).reshape(dim, dim, order="F")


def kraus_to_superoperator(channel: KrausChannel) -> np.ndarray:
    return sum(np.kron(op.conj(), op) for op in channel.kraus)


def unitary_superoperator(unitary: np.ndarray) -> np.ndarray:
    unitary = np.asarray(unitary, dtype=complex)
    return np.kron(unitary.conj(), unitary)


def depolarizing_superoperator(n_qubits: int, epsilon: float) -> np.ndarray:
    dim = 2 ** n_qubits
    identity_vec = vectorize(np.eye(dim, dtype=complex))
    return (1 - epsilon) * np.eye(dim * dim, dtype=complex) + epsilon * np.outer(identity_vec / dim, identity_vec)


def apply_superoperator(superop: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    if superop.shape != (rho.dim ** 2, rho.dim ** 2):
        raise ChannelError(f"superoperator shape {superop.shape} does not fit a {rho.n_qubits}-qubit state")
    return DensityMatrix(rho.n_qubits, unvectorize(superop @ vectorize(rho.data)))


def superoperator_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def is_trace_preserving(superop: np.ndarray, tol: float = 1e-6) -> bool:
    dim = int(round(np.sqrt(superop.shape[0])))
    identity_vec = vectorize(np.eye(dim, dtype=complex))
    return bool(np.max(np.abs(identity_vec @ superop - identity_vec)) <= tol)


def haar_unitary(dim: int, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Haar-random unitaries, shape (dim, dim) for size=1 else (size, dim, dim)."""
    draws = unitary_group.rvs(dim, size=size, random_state=rng)
    return np.asarray(draws).reshape((dim, dim) if size == 1 else (size, dim, dim))


def twirl_average(channel: KrausChannel, n_samples: int, rng_seed: int) -> np.ndarray:
    """
    Monte-Carlo Haar twirl of a channel: the average of rho -> U^dagger E(U rho U^dagger) U.

    Args:
        channel: Channel to twirl
        n_samples: Number of Haar unitaries
        rng_seed: Seed of the sampling stream

    Returns:
        Column-stacked superoperator of the averaged channel
    """
    if n_samples < 1:
        raise ChannelError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(rng_seed)
    dim = channel.dim
    superop = kraus_to_superoperator(channel)
    total = np.zeros_like(superop)

    remaining = n_samples
    while remaining > 0:
        batch = min(remaining, _TWIRL_CHUNK)
        unitaries = haar_unitary(dim, rng, size=batch).reshape(batch, dim, dim)
        forward = np.einsum("nab,ncd->nacbd", unitaries.conj(), unitaries).reshape(batch, dim * dim, dim * dim)
        backward = np.conj(np.transpose(forward, (0, 2, 1)))
        total += np.einsum("nij,jk,nkl->il", backward, superop, forward)
        remaining -= batch
    return total / n_samples


def haar_twirl_epsilon(channel: KrausChannel) -> float:
    """
    Exact strength of the depolarizing channel the Haar twirl of `channel` converges to.

    Equals 1 - (sum_k |Tr M_k|^2 - 1)/(d^2 - 1); for a unitary U this is
    1 - (|Tr U|^2 - 1)/(d^2 - 1).
    """
    dim = channel.dim
    overlap = sum(abs(np.trace(op)) ** 2 for op in channel.kraus)
    return float(1 - (overlap - 1) / (dim * dim - 1))


def extract_epsilon(superop: np.ndarray, n_qubits: int) -> DepolarizingFit:
    """
    Least-squares fit of rho -> (1-eps) rho + eps I/2^n to a superoperator.

    The depolarizing family is the line I + eps (P - I) with P = vec(I/d) vec(I)^T,
    so the fit is a projection onto P - I.
    """
    dim = 2 ** n_qubits
    superop = np.asarray(superop, dtype=complex)
    if superop.shape != (dim * dim, dim * dim):
        raise ChannelError(f"superoperator shape {superop.shape} does not fit {n_qubits} qubits")
    if not is_trace_preserving(superop):
        raise ChannelError("superoperator is not trace preserving within 1e-6")
    identity = np.eye(dim * dim, dtype=complex)
    direction = depolarizing_superoperator(n_qubits, 1.0) - identity
    epsilon = float(np.real(np.vdot(direction, superop - identity)) / np.real(np.vdot(direction, direction)))
    residual = superoperator_distance(superop, depolarizing_superoperator(n_qubits, epsilon))
    return DepolarizingFit(epsilon, residual)
