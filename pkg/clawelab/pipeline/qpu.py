"""
Virtual noisy QPU.

Circuits evolve exactly at density-matrix level. Single-qubit gates, state
preparation and measurement are noiseless; each CNOT is followed by the noise
model's channel. Measurement returns ShotRecords, either multinomial counts or,
in shot-free mode, the exact outcome probabilities.
"""

import hashlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import (
    DEFAULT_SEED,
    DEFAULT_SHOTS,
    JOB_CAPACITY,
    MAX_WORKERS,
    VALIDITY_TOL,
)
from ..errors import ChannelError, InvalidStateError, JobTooLargeError
from .channels import (
    KrausChannel,
    apply_kraus,
    compose_kraus,
    depolarize_array,
    is_cptp,
    pauli_depolarizing_channel,
    unitary_channel,
    unitary_superoperator,
    vectorize,
)
from .circuits import (
    Circuit,
    Gate,
    circuit_to_text,
    circuit_unitary,
    embed_operator,
    embedded_gate,
    randomized_compile,
)
from .seeds import derive_seed
from .states import DensityMatrix, Observable, basis_state, pauli_operator


# ---------- noise models ----------

@dataclass(frozen=True)
class Ideal:
    def after_cnot(self, rho: np.ndarray, g: Gate, slot: int, n_qubits: int) -> np.ndarray:
        return rho


@dataclass(frozen=True)
class GlobalConstant:
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ChannelError(f"global noise strength must lie in [0, 1], got {self.epsilon}")

    def after_cnot(self, rho: np.ndarray, g: Gate, slot: int, n_qubits: int) -> np.ndarray:
        return depolarize_array(rho, self.epsilon)


@dataclass(frozen=True)
class GlobalVector:
    """Global depolarizing noise whose strength depends on the CNOT's slot."""

    epsilons: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if any(not 0.0 <= e <= 1.0 for e in self.epsilons):
            raise ChannelError("every global noise strength must lie in [0, 1]")

    def epsilon_for(self, slot: int) -> float:
        if not 0 <= slot < len(self.epsilons):
            raise ChannelError(f"entangling slot {slot} outside the noise vector of length {len(self.epsilons)}")
        return self.epsilons[slot]

    def after_cnot(self, rho: np.ndarray, g: Gate, slot: int, n_qubits: int) -> np.ndarray:
        return depolarize_array(rho, self.epsilon_for(slot))


@dataclass(frozen=True, eq=False)
class LocalAfterCNOT:
    """
    Noise on the CNOT's own qubit pair: a coherent ZZ overrotation
    exp(-i angle/2 ZZ) followed by a two-qubit Kraus channel.
    """

    channel: KrausChannel
    coherent_angle: float = 0.0
    _cache: Dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.channel.n_qubits != 2:
            raise ChannelError("local CNOT noise acts on the gate's two qubits")
        if not is_cptp(self.channel):
            raise ChannelError("local CNOT noise channel is not CPTP")

    def _kraus_on(self, qubits: Tuple[int, ...], n_qubits: int) -> List[np.ndarray]:
        key = (qubits, n_qubits)
        if key not in self._cache:
            rotation = np.diag(np.exp(-0.5j * self.coherent_angle * np.diag(pauli_operator("ZZ")).real))
            noisy = compose_kraus(self.channel, unitary_channel(rotation))
            self._cache[key] = [embed_operator(op, qubits, n_qubits) for op in noisy.kraus]
        return self._cache[key]

    def after_cnot(self, rho: np.ndarray, g: Gate, slot: int, n_qubits: int) -> np.ndarray:
        return apply_kraus(self._kraus_on(g.qubits, n_qubits), rho)


NoiseModel = Union[Ideal, GlobalConstant, GlobalVector, LocalAfterCNOT]


def local_after_cnot(p: float = 0.01, coherent_angle: float = 0.1) -> LocalAfterCNOT:
    return LocalAfterCNOT(pauli_depolarizing_channel(2, p), coherent_angle)


def global_vector_from_runs(runs: Sequence[Tuple[float, int]]) -> GlobalVector:
    """Noise vector from (epsilon, number of CNOT slots) runs, e.g. [(0.01, 10), (0.04, 10)]."""
    epsilons = []
    for epsilon, count in runs:
        epsilons.extend([epsilon] * int(count))
    return GlobalVector(tuple(epsilons))


def linear_drift(start: float, stop: float, n_slots: int) -> GlobalVector:
    return GlobalVector(tuple(np.linspace(start, stop, n_slots)))


# ---------- evolution ----------

def evolve_array(c: Circuit, noise: NoiseModel, rho: np.ndarray) -> np.ndarray:
    """Linear evolution of a raw 2^n x 2^n array through the noisy circuit."""
    ordinal = 0
    for g in c.gates:
        unitary = embedded_gate(g, c.n_qubits)
        rho = unitary @ rho @ unitary.conj().T
        if g.is_entangling:
            slot = g.slot if g.slot is not None else ordinal
            rho = noise.after_cnot(rho, g, slot, c.n_qubits)
            ordinal += 1
    return rho


def evolve(c: Circuit, noise: NoiseModel, rho0: DensityMatrix) -> DensityMatrix:
    if c.n_qubits != rho0.n_qubits:
        raise InvalidStateError(f"circuit has {c.n_qubits} qubits, state has {rho0.n_qubits}")
    return DensityMatrix(c.n_qubits, evolve_array(c, noise, rho0.data))


def circuit_superoperator(c: Circuit, noise: NoiseModel) -> np.ndarray:
    """Column-stacked superoperator of the noisy circuit."""
    dim = 2 ** c.n_qubits
    superop = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j in range(dim):
        for i in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            superop[:, i + j * dim] = vectorize(evolve_array(c, noise, unit))
    return superop


def effective_noise_superoperator(c: Circuit, noise: NoiseModel) -> np.ndarray:
    """The noisy circuit's superoperator with the ideal unitary divided out."""
    return circuit_superoperator(c, noise) @ unitary_superoperator(circuit_unitary(c)).conj().T


def rco_average_superoperator(c: Circuit, noise: NoiseModel, n_instances: int, rng_seed: int) -> np.ndarray:
    """Effective noise channel averaged over randomized-compiling instances of the circuit."""
    total = 0
    for k in range(n_instances):
        total = total + effective_noise_superoperator(randomized_compile(c, derive_seed(rng_seed, "rco", k)), noise)
    return total / n_instances


# ---------- measurement ----------

@dataclass(frozen=True)
class ShotRecord:
    """
    Outcome counts of one circuit. A shot-free record has no counts and holds
    the exact outcome probabilities instead.
    """

    counts: Dict[str, int]
    n_shots: int
    probabilities: Optional[Dict[str, float]] = None

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.n_shots:
            raise InvalidStateError(f"counts sum to {total}, expected {self.n_shots}")
        if self.probabilities is None and self.n_shots < 1:
            raise InvalidStateError("a shot record needs at least one shot")

    @property
    def is_exact(self) -> bool:
        return self.probabilities is not None

    def frequencies(self) -> Dict[str, float]:
        if self.probabilities is not None:
            return dict(self.probabilities)
        return {b: n / self.n_shots for b, n in self.counts.items()}


def _bitstrings(n_qubits: int) -> List[str]:
    return [format(i, f"0{n_qubits}b") for i in range(2 ** n_qubits)]


def _outcome_probabilities(rho: np.ndarray) -> np.ndarray:
    probs = np.real(np.diag(rho))
    if probs.min() < -VALIDITY_TOL:
        raise InvalidStateError(f"negative outcome probability {probs.min():.3e}")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def exact_record(rho: DensityMatrix, pre_measurement: Optional[Circuit] = None) -> ShotRecord:
    data = rho.data if pre_measurement is None else evolve_array(pre_measurement, Ideal(), rho.data)
    probs = _outcome_probabilities(data)
    return ShotRecord({}, 0, dict(zip(_bitstrings(rho.n_qubits), probs.tolist())))


def sample_shots(rho: DensityMatrix, pre_measurement: Optional[Circuit], n_shots: int, rng_seed: int) -> ShotRecord:
    """
    Apply the basis-change circuit noiselessly and draw n_shots computational-basis outcomes.
    """
    if n_shots < 1:
        raise InvalidStateError(f"n_shots must be >= 1, got {n_shots}")
    data = rho.data if pre_measurement is None else evolve_array(pre_measurement, Ideal(), rho.data)
    probs = _outcome_probabilities(data)
    draws = np.random.default_rng(rng_seed).multinomial(n_shots, probs)
    labels = _bitstrings(rho.n_qubits)
    return ShotRecord({labels[i]: int(n) for i, n in enumerate(draws) if n > 0}, n_shots)


def estimate_from_counts(rec: ShotRecord, weight: Callable[[str], float]) -> float:
    """Empirical mean of a diagonal observable given as a weight per bitstring."""
    return float(sum(weight(b) * f for b, f in rec.frequencies().items()))


def diagonal_weight(observable: Observable) -> Callable[[str], float]:
    if not observable.is_diagonal:
        raise InvalidStateError(
            f"observable {observable.label!r} is not diagonal; measure it after a basis change"
        )
    diagonal = observable.diagonal()
    return lambda bits: diagonal[int(bits, 2)]


def merge_records(records: Sequence[ShotRecord]) -> ShotRecord:
    """Pool counts of several executions; exact records are averaged."""
    if not records:
        raise InvalidStateError("nothing to merge")
    if all(r.is_exact for r in records):
        pooled = Counter()
        for r in records:
            pooled.update(r.probabilities)
        return ShotRecord({}, 0, {b: p / len(records) for b, p in pooled.items()})
    if any(r.is_exact for r in records):
        raise InvalidStateError("cannot merge shot records with exact records")
    pooled = Counter()
    for r in records:
        pooled.update(r.counts)
    return ShotRecord(dict(pooled), sum(r.n_shots for r in records))


def circuit_digest(c: Circuit) -> str:
    return hashlib.sha256(circuit_to_text(c).encode("utf-8")).hexdigest()


def circuit_seeds(circuits: Sequence[Circuit], base_seed: int) -> List[int]:
    """Seeds keyed by circuit content and occurrence, so they do not depend on order."""
    seen = Counter()
    seeds = []
    for c in circuits:
        digest = circuit_digest(c)
        seeds.append(derive_seed(base_seed, digest, seen[digest]))
        seen[digest] += 1
    return seeds


def run_job(
    circuits: Sequence[Circuit],
    noise: NoiseModel,
    rho0: Optional[DensityMatrix] = None,
    n_shots: Union[int, Sequence[int]] = DEFAULT_SHOTS,
    rng_seed: int = DEFAULT_SEED,
    pre_measurement: Optional[Circuit] = None,
    shot_free: bool = False,
    seeds: Optional[Sequence[int]] = None,
    max_workers: int = MAX_WORKERS,
) -> List[ShotRecord]:
    """
    Execute one backend job of at most JOB_CAPACITY circuits.

    Args:
        circuits: Circuits on a common register
        noise: Noise model attached to every CNOT
        rho0: Input state, |0...0> when omitted
        n_shots: Shots for every circuit, or one count per circuit
        rng_seed: Job seed; per-circuit seeds derive from it unless `seeds` is given
        pre_measurement: Basis change applied noiselessly before readout
        shot_free: Return exact outcome probabilities instead of counts

    Returns:
        One ShotRecord per circuit, in input order
    """
    if len(circuits) > JOB_CAPACITY:
        raise JobTooLargeError(f"a job holds at most {JOB_CAPACITY} circuits, got {len(circuits)}")
    if not circuits:
        return []
    if rho0 is None:
        rho0 = basis_state("0" * circuits[0].n_qubits)
    shots = [n_shots] * len(circuits) if isinstance(n_shots, (int, np.integer)) else list(n_shots)
    if len(shots) != len(circuits):
        raise JobTooLargeError(f"got {len(shots)} shot counts for {len(circuits)} circuits")
    seeds = circuit_seeds(circuits, rng_seed) if seeds is None else list(seeds)

    def execute_one(index: int) -> ShotRecord:
        final = evolve(circuits[index], noise, rho0)
        if shot_free:
            return exact_record(final, pre_measurement)
        return sample_shots(final, pre_measurement, shots[index], seeds[index])

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        return list(pool.map(execute_one, range(len(circuits))))


def split_shots(n_shots: int, parts: int) -> List[int]:
    base, extra = divmod(n_shots, parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


@dataclass(frozen=True, eq=False)
class VirtualQPU:
    """
    Backend context: noise model, shot budget, seed and randomized-compiling settings.

    With rco_instances > 0 every circuit runs as that many randomized-compiling
    instances sharing its shots, and the counts are pooled.
    """

    noise: NoiseModel = field(default_factory=Ideal)
    n_shots: int = DEFAULT_SHOTS
    shot_free: bool = False
    rng_seed: int = DEFAULT_SEED
    rco_instances: int = 0
    max_workers: int = MAX_WORKERS
    initial_state: Optional[DensityMatrix] = None

    def execute(
        self,
        circuits: Sequence[Circuit],
        pre_measurement: Optional[Circuit] = None,
        label: str = "",
    ) -> List[ShotRecord]:
        """Run any number of circuits, split into jobs of at most JOB_CAPACITY."""
        base_seed = derive_seed(self.rng_seed, label)
        per_circuit = circuit_seeds(circuits, base_seed)

        tasks: List[Tuple[int, Circuit, int, int]] = []
        for index, (c, seed) in enumerate(zip(circuits, per_circuit)):
            if self.rco_instances > 0:
                instances = min(self.rco_instances, self.n_shots) if not self.shot_free else self.rco_instances
                for k, shots in enumerate(split_shots(self.n_shots, instances)):
                    compiled = randomized_compile(c, derive_seed(seed, "rco", k))
                    tasks.append((index, compiled, shots, derive_seed(seed, "shots", k)))
            else:
                tasks.append((index, c, self.n_shots, seed))

        records: List[ShotRecord] = []
        for start in range(0, len(tasks), JOB_CAPACITY):
            chunk = tasks[start:start + JOB_CAPACITY]
            records.extend(run_job(
                [t[1] for t in chunk],
                self.noise,
                rho0=self.initial_state,
                n_shots=[t[2] for t in chunk],
                pre_measurement=pre_measurement,
                shot_free=self.shot_free,
                seeds=[t[3] for t in chunk],
                max_workers=self.max_workers,
            ))

        grouped: Dict[int, List[ShotRecord]] = {}
        for (index, _, _, _), record in zip(tasks, records):
            grouped.setdefault(index, []).append(record)
        return [
            grouped[i][0] if len(grouped[i]) == 1 else merge_records(grouped[i])
            for i in range(len(circuits))
        ]

    def measure_observable(
        self,
        circuits: Sequence[Circuit],
        observable: Observable,
        label: str = "",
    ) -> Tuple[List[float], List[ShotRecord]]:
        """Expectation of a diagonal observable on each circuit's output, plus the records."""
        weight = diagonal_weight(observable)
        records = self.execute(circuits, label=label)
        return [estimate_from_counts(r, weight) for r in records], records
