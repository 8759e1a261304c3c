"""
Two-site Fermi-Hubbard benchmark: Hamiltonian, product-formula circuits, and
the exact-evolution oracle.

The rescaled Hamiltonian is H(t) = -(X0 + X1) + u(t)/2 Z0 Z1. One product-formula
substep applies exp(+i dt X) on each qubit, which is RX(-2 dt), and the ZZ block
CNOT(0,1) RZ(u dt) CNOT(0,1) = exp(-i u dt/2 ZZ), in one of four distinct orders.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from ..errors import CircuitError, ConvergenceWarning
from .circuits import Circuit, Gate, circuit_unitary, concat, tag_entangling_slots
from .states import DensityMatrix, Observable, pauli_operator, pure_state

# The two RX rotations commute, leaving four distinct orders of the three blocks.
DISTINCT_ORDERINGS: Tuple[str, ...] = ("x-zz", "zz-x", "x0-zz-x1", "x1-zz-x0")
_BLOCK_ORDER: Dict[str, Tuple[str, ...]] = {
    "x-zz": ("x0", "x1", "zz"),
    "zz-x": ("zz", "x0", "x1"),
    "x0-zz-x1": ("x0", "zz", "x1"),
    "x1-zz-x0": ("x1", "zz", "x0"),
}

GATES_PER_SUBSTEP = 5
PLUS_PLUS = np.full(4, 0.5, dtype=complex)


@dataclass(frozen=True)
class FHSchedule:
    u_tilde: Callable[[float], float]
    t_final: float
    description: str = ""
    constant_value: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.t_final) or self.t_final <= 0:
            raise CircuitError(f"t_final must be positive and finite, got {self.t_final}")
        samples = [self.u_tilde(t) for t in np.linspace(0.0, self.t_final, 101)]
        if not np.all(np.isfinite(samples)):
            raise CircuitError(f"schedule {self.description!r} is not finite on [0, {self.t_final}]")


def constant_schedule(value: float, t_final: float = 2.0) -> FHSchedule:
    value = float(value)
    return FHSchedule(lambda t: value, t_final, f"constant {value}", constant_value=value)


def piecewise_linear_schedule(breakpoints: Sequence[Tuple[float, float]], t_final: Optional[float] = None) -> FHSchedule:
    """
    Linear interpolation between (t, u) breakpoints, held flat outside them.
    t_final defaults to the last breakpoint time.
    """
    points = sorted((float(t), float(u)) for t, u in breakpoints)
    if len(points) < 2:
        raise CircuitError("a piecewise-linear schedule needs at least two breakpoints")
    times = np.array([p[0] for p in points])
    values = np.array([p[1] for p in points])
    if np.any(np.diff(times) <= 0):
        raise CircuitError("breakpoint times must be distinct")
    end = times[-1] if t_final is None else float(t_final)
    return FHSchedule(
        lambda t: float(np.interp(t, times, values)),
        end,
        "piecewise-linear " + ", ".join(f"{t:g}:{u:g}" for t, u in points),
    )


@dataclass(frozen=True)
class PFAConfig:
    """
    Product-formula settings. `ordering` is one label for every step or a
    sequence with one label per step.
    """

    n_steps: int = 10
    n_t: int = 1
    ordering: Union[str, Tuple[str, ...]] = "x-zz"

    def __post_init__(self):
        if self.n_steps < 1:
            raise CircuitError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_t < 1:
            raise CircuitError(f"n_t must be >= 1, got {self.n_t}")
        labels = (self.ordering,) if isinstance(self.ordering, str) else tuple(self.ordering)
        if not isinstance(self.ordering, str):
            object.__setattr__(self, "ordering", labels)
            if len(labels) != self.n_steps:
                raise CircuitError(f"need {self.n_steps} ordering labels, got {len(labels)}")
        for label in labels:
            if label not in DISTINCT_ORDERINGS:
                raise CircuitError(f"invalid ordering {label!r}; choose from {DISTINCT_ORDERINGS}")

    def ordering_for(self, step: int) -> str:
        if isinstance(self.ordering, str):
            return self.ordering
        return self.ordering[step - 1]


def fh_hamiltonian(u_tilde_value: float) -> np.ndarray:
    return (
        -pauli_operator("XI")
        - pauli_operator("IX")
        + 0.5 * float(u_tilde_value) * pauli_operator("ZZ")
    )


def initial_state_circuit() -> Circuit:
    return Circuit(2, (Gate("H", (0,)), Gate("H", (1,))))


def pfa_step(u_tilde_value: float, dt: float, ordering: str = "x-zz") -> Circuit:
    """One first-order substep approximating exp(-i H dt); scalar depth 2."""
    if ordering not in _BLOCK_ORDER:
        raise CircuitError(f"invalid ordering {ordering!r}; choose from {DISTINCT_ORDERINGS}")
    blocks = {
        "x0": [Gate("RX", (0,), -2.0 * dt)],
        "x1": [Gate("RX", (1,), -2.0 * dt)],
        "zz": [
            Gate("CNOT", (0, 1)),
            Gate("RZ", (1,), float(u_tilde_value) * dt),
            Gate("CNOT", (0, 1)),
        ],
    }
    return Circuit(2, tuple(g for name in _BLOCK_ORDER[ordering] for g in blocks[name]))


def _substep_times(schedule: FHSchedule, cfg: PFAConfig, step: int) -> Tuple[float, List[float]]:
    dt = schedule.t_final / (cfg.n_steps * cfg.n_t)
    start = (step - 1) * cfg.n_t * dt
    return dt, [start + (j + 0.5) * dt for j in range(cfg.n_t)]


def _step_circuit(schedule: FHSchedule, cfg: PFAConfig, step: int, ordering: str) -> Circuit:
    dt, midpoints = _substep_times(schedule, cfg, step)
    return concat(*[pfa_step(schedule.u_tilde(t), dt, ordering) for t in midpoints])


def pfa_evolution(schedule: FHSchedule, cfg: PFAConfig, through_step: int, first_step: int = 1) -> Circuit:
    """Product-formula steps first_step..through_step without state preparation."""
    if not 0 <= through_step <= cfg.n_steps:
        raise CircuitError(f"through_step must be in 0..{cfg.n_steps}, got {through_step}")
    steps = [
        _step_circuit(schedule, cfg, k, cfg.ordering_for(k))
        for k in range(first_step, through_step + 1)
    ]
    return concat(Circuit(2), *steps)


def pfa_circuit(schedule: FHSchedule, cfg: PFAConfig, through_step: int) -> Circuit:
    """
    State preparation followed by `through_step` product-formula steps, with
    every CNOT tagged by its position in the computation.
    """
    return tag_entangling_slots(concat(initial_state_circuit(), pfa_evolution(schedule, cfg, through_step)))


def step_boundaries(cfg: PFAConfig, through_step: int) -> List[int]:
    """Gate indices in pfa_circuit where steps 2..through_step begin."""
    prep = len(initial_state_circuit())
    per_step = GATES_PER_SUBSTEP * cfg.n_t
    return [prep + per_step * (k - 1) for k in range(2, through_step + 1)]


def exact_evolution(schedule: FHSchedule, t: float, fine_steps: int = 1000, check_convergence: bool = True) -> np.ndarray:
    """
    Time-ordered propagator from 0 to t on a fine midpoint grid.

    A constant schedule is a single matrix exponential. Otherwise the product
    is recomputed with twice the grid and a ConvergenceWarning is raised when
    the two differ by more than 1e-8.
    """
    if t < 0:
        raise CircuitError(f"time must be non-negative, got {t}")
    if t == 0:
        return np.eye(4, dtype=complex)
    if schedule.constant_value is not None:
        return expm(-1j * fh_hamiltonian(schedule.constant_value) * t)

    def propagate(n: int) -> np.ndarray:
        delta = t / n
        unitary = np.eye(4, dtype=complex)
        for j in range(n):
            unitary = expm(-1j * fh_hamiltonian(schedule.u_tilde((j + 0.5) * delta)) * delta) @ unitary
        return unitary

    coarse = propagate(fine_steps)
    if not check_convergence:
        return coarse
    fine = propagate(2 * fine_steps)
    change = np.max(np.abs(fine - coarse))
    if change > 1e-8:
        warnings.warn(
            f"exact evolution to t={t:g} changed by {change:.2e} when doubling {fine_steps} steps",
            ConvergenceWarning,
        )
    return fine


def exact_state(schedule: FHSchedule, t: float, fine_steps: int = 1000) -> DensityMatrix:
    """Exactly evolved benchmark state U(t)|++>."""
    return pure_state(exact_evolution(schedule, t, fine_steps) @ PLUS_PLUS)


def step_time(schedule: FHSchedule, cfg: PFAConfig, step: int) -> float:
    return schedule.t_final * step / cfg.n_steps


@dataclass(frozen=True)
class DigitizationBand:
    step: int
    minimum: float
    maximum: float
    std: float
    mean: float

    @property
    def width(self) -> float:
        return self.maximum - self.minimum


Statistic = Union[Observable, Callable[[DensityMatrix], float]]


def _evaluate(statistic: Statistic, states: np.ndarray) -> np.ndarray:
    """Statistic on a stack of 2-qubit statevectors of shape (m, 4)."""
    if isinstance(statistic, Observable):
        return np.real(np.einsum("mi,ij,mj->m", states.conj(), statistic.data, states))
    return np.array([statistic(pure_state(psi / np.linalg.norm(psi))) for psi in states])


def digitization_error(
    schedule: FHSchedule,
    cfg: PFAConfig,
    observable: Statistic,
    n_perm_samples: int = 16,
    rng_seed: int = 0,
    exhaustive: bool = False,
    through_step: Optional[int] = None,
) -> List[DigitizationBand]:
    """
    Spread of the noiseless benchmark value over product-formula orderings.

    For each step k the orderings of steps 1..k are either sampled uniformly
    (n_perm_samples sequences) or, with exhaustive=True, enumerated (4^k
    sequences). The statistic is an Observable or a function of the state.

    Returns:
        One DigitizationBand per step 1..through_step
    """
    if n_perm_samples < 2:
        raise CircuitError(f"n_perm_samples must be >= 2, got {n_perm_samples}")
    last = cfg.n_steps if through_step is None else through_step
    step_unitaries = [
        np.stack([circuit_unitary(_step_circuit(schedule, cfg, k, label)) for label in DISTINCT_ORDERINGS])
        for k in range(1, last + 1)
    ]

    bands = []
    if exhaustive:
        states = PLUS_PLUS[np.newaxis, :]
        for k, unitaries in enumerate(step_unitaries, start=1):
            # every existing prefix extended by each of the four orderings
            states = np.einsum("oij,mj->moi", unitaries, states).reshape(-1, 4)
            bands.append(_band(k, _evaluate(observable, states)))
        return bands

    rng = np.random.default_rng(rng_seed)
    choices = rng.integers(0, len(DISTINCT_ORDERINGS), size=(n_perm_samples, last))
    states = np.tile(PLUS_PLUS, (n_perm_samples, 1))
    for k, unitaries in enumerate(step_unitaries, start=1):
        states = np.einsum("mij,mj->mi", unitaries[choices[:, k - 1]], states)
        bands.append(_band(k, _evaluate(observable, states)))
    return bands


def _band(step: int, values: np.ndarray) -> DigitizationBand:
    return DigitizationBand(
        step=step,
        minimum=float(values.min()),
        maximum=float(values.max()),
        std=float(values.std(ddof=1)) if len(values) > 1 else 0.0,
        mean=float(values.mean()),
    )
