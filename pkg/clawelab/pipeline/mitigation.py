"""
CLAWE model inversion and calibration, zero-noise extrapolation, and viability bounds.

Under global white noise a rescaled observable Omega = O - Omega_ITS * I decays as
<Omega_noisy> = (1 - eps)^chi <Omega_ideal>. Calibration circuits with a known
ideal result (motion reversals) measure the contamination C = (1 - eps)^chi_c,
from which eps follows, and the target is inverted with (1 - eps)^-chi.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import CALIBRATION_DELTA
from ..errors import (
    CalibrationWarning,
    MitigationError,
    NoiseFloorError,
    UninformativeCalibratorError,
)
from .circuits import Circuit, concat, inverse, power, scalar_depth
from .qpu import ShotRecord, VirtualQPU
from .states import DensityMatrix, Observable, basis_state, expectation

CLAWE_I = "CLAWE-I"
CLAWE_II = "CLAWE-II"
ZNE_POLY = "ZNE-poly"
ZNE_RICHARDSON = "ZNE-Richardson"
METHODS = (CLAWE_I, CLAWE_II, ZNE_POLY, ZNE_RICHARDSON)


@dataclass(frozen=True)
class RescaledObservable:
    raw_value: float
    its_value: float
    rescaled: float


def rescale(raw: float, its: float) -> RescaledObservable:
    return RescaledObservable(float(raw), float(its), float(raw) - float(its))


def its_value(observable: Observable) -> float:
    """Value of the observable on the infinite temperature state, Tr(O)/2^n."""
    return float(np.real(np.trace(observable.data))) / 2 ** observable.n_qubits


def contamination(noisy_rescaled: float, ideal_rescaled: float, delta: float = CALIBRATION_DELTA) -> float:
    if abs(ideal_rescaled) <= delta:
        raise UninformativeCalibratorError(
            f"ideal rescaled calibration value {ideal_rescaled:.3e} is within {delta:g} of the ITS value"
        )
    return noisy_rescaled / ideal_rescaled


def secondary_epsilon(c: float, chi_c: int) -> float:
    """
    eps = 1 - C^(1/chi_c). C > 1 can only come from shot noise; it is returned
    as a negative strength with a CalibrationWarning.
    """
    if chi_c < 1:
        raise MitigationError(f"calibration depth must be >= 1, got {chi_c}")
    if c <= 0:
        raise NoiseFloorError(f"contamination {c:.3e} at depth {chi_c} is at or below the noise floor")
    if c > 1:
        warnings.warn(f"contamination {c:.6f} > 1 at depth {chi_c}; negative noise strength", CalibrationWarning)
    return float(1 - c ** (1.0 / chi_c))


def ideal_map(omega_n: float, eps_s: float, chi: int) -> float:
    """Amplify a noisy rescaled value by (1 - eps_s)^-chi."""
    if eps_s >= 1:
        raise MitigationError(f"noise strength {eps_s} leaves no signal to invert")
    return float(omega_n * (1 - eps_s) ** (-chi))


def ideal_map_vector(omega_n: float, eps_vec: Sequence[Tuple[float, int]]) -> float:
    """Piecewise inversion: product of (1 - eps_i)^-chi_i over fragments."""
    value = float(omega_n)
    for eps, chi in eps_vec:
        value = ideal_map(value, eps, chi)
    return value


def allocate_depth(fragment_depths: Sequence[int], chi: int) -> List[int]:
    """
    Share a prefix depth chi across fragments in order, filling each fragment
    before the next; any excess lands on the last fragment.
    """
    remaining = int(chi)
    allocated = []
    for depth in fragment_depths:
        take = min(remaining, depth)
        allocated.append(take)
        remaining -= take
    if remaining > 0 and allocated:
        allocated[-1] += remaining
    return allocated


def effective_epsilon(eps_vec: Sequence[Tuple[float, int]]) -> float:
    """Single strength with the same total decay as the (eps_i, chi_i) pairs."""
    depth = sum(chi for _, chi in eps_vec)
    if depth == 0:
        return 0.0
    log_decay = sum(chi * np.log1p(-eps) for eps, chi in eps_vec if chi > 0)
    return float(-np.expm1(log_decay / depth))


def clawe_estimate(raw_noisy: float, its: float, eps_s: float, chi: int) -> float:
    """Mitigated value on the raw observable scale."""
    return ideal_map(raw_noisy - its, eps_s, chi) + its


def clawe_estimate_vector(raw_noisy: float, its: float, eps_vec: Sequence[Tuple[float, int]]) -> float:
    return ideal_map_vector(raw_noisy - its, eps_vec) + its


# ---------- calibration ----------

@dataclass(frozen=True)
class CalibrationPoint:
    point_index: int
    chi_c: int
    contamination: float
    epsilon_s: float
    calibrated: bool = True

    @property
    def clamped_epsilon(self) -> float:
        return float(np.clip(self.epsilon_s, 0.0, 1.0))


@dataclass(frozen=True)
class CalibrationRecord:
    """
    Outcome of a CLAWE calibration. `aggregate` is one strength for Variant I
    and one strength per fragment for Variant II.
    """

    variant: str
    points: Tuple[CalibrationPoint, ...]
    aggregate: Union[float, Tuple[float, ...]]
    fragment_depths: Tuple[int, ...] = ()
    n_shots: int = 0
    rng_seed: Optional[int] = None
    records: Tuple[ShotRecord, ...] = field(default=(), repr=False)

    def eps_vector(self, chi: int) -> List[Tuple[float, int]]:
        """(eps_i, chi_i) pairs for a prefix of depth chi of the fragmented target."""
        if self.variant != "II":
            raise MitigationError("only a Variant II record carries a noise vector")
        return list(zip(self.aggregate, allocate_depth(self.fragment_depths, chi)))


def calibration_reference(calibration_state: DensityMatrix, observable: Observable) -> float:
    """Ideal raw calibration value; motion reversal returns the calibration state."""
    return expectation(calibration_state, observable)


def variant1_circuits(target: Circuit, n_c: int) -> List[Circuit]:
    """Motion reversals U^-k U^k for k = 1..n_c."""
    if n_c < 1:
        raise MitigationError(f"need at least one calibration power, got {n_c}")
    return [concat(power(target, k), inverse(power(target, k))) for k in range(1, n_c + 1)]


def variant1_from_values(values: Sequence[float], chi: int, ideal_raw: float, its: float) -> CalibrationRecord:
    """
    Per-power strengths from measured raw calibration values; the aggregate is
    their mean. Powers at or below the noise floor are dropped with a warning.
    """
    if chi < 1:
        raise MitigationError("target has no entangling gates to calibrate")
    ideal_rescaled = ideal_raw - its
    points = []
    for k, value in enumerate(values, start=1):
        chi_c = 2 * k * chi
        c = contamination(value - its, ideal_rescaled)
        try:
            points.append(CalibrationPoint(k - 1, chi_c, c, secondary_epsilon(c, chi_c)))
        except NoiseFloorError as e:
            warnings.warn(f"dropping calibration power {k}: {e}", CalibrationWarning)
            points.append(CalibrationPoint(k - 1, chi_c, c, float("nan"), calibrated=False))
    kept = [p.epsilon_s for p in points if p.calibrated]
    if not kept:
        raise NoiseFloorError("every calibration power is at or below the noise floor")
    return CalibrationRecord("I", tuple(points), float(np.mean(kept)))


def variant1_calibrate(
    target: Circuit,
    qpu: VirtualQPU,
    n_c: int,
    calibration_observable: Observable,
    calibration_state: Optional[DensityMatrix] = None,
) -> CalibrationRecord:
    state = calibration_state or basis_state("0" * target.n_qubits)
    its = its_value(calibration_observable)
    backend = replace(qpu, initial_state=state)
    values, records = backend.measure_observable(variant1_circuits(target, n_c), calibration_observable, label="variant1")
    record = variant1_from_values(values, scalar_depth(target), calibration_reference(state, calibration_observable), its)
    return replace(record, n_shots=0 if qpu.shot_free else qpu.n_shots, rng_seed=qpu.rng_seed, records=tuple(records))


def variant2_circuits(fragments: Sequence[Circuit], window_w: Optional[int] = 1) -> List[Circuit]:
    """
    Baseline and reversal circuits per fragment, interleaved [B_0, A_0, B_1, A_1, ...].

    B_i replays the last min(w, i) predecessor fragments (the memory); A_i appends
    U_i^dagger U_i to the same memory. window_w=None replays every predecessor.
    """
    if not fragments:
        raise MitigationError("no fragments to calibrate")
    if window_w is not None and window_w < 0:
        raise MitigationError(f"window must be >= 0, got {window_w}")
    n = fragments[0].n_qubits
    circuits = []
    for i, frag in enumerate(fragments):
        start = 0 if window_w is None else max(0, i - window_w)
        memory = concat(Circuit(n), *fragments[start:i])
        circuits.append(memory)
        circuits.append(concat(memory, frag, inverse(frag)))
    return circuits


def variant2_from_values(values: Sequence[float], fragment_depths: Sequence[int], its: float) -> CalibrationRecord:
    """
    Fragment strengths from interleaved baseline/reversal raw values. A fragment
    whose baseline sits at the ITS value, or whose contamination is at the noise
    floor, is flagged and takes the mean of the calibrated fragments.
    """
    if len(values) != 2 * len(fragment_depths):
        raise MitigationError(f"expected {2 * len(fragment_depths)} values, got {len(values)}")
    points = []
    for i, chi_i in enumerate(fragment_depths):
        baseline, reversed_value = values[2 * i] - its, values[2 * i + 1] - its
        if chi_i == 0:
            points.append(CalibrationPoint(i, 0, 1.0, 0.0))
            continue
        try:
            c = contamination(reversed_value, baseline)
            points.append(CalibrationPoint(i, 2 * chi_i, c, secondary_epsilon(c, 2 * chi_i)))
        except MitigationError as e:
            warnings.warn(f"fragment {i} is uncalibratable: {e}", CalibrationWarning)
            c = reversed_value / baseline if baseline != 0 else float("nan")
            points.append(CalibrationPoint(i, 2 * chi_i, c, float("nan"), calibrated=False))

    calibrated = [p.epsilon_s for p, d in zip(points, fragment_depths) if p.calibrated and d > 0]
    if not calibrated and any(d > 0 for d in fragment_depths):
        raise MitigationError("no fragment could be calibrated")
    fallback = float(np.mean(calibrated)) if calibrated else 0.0
    aggregate = tuple(p.epsilon_s if p.calibrated else fallback for p in points)
    return CalibrationRecord("II", tuple(points), aggregate, tuple(int(d) for d in fragment_depths))


def variant2_calibrate(
    fragments: Sequence[Circuit],
    window_w: Optional[int],
    qpu: VirtualQPU,
    calibration_observable: Observable,
    calibration_state: Optional[DensityMatrix] = None,
) -> CalibrationRecord:
    state = calibration_state or basis_state("0" * fragments[0].n_qubits)
    backend = replace(qpu, initial_state=state)
    values, records = backend.measure_observable(
        variant2_circuits(fragments, window_w), calibration_observable, label="variant2"
    )
    record = variant2_from_values(values, [scalar_depth(f) for f in fragments], its_value(calibration_observable))
    return replace(record, n_shots=0 if qpu.shot_free else qpu.n_shots, rng_seed=qpu.rng_seed, records=tuple(records))


# ---------- viability ----------

def gate_cutoff(eps_g: float) -> float:
    """chi_g = 1/eps_g, the depth beyond which inversion is unstable (convention)."""
    if eps_g <= 0:
        raise MitigationError(f"noise strength must be positive, got {eps_g}")
    return 1.0 / eps_g


def pnr_depth(n_qubits: int, eps_g: float) -> float:
    """chi_PNR = (n/2) chi_g."""
    return 0.5 * n_qubits * gate_cutoff(eps_g)


def viability_ratio(eps_g: float, eps_s: float, chi: int) -> float:
    """|(1 - eps_g)/(1 - eps_s)|^chi, the bias factor of inverting with a misestimated strength."""
    return float(abs((1 - eps_g) / (1 - eps_s)) ** chi)


@dataclass(frozen=True)
class Viability:
    within_pnr: bool
    beyond_cutoff: bool


def viability(chi: int, n_qubits: int, eps_g: float, amplification: float = 1.0) -> Viability:
    depth = chi * amplification
    if eps_g <= 0:
        return Viability(True, False)
    return Viability(depth <= pnr_depth(n_qubits, eps_g), depth > gate_cutoff(eps_g))


@dataclass(frozen=True)
class MitigatedEstimate:
    value: float
    stderr: float
    method: str
    within_pnr: bool = True
    beyond_cutoff: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise MitigationError(f"unknown mitigation method {self.method!r}")
        if self.stderr < 0:
            raise MitigationError(f"stderr must be non-negative, got {self.stderr}")


# ---------- zero-noise extrapolation ----------

def _check_scales(scales: Sequence[float]) -> np.ndarray:
    scales = np.asarray(scales, dtype=float)
    if len(set(scales.tolist())) != len(scales):
        raise MitigationError(f"scale factors must be distinct, got {scales.tolist()}")
    return scales


def zne_poly(scales: Sequence[float], values: Sequence[float], order: int = 3) -> float:
    """Least-squares polynomial in the noise scale, evaluated at zero noise."""
    scales = _check_scales(scales)
    if np.any(scales <= 0):
        raise MitigationError("scale factors must be positive")
    if len(scales) != len(values):
        raise MitigationError(f"{len(scales)} scales but {len(values)} values")
    if len(scales) < order + 1:
        raise MitigationError(f"order {order} fit needs {order + 1} points, got {len(scales)}")
    coefficients = np.polyfit(scales, np.asarray(values, dtype=float), order)
    return float(np.polyval(coefficients, 0.0))


def richardson_weights(scales: Sequence[float]) -> np.ndarray:
    """w_i = prod_{j != i} c_j/(c_j - c_i); exact at zero for polynomials of degree < len(scales)."""
    scales = _check_scales(scales)
    weights = np.ones(len(scales))
    for i, ci in enumerate(scales):
        for j, cj in enumerate(scales):
            if i != j:
                weights[i] *= cj / (cj - ci)
    return weights


def zne_richardson(scales: Sequence[float], values: Sequence[float], order: int = 2) -> float:
    if len(scales) != order + 1 or len(values) != order + 1:
        raise MitigationError(f"order {order} Richardson needs exactly {order + 1} points")
    return float(np.dot(richardson_weights(scales), np.asarray(values, dtype=float)))
