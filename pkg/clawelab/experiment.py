#!/usr/bin/env python3
"""
Benchmark experiments with progress tracking.
Builds the Fermi-Hubbard benchmark circuits, runs them on the virtual QPU,
mitigates with CLAWE and ZNE, and tabulates everything per time-step.
"""

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence

from tqdm import tqdm

from .config import ExperimentConfig
from .errors import CalibrationWarning, CircuitError, ConfigError, MitigationError
from .pipeline.bootstrap import BootstrapResult, propagate_through_mitigation
from .pipeline.circuits import Circuit, fragment, qcna_fold, scalar_depth
from .pipeline.fermi_hubbard import (
    DigitizationBand,
    FHSchedule,
    PFAConfig,
    constant_schedule,
    digitization_error,
    exact_state,
    pfa_circuit,
    piecewise_linear_schedule,
    step_boundaries,
    step_time,
)
from .pipeline.mitigation import (
    CLAWE_I,
    CLAWE_II,
    ZNE_POLY,
    ZNE_RICHARDSON,
    MitigatedEstimate,
    Viability,
    calibration_reference,
    clawe_estimate,
    clawe_estimate_vector,
    effective_epsilon,
    its_value,
    variant1_calibrate,
    variant1_circuits,
    variant1_from_values,
    variant2_calibrate,
    variant2_from_values,
    viability,
    zne_poly,
    zne_richardson,
)
from .pipeline.observables import (
    bba_boundaries,
    bba_calibration_state,
    bba_circuit,
    bba_purity_observable,
    clip_purity,
    electronic_overlap,
    overlap_calibration_state,
    renyi_direct,
    renyi_from_purity,
)
from .pipeline.qpu import (
    GlobalConstant,
    GlobalVector,
    Ideal,
    NoiseModel,
    ShotRecord,
    VirtualQPU,
    diagonal_weight,
    estimate_from_counts,
    evolve,
    local_after_cnot,
)
from .pipeline.report import ResultTable, calibration_table, emit_csv
from .pipeline.seeds import derive_seed
from .pipeline.states import DensityMatrix, Observable, basis_state, expectation

METHOD_COLUMNS = ("noisy", "clawe_1", "clawe_2", "zne_poly", "zne_richardson")
BENCHMARK_COLUMNS = [
    "step", "t", "chi", "ideal", "pfa",
    "noisy", "noisy_err",
    "clawe_1", "clawe_1_err",
    "clawe_2", "clawe_2_err",
    "zne_poly", "zne_poly_err",
    "zne_richardson", "zne_richardson_err",
    "clawe_within_pnr", "zne_within_pnr", "beyond_cutoff",
    "digitization_min", "digitization_max", "digitization_std",
]
RENYI_COLUMNS = [f"{m}_purity" for m in METHOD_COLUMNS] + ["clipped"]
METHOD_LABELS = {"clawe_1": CLAWE_I, "clawe_2": CLAWE_II, "zne_poly": ZNE_POLY, "zne_richardson": ZNE_RICHARDSON}

Recipe = Callable[[Sequence[ShotRecord]], float]


@dataclass
class Benchmark:
    """Per-step circuits and references of the overlap or Rényi benchmark."""

    kind: str
    schedule: FHSchedule
    pfa: PFAConfig
    steps: List[int]
    targets: List[Circuit]
    observable: Observable
    fragments: List[Circuit]
    calibration_state: DensityMatrix

    @property
    def n_qubits(self) -> int:
        return self.targets[0].n_qubits

    @property
    def its(self) -> float:
        return its_value(self.observable)

    def report(self, raw: float) -> float:
        """Benchmark quantity from a raw observable value: E_o itself, or the entropy of the clipped purity."""
        if self.kind == "renyi":
            return renyi_from_purity(clip_purity(raw)[0]).entropy
        return raw


def build_schedule(cfg: ExperimentConfig) -> FHSchedule:
    if cfg.u_tilde is not None:
        return constant_schedule(cfg.u_tilde, cfg.t_final)
    return piecewise_linear_schedule(cfg.breakpoints, cfg.t_final)


def build_noise(cfg: ExperimentConfig, cnots_per_step: int, trailing_slots: int = 0) -> NoiseModel:
    """
    Noise model for a target whose steps hold `cnots_per_step` CNOTs each;
    a global noise vector repeats each step's strength over its CNOT slots.
    """
    if cfg.noise_kind == "ideal":
        return Ideal()
    if cfg.noise_kind == "global-constant":
        return GlobalConstant(cfg.epsilon)
    if cfg.noise_kind == "global-vector":
        epsilons = [eps for eps in cfg.step_epsilons for _ in range(cnots_per_step)]
        epsilons.extend([cfg.step_epsilons[-1]] * trailing_slots)
        return GlobalVector(tuple(epsilons))
    return local_after_cnot(cfg.local_p, cfg.coherent_angle)


def build_benchmark(cfg: ExperimentConfig, kind: Optional[str] = None) -> Benchmark:
    kind = kind or ("renyi" if cfg.experiment == "renyi" else "overlap")
    schedule = build_schedule(cfg)
    pfa = PFAConfig(cfg.n_steps, cfg.n_t, cfg.ordering)
    steps = list(range(cfg.first_step, cfg.n_steps + 1))
    base_targets = [pfa_circuit(schedule, pfa, k) for k in steps]
    full = pfa_circuit(schedule, pfa, cfg.n_steps)
    boundaries = list(cfg.fragment_boundaries) if cfg.fragment_boundaries is not None else step_boundaries(pfa, cfg.n_steps)

    if kind == "renyi":
        targets = [bba_circuit(c) for c in base_targets]
        observable = bba_purity_observable()
        calibration_state = bba_calibration_state()
        full = bba_circuit(full)
        boundaries = bba_boundaries(boundaries)
    else:
        targets = base_targets
        observable = electronic_overlap()
        calibration_state = overlap_calibration_state()

    try:
        fragments = fragment(full, boundaries)
    except CircuitError as e:
        raise ConfigError(f"mitigation.fragment_boundaries: {e}")
    return Benchmark(kind, schedule, pfa, steps, targets, observable, fragments, calibration_state)


def build_qpu(cfg: ExperimentConfig, bench: Benchmark) -> VirtualQPU:
    cnots_per_step = 2 * cfg.n_t * (2 if bench.kind == "renyi" else 1)
    noise = build_noise(cfg, cnots_per_step, trailing_slots=1 if bench.kind == "renyi" else 0)
    return VirtualQPU(
        noise=noise,
        n_shots=cfg.n_shots,
        shot_free=cfg.shot_free,
        rng_seed=cfg.seed,
        rco_instances=cfg.rco_instances,
    )


def build_targets(cfg: ExperimentConfig) -> List[Circuit]:
    """Benchmark circuits of every reported step, as run on the backend."""
    return build_benchmark(cfg).targets


def _ideal_value(bench: Benchmark, step: int) -> float:
    state = exact_state(bench.schedule, step_time(bench.schedule, bench.pfa, step))
    if bench.kind == "renyi":
        return renyi_direct(state).purity
    return expectation(state, bench.observable)


def _noiseless_value(bench: Benchmark, target: Circuit) -> float:
    final = evolve(target, Ideal(), basis_state("0" * target.n_qubits))
    return expectation(final, bench.observable)


def _bootstrap(
    records: Sequence[ShotRecord],
    recipe: Recipe,
    report: Callable[[float], float],
    cfg: ExperimentConfig,
    name: str,
    step: int,
    verbose: bool,
) -> Optional[BootstrapResult]:
    try:
        return propagate_through_mitigation(
            records,
            lambda recs: report(recipe(recs)),
            n_resamples=cfg.n_resamples,
            rng_seed=derive_seed(cfg.seed, "bootstrap", name, step),
            verbose=verbose,
        )
    except MitigationError as e:
        warnings.warn(f"step {step}: {name} failed ({e})", CalibrationWarning)
        return None


def _mitigated(name: str, result: BootstrapResult, flags: Viability) -> MitigatedEstimate:
    return MitigatedEstimate(result.estimate, result.stderr, METHOD_LABELS[name], flags.within_pnr, flags.beyond_cutoff)


def run_experiment(
    cfg: ExperimentConfig,
    progress_callback: Optional[Callable[[int, str], None]] = None,
    verbose: bool = False,
) -> ResultTable:
    """
    Run the configured experiment and write its CSV.

    Args:
        cfg: Validated experiment configuration
        progress_callback: Function to call with progress updates (stage, message)
        verbose: Show tqdm bars for the step loop and bootstrap resampling

    Returns:
        The result table that was written to cfg.output
    """
    cfg.validate()
    if cfg.experiment in ("calibrate-v1", "calibrate-v2"):
        runner = _run_calibration
    elif cfg.experiment == "zne":
        runner = _run_zne
    else:
        runner = _run_benchmark

    table = runner(cfg, progress_callback, verbose)
    emit_csv(table, cfg.output)
    return table


def _progress(total: int, progress_callback: Optional[Callable[[int, str], None]]):
    def update_progress(stage: int, message: str):
        if progress_callback:
            progress_callback(stage, message)
        print(f"[Stage {stage}/{total}] {message}")
    return update_progress


def _run_benchmark(cfg: ExperimentConfig, progress_callback, verbose: bool) -> ResultTable:
    update_progress = _progress(7, progress_callback)

    update_progress(1, "Building benchmark circuits...")
    bench = build_benchmark(cfg)
    qpu = build_qpu(cfg, bench)
    weight = diagonal_weight(bench.observable)
    its = bench.its
    chis = [scalar_depth(c) for c in bench.targets]

    def value(rec: ShotRecord) -> float:
        return estimate_from_counts(rec, weight)

    update_progress(2, "Computing exact and noiseless references...")
    ideal = [_ideal_value(bench, k) for k in bench.steps]
    noiseless = [_noiseless_value(bench, c) for c in bench.targets]
    statistic = (lambda rho: renyi_direct(rho).entropy) if bench.kind == "renyi" else electronic_overlap()
    bands: Dict[int, DigitizationBand] = {
        b.step: b for b in digitization_error(
            bench.schedule, bench.pfa, statistic, cfg.n_perm_samples, derive_seed(cfg.seed, "digitization")
        )
    }

    update_progress(3, "Running noisy target circuits...")
    _, target_records = qpu.measure_observable(bench.targets, bench.observable, label="target")

    update_progress(4, "Calibrating CLAWE Variant I...")
    calibration_state = bench.calibration_state
    ideal_cal = calibration_reference(calibration_state, bench.observable)
    v1_circuits: List[Circuit] = []
    for c, chi in zip(bench.targets, chis):
        if chi > 0:
            v1_circuits.extend(variant1_circuits(c, cfg.n_calibrations))
    calibration_qpu = replace(qpu, initial_state=calibration_state)
    _, v1_flat = calibration_qpu.measure_observable(v1_circuits, bench.observable, label="variant1")
    v1_records: List[List[ShotRecord]] = []
    cursor = 0
    for chi in chis:
        count = cfg.n_calibrations if chi > 0 else 0
        v1_records.append(v1_flat[cursor:cursor + count])
        cursor += count

    update_progress(5, "Calibrating CLAWE Variant II...")
    v2 = variant2_calibrate(bench.fragments, cfg.window_w, qpu, bench.observable, calibration_state)
    depths = list(v2.fragment_depths)

    update_progress(6, "Running QCNA-amplified circuits...")
    rounds = list(cfg.qcna_rounds)
    scales = [2 * r + 1 for r in rounds]
    folded = [qcna_fold(c, r) for c in bench.targets for r in rounds]
    _, zne_flat = qpu.measure_observable(folded, bench.observable, label="zne")

    update_progress(7, "Mitigating and bootstrapping uncertainties...")
    columns = BENCHMARK_COLUMNS + (RENYI_COLUMNS if bench.kind == "renyi" else [])
    table = ResultTable(columns)

    step_iter = tqdm(list(enumerate(bench.steps)), desc="Steps", disable=not verbose)
    for i, step in step_iter:
        chi = chis[i]

        def clawe_1(records: Sequence[ShotRecord], chi=chi) -> float:
            raw = value(records[0])
            if chi == 0:
                return raw
            record = variant1_from_values([value(r) for r in records[1:]], chi, ideal_cal, its)
            return clawe_estimate(raw, its, record.aggregate, chi)

        def clawe_2(records: Sequence[ShotRecord], chi=chi) -> float:
            record = variant2_from_values([value(r) for r in records[1:]], depths, its)
            return clawe_estimate_vector(value(records[0]), its, record.eps_vector(chi))

        def poly(records: Sequence[ShotRecord]) -> float:
            return zne_poly(scales, [value(r) for r in records], cfg.poly_order)

        n_rich = cfg.richardson_order + 1

        def richardson(records: Sequence[ShotRecord]) -> float:
            return zne_richardson(scales[:n_rich], [value(r) for r in records], cfg.richardson_order)

        step_zne = zne_flat[i * len(rounds):(i + 1) * len(rounds)]
        recipes = {
            "noisy": (lambda records: value(records[0]), [target_records[i]]),
            "clawe_1": (clawe_1, [target_records[i]] + v1_records[i]),
            "clawe_2": (clawe_2, [target_records[i]] + list(v2.records)),
            "zne_poly": (poly, step_zne),
            "zne_richardson": (richardson, step_zne[:n_rich]),
        }

        row = {
            "step": step,
            "t": step_time(bench.schedule, bench.pfa, step),
            "chi": chi,
            "ideal": bench.report(ideal[i]),
            "pfa": bench.report(noiseless[i]),
        }

        eps = 0.0
        if chi > 0:
            try:
                eps = variant1_from_values([value(r) for r in v1_records[i]], chi, ideal_cal, its).aggregate
            except MitigationError:
                eps = effective_epsilon(v2.eps_vector(chi))
        flags = {
            "clawe": viability(chi, bench.n_qubits, eps),
            "zne": viability(chi, bench.n_qubits, eps, amplification=max(scales)),
        }
        row["clawe_within_pnr"] = flags["clawe"].within_pnr
        row["beyond_cutoff"] = flags["clawe"].beyond_cutoff
        row["zne_within_pnr"] = flags["zne"].within_pnr

        clipped = []
        for name, (recipe, records) in recipes.items():
            result = _bootstrap(records, recipe, bench.report, cfg, name, step, verbose)
            if result is not None and name in METHOD_LABELS:
                estimate = _mitigated(name, result, flags[name.split("_")[0]])
                row[name], row[f"{name}_err"] = estimate.value, estimate.stderr
            else:
                row[name] = None if result is None else result.estimate
                row[f"{name}_err"] = None if result is None else result.stderr
            if bench.kind == "renyi":
                purity = None if result is None else recipe(records)
                row[f"{name}_purity"] = purity
                if purity is not None and clip_purity(purity)[1]:
                    clipped.append(name)
        if bench.kind == "renyi":
            row["clipped"] = ";".join(clipped) or None

        band = bands.get(step)
        row["digitization_min"] = band.minimum if band else row["pfa"]
        row["digitization_max"] = band.maximum if band else row["pfa"]
        row["digitization_std"] = band.std if band else 0.0
        table.add_row(**row)

    return table


def _run_calibration(cfg: ExperimentConfig, progress_callback, verbose: bool) -> ResultTable:
    update_progress = _progress(2, progress_callback)

    update_progress(1, "Building benchmark circuits...")
    bench = build_benchmark(cfg, kind="overlap")
    qpu = build_qpu(cfg, bench)

    if cfg.experiment == "calibrate-v1":
        update_progress(2, f"Calibrating CLAWE Variant I with {cfg.n_calibrations} powers...")
        record = variant1_calibrate(
            bench.targets[-1], qpu, cfg.n_calibrations, bench.observable, bench.calibration_state
        )
        print(f"  Mean noise strength: {record.aggregate:.6f}")
    else:
        update_progress(2, f"Calibrating CLAWE Variant II over {len(bench.fragments)} fragments...")
        record = variant2_calibrate(bench.fragments, cfg.window_w, qpu, bench.observable, bench.calibration_state)
        print(f"  Noise vector: {', '.join(f'{e:.6f}' for e in record.aggregate)}")
    return calibration_table(record)


def _run_zne(cfg: ExperimentConfig, progress_callback, verbose: bool) -> ResultTable:
    update_progress = _progress(3, progress_callback)

    update_progress(1, "Building benchmark circuits...")
    bench = build_benchmark(cfg, kind="overlap")
    qpu = build_qpu(cfg, bench)
    weight = diagonal_weight(bench.observable)
    rounds = list(cfg.qcna_rounds)
    scales = [2 * r + 1 for r in rounds]
    n_rich = cfg.richardson_order + 1

    update_progress(2, f"Running {len(rounds)} QCNA rounds per step...")
    folded = [qcna_fold(c, r) for c in bench.targets for r in rounds]
    _, records = qpu.measure_observable(folded, bench.observable, label="zne")

    update_progress(3, "Extrapolating to zero noise...")
    table = ResultTable(
        ["step", "chi", "ideal", "pfa"]
        + [f"value_x{s}" for s in scales]
        + ["zne_poly", "zne_poly_err", "zne_richardson", "zne_richardson_err"]
    )

    def values(recs: Sequence[ShotRecord]) -> List[float]:
        return [estimate_from_counts(r, weight) for r in recs]

    for i, step in enumerate(tqdm(bench.steps, desc="Steps", disable=not verbose)):
        step_records = records[i * len(rounds):(i + 1) * len(rounds)]
        poly = _bootstrap(
            step_records, lambda recs: zne_poly(scales, values(recs), cfg.poly_order),
            float, cfg, "zne_poly", step, verbose=False,
        )
        rich = _bootstrap(
            step_records[:n_rich],
            lambda recs: zne_richardson(scales[:n_rich], values(recs), cfg.richardson_order),
            float, cfg, "zne_richardson", step, verbose=False,
        )
        row = {
            "step": step,
            "chi": scalar_depth(bench.targets[i]),
            "ideal": _ideal_value(bench, step),
            "pfa": _noiseless_value(bench, bench.targets[i]),
            "zne_poly": None if poly is None else poly.estimate,
            "zne_poly_err": None if poly is None else poly.stderr,
            "zne_richardson": None if rich is None else rich.estimate,
            "zne_richardson_err": None if rich is None else rich.stderr,
        }
        for s, v in zip(scales, values(step_records)):
            row[f"value_x{s}"] = v
        table.add_row(**row)
    return table
