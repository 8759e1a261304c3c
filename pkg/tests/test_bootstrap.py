import numpy as np
import pytest

from clawelab.errors import InvalidStateError, MitigationError
from clawelab.pipeline.bootstrap import bootstrap, propagate_through_mitigation, resample_record
from clawelab.pipeline.fermi_hubbard import pfa_circuit
from clawelab.pipeline.mitigation import clawe_estimate, variant1_circuits, variant1_from_values
from clawelab.pipeline.observables import electronic_overlap
from clawelab.pipeline.qpu import (
    GlobalConstant,
    Ideal,
    ShotRecord,
    VirtualQPU,
    diagonal_weight,
    estimate_from_counts,
    evolve,
    exact_record,
)
from clawelab.pipeline.seeds import derive_seed
from clawelab.pipeline.states import basis_state, expectation


def _frequency_of_zero(rec: ShotRecord) -> float:
    return rec.frequencies().get("0", 0.0)


def test_degenerate_record_has_zero_spread():
    rec = ShotRecord({"00": 100}, 100)
    result = bootstrap(rec, lambda r: estimate_from_counts(r, diagonal_weight(electronic_overlap())), 200, rng_seed=1)
    assert result.estimate == 1.0
    assert result.stderr == 0.0
    assert result.ci_low == result.ci_high == 1.0


def test_binomial_stderr():
    rec = ShotRecord({"0": 5000, "1": 5000}, 10_000)
    result = bootstrap(rec, _frequency_of_zero, 1000, rng_seed=2)
    assert result.stderr == pytest.approx(0.005, rel=0.2)
    assert result.ci_low < 0.5 < result.ci_high
    assert result.drop_rate == 0.0


def test_bootstrap_is_seed_deterministic():
    rec = ShotRecord({"0": 700, "1": 300}, 1000)
    first = bootstrap(rec, _frequency_of_zero, 300, rng_seed=5)
    again = bootstrap(rec, _frequency_of_zero, 300, rng_seed=5)
    other = bootstrap(rec, _frequency_of_zero, 300, rng_seed=6)
    assert first == again
    assert first.stderr != other.stderr


def test_resample_keeps_shot_count(rng):
    rec = ShotRecord({"00": 10, "01": 25, "11": 65}, 100)
    redrawn = resample_record(rec, rng)
    assert redrawn.n_shots == 100
    assert set(redrawn.counts) <= set(rec.counts)
    exact = exact_record(basis_state("00"))
    assert resample_record(exact, rng) is exact


def test_exact_records_have_zero_stderr():
    rec = exact_record(basis_state("00"))
    result = propagate_through_mitigation([rec], lambda recs: 0.25, 50, rng_seed=0)
    assert result.stderr == 0.0
    assert result.estimate == result.mean == 0.25


def test_failed_resamples_are_dropped():
    rec = ShotRecord({"0": 500, "1": 500}, 1000)

    def fragile(recs):
        value = _frequency_of_zero(recs[0])
        if value < 0.5:
            raise MitigationError("below threshold")
        return value

    result = propagate_through_mitigation([rec], fragile, 400, rng_seed=3)
    assert 0.3 < result.drop_rate < 0.7


def test_bootstrap_errors():
    rec = ShotRecord({"0": 5}, 5)
    with pytest.raises(MitigationError):
        bootstrap(rec, _frequency_of_zero, 1)
    with pytest.raises(InvalidStateError):
        propagate_through_mitigation([], lambda recs: 0.0, 10)

    def always_fails(recs):
        raise MitigationError("no signal")

    with pytest.raises(MitigationError):
        propagate_through_mitigation([rec], always_fails, 10)


@pytest.mark.slow
def test_clawe_error_bars_cover_noiseless_values(schedule, pfa_config):
    e_o = electronic_overlap()
    weight = diagonal_weight(e_o)
    targets = [pfa_circuit(schedule, pfa_config, k) for k in range(1, 11)]
    noiseless = [expectation(evolve(c, Ideal(), basis_state("00")), e_o) for c in targets]

    for seed in range(20):
        covered = 0
        qpu = VirtualQPU(noise=GlobalConstant(0.02), n_shots=8192, rng_seed=seed)
        for k, target in enumerate(targets, start=1):
            chi = 2 * k
            _, (target_record,) = qpu.measure_observable([target], e_o, label=f"target-{k}")
            _, calibration_records = qpu.measure_observable(variant1_circuits(target, 3), e_o, label=f"variant1-{k}")

            def clawe_1(recs, chi=chi):
                values = [estimate_from_counts(r, weight) for r in recs]
                eps = variant1_from_values(values[1:], chi, 1.0, 0.5).aggregate
                return clawe_estimate(values[0], 0.5, eps, chi)

            result = propagate_through_mitigation(
                [target_record] + list(calibration_records), clawe_1, 1000, rng_seed=derive_seed(seed, k)
            )
            if abs(result.estimate - noiseless[k - 1]) <= 2 * result.stderr:
                covered += 1
        assert covered >= 8, f"seed {seed}: {covered}/10 steps inside two standard errors"
