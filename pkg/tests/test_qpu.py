import numpy as np
import pytest

from clawelab.config import JOB_CAPACITY
from clawelab.errors import ChannelError, InvalidStateError, JobTooLargeError
from clawelab.pipeline.channels import depolarize_array, extract_epsilon
from clawelab.pipeline.circuits import Circuit, circuit_unitary, gate, tag_entangling_slots
from clawelab.pipeline.fermi_hubbard import pfa_circuit
from clawelab.pipeline.observables import electronic_overlap
from clawelab.pipeline.qpu import (
    GlobalConstant,
    GlobalVector,
    Ideal,
    ShotRecord,
    VirtualQPU,
    circuit_seeds,
    diagonal_weight,
    effective_noise_superoperator,
    estimate_from_counts,
    evolve,
    exact_record,
    global_vector_from_runs,
    linear_drift,
    local_after_cnot,
    merge_records,
    rco_average_superoperator,
    run_job,
    sample_shots,
    split_shots,
)
from clawelab.pipeline.states import basis_state, expectation, infinite_temperature, pure_state


def _cnot_chain(n_cnots: int) -> Circuit:
    gates = [gate("H", 0)]
    for _ in range(n_cnots):
        gates.extend([gate("CNOT", 0, 1), gate("RX", 1, theta=0.4)])
    return Circuit(2, tuple(gates))


def test_ideal_evolution_matches_unitary(schedule, pfa_config):
    c = pfa_circuit(schedule, pfa_config, 4)
    final = evolve(c, Ideal(), basis_state("00"))
    psi = circuit_unitary(c)[:, 0]
    np.testing.assert_allclose(final.data, np.outer(psi, psi.conj()), atol=1e-12)


def test_global_constant_closed_form():
    eps = 0.05
    c = _cnot_chain(3)
    ideal = evolve(c, Ideal(), basis_state("00")).data
    noisy = evolve(c, GlobalConstant(eps), basis_state("00")).data
    signal = (1 - eps) ** 3
    np.testing.assert_allclose(noisy, signal * ideal + (1 - signal) * np.eye(4) / 4, atol=1e-12)


def test_global_noise_fixes_infinite_temperature():
    mixed = infinite_temperature(2)
    out = evolve(_cnot_chain(4), GlobalConstant(0.3), mixed)
    np.testing.assert_allclose(out.data, mixed.data, atol=1e-12)


def test_equal_vector_matches_constant():
    c = tag_entangling_slots(_cnot_chain(3))
    constant = evolve(c, GlobalConstant(0.02), basis_state("00"))
    vector = evolve(c, GlobalVector((0.02, 0.02, 0.02)), basis_state("00"))
    np.testing.assert_allclose(vector.data, constant.data, atol=1e-14)


def test_vector_noise_follows_slots():
    c = tag_entangling_slots(_cnot_chain(2))
    noise = global_vector_from_runs([(0.0, 1), (0.1, 1)])
    out = evolve(c, noise, basis_state("00")).data

    rho = basis_state("00").data
    for g in c.gates:
        u = circuit_unitary(Circuit(2, (g,)))
        rho = u @ rho @ u.conj().T
        if g.is_entangling and g.slot == 1:
            rho = depolarize_array(rho, 0.1)
    np.testing.assert_allclose(out, rho, atol=1e-12)

    with pytest.raises(ChannelError):
        evolve(tag_entangling_slots(_cnot_chain(3)), noise, basis_state("00"))


def test_linear_drift_decays_rescaled_overlap_slot_by_slot():
    noise = linear_drift(0.01, 0.05, 5)
    assert noise.epsilons[0] == pytest.approx(0.01)
    assert noise.epsilons[-1] == pytest.approx(0.05)
    assert len(noise.epsilons) == 5

    c = tag_entangling_slots(_cnot_chain(5))
    e_o = electronic_overlap()
    ideal = expectation(evolve(c, Ideal(), basis_state("00")), e_o) - 0.5
    noisy = expectation(evolve(c, noise, basis_state("00")), e_o) - 0.5
    assert noisy == pytest.approx(np.prod([1 - e for e in noise.epsilons]) * ideal, abs=1e-12)


def test_run_job_rejects_oversized_jobs():
    circuits = [_cnot_chain(1)] * (JOB_CAPACITY + 1)
    with pytest.raises(JobTooLargeError):
        run_job(circuits, Ideal(), shot_free=True)
    assert len(run_job(circuits[:JOB_CAPACITY], Ideal(), shot_free=True)) == JOB_CAPACITY


def test_run_job_is_order_independent():
    a, b, c = _cnot_chain(1), _cnot_chain(2), _cnot_chain(3)
    forward = run_job([a, b, c], GlobalConstant(0.02), n_shots=500, rng_seed=9)
    backward = run_job([c, b, a], GlobalConstant(0.02), n_shots=500, rng_seed=9)
    assert forward[0].counts == backward[2].counts
    assert forward[2].counts == backward[0].counts
    again = run_job([a, b, c], GlobalConstant(0.02), n_shots=500, rng_seed=9)
    assert [r.counts for r in again] == [r.counts for r in forward]


def test_repeated_circuits_get_distinct_seeds():
    c = _cnot_chain(1)
    seeds = circuit_seeds([c, c], 4)
    assert seeds[0] != seeds[1]


def test_shot_free_record_holds_probabilities():
    rec = exact_record(basis_state("01"))
    assert rec.is_exact and rec.n_shots == 0 and rec.counts == {}
    assert rec.probabilities["01"] == pytest.approx(1.0)
    assert estimate_from_counts(rec, diagonal_weight(electronic_overlap())) == pytest.approx(0.0)


def test_sampling_statistics():
    rho = pure_state(np.full(4, 0.5))
    rec = sample_shots(rho, None, 20_000, rng_seed=3)
    assert rec.n_shots == 20_000
    assert sum(rec.counts.values()) == 20_000
    value = estimate_from_counts(rec, diagonal_weight(electronic_overlap()))
    # binomial stderr is 0.0035
    assert abs(value - 0.5) < 0.02
    with pytest.raises(InvalidStateError):
        sample_shots(rho, None, 0, rng_seed=3)


def test_shot_noise_shrinks_as_inverse_sqrt_shots():
    rho = pure_state(np.full(4, 0.5))
    weight = diagonal_weight(electronic_overlap())
    rms = []
    for n_shots in (1_000, 10_000, 100_000):
        errors = [estimate_from_counts(sample_shots(rho, None, n_shots, rng_seed=seed), weight) - 0.5 for seed in range(40)]
        rms.append(float(np.sqrt(np.mean(np.square(errors)))))
        # Bernoulli(1/2) standard deviation is 0.5 per shot
        assert 0.3 <= rms[-1] * np.sqrt(n_shots) <= 0.75
    assert rms[0] > rms[1] > rms[2]


def test_estimate_from_counts():
    rec = ShotRecord({"00": 30, "01": 20, "11": 50}, 100)
    assert estimate_from_counts(rec, diagonal_weight(electronic_overlap())) == pytest.approx(0.8)
    with pytest.raises(InvalidStateError):
        ShotRecord({"00": 3}, 4)


def test_pre_measurement_basis_change():
    plus = pure_state(np.array([1, 1]) / np.sqrt(2))
    rec = exact_record(plus, Circuit(1, (gate("H", 0),)))
    assert rec.probabilities["0"] == pytest.approx(1.0)


def test_merge_records():
    merged = merge_records([ShotRecord({"0": 3, "1": 1}, 4), ShotRecord({"1": 4}, 4)])
    assert merged.counts == {"0": 3, "1": 5}
    assert merged.n_shots == 8
    with pytest.raises(InvalidStateError):
        merge_records([ShotRecord({"0": 1}, 1), exact_record(basis_state("0"))])


def test_split_shots():
    assert split_shots(10, 3) == [4, 3, 3]
    assert sum(split_shots(8192, 200)) == 8192


def test_qpu_chunks_large_batches():
    qpu = VirtualQPU(noise=GlobalConstant(0.01), shot_free=True)
    circuits = [_cnot_chain(1 + k % 3) for k in range(2 * JOB_CAPACITY + 5)]
    values, records = qpu.measure_observable(circuits, electronic_overlap(), label="batch")
    assert len(values) == len(records) == len(circuits)
    direct = expectation(evolve(circuits[0], GlobalConstant(0.01), basis_state("00")), electronic_overlap())
    assert values[0] == pytest.approx(direct, abs=1e-12)


def test_qpu_rco_shot_free_matches_plain_under_global_noise(schedule, pfa_config):
    target = pfa_circuit(schedule, pfa_config, 3)
    plain = VirtualQPU(noise=GlobalConstant(0.02), shot_free=True)
    twirled = VirtualQPU(noise=GlobalConstant(0.02), shot_free=True, rco_instances=8)
    a, _ = plain.measure_observable([target], electronic_overlap())
    b, _ = twirled.measure_observable([target], electronic_overlap())
    assert a[0] == pytest.approx(b[0], abs=1e-10)


def test_qpu_rco_pools_shots():
    qpu = VirtualQPU(noise=GlobalConstant(0.02), n_shots=1000, rco_instances=7, rng_seed=2)
    (record,) = qpu.execute([_cnot_chain(2)])
    assert record.n_shots == 1000


def test_randomized_compiling_tailors_coherent_noise():
    c = Circuit(2, (gate("CNOT", 0, 1),))
    noise = local_after_cnot(p=0.0, coherent_angle=0.1)
    bare = extract_epsilon(effective_noise_superoperator(c, noise), 2)
    averaged = extract_epsilon(rco_average_superoperator(c, noise, 200, rng_seed=5), 2)
    assert averaged.residual < bare.residual
