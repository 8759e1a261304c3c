import numpy as np
import pytest

from clawelab.errors import CircuitError
from clawelab.pipeline.circuits import (
    Circuit,
    Gate,
    circuit_from_text,
    circuit_to_text,
    circuit_unitary,
    concat,
    equal_up_to_phase,
    fragment,
    gate,
    inverse,
    power,
    qcna_fold,
    randomized_compile,
    scalar_depth,
    tag_entangling_slots,
)
from clawelab.pipeline.fermi_hubbard import pfa_circuit


def _sample_circuit() -> Circuit:
    return Circuit(2, (
        gate("H", 0),
        gate("CNOT", 0, 1),
        gate("RZ", 1, theta=0.3),
        gate("S", 0),
        gate("CNOT", 1, 0),
        gate("RX", 0, theta=-0.7),
    ))


def test_gate_validation():
    with pytest.raises(CircuitError):
        gate("CNOT", 0, 0)
    with pytest.raises(CircuitError):
        gate("RX", 0)
    with pytest.raises(CircuitError):
        gate("H", 0, theta=0.1)
    with pytest.raises(CircuitError):
        gate("SWAP", 0, 1)
    with pytest.raises(CircuitError):
        Gate("H", (0,), slot=3)
    with pytest.raises(CircuitError):
        Circuit(2, (gate("CNOT", 0, 2),))


def test_scalar_depth_counts_cnots():
    assert scalar_depth(Circuit(2)) == 0
    assert scalar_depth(_sample_circuit()) == 2


def test_benchmark_depth_and_qcna_amplification(schedule, pfa_config):
    target = pfa_circuit(schedule, pfa_config, 10)
    assert scalar_depth(target) == 20
    assert [scalar_depth(qcna_fold(target, r)) for r in range(4)] == [20, 60, 100, 140]
    with pytest.raises(CircuitError):
        qcna_fold(target, 4)


def test_inverse_undoes_circuit():
    c = _sample_circuit()
    product = circuit_unitary(concat(c, inverse(c)))
    np.testing.assert_allclose(product, np.eye(4), atol=1e-12)
    assert scalar_depth(inverse(c)) == scalar_depth(c)
    assert inverse(inverse(c)) == c


def test_power_and_depth_additivity():
    c = _sample_circuit()
    assert scalar_depth(power(c, 3)) == 3 * scalar_depth(c)
    np.testing.assert_allclose(
        circuit_unitary(power(c, 2)), circuit_unitary(c) @ circuit_unitary(c), atol=1e-12
    )
    assert scalar_depth(concat(c, power(c, 2))) == scalar_depth(c) + scalar_depth(power(c, 2))
    with pytest.raises(CircuitError):
        power(c, 0)


def test_fragment_and_concat_are_inverse():
    c = _sample_circuit()
    pieces = fragment(c, [2, 4])
    assert [len(p) for p in pieces] == [2, 2, 2]
    assert concat(*pieces) == c
    assert sum(scalar_depth(p) for p in pieces) == scalar_depth(c)
    with pytest.raises(CircuitError):
        fragment(c, [0])
    with pytest.raises(CircuitError):
        fragment(c, [4, 2])
    with pytest.raises(CircuitError):
        concat(c, Circuit(3))


def test_cnot_matrix_uses_first_qubit_as_control():
    flip = circuit_unitary(Circuit(2, (gate("CNOT", 0, 1),)))
    basis = np.eye(4)
    # |10> -> |11> with qubit 0 as the most significant bit
    np.testing.assert_allclose(flip @ basis[2], basis[3])
    np.testing.assert_allclose(flip @ basis[1], basis[1])


def test_slot_tags_survive_transformations():
    tagged = tag_entangling_slots(_sample_circuit(), start=5)
    assert [g.slot for g in tagged.gates if g.is_entangling] == [5, 6]
    assert [g.slot for g in inverse(tagged).gates if g.is_entangling] == [6, 5]
    folded = qcna_fold(tagged, 1)
    assert [g.slot for g in folded.gates if g.is_entangling] == [5, 5, 5, 6, 6, 6]
    compiled = randomized_compile(tagged, 3)
    assert [g.slot for g in compiled.gates if g.is_entangling] == [5, 6]


def test_randomized_compile_preserves_unitary(schedule, pfa_config):
    target = pfa_circuit(schedule, pfa_config, 3)
    reference = circuit_unitary(target)
    for seed in range(100):
        compiled = randomized_compile(target, seed)
        assert equal_up_to_phase(reference, circuit_unitary(compiled)) >= 1 - 1e-9
        assert scalar_depth(compiled) == scalar_depth(target)
        assert len(compiled) == len(target) + 4 * scalar_depth(target)


def test_randomized_compile_is_seeded():
    c = _sample_circuit()
    assert randomized_compile(c, 11) == randomized_compile(c, 11)
    draws = {randomized_compile(c, seed) for seed in range(20)}
    assert len(draws) > 1


def test_equal_up_to_phase():
    c = _sample_circuit()
    u = circuit_unitary(c)
    assert equal_up_to_phase(u, np.exp(0.4j) * u) == pytest.approx(1.0, abs=1e-12)
    assert equal_up_to_phase(u, circuit_unitary(Circuit(2))) < 1 - 1e-3


def test_text_round_trip():
    c = tag_entangling_slots(_sample_circuit())
    text = circuit_to_text(c)
    assert text.splitlines()[0] == "QUBITS 2"
    assert "CNOT 0,1 @0" in text
    assert circuit_from_text(text) == c


def test_text_parsing_errors():
    with pytest.raises(CircuitError):
        circuit_from_text("H 0\n")
    with pytest.raises(CircuitError):
        circuit_from_text("QUBITS 2\nRX 0,abc\n")
    with pytest.raises(CircuitError):
        circuit_from_text("QUBITS 2\nCNOT 0,1 slot\n")
