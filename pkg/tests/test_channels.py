import numpy as np
import pytest

from clawelab.errors import ChannelError
from clawelab.pipeline.channels import (
    DepolarizingSpec,
    KrausChannel,
    apply_channel,
    apply_superoperator,
    bit_flip_channel,
    depolarize,
    depolarizing_superoperator,
    extract_epsilon,
    haar_twirl_epsilon,
    haar_unitary,
    is_cptp,
    iterate_depolarize,
    kraus_to_superoperator,
    pauli_depolarizing_channel,
    superoperator_distance,
    twirl_average,
    unitary_channel,
    unitary_superoperator,
)
from clawelab.pipeline.circuits import Gate, gate_matrix
from clawelab.pipeline.states import PAULIS, basis_state, infinite_temperature, random_pure_state


def test_apply_channel_examples(rng):
    rho = random_pure_state(1, rng)
    assert np.allclose(apply_channel(unitary_channel(np.eye(2)), rho).data, rho.data)
    flipped = apply_channel(unitary_channel(PAULIS["X"]), basis_state("0"))
    np.testing.assert_allclose(flipped.data, basis_state("1").data)
    uniform = KrausChannel(1, tuple(0.5 * PAULIS[p] for p in "IXYZ"))
    np.testing.assert_allclose(apply_channel(uniform, rho).data, np.eye(2) / 2, atol=1e-12)


def test_apply_channel_errors():
    with pytest.raises(ChannelError):
        apply_channel(KrausChannel(1, (0.5 * np.eye(2),)), basis_state("0"))
    with pytest.raises(ChannelError):
        apply_channel(unitary_channel(np.eye(2)), basis_state("00"))


def test_is_cptp():
    assert is_cptp(KrausChannel(1, (np.eye(2),)), 1e-9)
    assert not is_cptp(KrausChannel(1, (0.5 * np.eye(2),)), 1e-9)
    for p in np.linspace(0, 1, 11):
        assert is_cptp(bit_flip_channel(p))
    assert is_cptp(pauli_depolarizing_channel(2, 0.3))


def test_depolarize_examples(rng):
    rho = random_pure_state(2, rng)
    np.testing.assert_allclose(depolarize(DepolarizingSpec(2, 0.0), rho).data, rho.data)
    np.testing.assert_allclose(depolarize(DepolarizingSpec(2, 1.0), rho).data, np.eye(4) / 4)
    q = haar_unitary(4, rng)
    spec = DepolarizingSpec(2, 0.3)
    left = depolarize(spec, rho).data
    rotated = depolarize(spec, type(rho)(2, q @ rho.data @ q.conj().T)).data
    np.testing.assert_allclose(rotated, q @ left @ q.conj().T, atol=1e-12)
    with pytest.raises(ChannelError):
        depolarize(DepolarizingSpec(1, 0.1), rho)
    with pytest.raises(ChannelError):
        DepolarizingSpec(1, 1.5)


def test_depolarize_semigroup(rng):
    rho = random_pure_state(2, rng)
    for _ in range(20):
        e1, e2 = rng.uniform(0, 1, size=2)
        twice = depolarize(DepolarizingSpec(2, e2), depolarize(DepolarizingSpec(2, e1), rho))
        once = depolarize(DepolarizingSpec(2, 1 - (1 - e1) * (1 - e2)), rho)
        assert np.max(np.abs(twice.data - once.data)) <= 1e-12


def test_pauli_depolarizing_matches_affine_form(rng):
    rho = random_pure_state(2, rng)
    via_kraus = apply_channel(pauli_depolarizing_channel(2, 0.2), rho)
    np.testing.assert_allclose(via_kraus.data, depolarize(DepolarizingSpec(2, 0.2), rho).data, atol=1e-12)


def test_iterate_depolarize_examples():
    signal, floor = iterate_depolarize(0.1, 2)
    assert signal == pytest.approx(0.81, abs=1e-12)
    assert floor == pytest.approx(0.19, abs=1e-12)
    assert iterate_depolarize(0.37, 0) == (1.0, 0.0)
    assert iterate_depolarize(0.37, 1) == pytest.approx((0.63, 0.37), abs=1e-12)
    with pytest.raises(ChannelError):
        iterate_depolarize(0.1, -1)


def test_iterate_depolarize_closure_and_composition(rng):
    for _ in range(100):
        eps = rng.uniform(0, 1)
        k = int(rng.integers(0, 40))
        j = int(rng.integers(0, 40))
        signal, floor = iterate_depolarize(eps, k)
        assert abs(signal + floor - 1) <= 1e-12
        # k then j iterations compose to k + j
        composed_signal = iterate_depolarize(eps, k)[0] * iterate_depolarize(eps, j)[0]
        assert abs(composed_signal - iterate_depolarize(eps, k + j)[0]) <= 1e-12


def test_superoperator_conventions(rng):
    rho = random_pure_state(1, rng)
    u = haar_unitary(2, rng)
    np.testing.assert_allclose(
        apply_superoperator(unitary_superoperator(u), rho).data, u @ rho.data @ u.conj().T, atol=1e-12
    )
    channel = bit_flip_channel(0.25)
    np.testing.assert_allclose(
        apply_superoperator(kraus_to_superoperator(channel), rho).data,
        apply_channel(channel, rho).data,
        atol=1e-12,
    )


def test_twirl_of_identity_and_depolarizing():
    identity = twirl_average(unitary_channel(np.eye(2)), 50, rng_seed=1)
    np.testing.assert_allclose(identity, np.eye(4), atol=1e-12)
    dep = twirl_average(pauli_depolarizing_channel(1, 0.2), 50, rng_seed=2)
    np.testing.assert_allclose(dep, depolarizing_superoperator(1, 0.2), atol=1e-12)


def test_twirl_fixes_infinite_temperature():
    rotation = unitary_channel(gate_matrix(Gate("RZ", (0,), 0.4)))
    twirled = twirl_average(rotation, 200, rng_seed=3)
    np.testing.assert_allclose(apply_superoperator(twirled, infinite_temperature(1)).data, np.eye(2) / 2, atol=1e-12)


def test_twirl_of_coherent_rotation_matches_haar_integral():
    rotation = unitary_channel(gate_matrix(Gate("RZ", (0,), 0.1)))
    oracle = haar_twirl_epsilon(rotation)
    assert oracle == pytest.approx(4 * np.sin(0.05) ** 2 / 3, rel=1e-12)
    twirled = twirl_average(rotation, 10_000, rng_seed=4)
    assert superoperator_distance(twirled, depolarizing_superoperator(1, oracle)) < 0.02
    assert extract_epsilon(twirled, 1).epsilon == pytest.approx(oracle, abs=2e-4)


def test_extract_epsilon():
    for eps in (0.0, 0.01, 0.1, 0.5, 1.0):
        fit = extract_epsilon(depolarizing_superoperator(2, eps), 2)
        assert abs(fit.epsilon - eps) <= 1e-10
        assert fit.residual <= 1e-10
    assert extract_epsilon(np.eye(4), 1).epsilon == pytest.approx(0.0, abs=1e-12)


def test_extract_epsilon_rejects_non_trace_preserving():
    with pytest.raises(ChannelError):
        extract_epsilon(0.5 * np.eye(4), 1)
