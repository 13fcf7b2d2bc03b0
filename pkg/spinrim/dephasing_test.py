"""Unit tests for dephasing operators and sets."""

import dataclasses
import json

import numpy as np
import pytest
import scipy.linalg

from spinrim.dephasing import (
    DephasingSet,
    HashMismatchError,
    StrengthGrid,
    build_dephasing_op,
    decoherence_rates,
    generate_set,
    hamiltonian_hash,
    normalize_eigenvalues,
    sample_dephasing_op,
    validate_cp
)
from spinrim.liouville import dephasing_superop, hamiltonian_superop, \
    hermitian_basis
from spinrim.network import Controller, SpinNetwork, Topology, \
    build_hamiltonian


def _hamiltonian(size=3, topology=Topology.CHAIN, seed=0):
    rng = np.random.default_rng(seed)
    biases = rng.uniform(-5, 5, size) if seed is not None else np.zeros(size)
    ctrl = Controller(biases, 1., output_spin=size)
    return build_hamiltonian(SpinNetwork(size, topology), ctrl)


def test_decoherence_rates():
    """Tests gamma_kl = (c_k - c_l)^2 / 2 for c = (1, 0, 0)."""
    rates = decoherence_rates([1., 0., 0.])
    correct = np.array([[0., .5, .5], [.5, 0., 0.], [.5, 0., 0.]])
    assert np.allclose(rates, correct)


def test_normalize_eigenvalues():
    """Tests normalization scales c so the largest rate is one."""
    eigenvalues = normalize_eigenvalues([1., 0., 0.])
    assert np.allclose(eigenvalues, [np.sqrt(2), 0., 0.])
    assert np.isclose(decoherence_rates(eigenvalues).max(), 1.)


def test_normalize_equal_eigenvalues():
    """Tests all-equal eigenvalues are rejected."""
    with pytest.raises(ValueError):
        normalize_eigenvalues([0.3, 0.3, 0.3])


def test_build_dephasing_op_uniform_eigenvalues():
    """Tests c = (a, ..., a) dephases nothing."""
    op = build_dephasing_op(_hamiltonian(), [0.7, 0.7, 0.7])
    assert np.allclose(op.superop, 0., atol=1e-12)


def test_build_dephasing_op_wrong_count():
    """Tests one eigenvalue per eigenspace is required."""
    with pytest.raises(ValueError):
        build_dephasing_op(_hamiltonian(), [1., 0.])


def test_scaled_is_linear():
    """Tests the strength scales the generator linearly."""
    op = build_dephasing_op(_hamiltonian(), [1., 0., -1.])
    assert np.array_equal(op.scaled(0.05), 0.05 * op.superop)


def test_sampled_ops_pass_validation():
    """Tests sampled operators satisfy every constraint."""
    hamiltonian = _hamiltonian(5, Topology.RING)
    basis = hermitian_basis(5)
    superop = hamiltonian_superop(hamiltonian, basis)
    rng = np.random.default_rng(1)
    for _ in range(20):
        op = sample_dephasing_op(hamiltonian, rng, basis, superop)
        assert validate_cp(op, superop)
        assert np.isclose(op.rates.max(), 1.)
        eigenvalues = np.linalg.eigvalsh(op.superop)
        assert eigenvalues.max() <= 1e-12
        assert eigenvalues.min() >= -2. * op.rates.max() - 1e-10


def test_semigroup_contracts():
    """Tests eigenvalues of exp(t delta S) lie in (0, 1]."""
    hamiltonian = _hamiltonian(4)
    op = sample_dephasing_op(hamiltonian, np.random.default_rng(2))
    for scale in (0.01, 1., 10.):
        eigenvalues = np.linalg.eigvalsh(scipy.linalg.expm(scale * op.superop))
        assert np.all(eigenvalues > 0.)
        assert np.all(eigenvalues <= 1. + 1e-12)


def test_validate_cp_negative_rate():
    """Tests an injected negative rate is reported."""
    op = build_dephasing_op(_hamiltonian(), [1., 0., -1.])
    rates = op.rates.copy()
    rates[0, 1] = rates[1, 0] = -0.1
    report = validate_cp(dataclasses.replace(op, rates=rates))
    assert not report
    assert any("negative rate" in violation for violation in report.violations)
    assert "negative rate" in str(report)


def test_validate_cp_non_commuting():
    """Tests operators off the eigenspaces of H fail the commutation check."""
    hamiltonian = _hamiltonian(3)
    basis = hermitian_basis(3)
    op = build_dephasing_op(hamiltonian, [1., 0., -1.], basis)
    rotation = scipy.linalg.expm(np.array([[0., .3, 0.],
                                           [-.3, 0., .2],
                                           [0., -.2, 0.]]))
    rotated = rotation @ op.operator @ rotation.T
    op = dataclasses.replace(op, operator=rotated,
                             superop=dephasing_superop(rotated, basis))
    report = validate_cp(op, hamiltonian_superop(hamiltonian, basis))
    assert not report
    assert any("does not commute" in v for v in report.violations)


def test_degenerate_ring_operator_commutes():
    """Tests operators on grouped projectors of the uniform ring commute."""
    hamiltonian = _hamiltonian(3, Topology.RING, seed=None)
    assert len(hamiltonian.groups) == 2
    basis = hermitian_basis(3)
    superop = hamiltonian_superop(hamiltonian, basis)
    op = sample_dephasing_op(hamiltonian, np.random.default_rng(0), basis,
                             superop)
    assert validate_cp(op, superop)


def test_single_eigenspace_cannot_dephase():
    """Tests sampling fails for a Hamiltonian with one eigenspace."""
    ctrl = Controller(np.zeros(2), 1., output_spin=2)
    hamiltonian = build_hamiltonian(SpinNetwork(2), ctrl)
    hamiltonian = dataclasses.replace(
        hamiltonian, levels=hamiltonian.levels[:1],
        groups=[np.arange(2)]
    )
    with pytest.raises(ValueError):
        sample_dephasing_op(hamiltonian, np.random.default_rng(0))


def test_generate_set_deterministic():
    """Tests equal seeds give identical serialized sets."""
    hamiltonian = _hamiltonian(4)
    first = generate_set(hamiltonian, count=25, seed=42)
    second = generate_set(hamiltonian, count=25, seed=42)
    assert first.hamiltonian_hash == second.hamiltonian_hash
    assert json.dumps(first.to_dict()) == json.dumps(second.to_dict())
    assert np.array_equal(first.superops(), second.superops())
    other = generate_set(hamiltonian, count=25, seed=43)
    assert json.dumps(first.to_dict()) != json.dumps(other.to_dict())


def test_generate_set_singleton():
    """Tests count = 1 and invalid counts."""
    dephasing_set = generate_set(_hamiltonian(), count=1, seed=0)
    assert len(dephasing_set) == 1
    assert len(list(dephasing_set)) == 1

    with pytest.raises(ValueError):
        generate_set(_hamiltonian(), count=0)


def test_dephasing_set_round_trip():
    """Tests from_dict rebuilds the same superoperators."""
    hamiltonian = _hamiltonian(4)
    dephasing_set = generate_set(hamiltonian, count=10, seed=3)
    data = json.loads(json.dumps(dephasing_set.to_dict()))
    restored = DephasingSet.from_dict(data, hamiltonian)
    assert restored.seed == 3
    assert np.allclose(restored.superops(), dephasing_set.superops())


def test_dephasing_set_hash_mismatch():
    """Tests a set cannot be loaded for another Hamiltonian."""
    dephasing_set = generate_set(_hamiltonian(4, seed=0), count=2, seed=3)
    with pytest.raises(HashMismatchError):
        DephasingSet.from_dict(dephasing_set.to_dict(),
                               _hamiltonian(4, seed=1))


def test_hamiltonian_hash():
    """Tests the hash identifies the Hamiltonian matrix."""
    assert hamiltonian_hash(_hamiltonian(4, seed=0)) == \
        hamiltonian_hash(_hamiltonian(4, seed=0))
    assert hamiltonian_hash(_hamiltonian(4, seed=0)) != \
        hamiltonian_hash(_hamiltonian(4, seed=1))


def test_strength_grid():
    """Tests the default grid has 1001 points with step 1e-4."""
    grid = StrengthGrid()
    assert len(grid) == 1001
    assert grid.values[0] == 0.
    assert np.isclose(grid.values[1], 1e-4)
    assert np.isclose(grid.delta_max, 0.1)
    assert grid.index_of(0.05) == 500
    assert StrengthGrid.from_max(0.01, 10).index_of(0.01) == 10

    with pytest.raises(ValueError):
        grid.index_of(0.2)

    with pytest.raises(ValueError):
        StrengthGrid(steps=0)
