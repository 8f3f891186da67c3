"""Lanczos ground states, sector bases and their failure modes."""

from math import comb

import numpy as np
import pytest

from varground.exact_diag import (
    ConvergenceError,
    SectorLeakageError,
    SectorSpec,
    dense_ground_energy,
    ground_state,
    sector_basis,
)
from varground.models import (
    HubbardParams,
    Ordering,
    SchwingerParams,
    hubbard_hamiltonian,
    schwinger_hamiltonian,
)
from varground.pauli import PauliSum, expectation, matvec, random_pauli_sum


def test_single_z():
    r = ground_state(PauliSum.from_terms(1, [("Z", 1.0)]))
    assert r.energy == pytest.approx(-1.0, abs=1e-14)
    assert abs(r.vector[1]) == pytest.approx(1.0, abs=1e-12)


def test_hubbard_n6_u4():
    h = hubbard_hamiltonian(HubbardParams(6, u=4.0))
    ref = -2.51542755325090
    for sector in (SectorSpec.total_z(12, 0), SectorSpec.hubbard_half_filling(6)):
        assert ground_state(h, sector).energy == pytest.approx(ref, abs=1e-12)


def test_schwinger_n8_mu25():
    h = schwinger_hamiltonian(SchwingerParams(8, x=100.0, mu=2.5))
    e = ground_state(h, SectorSpec.total_z(8, 0)).energy
    assert e / 8 == pytest.approx(-57.9669117540, abs=1e-9)


@pytest.mark.parametrize(
    "n, sector, size",
    [
        (4, SectorSpec.total_z(4, 0), 6),
        (2, SectorSpec.total_z(2, 2), 1),
        (16, SectorSpec.total_z(16, 0), comb(16, 8)),
        (16, SectorSpec.hubbard_half_filling(8), comb(8, 4) ** 2),
    ],
)
def test_sector_sizes(n, sector, size):
    assert len(sector_basis(n, sector)) == size


def test_two_up_spins_is_bit_zero():
    basis = sector_basis(2, SectorSpec.total_z(2, 2))
    assert list(basis.states) == [0]


def test_unreachable_magnetization():
    with pytest.raises(ValueError):
        sector_basis(4, SectorSpec.total_z(4, 1))
    with pytest.raises(ValueError):
        sector_basis(4, SectorSpec.total_z(4, 6))


def test_leaky_sector_is_rejected():
    h = PauliSum.from_terms(2, [("XI", 1.0), ("ZZ", 1.0)])
    with pytest.raises(SectorLeakageError):
        ground_state(h, SectorSpec.total_z(2, 0))


def test_convergence_failure_reports_best_iterate():
    rng = np.random.default_rng(5)
    h = random_pauli_sum(8, 40, rng)
    with pytest.raises(ConvergenceError) as info:
        ground_state(h, tol=1e-14, max_iter=5, krylov_dim=3)
    err = info.value
    assert err.residual > 0 and np.isfinite(err.energy)


@pytest.mark.parametrize("seed", range(5))
def test_random_sums_match_dense(seed):
    rng = np.random.default_rng(seed)
    h = random_pauli_sum(6, 15, rng)
    r = ground_state(h)
    assert r.energy == pytest.approx(dense_ground_energy(h), abs=1e-10)
    v = r.full_vector()
    np.testing.assert_allclose(matvec(h, v), r.energy * v, atol=1e-9)


def test_complex_elements_take_the_complex_path():
    h = PauliSum.from_terms(2, [("XY", 0.7), ("ZI", 0.3), ("YZ", -0.2)])
    r = ground_state(h)
    assert np.iscomplexobj(r.vector)
    assert r.energy == pytest.approx(dense_ground_energy(h), abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("u", [0.0, 2.0, 8.0])
def test_orderings_have_equal_ground_energies(n, u):
    snake = hubbard_hamiltonian(HubbardParams(n, u=u))
    inter = hubbard_hamiltonian(HubbardParams(n, u=u, ordering=Ordering.INTERLEAVED))
    es = ground_state(snake, SectorSpec.hubbard_half_filling(n)).energy
    ei = ground_state(inter, SectorSpec.hubbard_half_filling(n, Ordering.INTERLEAVED)).energy
    assert es == pytest.approx(ei, abs=1e-12)


def test_sector_vector_embeds_to_an_eigenvector():
    h = hubbard_hamiltonian(HubbardParams(4, u=2.0))
    r = ground_state(h, SectorSpec.hubbard_half_filling(4))
    assert expectation(h, r.full_vector()) == pytest.approx(r.energy, abs=1e-12)
    assert r.residual_norm < 1e-10


def test_disjoint_blocks_required():
    with pytest.raises(ValueError):
        SectorSpec.block_z([((0, 1), 0), ((1, 2), 0)]).validate(3)
