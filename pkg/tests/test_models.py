"""Model builders and the commuting term groups of the variational ansatz."""

import math

import numpy as np
import pytest

from varground.models import (
    HubbardParams,
    LadderParams,
    Normalization,
    Ordering,
    SchwingerParams,
    hubbard_hamiltonian,
    hva_term_groups,
    ising_example_hamiltonian,
    ladder_hamiltonian,
    natural_energy_scale,
    schwinger_hamiltonian,
    snake_to_interleaved,
    vqe_energy_scale,
)
from varground.pauli import commuting_group, to_dense


def lowest(h):
    return float(np.linalg.eigvalsh(to_dense(h))[0])


def same_sum(a, b, tol=1e-14):
    da, db = a.as_dict(), b.as_dict()
    assert set(da) == set(db)
    for k in da:
        assert abs(da[k] - db[k]) <= tol
    assert a.constant == pytest.approx(b.constant, abs=tol)


def test_hubbard_n4_free_ground_energy():
    assert lowest(hubbard_hamiltonian(HubbardParams(4))) == pytest.approx(-1.11803398874989, abs=1e-10)


def test_hubbard_dimer_closed_form():
    u = 4.0
    h = hubbard_hamiltonian(HubbardParams(2, t=1.0, u=u, normalization=Normalization.RAW))
    assert lowest(h) == pytest.approx(-(u + math.sqrt(u * u + 16)) / 2, abs=1e-12)


@pytest.mark.parametrize("u", [0.0, 1.5, 4.0])
def test_hubbard_orderings_are_unitarily_equivalent(u):
    snake = hubbard_hamiltonian(HubbardParams(3, u=u))
    inter = hubbard_hamiltonian(HubbardParams(3, u=u, ordering=Ordering.INTERLEAVED))
    np.testing.assert_allclose(
        np.linalg.eigvalsh(to_dense(snake)), np.linalg.eigvalsh(to_dense(inter)), atol=1e-12
    )


def test_snake_permutes_to_interleaved_term_by_term():
    # the JW strings differ, so only the interaction terms map one to one
    snake = hubbard_hamiltonian(HubbardParams(3, u=2.0))
    inter = hubbard_hamiltonian(HubbardParams(3, u=2.0, ordering=Ordering.INTERLEAVED))
    perm = snake_to_interleaved(3)
    moved = snake.permuted(perm).as_dict()
    for letters, c in inter.as_dict().items():
        if set(letters) <= {"I", "Z"}:
            assert moved[letters] == pytest.approx(c)


def test_raw_is_per_site_times_tn():
    t, u, n = 0.7, 2.0, 3
    per_site = hubbard_hamiltonian(HubbardParams(n, t=t, u=u))
    raw = hubbard_hamiltonian(HubbardParams(n, t=t, u=u, normalization=Normalization.RAW))
    same_sum(per_site.scaled(t * n), raw)


def test_hubbard_rejects_bad_params():
    with pytest.raises(ValueError):
        HubbardParams(1)
    with pytest.raises(ValueError):
        HubbardParams(2, t=0.0)


def test_schwinger_n4_ground_energy_per_site():
    h = schwinger_hamiltonian(SchwingerParams(4, x=100.0))
    assert lowest(h) / 4 == pytest.approx(-55.6279081848, abs=1e-9)


def test_schwinger_x0_is_diagonal():
    h = schwinger_hamiltonian(SchwingerParams(2, x=0.0))
    assert h.as_dict() == {"ZI": 0.5}
    assert h.constant == pytest.approx(0.5)
    assert lowest(h) == pytest.approx(0.0, abs=1e-14)


def test_schwinger_n2_against_hand_built_matrix():
    x = 1.0
    h = schwinger_hamiltonian(SchwingerParams(2, x=x))
    z0 = np.diag([1.0, -1.0, 1.0, -1.0])
    xx = np.kron(np.array([[0, 1], [1, 0]]), np.array([[0, 1], [1, 0]]))
    yy = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
    electric = 0.5 * (np.eye(4) + z0)
    mat = x / 2 * (xx + yy) + electric @ electric
    np.testing.assert_allclose(to_dense(h), mat, atol=1e-14)


def test_schwinger_odd_sites_rejected():
    with pytest.raises(ValueError):
        SchwingerParams(5)


def test_ladder_decoupled_bonds():
    c = 0.8
    h = ladder_hamiltonian(LadderParams(2, c_h=(c, c, c)))
    assert lowest(h) == pytest.approx(-6 * c, abs=1e-12)


def test_ladder_reproduces_hubbard_without_constant():
    n, u = 4, 2.0
    hop = -1.0 / (2 * n)
    ladder = ladder_hamiltonian(LadderParams(n, c_h=(hop, hop, 0.0), c_v=(0.0, 0.0, u / (4 * n))))
    same_sum(ladder, hubbard_hamiltonian(HubbardParams(n, u=u)).without_constant())


def test_ladder_is_hermitian():
    mat = to_dense(ladder_hamiltonian(LadderParams(2, c_h=(1, 1, 1), c_v=(1, 1, 1))))
    np.testing.assert_allclose(mat, mat.conj().T, atol=0)
    assert np.all(np.isreal(np.linalg.eigvals(mat).round(12)))


def test_ising_small_cases():
    assert lowest(ising_example_hamiltonian(2, 1.0, 0.0)) == pytest.approx(-1.0)
    assert lowest(ising_example_hamiltonian(2, 0.0, 1.0)) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        ising_example_hamiltonian(1, 1.0, 1.0)


def test_ladder_n2_groups():
    g = hva_term_groups(LadderParams(2, c_h=(1, 1, 1), c_v=(1, 1, 1)))
    assert len(g) == 12
    nonempty = [label for label, s in g.groups if len(s)]
    # one leg bond (even) and two rungs (one even, one odd), three letters each
    assert len(nonempty) == 9
    assert not any(label.startswith("h-odd") for label in nonempty)


@pytest.mark.parametrize(
    "source",
    [
        LadderParams(4, c_h=(0.3, -0.2, 0.5), c_v=(0.1, 0.4, -0.6)),
        HubbardParams(4, u=2.0),
        HubbardParams(6, u=4.0, normalization=Normalization.RAW),
        SchwingerParams(6, x=2.0, mu=0.5, ell=0.25),
    ],
)
def test_groups_partition_the_hamiltonian(source):
    g = hva_term_groups(source)
    if isinstance(source, LadderParams):
        h = ladder_hamiltonian(source)
    elif isinstance(source, HubbardParams):
        h = hubbard_hamiltonian(source)
    else:
        h = schwinger_hamiltonian(source)
    same_sum(g.total(), h)
    for _, s in g.groups:
        assert commuting_group(s.terms)
        if all(set(t.letters) <= {"I", "Z"} for t in s.terms):
            continue
        supports = [set(t.support) for t in s.terms]
        letters = {t.letters for t in s.terms}
        # hopping groups: XX and YY on one bond share support; bonds are disjoint
        bonds = {frozenset(x) for x in supports}
        total = sum(len(b) for b in bonds)
        assert total == len(set().union(*bonds)), letters


def test_schwinger_group_labels():
    g = hva_term_groups(SchwingerParams(4))
    assert g.labels == ("hop-even", "hop-odd", "Z", "ZZ")
    assert g.layout == "schwinger"


def test_interleaved_hubbard_has_no_ladder_groups():
    with pytest.raises(ValueError):
        hva_term_groups(HubbardParams(4, ordering=Ordering.INTERLEAVED))


def test_natural_energy_scale():
    assert natural_energy_scale(HubbardParams(4)) == 4.0
    assert natural_energy_scale(HubbardParams(4, t=2.0, normalization=Normalization.RAW)) == 0.5
    assert natural_energy_scale(SchwingerParams(4, x=100.0)) == pytest.approx(0.01)
    assert natural_energy_scale(LadderParams(2)) == 1.0
    assert vqe_energy_scale(HubbardParams(8)) == 4.0
    assert vqe_energy_scale(HubbardParams(8, t=2.0, normalization=Normalization.RAW)) == 0.25
    assert vqe_energy_scale(SchwingerParams(4, x=100.0)) == pytest.approx(0.01)
