"""RBM amplitudes, sampler, estimators and stochastic reconfiguration."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from varground.exact_diag import SectorSpec, ground_state
from varground.models import HubbardParams, hubbard_hamiltonian, natural_energy_scale
from varground.pauli import PauliSum, expectation, random_pauli_sum
from varground.rbm import (
    Covariance,
    Move,
    RbmParams,
    Sampler,
    SamplerConfig,
    SrConfig,
    SrMode,
    bits_to_spins,
    estimate_step,
    exact_distribution,
    exact_estimate,
    local_energies,
    local_energy,
    log_derivatives,
    log_psi,
    params_from_text,
    params_to_text,
    sample,
    sr_update,
    spins_to_bits,
    vmc_run,
)

LN2 = math.log(2.0)


def all_spins(n):
    idx = np.arange(1 << n)
    return bits_to_spins((idx[:, None] >> np.arange(n)) & 1)


def amplitudes(p):
    return np.exp(log_psi(p, all_spins(p.n_visible)))


def test_zero_params():
    p = RbmParams.zeros(3, 2)
    assert log_psi(p, [1, -1, 1]) == pytest.approx(6 * LN2)
    d = log_derivatives(p, [1, -1, 1])
    np.testing.assert_array_equal(d[:3], [1, -1, 1])
    np.testing.assert_array_equal(d[3:], 0)


def test_visible_bias_only():
    p = RbmParams.zeros(3, 1)
    p.a[:] = 1.0
    s = np.array([1, -1, -1])
    assert log_psi(p, s) == pytest.approx(s.sum() + 3 * LN2)


def test_large_weights_do_not_overflow():
    p = RbmParams.zeros(2, 1)
    p.w[:] = 50.0
    val = log_psi(p, [1, 1])
    # two hidden units, each with |theta| = 100: ln 2cosh(100) = 100 up to 1e-87
    assert val == pytest.approx(200.0, abs=1e-12)
    assert math.isfinite(log_psi(p, [1, -1]))


def test_log_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        p = RbmParams.random(n, int(rng.integers(1, 3)), seed=int(rng.integers(1 << 30)), std=0.7)
        s = rng.choice([-1.0, 1.0], size=n)
        x = p.flat()
        fd = np.empty(x.size)
        for k in range(x.size):
            e = np.zeros(x.size)
            e[k] = 1e-6
            fd[k] = (log_psi(p.with_flat(x + e), s) - log_psi(p.with_flat(x - e), s)) / 2e-6
        worst = max(worst, float(np.max(np.abs(fd - log_derivatives(p, s)))))
    assert worst <= 1e-6


def test_flipping_a_spin_negates_its_visible_derivative():
    p = RbmParams.random(4, 2, seed=3, std=0.5)
    s = np.array([1.0, -1.0, 1.0, 1.0])
    t = s.copy()
    t[2] = -t[2]
    assert log_derivatives(p, t)[2] == -log_derivatives(p, s)[2]


def test_batched_and_single_agree():
    p = RbmParams.random(5, 2, seed=4, std=0.3)
    spins = all_spins(5)[:7]
    np.testing.assert_allclose(log_psi(p, spins), [log_psi(p, s) for s in spins])
    np.testing.assert_allclose(log_derivatives(p, spins), [log_derivatives(p, s) for s in spins])


def test_bad_spin_values():
    with pytest.raises(ValueError):
        log_psi(RbmParams.zeros(2, 1), [1, 0])
    with pytest.raises(ValueError):
        RbmParams(np.zeros(2), np.zeros(3), np.zeros((3, 2)))


def test_spin_bit_conversion():
    bits = np.array([0, 1, 1, 0])
    np.testing.assert_array_equal(spins_to_bits(bits_to_spins(bits)), bits)


def test_local_energy_small_cases():
    p = RbmParams.random(2, 1, seed=1, std=0.4)
    zz = PauliSum.from_terms(2, [("ZZ", 1.0)], constant=0.25)
    assert local_energy(zz, p, [1, 1]) == pytest.approx(1.25)
    x0 = PauliSum.from_terms(2, [("XI", 1.0)])
    assert local_energy(x0, RbmParams.zeros(2, 1), [1, -1]) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_exact_average_of_local_energy_is_the_expectation(seed):
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(10):
        letters = "".join(rng.choice(list("IXYZ"), size=4))
        # keep matrix elements real: an even number of Y letters
        if letters.count("Y") % 2:
            letters = letters.replace("Y", "X", 1)
        terms.append((letters, rng.normal()))
    h = PauliSum.from_terms(4, terms, constant=0.3)
    p = RbmParams.random(4, 2, seed=seed, std=0.5)
    spins, prob = exact_distribution(p)
    e_loc = local_energies(h, p, spins)
    assert prob @ e_loc == pytest.approx(expectation(h, amplitudes(p)), abs=1e-12)


def test_complex_elements_are_rejected():
    h = PauliSum.from_terms(2, [("YI", 1.0)])
    with pytest.raises(ValueError):
        local_energies(h, RbmParams.zeros(2, 1), [[1, 1]])


def test_uniform_target_has_zero_mean_spins():
    n_samples = 20000
    s = sample(RbmParams.zeros(6, 1), SamplerConfig(n_samples=n_samples, n_burn=50, seed=2))
    assert np.all(np.abs(s.mean(axis=0)) < 4 / math.sqrt(n_samples))


def test_exchange_moves_stay_in_the_sector():
    cfg = SamplerConfig(n_samples=2000, n_burn=20, move=Move.EXCHANGE_PAIR, sector=0, seed=5)
    s = sample(RbmParams.random(6, 2, seed=1, std=0.5), cfg)
    assert np.all(s.sum(axis=1) == 0)


def test_sector_needs_exchange_moves():
    with pytest.raises(ValueError):
        SamplerConfig(sector=0)
    with pytest.raises(ValueError):
        SamplerConfig(move="exchange_pair", sector=0, n_samples=1, n_burn=0)
        Sampler(4, SamplerConfig(move="exchange_pair", sector=0), init=[1, 1, 1, -1])


def test_sampler_is_deterministic_given_the_seed():
    p = RbmParams.random(5, 2, seed=0, std=0.3)
    cfg = SamplerConfig(n_samples=300, n_burn=10, seed=42)
    np.testing.assert_array_equal(sample(p, cfg), sample(p, cfg))


def test_histogram_matches_the_exact_distribution():
    # many chains, thinned, so the counts are close to independent draws
    p = RbmParams.random(4, 2, seed=1, std=0.3)
    _, prob = exact_distribution(p)
    cfg = SamplerConfig(n_samples=10**6, n_chains=1000, n_burn=500, thin=4, seed=0)
    s = sample(p, cfg)
    idx = (spins_to_bits(s) << np.arange(4)).sum(axis=1)
    counts = np.bincount(idx, minlength=16)
    expected = prob * counts.sum()
    assert chisquare(counts, expected).pvalue > 0.001
    assert np.all(np.abs(counts - expected) <= 5 * np.sqrt(expected * (1 - prob)))


def test_exact_distribution_in_a_sector():
    spins, prob = exact_distribution(RbmParams.random(4, 1, seed=0), sector=0)
    assert spins.shape == (6, 4) and prob.sum() == pytest.approx(1.0)


def test_eigenstate_has_zero_variance_and_zero_force():
    # ground state of -(X + g Z) on each of two qubits, written with visible biases only
    g = 0.6
    w, v = np.linalg.eigh(np.array([[-g, -1.0], [-1.0, g]]))
    up, down = np.abs(v[:, 0])  # bit 0 (s=+1) and bit 1 (s=-1)
    p = RbmParams.zeros(2, 1)
    p.a[:] = 0.5 * math.log(up / down)
    h = PauliSum.from_terms(2, [("XI", -1.0), ("IX", -1.0), ("ZI", -g), ("IZ", -g)])
    est = exact_estimate(h, p)
    assert est.e_loc_var < 1e-10
    assert est.energy == pytest.approx(2 * w[0], abs=1e-12)
    np.testing.assert_allclose(est.f, 0, atol=1e-10)
    samp = estimate_step(h, p, sample(p, SamplerConfig(n_samples=500, n_burn=10)))
    assert samp.e_loc_var < 1e-10
    np.testing.assert_allclose(samp.f, 0, atol=1e-10)


def test_exact_force_is_the_energy_gradient():
    h = hubbard_hamiltonian(HubbardParams(2, u=2.0))
    p = RbmParams.random(4, 2, seed=6, std=0.3)
    est = exact_estimate(h, p)
    x = p.flat()
    fd = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = 1e-5
        ep = expectation(h, amplitudes(p.with_flat(x + e)))
        em = expectation(h, amplitudes(p.with_flat(x - e)))
        fd[k] = (ep - em) / 2e-5
    assert np.max(np.abs(est.f - fd)) < 1e-4


def test_sampled_covariance_is_psd_and_factored_solve_is_exact():
    h = random_pauli_sum(4, 6, np.random.default_rng(0))
    h = PauliSum.from_terms(4, [(t.letters.replace("Y", "X"), t.coefficient) for t in h.terms])
    p = RbmParams.random(4, 2, seed=2, std=0.3)
    est = estimate_step(h, p, sample(p, SamplerConfig(n_samples=30, n_burn=10)))
    s = np.asarray(est.S)
    np.testing.assert_allclose(s, s.T, atol=1e-15)
    assert np.linalg.eigvalsh(s).min() >= -1e-10
    rhs = np.random.default_rng(1).normal(size=s.shape[0])
    direct = np.linalg.solve(s + 1e-3 * np.eye(s.shape[0]), rhs)
    np.testing.assert_allclose(est.S.solve(rhs, 1e-3), direct, rtol=1e-6, atol=1e-8)


def test_sampled_and_exact_estimates_agree():
    hp = HubbardParams(2, u=2.0)
    h = hubbard_hamiltonian(hp)
    p = RbmParams.random(4, 2, seed=3, std=0.3)
    exact = exact_estimate(h, p).energy
    est = estimate_step(h, p, sample(p, SamplerConfig(n_samples=20000, n_burn=200, seed=1)))
    assert abs(est.energy - exact) <= 4 * est.energy_err


def test_zero_force_leaves_params_unchanged():
    p = RbmParams.random(3, 1, seed=0)
    out = sr_update(p, np.zeros(p.n_params), np.eye(p.n_params), SrConfig())
    np.testing.assert_array_equal(out.flat(), p.flat())


def test_identity_metric_is_plain_gradient():
    p = RbmParams.random(3, 1, seed=0)
    f = np.random.default_rng(0).normal(size=p.n_params)
    sr = sr_update(p, f, np.eye(p.n_params), SrConfig(eta=0.1, lambda_reg=0.0))
    plain = sr_update(p, f, None, SrConfig(eta=0.1, mode=SrMode.PLAIN_GRADIENT))
    np.testing.assert_allclose(sr.flat(), plain.flat(), atol=1e-15)


def test_one_sr_step_solves_a_quadratic():
    # E(x) = 1/2 (x - x*)^T A (x - x*): force A (x - x*), metric A, unit step
    rng = np.random.default_rng(4)
    p = RbmParams.random(1, 1, seed=0)
    m = rng.normal(size=(3, 3))
    a = m @ m.T + np.eye(3)
    target = rng.normal(size=3)
    f = a @ (p.flat() - target)
    out = sr_update(p, f, a, SrConfig(eta=1.0, lambda_reg=0.0))
    np.testing.assert_allclose(out.flat(), target, atol=1e-12)


def test_non_symmetric_metric_is_rejected():
    p = RbmParams.random(1, 1, seed=0)
    with pytest.raises(ValueError):
        sr_update(p, np.ones(3), np.triu(np.ones((3, 3))), SrConfig())


def test_singular_solve_falls_back_to_the_gradient(caplog):
    p = RbmParams.random(1, 1, seed=0)
    f = np.ones(3)
    out = sr_update(p, f, np.zeros((3, 3)), SrConfig(eta=0.5, lambda_reg=0.0))
    np.testing.assert_allclose(out.flat(), p.flat() - 0.5 * f)
    assert "plain gradient" in caplog.text


def test_exact_mode_solves_the_xx_pair():
    h = PauliSum.from_terms(2, [("XX", -1.0)])
    r = vmc_run(h, RbmParams.random(2, 2, seed=0), None, SrConfig(n_iters=2000))
    assert abs(r.energies[-1] + 1.0) < 1e-3
    assert r.mean >= -1.0 - 1e-12


def test_exact_mode_trace_respects_the_variational_bound():
    hp = HubbardParams(2, u=4.0)
    h = hubbard_hamiltonian(hp)
    exact = ground_state(h, SectorSpec.hubbard_half_filling(2)).energy
    r = vmc_run(h, RbmParams.random(4, 2, seed=3), None, SrConfig(n_iters=300),
                energy_scale=natural_energy_scale(hp))  # fmt: skip
    assert np.all(r.energies >= exact - 1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_sampled_run_respects_the_variational_bound(seed):
    hp = HubbardParams(2, u=4.0)
    h = hubbard_hamiltonian(hp)
    exact = ground_state(h, SectorSpec.hubbard_half_filling(2)).energy
    cfg = SamplerConfig(n_samples=200, n_burn=100, seed=seed, move=Move.EXCHANGE_PAIR, sector=0)
    r = vmc_run(h, RbmParams.random(4, 2, seed=seed), cfg, SrConfig(n_iters=300),
                energy_scale=natural_energy_scale(hp))  # fmt: skip
    assert r.mean >= exact - 3 * r.err
    assert r.window == 75
    assert np.all((r.acceptance >= 0) & (r.acceptance <= 1))
    assert len(list(r.trace_rows())) == 300


def test_params_checkpoint_round_trip():
    p = RbmParams.random(4, 3, seed=9, std=0.2)
    back = params_from_text(params_to_text(p))
    np.testing.assert_array_equal(back.flat(), p.flat())


def test_covariance_materializes():
    o = np.random.default_rng(0).normal(size=(4, 6))
    np.testing.assert_allclose(np.asarray(Covariance(o)), o.T @ o)
