"""Restricted-Boltzmann-machine variational Monte Carlo.

The amplitude of a spin configuration ``s`` (``s_k = +1`` for bit 0) is

    psi(s) = exp(sum_j a_j s_j) * prod_i 2 cosh(b_i + sum_j W_ij s_j)

with real parameters, so ``psi > 0``.  Parameters are flattened as the
``a`` block, the ``b`` block, then ``W`` row-major.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .pauli import PauliSum

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
N_BINS = 20
EXACT_MAX_QUBITS = 16


@dataclass
class RbmParams:
    a: np.ndarray  # (N,)
    b: np.ndarray  # (M,)
    w: np.ndarray  # (M, N)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (self.b.size, self.a.size):
            raise ValueError(f"W has shape {self.w.shape}, expected {(self.b.size, self.a.size)}")
        if self.b.size % self.a.size:
            raise ValueError("hidden count must be an integer multiple of the visible count")
        if not (np.isfinite(self.a).all() and np.isfinite(self.b).all() and np.isfinite(self.w).all()):
            raise ValueError("RBM parameters must be finite")

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @property
    def alpha(self) -> int:
        return self.n_hidden // self.n_visible

    @property
    def n_params(self) -> int:
        return self.a.size + self.b.size + self.w.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.w.reshape(-1)])

    def with_flat(self, x: np.ndarray) -> RbmParams:
        n, m = self.n_visible, self.n_hidden
        x = np.asarray(x, dtype=float)
        if x.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {x.size}")
        return RbmParams(x[:n].copy(), x[n : n + m].copy(), x[n + m :].reshape(m, n).copy())

    @classmethod
    def zeros(cls, n_visible: int, alpha: int) -> RbmParams:
        m = alpha * n_visible
        return cls(np.zeros(n_visible), np.zeros(m), np.zeros((m, n_visible)))

    @classmethod
    def random(cls, n_visible: int, alpha: int, seed: int = 0, std: float = 0.01) -> RbmParams:
        if alpha < 1 or n_visible < 1:
            raise ValueError("need alpha >= 1 and at least one visible unit")
        rng = np.random.default_rng(seed)
        m = alpha * n_visible
        return cls(
            rng.normal(0, std, n_visible), rng.normal(0, std, m), rng.normal(0, std, (m, n_visible))
        )


def bits_to_spins(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def spins_to_bits(s) -> np.ndarray:
    return ((1 - np.asarray(s)) // 2).astype(np.int64)


def _as_spins(p: RbmParams, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != p.n_visible:
        raise ValueError(f"configuration of length {s.shape[-1]} for {p.n_visible} visible units")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("spin values must be +1 or -1")
    return s


def _theta(p: RbmParams, s: np.ndarray) -> np.ndarray:
    return p.b + s @ p.w.T


def log_psi(p: RbmParams, s) -> float | np.ndarray:
    """``ln psi(s)``; ``s`` may be one configuration or a batch (rows)."""
    s = _as_spins(p, s)
    val = s @ p.a + (math.log(2.0) + _kernels.lncosh(_theta(p, s))).sum(axis=-1)
    return float(val) if s.ndim == 1 else val


def log_derivatives(p: RbmParams, s) -> np.ndarray:
    """``d ln psi / d theta_k`` in the flat parameter order; batched over rows."""
    s = _as_spins(p, s)
    single = s.ndim == 1
    s2 = np.atleast_2d(s)
    t = np.tanh(_theta(p, s2))
    out = np.concatenate([s2, t, (t[:, :, None] * s2[:, None, :]).reshape(s2.shape[0], -1)], axis=1)
    return out[0] if single else out


def local_energies(h: PauliSum, p: RbmParams, spins) -> np.ndarray:
    """``E_loc(s) = sum_s' <s|H|s'> psi(s') / psi(s)`` for each row, constant included."""
    if h.n_qubits != p.n_visible:
        raise ValueError("Hamiltonian and RBM sizes differ")
    spins = np.ascontiguousarray(np.atleast_2d(_as_spins(p, spins)), dtype=float)
    theta = np.ascontiguousarray(_theta(p, spins))
    out = np.empty(spins.shape[0])
    _kernels.local_energies(
        spins, theta, p.a, np.ascontiguousarray(p.w), *h.flip_structure(), out
    )
    return out


def local_energy(h: PauliSum, p: RbmParams, s) -> float:
    return float(local_energies(h, p, np.asarray(s, dtype=float).reshape(1, -1))[0])


# --------------------------------------------------------------------------
# sampling


class Move(str, enum.Enum):
    SINGLE_FLIP = "single_flip"
    EXCHANGE_PAIR = "exchange_pair"


@dataclass(frozen=True)
class SamplerConfig:
    """Markov-chain settings; one sweep is ``N`` proposals per chain.

    ``sector`` is a target for ``sum_k s_k`` (``+1`` per bit 0); it requires
    the exchange move, which preserves it.
    """

    n_samples: int = 1000
    n_burn: int = 1000
    thin: int = 1
    move: Move = Move.SINGLE_FLIP
    seed: int = 0
    sector: int | None = None
    n_chains: int = 1

    def __post_init__(self):
        object.__setattr__(self, "move", Move(self.move))
        if self.n_samples < 0 or self.n_burn < 0:
            raise ValueError("n_samples and n_burn must be >= 0")
        if self.thin < 1 or self.n_chains < 1:
            raise ValueError("thin and n_chains must be >= 1")
        if self.sector is not None and self.move is not Move.EXCHANGE_PAIR:
            raise ValueError("a magnetization sector needs the exchange move")


class Sampler:
    """Persistent Metropolis chains over ``|psi|^2``.

    The first call burns in for ``n_burn`` sweeps; later calls continue the
    chains from where they stopped, so consecutive optimization steps do not
    pay for a fresh burn-in.
    """

    def __init__(self, n_visible: int, cfg: SamplerConfig, init=None):
        self.n = n_visible
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.burned = False
        nc = cfg.n_chains
        if init is not None:
            spins = np.array(np.broadcast_to(np.asarray(init, dtype=float), (nc, n_visible)))
        elif cfg.sector is not None:
            n_up = (n_visible + cfg.sector) // 2
            if (n_visible + cfg.sector) % 2 or not 0 <= n_up <= n_visible:
                raise ValueError(f"no configuration of {n_visible} spins has sum {cfg.sector}")
            base = np.array([1.0] * n_up + [-1.0] * (n_visible - n_up))
            spins = np.array([self.rng.permutation(base) for _ in range(nc)])
        else:
            spins = self.rng.choice([-1.0, 1.0], size=(nc, n_visible))
        if not np.all(np.abs(spins) == 1.0):
            raise ValueError("spin values must be +1 or -1")
        if cfg.sector is not None and np.any(spins.sum(axis=1) != cfg.sector):
            raise ValueError("initial configuration is outside the sector")
        if cfg.move is Move.EXCHANGE_PAIR and np.any(np.abs(spins.sum(axis=1)) == n_visible):
            raise ValueError("exchange moves need both spin values present")
        self.spins = np.ascontiguousarray(spins)
        self.n_proposed = 0
        self.n_accepted = 0

    def _advance(self, p: RbmParams, n_steps: int, keep_every: int, n_keep: int) -> np.ndarray:
        nc = self.cfg.n_chains
        out = np.empty((n_keep, nc, self.n))
        if n_steps == 0:
            return out
        theta = np.ascontiguousarray(_theta(p, self.spins))
        w = np.ascontiguousarray(p.w)
        u = self.rng.random((n_steps, nc))
        if self.cfg.move is Move.SINGLE_FLIP:
            sites = self.rng.integers(0, self.n, size=(n_steps, nc))
            acc = _kernels.flip_chain(self.spins, theta, p.a, w, sites, u, keep_every, out)
        else:
            r1 = self.rng.random((n_steps, nc))
            r2 = self.rng.random((n_steps, nc))
            acc = _kernels.exchange_chain(self.spins, theta, p.a, w, r1, r2, u, keep_every, out)
        self.n_proposed += n_steps * nc
        self.n_accepted += int(acc)
        return out

    def sample(self, p: RbmParams) -> np.ndarray:
        """``(n_samples, N)`` configurations, chain-major in time order."""
        if p.n_visible != self.n:
            raise ValueError("RBM and sampler sizes differ")
        cfg = self.cfg
        if not self.burned:
            self._advance(p, cfg.n_burn * self.n, 0, 0)
            self.burned = True
        per_chain = -(-cfg.n_samples // cfg.n_chains)
        step = cfg.thin * self.n
        rec = self._advance(p, per_chain * step, step, per_chain)
        return rec.transpose(1, 0, 2).reshape(-1, self.n)[: cfg.n_samples]

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0


def sample(p: RbmParams, cfg: SamplerConfig, init=None) -> np.ndarray:
    """Burn in a fresh sampler and return ``cfg.n_samples`` configurations."""
    return Sampler(p.n_visible, cfg, init).sample(p)


def exact_distribution(p: RbmParams, sector: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All configurations (optionally with ``sum s = sector``) and ``|psi|^2 / Z``."""
    n = p.n_visible
    if n > EXACT_MAX_QUBITS:
        raise ValueError(f"exact summation over {n} spins exceeds the cap of {EXACT_MAX_QUBITS}")
    idx = np.arange(1 << n, dtype=np.int64)
    spins = bits_to_spins((idx[:, None] >> np.arange(n)) & 1)
    if sector is not None:
        spins = spins[spins.sum(axis=1) == sector]
        if not spins.size:
            raise ValueError("sector is empty")
    lp = 2.0 * log_psi(p, spins)
    prob = np.exp(lp - lp.max())
    return spins, prob / prob.sum()


# --------------------------------------------------------------------------
# estimators and updates


class Covariance:
    """``S = O^T O`` kept in factored form (``O`` centered, rows weighted).

    Materialize with ``np.asarray(S)``; :meth:`solve` applies the Woodbury
    identity when there are fewer rows than parameters.
    """

    def __init__(self, o: np.ndarray):
        self.o = o

    @property
    def shape(self):
        return (self.o.shape[1], self.o.shape[1])

    def dense(self) -> np.ndarray:
        return self.o.T @ self.o

    def __array__(self, dtype=None, copy=None):
        d = self.dense()
        return d if dtype is None else d.astype(dtype)

    def solve(self, rhs: np.ndarray, shift: float) -> np.ndarray:
        """``(S + shift I)^{-1} rhs``."""
        n_rows, n_par = self.o.shape
        if n_rows < n_par and shift > 0:
            small = self.o @ self.o.T
            small[np.diag_indices_from(small)] += shift
            ob = self.o @ rhs
            return (rhs - self.o.T @ _spd_solve(small, ob)) / shift
        mat = self.dense()
        mat[np.diag_indices_from(mat)] += shift
        return _spd_solve(mat, rhs)


def _spd_solve(mat, rhs):
    import scipy.linalg

    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(mat), rhs)
    except np.linalg.LinAlgError:
        return scipy.linalg.solve(mat, rhs, assume_a="sym")


@dataclass
class StepEstimate:
    energy: float
    energy_err: float
    f: np.ndarray
    S: Covariance
    e_loc_var: float


def _binned_error(values: np.ndarray, n_bins: int = N_BINS) -> float:
    n = values.size
    if n < 2:
        return 0.0
    k = min(n_bins, n)
    means = np.array([b.mean() for b in np.array_split(values, k)])
    return float(means.std(ddof=1) / math.sqrt(k))


def _estimate(e_loc: np.ndarray, derivs: np.ndarray, w: np.ndarray, err: float) -> StepEstimate:
    e_mean = float(w @ e_loc)
    o_mean = w @ derivs
    oc = derivs - o_mean
    de = e_loc - e_mean
    f = 2.0 * (w * de) @ oc
    s = Covariance(np.sqrt(w)[:, None] * oc)
    return StepEstimate(e_mean, err, f, s, float(w @ de**2))


def estimate_step(h: PauliSum, p: RbmParams, samples) -> StepEstimate:
    """Sample means of ``E_loc``, the force ``f`` and the covariance ``S``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("no samples")
    e_loc = local_energies(h, p, samples)
    w = np.full(samples.shape[0], 1.0 / samples.shape[0])
    return _estimate(e_loc, log_derivatives(p, samples), w, _binned_error(e_loc))


def exact_estimate(h: PauliSum, p: RbmParams, sector: int | None = None) -> StepEstimate:
    """The same quantities summed over every configuration with weight ``|psi|^2/Z``."""
    spins, prob = exact_distribution(p, sector)
    e_loc = local_energies(h, p, spins)
    return _estimate(e_loc, log_derivatives(p, spins), prob, 0.0)


class SrMode(str, enum.Enum):
    SR = "sr"
    PLAIN_GRADIENT = "plain_gradient"


@dataclass(frozen=True)
class SrConfig:
    """``eta`` plays the role of ``1/(2 mu)`` in the SR update."""

    eta: float = 0.02
    lambda_reg: float = 1e-3
    n_iters: int = 1000
    mode: SrMode = SrMode.SR

    def __post_init__(self):
        object.__setattr__(self, "mode", SrMode(self.mode))
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be >= 0")
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")


def sr_update(p: RbmParams, f, S, cfg: SrConfig) -> RbmParams:
    """One update: SR solves ``(S + lambda I) d = -eta f``; plain gradient uses ``d = -eta f``.

    A failed or non-finite solve falls back to the plain gradient step.
    """
    f = np.asarray(f, dtype=float)
    if cfg.mode is SrMode.PLAIN_GRADIENT:
        return p.with_flat(p.flat() - cfg.eta * f)
    if isinstance(S, Covariance):
        solve = S.solve
    else:
        mat = np.array(S, dtype=float)
        if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
            raise ValueError("S must be symmetric")

        def solve(rhs, shift):
            shifted = mat.copy()
            shifted[np.diag_indices_from(shifted)] += shift
            return _spd_solve(shifted, rhs)

    try:
        step = -cfg.eta * solve(f, cfg.lambda_reg)
        if not np.isfinite(step).all():
            raise np.linalg.LinAlgError("non-finite SR step")
    except np.linalg.LinAlgError as exc:
        log.warning("SR solve failed (%s); taking a plain gradient step", exc)
        step = -cfg.eta * f
    return p.with_flat(p.flat() + step)


# --------------------------------------------------------------------------
# optimization loop


@dataclass
class VmcResult:
    energies: np.ndarray
    errors: np.ndarray
    acceptance: np.ndarray
    grad_norms: np.ndarray
    params: RbmParams
    mean: float
    err: float
    window: int
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def trace_rows(self):
        for i in range(self.energies.size):
            yield i, float(self.energies[i]), float(self.errors[i]), float(self.acceptance[i]), float(
                self.grad_norms[i]
            )


def vmc_run(
    h: PauliSum,
    init: RbmParams,
    sampler: SamplerConfig | None,
    sr: SrConfig,
    exact: bool = False,
    window_fraction: float = 0.25,
    energy_scale: float = 1.0,
) -> VmcResult:
    """Sample, estimate, update; ``sr.n_iters`` times.

    With ``exact=True`` (or ``sampler=None``) every step sums over all
    configurations instead of sampling.  The reported value is the mean of
    the per-step energies over the trailing ``window_fraction`` of steps,
    with their standard deviation as the error bar.

    Forces are taken for ``energy_scale * H`` (so ``eta`` is an imaginary
    time step in those units); recorded energies are in the units of ``h``.
    """
    if h.n_qubits != init.n_visible:
        raise ValueError("Hamiltonian and RBM sizes differ")
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must be in (0, 1]")
    if not (energy_scale > 0 and math.isfinite(energy_scale)):
        raise ValueError("energy_scale must be positive")
    t0 = time.perf_counter()
    h_opt = h.scaled(energy_scale) if energy_scale != 1.0 else h
    exact = exact or sampler is None
    chain = None if exact else Sampler(init.n_visible, sampler)
    sector = sampler.sector if sampler is not None else None
    p = init
    n_it = sr.n_iters
    energies, errors, accs, gns = (np.empty(n_it) for _ in range(4))
    for it in range(n_it):
        if exact:
            est = exact_estimate(h_opt, p, sector)
            accs[it] = 1.0
        else:
            before = (chain.n_accepted, chain.n_proposed)
            est = estimate_step(h_opt, p, chain.sample(p))
            dp = chain.n_proposed - before[1]
            accs[it] = (chain.n_accepted - before[0]) / dp if dp else 0.0
        if not math.isfinite(est.energy):
            raise FloatingPointError(f"non-finite energy at iteration {it}")
        energies[it] = est.energy / energy_scale
        errors[it] = est.energy_err / energy_scale
        gns[it] = float(np.linalg.norm(est.f)) / energy_scale
        p = sr_update(p, est.f, est.S, sr)
    window = max(1, int(round(window_fraction * n_it)))
    tail = energies[-window:]
    return VmcResult(
        energies,
        errors,
        accs,
        gns,
        p,
        float(tail.mean()),
        float(tail.std(ddof=1)) if window > 1 else float(errors[-1]),
        window,
        time.perf_counter() - t0,
    )


def params_to_text(p: RbmParams) -> str:
    lines = [f"varground-rbm-params {CHECKPOINT_VERSION}", f"n {p.n_visible}", f"m {p.n_hidden}"]
    lines += [format(float(x), ".17g") for x in p.flat()]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> RbmParams:
    rows = text.split()
    if rows[:2] != ["varground-rbm-params", str(CHECKPOINT_VERSION)]:
        raise ValueError("not an RBM parameter checkpoint")
    n, m = int(rows[3]), int(rows[5])
    x = np.array([float(v) for v in rows[6:]])
    if x.size != n + m + n * m:
        raise ValueError("truncated checkpoint")
    return RbmParams.zeros(n, m // n).with_flat(x)
