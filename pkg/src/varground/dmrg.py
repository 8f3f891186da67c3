"""Two-site DMRG over a fixed MPO."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exact_diag import lanczos_ground
from .mpo import Mpo, apply_mpo, contract_left, contract_right, mpo_expectation, projector_mpo
from .mps import MixedCanonical, Mps, compress_mps, random_mps, right_canonicalize


@dataclass(frozen=True)
class DmrgConfig:
    chi_max: int = 128
    n_sweeps: int = 8
    svd_cutoff: float = 1e-12
    local_tol: float = 1e-10
    energy_tol: float = 1e-12
    local_max_iter: int = 400
    krylov_dim: int = 40
    init_chi: int = 8
    seed: int = 0
    sector: object = None  # SectorSpec; the random start is projected into it

    def __post_init__(self):
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if self.n_sweeps < 1:
            raise ValueError("n_sweeps must be >= 1")
        if self.svd_cutoff < 0 or self.local_tol <= 0 or self.energy_tol < 0:
            raise ValueError("tolerances must be nonnegative (local_tol positive)")


@dataclass
class Environments:
    """``left[i]`` contracts sites ``< i``; ``right[i]`` contracts sites ``>= i``.

    Entries not yet computed are ``None``.  Index order is (ket bond, bra
    bond, operator bond).
    """

    left: list
    right: list


@dataclass
class DmrgResult:
    energy: float
    state: MixedCanonical
    trace: list[float]  # local eigenvalue after every two-site update
    discarded: list[float]
    sweep_energies: list[float]
    local_residuals: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def max_discarded(self) -> float:
        return max(self.discarded) if self.discarded else 0.0


def boundary_envs(o: Mpo) -> tuple[np.ndarray, np.ndarray]:
    wl = o.tensors[0].shape[0]
    wr = o.tensors[-1].shape[3]
    left = np.zeros((1, 1, wl), dtype=o.tensors[0].dtype)
    left[0, 0, :] = o.v_left
    right = np.zeros((1, 1, wr), dtype=o.tensors[-1].dtype)
    right[0, 0, :] = o.v_right
    return left, right


def build_environments(o: Mpo, m: MixedCanonical, center: int | None = None) -> Environments:
    """Left environments up to ``center`` and right environments from it on."""
    c = m.center if center is None else center
    if c != m.center:
        raise ValueError(f"state is centered at {m.center}, not {c}")
    n = o.n_sites
    if m.n_sites != n:
        raise ValueError("MPO and MPS sizes differ")
    lb, rb = boundary_envs(o)
    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0] = lb
    right[n] = rb
    for i in range(c):
        left[i + 1] = contract_left(left[i], m.left[i], o.tensors[i])
    for i in range(n - 1, c - 1, -1):
        right[i] = contract_right(right[i + 1], m.right[i - c], o.tensors[i])
    return Environments(left, right)


def apply_heff(left, w1, w2, right, theta):
    x = np.tensordot(left, theta, axes=(0, 0))  # (g, a, s1, s2, br)
    x = np.tensordot(x, w1, axes=([1, 2], [0, 2]))  # (g, s2, br, t1, a')
    x = np.tensordot(x, w2, axes=([4, 1], [0, 2]))  # (g, br, t1, t2, a'')
    x = np.tensordot(x, right, axes=([1, 4], [0, 2]))  # (g, t1, t2, gr)
    return x


def local_ground(
    env_left: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
    env_right: np.ndarray,
    theta0: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 400,
    krylov_dim: int = 40,
) -> tuple[float, np.ndarray, float]:
    """Lowest eigenpair of the two-site effective Hamiltonian, from ``theta0``.

    Returns ``(eigenvalue, theta, residual)``.  If Lanczos does not reach
    ``tol`` the best iterate is returned and the residual tells by how much.
    """
    shape = theta0.shape

    def apply(v):
        return apply_heff(env_left, w1, w2, env_right, v.reshape(shape)).reshape(-1)

    v0 = theta0.reshape(-1)
    e, x, resid, _ = lanczos_ground(
        apply, v0, tol=tol, max_iter=max_iter, krylov_dim=krylov_dim, raise_on_fail=False
    )
    return e, x.reshape(shape), resid


def truncate_split(theta: np.ndarray, chi_max: int, cutoff: float = 1e-12):
    """Split ``theta`` (chi_l, d, d, chi_r) into ``A, lam, B`` keeping <= chi_max values.

    Values at or below ``cutoff`` times the largest are dropped; at least one
    is always kept.  Kept values are rescaled so their squares sum to the
    pre-truncation total.  Returns ``(A, lam, B, discarded_weight)``.
    """
    chi_l, d1, d2, chi_r = theta.shape
    u, s, vh = np.linalg.svd(theta.reshape(chi_l * d1, d2 * chi_r), full_matrices=False)
    # LAPACK already sorts descending; the stable sort pins the order of ties
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order]
    total = float(np.sum(s**2))
    above = int(np.count_nonzero(s > cutoff * s[0])) if s[0] > 0 else 1
    k = max(1, min(chi_max, above))
    kept = s[:k]
    discarded = float(np.sum(s[k:] ** 2))
    kept_w = float(np.sum(kept**2))
    if kept_w > 0 and discarded > 0:
        kept = kept * math.sqrt(total / kept_w)
    a = u[:, :k].reshape(chi_l, d1, k)
    b = vh[:k].reshape(k, d2, chi_r)
    return a, kept, b, discarded


def _init_state(o: Mpo, cfg: DmrgConfig) -> Mps:
    """Seeded random MPS, projected into ``cfg.sector`` when one is given.

    Two-site updates cannot repopulate a symmetry sector once truncation has
    emptied it, so a conserved quantum number is best fixed from the start.
    """
    dtype = np.result_type(*[w.dtype for w in o.tensors])
    chi = min(cfg.chi_max, cfg.init_chi)
    m = random_mps(o.n_sites, chi, seed=cfg.seed, dtype=dtype)
    if cfg.sector is None or not cfg.sector.constraints:
        return m
    return compress_mps(apply_mpo(projector_mpo(o.n_sites, cfg.sector), m), chi)


def dmrg_run(o: Mpo, init: Mps | None = None, cfg: DmrgConfig | None = None) -> DmrgResult:
    """Alternating left-to-right and right-to-left two-site sweeps.

    One sweep is a pass to the right followed by a pass back, 2(N-1) updates.
    Stops after ``n_sweeps`` or once a sweep lowers the energy by less than
    ``energy_tol`` (floored at 1e-14 relative, the attainable precision).
    """
    cfg = cfg or DmrgConfig()
    t0 = time.perf_counter()
    n = o.n_sites
    if n < 2:
        raise ValueError("two-site DMRG needs at least two sites")
    psi = right_canonicalize(init if init is not None else _init_state(o, cfg))
    ms = [t.copy() for t in psi.tensors]
    ms[0] = ms[0] * psi.scale / abs(psi.scale)
    ws = o.tensors
    lb, rb = boundary_envs(o)
    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0], right[n] = lb, rb
    for i in range(n - 1, 0, -1):
        right[i] = contract_right(right[i + 1], ms[i], ws[i])

    trace, discarded, resids, sweep_e = [], [], [], []
    lam = None

    def update(i, moving_right):
        theta = np.tensordot(ms[i], ms[i + 1], axes=(2, 0))
        theta = theta / np.linalg.norm(theta)
        e, theta, res = local_ground(
            left[i], ws[i], ws[i + 1], right[i + 2], theta,
            tol=cfg.local_tol, max_iter=cfg.local_max_iter, krylov_dim=cfg.krylov_dim,
        )  # fmt: skip
        a, s, b, dw = truncate_split(theta, cfg.chi_max, cfg.svd_cutoff)
        trace.append(e)
        discarded.append(dw)
        resids.append(res)
        if moving_right:
            ms[i] = a
            ms[i + 1] = s[:, None, None] * b
            left[i + 1] = contract_left(left[i], a, ws[i])
        else:
            ms[i] = a * s[None, None, :]
            ms[i + 1] = b
            right[i + 1] = contract_right(right[i + 2], b, ws[i + 1])
        return a, s, b

    prev = math.inf
    for _ in range(cfg.n_sweeps):
        for i in range(n - 1):
            update(i, True)
        for i in range(n - 2, -1, -1):
            a, lam, b = update(i, False)
        e_sweep = trace[-1]
        sweep_e.append(e_sweep)
        if prev - e_sweep < max(cfg.energy_tol, 1e-14 * abs(e_sweep)):
            break
        prev = e_sweep
    state = MixedCanonical([a], lam, [b] + ms[2:])
    energy = float(mpo_expectation(o, state.to_mps()).real)
    return DmrgResult(
        energy, state, trace, discarded, sweep_e, resids, time.perf_counter() - t0
    )
