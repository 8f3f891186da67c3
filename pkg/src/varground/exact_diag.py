"""Lowest eigenpair of a Pauli sum by Lanczos on the matrix-free matvec.

Full-space vectors are limited by memory, not by this module: at 16 qubits a
real vector is 0.5 MB and the Krylov basis a few tens of MB.  Magnetization
sectors shrink the problem when the Hamiltonian conserves them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels
from .pauli import PauliSum


class ConvergenceError(RuntimeError):
    """Lanczos did not reach the requested residual."""

    def __init__(self, msg, energy=None, residual=None, vector=None):
        super().__init__(msg)
        self.energy = energy
        self.residual = residual
        self.vector = vector


class SectorLeakageError(ValueError):
    """The Hamiltonian maps the requested sector outside itself."""


@dataclass(frozen=True)
class SectorSpec:
    """Conjunction of magnetization constraints ``sum_{k in qubits} s_k = m``.

    ``s_k = +1`` for bit 0.  No constraints means the full space.
    """

    constraints: tuple[tuple[tuple[int, ...], int], ...] = ()

    @classmethod
    def none(cls) -> SectorSpec:
        return cls()

    @classmethod
    def total_z(cls, n_qubits: int, m: int) -> SectorSpec:
        return cls((((tuple(range(n_qubits))), int(m)),))

    @classmethod
    def block_z(cls, blocks: Sequence[tuple[Sequence[int], int]]) -> SectorSpec:
        """Independent magnetization targets on disjoint qubit blocks."""
        return cls(tuple((tuple(q), int(m)) for q, m in blocks))

    @classmethod
    def hubbard_half_filling(cls, n_sites: int, ordering: str = "snake") -> SectorSpec:
        """Zero magnetization on each spin species (snake: legs; interleaved: parity).

        An odd chain cannot split its N electrons evenly between the species,
        so only the total count (zero total magnetization) is fixed there.
        """
        if n_sites % 2:
            return cls.total_z(2 * n_sites, 0)
        if str(getattr(ordering, "value", ordering)) == "snake":
            up = tuple(range(n_sites))
            dn = tuple(range(n_sites, 2 * n_sites))
        else:
            up = tuple(range(0, 2 * n_sites, 2))
            dn = tuple(range(1, 2 * n_sites, 2))
        return cls.block_z([(up, 0), (dn, 0)])

    @property
    def is_full(self) -> bool:
        return not self.constraints

    def validate(self, n_qubits: int):
        used: set[int] = set()
        for qubits, m in self.constraints:
            if not qubits or any(q < 0 or q >= n_qubits for q in qubits):
                raise ValueError(f"constraint qubits {qubits} outside 0..{n_qubits - 1}")
            if used & set(qubits):
                raise ValueError("constraint blocks must be disjoint")
            used |= set(qubits)
            size = len(qubits)
            if abs(m) > size or (m - size) % 2:
                raise ValueError(f"magnetization {m} unreachable on {size} spins")


@dataclass(frozen=True)
class SectorBasis:
    n_qubits: int
    states: np.ndarray  # sorted full-space indices
    lookup: np.ndarray  # full index -> position, -1 outside

    def __len__(self):
        return self.states.shape[0]

    def embed(self, amplitudes: np.ndarray) -> np.ndarray:
        full = np.zeros(1 << self.n_qubits, dtype=amplitudes.dtype)
        full[self.states] = amplitudes
        return full


def sector_basis(n: int, sector: SectorSpec) -> SectorBasis:
    sector.validate(n)
    idx = np.arange(1 << n, dtype=np.int64)
    keep = np.ones(idx.shape[0], dtype=bool)
    for qubits, m in sector.constraints:
        mask = 0
        for q in qubits:
            mask |= 1 << q
        ones = np.bitwise_count(idx & mask).astype(np.int64)
        keep &= (len(qubits) - 2 * ones) == m
    states = idx[keep]
    if states.size == 0:
        raise ValueError("empty sector")
    lookup = np.full(1 << n, -1, dtype=np.int64)
    lookup[states] = np.arange(states.size)
    return SectorBasis(n, states, lookup)


@dataclass
class EigenResult:
    energy: float
    vector: np.ndarray  # amplitudes in the sector basis (full space if basis is None)
    residual_norm: float
    iterations: int
    basis: SectorBasis | None = None

    def full_vector(self) -> np.ndarray:
        return self.vector if self.basis is None else self.basis.embed(self.vector)


def lanczos_ground(
    apply: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 2000,
    krylov_dim: int = 120,
    raise_on_fail: bool = True,
) -> tuple[float, np.ndarray, float, int]:
    """Lowest eigenpair of a Hermitian operator given as ``apply``.

    Lanczos with full (twice-iterated Gram-Schmidt) reorthogonalization,
    restarted from the current Ritz vector every ``krylov_dim`` steps.  The
    residual tolerance is absolute, floored at ``1e-14 * |E|`` which is the
    attainable precision for large spectra.

    Returns ``(energy, vector, residual_norm, matvec_count)``; ``vector`` is
    normalized.  With ``raise_on_fail=False`` the best iterate is returned
    instead of raising :class:`ConvergenceError`.
    """
    v = np.array(v0, copy=True)
    dim = v.shape[0]
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("zero start vector")
    v /= nrm
    m = max(1, min(krylov_dim, dim))
    n_mv = 0
    best = (math.inf, v, math.inf)
    while True:
        basis = np.empty((m + 1, dim), dtype=v.dtype)
        basis[0] = v
        alphas, betas = [], []
        ritz_val, ritz_vec, est = None, None, math.inf
        for j in range(m):
            w = apply(basis[j])
            n_mv += 1
            alpha = float(np.vdot(basis[j], w).real)
            alphas.append(alpha)
            w = w - alpha * basis[j]
            if j > 0:
                w -= betas[-1] * basis[j - 1]
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta = float(np.linalg.norm(w))
            if len(alphas) == 1:
                vals, vecs = np.array(alphas), np.ones((1, 1))
            else:
                vals, vecs = eigh_tridiagonal(
                    np.array(alphas), np.array(betas), select="i", select_range=(0, 0)
                )
            ritz_val, ritz_vec = float(vals[0]), vecs[:, 0]
            est = beta * abs(ritz_vec[-1])
            floor = max(tol, 1e-14 * abs(ritz_val))
            if est < floor or beta < 1e-14 * max(1.0, abs(ritz_val)) or n_mv >= max_iter:
                break
            betas.append(beta)
            basis[j + 1] = w / beta
        k = len(alphas)
        x = ritz_vec @ basis[:k]
        x /= np.linalg.norm(x)
        hx = apply(x)
        n_mv += 1
        energy = float(np.vdot(x, hx).real)
        resid = float(np.linalg.norm(hx - energy * x))
        if resid < best[2]:
            best = (energy, x, resid)
        floor = max(tol, 1e-14 * abs(energy))
        if resid <= floor:
            return energy, x, resid, n_mv
        if n_mv >= max_iter:
            if raise_on_fail:
                raise ConvergenceError(
                    f"Lanczos stopped after {n_mv} matvecs with residual {best[2]:.3e}",
                    energy=best[0],
                    residual=best[2],
                    vector=best[1],
                )
            return best[0], best[1], best[2], n_mv
        v = x


def _operator(h: PauliSum, basis: SectorBasis | None):
    xg, gptr, zm, coef = h.packed()
    dtype = np.float64 if coef.dtype.kind == "f" else np.complex128
    coef = coef.astype(dtype)
    const = h.constant
    if basis is None:
        def apply(v):
            out = np.empty_like(v)
            if len(xg):
                _kernels.matvec_full(xg, gptr, zm, coef, v, out)
            else:
                out[:] = 0
            return out + const * v
        return apply, dtype

    def apply_sector(v):
        out = np.empty_like(v)
        if len(xg):
            leak = _kernels.matvec_sector(xg, gptr, zm, coef, basis.states, basis.lookup, v, out)
        else:
            out[:] = 0
            leak = 0.0
        apply_sector.last_leak = leak
        return out + const * v

    apply_sector.last_leak = 0.0
    return apply_sector, dtype


def ground_state(
    h: PauliSum,
    sector: SectorSpec | None = None,
    tol: float = 1e-12,
    max_iter: int = 3000,
    seed: int = 0,
    krylov_dim: int = 120,
) -> EigenResult:
    """Lowest eigenvalue/eigenvector of ``h`` (optionally inside a sector)."""
    sector = sector or SectorSpec.none()
    basis = None if sector.is_full else sector_basis(h.n_qubits, sector)
    apply, dtype = _operator(h, basis)
    dim = (1 << h.n_qubits) if basis is None else len(basis)
    rng = np.random.default_rng(seed)
    v0 = rng.uniform(-1.0, 1.0, size=dim)
    if dtype is np.complex128:
        v0 = v0 + 1j * rng.uniform(-1.0, 1.0, size=dim)
    v0 = v0.astype(dtype)
    if basis is not None:
        apply(v0 / np.linalg.norm(v0))
        if apply.last_leak > 1e-24:
            raise SectorLeakageError(
                f"Hamiltonian leaks weight {math.sqrt(apply.last_leak):.3e} out of the sector"
            )
    energy, vec, resid, n_mv = lanczos_ground(apply, v0, tol=tol, max_iter=max_iter, krylov_dim=krylov_dim)
    return EigenResult(energy, vec, resid, n_mv, basis)


def dense_ground_energy(h: PauliSum) -> float:
    """Lowest eigenvalue by dense diagonalization; an oracle for small sizes."""
    from .pauli import to_dense

    return float(np.linalg.eigvalsh(to_dense(h))[0])
