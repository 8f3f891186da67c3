"""Matrix product states: exact conversion, canonical forms, overlaps, checkpoints.

Site tensors have shape ``(chi_left, d, chi_right)``.  The physical index is
the bit value of that qubit, so contracting the chain and flattening with
qubit 0 as the least significant digit gives the package-wide state-vector
ordering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

ZERO_SV_RTOL = 1e-14  # singular values this far below the largest count as exact zeros
CHECKPOINT_VERSION = 1


class Canonical(str, enum.Enum):
    GENERAL = "general"
    LEFT = "left"
    RIGHT = "right"
    MIXED = "mixed"


class DegenerateSchmidtError(ValueError):
    """A Schmidt value is too small to invert."""


@dataclass
class Mps:
    """``scale`` times the contraction of ``tensors``.

    Keeping the norm in a separate scalar lets every tensor satisfy its
    canonical condition exactly, including the last one.
    """

    tensors: list[np.ndarray]
    canonical: Canonical = Canonical.GENERAL
    center: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        self.tensors = [np.asarray(t) for t in self.tensors]
        if not self.tensors:
            raise ValueError("an MPS needs at least one site")
        for i, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ValueError(f"site {i} tensor has {t.ndim} indices, expected 3")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        self.canonical = Canonical(self.canonical)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[0] for t in self.tensors] + [1]

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    def copy(self) -> Mps:
        return replace(self, tensors=[t.copy() for t in self.tensors])

    def to_dense(self) -> np.ndarray:
        psi = self.tensors[0][0]  # (d, chi)
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(-1, 0))
        psi = psi[..., 0] * self.scale
        # axes are (s_0, ..., s_{N-1}); qubit 0 must be the fastest index
        return psi.transpose(tuple(range(psi.ndim - 1, -1, -1))).reshape(-1)


@dataclass
class MixedCanonical:
    """``A[0..c-1] diag(lam) B[c..N-1]``."""

    left: list[np.ndarray]
    lam: np.ndarray
    right: list[np.ndarray]

    @property
    def center(self) -> int:
        return len(self.left)

    @property
    def n_sites(self) -> int:
        return len(self.left) + len(self.right)

    def to_mps(self) -> Mps:
        """Absorb the weights into the neighbouring tensor."""
        tensors = [t.copy() for t in self.left] + [t.copy() for t in self.right]
        c = self.center
        if c < self.n_sites:
            tensors[c] = self.lam[:, None, None] * tensors[c]
        else:
            tensors[c - 1] = tensors[c - 1] * self.lam[None, None, :]
        return Mps(tensors, Canonical.MIXED, c)

    def to_dense(self) -> np.ndarray:
        return self.to_mps().to_dense()


@dataclass
class GammaLambda:
    gammas: list[np.ndarray]
    lambdas: list[np.ndarray] = field(default_factory=list)  # N + 1 vectors

    def left_tensor(self, i: int) -> np.ndarray:
        return self.lambdas[i][:, None, None] * self.gammas[i]

    def right_tensor(self, i: int) -> np.ndarray:
        return self.gammas[i] * self.lambdas[i + 1][None, None, :]


# --------------------------------------------------------------------------
# factorizations


def _split_rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 1
    return max(1, int(np.count_nonzero(s > ZERO_SV_RTOL * s[0])))


def dense_to_mps(psi: np.ndarray, d: int = 2) -> tuple[Mps, float]:
    """Exact left-canonical MPS of a state vector by a chain of SVDs.

    Returns the MPS and the final weight (the input norm).  Exact zero
    singular values are dropped so product states get bond dimension 1.
    """
    psi = np.asarray(psi)
    n = round(np.log(psi.size) / np.log(d)) if psi.size > 1 else 0
    if n < 1 or d**n != psi.size:
        raise ValueError(f"length {psi.size} is not a positive power of {d}")
    tensor = psi.reshape((d,) * n).transpose(tuple(range(n - 1, -1, -1)))
    rest = tensor.reshape(1, -1)
    tensors = []
    for _ in range(n - 1):
        chi = rest.shape[0]
        mat = rest.reshape(chi * d, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        k = _split_rank(s)
        tensors.append(u[:, :k].reshape(chi, d, k))
        rest = s[:k, None] * vh[:k]
    last = rest.reshape(-1)
    weight = float(np.linalg.norm(last))
    if weight == 0.0:
        raise ValueError("zero state has no canonical MPS")
    tensors.append((last / weight).reshape(rest.shape[0], d, 1))
    return Mps(tensors, Canonical.LEFT, None, weight), weight


def _qr_left(m: np.ndarray):
    chi_l, d, chi_r = m.shape
    q, r = np.linalg.qr(m.reshape(chi_l * d, chi_r))
    return q.reshape(chi_l, d, -1), r


def _qr_right(m: np.ndarray):
    """``m = l @ b`` with ``b`` right-orthonormal."""
    chi_l, d, chi_r = m.shape
    q, r = np.linalg.qr(m.reshape(chi_l, d * chi_r).T)
    return r.T, q.T.reshape(-1, d, chi_r)


def left_canonicalize(m: Mps) -> Mps:
    tensors = [t for t in m.tensors]
    carry = np.ones((1, 1), dtype=tensors[0].dtype)
    out = []
    for t in tensors:
        a, carry = _qr_left(np.tensordot(carry, t, axes=(1, 0)))
        out.append(a)
    # carry is 1x1: the norm up to a phase, which goes back into the last site
    c = carry[0, 0]
    phase = c / abs(c) if c != 0 else 1.0
    out[-1] = out[-1] * phase
    return Mps(out, Canonical.LEFT, None, m.scale * abs(c))


def right_canonicalize(m: Mps) -> Mps:
    carry = np.ones((1, 1), dtype=m.tensors[0].dtype)
    out = []
    for t in reversed(m.tensors):
        carry, b = _qr_right(np.tensordot(t, carry, axes=(2, 0)))
        out.append(b)
    out.reverse()
    c = carry[0, 0]
    phase = c / abs(c) if c != 0 else 1.0
    out[0] = out[0] * phase
    return Mps(out, Canonical.RIGHT, None, m.scale * abs(c))


def mixed_canonicalize(m: Mps, center: int) -> MixedCanonical:
    """Left tensors on sites ``< center``, right tensors from ``center`` on.

    The Schmidt values of the cut at bond ``center`` are returned in
    descending order; their squares sum to the squared norm of the state.
    """
    n = m.n_sites
    if not 0 <= center <= n:
        raise ValueError(f"center {center} outside 0..{n}")
    dtype = m.tensors[0].dtype
    carry = np.ones((1, 1), dtype=dtype) * m.scale
    left = []
    for t in m.tensors[:center]:
        a, carry = _qr_left(np.tensordot(carry, t, axes=(1, 0)))
        left.append(a)
    rcarry = np.ones((1, 1), dtype=dtype)
    right = []
    for t in reversed(m.tensors[center:]):
        rcarry, b = _qr_right(np.tensordot(t, rcarry, axes=(2, 0)))
        right.append(b)
    right.reverse()
    u, s, vh = np.linalg.svd(carry @ rcarry)
    if left:
        left[-1] = np.tensordot(left[-1], u, axes=(2, 0))
    else:
        vh = u @ vh  # 1x1 phase
    if right:
        right[0] = np.tensordot(vh, right[0], axes=(1, 0))
    else:
        left[-1] = np.tensordot(left[-1], vh, axes=(2, 0))
    return MixedCanonical(left, s, right)


def gamma_lambda(m: Mps | MixedCanonical, rtol: float = 1e-12) -> GammaLambda:
    """Vidal form; raises :class:`DegenerateSchmidtError` on tiny Schmidt values."""
    if isinstance(m, MixedCanonical):
        m = m.to_mps()
    lm = left_canonicalize(m)
    n = lm.n_sites
    tensors = list(lm.tensors)
    lambdas: list[np.ndarray] = [None] * (n + 1)  # type: ignore[list-item]
    rights: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    norm = lm.scale
    lambdas[n] = np.array([norm])
    cur = tensors[-1] * norm
    for i in range(n - 1, 0, -1):
        chi_l, d, chi_r = cur.shape
        u, s, vh = np.linalg.svd(cur.reshape(chi_l, d * chi_r), full_matrices=False)
        if s[-1] <= rtol * s[0]:
            raise DegenerateSchmidtError(
                f"Schmidt value {s[-1]:.3e} at bond {i} is below {rtol:g} of the largest"
            )
        rights[i] = vh.reshape(-1, d, chi_r)
        lambdas[i] = s
        cur = np.tensordot(tensors[i - 1], u * s[None, :], axes=(2, 0))
    lambdas[0] = np.array([np.linalg.norm(cur)])
    rights[0] = cur / lambdas[0][0]
    gammas = [rights[i] / lambdas[i + 1][None, None, :] for i in range(n)]
    return GammaLambda(gammas, lambdas)


def mps_inner(a: Mps, b: Mps) -> complex:
    """``<a|b>`` by a left-to-right transfer contraction."""
    if a.n_sites != b.n_sites or a.phys_dims != b.phys_dims:
        raise ValueError("MPS shapes do not match")
    env = np.ones((1, 1))
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.tensordot(env, ta.conj(), axes=(0, 0))  # (b, d, a')
        env = np.tensordot(env, tb, axes=([0, 1], [0, 1]))  # (a', b')
    return complex(env[0, 0] * np.conj(a.scale) * b.scale)


def random_mps(
    n_sites: int, chi: int, d: int = 2, seed: int | None = 0, dtype=np.float64
) -> Mps:
    """Seeded Gaussian MPS, bonds capped by the exact maximum, normalized."""
    rng = np.random.default_rng(seed)
    dims = [1]
    for i in range(1, n_sites):
        dims.append(min(chi, d**i, d ** (n_sites - i)))
    dims.append(1)
    tensors = []
    for i in range(n_sites):
        shape = (dims[i], d, dims[i + 1])
        t = rng.standard_normal(shape)
        if np.dtype(dtype).kind == "c":
            t = t + 1j * rng.standard_normal(shape)
        tensors.append(t.astype(dtype))
    m = right_canonicalize(Mps(tensors))
    m.scale = 1.0
    return m


def canonical_residual(m: Mps | MixedCanonical) -> float:
    """Largest deviation from the isometry conditions the state claims."""
    if isinstance(m, MixedCanonical):
        lefts, rights = m.left, m.right
    elif m.canonical is Canonical.LEFT:
        lefts, rights = m.tensors, []
    elif m.canonical is Canonical.RIGHT:
        lefts, rights = [], m.tensors
    else:
        raise ValueError("state carries no canonical claim")
    worst = 0.0
    for a in lefts:
        g = np.tensordot(a.conj(), a, axes=([0, 1], [0, 1]))
        worst = max(worst, float(np.abs(g - np.eye(g.shape[0])).max()))
    for b in rights:
        g = np.tensordot(b, b.conj(), axes=([1, 2], [1, 2]))
        worst = max(worst, float(np.abs(g - np.eye(g.shape[0])).max()))
    return worst


# --------------------------------------------------------------------------
# textual checkpoints


def _fmt(x) -> str:
    return format(float(x), ".17g")


def mps_to_text(m: Mps) -> str:
    cplx = any(np.iscomplexobj(t) for t in m.tensors)
    lines = [
        f"varground-mps {CHECKPOINT_VERSION}",
        f"sites {m.n_sites}",
        f"canonical {m.canonical.value} {'' if m.center is None else m.center}".rstrip(),
        f"scale {_fmt(m.scale)}",
        f"dtype {'complex' if cplx else 'real'}",
    ]
    for t in m.tensors:
        lines.append("tensor " + " ".join(str(s) for s in t.shape))
        flat = t.reshape(-1)
        if cplx:
            lines.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in flat))
        else:
            lines.append(" ".join(_fmt(z) for z in flat))
    return "\n".join(lines) + "\n"


def mps_from_text(text: str) -> Mps:
    lines = iter(text.splitlines())
    head = next(lines).split()
    if head[0] != "varground-mps" or int(head[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported MPS checkpoint header {head}")
    n = int(next(lines).split()[1])
    canon = next(lines).split()[1:]
    scale = float(next(lines).split()[1])
    cplx = next(lines).split()[1] == "complex"
    tensors = []
    for _ in range(n):
        shape = tuple(int(s) for s in next(lines).split()[1:])
        vals = np.array([float(v) for v in next(lines).split()])
        if cplx:
            vals = vals[0::2] + 1j * vals[1::2]
        tensors.append(vals.reshape(shape))
    center = int(canon[1]) if len(canon) > 1 else None
    return Mps(tensors, Canonical(canon[0]), center, scale)


def product_state_mps(bits: Sequence[int], d: int = 2) -> Mps:
    tensors = []
    for b in bits:
        t = np.zeros((1, d, 1))
        t[0, int(b), 0] = 1.0
        tensors.append(t)
    return Mps(tensors, Canonical.LEFT)


def compress_mps(m: Mps, chi_max: int, cutoff: float = 1e-12) -> Mps:
    """Right-canonical MPS with bonds truncated by SVD; the norm is kept in ``scale``."""
    lm = left_canonicalize(m)
    tensors = list(lm.tensors)
    for i in range(len(tensors) - 1, 0, -1):
        t = tensors[i]
        chi_l, d, chi_r = t.shape
        u, s, vh = np.linalg.svd(t.reshape(chi_l, d * chi_r), full_matrices=False)
        k = max(1, min(chi_max, int(np.count_nonzero(s > cutoff * s[0]))))
        tensors[i] = vh[:k].reshape(k, d, chi_r)
        tensors[i - 1] = np.tensordot(tensors[i - 1], u[:, :k] * s[:k], axes=(2, 0))
    norm = float(np.linalg.norm(tensors[0]))
    tensors[0] = tensors[0] / norm
    return Mps(tensors, Canonical.RIGHT, None, lm.scale * norm)
