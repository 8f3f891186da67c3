"""Matrix product operators built from Pauli sums.

Operator tensors have shape ``(w_left, d_out, d_in, w_right)``.  The operator
is ``vL . W[0] ... W[N-1] . vR``; the builders here return ``vL = vR = (1,)``
because the first and last tensors already have outer bond dimension 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mps import Mps
from .pauli import PauliSum

_I = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_YC = np.array([[0.0, -1j], [1j, 0.0]])
_YR = np.array([[0.0, -1.0], [1.0, 0.0]])  # -iY, real


@dataclass
class Mpo:
    tensors: list[np.ndarray]
    v_left: np.ndarray
    v_right: np.ndarray

    def __post_init__(self):
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[3] != self.tensors[i + 1].shape[0]:
                raise ValueError(f"operator bond mismatch between sites {i} and {i + 1}")
        if self.v_left.shape != (self.tensors[0].shape[0],):
            raise ValueError("left boundary vector does not match W[0]")
        if self.v_right.shape != (self.tensors[-1].shape[3],):
            raise ValueError("right boundary vector does not match W[N-1]")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [self.tensors[0].shape[0]] + [w.shape[3] for w in self.tensors]

    def closed(self) -> list[np.ndarray]:
        """Tensors with the boundary vectors absorbed (outer bonds of size 1)."""
        ws = [w for w in self.tensors]
        ws[0] = np.tensordot(self.v_left, ws[0], axes=(0, 0))[None]
        ws[-1] = np.tensordot(ws[-1], self.v_right, axes=(3, 0))[..., None]
        return ws

    def element(self, bits_out, bits_in) -> complex:
        """``<bits_out| O |bits_in>`` by a chain of small matrix products."""
        row = self.v_left.astype(complex)
        for w, so, si in zip(self.tensors, bits_out, bits_in):
            row = row @ w[:, int(so), int(si), :]
        return complex(row @ self.v_right)

    def to_dense(self) -> np.ndarray:
        ws = self.closed()
        n = len(ws)
        op = ws[0][0]  # (d, d, w)
        for w in ws[1:]:
            op = np.tensordot(op, w, axes=(-1, 0))  # (...,d,d,w') grows pairs
        op = op[..., 0]
        # axes (o0, i0, o1, i1, ...); qubit 0 is the least significant digit
        outs = [2 * k for k in range(n)][::-1]
        ins = [2 * k + 1 for k in range(n)][::-1]
        dim = 2**n
        return op.transpose(outs + ins).reshape(dim, dim)


def _letter_matrix(c: str, real: bool) -> np.ndarray:
    if c == "I":
        return _I
    if c == "X":
        return _X
    if c == "Z":
        return _Z
    return _YR if real else _YC


def _automaton(h: PauliSum) -> Mpo:
    n = h.n_qubits
    real = h.has_real_elements
    dtype = np.float64 if real else np.complex128
    # bond states per cut: "start", "done", and one per open prefix
    cuts: list[dict] = [dict() for _ in range(n + 1)]
    for i in range(n + 1):
        if i < n:
            cuts[i]["start"] = len(cuts[i])
        if i > 0:
            cuts[i]["done"] = len(cuts[i])
    plans = []
    for t in h.terms:
        sup = t.support
        f, l = sup[0], sup[-1]
        coef = t.coefficient
        if real:
            coef = (coef * 1j ** t.letters.count("Y")).real
        for i in range(f + 1, l + 1):
            key = t.letters[:i]
            if key not in cuts[i]:
                cuts[i][key] = len(cuts[i])
        plans.append((t.letters, f, l, coef))
    ws = [np.zeros((len(cuts[i]), 2, 2, len(cuts[i + 1])), dtype=dtype) for i in range(n)]
    for i in range(n):
        if i < n - 1:
            ws[i][cuts[i]["start"], :, :, cuts[i + 1]["start"]] = _I
        if i > 0:
            ws[i][cuts[i]["done"], :, :, cuts[i + 1]["done"]] = _I
    for letters, f, l, coef in plans:
        for i in range(f, l + 1):
            src = cuts[i]["start"] if i == f else cuts[i][letters[:i]]
            mat = _letter_matrix(letters[i], real)
            if i == l:
                ws[i][src, :, :, cuts[i + 1]["done"]] += coef * mat
            else:
                ws[i][src, :, :, cuts[i + 1][letters[: i + 1]]] = mat
    if h.constant != 0.0:
        last = n - 1
        src = cuts[last]["start"]
        ws[last][src, :, :, cuts[n]["done"]] += h.constant * _I
    return Mpo(ws, np.ones(1), np.ones(1))


def compress_mpo(o: Mpo, rtol: float = 1e-13) -> Mpo:
    """Drop operator Schmidt values below ``rtol`` of the largest at each cut.

    A QR sweep to the right followed by an SVD sweep back; exact up to the
    discarded values, and it finds low-rank structure the term-by-term
    automaton cannot see (e.g. all-pairs ZZ couplings that factorize).
    """
    ws = o.closed()
    n = len(ws)
    for i in range(n - 1):
        wl, d1, d2, wr = ws[i].shape
        q, r = np.linalg.qr(ws[i].reshape(wl * d1 * d2, wr))
        ws[i] = q.reshape(wl, d1, d2, -1)
        ws[i + 1] = np.tensordot(r, ws[i + 1], axes=(1, 0))
    for i in range(n - 1, 0, -1):
        wl, d1, d2, wr = ws[i].shape
        u, s, vh = np.linalg.svd(ws[i].reshape(wl, d1 * d2 * wr), full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > rtol * s[0])))
        ws[i] = vh[:keep].reshape(keep, d1, d2, wr)
        ws[i - 1] = np.tensordot(ws[i - 1], u[:, :keep] * s[:keep], axes=(3, 0))
    return Mpo(ws, np.ones(1), np.ones(1))


def mpo_from_pauli_sum(h: PauliSum, compress: bool = False, rtol: float = 1e-13) -> Mpo:
    """Finite-state-automaton MPO, one chain per term sharing prefix states.

    Each term's coefficient sits on its last non-identity letter.  When every
    matrix element is real, Y letters are stored as the real matrix ``-iY``
    with the phase folded into the coefficient, so the MPO is real.
    """
    o = _automaton(h)
    return compress_mpo(o, rtol) if compress else o


def mpo_expectation(o: Mpo, m: Mps) -> complex:
    """``<m|O|m> / <m|m>`` by a full left-to-right sandwich."""
    if o.n_sites != m.n_sites:
        raise ValueError("MPO and MPS sizes differ")
    ws = o.closed()
    env = np.ones((1, 1, 1))  # (ket, bra, op)
    norm = np.ones((1, 1))
    for w, a in zip(ws, m.tensors):
        if w.shape[1] != a.shape[1]:
            raise ValueError("physical dimensions differ")
        env = contract_left(env, a, w)
        norm = np.tensordot(norm, a.conj(), axes=(0, 0))
        norm = np.tensordot(norm, a, axes=([0, 1], [0, 1]))
    return complex(env[0, 0, 0] / norm[0, 0])


def contract_left(env: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``L[b, g, al] A[b, s, b'] W[al, t, s, al'] conj(A)[g, t, g'] -> L'[b', g', al']``."""
    x = np.tensordot(env, a, axes=(0, 0))  # (g, al, s, b')
    x = np.tensordot(x, w, axes=([1, 2], [0, 2]))  # (g, b', t, al')
    x = np.tensordot(x, a.conj(), axes=([0, 2], [0, 1]))  # (b', al', g')
    return x.transpose(0, 2, 1)


def contract_right(env: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Mirror of :func:`contract_left` for a right environment."""
    x = np.tensordot(b, env, axes=(2, 0))  # (b, s, g', al')
    x = np.tensordot(x, w, axes=([1, 3], [2, 3]))  # (b, g', al, t)
    x = np.tensordot(x, b.conj(), axes=([1, 3], [2, 1]))  # (b, al, g)
    return x.transpose(0, 2, 1)


def projector_mpo(n_sites: int, sector) -> Mpo:
    """Diagonal MPO projecting onto a conjunction of block magnetizations.

    ``sector`` is any object with ``constraints`` as in
    :class:`~varground.exact_diag.SectorSpec`.  Bond states count the 1-bits
    seen so far in each block; counts that can no longer hit their target are
    pruned, so the bond dimension stays at most ``1 + block size``.
    """
    blocks = [set(q) for q, _ in sector.constraints]
    targets = [(len(q) - m) // 2 for q, m in sector.constraints]
    owner = {q: j for j, blk in enumerate(blocks) for q in blk}
    remaining_after = []
    for i in range(n_sites):
        remaining_after.append([sum(1 for q in blk if q > i) for blk in blocks])

    def feasible(counts, i):
        return all(
            c <= t and c + r >= t for c, t, r in zip(counts, targets, remaining_after[i])
        )

    cuts = [{tuple(0 for _ in blocks): 0}]
    edges = []
    for i in range(n_sites):
        nxt: dict = {}
        site_edges = []
        for counts, src in cuts[i].items():
            for bit in (0, 1):
                new = list(counts)
                if i in owner:
                    new[owner[i]] += bit
                new = tuple(new)
                if not feasible(new, i):
                    continue
                if new not in nxt:
                    nxt[new] = len(nxt)
                site_edges.append((src, bit, nxt[new]))
        if not nxt:
            raise ValueError("sector is empty")
        cuts.append(nxt)
        edges.append(site_edges)
    ws = []
    for i in range(n_sites):
        w = np.zeros((len(cuts[i]), 2, 2, len(cuts[i + 1])))
        for src, bit, dst in edges[i]:
            w[src, bit, bit, dst] = 1.0
        ws.append(w)
    return Mpo(ws, np.ones(1), np.ones(1))


def apply_mpo(o: Mpo, m: Mps) -> Mps:
    """``O|m>`` exactly; bond dimensions multiply."""
    if o.n_sites != m.n_sites:
        raise ValueError("MPO and MPS sizes differ")
    out = []
    for w, a in zip(o.closed(), m.tensors):
        t = np.tensordot(w, a, axes=(2, 1))  # (wl, t, wr, xl, xr)
        wl, d, wr, xl, xr = t.shape
        out.append(t.transpose(0, 3, 1, 2, 4).reshape(wl * xl, d, wr * xr))
    return Mps(out, scale=m.scale)
