"""Pauli strings, weighted sums of them, and their matrix-free action.

Conventions shared by every solver in the package:

* ``letters[k]`` acts on qubit ``k``.
* Bit 0 is the Z = +1 eigenstate (spin value s = +1); bit 1 is Z = -1.
* Basis index ``b = sum_k bit_k * 2**k``, so qubit 0 is the least significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

PAULI_LETTERS = "IXYZ"
DENSE_CAP = 14
HERMITIAN_TOL = 1e-12
_MASK_LIMIT = 62

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


@dataclass(frozen=True)
class PauliString:
    letters: str
    coefficient: complex = 1.0

    def __post_init__(self):
        bad = set(self.letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.letters) if c != "I")

    @property
    def is_identity(self) -> bool:
        return not self.support

    @property
    def weight(self) -> int:
        return len(self.support)

    def masks(self) -> tuple[int, int, int]:
        """``(xmask, zmask, n_y)`` bit encoding used by the kernels."""
        if self.n_qubits > _MASK_LIMIT:
            raise DimensionError(f"bit-mask encoding supports at most {_MASK_LIMIT} qubits")
        x = z = ny = 0
        for k, c in enumerate(self.letters):
            if c in "XY":
                x |= 1 << k
            if c in "ZY":
                z |= 1 << k
            if c == "Y":
                ny += 1
        return x, z, ny

    def commutes_with(self, other: PauliString) -> bool:
        if other.n_qubits != self.n_qubits:
            raise DimensionError("strings act on different qubit counts")
        anti = sum(
            1
            for p, q in zip(self.letters, other.letters)
            if p != "I" and q != "I" and p != q
        )
        return anti % 2 == 0


def _bits_of(s, n: int) -> np.ndarray:
    bits = np.asarray(s, dtype=np.int64).ravel()
    if bits.shape[0] != n:
        raise DimensionError(f"basis state has {bits.shape[0]} bits, string has {n} letters")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("basis-state bits must be 0 or 1")
    return bits


def bits_to_index(bits: Sequence[int]) -> int:
    return int(sum(int(b) << k for k, b in enumerate(bits)))


def index_to_bits(index: int, n: int) -> np.ndarray:
    return np.array([(index >> k) & 1 for k in range(n)], dtype=np.int64)


def apply_string(p: PauliString, s) -> tuple[np.ndarray, complex]:
    """Act with ``p`` (coefficient included) on basis state ``s``.

    Returns the unique image state and the matrix element ``<s'|p|s>``.
    """
    bits = _bits_of(s, p.n_qubits)
    out = bits.copy()
    phase = p.coefficient
    for k, c in enumerate(p.letters):
        if c == "X":
            out[k] ^= 1
        elif c == "Y":
            phase *= 1j if bits[k] == 0 else -1j
            out[k] ^= 1
        elif c == "Z":
            if bits[k]:
                phase = -phase
    return out, phase


@dataclass(frozen=True)
class PauliSum:
    """Immutable weighted sum of Pauli strings plus a real identity offset."""

    n_qubits: int
    terms: tuple[PauliString, ...] = ()
    constant: float = 0.0
    _packed: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        seen = set()
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise DimensionError(
                    f"term {t.letters!r} has {t.n_qubits} letters, sum has {self.n_qubits} qubits"
                )
            if t.is_identity:
                raise ValueError("identity contributions belong in `constant`")
            if t.letters in seen:
                raise ValueError(f"duplicate term {t.letters!r}; use PauliSum.from_terms")
            seen.add(t.letters)
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_terms(
        cls,
        n_qubits: int,
        terms: Iterable[tuple[str, complex] | PauliString],
        constant: float = 0.0,
        drop_tol: float = 0.0,
    ) -> PauliSum:
        """Build a sum, merging duplicate letter strings by adding coefficients.

        All-identity strings are folded into ``constant``; terms whose merged
        coefficient has magnitude ``<= drop_tol`` are dropped (exact zeros by
        default).
        """
        merged: dict[str, complex] = {}
        const = complex(constant)
        for t in terms:
            if isinstance(t, PauliString):
                letters, c = t.letters, t.coefficient
            else:
                letters, c = t
            if len(letters) != n_qubits:
                raise DimensionError(f"term {letters!r} does not have {n_qubits} letters")
            if set(letters) <= {"I"}:
                const += c
                continue
            merged[letters] = merged.get(letters, 0.0) + complex(c)
        if abs(const.imag) > 1e-12 * max(1.0, abs(const.real)):
            raise ValueError("identity offset must be real")
        kept = tuple(
            PauliString(k, v) for k, v in merged.items() if abs(v) > drop_tol
        )
        return cls(n_qubits, kept, const.real)

    @classmethod
    def from_text(cls, text: str) -> PauliSum:
        """Parse ``<re> <im> <letters>`` lines; ``#`` starts a comment."""
        rows = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected '<re> <im> <letters>', got {raw!r}")
            re_, im_, letters = parts
            rows.append((letters.upper(), complex(float(re_), float(im_))))
        if not rows:
            raise ValueError("no terms found")
        n = len(rows[0][0])
        return cls.from_terms(n, rows)

    def to_text(self) -> str:
        lines = [f"# {self.n_qubits}-qubit Pauli sum"]
        if self.constant != 0.0:
            lines.append(f"{self.constant:.17g} 0 {'I' * self.n_qubits}")
        for t in self.terms:
            c = t.coefficient
            lines.append(f"{c.real:.17g} {c.imag:.17g} {t.letters}")
        return "\n".join(lines) + "\n"

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: PauliSum) -> PauliSum:
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot add sums on different qubit counts")
        return PauliSum.from_terms(
            self.n_qubits, [*self.terms, *other.terms], self.constant + other.constant
        )

    def scaled(self, factor: float) -> PauliSum:
        return PauliSum(
            self.n_qubits,
            tuple(PauliString(t.letters, t.coefficient * factor) for t in self.terms),
            self.constant * factor,
        )

    def without_constant(self) -> PauliSum:
        return PauliSum(self.n_qubits, self.terms, 0.0)

    def permuted(self, perm: Sequence[int]) -> PauliSum:
        """Relabel qubits: old qubit ``k`` becomes new qubit ``perm[k]``."""
        if sorted(perm) != list(range(self.n_qubits)):
            raise ValueError("perm must be a permutation of the qubit indices")
        new_terms = []
        for t in self.terms:
            letters = ["I"] * self.n_qubits
            for k, c in enumerate(t.letters):
                letters[perm[k]] = c
            new_terms.append(("".join(letters), t.coefficient))
        return PauliSum.from_terms(self.n_qubits, new_terms, self.constant)

    def coefficient_of(self, letters: str) -> complex:
        for t in self.terms:
            if t.letters == letters:
                return t.coefficient
        return 0.0

    def as_dict(self) -> dict[str, complex]:
        return {t.letters: t.coefficient for t in self.terms}

    @property
    def is_hermitian(self) -> bool:
        return all(abs(t.coefficient.imag) <= 1e-14 * max(1.0, abs(t.coefficient)) for t in self.terms)

    @property
    def has_real_elements(self) -> bool:
        """True when every matrix element in the computational basis is real."""
        for t in self.terms:
            ny = t.letters.count("Y")
            c = t.coefficient * (1j**ny)
            if abs(c.imag) > 1e-14 * max(1.0, abs(c)):
                return False
        return True

    def packed(self):
        """Kernel encoding ``(xg, gptr, zmask, coef)``.

        Terms are sorted by flip mask; group ``g`` with mask ``xg[g]`` owns
        entries ``gptr[g]:gptr[g+1]`` of ``zmask``/``coef``.  ``coef`` includes
        the ``i**n_Y`` factor and is real when every matrix element is.
        """
        key = "masks"
        if key not in self._packed:
            rows = []
            for t in self.terms:
                x, z, ny = t.masks()
                rows.append((x, z, t.coefficient * (1j**ny)))
            rows.sort(key=lambda r: r[0])
            xs = np.array([r[0] for r in rows], dtype=np.int64)
            zm = np.array([r[1] for r in rows], dtype=np.int64)
            coef = np.array([r[2] for r in rows], dtype=complex)
            if self.has_real_elements:
                coef = coef.real.copy()
            xg, start = np.unique(xs, return_index=True)
            gptr = np.append(start, len(rows)).astype(np.int64)
            self._packed[key] = (xg.astype(np.int64), gptr, zm, coef)
        return self._packed[key]

    def flip_structure(self):
        """Terms grouped by flip pattern, in ±1-spin form, for local energies.

        For a spin configuration ``s`` (s_k = +1 for bit 0) row ``s`` of the
        matrix has, per flip pattern ``F``, the element
        ``sum_q coef_q * prod_{k in Z_q} s_k`` at ``s`` with ``F`` flipped.
        The identity offset is a pattern with no flips and no Z sites.
        Returns CSR arrays ``(flip_ptr, flip_idx, sub_ptr, z_ptr, z_idx, coef)``.
        """
        key = "flips"
        if key in self._packed:
            return self._packed[key]
        if not self.has_real_elements:
            raise ValueError("flip structure needs real matrix elements")
        groups: dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]] = {}
        if self.constant != 0.0:
            groups.setdefault((), []).append(((), self.constant))
        for t in self.terms:
            flips = tuple(k for k, c in enumerate(t.letters) if c in "XY")
            zs = tuple(k for k, c in enumerate(t.letters) if c in "YZ")
            ny = t.letters.count("Y")
            c = (t.coefficient * (1j**ny)).real
            # <s|P|s'> with s' = s flipped on F: sign from Z sites evaluated on s'
            if len(set(zs) & set(flips)) % 2:
                c = -c
            groups.setdefault(flips, []).append((zs, c))
        flip_ptr, flip_idx, sub_ptr, z_ptr, z_idx, coef = [0], [], [0], [0], [], []
        for flips, subs in groups.items():
            flip_idx.extend(flips)
            flip_ptr.append(len(flip_idx))
            for zs, c in subs:
                z_idx.extend(zs)
                z_ptr.append(len(z_idx))
                coef.append(c)
            sub_ptr.append(len(coef))
        out = (
            np.array(flip_ptr, dtype=np.int64),
            np.array(flip_idx, dtype=np.int64),
            np.array(sub_ptr, dtype=np.int64),
            np.array(z_ptr, dtype=np.int64),
            np.array(z_idx, dtype=np.int64),
            np.array(coef, dtype=np.float64),
        )
        self._packed[key] = out
        return out


def _check_dim(h: PauliSum, v: np.ndarray):
    if v.ndim != 1 or v.shape[0] != 1 << h.n_qubits:
        raise DimensionError(
            f"state of length {v.shape[0]} does not match {h.n_qubits} qubits"
        )


def matvec(h: PauliSum, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """``(H + constant) v`` without forming the matrix."""
    v = np.asarray(v)
    _check_dim(h, v)
    xg, gptr, zm, coef = h.packed()
    dtype = np.result_type(v.dtype, coef.dtype, np.float64)
    v = v.astype(dtype, copy=False)
    if out is None:
        out = np.empty_like(v)
    if len(xg):
        _kernels.matvec_full(xg, gptr, zm, coef.astype(dtype, copy=False), v, out)
    else:
        out[:] = 0
    if h.constant:
        out += h.constant * v
    return out


def expectation(h: PauliSum, v: np.ndarray, tol: float = 1e-10) -> float:
    """``<v|H|v> / <v|v>``; raises if the quadratic form is not real."""
    v = np.asarray(v)
    norm2 = float(np.vdot(v, v).real)
    if norm2 == 0.0:
        raise ValueError("expectation of the zero vector is undefined")
    val = np.vdot(v, matvec(h, v)) / norm2
    if abs(val.imag) > tol * max(1.0, abs(val.real)):
        raise ValueError(f"non-real expectation value {val}; operator is not Hermitian")
    return float(val.real)


def connected_elements(h: PauliSum, s) -> list[tuple[np.ndarray, complex]]:
    """Nonzero entries ``(s', <s|H|s'>)`` of row ``s``, constant included."""
    bits = _bits_of(s, h.n_qubits)
    row: dict[tuple[int, ...], complex] = {}
    for t in h.terms:
        # s' = s with the X/Y bits flipped; <s|P|s'> is the phase of P|s'>
        unit = PauliString(t.letters, 1.0)
        image, _ = apply_string(unit, bits)
        _, ph = apply_string(unit, image)
        key = tuple(int(b) for b in image)
        row[key] = row.get(key, 0.0) + t.coefficient * ph
    if h.constant:
        key = tuple(int(b) for b in bits)
        row[key] = row.get(key, 0.0) + h.constant
    out = []
    for key, val in row.items():
        if abs(val) > 1e-15:
            out.append((np.array(key, dtype=np.int64), complex(val)))
    return out


def to_dense(h: PauliSum, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``2**n`` matrix, qubit 0 least significant; Hermiticity asserted."""
    if h.n_qubits > cap:
        raise ValueError(f"dense build of {h.n_qubits} qubits exceeds the cap of {cap}")
    dim = 1 << h.n_qubits
    mat = h.constant * np.eye(dim, dtype=complex)
    for t in h.terms:
        op = np.ones((1, 1), dtype=complex)
        # kron puts its first factor on the most significant qubit
        for c in reversed(t.letters):
            op = np.kron(op, _SINGLE[c])
        mat += t.coefficient * op
    scale = max(1.0, float(np.abs(mat).max()))
    if np.abs(mat - mat.conj().T).max() > HERMITIAN_TOL * scale:
        raise ValueError("Pauli sum is not Hermitian")
    return mat


def random_pauli_sum(
    n_qubits: int, n_terms: int, rng: np.random.Generator, hermitian: bool = True
) -> PauliSum:
    """Random sum with real (Hermitian) or complex coefficients; for tests."""
    terms = []
    for _ in range(n_terms):
        letters = "".join(rng.choice(list(PAULI_LETTERS), size=n_qubits))
        c = rng.normal()
        if not hermitian:
            c = c + 1j * rng.normal()
        terms.append((letters, c))
    return PauliSum.from_terms(n_qubits, terms, constant=float(rng.normal()))


def commuting_group(terms: Sequence[PauliString]) -> bool:
    """True when every pair of strings in ``terms`` commutes."""
    return all(
        terms[i].commutes_with(terms[j])
        for i in range(len(terms))
        for j in range(i + 1, len(terms))
    )


def basis_vector(n_qubits: int, bits: Sequence[int]) -> np.ndarray:
    v = np.zeros(1 << n_qubits, dtype=complex)
    v[bits_to_index(bits)] = 1.0
    return v


def norm(v: np.ndarray) -> float:
    return math.sqrt(float(np.vdot(v, v).real))
