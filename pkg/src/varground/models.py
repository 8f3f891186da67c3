"""Spin-1/2 Hamiltonians: half-filled Fermi-Hubbard, Schwinger, XYZ ladder, Ising.

All builders return :class:`~varground.pauli.PauliSum` values whose
``constant`` carries every identity offset, so reported energies include it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .pauli import PauliString, PauliSum, commuting_group


class Ordering(str, enum.Enum):
    SNAKE = "snake"  # qubit k = N*sigma + j
    INTERLEAVED = "interleaved"  # qubit k = 2*j + sigma


class Normalization(str, enum.Enum):
    RAW = "raw"
    PER_SITE_OVER_T = "per_site_over_t"  # H / (t N)


@dataclass(frozen=True)
class HubbardParams:
    n_sites: int
    t: float = 1.0
    u: float = 0.0
    ordering: Ordering = Ordering.SNAKE
    normalization: Normalization = Normalization.PER_SITE_OVER_T

    def __post_init__(self):
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if self.n_sites < 2:
            raise ValueError("Hubbard chain needs n_sites >= 2")
        if self.normalization is Normalization.PER_SITE_OVER_T and self.t <= 0:
            raise ValueError("per-site normalization divides by t; need t > 0")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites


@dataclass(frozen=True)
class SchwingerParams:
    n_sites: int
    x: float = 100.0
    mu: float = 0.0
    ell: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("Schwinger lattice needs an even number of sites >= 2")

    @property
    def n_qubits(self) -> int:
        return self.n_sites


@dataclass(frozen=True)
class LadderParams:
    n_sites: int
    c_h: tuple[float, float, float] = (1.0, 1.0, 1.0)
    c_v: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("ladder needs an even number of sites >= 2")
        object.__setattr__(self, "c_h", tuple(float(c) for c in self.c_h))
        object.__setattr__(self, "c_v", tuple(float(c) for c in self.c_v))
        if len(self.c_h) != 3 or len(self.c_v) != 3:
            raise ValueError("c_h and c_v are (C_X, C_Y, C_Z) triples")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites


def _letters(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(k, "I") for k in range(n))


def hubbard_hamiltonian(p: HubbardParams) -> PauliSum:
    """Half-filled open Hubbard chain (mu = U/2) in Jordan-Wigner spin form."""
    n_sites, n = p.n_sites, p.n_qubits
    if p.normalization is Normalization.PER_SITE_OVER_T:
        hop, zz, const = -1.0 / (2 * n_sites), p.u / (4 * p.t * n_sites), -p.u / (4 * p.t)
    else:
        hop, zz, const = -p.t / 2, p.u / 4, -n_sites * p.u / 4
    terms = []
    if p.ordering is Ordering.SNAKE:
        for k in range(n - 1):
            if k == n_sites - 1:
                continue  # no hopping between the two spin legs
            for a in "XY":
                terms.append((_letters(n, {k: a, k + 1: a}), hop))
        for k in range(n_sites):
            terms.append((_letters(n, {k: "Z", k + n_sites: "Z"}), zz))
    else:
        # hopping k -> k+2 passes the opposite-spin qubit: X (-Z) X
        for k in range(n - 2):
            for a in "XY":
                terms.append((_letters(n, {k: a, k + 1: "Z", k + 2: a}), -hop))
        for k in range(n_sites):
            terms.append((_letters(n, {2 * k: "Z", 2 * k + 1: "Z"}), zz))
    return PauliSum.from_terms(n, terms, const)


def snake_to_interleaved(n_sites: int) -> list[int]:
    """Qubit permutation taking the snake layout onto the interleaved one."""
    return [2 * (k % n_sites) + k // n_sites for k in range(2 * n_sites)]


def schwinger_hamiltonian(p: SchwingerParams) -> PauliSum:
    """Staggered lattice Schwinger model with the gauge field eliminated.

    The squared electric field on each link n = 0..N-2 is
    ``(alpha_n + 1/2 sum_{k<=n} Z_k)**2`` with
    ``alpha_n = ell + 1/2 sum_{k<=n} (-1)**k``; it is expanded with Z**2 = I
    into identity, single-Z and ZZ strings.
    """
    n = p.n_sites
    terms: list[tuple[str, float]] = []
    const = 0.0
    for k in range(n - 1):
        for a in "XY":
            terms.append((_letters(n, {k: a, k + 1: a}), p.x / 2))
    for k in range(n):
        const += p.mu / 2
        terms.append((_letters(n, {k: "Z"}), p.mu / 2 * (-1) ** k))
    for link in range(n - 1):
        alpha = p.ell + 0.5 * sum((-1) ** k for k in range(link + 1))
        const += alpha**2 + (link + 1) / 4
        for k in range(link + 1):
            terms.append((_letters(n, {k: "Z"}), alpha))
            for j in range(k):
                terms.append((_letters(n, {j: "Z", k: "Z"}), 0.5))
    return PauliSum.from_terms(n, terms, const)


def ladder_hamiltonian(p: LadderParams) -> PauliSum:
    """Two-leg XYZ ladder; qubit k = N*sigma + j, legs sigma = 0 (up), 1 (down)."""
    ns, n = p.n_sites, p.n_qubits
    terms = []
    for sigma in (0, 1):
        for j in range(ns - 1):
            k = ns * sigma + j
            for a, c in zip("XYZ", p.c_h):
                terms.append((_letters(n, {k: a, k + 1: a}), c))
    for j in range(ns):
        for a, c in zip("XYZ", p.c_v):
            terms.append((_letters(n, {j: a, j + ns: a}), c))
    return PauliSum.from_terms(n, terms)


def ising_example_hamiltonian(n: int, J: float, g: float) -> PauliSum:
    """Open transverse-field Ising chain ``-J sum X_i X_{i+1} - g sum Z_i``."""
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    terms = [(_letters(n, {i: "X", i + 1: "X"}), -J) for i in range(n - 1)]
    terms += [(_letters(n, {i: "Z"}), -g) for i in range(n)]
    return PauliSum.from_terms(n, terms)


# --------------------------------------------------------------------------
# commuting term groups for the Hamiltonian variational ansatz

LADDER_GROUP_ORDER = (
    "h-even-X", "h-even-Y", "h-even-Z",
    "h-odd-Z", "h-odd-Y", "h-odd-X",
    "v-even-X", "v-even-Y", "v-even-Z",
    "v-odd-Z", "v-odd-Y", "v-odd-X",
)  # fmt: skip
SCHWINGER_GROUP_ORDER = ("hop-even", "hop-odd", "Z", "ZZ")


@dataclass(frozen=True)
class TermGroups:
    """Ordered commuting groups; the sum of all groups plus ``constant`` is H."""

    n_qubits: int
    groups: tuple[tuple[str, PauliSum], ...]
    constant: float = 0.0
    layout: str = field(default="ladder")

    def __post_init__(self):
        for label, g in self.groups:
            if g.n_qubits != self.n_qubits:
                raise ValueError(f"group {label} acts on the wrong number of qubits")
            if not commuting_group(g.terms):
                raise ValueError(f"group {label} contains non-commuting strings")

    def __len__(self):
        return len(self.groups)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.groups)

    def total(self) -> PauliSum:
        terms = [t for _, g in self.groups for t in g.terms]
        return PauliSum.from_terms(self.n_qubits, terms, self.constant)

    def scaled(self, factor: float) -> TermGroups:
        groups = tuple((label, g.scaled(factor)) for label, g in self.groups)
        return TermGroups(self.n_qubits, groups, self.constant * factor, self.layout)


def _ladder_label(t: PauliString, n_sites: int) -> str:
    sup = t.support
    letters = {t.letters[k] for k in sup}
    if len(sup) != 2 or len(letters) != 1:
        raise ValueError(f"term {t.letters} is not a same-letter two-qubit ladder bond")
    a = letters.pop()
    k1, k2 = sup
    if k2 - k1 == 1 and k1 // n_sites == k2 // n_sites:
        kind, j = "h", k1 % n_sites
    elif k2 - k1 == n_sites:
        kind, j = "v", k1
    else:
        raise ValueError(f"term {t.letters} is neither a leg bond nor a rung")
    return f"{kind}-{'even' if j % 2 == 0 else 'odd'}-{a}"


def ladder_term_groups(h: PauliSum, n_sites: int) -> TermGroups:
    """Sort the bonds of a snake-layout ladder Hamiltonian into the 12 groups."""
    buckets: dict[str, list[PauliString]] = {label: [] for label in LADDER_GROUP_ORDER}
    for t in h.terms:
        buckets[_ladder_label(t, n_sites)].append(t)
    groups = tuple(
        (label, PauliSum.from_terms(h.n_qubits, buckets[label])) for label in LADDER_GROUP_ORDER
    )
    return TermGroups(h.n_qubits, groups, h.constant, "ladder")


def schwinger_term_groups(h: PauliSum) -> TermGroups:
    buckets: dict[str, list[PauliString]] = {label: [] for label in SCHWINGER_GROUP_ORDER}
    for t in h.terms:
        sup = t.support
        if set(t.letters[k] for k in sup) <= {"X", "Y"}:
            if len(sup) != 2 or sup[1] - sup[0] != 1:
                raise ValueError(f"unexpected hopping term {t.letters}")
            buckets["hop-even" if sup[0] % 2 == 0 else "hop-odd"].append(t)
        elif len(sup) == 1:
            buckets["Z"].append(t)
        elif len(sup) == 2:
            buckets["ZZ"].append(t)
        else:
            raise ValueError(f"unexpected Schwinger term {t.letters}")
    groups = tuple(
        (label, PauliSum.from_terms(h.n_qubits, buckets[label])) for label in SCHWINGER_GROUP_ORDER
    )
    return TermGroups(h.n_qubits, groups, h.constant, "schwinger")


def hva_term_groups(source) -> TermGroups:
    """Commuting groups for a ladder, Schwinger, or snake-ordered Hubbard model."""
    if isinstance(source, LadderParams):
        return ladder_term_groups(ladder_hamiltonian(source), source.n_sites)
    if isinstance(source, HubbardParams):
        if source.ordering is not Ordering.SNAKE:
            raise ValueError("the ladder ansatz needs the snake ordering")
        return ladder_term_groups(hubbard_hamiltonian(source), source.n_sites)
    if isinstance(source, SchwingerParams):
        return schwinger_term_groups(schwinger_hamiltonian(source))
    raise TypeError(f"no term grouping for {type(source).__name__}")


def natural_energy_scale(source) -> float:
    """Factor that puts a model's Hamiltonian in its bare coupling units.

    Hubbard becomes ``H / t`` (hopping terms ``-1/2``), Schwinger ``H / x``
    (hopping terms ``1/2``); ladders and Ising chains are left alone.  The
    variational optimizers use it so that learning rates mean the same thing
    across system sizes and normalizations.
    """
    if isinstance(source, HubbardParams):
        if source.normalization is Normalization.PER_SITE_OVER_T:
            return float(source.n_sites)
        return 1.0 / source.t
    if isinstance(source, SchwingerParams):
        return 1.0 / source.x
    return 1.0


def vqe_energy_scale(source) -> float:
    """Cost scale used by gradient-descent VQE.

    Same as :func:`natural_energy_scale` except for Hubbard, where the cost is
    ``4 E / (t N)`` at every size.  Plain gradient descent moves the angles at
    a rate that grows like the cube of the scale, so the ``N``-proportional
    bare-unit scale is stable at four sites and oscillates at eight.
    """
    if isinstance(source, HubbardParams):
        return 4.0 * natural_energy_scale(source) / source.n_sites
    return natural_energy_scale(source)
