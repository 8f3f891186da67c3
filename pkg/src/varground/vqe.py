"""Statevector VQE with a layered Hamiltonian variational ansatz.

Each layer applies ``exp(-i theta_g G_g)`` for every commuting group ``G_g``
in the order of :class:`~varground.models.TermGroups`.  Inside a group every
term keeps its own coefficient, so the exponent of a term ``c P`` is
``theta_g * c``.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .models import TermGroups
from .pauli import PauliSum, expectation, matvec

CHECKPOINT_VERSION = 1


class GradMode(str, enum.Enum):
    ADJOINT = "adjoint"
    FINITE_DIFF = "finite_diff"


class VqeDivergenceError(RuntimeError):
    """The optimizer drove the energy up by more than the allowed margin."""


@dataclass(frozen=True)
class VqeConfig:
    eta: float = 0.01
    n_iters: int = 2000
    grad_mode: GradMode = GradMode.ADJOINT
    seed: int = 0
    report_window: int = 500
    init_scale: float = 0.01
    divergence: float = 1e3
    fd_step: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "grad_mode", GradMode(self.grad_mode))
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.n_iters < 1 or self.report_window < 1:
            raise ValueError("n_iters and report_window must be positive")


@dataclass
class AnsatzParams:
    p: int
    theta: np.ndarray  # (p * n_groups,), layer-major

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.p < 1:
            raise ValueError("need at least one layer")
        if self.theta.size % self.p:
            raise ValueError(f"{self.theta.size} angles do not split into {self.p} layers")

    @property
    def n_groups(self) -> int:
        return self.theta.size // self.p

    def layer(self, k: int) -> np.ndarray:
        g = self.n_groups
        return self.theta[k * g : (k + 1) * g]


# --------------------------------------------------------------------------
# states and gates


def _singlet_pairs(n_qubits: int, layout: str) -> list[tuple[int, int]]:
    if layout == "ladder":
        if n_qubits % 4:
            raise ValueError("ladder singlets need two legs of even length (n divisible by 4)")
        ns = n_qubits // 2
        return [(s * ns + j, s * ns + j + 1) for s in (0, 1) for j in range(0, ns, 2)]
    if layout == "schwinger":
        if n_qubits % 2 or n_qubits < 2:
            raise ValueError("Schwinger singlets need an even number of qubits")
        return [(2 * i, 2 * i + 1) for i in range(n_qubits // 2)]
    raise ValueError(f"unknown layout {layout!r}")


def initial_singlet_state(n_qubits: int, layout: str = "ladder") -> np.ndarray:
    """Product of ``(|01> - |10>)/sqrt(2)`` on the pairs of ``layout``."""
    pairs = _singlet_pairs(n_qubits, layout)
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    amp = np.ones(idx.size)
    for a, b in pairs:
        ba = (idx >> a) & 1
        bb = (idx >> b) & 1
        amp *= np.where(ba == bb, 0.0, np.where(ba == 0, 1.0, -1.0) / math.sqrt(2.0))
    return amp.astype(complex)


@dataclass
class _Group:
    xm: np.ndarray
    zm: np.ndarray
    phase: np.ndarray  # i**n_Y
    coef: np.ndarray  # real term coefficients


def _compile(group: PauliSum) -> _Group:
    xs, zs, ph, cs = [], [], [], []
    for t in group.terms:
        x, z, ny = t.masks()
        if abs(t.coefficient.imag) > 1e-12:
            raise ValueError(f"term {t.letters} has a non-real coefficient")
        xs.append(x)
        zs.append(z)
        ph.append(1j**ny)
        cs.append(t.coefficient.real)
    return _Group(
        np.array(xs, dtype=np.int64),
        np.array(zs, dtype=np.int64),
        np.array(ph, dtype=complex),
        np.array(cs, dtype=float),
    )


def _apply_compiled(v: np.ndarray, g: _Group, angle: float):
    for x, z, ph, c in zip(g.xm, g.zm, g.phase, g.coef):
        _kernels.pauli_rotation(v, int(x), int(z), complex(ph), float(angle * c))


def apply_group_exponential(v: np.ndarray, group: PauliSum, angle: float) -> np.ndarray:
    """``prod_terms exp(-i angle c P) v`` for a commuting group; returns a new vector."""
    out = np.array(v, dtype=complex, copy=True)
    _apply_compiled(out, _compile(group), angle)
    return out


class Ansatz:
    """Compiled term groups plus a reference state, reused across iterations."""

    def __init__(self, groups: TermGroups, psi0: np.ndarray, p: int):
        self.groups = groups
        self.p = p
        self.compiled = [_compile(g) for _, g in groups.groups]
        self.psi0 = np.asarray(psi0, dtype=complex)
        if self.psi0.shape != (1 << groups.n_qubits,):
            raise ValueError("reference state does not match the qubit count")

    @property
    def n_params(self) -> int:
        return self.p * len(self.compiled)

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} angles, got {theta.size}")
        return theta

    def gates(self):
        for k in range(self.p):
            for gi, g in enumerate(self.compiled):
                yield k * len(self.compiled) + gi, g

    def state(self, theta) -> np.ndarray:
        theta = self._check(theta)
        v = self.psi0.copy()
        for idx, g in self.gates():
            _apply_compiled(v, g, theta[idx])
        return v

    def energy_and_gradient(self, h: PauliSum, theta) -> tuple[float, np.ndarray]:
        """Exact gradient by one forward and one reverse sweep.

        With ``psi_k`` the state after gate ``k`` and ``lam_k`` the co-state
        ``U_{k+1}^dag ... U_K^dag H psi_K``,
        ``dE/dtheta_k = 2 Re <lam_k| -i G_k |psi_k>``.
        """
        theta = self._check(theta)
        psi = self.state(theta)
        lam = matvec(h, psi)
        energy = float(np.vdot(psi, lam).real)
        grad = np.zeros(theta.size)
        order = list(self.gates())
        for idx, g in reversed(order):
            if g.coef.size:
                # <lam| -i G |psi> term by term; G commutes with its own gate
                acc = 0j
                for x, z, ph, c in zip(g.xm, g.zm, g.phase, g.coef):
                    acc += c * _kernels.pauli_overlap(lam, psi, int(x), int(z), complex(ph))
                grad[idx] = 2.0 * float((-1j * acc).real)
                _apply_compiled(psi, g, -theta[idx])
                _apply_compiled(lam, g, -theta[idx])
        return energy, grad


def ansatz_state(groups: TermGroups, params: AnsatzParams, psi0: np.ndarray) -> np.ndarray:
    ans = Ansatz(groups, psi0, params.p)
    return ans.state(params.theta)


def vqe_gradient(
    groups: TermGroups,
    params: AnsatzParams,
    psi0: np.ndarray,
    h: PauliSum,
    mode: GradMode | str = GradMode.ADJOINT,
    step: float = 1e-6,
) -> np.ndarray:
    ans = Ansatz(groups, psi0, params.p)
    return _gradient(ans, h, params.theta, GradMode(mode), step)[1]


def _gradient(ans: Ansatz, h: PauliSum, theta, mode: GradMode, step: float):
    if mode is GradMode.ADJOINT:
        return ans.energy_and_gradient(h, theta)
    theta = np.asarray(theta, dtype=float)
    energy = expectation(h, ans.state(theta))
    grad = np.zeros(theta.size)
    for k in range(theta.size):
        tp = theta.copy()
        tp[k] += step
        tm = theta.copy()
        tm[k] -= step
        grad[k] = (expectation(h, ans.state(tp)) - expectation(h, ans.state(tm))) / (2 * step)
    return energy, grad


# --------------------------------------------------------------------------
# optimization loop


@dataclass
class VqeResult:
    energies: np.ndarray
    grad_norms: np.ndarray
    params: AnsatzParams
    mean: float
    std: float
    wall_time_s: float = 0.0
    config: VqeConfig = field(default_factory=VqeConfig)

    def trace_rows(self):
        for i, (e, g) in enumerate(zip(self.energies, self.grad_norms)):
            yield i, float(e), float(g)


def vqe_run(
    h: PauliSum,
    groups: TermGroups,
    cfg: VqeConfig | None = None,
    p: int = 6,
    psi0: np.ndarray | None = None,
    init: AnsatzParams | None = None,
    energy_scale: float = 1.0,
) -> VqeResult:
    """Plain gradient descent ``theta <- theta - eta * grad``.

    The optimizer works on ``energy_scale * H`` and builds its gates from
    the equally scaled groups, so ``eta`` and the angles are measured in
    the units that scale selects (see
    :func:`~varground.models.vqe_energy_scale`).  Recorded energies are
    converted back to the units of ``h``.

    ``energies[i]`` is the energy at the parameters before update ``i``.
    The reported value is the mean and standard deviation over the last
    ``report_window`` entries.
    """
    cfg = cfg or VqeConfig()
    t0 = time.perf_counter()
    if h.n_qubits != groups.n_qubits:
        raise ValueError("Hamiltonian and term groups act on different qubit counts")
    if psi0 is None:
        psi0 = initial_singlet_state(groups.n_qubits, groups.layout)
    if not (energy_scale > 0 and math.isfinite(energy_scale)):
        raise ValueError("energy_scale must be positive")
    if energy_scale != 1.0:
        h = h.scaled(energy_scale)
        groups = groups.scaled(energy_scale)
    ans = Ansatz(groups, psi0, p)
    if init is None:
        rng = np.random.default_rng(cfg.seed)
        theta = rng.uniform(-cfg.init_scale, cfg.init_scale, size=ans.n_params)
    else:
        theta = ans._check(init.theta).copy()
    energies = np.empty(cfg.n_iters)
    gnorms = np.empty(cfg.n_iters)
    e_start = None
    for it in range(cfg.n_iters):
        e, g = _gradient(ans, h, theta, cfg.grad_mode, cfg.fd_step)
        if e_start is None:
            e_start = e
        if not math.isfinite(e) or (e - e_start) / energy_scale > cfg.divergence:
            raise VqeDivergenceError(
                f"energy {e:.6g} at iteration {it} exceeds the start value {e_start:.6g} "
                f"by more than {cfg.divergence:g}; lower eta"
            )
        energies[it] = e / energy_scale
        gnorms[it] = float(np.linalg.norm(g))
        theta = theta - cfg.eta * g
    window = energies[-min(cfg.report_window, cfg.n_iters) :]
    return VqeResult(
        energies,
        gnorms,
        AnsatzParams(p, theta),
        float(window.mean()),
        float(window.std()),
        time.perf_counter() - t0,
        cfg,
    )


def params_to_text(params: AnsatzParams) -> str:
    lines = [f"varground-vqe-params {CHECKPOINT_VERSION}", f"p {params.p}", f"n {params.theta.size}"]
    lines += [format(float(x), ".17g") for x in params.theta]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> AnsatzParams:
    rows = text.split()
    if rows[:2] != ["varground-vqe-params", str(CHECKPOINT_VERSION)]:
        raise ValueError("not a VQE parameter checkpoint")
    p, n = int(rows[3]), int(rows[5])
    theta = np.array([float(x) for x in rows[6 : 6 + n]])
    if theta.size != n:
        raise ValueError("truncated checkpoint")
    return AnsatzParams(p, theta)
