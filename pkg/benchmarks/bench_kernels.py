"""Time every hot kernel against its numpy twin.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Prints one line per kernel with the best-of-``repeat`` wall time of each twin
and the speedup.  The first compiled call is made before timing, so numba's
compile cost (cached on disk after the first run) is excluded.
"""

import argparse
import sys
import timeit

import numpy as np

from varground._kernels import KERNELS
from varground.exact_diag import SectorSpec, sector_basis
from varground.models import HubbardParams, hubbard_hamiltonian, hva_term_groups
from varground.rbm import RbmParams, _theta


def cases(quick):
    n_sites = 4 if quick else 8
    hp = HubbardParams(n_sites, u=4.0)
    h = hubbard_hamiltonian(hp)
    n = h.n_qubits
    rng = np.random.default_rng(0)
    xg, gptr, zm, coef = h.packed()
    coef = coef.astype(np.float64)
    v = rng.normal(size=1 << n)
    basis = sector_basis(n, SectorSpec.hubbard_half_filling(n_sites))
    vs = rng.normal(size=basis.states.size)
    out_full = np.empty_like(v)
    out_sec = np.empty_like(vs)
    yield "matvec_full", f"{n} qubits", lambda f: f(xg, gptr, zm, coef, v, out_full)
    yield (
        "matvec_sector",
        f"dim {basis.states.size}",
        lambda f: f(xg, gptr, zm, coef, basis.states, basis.lookup, vs, out_sec),
    )

    g = hva_term_groups(hp).groups[0][1]
    gx, _, gz, gc = g.packed()
    psi = (rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)).astype(np.complex128)
    x, z, ph = int(gx[0]), int(gz[0]), complex(gc[0])
    yield "pauli_rotation", f"{n} qubits", lambda f: f(psi, x, z, ph, 0.1)
    lam = psi.copy()
    yield "pauli_overlap", f"{n} qubits", lambda f: f(lam, psi, x, z, ph)

    p = RbmParams.random(n, 4, seed=1, std=0.1)
    w = np.ascontiguousarray(p.w)
    n_s = 200
    base = np.array([1.0, -1.0] * (n // 2))
    spins = np.array([rng.permutation(base) for _ in range(n_s)])
    theta = np.ascontiguousarray(_theta(p, spins))
    fs = h.flip_structure()
    e_out = np.empty(n_s)
    yield "local_energies", f"{n_s} samples", lambda f: f(spins, theta, p.a, w, *fs, e_out)

    n_steps, n_c = 2000, 4
    u = rng.random((n_steps, n_c))
    sites = rng.integers(0, n, size=(n_steps, n_c))
    r1, r2 = rng.random((n_steps, n_c)), rng.random((n_steps, n_c))
    rec = np.empty((n_steps, n_c, n))

    def chain(f, *extra):
        s = spins[:n_c].copy()
        t = np.ascontiguousarray(_theta(p, s))
        return f(s, t, p.a, w, *extra, u, 1, rec)

    yield "flip_chain", f"{n_steps}x{n_c} steps", lambda f: chain(f, sites)
    yield "exchange_chain", f"{n_steps}x{n_c} steps", lambda f: chain(f, r1, r2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="small sizes, for a smoke run")
    args = ap.parse_args(argv)
    print(f"{'kernel':<16}{'size':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, size, call in cases(args.quick):
        fast, slow = KERNELS[name]
        call(fast)  # compile
        t_fast = min(timeit.repeat(lambda: call(fast), number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: call(slow), number=1, repeat=args.repeat))
        print(f"{name:<16}{size:<18}{1e3 * t_fast:>12.3f}{1e3 * t_slow:>12.3f}{t_slow / t_fast:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
