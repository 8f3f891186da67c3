"""Hot inner loops, each as a numba kernel plus a pure-numpy twin.

Pauli strings enter these kernels packed as integer masks: ``xmask`` has a bit
set for every X or Y letter, ``zmask`` for every Z or Y letter, and the
coefficient already carries the ``i**n_Y`` factor.  With those conventions a
string acts on a basis index ``b`` as::

    P |b> = coef * (-1)**popcount(b & zmask) |b ^ xmask>

Random numbers are always drawn by the caller, so both twins consume the same
stream and produce identical chains.
"""

import math

import numpy as np

from ._jit import njit, select

LN2 = math.log(2.0)


# --------------------------------------------------------------------------
# bit helpers


@njit
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


def _parity_np(x):
    return (np.bitwise_count(x) & 1).astype(np.int64)


# --------------------------------------------------------------------------
# Pauli-sum matvec over the full space or a sector


@njit
def _matvec_nb(xg, gptr, zmask, coef, v, out):
    """Gather form; terms sharing a flip mask ``xg[g]`` are ``gptr[g]:gptr[g+1]``."""
    dim = v.shape[0]
    ngroup = xg.shape[0]
    out[:] = 0
    for b in range(dim):
        acc = out[b]
        for g in range(ngroup):
            src = b ^ xg[g]
            amp = coef[0] * 0
            for t in range(gptr[g], gptr[g + 1]):
                if _parity(src & zmask[t]):
                    amp -= coef[t]
                else:
                    amp += coef[t]
            acc += amp * v[src]
        out[b] = acc
    return out


def _matvec_np(xg, gptr, zmask, coef, v, out):
    idx = np.arange(v.shape[0], dtype=np.int64)
    out[:] = 0
    for g in range(xg.shape[0]):
        src = idx ^ xg[g]
        amp = np.zeros(v.shape[0], dtype=coef.dtype)
        for t in range(gptr[g], gptr[g + 1]):
            amp += coef[t] * (1 - 2 * _parity_np(src & zmask[t]))
        out += amp * v[src]
    return out


@njit
def _matvec_sector_nb(xg, gptr, zmask, coef, states, lookup, v, out):
    """Sector-restricted matvec; returns the squared norm that leaked out.

    Amplitudes of one flip group are summed before the leak is measured, so
    cancelling pairs such as XX + YY register no leakage.
    """
    dim = states.shape[0]
    ngroup = xg.shape[0]
    out[:] = 0
    leak = 0.0
    for i in range(dim):
        b = states[i]
        vi = v[i]
        for g in range(ngroup):
            amp = coef[0] * 0
            for t in range(gptr[g], gptr[g + 1]):
                if _parity(b & zmask[t]):
                    amp -= coef[t]
                else:
                    amp += coef[t]
            if amp == 0:
                continue
            j = lookup[b ^ xg[g]]
            if j < 0:
                leak += abs(amp * vi) ** 2
            else:
                out[j] += amp * vi
    return leak


def _matvec_sector_np(xg, gptr, zmask, coef, states, lookup, v, out):
    out[:] = 0
    leak = 0.0
    for g in range(xg.shape[0]):
        amp = np.zeros(states.shape[0], dtype=coef.dtype)
        for t in range(gptr[g], gptr[g + 1]):
            amp += coef[t] * (1 - 2 * _parity_np(states & zmask[t]))
        amp = amp * v
        dst = lookup[states ^ xg[g]]
        inside = dst >= 0
        # dst is injective within a group, so plain fancy-index add is safe
        out[dst[inside]] += amp[inside]
        leak += float(np.sum(np.abs(amp[~inside]) ** 2))
    return leak


matvec_full = select(_matvec_nb, _matvec_np)
matvec_sector = select(_matvec_sector_nb, _matvec_sector_np)


# --------------------------------------------------------------------------
# e^{-i phi P} on a state vector, in place


@njit
def _pauli_rotation_nb(v, xmask, zmask, phase, phi):
    c = math.cos(phi)
    s = math.sin(phi)
    dim = v.shape[0]
    if xmask == 0:
        m_plus = c - 1j * s * phase
        m_minus = c + 1j * s * phase
        for b in range(dim):
            if _parity(b & zmask):
                v[b] *= m_minus
            else:
                v[b] *= m_plus
        return
    # visit each pair (b, b ^ xmask) once: b runs over indices with the
    # lowest flip bit clear, built by inserting a 0 at that position
    k = 0
    while not (xmask >> k) & 1:
        k += 1
    low = (1 << k) - 1
    flip_sign = _parity(xmask & zmask)
    for i in range(dim >> 1):
        b = ((i >> k) << (k + 1)) | (i & low)
        b2 = b ^ xmask
        # (P v)[b] = ph(b2) v[b2],  (P v)[b2] = ph(b) v[b]
        par = _parity(b & zmask)
        ph2 = -phase if par else phase
        ph1 = -phase if par ^ flip_sign else phase
        va = v[b]
        vb = v[b2]
        v[b] = c * va - 1j * s * ph1 * vb
        v[b2] = c * vb - 1j * s * ph2 * va


def _pauli_rotation_np(v, xmask, zmask, phase, phi):
    idx = np.arange(v.shape[0], dtype=np.int64)
    src = idx ^ xmask
    sign = 1 - 2 * _parity_np(src & zmask)
    pv = (phase * sign) * v[src]
    v *= math.cos(phi)
    v -= 1j * math.sin(phi) * pv


pauli_rotation = select(_pauli_rotation_nb, _pauli_rotation_np)


@njit
def _pauli_overlap_nb(u, v, xmask, zmask, phase):
    """``<u| P |v>`` for one string, without forming ``P v``."""
    acc = 0j
    for b in range(v.shape[0]):
        b2 = b ^ xmask
        val = u[b].conjugate() * v[b2]
        if _parity(b2 & zmask):
            acc -= val
        else:
            acc += val
    return acc * phase


def _pauli_overlap_np(u, v, xmask, zmask, phase):
    idx = np.arange(v.shape[0], dtype=np.int64)
    src = idx ^ xmask
    sign = 1 - 2 * _parity_np(src & zmask)
    return complex(phase * np.vdot(u, sign * v[src]))


pauli_overlap = select(_pauli_overlap_nb, _pauli_overlap_np)


# --------------------------------------------------------------------------
# RBM: overflow-safe ln cosh, local energies, Metropolis chains


@njit
def _lncosh_scalar(x):
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - LN2


def lncosh(x):
    """``ln cosh x`` that stays finite for large ``|x|``."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - LN2


@njit
def _cosh_ratio(tau, d):
    """``cosh(theta + d) / cosh(theta)`` given ``tau = tanh(theta)``."""
    ed = math.exp(d)
    return 0.5 * (ed * (1.0 + tau) + (1.0 - tau) / ed)


def _cosh_ratio_np(tau, d):
    ed = np.exp(d)
    return 0.5 * (ed * (1.0 + tau) + (1.0 - tau) / ed)


# Amplitude ratios use cosh(theta + d) / cosh(theta) = cosh d + tanh(theta) sinh d,
# one exponential per hidden unit instead of two logarithms of cosh.


@njit
def _local_energies_nb(
    spins, theta, a, w, flip_ptr, flip_idx, sub_ptr, z_ptr, z_idx, sub_coef, out
):
    n_s = spins.shape[0]
    m = theta.shape[1]
    n_pat = flip_ptr.shape[0] - 1
    tau = np.empty(m)
    for r in range(n_s):
        s = spins[r]
        for i in range(m):
            tau[i] = math.tanh(theta[r, i])
        e = 0.0
        for p in range(n_pat):
            elem = 0.0
            for q in range(sub_ptr[p], sub_ptr[p + 1]):
                prod = sub_coef[q]
                for k in range(z_ptr[q], z_ptr[q + 1]):
                    prod *= s[z_idx[k]]
                elem += prod
            if elem == 0.0:
                continue
            f0 = flip_ptr[p]
            f1 = flip_ptr[p + 1]
            if f0 == f1:
                e += elem
                continue
            da = 0.0
            for k in range(f0, f1):
                j = flip_idx[k]
                da -= 2.0 * a[j] * s[j]
            ratio = math.exp(da)
            for i in range(m):
                d = 0.0
                for k in range(f0, f1):
                    j = flip_idx[k]
                    d -= 2.0 * w[i, j] * s[j]
                ratio *= _cosh_ratio(tau[i], d)
            e += elem * ratio
        out[r] = e
    return out


def _local_energies_np(
    spins, theta, a, w, flip_ptr, flip_idx, sub_ptr, z_ptr, z_idx, sub_coef, out
):
    out[:] = 0.0
    tau = np.tanh(theta)
    for p in range(flip_ptr.shape[0] - 1):
        elem = np.zeros(spins.shape[0])
        for q in range(sub_ptr[p], sub_ptr[p + 1]):
            zs = z_idx[z_ptr[q] : z_ptr[q + 1]]
            elem += sub_coef[q] * np.prod(spins[:, zs], axis=1)
        flips = flip_idx[flip_ptr[p] : flip_ptr[p + 1]]
        if flips.size == 0:
            out += elem
            continue
        sf = spins[:, flips]
        ratio = np.exp(-2.0 * sf @ a[flips]) * np.prod(
            _cosh_ratio_np(tau, -2.0 * sf @ w[:, flips].T), axis=1
        )
        out += np.where(elem != 0.0, elem * ratio, 0.0)
    return out


local_energies = select(_local_energies_nb, _local_energies_np)


@njit
def _accept_update(spins_c, theta_c, tau_c, d, u, da):
    """Metropolis test for one proposal with hidden shifts ``d``; updates on accept."""
    q = math.exp(da)
    for i in range(d.shape[0]):
        q *= _cosh_ratio(tau_c[i], d[i])
    if u < q * q:
        for i in range(d.shape[0]):
            theta_c[i] += d[i]
            tau_c[i] = math.tanh(theta_c[i])
        return True
    return False


@njit
def _flip_chain_nb(spins, theta, a, w, sites, u, keep_every, out):
    """Single-flip Metropolis on ``n_c`` chains; ``sites``/``u`` shape (steps, n_c)."""
    n_steps, n_c = sites.shape
    m = theta.shape[1]
    tau = np.tanh(theta)
    d = np.empty(m)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        for c in range(n_c):
            j = sites[t, c]
            sj = spins[c, j]
            for i in range(m):
                d[i] = -2.0 * w[i, j] * sj
            if _accept_update(spins[c], theta[c], tau[c], d, u[t, c], -2.0 * a[j] * sj):
                spins[c, j] = -sj
                accepted += 1
        if keep_every > 0 and (t + 1) % keep_every == 0:
            out[rec] = spins
            rec += 1
    return accepted


def _metropolis_np(theta, tau, d, u, da):
    q = np.exp(da) * np.prod(_cosh_ratio_np(tau, d), axis=1)
    acc = u < q * q
    theta[acc] += d[acc]
    tau[acc] = np.tanh(theta[acc])
    return acc


def _flip_chain_np(spins, theta, a, w, sites, u, keep_every, out):
    n_steps, n_c = sites.shape
    rows = np.arange(n_c)
    tau = np.tanh(theta)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        j = sites[t]
        sj = spins[rows, j]
        d = -2.0 * w[:, j].T * sj[:, None]
        acc = _metropolis_np(theta, tau, d, u[t], -2.0 * a[j] * sj)
        spins[rows[acc], j[acc]] = -sj[acc]
        accepted += int(acc.sum())
        if keep_every > 0 and (t + 1) % keep_every == 0:
            out[rec] = spins
            rec += 1
    return accepted


@njit
def _exchange_chain_nb(spins, theta, a, w, r1, r2, u, keep_every, out):
    """Metropolis with moves swapping one +1 and one -1 spin."""
    n_steps, n_c = u.shape
    n = spins.shape[1]
    m = theta.shape[1]
    tau = np.tanh(theta)
    d = np.empty(m)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        for c in range(n_c):
            n_up = 0
            for k in range(n):
                if spins[c, k] > 0:
                    n_up += 1
            n_dn = n - n_up
            if n_up == 0 or n_dn == 0:
                continue
            pick_up = int(r1[t, c] * n_up)
            pick_dn = int(r2[t, c] * n_dn)
            i_up = -1
            i_dn = -1
            for k in range(n):
                if spins[c, k] > 0:
                    if pick_up == 0:
                        i_up = k
                    pick_up -= 1
                else:
                    if pick_dn == 0:
                        i_dn = k
                    pick_dn -= 1
            # s[i_up] = +1 -> -1, s[i_dn] = -1 -> +1
            for i in range(m):
                d[i] = -2.0 * w[i, i_up] + 2.0 * w[i, i_dn]
            da = -2.0 * a[i_up] + 2.0 * a[i_dn]
            if _accept_update(spins[c], theta[c], tau[c], d, u[t, c], da):
                spins[c, i_up] = -1.0
                spins[c, i_dn] = 1.0
                accepted += 1
        if keep_every > 0 and (t + 1) % keep_every == 0:
            out[rec] = spins
            rec += 1
    return accepted


def _kth_true(mask, k):
    """Column index of the k-th True entry in every row of ``mask``."""
    csum = np.cumsum(mask, axis=1)
    return np.argmax(mask & (csum == (k + 1)[:, None]), axis=1)


def _exchange_chain_np(spins, theta, a, w, r1, r2, u, keep_every, out):
    n_steps, n_c = u.shape
    rows = np.arange(n_c)
    tau = np.tanh(theta)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        up = spins > 0
        n_up = up.sum(axis=1)
        n_dn = spins.shape[1] - n_up
        live = (n_up > 0) & (n_dn > 0)
        i_up = _kth_true(up, (r1[t] * n_up).astype(np.int64))
        i_dn = _kth_true(~up, (r2[t] * n_dn).astype(np.int64))
        d = -2.0 * w[:, i_up].T + 2.0 * w[:, i_dn].T
        # a chain without both spin values has no move; u = inf always rejects
        ut = np.where(live, u[t], np.inf)
        acc = _metropolis_np(theta, tau, d, ut, -2.0 * a[i_up] + 2.0 * a[i_dn])
        spins[rows[acc], i_up[acc]] = -1.0
        spins[rows[acc], i_dn[acc]] = 1.0
        accepted += int(acc.sum())
        if keep_every > 0 and (t + 1) % keep_every == 0:
            out[rec] = spins
            rec += 1
    return accepted


flip_chain = select(_flip_chain_nb, _flip_chain_np)
exchange_chain = select(_exchange_chain_nb, _exchange_chain_np)

# both twins, for equivalence tests and the benchmark
KERNELS = {
    "matvec_full": (_matvec_nb, _matvec_np),
    "matvec_sector": (_matvec_sector_nb, _matvec_sector_np),
    "pauli_rotation": (_pauli_rotation_nb, _pauli_rotation_np),
    "pauli_overlap": (_pauli_overlap_nb, _pauli_overlap_np),
    "local_energies": (_local_energies_nb, _local_energies_np),
    "flip_chain": (_flip_chain_nb, _flip_chain_np),
    "exchange_chain": (_exchange_chain_nb, _exchange_chain_np),
}
