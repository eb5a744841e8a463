"""Hot inner loops, each with a numba loop version and a numpy version.

The public names at the bottom of the module point at whichever backend
:mod:`asqchain._accel` selected. Both variants stay importable under
``<name>_loops`` / ``<name>_numpy`` so they can be cross-checked and
benchmarked against each other.

Bit convention shared by every kernel: basis index ``b`` of an ``n``-qubit
register stores qubit ``q`` (0-based) in bit ``n - 1 - q`` (qubit 0 is the
most significant factor); a cleared bit is spin up (``s = +1``), a set bit
is spin down (``s = -1``).
"""

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "coupling_matrices",
    "diagonal_energies",
    "oracle_minima",
    "walsh_coefficients",
]

TWO_PI = 2.0 * np.pi

# |cos(psi)| below this is treated as an exact OFF setpoint. An angle error of
# 1e-12 rad changes J by at most 1e-12 relative, far below any physical scale,
# while it absorbs the rounding left over from summing fluxes such as 0.25.
COS_SNAP = 1e-12
GRID_POINTS = 64


# -- first-order pair couplings over a batch of flux vectors -----------------


@njit
def coupling_matrices_loops(e_so, e_j_asq, e_j, fluxes):
    n_samples, n = fluxes.shape
    out = np.zeros((n_samples, n, n))
    theta = np.empty(n)
    cosines = np.empty(n)
    for s in range(n_samples):
        acc = 0.0
        re = e_j
        im = 0.0
        for q in range(n):
            acc += fluxes[s, q]
            theta[q] = TWO_PI * acc
            re -= e_j_asq[q] * np.cos(theta[q])
            im -= e_j_asq[q] * np.sin(theta[q])
        mag = np.sqrt(re * re + im * im)
        offset = np.arctan2(im, re)
        for q in range(n):
            c = np.cos(theta[q] - offset)
            if abs(c) < COS_SNAP:
                c = 0.0
            cosines[q] = e_so[q] * c
        for q in range(n):
            for r in range(q + 1, n):
                val = -2.0 * cosines[q] * cosines[r] / mag
                out[s, q, r] = val
                out[s, r, q] = val
    return out


def coupling_matrices_numpy(e_so, e_j_asq, e_j, fluxes):
    theta = TWO_PI * np.cumsum(fluxes, axis=1)
    total = e_j - np.sum(e_j_asq * np.exp(1j * theta), axis=1)
    mag = np.abs(total)
    offset = np.angle(total)
    c = np.cos(theta - offset[:, None])
    c = e_so * np.where(np.abs(c) < COS_SNAP, 0.0, c)
    out = -2.0 * c[:, :, None] * c[:, None, :] / mag[:, None, None]
    idx = np.arange(fluxes.shape[1])
    out[:, idx, idx] = 0.0
    return out


# -- Walsh-Hadamard transform of a 2^n table ---------------------------------


@njit
def walsh_coefficients_loops(values):
    out = values.copy()
    size = out.shape[0]
    h = 1
    while h < size:
        for start in range(0, size, 2 * h):
            for k in range(start, start + h):
                a = out[k]
                b = out[k + h]
                out[k] = a + b
                out[k + h] = a - b
        h *= 2
    return out / size


def walsh_coefficients_numpy(values):
    size = values.shape[0]
    n = size.bit_length() - 1
    out = values.astype(np.float64).reshape((2,) * n) if n else values.astype(np.float64).copy()
    for axis in range(n):
        a = np.take(out, 0, axis=axis)
        b = np.take(out, 1, axis=axis)
        out = np.stack((a + b, a - b), axis=axis)
    return out.reshape(size) / size


# -- diagonal of a Z-only spin Hamiltonian -----------------------------------


@njit
def diagonal_energies_loops(n, energies, pairs, triple_idx, triple_vals):
    size = 1 << n
    out = np.zeros(size)
    spins = np.empty(n)
    for b in range(size):
        for q in range(n):
            spins[q] = -1.0 if (b >> (n - 1 - q)) & 1 else 1.0
        acc = 0.0
        for q in range(n):
            acc += 0.5 * energies[q] * spins[q]
            for r in range(q + 1, n):
                acc += 0.5 * pairs[q, r] * spins[q] * spins[r]
        for t in range(triple_vals.shape[0]):
            acc += (
                0.5
                * triple_vals[t]
                * spins[triple_idx[t, 0]]
                * spins[triple_idx[t, 1]]
                * spins[triple_idx[t, 2]]
            )
        out[b] = acc
    return out


def _spin_column(n, q):
    b = np.arange(1 << n)
    return 1.0 - 2.0 * ((b >> (n - 1 - q)) & 1)


def diagonal_energies_numpy(n, energies, pairs, triple_idx, triple_vals):
    cols = [_spin_column(n, q) for q in range(n)]
    out = np.zeros(1 << n)
    for q in range(n):
        if energies[q]:
            out += 0.5 * energies[q] * cols[q]
        for r in range(q + 1, n):
            if pairs[q, r]:
                out += 0.5 * pairs[q, r] * cols[q] * cols[r]
    for (i, j, k), val in zip(triple_idx, triple_vals):
        out += 0.5 * val * cols[i] * cols[j] * cols[k]
    return out


# -- classical minimisation of the junction-network potential ----------------


@njit
def _potential_grad(phi, e_j, e_j_asq, e_so, theta, spins):
    g = e_j * np.sin(phi)
    for q in range(theta.shape[0]):
        g -= e_j_asq[q] * np.sin(phi + theta[q]) + spins[q] * e_so[q] * np.cos(phi + theta[q])
    return g


@njit
def _potential(phi, e_j, e_j_asq, e_so, zeeman, theta, spins):
    s2 = np.sin(0.5 * phi)
    u = 2.0 * e_j * s2 * s2
    for q in range(theta.shape[0]):
        u += e_j_asq[q] * np.cos(phi + theta[q]) - spins[q] * e_so[q] * np.sin(phi + theta[q])
        u += 0.5 * spins[q] * zeeman[q]
    return u


@njit
def oracle_minima_loops(e_j, e_j_asq, e_so, zeeman, theta, spins, tol):
    m = spins.shape[0]
    energies = np.empty(m)
    phis = np.empty(m)
    ok = np.ones(m, dtype=np.bool_)
    half_pi = 0.5 * np.pi
    for c in range(m):
        s = spins[c]
        g0 = _potential_grad(0.0, e_j, e_j_asq, e_so, theta, s)
        curv = e_j
        for q in range(theta.shape[0]):
            curv -= e_j_asq[q] * np.cos(theta[q]) - s[q] * e_so[q] * np.sin(theta[q])
        seed = -g0 / curv if curv > 0 else 0.0
        seed = min(max(seed, -half_pi), half_pi)
        lo = seed - half_pi
        hi = seed + half_pi
        glo = _potential_grad(lo, e_j, e_j_asq, e_so, theta, s)
        ghi = _potential_grad(hi, e_j, e_j_asq, e_so, theta, s)
        if not (glo < 0.0 and ghi > 0.0):
            # well far from zero phase: bracket the lowest point of a coarse grid
            best = 0.0
            u_best = np.inf
            for k in range(GRID_POINTS):
                p = -np.pi + 2.0 * np.pi * k / GRID_POINTS
                u = _potential(p, e_j, e_j_asq, e_so, zeeman, theta, s)
                if u < u_best:
                    u_best = u
                    best = p
            lo = best - 2.0 * np.pi / GRID_POINTS
            hi = best + 2.0 * np.pi / GRID_POINTS
            glo = _potential_grad(lo, e_j, e_j_asq, e_so, theta, s)
            ghi = _potential_grad(hi, e_j, e_j_asq, e_so, theta, s)
        if not (glo < 0.0 and ghi > 0.0):
            ok[c] = False
            energies[c] = np.nan
            phis[c] = np.nan
            continue
        mid = 0.5 * (lo + hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = _potential_grad(mid, e_j, e_j_asq, e_so, theta, s)
            if abs(gm) < tol or hi - lo < 1e-16:
                break
            if gm > 0.0:
                hi = mid
            else:
                lo = mid
        if abs(_potential_grad(mid, e_j, e_j_asq, e_so, theta, s)) > tol and hi - lo >= 1e-16:
            ok[c] = False
        phis[c] = mid
        energies[c] = _potential(mid, e_j, e_j_asq, e_so, zeeman, theta, s)
    return energies, phis, ok


def oracle_minima_numpy(e_j, e_j_asq, e_so, zeeman, theta, spins, tol):
    spins = np.asarray(spins, dtype=np.float64)

    def grad(phi):
        arg = phi[:, None] + theta[None, :]
        return e_j * np.sin(phi) - np.sum(
            e_j_asq * np.sin(arg) + spins * e_so * np.cos(arg), axis=1
        )

    g0 = grad(np.zeros(spins.shape[0]))
    curv = e_j - np.sum(e_j_asq * np.cos(theta) - spins * e_so * np.sin(theta), axis=1)
    seed = np.where(curv > 0, -g0 / np.where(curv > 0, curv, 1.0), 0.0)
    seed = np.clip(seed, -0.5 * np.pi, 0.5 * np.pi)
    lo = seed - 0.5 * np.pi
    hi = seed + 0.5 * np.pi
    ok = (grad(lo) < 0.0) & (grad(hi) > 0.0)
    if not ok.all():
        grid = -np.pi + 2.0 * np.pi * np.arange(GRID_POINTS) / GRID_POINTS
        arg = grid[None, :, None] + theta[None, None, :]
        u = e_j * (1.0 - np.cos(grid))[None, :] + np.sum(
            e_j_asq * np.cos(arg) - spins[:, None, :] * e_so * np.sin(arg), axis=2
        )
        best = grid[np.argmin(u, axis=1)]
        step = 2.0 * np.pi / GRID_POINTS
        lo = np.where(ok, lo, best - step)
        hi = np.where(ok, hi, best + step)
        ok = (grad(lo) < 0.0) & (grad(hi) > 0.0)
    done = ~ok
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = np.where(done, mid, 0.5 * (lo + hi))
        gm = grad(mid)
        done |= (np.abs(gm) < tol) | (hi - lo < 1e-16)
        if done.all():
            break
        hi = np.where(~done & (gm > 0.0), mid, hi)
        lo = np.where(~done & (gm <= 0.0), mid, lo)
    ok &= (np.abs(grad(mid)) <= tol) | (hi - lo < 1e-16)
    arg = mid[:, None] + theta[None, :]
    energies = 2.0 * e_j * np.sin(0.5 * mid) ** 2 + np.sum(
        e_j_asq * np.cos(arg) - spins * e_so * np.sin(arg) + 0.5 * spins * zeeman, axis=1
    )
    energies = np.where(ok, energies, np.nan)
    return energies, np.where(ok, mid, np.nan), ok


if USE_NUMBA:
    coupling_matrices = coupling_matrices_loops
    walsh_coefficients = walsh_coefficients_loops
    diagonal_energies = diagonal_energies_loops
    oracle_minima = oracle_minima_loops
else:
    coupling_matrices = coupling_matrices_numpy
    walsh_coefficients = walsh_coefficients_numpy
    diagonal_energies = diagonal_energies_numpy
    oracle_minima = oracle_minima_numpy
