"""numba inner loops for the bit-flip samplers."""
import numpy as np
from numba import njit


@njit(cache=True)
def _local_fields(Q, z):
    n = Q.shape[0]
    f = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i != j and z[j]:
                f[i] += Q[i, j] + Q[j, i]
    return f


@njit(cache=True)
def _neighbours(sym):
    n = sym.shape[0]
    ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        c = 0
        for j in range(n):
            if j != i and sym[i, j] != 0.0:
                c += 1
        ptr[i + 1] = ptr[i] + c
    idx = np.empty(ptr[n], dtype=np.int64)
    val = np.empty(ptr[n])
    for i in range(n):
        k = ptr[i]
        for j in range(n):
            if j != i and sym[i, j] != 0.0:
                idx[k] = j
                val[k] = sym[i, j]
                k += 1
    return ptr, idx, val


@njit(cache=True)
def anneal(Q, betas, reads, seed):
    """Metropolis single-flip annealing; returns the lowest-energy state each read passed through."""
    np.random.seed(seed)
    n = Q.shape[0]
    sym = Q + Q.T
    ptr, idx, val = _neighbours(sym)
    out = np.zeros((reads, n), dtype=np.int8)
    energies = np.zeros(reads)
    for r in range(reads):
        z = np.zeros(n, dtype=np.int8)
        for i in range(n):
            z[i] = 1 if np.random.random() < 0.5 else 0
        f = _local_fields(Q, z)
        e = 0.0
        for i in range(n):
            if z[i]:
                e += Q[i, i] + 0.5 * f[i]
        best = z.copy()
        best_e = e
        for beta in betas:
            for i in range(n):
                delta = (1 - 2 * z[i]) * (Q[i, i] + f[i])
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    step = 1 - 2 * z[i]
                    z[i] = 1 - z[i]
                    e += delta
                    for k in range(ptr[i], ptr[i + 1]):
                        f[idx[k]] += val[k] * step
                    if e < best_e - 1e-9:
                        best_e = e
                        best[:] = z
        out[r] = best
        energies[r] = best_e
    return out, energies


@njit(cache=True)
def tabu_search(Q, z0, iterations, tenure, seed):
    """Best-admissible single-flip tabu search with aspiration; returns (best z, best energy)."""
    np.random.seed(seed)
    n = Q.shape[0]
    sym = Q + Q.T
    z = z0.copy()
    f = _local_fields(Q, z)
    e = 0.0
    for i in range(n):
        if z[i]:
            e += Q[i, i] + 0.5 * f[i]
    best = z.copy()
    best_e = e
    tabu_until = np.zeros(n, dtype=np.int64)
    for it in range(iterations):
        pick = -1
        pick_delta = np.inf
        for i in range(n):
            delta = (1 - 2 * z[i]) * (Q[i, i] + f[i])
            admissible = tabu_until[i] <= it or e + delta < best_e - 1e-12
            if admissible and (delta < pick_delta or (delta == pick_delta and np.random.random() < 0.5)):
                pick = i
                pick_delta = delta
        if pick < 0:
            continue
        step = 1 - 2 * z[pick]
        z[pick] = 1 - z[pick]
        for j in range(n):
            if j != pick:
                f[j] += sym[j, pick] * step
        e += pick_delta
        tabu_until[pick] = it + 1 + tenure
        if e < best_e - 1e-12:
            best_e = e
            best[:] = z
    return best, best_e
