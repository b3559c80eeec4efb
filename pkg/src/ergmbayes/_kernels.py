"""Compiled inner loops: per-dyad change statistics, tie-toggle Metropolis
runs, and bulk design-matrix fills.

These kernels operate on a flat, array-only encoding of the expanded model
coordinates (see stats.CompiledModel). The adjacency entry being toggled is
temporarily zeroed inside delta_stats and always restored, so callers may
pass live buffers; buffers must not be shared across threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

EDGES = 0
MUTUAL = 1
NODEMATCH = 2        # pooled, optional level filter via lvlptr/lvldat
NODEMATCH_LVL = 3
NODEFACTOR_LVL = 4
ABSDIFF = 5
GWESP = 6
IDEGREE = 7
ODEGREE = 8
DEGREE = 9


@njit(cache=True, nogil=True)
def delta_stats(adj, directed, i, j, codes, aidx, lvl, f1, f2, kdeg,
                lvlptr, lvldat, cat, num, out):
    """Change statistics s(y+_ij) - s(y-_ij) for dyad (i, j), independent of
    the dyad's current value. f1 holds exp(decay), f2 holds 1 - exp(-decay)
    for gwesp coordinates."""
    n = adj.shape[0]
    yij = adj[i, j]
    adj[i, j] = 0
    if not directed:
        adj[j, i] = 0

    for c in range(codes.shape[0]):
        code = codes[c]
        if code == EDGES:
            out[c] = 1.0
        elif code == MUTUAL:
            out[c] = 1.0 if adj[j, i] == 1 else 0.0
        elif code == NODEMATCH:
            a = aidx[c]
            xi = cat[a, i]
            v = 0.0
            if xi == cat[a, j]:
                lo = lvlptr[c]
                hi = lvlptr[c + 1]
                if lo == hi:
                    v = 1.0
                else:
                    for t in range(lo, hi):
                        if lvldat[t] == xi:
                            v = 1.0
                            break
            out[c] = v
        elif code == NODEMATCH_LVL:
            a = aidx[c]
            out[c] = 1.0 if (cat[a, i] == lvl[c] and cat[a, j] == lvl[c]) else 0.0
        elif code == NODEFACTOR_LVL:
            a = aidx[c]
            v = 0.0
            if cat[a, i] == lvl[c]:
                v += 1.0
            if cat[a, j] == lvl[c]:
                v += 1.0
            out[c] = v
        elif code == ABSDIFF:
            a = aidx[c]
            out[c] = abs(num[a, i] - num[a, j])
        elif code == GWESP:
            et = f1[c]
            u = f2[c]
            extra = 0.0
            cn = 0
            if directed:
                # new edge's own partners: k with i->k->j
                for k in range(n):
                    if adj[i, k] == 1 and adj[k, j] == 1:
                        cn += 1
                # edge i->b gains partner j when i->b and j->b exist
                for b in range(n):
                    if adj[j, b] == 1 and adj[i, b] == 1:
                        e = 0
                        for m in range(n):
                            if adj[i, m] == 1 and adj[m, b] == 1:
                                e += 1
                        extra += u ** e
                # edge a->j gains partner i when a->j and a->i exist
                for a2 in range(n):
                    if adj[a2, i] == 1 and adj[a2, j] == 1:
                        e = 0
                        for m in range(n):
                            if adj[a2, m] == 1 and adj[m, j] == 1:
                                e += 1
                        extra += u ** e
            else:
                for k in range(n):
                    if adj[i, k] == 1 and adj[j, k] == 1:
                        cn += 1
                        e1 = 0
                        e2 = 0
                        for m in range(n):
                            if adj[i, m] == 1 and adj[k, m] == 1:
                                e1 += 1
                            if adj[j, m] == 1 and adj[k, m] == 1:
                                e2 += 1
                        extra += u ** e1 + u ** e2
            out[c] = et * (1.0 - u ** cn) + extra
        elif code == IDEGREE:
            m = 0
            for u2 in range(n):
                m += adj[u2, j]
            k = kdeg[c]
            out[c] = (1.0 if m + 1 == k else 0.0) - (1.0 if m == k else 0.0)
        elif code == ODEGREE:
            m = 0
            for u2 in range(n):
                m += adj[i, u2]
            k = kdeg[c]
            out[c] = (1.0 if m + 1 == k else 0.0) - (1.0 if m == k else 0.0)
        else:  # DEGREE, undirected
            mi = 0
            mj = 0
            for u2 in range(n):
                mi += adj[i, u2]
                mj += adj[j, u2]
            k = kdeg[c]
            out[c] = ((1.0 if mi + 1 == k else 0.0) - (1.0 if mi == k else 0.0)
                      + (1.0 if mj + 1 == k else 0.0) - (1.0 if mj == k else 0.0))

    adj[i, j] = yij
    if not directed:
        adj[j, i] = yij


@njit(cache=True, nogil=True)
def _mh_steps(adj, directed, theta, stats, steps, di, dj, codes, aidx, lvl,
              f1, f2, kdeg, lvlptr, lvldat, cat, num, buf):
    """Inner proposal loop; RNG state must already be seeded."""
    nd = di.shape[0]
    d = theta.shape[0]
    acc = 0
    for _ in range(steps):
        r = np.random.randint(0, nd)
        i = di[r]
        j = dj[r]
        present = adj[i, j] == 1
        delta_stats(adj, directed, i, j, codes, aidx, lvl, f1, f2, kdeg,
                    lvlptr, lvldat, cat, num, buf)
        lr = 0.0
        for c in range(d):
            lr += theta[c] * buf[c]
        if present:
            lr = -lr
        if lr >= 0.0 or np.log(np.random.random()) < lr:
            acc += 1
            if present:
                adj[i, j] = 0
                if not directed:
                    adj[j, i] = 0
                for c in range(d):
                    stats[c] -= buf[c]
            else:
                adj[i, j] = 1
                if not directed:
                    adj[j, i] = 1
                for c in range(d):
                    stats[c] += buf[c]
    return acc


@njit(cache=True, nogil=True)
def mh_run(adj, directed, theta, stats, steps, di, dj, codes, aidx, lvl,
           f1, f2, kdeg, lvlptr, lvldat, cat, num, seed):
    """Single-site tie-toggle Metropolis: `steps` uniform proposals over the
    dyads listed in (di, dj). Mutates adj and the running statistic vector
    in place; returns the number of accepted toggles."""
    np.random.seed(seed)
    buf = np.empty(theta.shape[0], dtype=np.float64)
    return _mh_steps(adj, directed, theta, stats, steps, di, dj, codes, aidx,
                     lvl, f1, f2, kdeg, lvlptr, lvldat, cat, num, buf)


@njit(cache=True, nogil=True)
def mh_run_indexed(adj, directed, theta, stats, draws, thin, di, dj, codes,
                   aidx, lvl, f1, f2, kdeg, lvlptr, lvldat, cat, num, seed,
                   out_idx):
    """Long thinned run recording, after every `thin` proposals, the graph's
    dyad bitmask (bit k set iff dyad (di[k], dj[k]) is an edge; needs at
    most 24 dyads). Used for empirical-vs-enumerated distribution checks."""
    np.random.seed(seed)
    buf = np.empty(theta.shape[0], dtype=np.float64)
    for t in range(draws):
        _mh_steps(adj, directed, theta, stats, thin, di, dj, codes, aidx,
                  lvl, f1, f2, kdeg, lvlptr, lvldat, cat, num, buf)
        idx = 0
        for k in range(di.shape[0]):
            if adj[di[k], dj[k]] == 1:
                idx |= 1 << k
        out_idx[t] = idx


@njit(cache=True, nogil=True)
def fill_design(adj, directed, di, dj, codes, aidx, lvl, f1, f2, kdeg,
                lvlptr, lvldat, cat, num, X):
    """Change statistics for every listed dyad, written row-wise into X."""
    for r in range(di.shape[0]):
        delta_stats(adj, directed, di[r], dj[r], codes, aidx, lvl, f1, f2,
                    kdeg, lvlptr, lvldat, cat, num, X[r])
