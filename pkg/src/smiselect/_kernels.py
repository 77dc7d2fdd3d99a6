"""Hot inner loops, in two flavours.

Every kernel exists as a pure-numpy function (``*_np``) and as a numba
``@njit`` function (``*_nb``).  :mod:`smiselect._accel` picks one set at
import time.  Both flavours must agree to floating-point round-off; the test
suite checks this directly.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# facility location over the ground set (FLVMI)
# ---------------------------------------------------------------------------


def flv_gains_np(ground, cand, cur, qmax, contrib):
    rows = ground[cand]
    return (np.minimum(np.maximum(rows, cur), qmax) - contrib).sum(axis=1)


@njit(cache=True)
def flv_gains_nb(ground, cand, cur, qmax, contrib):
    n = ground.shape[1]
    out = np.empty(cand.shape[0])
    for c in range(cand.shape[0]):
        row = ground[cand[c]]
        acc = 0.0
        for i in range(n):
            v = row[i]
            if cur[i] > v:
                v = cur[i]
            if qmax[i] < v:
                v = qmax[i]
            acc += v - contrib[i]
        out[c] = acc
    return out


# ---------------------------------------------------------------------------
# facility location over the query set (FLQMI)
# ---------------------------------------------------------------------------


def flq_gains_np(cross, cand, qcur, qcontrib, rowmax):
    rows = cross[cand]
    return (np.maximum(rows, qcur) - qcontrib).sum(axis=1) + rowmax[cand]


@njit(cache=True)
def flq_gains_nb(cross, cand, qcur, qcontrib, rowmax):
    q = cross.shape[1]
    out = np.empty(cand.shape[0])
    for c in range(cand.shape[0]):
        j = cand[c]
        acc = 0.0
        for k in range(q):
            v = cross[j, k]
            if qcur[k] > v:
                v = qcur[k]
            acc += v - qcontrib[k]
        out[c] = acc + rowmax[j]
    return out


# ---------------------------------------------------------------------------
# squared-distance cover update (coreset, k-means++ seeding)
# ---------------------------------------------------------------------------


def min_sqdist_update_np(x, center, d2):
    diff = x - center
    np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return d2


@njit(cache=True)
def min_sqdist_update_nb(x, center, d2):
    n, d = x.shape
    for i in range(n):
        acc = 0.0
        for k in range(d):
            t = x[i, k] - center[k]
            acc += t * t
        if acc < d2[i]:
            d2[i] = acc
    return d2


# ---------------------------------------------------------------------------
# incremental Cholesky column append for all candidates (LogDetMI)
# ---------------------------------------------------------------------------


def chol_append_np(vecs, diag, row, k, m):
    """Append column ``m`` after committing item ``k``.

    ``row`` is the kernel row of ``k`` against every ground item; ``vecs``
    holds the first ``m`` columns of the per-item forward solves.
    """
    pivot = np.sqrt(diag[k])
    col = (row - vecs[:, :m] @ vecs[k, :m]) / pivot
    vecs[:, m] = col
    diag -= col * col
    return col


@njit(cache=True)
def chol_append_nb(vecs, diag, row, k, m):
    n = vecs.shape[0]
    pivot = np.sqrt(diag[k])
    col = np.empty(n)
    for i in range(n):
        acc = row[i]
        for t in range(m):
            acc -= vecs[i, t] * vecs[k, t]
        col[i] = acc / pivot
        vecs[i, m] = col[i]
        diag[i] -= col[i] * col[i]
    return col
