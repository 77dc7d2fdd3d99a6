"""The numba and numpy kernels must agree."""

import numpy as np
import pytest

from smiselect import _kernels
from smiselect._accel import _resolve, kernels

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def both():
    return kernels("numpy"), kernels("numba")


def test_resolve():
    assert _resolve("NumPy") == "numpy"
    assert _resolve(None) == "numba"
    with pytest.raises(ValueError):
        _resolve("cuda")


def test_flv_gains(rng, both):
    n = 40
    ground = rng.uniform(size=(n, n))
    ground = (ground + ground.T) / 2
    cand = rng.permutation(n)[:15].astype(np.int64)
    cur = np.where(rng.uniform(size=n) < 0.3, -np.inf, rng.uniform(size=n))
    qmax = rng.uniform(size=n)
    contrib = np.where(np.isinf(cur), 0.0, np.minimum(cur, qmax))
    a = both[0]["flv_gains"](ground, cand, cur, qmax, contrib)
    b = both[1]["flv_gains"](ground, cand, cur, qmax, contrib)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_flq_gains(rng, both):
    cross = rng.uniform(size=(30, 6))
    cand = np.arange(30, dtype=np.int64)
    qcur = rng.uniform(size=6)
    a = both[0]["flq_gains"](cross, cand, qcur, qcur.copy(), cross.max(axis=1))
    b = both[1]["flq_gains"](cross, cand, qcur, qcur.copy(), cross.max(axis=1))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_min_sqdist_update(rng, both):
    x = rng.normal(size=(25, 4))
    c = rng.normal(size=4)
    d0 = rng.uniform(0, 10, size=25)
    a = both[0]["min_sqdist_update"](x, c, d0.copy())
    b = both[1]["min_sqdist_update"](x, c, d0.copy())
    np.testing.assert_allclose(a, b, rtol=1e-12)
    np.testing.assert_allclose(a, np.minimum(d0, ((x - c) ** 2).sum(axis=1)), rtol=1e-12)


def test_chol_append(rng, both):
    n, m = 12, 3
    x = rng.normal(size=(n, n))
    s = x @ x.T + np.eye(n)
    out = []
    for k in (both[0], both[1]):
        vecs = np.zeros((n, m + 1))
        diag = np.diag(s).copy()
        for step, j in enumerate([4, 7, 1, 9]):
            k["chol_append"](vecs, diag, s[j].copy(), j, step)
        out.append((vecs, diag))
    np.testing.assert_allclose(out[0][0], out[1][0], atol=1e-12)
    np.testing.assert_allclose(out[0][1], out[1][1], atol=1e-12)
    # rows of the selected items are the Cholesky factor of the selected block
    sel = [4, 7, 1, 9]
    lower = out[0][0][sel]
    np.testing.assert_allclose(lower @ lower.T, s[np.ix_(sel, sel)], atol=1e-10)
