"""Submodular mutual information objectives.

Each objective scores a subset ``A`` of the ground set against a fixed query
set ``Q`` that lives in a separate item space.  Kernels are indexed as

* ``ground``: ground x ground similarities (FLVMI, LogDetMI)
* ``cross``:  ground x query similarities (all kinds)
* ``query``:  query x query similarities (LogDetMI)

The free ``eval_*`` functions compute the closed forms from scratch.  The
classes keep memo state so that a marginal gain costs O(|Q|) for GCMI and
FLQMI, O(n) for FLVMI and O(1) (plus O(n |A|) per commit) for LogDetMI.
Every class counts the kernel entries it reads in ``reads``.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular

from . import _accel
from .kernel import _as_array


class SmiKind(str, Enum):
    GCMI = "gcmi"
    FLVMI = "flvmi"
    FLQMI = "flqmi"
    LOGDETMI = "logdetmi"


SMI_KINDS = tuple(k.value for k in SmiKind)

# which kernels each kind consumes
REQUIRES = {
    SmiKind.GCMI: ("cross",),
    SmiKind.FLQMI: ("cross",),
    SmiKind.FLVMI: ("ground", "cross"),
    SmiKind.LOGDETMI: ("ground", "cross", "query"),
}


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def _index(A, n: int) -> np.ndarray:
    A = np.asarray(list(A) if not isinstance(A, np.ndarray) else A, dtype=np.int64).reshape(-1)
    if A.size and (A.min() < 0 or A.max() >= n):
        bad = A[(A < 0) | (A >= n)][0]
        raise IndexError(f"ground index {int(bad)} out of range [0, {n})")
    if np.unique(A).size != A.size:
        raise ValueError("subset contains duplicate indices")
    return A


def cholesky(m: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; names the first non-PD leading minor on failure."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    for k in range(1, m.shape[0] + 1):
        try:
            np.linalg.cholesky(m[:k, :k])
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(
                f"{label}: leading principal minor of order {k} is not positive definite") from None
    raise NotPositiveDefiniteError(f"{label}: not positive definite")


def _logdet_chol(lower: np.ndarray) -> float:
    return float(2.0 * np.log(np.diag(lower)).sum())


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def eval_gcmi(A, cross) -> float:
    cross = _as_array(cross)
    A = _index(A, cross.shape[0])
    return float(2.0 * cross[A].sum())


def eval_flqmi(A, cross) -> float:
    cross = _as_array(cross)
    A = _index(A, cross.shape[0])
    if A.size == 0 or cross.shape[1] == 0:
        return 0.0
    block = cross[A]
    return float(block.max(axis=0).sum() + block.max(axis=1).sum())


def eval_flvmi(A, ground, cross) -> float:
    ground, cross = _as_array(ground), _as_array(cross)
    A = _index(A, ground.shape[0])
    if A.size == 0:
        return 0.0
    cover = ground[:, A].max(axis=1)
    qmax = cross.max(axis=1) if cross.shape[1] else np.zeros(ground.shape[0])
    return float(np.minimum(cover, qmax).sum())


def eval_logdetmi(A, ground, cross, query) -> float:
    ground, cross, query = _as_array(ground), _as_array(cross), _as_array(query)
    A = _index(A, ground.shape[0])
    if A.size == 0:
        return 0.0
    s_a = ground[np.ix_(A, A)]
    la = cholesky(s_a, "S_A")
    lq = cholesky(query, "S_Q")
    w = solve_triangular(lq, cross[A].T, lower=True)
    cond = s_a - w.T @ w
    lc = cholesky(cond, "S_A - S_AQ S_Q^-1 S_QA")
    return _logdet_chol(la) - _logdet_chol(lc)


# ---------------------------------------------------------------------------
# incremental objectives
# ---------------------------------------------------------------------------


class SmiFunction:
    """Base class: ordered selection, running value and read counter."""

    kind: SmiKind

    def __init__(self, n: int):
        self.n = n
        self.selected: list[int] = []
        self._in = np.zeros(n, dtype=bool)
        self.value = 0.0
        self.reads = 0

    def _check_new(self, j: int) -> int:
        j = int(j)
        if not 0 <= j < self.n:
            raise IndexError(f"ground index {j} out of range [0, {self.n})")
        if self._in[j]:
            raise ValueError(f"item {j} is already selected")
        return j

    def gain(self, j: int) -> float:
        j = self._check_new(j)
        return float(self._gains(np.array([j], dtype=np.int64))[0])

    def gains(self, cand) -> np.ndarray:
        cand = np.asarray(cand, dtype=np.int64)
        if cand.size and self._in[cand].any():
            raise ValueError(f"item {int(cand[self._in[cand]][0])} is already selected")
        return self._gains(cand)

    def commit(self, j: int) -> float:
        j = self._check_new(j)
        g = float(self._gains(np.array([j], dtype=np.int64))[0])
        self._commit(j)
        self.selected.append(j)
        self._in[j] = True
        self.value += g
        return g

    def evaluate(self, A=None) -> float:
        return self._evaluate(self.selected if A is None else A)

    def _gains(self, cand: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _commit(self, j: int) -> None:
        raise NotImplementedError

    def _evaluate(self, A) -> float:
        raise NotImplementedError


class GCMI(SmiFunction):
    kind = SmiKind.GCMI

    def __init__(self, cross):
        self.cross = _as_array(cross)
        super().__init__(self.cross.shape[0])

    def _gains(self, cand):
        self.reads += cand.size * self.cross.shape[1]
        return 2.0 * self.cross[cand].sum(axis=1)

    def _commit(self, j):
        pass

    def _evaluate(self, A):
        return eval_gcmi(A, self.cross)


class FLQMI(SmiFunction):
    """Memo: per-query running max over the selection."""

    kind = SmiKind.FLQMI

    def __init__(self, cross):
        self.cross = np.ascontiguousarray(_as_array(cross))
        n, q = self.cross.shape
        super().__init__(n)
        self.rowmax = self.cross.max(axis=1) if q else np.zeros(n)
        self.reads += n * q
        # -inf running max with a zero contribution encodes "max over empty set = 0"
        self.qcur = np.full(q, -np.inf)
        self.qcontrib = np.zeros(q)

    def _gains(self, cand):
        self.reads += cand.size * self.cross.shape[1]
        if self.cross.shape[1] == 0:
            return np.zeros(cand.size)
        return _accel.flq_gains(self.cross, cand, self.qcur, self.qcontrib, self.rowmax)

    def _commit(self, j):
        self.reads += self.cross.shape[1]
        np.maximum(self.qcur, self.cross[j], out=self.qcur)
        self.qcontrib = self.qcur.copy()

    def _evaluate(self, A):
        return eval_flqmi(A, self.cross)


class FLVMI(SmiFunction):
    """Memo: per-ground-item cover by the selection (``cur_a``) and by the query (``qmax``)."""

    kind = SmiKind.FLVMI

    def __init__(self, ground, cross):
        self.ground = np.ascontiguousarray(_as_array(ground))
        self.cross = _as_array(cross)
        n = self.ground.shape[0]
        if self.ground.shape != (n, n) or self.cross.shape[0] != n:
            raise ValueError(f"kernel shapes {self.ground.shape} and {self.cross.shape} disagree")
        super().__init__(n)
        q = self.cross.shape[1]
        self.qmax = self.cross.max(axis=1) if q else np.zeros(n)
        self.reads += n * q
        self.cur_a = np.full(n, -np.inf)
        self.contrib = np.zeros(n)

    def _gains(self, cand):
        self.reads += cand.size * self.n
        return _accel.flv_gains(self.ground, cand, self.cur_a, self.qmax, self.contrib)

    def _commit(self, j):
        self.reads += self.n
        # ground kernel is symmetric, so row j is column j
        np.maximum(self.cur_a, self.ground[j], out=self.cur_a)
        self.contrib = np.minimum(self.cur_a, self.qmax)

    def _evaluate(self, A):
        return eval_flvmi(A, self.ground, self.cross)


class LogDetMI(SmiFunction):
    """Memo: per-candidate forward solves against two growing Cholesky factors.

    ``vecs_a[i, :m]`` solves ``L_A v = S[A, i]``; ``diag_a[i]`` is the Schur
    complement ``S[i, i] - |v|^2``, i.e. the pivot item ``i`` would get when
    appended to ``L_A``.  ``vecs_c``/``diag_c`` do the same for the
    query-conditioned kernel ``S - S_.Q S_Q^-1 S_Q.``.  The gain of item ``i``
    is then ``log diag_a[i] - log diag_c[i]``.
    """

    kind = SmiKind.LOGDETMI
    REFACTOR_EVERY = 64

    def __init__(self, ground, cross, query):
        self.ground = np.ascontiguousarray(_as_array(ground))
        self.cross = _as_array(cross)
        self.query = _as_array(query)
        n = self.ground.shape[0]
        q = self.query.shape[0]
        if self.cross.shape != (n, q) or self.ground.shape != (n, n):
            raise ValueError("kernel shapes disagree")
        super().__init__(n)
        if q:
            lq = cholesky(self.query, "S_Q")
            self.w = solve_triangular(lq, self.cross.T, lower=True)  # q x n
        else:
            self.w = np.zeros((0, n))
        self.reads += n * q + q * q
        self._cap = 0
        self._grow(8)
        self._reset_diag()

    def _grow(self, cap):
        cap = min(max(cap, 1), self.n)
        if cap <= self._cap:
            return
        for name in ("vecs_a", "vecs_c"):
            new = np.zeros((self.n, cap))
            if self._cap:
                new[:, :self._cap] = getattr(self, name)
            setattr(self, name, new)
        self._cap = cap

    def _reset_diag(self):
        self.diag_a = np.diag(self.ground).copy()
        self.diag_c = self.diag_a - np.einsum("ij,ij->j", self.w, self.w)
        self.reads += self.n

    def _cond_row(self, j):
        return self.ground[j] - self.w[:, j] @ self.w

    def _gains(self, cand):
        da, dc = self.diag_a[cand], self.diag_c[cand]
        bad = (da <= 0) | (dc <= 0)
        if bad.any():
            i = int(cand[np.flatnonzero(bad)[0]])
            raise NotPositiveDefiniteError(
                f"appending item {i} makes the order-{len(self.selected) + 1} principal minor "
                f"non-positive-definite (add ridge)")
        return np.log(da) - np.log(dc)

    def _commit(self, j):
        m = len(self.selected)
        if m >= self._cap:
            self._grow(2 * self._cap)
        self.reads += self.n
        _accel.chol_append(self.vecs_a, self.diag_a, self.ground[j], j, m)
        _accel.chol_append(self.vecs_c, self.diag_c, self._cond_row(j), j, m)
        if (m + 1) % self.REFACTOR_EVERY == 0:
            self._refactor(self.selected + [j])

    def _refactor(self, A):
        """Recompute the memo from fresh Cholesky factors to shed drift."""
        A = np.asarray(A, dtype=np.int64)
        m = A.size
        self._reset_diag()
        for vecs, diag, rows in (
            (self.vecs_a, self.diag_a, self.ground[A]),
            (self.vecs_c, self.diag_c, self.ground[A] - self.w[:, A].T @ self.w),
        ):
            lower = cholesky(rows[:, A], "selection kernel")
            v = solve_triangular(lower, rows, lower=True)  # m x n
            vecs[:, :m] = v.T
            diag -= np.einsum("ij,ij->j", v, v)
        self.reads += self.n * m

    @property
    def chol_a(self) -> np.ndarray:
        """Cholesky factor of the selected block ``S_A``."""
        m = len(self.selected)
        return self.vecs_a[self.selected, :m].copy()

    @property
    def chol_c(self) -> np.ndarray:
        m = len(self.selected)
        return self.vecs_c[self.selected, :m].copy()

    def _evaluate(self, A):
        return eval_logdetmi(A, self.ground, self.cross, self.query)


def make_smi(kind, ground=None, cross=None, query=None) -> SmiFunction:
    kind = SmiKind(kind)
    if kind is SmiKind.GCMI:
        return GCMI(cross)
    if kind is SmiKind.FLQMI:
        return FLQMI(cross)
    if kind is SmiKind.FLVMI:
        return FLVMI(ground, cross)
    return LogDetMI(ground, cross, query)
