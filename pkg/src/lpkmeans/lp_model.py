"""LP relaxation over packed symmetric matrices: variable indexing, the
trace/row-sum equality system, bound box [0, 1], and a dynamic pool of facet
inequalities of the form

    sum_{j in S} X_ij  <=  X_ii + sum_{j < k in S} X_jk,    2 <= |S|.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from lpkmeans.core import packed_diag_indices, packed_index, packed_len

__all__ = [
    "FacetInequality",
    "CutPool",
    "LpStandardForm",
    "build",
    "violation",
    "active_cuts",
    "all_cuts",
]

_ENUM_BUDGET = 2.8e7


@dataclass(frozen=True)
class FacetInequality:
    """Cut identified by a point index i and a sorted index set S, i not in S."""

    i: int
    s: tuple[int, ...]

    def __post_init__(self):
        s = tuple(sorted(int(v) for v in self.s))
        if len(s) < 2 or len(set(s)) != len(s):
            raise ValueError("S must contain at least two distinct indices")
        if self.i in s:
            raise ValueError("i must not belong to S")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "i", int(self.i))

    def sort_key(self) -> tuple:
        return (self.i, self.s)


class CutPool:
    """Ordered, duplicate-free collection of facet inequalities.

    ``activity`` may hold the per-cut slack observed at the last LP solution;
    it is bookkeeping only and never affects identity.
    """

    def __init__(self, cuts=()):
        self._cuts: list[FacetInequality] = []
        self._keys: set[tuple] = set()
        self.activity: np.ndarray | None = None
        for cut in cuts:
            self.add(cut)

    def add(self, cut: FacetInequality) -> bool:
        key = (cut.i, cut.s)
        if key in self._keys:
            return False
        self._keys.add(key)
        self._cuts.append(cut)
        return True

    def __contains__(self, cut: FacetInequality) -> bool:
        return (cut.i, cut.s) in self._keys

    def __iter__(self):
        return iter(self._cuts)

    def __len__(self) -> int:
        return len(self._cuts)

    def __getitem__(self, idx: int) -> FacetInequality:
        return self._cuts[idx]

    def cuts(self) -> tuple[FacetInequality, ...]:
        return tuple(self._cuts)


@dataclass
class LpStandardForm:
    """min c.x  s.t.  a_eq x = b_eq,  q x <= 0,  lb <= x <= ub.

    Variables are the packed upper triangle (diagonal included) of the
    symmetric decision matrix; off-diagonal objective coefficients are doubled
    so c.x equals the full double-sum objective.
    """

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    q: sp.csr_matrix
    lb: np.ndarray
    ub: np.ndarray
    n_points: int
    k: int
    cuts: tuple[FacetInequality, ...]

    @property
    def n_vars(self) -> int:
        return self.c.size

    def stacked(self) -> sp.csr_matrix:
        """Equality rows followed by cut rows, CSR with sorted columns."""
        if self.q.shape[0] == 0:
            return self.a_eq
        return sp.vstack([self.a_eq, self.q], format="csr")

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)


def _cut_row_entries(cut: FacetInequality, n: int) -> tuple[np.ndarray, np.ndarray]:
    i = cut.i
    s = np.asarray(cut.s)
    cols = [packed_index(np.minimum(i, s), np.maximum(i, s), n)]
    vals = [np.ones(s.size)]
    cols.append(np.array([packed_index(i, i, n)]))
    vals.append(np.array([-1.0]))
    if s.size >= 2:
        ju, ku = np.triu_indices(s.size, 1)
        cols.append(packed_index(s[ju], s[ku], n))
        vals.append(-np.ones(ju.size))
    return np.concatenate(cols), np.concatenate(vals)


def build(d: np.ndarray, k: int, pool: CutPool) -> LpStandardForm:
    """Assemble the standard form for given squared distances and cut pool."""
    n = d.shape[0]
    if not (2 <= k <= n):
        raise ValueError(f"need 2 <= K <= n, got K={k}, n={n}")
    nv = packed_len(n)

    c = np.zeros(nv)
    iu, ju = np.triu_indices(n, 1)
    c[packed_index(iu, ju, n)] = 2.0 * d[iu, ju]
    c[packed_diag_indices(n)] = d[np.arange(n), np.arange(n)]

    # equality rows: trace first, then one unit-row-sum row per point
    rows = [np.zeros(n, dtype=np.int64)]
    cols = [packed_diag_indices(n)]
    vals = [np.ones(n)]
    for i in range(n):
        j = np.arange(n)
        cols.append(packed_index(np.minimum(i, j), np.maximum(i, j), n))
        rows.append(np.full(n, 1 + i, dtype=np.int64))
        vals.append(np.ones(n))
    a_eq = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n + 1, nv),
    )
    a_eq.sort_indices()
    b_eq = np.concatenate([[float(k)], np.ones(n)])

    cut_list = tuple(pool)
    rows, cols, vals = [], [], []
    for r, cut in enumerate(cut_list):
        ccols, cvals = _cut_row_entries(cut, n)
        cols.append(ccols)
        vals.append(cvals)
        rows.append(np.full(ccols.size, r, dtype=np.int64))
    if cut_list:
        q = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(cut_list), nv),
        )
        q.sort_indices()
    else:
        q = sp.csr_matrix((0, nv))

    return LpStandardForm(
        c=c,
        a_eq=a_eq,
        b_eq=b_eq,
        q=q,
        lb=np.zeros(nv),
        ub=np.ones(nv),
        n_points=n,
        k=k,
        cuts=cut_list,
    )


def violation(x: np.ndarray, cut: FacetInequality) -> float:
    """w_i(S) = sum_{j in S} X_ij - X_ii - sum_{j<k in S} X_jk; > 0 means violated."""
    i = cut.i
    s = np.asarray(cut.s)
    w = float(x[i, s].sum()) - float(x[i, i])
    sub = x[np.ix_(s, s)]
    w -= float(np.triu(sub, 1).sum())
    return w


def _pair_violations(x: np.ndarray, i: int, ju: np.ndarray, ku: np.ndarray) -> np.ndarray:
    return x[i, ju] + x[i, ku] - x[i, i] - x[ju, ku]


def _sample_without_replacement(rng: np.random.Generator, total: int, size: int) -> np.ndarray:
    """Floyd's algorithm: uniform size-subset of range(total) without
    materializing the range."""
    chosen: set[int] = set()
    for j in range(total - size, total):
        t = int(rng.integers(0, j + 1))
        chosen.add(j if t in chosen else t)
    return np.array(sorted(chosen), dtype=np.int64)


def active_cuts(
    x: np.ndarray,
    t: int,
    eps_act: float = 1e-9,
    cap: int | None = None,
    seed: int = 0,
) -> CutPool:
    """Cuts with |S| <= t whose slack at X is within eps_act of zero.

    When more than ``cap`` cuts are tight, a uniform sample without
    replacement is drawn under ``seed``.  The t = 2 family is scanned in two
    passes so the full tight set never needs to be materialized.
    """
    n = x.shape[0]
    if t < 2:
        raise ValueError("t must be >= 2")
    if t == 2:
        return _active_cuts_pairs(x, eps_act, cap, seed)
    if float(n) ** (t + 1) > _ENUM_BUDGET:
        raise ValueError(f"tight-cut enumeration with t={t} infeasible for n={n}")
    tight = [
        cut for cut in all_cuts(n, t) if abs(violation(x, cut)) <= eps_act
    ]
    if cap is not None and len(tight) > cap:
        rng = np.random.Generator(np.random.Philox(seed))
        idx = _sample_without_replacement(rng, len(tight), cap)
        tight = [tight[int(i)] for i in idx]
    return CutPool(tight)


def _active_cuts_pairs(x: np.ndarray, eps_act: float, cap: int | None, seed: int) -> CutPool:
    n = x.shape[0]
    ju, ku = np.triu_indices(n, 1)

    def tight_flat(i: int) -> np.ndarray:
        w = _pair_violations(x, i, ju, ku)
        ok = (np.abs(w) <= eps_act) & (ju != i) & (ku != i)
        return np.flatnonzero(ok)

    counts = np.empty(n, dtype=np.int64)
    for i in range(n):
        counts[i] = tight_flat(i).size
    total = int(counts.sum())

    selected: np.ndarray | None = None
    if cap is not None and total > cap:
        rng = np.random.Generator(np.random.Philox(seed))
        selected = _sample_without_replacement(rng, total, cap)

    pool = CutPool()
    offsets = np.concatenate([[0], np.cumsum(counts)])
    for i in range(n):
        if counts[i] == 0:
            continue
        flat = tight_flat(i)
        if selected is None:
            take = flat
        else:
            lo = np.searchsorted(selected, offsets[i])
            hi = np.searchsorted(selected, offsets[i + 1])
            take = flat[selected[lo:hi] - offsets[i]]
        for f in take:
            pool.add(FacetInequality(i, (int(ju[f]), int(ku[f]))))
    return pool


def all_cuts(n: int, t: int):
    """Every (i, S) with 2 <= |S| <= t, in deterministic (i, |S|, S) order."""
    for i in range(n):
        others = [v for v in range(n) if v != i]
        for size in range(2, t + 1):
            for s in itertools.combinations(others, size):
                yield FacetInequality(i, s)
