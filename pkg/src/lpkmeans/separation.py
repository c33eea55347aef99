"""Separation of violated facet inequalities at a fractional solution: a
greedy set-growing heuristic plus an exhaustive enumeration fallback."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lpkmeans.lp_model import FacetInequality

__all__ = ["SeparationReport", "separate_greedy", "separate_exhaustive"]

_ENUM_BUDGET = 2.8e7


@dataclass
class SeparationReport:
    cuts: list[FacetInequality] = field(default_factory=list)
    violations: list[float] = field(default_factory=list)
    truncated: bool = False
    exhaustive: bool = False

    def add(self, cut: FacetInequality, w: float) -> None:
        self.cuts.append(cut)
        self.violations.append(w)

    def sorted_pairs(self) -> list[tuple[FacetInequality, float]]:
        """Most violated first; ties by (i, S) for reproducibility."""
        order = sorted(
            range(len(self.cuts)),
            key=lambda t: (-self.violations[t], self.cuts[t].sort_key()),
        )
        return [(self.cuts[t], self.violations[t]) for t in order]


def separate_greedy(x: np.ndarray, t_max: int, eps_vio: float = 1e-6) -> SeparationReport:
    """Grow S greedily from every anchor pair (i, j), recording each
    intermediate set whose inequality is violated by more than eps_vio.

    From S the candidate k > max(S) maximizing X_ik - sum_{l in S} X_lk is
    appended, and the violation is maintained incrementally.  Deterministic:
    argmax ties break toward the smallest index.
    """
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    n = x.shape[0]
    report = SeparationReport()
    if t_max == 2:
        _greedy_pairs(x, eps_vio, report)
        return report

    diag = np.diag(x)
    for i in range(n):
        xi = x[i]
        for j in range(n):
            if j == i:
                continue
            s = [j]
            w = xi[j] - diag[i]
            colsum = x[j].copy()  # sum over l in S of X_lk, as a function of k
            c = j
            while len(s) < t_max:
                lo = c + 1
                if lo >= n:
                    break
                gamma = xi[lo:] - colsum[lo:]
                if i >= lo:
                    gamma = gamma.copy()
                    gamma[i - lo] = -np.inf
                kk = int(gamma.argmax()) + lo
                if not np.isfinite(gamma[kk - lo]):
                    break
                s.append(kk)
                w += gamma[kk - lo]
                if w > eps_vio:
                    report.add(FacetInequality(i, tuple(s)), float(w))
                colsum += x[kk]
                c = kk
    return report


def _greedy_pairs(x: np.ndarray, eps_vio: float, report: SeparationReport) -> None:
    """Vectorized t_max = 2 greedy: for each (i, j) only one k is appended."""
    n = x.shape[0]
    diag = np.diag(x)
    col = np.arange(n)
    for i in range(n):
        gamma = x[i][None, :] - x  # gamma[j, k] = X_ik - X_jk
        gamma[:, i] = -np.inf
        gamma[col[:, None] >= col[None, :]] = -np.inf  # require k > j
        k_star = gamma.argmax(axis=1)
        best = gamma[np.arange(n), k_star]
        w = x[i] - diag[i] + best
        valid = np.isfinite(best) & (col != i)
        for j in np.flatnonzero(valid & (w > eps_vio)):
            report.add(
                FacetInequality(i, (int(j), int(k_star[j]))), float(w[j])
            )


def separate_exhaustive(
    x: np.ndarray, t_max: int, eps_vio: float = 1e-6, cap: int | None = None
) -> SeparationReport:
    """Enumerate every (i, S) with 2 <= |S| <= t_max; empty result proves no
    violated inequality exists at eps_vio.  Returns at most ``cap`` cuts,
    most violated first."""
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    n = x.shape[0]
    if float(n) ** (t_max + 1) > _ENUM_BUDGET:
        raise ValueError(f"exhaustive separation with t_max={t_max} infeasible for n={n}")
    report = SeparationReport()
    report.exhaustive = True
    diag = np.diag(x)

    ju, ku = np.triu_indices(n, 1)
    for i in range(n):
        w = x[i, ju] + x[i, ku] - diag[i] - x[ju, ku]
        hit = np.flatnonzero((w > eps_vio) & (ju != i) & (ku != i))
        for f in hit:
            report.add(FacetInequality(i, (int(ju[f]), int(ku[f]))), float(w[f]))

    if t_max >= 3:
        _exhaustive_triples(x, eps_vio, report)
    if t_max >= 4:
        _exhaustive_large(x, t_max, eps_vio, report)

    pairs = report.sorted_pairs()
    if cap is not None and len(pairs) > cap:
        report.truncated = True
        pairs = pairs[:cap]
    report.cuts = [c for c, _ in pairs]
    report.violations = [v for _, v in pairs]
    return report


def _exhaustive_triples(x: np.ndarray, eps_vio: float, report: SeparationReport) -> None:
    n = x.shape[0]
    diag = np.diag(x)
    col = np.arange(n)
    for i in range(n):
        xi = x[i]
        for j in range(n - 2):
            if j == i:
                continue
            u = xi - x[j]  # u[k] = X_ik - X_jk
            base = xi[j] - diag[i]
            w = base + u[:, None] + u[None, :] - x  # over (k, l)
            bad = (col == i) | (col <= j)
            w[bad, :] = -np.inf
            w[:, bad] = -np.inf
            w[col[:, None] >= col[None, :]] = -np.inf  # k < l
            kk, ll = np.nonzero(w > eps_vio)
            for a, b in zip(kk, ll):
                report.add(
                    FacetInequality(i, (j, int(a), int(b))), float(w[a, b])
                )


def _exhaustive_large(x: np.ndarray, t_max: int, eps_vio: float, report: SeparationReport) -> None:
    import itertools

    n = x.shape[0]
    diag = np.diag(x)
    for i in range(n):
        others = [v for v in range(n) if v != i]
        for size in range(4, t_max + 1):
            for s in itertools.combinations(others, size):
                idx = np.array(s)
                w = float(x[i, idx].sum()) - diag[i] - float(np.triu(x[np.ix_(idx, idx)], 1).sum())
                if w > eps_vio:
                    report.add(FacetInequality(i, s), w)
