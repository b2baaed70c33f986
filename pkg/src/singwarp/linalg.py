"""Pointwise linear algebra of a possibly degenerate Gram matrix.

The co-inner product of radical-annihilator forms is realized as the
canonical inner product on the range of the Gram matrix: a symmetric
eigendecomposition with a relative eigenvalue cutoff, followed by the
minimum-norm solve.  On invertible matrices this is plain inversion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAnnihilator, SingularBaseMetric
from .fields import CovectorValue, MetricField, metric_at

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class GramSnapshot:
    matrix: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    point: tuple[float, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("Gram matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("Gram matrix must be symmetric")
        if self.rank_tol <= 0:
            raise ValueError("rank tolerance must be positive")
        object.__setattr__(self, "matrix", m)


def gram_at(g: MetricField, p, rank_tol: float = DEFAULT_RANK_TOL) -> GramSnapshot:
    return GramSnapshot(metric_at(g, p), rank_tol, tuple(float(x) for x in p))


def _eig(G: GramSnapshot):
    lam, vecs = np.linalg.eigh(G.matrix)
    big = float(np.max(np.abs(lam))) if lam.size else 0.0
    cutoff = G.rank_tol * big
    null = np.abs(lam) <= cutoff
    return lam, vecs, null


def radical_basis(G: GramSnapshot) -> list[np.ndarray]:
    """Orthonormal basis of the null space at the snapshot's rank cutoff."""
    lam, vecs, null = _eig(G)
    return [vecs[:, i].copy() for i in range(lam.size) if null[i]]


def is_annihilator(omega, G: GramSnapshot) -> bool:
    """True iff omega vanishes on the radical (within rank_tol slack);
    vacuously true when the matrix is invertible."""
    w = np.asarray(omega, dtype=float)
    lam, vecs, null = _eig(G)
    if not null.any():
        return True
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return True
    comps = vecs[:, null].T @ w
    return bool(np.all(np.abs(comps) <= G.rank_tol * nw))


def co_inner(omega, tau, G: GramSnapshot) -> float:
    """tau . x for the minimum-norm solution of G x = omega; symmetric in
    its form arguments.  Raises NotAnnihilator when either form has a
    radical component, since that is exactly the failure of the
    radical-stationarity hypothesis at this point."""
    return co_inner_with_scale(omega, tau, G)[0]


def co_inner_with_scale(omega, tau, G: GramSnapshot) -> tuple[float, float]:
    """co_inner plus the magnitude of its largest intermediate (the sum of
    unsigned eigen-contributions), used to budget roundoff in checks."""
    w = np.asarray(omega, dtype=float)
    t = np.asarray(tau, dtype=float)
    lam, vecs, null = _eig(G)
    if null.any():
        for name, v in (("first", w), ("second", t)):
            nv = np.linalg.norm(v)
            if nv == 0.0:
                continue
            comps = vecs[:, null].T @ v
            bad = np.max(np.abs(comps))
            if bad > G.rank_tol * nv:
                raise NotAnnihilator(
                    f"{name} form has a radical component (residual {bad:.3e})",
                    point=G.point, residual=float(bad))
    keep = ~null
    if not keep.any():
        return 0.0, 0.0
    wk = vecs[:, keep].T @ w
    tk = vecs[:, keep].T @ t
    contrib = wk * tk / lam[keep]
    return float(np.sum(contrib)), float(np.sum(np.abs(contrib)))


def cometric(gB: MetricField, alpha: CovectorValue, beta: CovectorValue,
             rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """alpha^T gB(p)^-1 beta on an invertible base metric."""
    if alpha.point != beta.point:
        raise ValueError("covector values taken at different points")
    m = metric_at(gB, alpha.point)
    lam = np.linalg.eigvalsh(m)
    big = float(np.max(np.abs(lam)))
    if big == 0.0 or float(np.min(np.abs(lam))) <= rank_tol * big:
        raise SingularBaseMetric(f"base metric singular at {alpha.point}")
    return float(alpha.components @ np.linalg.solve(m, beta.components))
