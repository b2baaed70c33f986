"""Koszul form variants, lower covariant derivatives, covariant derivatives
of annihilator 1-forms, and radical-stationarity probes.

All four connection variants are evaluated directly from the metric-derivative
form of the trilinear bracket (plus variant correction terms), never through
connection coefficients, so every operation stays defined at points where the
metric degenerates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import DimensionMismatch, NotAnnihilator
from .fields import ChartDomain, CovectorField, CovectorValue, MetricField, VectorField
from .frames import (Jet1, MatJet, PointFrame, VecJet, bracket_frame,
                     flat_jet1, frame_at, lower_form, matvec_frame, pair_jet1,
                     pair_value, vec_frame, vec_pairing_jet1)
from .linalg import DEFAULT_RANK_TOL, GramSnapshot, co_inner, is_annihilator

LEVI_CIVITA = "levi_civita"
SS_METRIC = "ss_metric"
SS_NON_METRIC = "ss_non_metric"
ALMOST_PRODUCT = "almost_product"

_TAGS = (LEVI_CIVITA, SS_METRIC, SS_NON_METRIC, ALMOST_PRODUCT)


@dataclass(frozen=True)
class ProductStructure:
    """A metric-compatible involution J given as an expression grid.
    ``validate`` checks J^2 = id and g(JX, JY) = g(X, Y) at sample points."""

    chart: ChartDomain
    components: tuple[tuple[ex.Expr, ...], ...]

    def __post_init__(self):
        n = self.chart.dim
        if len(self.components) != n or any(len(r) != n for r in self.components):
            raise DimensionMismatch("structure grid must be dim x dim")

    def validate(self, g: MetricField, points, tol: float = 1e-10) -> None:
        for p in points:
            fr = frame_at(g, p, self)
            J = fr.structure.v
            scale = max(1.0, float(np.max(np.abs(J))))
            if np.max(np.abs(J @ J - np.eye(self.chart.dim))) > tol * scale ** 2:
                raise ValueError(f"structure is not an involution at {tuple(p)}")
            G = fr.metric.v
            gs = max(1.0, float(np.max(np.abs(G))))
            if np.max(np.abs(J.T @ G @ J - G)) > tol * gs * scale ** 2:
                raise ValueError(f"structure does not preserve the metric at {tuple(p)}")


def structure(chart_: ChartDomain, grid) -> ProductStructure:
    return ProductStructure(chart_, tuple(tuple(ex.as_expr(e) for e in row)
                                          for row in grid))


def constant_structure(chart_: ChartDomain, matrix) -> ProductStructure:
    return structure(chart_, [[ex.const(float(x)) for x in row] for row in matrix])


def structure_apply(J: ProductStructure, X: VectorField) -> VectorField:
    """Expression-level application (JX)^k = J^k_j X^j."""
    n = J.chart.dim
    comps = []
    for k in range(n):
        acc = None
        for j in range(n):
            term = ex.Expr("mul", (J.components[k][j], X.components[j]))
            acc = term if acc is None else ex.Expr("add", (acc, term))
        comps.append(acc)
    return VectorField(X.chart, tuple(comps))


@dataclass(frozen=True)
class ConnectionVariant:
    """Selector among the four connection flavours, carrying the auxiliary
    field P (semi-symmetric variants) or structure J (almost product)."""

    tag: str
    P: VectorField | None = None
    J: ProductStructure | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown connection tag {self.tag!r}")
        if self.tag in (SS_METRIC, SS_NON_METRIC) and self.P is None:
            raise ValueError(f"{self.tag} requires the auxiliary field P")
        if self.tag == ALMOST_PRODUCT and self.J is None:
            raise ValueError("almost_product requires a product structure J")


def levi_civita() -> ConnectionVariant:
    return ConnectionVariant(LEVI_CIVITA)


def ss_metric(P: VectorField) -> ConnectionVariant:
    return ConnectionVariant(SS_METRIC, P=P)


def ss_non_metric(P: VectorField) -> ConnectionVariant:
    return ConnectionVariant(SS_NON_METRIC, P=P)


def almost_product(J: ProductStructure) -> ConnectionVariant:
    return ConnectionVariant(ALMOST_PRODUCT, J=J)


# ---------------------------------------------------------------------------
# frame-level kernels (shared with the curvature module)


def variant_frame(v: ConnectionVariant, g: MetricField, p) -> PointFrame:
    return frame_at(g, p, v.J if v.tag == ALMOST_PRODUCT else None)


def lower_jets(fr: PointFrame, v: ConnectionVariant, XJ: VecJet, YJ: VecJet,
               order: int = 0):
    """Components (and optionally first partials) of the variant lower
    covariant derivative covector built from frames.  Every variant is
    function-linear in the third slot, so third-slot evaluations contract
    the result with slot components."""
    G = fr.metric
    if v.tag == ALMOST_PRODUCT:
        JY = matvec_frame(fr.structure, YJ)
        if order == 0:
            w0 = lower_form(G, XJ, YJ)
            w1 = lower_form(G, XJ, JY)
            return 0.5 * (w0 + w1 @ fr.structure.v), None
        w0, dw0 = lower_form(G, XJ, YJ, 1)
        w1, dw1 = lower_form(G, XJ, JY, 1)
        Jv, Jg = fr.structure.v, fr.structure.g
        w = 0.5 * (w0 + w1 @ Jv)
        dw = 0.5 * (dw0 + np.einsum("jm,jk->km", dw1, Jv)
                    + np.einsum("j,jkm->km", w1, Jg))
        return w, dw
    if order == 0:
        w = lower_form(G, XJ, YJ)
        dw = None
    else:
        w, dw = lower_form(G, XJ, YJ, 1)
    if v.tag == LEVI_CIVITA:
        return w, dw
    PJ = fr.vec(v.P)
    yp = pair_jet1(G, YJ, PJ)
    fx, dfx = flat_jet1(G, XJ)
    w = w + yp.value * fx
    if order:
        dw = dw + np.outer(fx, yp.grad) + yp.value * dfx
    if v.tag == SS_METRIC:
        xy = pair_jet1(G, XJ, YJ)
        fp, dfp = flat_jet1(G, PJ)
        w = w - xy.value * fp
        if order:
            dw = dw - np.outer(fp, xy.grad) - xy.value * dfp
    return w, dw


def koszul_jet1(fr: PointFrame, v: ConnectionVariant, XJ: VecJet, YJ: VecJet,
                ZJ: VecJet) -> Jet1:
    """First-order jet of the scalar q -> K_v(X, Y, Z)(q)."""
    w, dw = lower_jets(fr, v, XJ, YJ, order=1)
    return Jet1(float(w @ ZJ.v), dw.T @ ZJ.v + ZJ.g.T @ w)


def koszul_value_frames(fr: PointFrame, v: ConnectionVariant, XJ: VecJet,
                        YJ: VecJet, ZJ: VecJet) -> float:
    w, _ = lower_jets(fr, v, XJ, YJ)
    return float(w @ ZJ.v)


def gram_of(fr: PointFrame, rank_tol: float = DEFAULT_RANK_TOL) -> GramSnapshot:
    return GramSnapshot(np.array(fr.metric.v), rank_tol,
                        tuple(float(x) for x in fr.point))


# ---------------------------------------------------------------------------
# public operations


def koszul(g: MetricField, X: VectorField, Y: VectorField, Z: VectorField,
           p) -> float:
    """The metric trilinear bracket: half the cyclic derivative sum of the
    inner products plus the Lie-bracket pairings."""
    fr = frame_at(g, p)
    return koszul_value_frames(fr, levi_civita(), fr.vec(X), fr.vec(Y), fr.vec(Z))


def koszul_variant(v: ConnectionVariant, g: MetricField, X: VectorField,
                   Y: VectorField, Z: VectorField, p) -> float:
    fr = variant_frame(v, g, p)
    return koszul_value_frames(fr, v, fr.vec(X), fr.vec(Y), fr.vec(Z))


def koszul_with_scale(v: ConnectionVariant, g: MetricField, X: VectorField,
                      Y: VectorField, Z: VectorField, p) -> tuple[float, float]:
    """Value plus the unsigned-contraction magnitude (roundoff budget)."""
    fr = variant_frame(v, g, p)
    w, _ = lower_jets(fr, v, fr.vec(X), fr.vec(Y))
    zv = fr.vec(Z).v
    return float(w @ zv), float(np.abs(w) @ np.abs(zv))


def lower_cov_deriv(v: ConnectionVariant, g: MetricField, X: VectorField,
                    Y: VectorField, p) -> CovectorValue:
    fr = variant_frame(v, g, p)
    w, _ = lower_jets(fr, v, fr.vec(X), fr.vec(Y))
    return CovectorValue(tuple(float(x) for x in fr.point), w)


def cov_deriv_form(v: ConnectionVariant, g: MetricField, X: VectorField,
                   omega: CovectorField, Y: VectorField, p,
                   rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """(nabla_X omega)(Y) = X(omega(Y)) - <<lower(X, Y), omega>> at p."""
    fr = variant_frame(v, g, p)
    xj, yj = fr.vec(X), fr.vec(Y)
    wj = vec_frame(omega.components, fr.point)
    s = vec_pairing_jet1(wj, yj)
    w, _ = lower_jets(fr, v, xj, yj)
    return float(xj.v @ s.grad) - co_inner(w, wj.v, gram_of(fr, rank_tol))


def second_lower_deriv(v: ConnectionVariant, g: MetricField, X: VectorField,
                       Y: VectorField, Z: VectorField, T: VectorField, p,
                       rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """(nabla_X (lower(Y, Z)))(T): the third-slot derivative of the Koszul
    scalar along X minus the co-inner correction."""
    fr = variant_frame(v, g, p)
    xj, yj, zj, tj = fr.vec(X), fr.vec(Y), fr.vec(Z), fr.vec(T)
    kj = koszul_jet1(fr, v, yj, zj, tj)
    w_xt, _ = lower_jets(fr, v, xj, tj)
    w_yz, _ = lower_jets(fr, v, yj, zj)
    return float(xj.v @ kj.grad) - co_inner(w_xt, w_yz, gram_of(fr, rank_tol))


def kk_contraction(v: ConnectionVariant, g: MetricField, X: VectorField,
                   Y: VectorField, Z: VectorField, T: VectorField, p,
                   rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """<<lower(X, Y), lower(Z, T)>> at p."""
    return kk_with_scale(v, g, X, Y, Z, T, p, rank_tol)[0]


def kk_with_scale(v: ConnectionVariant, g: MetricField, X: VectorField,
                  Y: VectorField, Z: VectorField, T: VectorField, p,
                  rank_tol: float = DEFAULT_RANK_TOL) -> tuple[float, float]:
    from .linalg import co_inner_with_scale

    fr = variant_frame(v, g, p)
    w1, _ = lower_jets(fr, v, fr.vec(X), fr.vec(Y))
    w2, _ = lower_jets(fr, v, fr.vec(Z), fr.vec(T))
    return co_inner_with_scale(w1, w2, gram_of(fr, rank_tol))


@dataclass(frozen=True)
class RadicalStationarityReport:
    passed: bool
    points_checked: int
    degenerate_points: int
    failures: tuple[tuple[tuple[float, ...], int, int, float], ...]


def check_radical_stationary(g: MetricField, points, tol: float = DEFAULT_RANK_TOL,
                             ) -> RadicalStationarityReport:
    """For coordinate fields X = e_i, Y = e_j at each sample point, test that
    the plain lower covariant derivative annihilates the radical.  Failures
    are reported as data, one row per (point, i, j)."""
    n = g.chart.dim
    pts = [tuple(float(x) for x in p) for p in points]
    failures = []
    degenerate = 0
    for p in pts:
        fr = frame_at(g, p)
        gram = gram_of(fr, tol)
        lam, vecs = np.linalg.eigh(gram.matrix)
        big = float(np.max(np.abs(lam))) if lam.size else 0.0
        null = np.abs(lam) <= tol * big
        if not null.any():
            continue
        degenerate += 1
        rad = vecs[:, null]
        scale = 1.0 + float(np.max(np.abs(fr.metric.g)))
        for i in range(n):
            for j in range(n):
                ei = _coord_jet(n, i)
                ej = _coord_jet(n, j)
                w = lower_form(fr.metric, ei, ej)
                resid = float(np.max(np.abs(rad.T @ w))) if rad.size else 0.0
                if resid > tol * float(np.linalg.norm(w)) + 1e-12 * scale:
                    failures.append((tuple(float(x) for x in fr.point), i, j, resid))
    return RadicalStationarityReport(not failures, len(pts), degenerate,
                                     tuple(failures))


def _coord_jet(n: int, i: int) -> VecJet:
    v = np.zeros(n)
    v[i] = 1.0
    return VecJet(v, np.zeros((n, n)), np.zeros((n, n, n)))
