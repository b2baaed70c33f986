"""Riemann curvature of the four connection variants, assembled from the
Koszul-form five-term formula, plus the cross-check relations between the
variants and the non-tensoriality defect of the non-metric variant."""

from __future__ import annotations

import numpy as np

from .fields import MetricField, ScalarField, VectorField, scale_field
from .frames import bracket_frame, directional, pair_jet2, pair_value
from .koszul import (ConnectionVariant, gram_of, koszul_jet1,
                     koszul_value_frames, levi_civita, lower_jets, ss_metric,
                     ss_non_metric, variant_frame)
from .linalg import DEFAULT_RANK_TOL, co_inner

EIG_GATE = 1e-6


def metric_eig_ratio(g: MetricField, p) -> float:
    """min |eigenvalue| / max |eigenvalue| of the Gram matrix at p
    (0 when the metric vanishes)."""
    fr = variant_frame(levi_civita(), g, p)
    lam = np.abs(np.linalg.eigvalsh(fr.metric.v))
    big = float(np.max(lam))
    return float(np.min(lam)) / big if big > 0.0 else 0.0


def riemann(v: ConnectionVariant, g: MetricField, X: VectorField,
            Y: VectorField, Z: VectorField, T: VectorField, p,
            rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """X(K(Y,Z,T)) - Y(K(X,Z,T)) - K([X,Y],Z,T)
    + <<lower(X,Z), lower(Y,T)>> - <<lower(Y,Z), lower(X,T)>>."""
    return riemann_with_scale(v, g, X, Y, Z, T, p, rank_tol)[0]


def riemann_with_scale(v: ConnectionVariant, g: MetricField, X: VectorField,
                       Y: VectorField, Z: VectorField, T: VectorField, p,
                       rank_tol: float = DEFAULT_RANK_TOL) -> tuple[float, float]:
    """Curvature value plus the magnitude of its largest of the five terms
    (the roundoff budget for tolerance scaling)."""
    from .linalg import co_inner_with_scale

    fr = variant_frame(v, g, p)
    xj, yj, zj, tj = fr.vec(X), fr.vec(Y), fr.vec(Z), fr.vec(T)
    gram = gram_of(fr, rank_tol)
    k_yzt = koszul_jet1(fr, v, yj, zj, tj)
    k_xzt = koszul_jet1(fr, v, xj, zj, tj)
    br = bracket_frame(xj, yj)
    k_br = koszul_value_frames(fr, v, br, zj, tj)
    w_xz, _ = lower_jets(fr, v, xj, zj)
    w_yt, _ = lower_jets(fr, v, yj, tj)
    w_yz, _ = lower_jets(fr, v, yj, zj)
    w_xt, _ = lower_jets(fr, v, xj, tj)
    t1 = float(xj.v @ k_yzt.grad)
    t2 = float(yj.v @ k_xzt.grad)
    t4, s4 = co_inner_with_scale(w_xz, w_yt, gram)
    t5, s5 = co_inner_with_scale(w_yz, w_xt, gram)
    value = t1 - t2 - k_br + t4 - t5
    scale = max(abs(t1), abs(t2), abs(k_br), s4, s5)
    return value, scale


def riemann_relation_ssm(g: MetricField, P: VectorField, X: VectorField,
                         Y: VectorField, Z: VectorField, T: VectorField, p,
                         rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """The semi-symmetric metric curvature assembled from the plain one:
    R(X,Y,Z,T) - g(Y,P)g(X,Z)g(P,T) + g(X,P)g(Y,Z)g(P,T)
    + Kbar(X,P,Z)g(Y,T) - Kbar(Y,P,Z)g(X,T)
    - K(X,P,T)g(Y,Z) + K(Y,P,T)g(X,Z)."""
    lc = levi_civita()
    bar = ss_metric(P)
    fr = variant_frame(lc, g, p)
    xj, yj, zj, tj, pj = fr.vec(X), fr.vec(Y), fr.vec(Z), fr.vec(T), fr.vec(P)
    G = fr.metric
    r = riemann(lc, g, X, Y, Z, T, p, rank_tol)
    return (r
            - pair_value(G, yj, pj) * pair_value(G, xj, zj) * pair_value(G, pj, tj)
            + pair_value(G, xj, pj) * pair_value(G, yj, zj) * pair_value(G, pj, tj)
            + koszul_value_frames(fr, bar, xj, pj, zj) * pair_value(G, yj, tj)
            - koszul_value_frames(fr, bar, yj, pj, zj) * pair_value(G, xj, tj)
            - koszul_value_frames(fr, lc, xj, pj, tj) * pair_value(G, yj, zj)
            + koszul_value_frames(fr, lc, yj, pj, tj) * pair_value(G, xj, zj))


def riemann_relation_ssnm(g: MetricField, P: VectorField, X: VectorField,
                          Y: VectorField, Z: VectorField, T: VectorField, p,
                          rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """R(X,Y,Z,T) + X(g(Z,P))g(Y,T) - Y(g(Z,P))g(X,T)
    - Khat(Y,Z,X)g(P,T) + Khat(X,Z,Y)g(P,T)."""
    lc = levi_civita()
    hat = ss_non_metric(P)
    fr = variant_frame(lc, g, p)
    xj, yj, zj, tj, pj = fr.vec(X), fr.vec(Y), fr.vec(Z), fr.vec(T), fr.vec(P)
    G = fr.metric
    zp = pair_jet2(G, zj, pj)
    r = riemann(lc, g, X, Y, Z, T, p, rank_tol)
    return (r
            + float(xj.v @ zp.gradient) * pair_value(G, yj, tj)
            - float(yj.v @ zp.gradient) * pair_value(G, xj, tj)
            - koszul_value_frames(fr, hat, yj, zj, xj) * pair_value(G, pj, tj)
            + koszul_value_frames(fr, hat, xj, zj, yj) * pair_value(G, pj, tj))


def nontensorial_defect(g: MetricField, P: VectorField, f: ScalarField,
                        X: VectorField, Y: VectorField, Z: VectorField,
                        T: VectorField, p,
                        rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Rhat(X,Y,fZ,T) - f(p) Rhat(X,Y,Z,T): the third-slot tensoriality
    defect of the non-metric variant."""
    hat = ss_non_metric(P)
    fz = scale_field(f, Z)
    fval = f.at(p)
    return (riemann(hat, g, X, Y, fz, T, p, rank_tol)
            - fval * riemann(hat, g, X, Y, Z, T, p, rank_tol))


def nontensorial_defect_rhs(g: MetricField, P: VectorField, f: ScalarField,
                            X: VectorField, Y: VectorField, Z: VectorField,
                            T: VectorField, p) -> float:
    """X(f)g(Z,P)g(Y,T) + X(f)g(Y,Z)g(P,T) - Y(f)g(Z,P)g(X,T)
    - Y(f)g(X,Z)g(P,T)."""
    fr = variant_frame(levi_civita(), g, p)
    xj, yj, zj, tj, pj = fr.vec(X), fr.vec(Y), fr.vec(Z), fr.vec(T), fr.vec(P)
    G = fr.metric
    fj = fr.scal(f)
    xf = float(xj.v @ fj.gradient)
    yf = float(yj.v @ fj.gradient)
    return (xf * pair_value(G, zj, pj) * pair_value(G, yj, tj)
            + xf * pair_value(G, yj, zj) * pair_value(G, pj, tj)
            - yf * pair_value(G, zj, pj) * pair_value(G, xj, tj)
            - yf * pair_value(G, xj, zj) * pair_value(G, pj, tj))
