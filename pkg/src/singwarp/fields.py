"""Charts and expression-valued fields, plus the first-order geometric
primitives (flat map, Lie bracket, metric Lie derivative, base Hessian)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import DimensionMismatch, SingularBaseMetric
from .frames import (Jet1, bracket_frame, directional, frame_at, pair_jet2,
                     pair_value, vec_frame)
from .jets import eval_jet2

RANK_TOL = 1e-9


@dataclass(frozen=True)
class ChartDomain:
    """A coordinate box: dimension plus a closed sampling interval per axis."""

    dim: int
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        if len(self.bounds) != self.dim:
            raise DimensionMismatch("one bound pair per coordinate required")
        for lo, hi in self.bounds:
            if not lo <= hi:
                raise ValueError("empty bound interval")


def chart(dim: int, bounds) -> ChartDomain:
    return ChartDomain(dim, tuple((float(a), float(b)) for a, b in bounds))


@dataclass(frozen=True)
class ScalarField:
    chart: ChartDomain
    expr: ex.Expr

    def __post_init__(self):
        ex.check_well_formed(self.expr, self.chart.dim)

    def at(self, p) -> float:
        return eval_jet2(self.expr, p).value


@dataclass(frozen=True)
class VectorField:
    chart: ChartDomain
    components: tuple[ex.Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise DimensionMismatch("component count must match chart dimension")
        for c in self.components:
            ex.check_well_formed(c, self.chart.dim)

    def at(self, p) -> np.ndarray:
        return np.array([eval_jet2(c, p).value for c in self.components])


@dataclass(frozen=True)
class CovectorField:
    chart: ChartDomain
    components: tuple[ex.Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise DimensionMismatch("component count must match chart dimension")

    def at(self, p) -> "CovectorValue":
        vals = tuple(eval_jet2(c, p).value for c in self.components)
        return CovectorValue(tuple(float(x) for x in p), np.array(vals))


@dataclass(frozen=True)
class CovectorValue:
    point: tuple[float, ...]
    components: np.ndarray


@dataclass(frozen=True)
class MetricField:
    """Symmetric grid of expressions.  The constructor mirrors the upper
    triangle, so entries (i, j) and (j, i) are the same object."""

    chart: ChartDomain
    components: tuple[tuple[ex.Expr, ...], ...]

    def __post_init__(self):
        n = self.chart.dim
        if len(self.components) != n or any(len(r) != n for r in self.components):
            raise DimensionMismatch("metric grid must be dim x dim")
        for row in self.components:
            for e in row:
                ex.check_well_formed(e, n)


def metric(chart_: ChartDomain, grid) -> MetricField:
    n = chart_.dim
    cells = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            cells[i][j] = cells[j][i] = ex.as_expr(grid[i][j])
    return MetricField(chart_, tuple(tuple(r) for r in cells))


def diag_metric(chart_: ChartDomain, entries) -> MetricField:
    n = chart_.dim
    grid = [[ex.ZERO] * n for _ in range(n)]
    for i, e in enumerate(entries):
        grid[i][i] = ex.as_expr(e)
    return metric(chart_, grid)


def coordinate_field(chart_: ChartDomain, i: int) -> VectorField:
    comps = [ex.ZERO] * chart_.dim
    comps[i] = ex.ONE
    return VectorField(chart_, tuple(comps))


def zero_field(chart_: ChartDomain) -> VectorField:
    return VectorField(chart_, tuple([ex.ZERO] * chart_.dim))


def scale_field(f: ScalarField, X: VectorField) -> VectorField:
    _same_chart(f, X)
    return VectorField(X.chart, tuple(ex.Expr("mul", (f.expr, c))
                                      for c in X.components))


def add_fields(X: VectorField, Y: VectorField) -> VectorField:
    _same_chart(X, Y)
    return VectorField(X.chart, tuple(ex.Expr("add", (a, b))
                                      for a, b in zip(X.components, Y.components)))


def combine_fields(coeffs, fields_) -> VectorField:
    out = None
    for c, F in zip(coeffs, fields_):
        term = VectorField(F.chart, tuple(ex.const(float(c)) * comp
                                          for comp in F.components))
        out = term if out is None else add_fields(out, term)
    return out


def _same_chart(*objs) -> ChartDomain:
    ch = objs[0].chart
    for o in objs[1:]:
        if o.chart.dim != ch.dim:
            raise DimensionMismatch("fields live on charts of different dimension")
    return ch


# ---------------------------------------------------------------------------
# operations


def metric_at(g: MetricField, p) -> np.ndarray:
    """Pointwise Gram matrix; exactly symmetric because symmetric entries
    share one expression object."""
    return np.array(frame_at(g, p).metric.v)


def flat(g: MetricField, X: VectorField, p) -> CovectorValue:
    _same_chart(g, X)
    fr = frame_at(g, p)
    return CovectorValue(tuple(float(x) for x in fr.point),
                         fr.metric.v @ fr.vec(X).v)


def flat_field(g: MetricField, X: VectorField) -> CovectorField:
    """Expression-level lowering: component_i = sum_j g_ij X^j."""
    _same_chart(g, X)
    n = g.chart.dim
    comps = []
    for i in range(n):
        acc = None
        for j in range(n):
            term = ex.Expr("mul", (g.components[i][j], X.components[j]))
            acc = term if acc is None else ex.Expr("add", (acc, term))
        comps.append(acc)
    return CovectorField(g.chart, tuple(comps))


def lie_bracket(X: VectorField, Y: VectorField, p) -> np.ndarray:
    _same_chart(X, Y)
    pt = np.asarray(p, dtype=float)
    return bracket_frame(vec_frame(X.components, pt),
                         vec_frame(Y.components, pt)).v


def lie_derivative_metric(Y: VectorField, g: MetricField, Z: VectorField,
                          X: VectorField, p) -> float:
    """(L_Y g)(Z, X) = Y<Z,X> - <[Y,Z],X> - <Z,[Y,X]> at p."""
    _same_chart(Y, g, Z, X)
    fr = frame_at(g, p)
    yj, zj, xj = fr.vec(Y), fr.vec(Z), fr.vec(X)
    s = pair_jet2(fr.metric, zj, xj)
    byz = bracket_frame(yj, zj)
    byx = bracket_frame(yj, xj)
    return (float(yj.v @ s.gradient)
            - float(byz.v @ fr.metric.v @ xj.v)
            - float(zj.v @ fr.metric.v @ byx.v))


def inverse_metric_at(g: MetricField, p, rank_tol: float = RANK_TOL) -> np.ndarray:
    fr = frame_at(g, p)
    eig = np.linalg.eigvalsh(fr.metric.v)
    big = np.max(np.abs(eig))
    if big == 0.0 or np.min(np.abs(eig)) <= rank_tol * big:
        raise SingularBaseMetric(f"metric singular at {tuple(fr.point)}")
    return np.linalg.inv(fr.metric.v)


def hessian_scalar(gB: MetricField, f: ScalarField, X: VectorField,
                   T: VectorField, p, rank_tol: float = RANK_TOL) -> float:
    """Second covariant differential of f on a nondegenerate chart:
    H^f(X, T) = X(T(f)) - (nabla_X T)(f) with the metric connection of gB."""
    _same_chart(gB, f, X, T)
    from .frames import lower_form  # local import keeps module load light

    fr = frame_at(gB, p)
    ginv = inverse_metric_at(gB, p, rank_tol)
    xj, tj = fr.vec(X), fr.vec(T)
    fj = fr.scal(f)
    # T(f) as a first-order jet, then X of it.
    tf = directional(tj, fj)
    x_tf = float(xj.v @ tf.grad)
    nabla_xt = ginv @ lower_form(fr.metric, xj, tj)
    return x_tf - float(nabla_xt @ np.asarray(fj.gradient))
