"""Numeric kernels: stacked jets of metric/field components at a point.

Everything geometric reduces to contractions of these arrays.  Index
conventions: a vector frame ``g[k, m]`` is the m-th partial of component k,
``h[k, m, l]`` the (m,l) second partial; a matrix frame adds one leading
pair of component indices.  The trilinear form kernel ``lower_form`` keeps
its own first-order jet so curvature terms can differentiate it once more
without a third derivative order ever being needed.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .jets import Jet2, eval_jet2

_es = np.einsum


@dataclass(frozen=True)
class VecJet:
    v: np.ndarray            # (n,)
    g: np.ndarray            # (n, n)
    h: np.ndarray | None     # (n, n, n) or None when only first order is needed


@dataclass(frozen=True)
class MatJet:
    v: np.ndarray            # (n, n)
    g: np.ndarray            # (n, n, n)
    h: np.ndarray            # (n, n, n, n)


@dataclass(frozen=True)
class Jet1:
    value: float
    grad: np.ndarray

    def __add__(self, o):
        return Jet1(self.value + o.value, self.grad + o.grad)

    def __sub__(self, o):
        return Jet1(self.value - o.value, self.grad - o.grad)

    def __mul__(self, o):
        return Jet1(self.value * o.value,
                    self.value * o.grad + o.value * self.grad)

    def scaled(self, c: float) -> "Jet1":
        return Jet1(c * self.value, c * self.grad)


def vec_frame(components, p: np.ndarray, order: int = 2,
              memo: dict | None = None) -> VecJet:
    jets = [eval_jet2(c, p, memo) for c in components]
    v = np.array([j.value for j in jets])
    g = np.array([j.gradient for j in jets])
    h = np.array([j.hessian for j in jets]) if order >= 2 else None
    return VecJet(v, g, h)


def mat_frame(grid, p: np.ndarray, memo: dict | None = None) -> MatJet:
    jets = [[eval_jet2(e, p, memo) for e in row] for row in grid]
    v = np.array([[j.value for j in row] for row in jets])
    g = np.array([[j.gradient for j in row] for row in jets])
    h = np.array([[j.hessian for j in row] for row in jets])
    return MatJet(v, g, h)


def jet1_of(j: Jet2) -> Jet1:
    return Jet1(j.value, np.asarray(j.gradient))


# ---------------------------------------------------------------------------
# contraction kernels


def pair_jet2(G: MatJet, A: VecJet, B: VecJet) -> Jet2:
    """Full second-order jet of the scalar q -> g_q(A, B)."""
    v = _es("ab,a,b->", G.v, A.v, B.v)
    g = (_es("abm,a,b->m", G.g, A.v, B.v)
         + _es("ab,am,b->m", G.v, A.g, B.v)
         + _es("ab,a,bm->m", G.v, A.v, B.g))
    t2 = _es("abm,al,b->ml", G.g, A.g, B.v)
    t3 = _es("abm,a,bl->ml", G.g, A.v, B.g)
    t5 = _es("ab,am,bl->ml", G.v, A.g, B.g)
    h = (_es("abml,a,b->ml", G.h, A.v, B.v)
         + t2 + t2.T + t3 + t3.T + t5 + t5.T
         + _es("ab,aml,b->ml", G.v, A.h, B.v)
         + _es("ab,a,bml->ml", G.v, A.v, B.h))
    return Jet2(float(v), g, h)


def pair_jet1(G: MatJet, A: VecJet, B: VecJet) -> Jet1:
    v = _es("ab,a,b->", G.v, A.v, B.v)
    g = (_es("abm,a,b->m", G.g, A.v, B.v)
         + _es("ab,am,b->m", G.v, A.g, B.v)
         + _es("ab,a,bm->m", G.v, A.v, B.g))
    return Jet1(float(v), g)


def pair_value(G: MatJet, A: VecJet, B: VecJet) -> float:
    return float(A.v @ G.v @ B.v)


def bracket_frame(A: VecJet, B: VecJet, order: int = 1) -> VecJet:
    """Lie bracket [A, B]; first-order output needs second-order inputs."""
    v = B.g @ A.v - A.g @ B.v
    g = (_es("jm,kj->km", A.g, B.g) + _es("j,kjm->km", A.v, B.h)
         - _es("jm,kj->km", B.g, A.g) - _es("j,kjm->km", B.v, A.h))
    return VecJet(v, g, None)


def matvec_frame(J: MatJet, Y: VecJet) -> VecJet:
    """Pointwise endomorphism application (JY)^k = J^k_j Y^j."""
    v = J.v @ Y.v
    g = _es("kjm,j->km", J.g, Y.v) + _es("kj,jm->km", J.v, Y.g)
    h = None
    if Y.h is not None:
        t = _es("kjm,jl->kml", J.g, Y.g)
        h = (_es("kjml,j->kml", J.h, Y.v) + t + t.transpose(0, 2, 1)
             + _es("kj,jml->kml", J.v, Y.h))
    return VecJet(v, g, h)


def flat_jet1(G: MatJet, X: VecJet) -> tuple[np.ndarray, np.ndarray]:
    """(g X)_k and its first partials."""
    w = G.v @ X.v
    dw = _es("kam,a->km", G.g, X.v) + _es("ka,am->km", G.v, X.g)
    return w, dw


def directional(X: VecJet, s: Jet2) -> Jet1:
    """First-order jet of the scalar q -> X_q(s), s given to second order."""
    return Jet1(float(X.v @ s.gradient),
                X.g.T @ s.gradient + np.asarray(s.hessian) @ X.v)


def vec_pairing_jet1(W: VecJet, Y: VecJet) -> Jet1:
    """First-order jet of a componentwise pairing w_k Y^k (covector frames
    share the VecJet layout)."""
    return Jet1(float(W.v @ Y.v), W.g.T @ Y.v + Y.g.T @ W.v)


def lower_form(G: MatJet, X: VecJet, Y: VecJet, order: int = 0):
    """Coordinate components of the trilinear form with the first two slots
    filled: omega_k = half the cyclic metric-derivative sum for (X, Y, e_k).
    The form is function-linear in its third slot, so every third-slot
    evaluation contracts omega with the slot components.

    order=0 returns omega (n,), order=1 returns (omega, d_omega) with
    d_omega[k, m] = partial_m omega_k (needs second-order input frames).
    """
    a1 = _es("i,aki,a->k", X.v, G.g, Y.v)
    a2 = _es("i,ak,ai->k", X.v, G.v, Y.g)
    a3 = _es("i,kai,a->k", Y.v, G.g, X.v)
    a4 = _es("i,ka,ai->k", Y.v, G.v, X.g)
    a5 = _es("abk,a,b->k", G.g, X.v, Y.v)
    w = Y.g @ X.v - X.g @ Y.v
    a6 = G.v @ w
    omega = 0.5 * (a1 + a2 + a3 + a4 - a5 + a6)
    if order == 0:
        return omega
    br = bracket_frame(X, Y)
    d1 = (_es("im,aki,a->km", X.g, G.g, Y.v)
          + _es("i,akim,a->km", X.v, G.h, Y.v)
          + _es("i,aki,am->km", X.v, G.g, Y.g))
    d2 = (_es("im,ak,ai->km", X.g, G.v, Y.g)
          + _es("i,akm,ai->km", X.v, G.g, Y.g)
          + _es("i,ak,aim->km", X.v, G.v, Y.h))
    d3 = (_es("im,kai,a->km", Y.g, G.g, X.v)
          + _es("i,kaim,a->km", Y.v, G.h, X.v)
          + _es("i,kai,am->km", Y.v, G.g, X.g))
    d4 = (_es("im,ka,ai->km", Y.g, G.v, X.g)
          + _es("i,kam,ai->km", Y.v, G.g, X.g)
          + _es("i,ka,aim->km", Y.v, G.v, X.h))
    d5 = (_es("abkm,a,b->km", G.h, X.v, Y.v)
          + _es("abk,am,b->km", G.g, X.g, Y.v)
          + _es("abk,a,bm->km", G.g, X.v, Y.g))
    d6 = _es("kjm,j->km", G.g, br.v) + _es("kj,jm->km", G.v, br.g)
    return omega, 0.5 * (d1 + d2 + d3 + d4 - d5 + d6)


# ---------------------------------------------------------------------------
# per-point frame cache


class PointFrame:
    """Jets of one metric (plus optional endomorphism grid) and of any
    fields evaluated against it, all at a single chart point."""

    def __init__(self, metric_grid, point, structure_grid=None):
        self.point = np.asarray(point, dtype=float)
        self.n = self.point.shape[0]
        self._memo: dict = {}
        self.metric = mat_frame(metric_grid, self.point, self._memo)
        self.structure = (mat_frame(structure_grid, self.point, self._memo)
                          if structure_grid is not None else None)
        self._fields: dict[int, tuple[object, VecJet]] = {}
        self._scalars: dict[int, tuple[object, Jet2]] = {}

    def vec(self, field) -> VecJet:
        key = id(field)
        hit = self._fields.get(key)
        if hit is None:
            hit = (field, vec_frame(field.components, self.point, 2, self._memo))
            self._fields[key] = hit
        return hit[1]

    def scal(self, field) -> Jet2:
        key = id(field)
        hit = self._scalars.get(key)
        if hit is None:
            hit = (field, eval_jet2(field.expr, self.point, self._memo))
            self._scalars[key] = hit
        return hit[1]


_FRAME_CACHE: OrderedDict = OrderedDict()
_FRAME_CACHE_MAX = 8192


def frame_at(metric, point, structure=None) -> PointFrame:
    """Cached PointFrame for (metric object, point, structure object).
    Keys hold strong references, so object ids stay valid while cached."""
    key = (id(metric), id(structure), tuple(float(x) for x in point))
    hit = _FRAME_CACHE.get(key)
    if hit is not None:
        _FRAME_CACHE.move_to_end(key)
        return hit[2]
    fr = PointFrame(metric.components,
                    point,
                    None if structure is None else structure.components)
    _FRAME_CACHE[key] = (metric, structure, fr)
    if len(_FRAME_CACHE) > _FRAME_CACHE_MAX:
        _FRAME_CACHE.popitem(last=False)
    return fr
