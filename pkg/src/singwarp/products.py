"""Warped and multiply warped products: metric assembly, field lifting, and
the factor-wise evaluators that the product theorems equate with direct
computation on the assembled metric.

Slot origins are "base" or a 1-based fiber index.  Factor-wise dispatch keys
on the origin pattern of the slot tuple; patterns outside the printed clause
families raise UnsupportedCase.  Auxiliary-field placement comes from the
product spec, and the evaluator validates it against the clause family."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .curvature import riemann
from .errors import DimensionMismatch, SingularBaseMetric, UnsupportedCase
from .fields import (ChartDomain, CovectorValue, MetricField, ScalarField,
                     VectorField, chart, hessian_scalar, metric)
from .frames import directional, frame_at, matvec_frame, pair_jet2
from .jets import Jet2, eval_jet2
from .koszul import (ALMOST_PRODUCT, LEVI_CIVITA, SS_METRIC, SS_NON_METRIC,
                     ConnectionVariant, ProductStructure, almost_product,
                     koszul, koszul_variant, levi_civita, lower_cov_deriv,
                     kk_contraction, ss_metric, ss_non_metric, structure)
from .linalg import DEFAULT_RANK_TOL, cometric

BASE = "base"


@dataclass(frozen=True)
class FiberSpec:
    chart: ChartDomain
    metric: MetricField
    warp: ScalarField                       # lives on the base chart
    structure: ProductStructure | None = None


@dataclass(frozen=True)
class WarpedProductSpec:
    base_chart: ChartDomain
    base_metric: MetricField
    fibers: tuple[FiberSpec, ...]
    base_structure: ProductStructure | None = None
    p_on: object | None = None              # BASE or 1-based fiber index
    p_field: VectorField | None = None

    def __post_init__(self):
        if not self.fibers:
            raise ValueError("a warped product needs at least one fiber")
        structs = [self.base_structure] + [f.structure for f in self.fibers]
        if any(s is not None for s in structs) and not all(s is not None for s in structs):
            raise ValueError("either every factor carries a structure or none does")
        if (self.p_on is None) != (self.p_field is None):
            raise ValueError("p_on and p_field must be given together")
        if self.p_field is not None:
            want = self.factor_chart(self.p_on)
            if self.p_field.chart.dim != want.dim:
                raise DimensionMismatch("P must live on the factor it is placed on")

    @property
    def n_fibers(self) -> int:
        return len(self.fibers)

    def factor_chart(self, origin) -> ChartDomain:
        if origin == BASE:
            return self.base_chart
        return self.fibers[origin - 1].chart

    def block(self, origin) -> tuple[int, int]:
        """Coordinate slice [start, stop) of a factor inside the product."""
        off = self.base_chart.dim
        if origin == BASE:
            return 0, off
        for j, f in enumerate(self.fibers, start=1):
            if j == origin:
                return off, off + f.chart.dim
            off += f.chart.dim
        raise UnsupportedCase(f"no fiber {origin!r}")


def product_chart(spec: WarpedProductSpec) -> ChartDomain:
    bounds = list(spec.base_chart.bounds)
    for f in spec.fibers:
        bounds.extend(f.chart.bounds)
    return chart(len(bounds), bounds)


def assemble_product_metric(spec: WarpedProductSpec) -> MetricField:
    """Block-diagonal metric: base block verbatim, fiber block j scaled by
    the squared warp (expression-level products, coordinates shifted into
    the fiber block)."""
    ch = product_chart(spec)
    n = ch.dim
    grid = [[ex.ZERO] * n for _ in range(n)]
    nb = spec.base_chart.dim
    for i in range(nb):
        for j in range(i, nb):
            grid[i][j] = spec.base_metric.components[i][j]
    for fj, fib in enumerate(spec.fibers, start=1):
        lo, hi = spec.block(fj)
        w2 = ex.Expr("mul", (fib.warp.expr, fib.warp.expr))
        for a in range(fib.chart.dim):
            for b in range(a, fib.chart.dim):
                cell = ex.shift_coords(fib.metric.components[a][b], lo)
                grid[lo + a][lo + b] = ex.Expr("mul", (w2, cell))
    return metric(ch, grid)


def assemble_product_structure(spec: WarpedProductSpec) -> ProductStructure | None:
    if spec.base_structure is None:
        return None
    ch = product_chart(spec)
    n = ch.dim
    grid = [[ex.ZERO] * n for _ in range(n)]
    nb = spec.base_chart.dim
    for i in range(nb):
        for j in range(nb):
            grid[i][j] = spec.base_structure.components[i][j]
    for fj, fib in enumerate(spec.fibers, start=1):
        lo, _ = spec.block(fj)
        for a in range(fib.chart.dim):
            for b in range(fib.chart.dim):
                grid[lo + a][lo + b] = ex.shift_coords(
                    fib.structure.components[a][b], lo)
    return structure(ch, grid)


def lift_field(spec: WarpedProductSpec, origin, field: VectorField) -> VectorField:
    """Embed a factor field in the product chart: components land in the
    factor's coordinate block, zero elsewhere."""
    ch = product_chart(spec)
    want = spec.factor_chart(origin)
    if field.chart.dim != want.dim:
        raise DimensionMismatch("field does not live on the named factor")
    lo, hi = spec.block(origin)
    comps = [ex.ZERO] * ch.dim
    for k, c in enumerate(field.components):
        comps[lo + k] = ex.shift_coords(c, lo)
    return VectorField(ch, tuple(comps))


def lift_scalar(spec: WarpedProductSpec, f: ScalarField) -> ScalarField:
    """Base scalars keep their coordinates (base block comes first)."""
    return ScalarField(product_chart(spec), f.expr)


def project_point(spec: WarpedProductSpec, p, origin) -> tuple[float, ...]:
    lo, hi = spec.block(origin)
    pt = tuple(float(x) for x in p)
    return pt[lo:hi]


def lifted_p(spec: WarpedProductSpec) -> VectorField | None:
    if spec.p_field is None:
        return None
    return lift_field(spec, spec.p_on, spec.p_field)


def product_variant(spec: WarpedProductSpec, tag: str) -> ConnectionVariant:
    """The product-level connection selector matching the spec's P / J data
    (used for the direct route)."""
    if tag == LEVI_CIVITA:
        return levi_civita()
    if tag in (SS_METRIC, SS_NON_METRIC):
        P = lifted_p(spec)
        if P is None:
            raise UnsupportedCase(f"{tag} needs an auxiliary field on the product spec")
        return ConnectionVariant(tag, P=P)
    J = assemble_product_structure(spec)
    if J is None:
        raise UnsupportedCase("almost_product needs structures on every factor")
    return almost_product(J)


def _tag_of(v) -> str:
    return v.tag if isinstance(v, ConnectionVariant) else str(v)


# ---------------------------------------------------------------------------
# factor-level evaluation context


class ProductEval:
    """Factor-level quantities of one product spec at one product point."""

    def __init__(self, spec: WarpedProductSpec, p, rank_tol: float = DEFAULT_RANK_TOL):
        self.spec = spec
        self.rank_tol = rank_tol
        self.p = tuple(float(x) for x in p)
        self.pB = project_point(spec, p, BASE)
        self.pF = {j: project_point(spec, p, j)
                   for j in range(1, spec.n_fibers + 1)}
        self._warp: dict[int, Jet2] = {}

    # -- warps ---------------------------------------------------------
    def warp_jet(self, j: int) -> Jet2:
        w = self._warp.get(j)
        if w is None:
            w = eval_jet2(self.spec.fibers[j - 1].warp.expr, self.pB)
            self._warp[j] = w
        return w

    def fval(self, j: int) -> float:
        return self.warp_jet(j).value

    def df(self, j: int) -> CovectorValue:
        return CovectorValue(self.pB, np.array(self.warp_jet(j).gradient))

    def Xf(self, j: int, X: VectorField) -> float:
        fr = frame_at(self.spec.base_metric, self.pB)
        return float(fr.vec(X).v @ self.warp_jet(j).gradient)

    def J1Xf(self, j: int, X: VectorField) -> float:
        fr = frame_at(self.spec.base_metric, self.pB, self.spec.base_structure)
        jx = matvec_frame(fr.structure, fr.vec(X))
        return float(jx.v @ self.warp_jet(j).gradient)

    def hess_f(self, j: int, X: VectorField, T: VectorField) -> float:
        fib = self.spec.fibers[j - 1]
        return hessian_scalar(self.spec.base_metric, fib.warp, X, T, self.pB,
                              self.rank_tol)

    def df_J1(self, j: int) -> CovectorValue:
        fr = frame_at(self.spec.base_metric, self.pB, self.spec.base_structure)
        comps = fr.structure.v.T @ np.asarray(self.warp_jet(j).gradient)
        return CovectorValue(self.pB, comps)

    def cometric_df(self, i: int, j: int) -> float:
        return cometric(self.spec.base_metric, self.df(i), self.df(j),
                        self.rank_tol)

    def cometric_B(self, a: CovectorValue, b: CovectorValue) -> float:
        return cometric(self.spec.base_metric, a, b, self.rank_tol)

    # -- pairings ------------------------------------------------------
    def gB(self, X: VectorField, Y: VectorField) -> float:
        fr = frame_at(self.spec.base_metric, self.pB)
        return float(fr.vec(X).v @ fr.metric.v @ fr.vec(Y).v)

    def gF(self, j: int, V: VectorField, W: VectorField) -> float:
        fr = frame_at(self.spec.fibers[j - 1].metric, self.pF[j])
        return float(fr.vec(V).v @ fr.metric.v @ fr.vec(W).v)

    def gF_J(self, j: int, V: VectorField, W: VectorField) -> float:
        """g_F(V, J2 W) on fiber j."""
        fib = self.spec.fibers[j - 1]
        fr = frame_at(fib.metric, self.pF[j], fib.structure)
        jw = matvec_frame(fr.structure, fr.vec(W))
        return float(fr.vec(V).v @ fr.metric.v @ jw.v)

    def dgF_P(self, j: int, V: VectorField, W: VectorField) -> float:
        """V(g_F(W, P)) on fiber j, P being the spec's fiber field."""
        fr = frame_at(self.spec.fibers[j - 1].metric, self.pF[j])
        s = pair_jet2(fr.metric, fr.vec(W), fr.vec(self.spec.p_field))
        return float(fr.vec(V).v @ s.gradient)

    def dgB_PT(self, X: VectorField, T: VectorField) -> float:
        """X(g_B(P, T)) on the base, P being the spec's base field."""
        fr = frame_at(self.spec.base_metric, self.pB)
        s = pair_jet2(fr.metric, fr.vec(self.spec.p_field), fr.vec(T))
        return float(fr.vec(X).v @ s.gradient)

    def x_J1Tf(self, j: int, X: VectorField, T: VectorField) -> float:
        """X((J1 T)(f_j)) on the base."""
        fr = frame_at(self.spec.base_metric, self.pB, self.spec.base_structure)
        jt = matvec_frame(fr.structure, fr.vec(T))
        s = directional(jt, self.warp_jet(j))
        return float(fr.vec(X).v @ s.grad)

    # -- factor connections --------------------------------------------
    def base_variant(self, family: str) -> ConnectionVariant:
        if family.endswith("base"):
            tag = SS_METRIC if family.startswith(SS_METRIC) else SS_NON_METRIC
            return ConnectionVariant(tag, P=self.spec.p_field)
        if family == ALMOST_PRODUCT:
            return almost_product(self.spec.base_structure)
        return levi_civita()

    def koszul_B(self, v: ConnectionVariant, X, Y, Z) -> float:
        return koszul_variant(v, self.spec.base_metric, X, Y, Z, self.pB)

    def koszul_F(self, j: int, U, V, W) -> float:
        return koszul(self.spec.fibers[j - 1].metric, U, V, W, self.pF[j])

    def koszul_F_ap(self, j: int, U, V, W) -> float:
        fib = self.spec.fibers[j - 1]
        return koszul_variant(almost_product(fib.structure), fib.metric,
                              U, V, W, self.pF[j])

    def riemann_B(self, v: ConnectionVariant, X, Y, Z, T) -> float:
        self.require_base_nondegenerate()
        return riemann(v, self.spec.base_metric, X, Y, Z, T, self.pB,
                       self.rank_tol)

    def riemann_F(self, j: int, U, V, W, Q) -> float:
        return riemann(levi_civita(), self.spec.fibers[j - 1].metric,
                       U, V, W, Q, self.pF[j], self.rank_tol)

    def riemann_F_ap(self, j: int, U, V, W, Q) -> float:
        fib = self.spec.fibers[j - 1]
        return riemann(almost_product(fib.structure), fib.metric,
                       U, V, W, Q, self.pF[j], self.rank_tol)

    def lower_B(self, v: ConnectionVariant, X, Y) -> CovectorValue:
        return lower_cov_deriv(v, self.spec.base_metric, X, Y, self.pB)

    def kk_B(self, v: ConnectionVariant, X, Y, Z, T) -> float:
        return kk_contraction(v, self.spec.base_metric, X, Y, Z, T, self.pB,
                              self.rank_tol)

    def kk_F(self, j: int, X, Y, Z, T) -> float:
        return kk_contraction(levi_civita(), self.spec.fibers[j - 1].metric,
                              X, Y, Z, T, self.pF[j], self.rank_tol)

    def kk_F_ap(self, j: int, X, Y, Z, T) -> float:
        fib = self.spec.fibers[j - 1]
        return kk_contraction(almost_product(fib.structure), fib.metric,
                              X, Y, Z, T, self.pF[j], self.rank_tol)

    def J2_apply(self, j: int, V: VectorField) -> VectorField:
        from .koszul import structure_apply
        return structure_apply(self.spec.fibers[j - 1].structure, V)

    def nabla_B_f(self, X, Y, j: int) -> float:
        """(nabla^B_X Y)(f_j) on a nondegenerate base."""
        w = self.lower_B(levi_civita(), X, Y)
        return self.cometric_B(w, self.df(j))

    def require_base_nondegenerate(self) -> None:
        fr = frame_at(self.spec.base_metric, self.pB)
        lam = np.abs(np.linalg.eigvalsh(fr.metric.v))
        big = float(np.max(lam))
        if big == 0.0 or float(np.min(lam)) <= self.rank_tol * big:
            raise SingularBaseMetric(f"base metric singular at {self.pB}")


_EVAL_CACHE: OrderedDict = OrderedDict()
_EVAL_CACHE_MAX = 4096


def product_eval(spec: WarpedProductSpec, p,
                 rank_tol: float = DEFAULT_RANK_TOL) -> ProductEval:
    key = (id(spec), tuple(float(x) for x in p), rank_tol)
    hit = _EVAL_CACHE.get(key)
    if hit is not None:
        _EVAL_CACHE.move_to_end(key)
        return hit[1]
    ev = ProductEval(spec, p, rank_tol)
    _EVAL_CACHE[key] = (spec, ev)
    if len(_EVAL_CACHE) > _EVAL_CACHE_MAX:
        _EVAL_CACHE.popitem(last=False)
    return ev


# ---------------------------------------------------------------------------
# family resolution and slot handling


def _family(spec: WarpedProductSpec, tag: str) -> str:
    if tag == LEVI_CIVITA:
        return LEVI_CIVITA
    if tag in (SS_METRIC, SS_NON_METRIC):
        if spec.p_field is None:
            raise UnsupportedCase("semi-symmetric families need P on the product spec")
        if spec.n_fibers != 1:
            raise UnsupportedCase("semi-symmetric factor formulas cover a single fiber")
        side = "base" if spec.p_on == BASE else "fiber"
        return f"{tag}-{side}"
    if tag == ALMOST_PRODUCT:
        if spec.base_structure is None:
            raise UnsupportedCase("almost-product family needs structures on every factor")
        if spec.n_fibers != 1:
            raise UnsupportedCase("almost-product factor formulas cover a single fiber")
        return ALMOST_PRODUCT
    raise UnsupportedCase(f"unknown connection tag {tag!r}")


def _norm_slots(spec: WarpedProductSpec, slots):
    out = []
    for origin, field in slots:
        want = spec.factor_chart(origin)
        if field.chart.dim != want.dim:
            raise DimensionMismatch("slot field does not live on its origin factor")
        out.append((origin, field))
    return out


def _kinds(slots):
    return tuple(BASE if o == BASE else int(o) for o, _ in slots)


def _pattern(kinds) -> str:
    return "".join("b" if k == BASE else "f" for k in kinds)


# ---------------------------------------------------------------------------
# factor-wise Koszul forms


def factorwise_koszul(spec: WarpedProductSpec, v, slots, p,
                      rank_tol: float = DEFAULT_RANK_TOL) -> float:
    slots = _norm_slots(spec, slots)
    if len(slots) != 3:
        raise UnsupportedCase("Koszul forms take three slots")
    fam = _family(spec, _tag_of(v))
    ev = product_eval(spec, p, rank_tol)
    kinds = _kinds(slots)
    F = [f for _, f in slots]
    fibs = [k for k in kinds if k != BASE]
    nb = kinds.count(BASE)
    pat = _pattern(kinds)

    if fam == LEVI_CIVITA:
        if nb == 3:
            return ev.koszul_B(levi_civita(), *F)
        if nb == 2:
            return 0.0
        if nb == 1:
            if fibs[0] != fibs[1]:
                return 0.0
            j = fibs[0]
            bpos = pat.index("b")
            X = F[bpos]
            V, W = [f for k, f in zip(kinds, F) if k != BASE]
            val = ev.fval(j) * ev.gF(j, V, W) * ev.Xf(j, X)
            return -val if bpos == 2 else val
        if fibs[0] == fibs[1] == fibs[2]:
            j = fibs[0]
            return ev.fval(j) ** 2 * ev.koszul_F(j, *F)
        return 0.0

    # single-fiber families below
    j = 1
    f = ev.fval(j)
    if fam == f"{SS_METRIC}-base":
        table = {
            "bbb": lambda: ev.koszul_B(ev.base_variant(fam), *F),
            "bbf": lambda: 0.0, "bfb": lambda: 0.0, "fbb": lambda: 0.0,
            "bff": lambda: f * ev.gF(j, F[1], F[2]) * ev.Xf(j, F[0]),
            "fbf": lambda: (f * ev.gF(j, F[0], F[2]) * ev.Xf(j, F[1])
                            + f * f * ev.gB(F[1], spec.p_field) * ev.gF(j, F[0], F[2])),
            "ffb": lambda: -(f * ev.gF(j, F[0], F[1]) * ev.Xf(j, F[2])
                             + f * f * ev.gB(F[2], spec.p_field) * ev.gF(j, F[0], F[1])),
            "fff": lambda: f * f * ev.koszul_F(j, *F),
        }
    elif fam == f"{SS_METRIC}-fiber":
        P = spec.p_field
        table = {
            "bbb": lambda: ev.koszul_B(levi_civita(), *F),
            "bbf": lambda: -f * f * ev.gB(F[0], F[1]) * ev.gF(j, P, F[2]),
            "bfb": lambda: f * f * ev.gB(F[0], F[2]) * ev.gF(j, P, F[1]),
            "fbb": lambda: 0.0,
            "bff": lambda: f * ev.gF(j, F[1], F[2]) * ev.Xf(j, F[0]),
            "fbf": lambda: f * ev.gF(j, F[0], F[2]) * ev.Xf(j, F[1]),
            "ffb": lambda: -f * ev.gF(j, F[0], F[1]) * ev.Xf(j, F[2]),
            "fff": lambda: (f * f * ev.koszul_F(j, *F)
                            + f ** 4 * ev.gF(j, F[1], P) * ev.gF(j, F[0], F[2])
                            - f ** 4 * ev.gF(j, F[0], F[1]) * ev.gF(j, P, F[2])),
        }
    elif fam == f"{SS_NON_METRIC}-base":
        table = {
            "bbb": lambda: ev.koszul_B(ev.base_variant(fam), *F),
            "bbf": lambda: 0.0, "bfb": lambda: 0.0, "fbb": lambda: 0.0,
            "bff": lambda: f * ev.gF(j, F[1], F[2]) * ev.Xf(j, F[0]),
            "fbf": lambda: (f * ev.gF(j, F[0], F[2]) * ev.Xf(j, F[1])
                            + f * f * ev.gB(F[1], spec.p_field) * ev.gF(j, F[0], F[2])),
            "ffb": lambda: -f * ev.gF(j, F[0], F[1]) * ev.Xf(j, F[2]),
            "fff": lambda: f * f * ev.koszul_F(j, *F),
        }
    elif fam == f"{SS_NON_METRIC}-fiber":
        P = spec.p_field
        table = {
            "bbb": lambda: ev.koszul_B(levi_civita(), *F),
            "bbf": lambda: 0.0,
            "bfb": lambda: f * f * ev.gB(F[0], F[2]) * ev.gF(j, P, F[1]),
            "fbb": lambda: 0.0,
            "bff": lambda: f * ev.gF(j, F[1], F[2]) * ev.Xf(j, F[0]),
            "fbf": lambda: f * ev.gF(j, F[0], F[2]) * ev.Xf(j, F[1]),
            "ffb": lambda: -f * ev.gF(j, F[0], F[1]) * ev.Xf(j, F[2]),
            "fff": lambda: (f * f * ev.koszul_F(j, *F)
                            + f ** 4 * ev.gF(j, F[1], P) * ev.gF(j, F[0], F[2])),
        }
    elif fam == ALMOST_PRODUCT:
        def _mixed(V, X, W):
            return 0.5 * (f * ev.gF(j, V, W) * ev.Xf(j, X)
                          + f * ev.J1Xf(j, X) * ev.gF_J(j, V, W))
        table = {
            "bbb": lambda: ev.koszul_B(ev.base_variant(fam), *F),
            "bbf": lambda: 0.0, "bfb": lambda: 0.0, "fbb": lambda: 0.0,
            "bff": lambda: f * ev.gF(j, F[1], F[2]) * ev.Xf(j, F[0]),
            "fbf": lambda: _mixed(F[0], F[1], F[2]),
            "ffb": lambda: -_mixed(F[0], F[2], F[1]),
            "fff": lambda: f * f * ev.koszul_F_ap(j, *F),
        }
    else:
        raise UnsupportedCase(f"no Koszul clause family {fam!r}")

    fn = table.get(pat)
    if fn is None:
        raise UnsupportedCase(f"origin pattern {pat} not covered for family {fam}")
    return fn()


# ---------------------------------------------------------------------------
# factor-wise curvature


def factorwise_riemann(spec: WarpedProductSpec, v, slots, p,
                       rank_tol: float = DEFAULT_RANK_TOL) -> float:
    slots = _norm_slots(spec, slots)
    if len(slots) != 4:
        raise UnsupportedCase("curvature takes four slots")
    fam = _family(spec, _tag_of(v))
    ev = product_eval(spec, p, rank_tol)
    ev.require_base_nondegenerate()
    kinds = _kinds(slots)
    F = [f for _, f in slots]
    pat = _pattern(kinds)
    fibs = [k for k in kinds if k != BASE]

    if fam == LEVI_CIVITA:
        return _riemann_lc(spec, ev, kinds, F, pat, fibs)

    j = 1
    f = ev.fval(j)
    if fam == f"{SS_METRIC}-base":
        P = spec.p_field
        if pat == "bbbb":
            return ev.riemann_B(ev.base_variant(fam), *F)
        if pat in ("bbbf", "bfbb", "bbff", "ffbb", "ffbf", "bfff"):
            return 0.0
        if pat == "bffb":
            X, V, W, T = F
            return (-f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    + f * f * ev.gB(X, P) * ev.gF(j, V, W) * ev.gB(P, T)
                    - f * ev.Xf(j, P) * ev.gF(j, V, W) * ev.gB(X, T)
                    - f * f * ev.gB(P, P) * ev.gF(j, V, W) * ev.gB(X, T)
                    - f * f * ev.gF(j, V, W) * ev.koszul_B(levi_civita(), X, P, T))
        if pat == "ffff":
            U, V, W, Q = F
            coef = (f * f * ev.cometric_df(j, j) - 2 * f ** 3 * ev.Xf(j, P)
                    - f ** 4 * ev.gB(P, P))
            return (f * f * ev.riemann_F(j, U, V, W, Q)
                    + coef * (ev.gF(j, U, W) * ev.gF(j, V, Q)
                              - ev.gF(j, V, W) * ev.gF(j, U, Q)))
        raise UnsupportedCase(f"pattern {pat} not covered for {fam}")

    if fam == f"{SS_METRIC}-fiber":
        P = spec.p_field
        if pat == "bbbb":
            X, Y, Z, T = F
            return (ev.riemann_B(levi_civita(), X, Y, Z, T)
                    + f * f * ev.gB(X, Z) * ev.gF(j, P, P) * ev.gB(Y, T)
                    - f * f * ev.gB(Y, Z) * ev.gF(j, P, P) * ev.gB(X, T))
        if pat == "bbbf":
            X, Y, Z, Q = F
            return (-f * ev.Xf(j, X) * ev.gB(Y, Z) * ev.gF(j, P, Q)
                    + f * ev.Xf(j, Y) * ev.gB(X, Z) * ev.gF(j, P, Q))
        if pat == "bfbb":
            Z, Q, X, Y = F
            return -(-f * ev.Xf(j, X) * ev.gB(Y, Z) * ev.gF(j, P, Q)
                     + f * ev.Xf(j, Y) * ev.gB(X, Z) * ev.gF(j, P, Q))
        if pat in ("bbff", "ffbb"):
            return 0.0
        if pat == "bffb":
            X, V, W, T = F
            return (-f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    - (ev.koszul_F(j, V, P, W)
                       + f * f * ev.gF(j, P, P) * ev.gF(j, V, W)
                       - f * f * ev.gF(j, V, P) * ev.gF(j, P, W))
                    * f * f * ev.gB(X, T))
        if pat == "ffbf":
            U, V, Z, Q = F
            return f ** 3 * ev.Xf(j, Z) * (-ev.gF(j, P, U) * ev.gF(j, Q, V)
                                           + ev.gF(j, P, V) * ev.gF(j, Q, U))
        if pat == "bfff":
            Z, Q, U, V = F
            return -(f ** 3 * ev.Xf(j, Z) * (-ev.gF(j, P, U) * ev.gF(j, Q, V)
                                             + ev.gF(j, P, V) * ev.gF(j, Q, U)))
        if pat == "ffff":
            U, V, W, Q = F
            gf = lambda a, b: ev.gF(j, a, b)
            kf = lambda a, b, c: ev.koszul_F(j, a, b, c)
            return (f * f * ev.riemann_F(j, U, V, W, Q)
                    + f * f * ev.cometric_df(j, j)
                    * (gf(U, W) * gf(V, Q) - gf(V, W) * gf(U, Q))
                    - f ** 6 * gf(V, P) * gf(U, W) * gf(P, Q)
                    + f ** 6 * gf(U, P) * gf(V, W) * gf(P, Q)
                    + f ** 4 * kf(U, P, W) * gf(V, Q)
                    - f ** 4 * kf(V, P, W) * gf(U, Q)
                    - f ** 4 * kf(U, P, Q) * gf(V, W)
                    + f ** 4 * kf(V, P, Q) * gf(U, W)
                    + f ** 6 * gf(P, P) * gf(U, W) * gf(V, Q)
                    - f ** 6 * gf(U, P) * gf(P, W) * gf(V, Q)
                    - f ** 6 * gf(P, P) * gf(V, W) * gf(U, Q)
                    + f ** 6 * gf(V, P) * gf(P, W) * gf(U, Q))
        raise UnsupportedCase(f"pattern {pat} not covered for {fam}")

    if fam == f"{SS_NON_METRIC}-base":
        P = spec.p_field
        if pat == "bbbb":
            return ev.riemann_B(ev.base_variant(fam), *F)
        if pat in ("bbbf", "bfbb", "bbfb", "bbff", "ffbb", "ffbf", "bfff"):
            return 0.0
        if pat == "bffb":
            X, V, W, T = F
            return (-f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    + 2 * f * ev.Xf(j, X) * ev.gF(j, V, W) * ev.gB(P, T))
        if pat == "bfbf":
            X, V, T, W = F
            return (f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    + f * f * ev.gF(j, V, W) * ev.dgB_PT(X, T))
        if pat == "fffb":
            U, V, Q, Z = F
            return f * f * ev.gB(P, Z) * (ev.koszul_F(j, U, Q, V)
                                          - ev.koszul_F(j, V, Q, U))
        if pat == "ffff":
            U, V, W, Q = F
            return (f * f * ev.riemann_F(j, U, V, W, Q)
                    + f * f * ev.cometric_df(j, j)
                    * (ev.gF(j, U, W) * ev.gF(j, V, Q)
                       - ev.gF(j, V, W) * ev.gF(j, U, Q)))
        raise UnsupportedCase(f"pattern {pat} not covered for {fam}")

    if fam == f"{SS_NON_METRIC}-fiber":
        P = spec.p_field
        if pat == "bbbb":
            return ev.riemann_B(levi_civita(), *F)
        if pat == "bbbf":
            X, Y, Z, Q = F
            return f * f * ev.gF(j, P, Q) * (ev.koszul_B(levi_civita(), X, Z, Y)
                                             - ev.koszul_B(levi_civita(), Y, Z, X))
        if pat in ("bfbb", "bbfb", "bbff", "ffbb", "ffbf", "fffb"):
            return 0.0
        if pat == "bffb":
            X, V, W, T = F
            return (-f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    - f * f * ev.dgF_P(j, V, W) * ev.gB(X, T))
        if pat == "bfbf":
            X, V, T, W = F
            return f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
        if pat == "bfff":
            # Derived from the nested-derivative definition; the printed
            # single-product form does not satisfy the direct evaluation.
            Z, Q, U, V = F
            return (2.0 * f ** 3 * ev.Xf(j, Z)
                    * (ev.gF(j, U, P) * ev.gF(j, Q, V)
                       + ev.gF(j, V, P) * ev.gF(j, Q, U)))
        if pat == "ffff":
            U, V, W, Q = F
            gf = lambda a, b: ev.gF(j, a, b)
            return (f * f * ev.riemann_F(j, U, V, W, Q)
                    + f * f * ev.cometric_df(j, j)
                    * (gf(U, W) * gf(V, Q) - gf(V, W) * gf(U, Q))
                    + f ** 4 * gf(P, Q) * (ev.koszul_F(j, U, W, V)
                                           - ev.koszul_F(j, V, W, U))
                    + f ** 4 * ev.dgF_P(j, U, W) * gf(V, Q)
                    - f ** 4 * ev.dgF_P(j, V, W) * gf(U, Q))
        raise UnsupportedCase(f"pattern {pat} not covered for {fam}")

    if fam == ALMOST_PRODUCT:
        if pat == "bbbb":
            return ev.riemann_B(ev.base_variant(fam), *F)
        if pat in ("bbbf", "bfbb", "bbff", "ffbb", "bfff"):
            return 0.0
        if pat == "bffb":
            X, V, W, T = F
            lower = ev.lower_B(ev.base_variant(fam), X, T)
            return (-0.5 * f * ev.hess_f(j, X, T) * ev.gF(j, V, W)
                    - 0.5 * f * (ev.x_J1Tf(j, X, T)
                                 - ev.cometric_B(lower, ev.df_J1(j)))
                    * ev.gF_J(j, V, W))
        if pat == "ffbf":
            U, V, Z, Q = F
            kf = lambda a, b, c: ev.koszul_F(j, a, b, c)
            JU, JV, JQ = (ev.J2_apply(j, A) for A in (U, V, Q))
            return (0.25 * f * ev.Xf(j, Z)
                    * (-kf(V, Q, U) + kf(V, JQ, JU) + kf(U, Q, V) - kf(U, JQ, JV))
                    - 0.25 * f * ev.J1Xf(j, Z)
                    * (kf(V, JQ, U) - kf(V, Q, JU) - kf(U, JQ, V) + kf(U, Q, JV)))
        if pat == "ffff":
            U, V, W, Q = F
            gf = lambda a, b: ev.gF(j, a, b)
            gfj = lambda a, b: ev.gF_J(j, a, b)
            c00 = ev.cometric_df(j, j)
            c10 = ev.cometric_B(ev.df_J1(j), ev.df(j))
            c11 = ev.cometric_B(ev.df_J1(j), ev.df_J1(j))
            return (f * f * ev.riemann_F_ap(j, U, V, W, Q)
                    + 0.25 * f * f
                    * (c00 * (gf(U, W) * gf(V, Q) - gf(V, W) * gf(U, Q))
                       + c10 * (gfj(U, W) * gf(V, Q) + gf(U, W) * gfj(V, Q)
                                - gfj(V, W) * gf(U, Q) - gf(V, W) * gfj(U, Q))
                       + c11 * (gfj(U, W) * gfj(V, Q) - gfj(V, W) * gfj(U, Q))))
        raise UnsupportedCase(f"pattern {pat} not covered for {fam}")

    raise UnsupportedCase(f"no curvature clause family {fam!r}")


def _riemann_lc(spec, ev, kinds, F, pat, fibs):
    nb = pat.count("b")
    if pat == "bbbb":
        return ev.riemann_B(levi_civita(), *F)
    if nb == 3:
        if pat == "bbbf":
            return 0.0
        raise UnsupportedCase(f"pattern {pat} not covered for the plain family")
    if nb == 2:
        i, k = fibs
        if pat == "bbff":
            return 0.0
        if pat == "bffb":
            if i != k:
                return 0.0
            X, V, W, T = F
            return -ev.fval(i) * ev.hess_f(i, X, T) * ev.gF(i, V, W)
        raise UnsupportedCase(f"pattern {pat} not covered for the plain family")
    if nb == 1:
        if pat == "ffbf":
            i, k, a = fibs
            if i == k == a:
                return 0.0
            raise UnsupportedCase("mixed-fiber pattern ffbf only covered when equal")
        if pat == "bfff":
            i, k, a = fibs
            if len({i, k, a}) == 3 or (i != k and k == a) or (i == a != k):
                return 0.0
            raise UnsupportedCase(f"pattern bfff fibers {fibs} not covered")
        raise UnsupportedCase(f"pattern {pat} not covered for the plain family")
    i, k, a, b = fibs
    distinct = len({i, k, a, b})
    if distinct == 1:
        j = i
        U, V, W, Q = F
        return (ev.fval(j) ** 2 * ev.riemann_F(j, U, V, W, Q)
                + ev.fval(j) ** 2 * ev.cometric_df(j, j)
                * (ev.gF(j, U, W) * ev.gF(j, V, Q)
                   - ev.gF(j, V, W) * ev.gF(j, U, Q)))
    if distinct == 2:
        if i == a and k == b and i != k:
            U, V, W, Q = F
            return (ev.fval(i) * ev.fval(k) * ev.cometric_df(i, k)
                    * ev.gF(i, U, W) * ev.gF(k, V, Q))
        if (k == a == b and i != k) or (i == k and a == b and i != a):
            return 0.0
        if i == b and k == a and i != k:
            raise UnsupportedCase("crossed two-fiber pattern not covered")
        if i == a == b or i == k == a or i == k == b:
            raise UnsupportedCase(f"fiber pattern {fibs} not covered")
        raise UnsupportedCase(f"fiber pattern {fibs} not covered")
    if distinct == 3:
        if (i == k and len({i, a, b}) == 3) or (i == a and len({i, k, b}) == 3):
            return 0.0
        raise UnsupportedCase(f"fiber pattern {fibs} not covered")
    return 0.0


# ---------------------------------------------------------------------------
# factor-wise contraction formulas


def factorwise_kk(spec: WarpedProductSpec, v, pair1, pair2, p,
                  rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Product-formula value of <<lower(pair1), lower(pair2)>> from factor
    data; smooth across warp zeros by construction.  pair1/pair2 are
    ((origin, field), (origin, field))."""
    s1 = _norm_slots(spec, pair1)
    s2 = _norm_slots(spec, pair2)
    fam = _family(spec, _tag_of(v))
    ev = product_eval(spec, p, rank_tol)
    ev.require_base_nondegenerate()
    if fam == LEVI_CIVITA:
        val = _kk_lc(spec, ev, s1, s2)
        if val is None:
            val = _kk_lc(spec, ev, s2, s1)
        if val is None:
            raise UnsupportedCase("contraction pattern not covered for the plain family")
        return val
    if fam == ALMOST_PRODUCT:
        val = _kk_ap(spec, ev, s1, s2)
        if val is None:
            val = _kk_ap(spec, ev, s2, s1)
        if val is None:
            raise UnsupportedCase("contraction pattern not covered for the almost-product family")
        return val
    raise UnsupportedCase(f"no contraction clause family {fam!r}")


def _kk_lc(spec, ev, s1, s2):
    return _kk_lc_impl(spec, ev, _kinds(s1), [f for _, f in s1],
                       _kinds(s2), [f for _, f in s2])


def _kk_lc_impl(spec, ev, k1, F1, k2, F2):
    p1 = _pattern(k1)
    p2 = _pattern(k2)
    fib1 = [k for k in k1 if k != BASE]
    fib2 = [k for k in k2 if k != BASE]
    if p1 == "bb":
        if p2 == "bb":
            return ev.kk_B(levi_civita(), F1[0], F1[1], F2[0], F2[1])
        if p2 in ("fb", "bf"):
            return 0.0
        # p2 == "ff"
        if fib2[0] != fib2[1]:
            return 0.0
        j = fib2[0]
        return -ev.fval(j) * ev.nabla_B_f(F1[0], F1[1], j) * ev.gF(j, F2[0], F2[1])
    if p1 == "bf":
        j = fib1[0]
        if p2 == "bf":
            if fib2[0] != j:
                return 0.0
            return ev.Xf(j, F1[0]) * ev.Xf(j, F2[0]) * ev.gF(j, F2[1], F1[1])
        if p2 == "fb":
            if fib2[0] != j:
                return None
            return ev.Xf(j, F1[0]) * ev.Xf(j, F2[1]) * ev.gF(j, F2[0], F1[1])
        if p2 == "ff":
            i, k = fib2
            if i == k == j:
                return (ev.fval(j) * ev.Xf(j, F1[0])
                        * ev.koszul_F(j, F2[0], F2[1], F1[1]))
            if i == k != j or (j in (i, k) and i != k):
                return 0.0
            if len({i, k, j}) == 3:
                return 0.0
            return None
        return None
    if p1 == "ff":
        i, k = fib1
        if p2 != "ff":
            return None
        a, b = fib2
        if i == k == a == b:
            j = i
            return (ev.fval(j) ** 2 * ev.cometric_df(j, j)
                    * ev.gF(j, F1[0], F1[1]) * ev.gF(j, F2[0], F2[1])
                    + ev.fval(j) ** 2 * ev.kk_F(j, F1[0], F1[1], F2[0], F2[1]))
        if i == k and a == b and i != a:
            return (ev.fval(i) * ev.fval(a) * ev.cometric_df(i, a)
                    * ev.gF(i, F1[0], F1[1]) * ev.gF(a, F2[0], F2[1]))
        if i != k and a == b and a in (i, k):
            return 0.0
        if i != k and {a, b} == {i, k}:
            if (a, b) == (i, k):
                return 0.0
            return None
        if len({i, k, a, b}) >= 3:
            if (i == k and a != b) or (a == b and i != k) or len({i, k, a, b}) == 4:
                return 0.0
            return None
        return None
    return None


def _kk_ap(spec, ev, s1, s2):
    j = 1
    f = ev.fval(j)
    p1, p2 = _pattern(_kinds(s1)), _pattern(_kinds(s2))
    F1 = [f_ for _, f_ in s1]
    F2 = [f_ for _, f_ in s2]
    apb = ev.base_variant(ALMOST_PRODUCT)
    if p1 == "bb":
        if p2 == "bb":
            return ev.kk_B(apb, F1[0], F1[1], F2[0], F2[1])
        if p2 in ("fb", "bf"):
            return 0.0
        lower = ev.lower_B(apb, F1[0], F1[1])
        return (-0.5 * f * ev.cometric_B(lower, ev.df(j)) * ev.gF(j, F2[0], F2[1])
                - 0.5 * f * ev.cometric_B(lower, ev.df_J1(j))
                * ev.gF_J(j, F2[0], F2[1]))
    if p1 == "bf":
        if p2 == "bf":
            return ev.Xf(j, F1[0]) * ev.Xf(j, F2[0]) * ev.gF(j, F2[1], F1[1])
        if p2 == "fb":
            return (0.5 * ev.Xf(j, F1[0]) * ev.Xf(j, F2[1]) * ev.gF(j, F2[0], F1[1])
                    + 0.5 * ev.Xf(j, F1[0]) * ev.J1Xf(j, F2[1])
                    * ev.gF_J(j, F2[0], F1[1]))
        if p2 == "ff":
            return (f * ev.Xf(j, F1[0])
                    * ev.koszul_F_ap(j, F2[0], F2[1], F1[1]))
        return None
    if p1 == "fb":
        if p2 == "fb":
            xf = ev.Xf(j, F1[1])
            jxf = ev.J1Xf(j, F1[1])
            zf = ev.Xf(j, F2[1])
            jzf = ev.J1Xf(j, F2[1])
            return 0.25 * (xf * zf * ev.gF(j, F2[0], F1[0])
                           + xf * jzf * ev.gF_J(j, F2[0], F1[0])
                           + jxf * zf * ev.gF_J(j, F2[0], F1[0])
                           + jxf * jzf * ev.gF(j, F2[0], F1[0]))
        if p2 == "ff":
            return (0.5 * f * ev.Xf(j, F1[1])
                    * ev.koszul_F_ap(j, F2[0], F2[1], F1[0])
                    + 0.5 * f * ev.J1Xf(j, F1[1])
                    * ev.koszul_F_ap(j, F2[0], F2[1], ev.J2_apply(j, F1[0])))
        return None
    if p1 == "ff" and p2 == "ff":
        c00 = ev.cometric_df(j, j)
        c10 = ev.cometric_B(ev.df_J1(j), ev.df(j))
        c01 = ev.cometric_B(ev.df(j), ev.df_J1(j))
        c11 = ev.cometric_B(ev.df_J1(j), ev.df_J1(j))
        return (0.25 * f * f
                * (c00 * ev.gF(j, F1[0], F1[1]) * ev.gF(j, F2[0], F2[1])
                   + c10 * ev.gF_J(j, F1[0], F1[1]) * ev.gF(j, F2[0], F2[1])
                   + c01 * ev.gF(j, F1[0], F1[1]) * ev.gF_J(j, F2[0], F2[1])
                   + c11 * ev.gF_J(j, F1[0], F1[1]) * ev.gF_J(j, F2[0], F2[1]))
                + f * f * ev.kk_F_ap(j, F1[0], F1[1], F2[0], F2[1]))
    return None
