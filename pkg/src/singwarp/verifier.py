"""Suite engine: seeded sampling, clause evaluation with scaled tolerances,
continuity probes, and structured JSON-able reports."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import Catalog, Fixture
from .curvature import metric_eig_ratio
from .errors import (DomainError, NotAnnihilator, SingularBaseMetric,
                     SingwarpError, UnknownClause, UnsupportedCase)
from .sampling import sample_points, stream

EIG_GATE = 1e-6
WARP_GATE = 1e-3


@dataclass(frozen=True)
class Sampling:
    seed: int = 42
    n_points: int = 64
    n_field_draws: int = 8


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-7
    abs: float = 1e-10
    rel_curvature: float = 1e-6


@dataclass(frozen=True)
class TheoremSuite:
    sid: str
    fixture_ids: tuple[str, ...]
    clause_ids: tuple[str, ...]
    sampling: Sampling = Sampling()
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        from .clauses import REGISTRY
        for cid in self.clause_ids:
            if cid not in REGISTRY:
                raise UnknownClause(f"clause {cid!r} is not registered")


@dataclass
class Res:
    """One evaluated identity instance: two routes plus the magnitudes of
    whatever intermediates bound the roundoff budget."""

    lhs: float
    rhs: float
    extras: tuple = ()

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def scale(self) -> float:
        mags = [1.0, abs(self.lhs), abs(self.rhs)] + [abs(x) for x in self.extras]
        return float(max(mags))


@dataclass
class Witness:
    found: bool
    magnitude: float = 0.0


@dataclass
class ClauseStats:
    cid: str
    kind: str = "universal"
    samples: int = 0
    passes: int = 0
    fails: int = 0
    excluded: int = 0
    max_rel_residual: float = 0.0
    worst_point: tuple | None = None
    route_counts: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def record(self, ok: bool, rel: float, where):
        self.samples += 1
        if ok:
            self.passes += 1
        else:
            self.fails += 1
        if rel > self.max_rel_residual:
            self.max_rel_residual = rel
            self.worst_point = where

    def route(self, name: str):
        self.route_counts[name] = self.route_counts.get(name, 0) + 1

    @property
    def ok(self) -> bool:
        if self.kind == "existence":
            return self.passes > 0
        return self.fails == 0 and not self.errors

    def as_dict(self) -> dict:
        return {
            "id": self.cid, "kind": self.kind, "samples": self.samples,
            "passes": self.passes, "fails": self.fails,
            "excluded": self.excluded,
            "max_rel_residual": self.max_rel_residual,
            "worst_point": self.worst_point,
            "route_counts": self.route_counts,
            "errors": self.errors[:32],
            "ok": self.ok,
        }


@dataclass
class CheckReport:
    suite: str
    seed: int
    clauses: list
    meta: dict

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.clauses)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed,
                "clauses": [c.as_dict() for c in self.clauses],
                "meta": self.meta}


def _tol_for(level: str, tol: Tolerances) -> float:
    return tol.rel_curvature if level == "curvature" else tol.rel


def run_suite(suite: TheoremSuite, catalog: Catalog) -> CheckReport:
    """Evaluate every clause of the suite at every sampled point of every
    fixture, deterministically in (seed, suite, catalog)."""
    from .clauses import REGISTRY

    t0 = time.monotonic()
    stats = {cid: ClauseStats(cid, REGISTRY[cid].kind) for cid in suite.clause_ids}
    for fid in suite.fixture_ids:
        fix = catalog.get(fid)
        _run_fixture(suite, fix, stats)
    meta = {"wall_time_s": round(time.monotonic() - t0, 3),
            "points": suite.sampling.n_points,
            "field_draws": suite.sampling.n_field_draws,
            "fixtures": list(suite.fixture_ids)}
    return CheckReport(suite.sid, suite.sampling.seed,
                       [stats[cid] for cid in suite.clause_ids], meta)


def _run_fixture(suite: TheoremSuite, fix: Fixture, stats):
    from .clauses import REGISTRY, IdentityCtx, ProductCtx

    sp = suite.sampling
    rng = stream(sp.seed, suite.sid, fix.fid)
    clauses = [REGISTRY[cid] for cid in suite.clause_ids]

    special = [c for c in clauses if c.ctx == "special"]
    for cl in special:
        st = stats[cl.cid]
        if cl.applies is not None and not cl.applies(fix):
            continue
        try:
            out = cl.run(fix, suite, rng)
        except SingwarpError as err:
            st.errors.append({"point": None, "error": type(err).__name__,
                              "detail": str(err)})
            continue
        _record(st, out, fix, None, suite.tolerances, cl.level)

    sampled = [c for c in clauses if c.ctx in ("identity", "product")]
    if not sampled:
        return
    points = sample_points(fix.chart, sp.n_points, rng)
    degenerate = fix.degenerate_points(rng) if any(c.degenerate for c in sampled) else []
    ratios = {p: metric_eig_ratio(fix.metric, p) for p in points}

    for draw_ix in range(sp.n_field_draws):
        ident_ctx = prod_ctx = None
        need_ident = any(c.ctx == "identity" for c in sampled)
        need_prod = any(c.ctx == "product" for c in sampled)
        if need_ident:
            ident_ctx = IdentityCtx.draw(fix, rng)
        if need_prod:
            prod_ctx = ProductCtx.draw(fix, rng)
        for cl in sampled:
            st = stats[cl.cid]
            if cl.applies is not None and not cl.applies(fix):
                continue
            if cl.degenerate is True:
                pts = degenerate
            elif cl.degenerate == "both":
                pts = points + degenerate
            else:
                pts = points
            for p in pts:
                if cl.gate == "eig":
                    ratio = ratios.get(p)
                    if ratio is None:
                        ratio = metric_eig_ratio(fix.metric, p)
                    if ratio <= EIG_GATE:
                        st.excluded += 1
                        st.route("skipped-near-singular")
                        continue
                ctx = ident_ctx if cl.ctx == "identity" else prod_ctx
                try:
                    out = ctx.run_clause(cl, p)
                except (NotAnnihilator, SingularBaseMetric, DomainError,
                        UnsupportedCase) as err:
                    st.errors.append({"point": list(p),
                                      "error": type(err).__name__,
                                      "detail": str(err)})
                    continue
                if out is None:
                    st.excluded += 1
                    st.route("unsampleable")
                    continue
                st.route("direct+factorwise" if cl.ctx == "product" else "direct")
                _record(st, out, fix, p, suite.tolerances, cl.level)


def _record(st: ClauseStats, out, fix: Fixture, p, tol: Tolerances, level: str):
    if out is None:
        st.excluded += 1
        return
    if isinstance(out, Witness):
        st.record(out.found, 0.0, (fix.fid, p))
        return
    items = out if isinstance(out, (list, tuple)) else [out]
    rel_tol = _tol_for(level, tol)
    worst_rel = 0.0
    ok = True
    for r in items:
        rel = r.residual / r.scale
        if r.residual > tol.abs + rel_tol * r.scale:
            ok = False
        worst_rel = max(worst_rel, rel)
    st.record(ok, worst_rel, (fix.fid, None if p is None else list(p)))


# ---------------------------------------------------------------------------
# continuity probes


@dataclass(frozen=True)
class PathSpec:
    start: tuple
    end: tuple


@dataclass
class ProbeReport:
    quantity: str
    fixture: str
    levels: list           # [{steps, max_dd}]
    ratios: list
    flagged: bool

    def as_dict(self) -> dict:
        return {"quantity": self.quantity, "fixture": self.fixture,
                "levels": self.levels, "ratios": self.ratios,
                "flagged": self.flagged}


DIVERGENCE_RATIO = 10.0


def continuity_probe(quantity_id: str, fix: Fixture, path: PathSpec,
                     n_steps: int = 16, refinements: int = 3) -> ProbeReport:
    """Sample a registered quantity along a straight chart path at several
    refinement levels; flag divergence when the max first divided difference
    grows more than tenfold between consecutive levels."""
    from .clauses import QUANTITIES
    try:
        fn = QUANTITIES[quantity_id]
    except KeyError:
        raise UnknownClause(f"no continuity quantity {quantity_id!r}") from None
    a = np.asarray(path.start, dtype=float)
    b = np.asarray(path.end, dtype=float)
    levels = []
    for lvl in range(refinements):
        steps = n_steps * (2 ** lvl)
        ss = np.linspace(0.0, 1.0, steps + 1)
        vals = np.array([fn(fix, tuple(a + s * (b - a))) for s in ss])
        h = 1.0 / steps
        dd = float(np.max(np.abs(np.diff(vals)))) / h
        levels.append({"steps": steps, "max_dd": dd})
    ratios = []
    flagged = False
    for k in range(1, len(levels)):
        prev = levels[k - 1]["max_dd"]
        cur = levels[k]["max_dd"]
        ratio = cur / prev if prev > 1e-300 else (0.0 if cur <= 1e-300 else float("inf"))
        ratios.append(ratio)
        if ratio > DIVERGENCE_RATIO:
            flagged = True
    return ProbeReport(quantity_id, fix.fid, levels, ratios, flagged)
