"""The shipped fixture catalog.

A Fixture bundles everything a run needs: the manifold-level chart, metric
and optional structure (assembled for products), named factor-level fields,
and the product spec where there is one."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import UnknownFixture
from .fields import ChartDomain, MetricField, ScalarField, VectorField
from .koszul import ProductStructure
from .manifold_io import (ManifoldData, ProductData, load_document,
                          parse_manifold, parse_product)
from .products import (BASE, WarpedProductSpec, assemble_product_metric,
                       assemble_product_structure, lift_field, lifted_p,
                       product_chart)

FIXTURE_IDS = ("fix-a", "fix-b", "fix-c", "fix-d", "fix-e", "fix-f", "fix-g",
               "fix-h", "fix-m", "fix-n", "fix-ap")


@dataclass(frozen=True)
class Fixture:
    fid: str
    chart: ChartDomain
    metric: MetricField
    structure: ProductStructure | None
    fields: dict                      # name -> (origin | None, factor field)
    scalars: dict                     # name -> (origin | None, scalar field)
    spec: WarpedProductSpec | None = None
    product: ProductData | None = None

    @property
    def is_product(self) -> bool:
        return self.spec is not None

    def named(self, name: str):
        try:
            return self.fields[name]
        except KeyError:
            raise UnknownFixture(f"fixture {self.fid} has no field {name!r}") from None

    def lifted(self, name: str) -> VectorField:
        origin, field = self.named(name)
        if origin is None:
            return field
        return lift_field(self.spec, origin, field)

    def degenerate_points(self, rng, count: int = 8):
        """Sample points on the warp-zero locus (products whose warps vanish
        in the box) or where the metric determinant vanishes (fix-n style
        fixtures with a coordinate degeneracy at 0)."""
        pts = []
        lo = [b[0] for b in self.chart.bounds]
        hi = [b[1] for b in self.chart.bounds]
        for _ in range(count):
            p = [rng.uniform(a, b) for a, b in zip(lo, hi)]
            p[0] = 0.0
            pts.append(tuple(p))
        return pts


def _catalog_dir() -> Path:
    return Path(__file__).resolve().parent / "catalog"


def _resolve_ref(ref: str, search_dirs):
    for d in search_dirs:
        cand = Path(d) / f"{ref}.json"
        if cand.exists():
            return parse_manifold(load_document(cand))
        cand = Path(d) / ref
        if cand.exists():
            return parse_manifold(load_document(cand))
    if Path(ref).exists():
        return parse_manifold(load_document(ref))
    raise UnknownFixture(f"cannot resolve manifold ref {ref!r}")


def load_fixture(fid_or_path: str, search_dirs=None) -> Fixture:
    dirs = list(search_dirs or []) + [_catalog_dir()]
    path = None
    for d in dirs:
        cand = Path(d) / f"{fid_or_path}.json"
        if cand.exists():
            path = cand
            break
    if path is None and Path(fid_or_path).exists():
        path = Path(fid_or_path)
    if path is None:
        raise UnknownFixture(f"unknown fixture {fid_or_path!r}")
    doc = load_document(path)
    fid = Path(fid_or_path).stem
    if "base" in doc:
        prod = parse_product(doc, lambda ref: _resolve_ref(ref, dirs))
        spec = prod.spec
        fields = {}
        scalars = {}
        for origin in [BASE] + list(range(1, spec.n_fibers + 1)):
            fd = prod.factor(origin)
            for name, f in fd.fields.items():
                fields.setdefault(name, (origin, f))
            for name, s in fd.scalars.items():
                scalars.setdefault(name, (origin, s))
        return Fixture(fid, product_chart(spec), assemble_product_metric(spec),
                       assemble_product_structure(spec), fields, scalars,
                       spec=spec, product=prod)
    data = parse_manifold(doc)
    return Fixture(fid, data.chart, data.metric, data.structure,
                   {k: (None, v) for k, v in data.fields.items()},
                   {k: (None, v) for k, v in data.scalars.items()})


class Catalog:
    """Lazy fixture registry with optional extra search directories."""

    def __init__(self, search_dirs=None):
        self.search_dirs = list(search_dirs or [])
        self._cache: dict[str, Fixture] = {}

    def get(self, fid: str) -> Fixture:
        fx = self._cache.get(fid)
        if fx is None:
            fx = load_fixture(fid, self.search_dirs)
            self._cache[fid] = fx
        return fx

    def __getitem__(self, fid: str) -> Fixture:
        return self.get(fid)


def default_catalog() -> Catalog:
    return Catalog()
