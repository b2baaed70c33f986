"""JSON manifold files.

Single-chart files carry {dim, bounds, metric, fields, scalars, structure?};
product files carry {base: ref, fibers: [{ref, warp, structure?}], p?: {on,
field}}.  A ref is a catalog id or a path to another manifold file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import expr as ex
from .errors import UnknownFixture
from .fields import ChartDomain, MetricField, ScalarField, VectorField, chart, metric
from .koszul import ProductStructure, structure
from .products import BASE, FiberSpec, WarpedProductSpec


@dataclass(frozen=True)
class ManifoldData:
    """Parsed single-chart file."""

    chart: ChartDomain
    metric: MetricField
    fields: dict[str, VectorField]
    scalars: dict[str, ScalarField]
    structure: ProductStructure | None


def _expr(v) -> ex.Expr:
    if isinstance(v, (int, float)):
        return ex.const(float(v))
    return ex.parse(v)


def parse_manifold(doc: dict) -> ManifoldData:
    ch = chart(int(doc["dim"]), doc["bounds"])
    g = metric(ch, [[_expr(v) for v in row] for row in doc["metric"]])
    fields = {name: VectorField(ch, tuple(_expr(c) for c in comps))
              for name, comps in doc.get("fields", {}).items()}
    scalars = {name: ScalarField(ch, _expr(e))
               for name, e in doc.get("scalars", {}).items()}
    struct = None
    if "structure" in doc:
        struct = structure(ch, [[_expr(v) for v in row] for row in doc["structure"]])
    return ManifoldData(ch, g, fields, scalars, struct)


def parse_origin(token) -> object:
    if token == BASE:
        return BASE
    if isinstance(token, int):
        return token
    if isinstance(token, str) and token.startswith("fiber:"):
        return int(token.split(":", 1)[1])
    raise ValueError(f"bad origin {token!r} (use 'base' or 'fiber:<j>')")


@dataclass(frozen=True)
class ProductData:
    spec: WarpedProductSpec
    base: ManifoldData
    fiber_data: tuple[ManifoldData, ...]

    def factor(self, origin) -> ManifoldData:
        return self.base if origin == BASE else self.fiber_data[origin - 1]


def parse_product(doc: dict, resolve) -> ProductData:
    """``resolve`` maps a ref to a parsed ManifoldData."""
    base = resolve(doc["base"])
    fibers = []
    fiber_data = []
    for entry in doc["fibers"]:
        fd = resolve(entry["ref"])
        warp = ScalarField(base.chart, _expr(entry["warp"]))
        struct = fd.structure
        if "structure" in entry:
            struct = structure(fd.chart,
                               [[_expr(v) for v in row] for row in entry["structure"]])
        fibers.append(FiberSpec(fd.chart, fd.metric, warp, struct))
        fiber_data.append(fd)
    p_on = p_field = None
    if "p" in doc:
        p_on = parse_origin(doc["p"]["on"])
        factor = base if p_on == BASE else fiber_data[p_on - 1]
        name = doc["p"]["field"]
        if isinstance(name, list):
            p_field = VectorField(factor.chart, tuple(_expr(c) for c in name))
        else:
            try:
                p_field = factor.fields[name]
            except KeyError:
                raise UnknownFixture(f"field {name!r} not defined on the P factor") from None
    spec = WarpedProductSpec(base.chart, base.metric, tuple(fibers),
                             base_structure=base.structure,
                             p_on=p_on, p_field=p_field)
    return ProductData(spec, base, tuple(fiber_data))


def load_document(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
