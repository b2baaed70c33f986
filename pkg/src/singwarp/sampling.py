"""Deterministic draws of sample points and random polynomial fields.

Random fields are degree-two polynomial combinations of coordinate fields
with coefficients in [-2, 2]; scalars use the same distribution.  Every draw
is a pure function of the generator state, so a fixed seed reproduces runs
bit for bit."""

from __future__ import annotations

import zlib

import numpy as np

from . import expr as ex
from .fields import ChartDomain, ScalarField, VectorField


def stream(seed: int, *labels: str) -> np.random.Generator:
    salt = [zlib.crc32(lbl.encode()) for lbl in labels]
    return np.random.default_rng([int(seed) & 0xFFFFFFFF] + salt)


def sample_points(chart: ChartDomain, n: int, rng: np.random.Generator):
    lo = np.array([b[0] for b in chart.bounds])
    hi = np.array([b[1] for b in chart.bounds])
    pts = rng.uniform(lo, hi, size=(n, chart.dim))
    return [tuple(float(x) for x in row) for row in pts]


def random_poly(dim: int, rng: np.random.Generator, degree: int = 2) -> ex.Expr:
    e = ex.const(rng.uniform(-2.0, 2.0))
    for i in range(dim):
        e = e + ex.const(rng.uniform(-2.0, 2.0)) * ex.coord(i)
    if degree >= 2:
        for i in range(dim):
            for j in range(i, dim):
                e = e + ex.const(rng.uniform(-2.0, 2.0)) * (ex.coord(i) * ex.coord(j))
    return e


def random_vector_field(chart: ChartDomain, rng: np.random.Generator) -> VectorField:
    return VectorField(chart, tuple(random_poly(chart.dim, rng)
                                    for _ in range(chart.dim)))


def random_scalar_field(chart: ChartDomain, rng: np.random.Generator) -> ScalarField:
    return ScalarField(chart, random_poly(chart.dim, rng))
