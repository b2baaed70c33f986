"""Numerical Koszul forms, covariant derivatives and curvature on singular
semi-Riemannian charts, with warped-product factor formulas and an identity
verification harness."""

from . import expr
from .curvature import (nontensorial_defect, riemann, riemann_relation_ssm,
                        riemann_relation_ssnm)
from .errors import (DimensionMismatch, DomainError, NotAnnihilator,
                     SingularBaseMetric, SingwarpError, UnknownClause,
                     UnknownFixture, UnsupportedCase)
from .fields import (ChartDomain, CovectorField, CovectorValue, MetricField,
                     ScalarField, VectorField, chart, coordinate_field,
                     diag_metric, flat, flat_field, hessian_scalar,
                     lie_bracket, lie_derivative_metric, metric, metric_at)
from .jets import Jet2, directional_derivative, eval_jet2
from .koszul import (ConnectionVariant, ProductStructure, almost_product,
                     check_radical_stationary, constant_structure,
                     cov_deriv_form, kk_contraction, koszul, koszul_variant,
                     levi_civita, lower_cov_deriv, second_lower_deriv,
                     ss_metric, ss_non_metric, structure_apply)
from .linalg import GramSnapshot, co_inner, cometric, gram_at, is_annihilator, radical_basis
from .products import (BASE, FiberSpec, WarpedProductSpec,
                       assemble_product_metric, factorwise_kk,
                       factorwise_koszul, factorwise_riemann, lift_field,
                       product_chart)
from .verifier import (CheckReport, PathSpec, Sampling, TheoremSuite,
                       Tolerances, continuity_probe, run_suite)

__version__ = "0.1.0"
