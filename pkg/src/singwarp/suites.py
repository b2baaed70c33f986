"""Suite definitions: which clauses run on which fixtures, with their
tolerances.  `build_suites` instantiates them for a given seed / sample
budget; `REQUIRED_COVERAGE` is the registry self-test's expectation."""

from __future__ import annotations

from .clauses import REGISTRY
from .errors import UnknownClause
from .verifier import Sampling, TheoremSuite, Tolerances

DEG_FIXTURES = ("fix-a", "fix-b", "fix-e", "fix-f")
ID_FIXTURES = ("fix-a", "fix-g")
AP_FIXTURES = ("fix-e", "fix-d", "fix-ap")
PBASE_FIXTURES = ("fix-a", "fix-b", "fix-h")
PFIBER_FIXTURES = ("fix-c",)
LC_PRODUCTS = ("fix-a", "fix-b", "fix-f", "fix-h", "fix-m")

_DEFAULT = Tolerances()
_PRODUCT = Tolerances(rel=1e-6, abs=1e-10, rel_curvature=1e-6)
_DEFECT = Tolerances(rel=1e-8, abs=1e-10, rel_curvature=1e-8)
_SPOT = Tolerances(rel=1e-8, abs=1e-8, rel_curvature=1e-8)
_FD = Tolerances(rel=1e-6, abs=1e-10, rel_curvature=1e-6)


def _ids(prefix: str):
    out = tuple(sorted(cid for cid in REGISTRY if cid.startswith(prefix + "/")))
    if not out:
        raise UnknownClause(f"no clauses registered under {prefix!r}")
    return out


_SUITE_TABLE = [
    # (sid, fixtures, clause prefix(es), tolerances)
    ("thm-2.2", ID_FIXTURES, ["thm-2.2"], _DEFAULT),
    ("thm-3.2", ID_FIXTURES, ["thm-3.2"], _DEFAULT),
    ("thm-4.3", AP_FIXTURES, ["thm-4.3"], _DEFAULT),
    ("prop-2.5", ID_FIXTURES, ["prop-2.5"], _DEFAULT),
    ("prop-3.5", ID_FIXTURES, ["prop-3.5"], _DEFAULT),
    ("prop-4.5", AP_FIXTURES, ["prop-4.5"], _DEFAULT),
    ("prop-2.7", ID_FIXTURES, ["prop-2.7"], _DEFAULT),
    ("prop-3.7", ID_FIXTURES, ["prop-3.7"], _DEFAULT),
    ("prop-4.8", AP_FIXTURES, ["prop-4.8"], _DEFAULT),
    ("cor-2.4", DEG_FIXTURES, ["cor-2.4"], _DEFAULT),
    ("cor-3.4", DEG_FIXTURES, ["cor-3.4"], _DEFAULT),
    ("eq-2.7", ID_FIXTURES, ["eq-2.7"], _DEFAULT),
    ("eq-3.4", ID_FIXTURES, ["eq-3.4"], _DEFAULT),
    ("eq-2.11", ID_FIXTURES, ["eq-2.11"], _DEFAULT),
    ("eq-3.7", ID_FIXTURES, ["eq-3.7"], _DEFAULT),
    ("eq-2.12", ID_FIXTURES, ["eq-2.12"], _DEFAULT),
    ("eq-3.8", ID_FIXTURES, ["eq-3.8"], _DEFAULT),
    ("prop-4.6", ("fix-e", "fix-d"), ["prop-4.6"], _DEFAULT),
    ("eq-4.1", ("fix-ap",), ["eq-4.1"], _DEFAULT),
    ("eq-2.18", ID_FIXTURES, ["eq-2.18"], _DEFAULT),
    ("eq-3.15", ID_FIXTURES, ["eq-3.15"], _DEFAULT),
    ("thm-3.10", ID_FIXTURES, ["thm-3.10"], _DEFECT),
    ("prop-2.14", ID_FIXTURES, ["prop-2.14"], _DEFAULT),
    ("prop-3.12", ID_FIXTURES, ["prop-3.12"], _DEFAULT),
    ("prop-2.13", ID_FIXTURES, ["prop-2.13"], _DEFAULT),
    ("prop-3.11", ID_FIXTURES, ["prop-3.11"], _DEFAULT),
    ("prop-4.13", AP_FIXTURES, ["prop-4.13"], _DEFAULT),
    ("curv-lin", ("fix-a", "fix-g", "fix-ap"), ["curv-lin"], _DEFAULT),
    # product consistency
    ("prop-2.15", PBASE_FIXTURES, ["prop-2.15"], _PRODUCT),
    ("prop-2.16", PFIBER_FIXTURES, ["prop-2.16"], _PRODUCT),
    ("prop-3.13", PBASE_FIXTURES, ["prop-3.13"], _PRODUCT),
    ("prop-3.14", PFIBER_FIXTURES, ["prop-3.14"], _PRODUCT),
    ("prop-4.14", ("fix-e", "fix-d"), ["prop-4.14"], _PRODUCT),
    ("prop-5.2", LC_PRODUCTS, ["prop-5.2"], _PRODUCT),
    ("thm-2.17", PBASE_FIXTURES, ["thm-2.17"], _PRODUCT),
    ("thm-2.18", PFIBER_FIXTURES, ["thm-2.18"], _PRODUCT),
    ("thm-3.15", PBASE_FIXTURES, ["thm-3.15"], _PRODUCT),
    ("thm-3.16", PFIBER_FIXTURES, ["thm-3.16"], _PRODUCT),
    ("thm-4.17", ("fix-e", "fix-d"), ["thm-4.17"], _PRODUCT),
    ("thm-5.5", LC_PRODUCTS, ["thm-5.5"], _PRODUCT),
    ("thm-5.4", LC_PRODUCTS, ["thm-5.4"], _PRODUCT),
    ("thm-4.16", ("fix-e", "fix-d"), ["thm-4.16"], _PRODUCT),
    # stationarity, witnesses, continuity, spots, oracle
    ("radical-stationarity",
     ("fix-a", "fix-b", "fix-e", "fix-f", "fix-h", "fix-m", "fix-d", "fix-n"),
     ["thm-5.3", "thm-4.15", "radical"], _DEFAULT),
    ("continuity", ("fix-a", "fix-b", "fix-e", "fix-f", "fix-d"),
     ["thm-2.11", "thm-4.12", "continuity", "prop-4.10", "ex-4.11",
      "prop-2.10", "prop-3.9"], _DEFAULT),
    ("spot-values", ("fix-b", "fix-f", "fix-g"), ["spot"], _SPOT),
    ("jet-fd", ("fix-a", "fix-b", "fix-c", "fix-d", "fix-e", "fix-f", "fix-g",
                "fix-h", "fix-m", "fix-n", "fix-ap"), ["jets"], _FD),
]

SUITE_IDS = tuple(sid for sid, _, _, _ in _SUITE_TABLE)

# Registry self-test data: the clause counts each group must provide.
REQUIRED_COVERAGE = {
    "thm-2.2": 8, "thm-3.2": 8, "thm-4.3": 7,
    "prop-2.5": 7, "prop-3.5": 7, "prop-4.5": 6,
    "prop-2.7": 4, "prop-3.7": 4, "prop-4.8": 4,
    "cor-2.4": 1, "cor-3.4": 1,
    "eq-2.7": 1, "eq-3.4": 1, "eq-2.11": 1, "eq-3.7": 1,
    "eq-2.12": 1, "eq-3.8": 1, "eq-2.18": 2, "eq-3.15": 2,
    "thm-3.10": 1, "prop-2.14": 1, "prop-3.12": 1,
    "prop-2.13": 1, "prop-3.11": 1, "prop-4.13": 1,
    "prop-4.6": 1, "eq-4.1": 1,
    "prop-2.15": 8, "prop-2.16": 8, "prop-3.13": 8, "prop-3.14": 8,
    "prop-4.14": 8, "prop-5.2": 15,
    "thm-2.17": 9, "thm-2.18": 9, "thm-3.15": 12, "thm-3.16": 12,
    "thm-4.17": 9, "thm-5.5": 17, "thm-5.4": 17, "thm-4.16": 10,
    "thm-5.3": 1, "thm-4.15": 1, "thm-2.11": 1, "thm-4.12": 1,
    "prop-2.10": 1, "prop-3.9": 1, "prop-4.10": 1, "ex-4.11": 1,
    "spot": 3, "jets": 1, "radical": 2, "curv-lin": 4, "continuity": 4,
}


def coverage_gaps() -> list[str]:
    """Groups whose registered clause count falls short of the expectation;
    empty means the registry is complete."""
    gaps = []
    for prefix, want in REQUIRED_COVERAGE.items():
        have = sum(1 for cid in REGISTRY if cid.startswith(prefix + "/"))
        if have < want:
            gaps.append(f"{prefix}: have {have}, want {want}")
    return gaps


def build_suites(seed: int = 42, n_points: int = 64, n_draws: int = 8,
                 tol_rel: float | None = None, tol_abs: float | None = None,
                 only=None) -> list[TheoremSuite]:
    sampling = Sampling(seed, n_points, n_draws)
    out = []
    wanted = set(only) if only else None
    for sid, fixtures, prefixes, tol in _SUITE_TABLE:
        if wanted is not None and sid not in wanted:
            continue
        if tol_rel is not None or tol_abs is not None:
            tol = Tolerances(rel=tol_rel if tol_rel is not None else tol.rel,
                             abs=tol_abs if tol_abs is not None else tol.abs,
                             rel_curvature=(tol_rel if tol_rel is not None
                                            else tol.rel_curvature))
        cids = []
        for pre in prefixes:
            cids.extend(_ids(pre))
        out.append(TheoremSuite(sid, tuple(fixtures), tuple(cids), sampling, tol))
    if wanted is not None:
        missing = wanted - {s.sid for s in out}
        if missing:
            raise UnknownClause(f"unknown suite ids: {sorted(missing)}")
    return out
