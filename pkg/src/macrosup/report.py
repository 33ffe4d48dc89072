"""JSON report sections and their schemas.

Every document emitted by the command-line tool is built here so the schema
and the producer live side by side. Schemas are plain JSON Schema (draft
2020-12) dictionaries; the package itself never imports a validator.
"""
from __future__ import annotations

import numpy as np

from . import __version__, backaction, bipartite, factorize, observables, qindex
from .qstate import InfeasibleSize, MixedState, PureState, StateError

TOOL = "macrosup"

PURE_MEASURES = ("p", "entropy", "concurrence", "census", "eb", "backaction", "le", "mw")
MIXED_MEASURES = ("q", "distance")
ALL_MEASURES = PURE_MEASURES + MIXED_MEASURES

MAX_PURE_SITES = 14


def clean(obj):
    """Recursively turn numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def check_limits(state, measures) -> None:
    """Refuse sizes beyond the dense-mode limits before any work starts."""
    n = state.n_sites
    pure = isinstance(state, PureState)
    for m in measures:
        if m not in ALL_MEASURES:
            raise StateError(f"unknown measure {m!r}")
        if m in PURE_MEASURES and not pure:
            raise StateError(f"measure {m!r} needs a pure state")
    if pure and any(m in PURE_MEASURES for m in measures) and n > MAX_PURE_SITES:
        raise InfeasibleSize(f"pure-state measures limited to N <= {MAX_PURE_SITES}, got {n}")
    if any(m in MIXED_MEASURES for m in measures):
        limit = qindex.MAX_PURE_Q if pure else qindex.MAX_MIXED_Q
        if n > limit:
            raise InfeasibleSize(f"index q limited to N <= {limit} for this state, got {n}")
    if "le" in measures and n > bipartite.MAX_LE_SITES:
        raise InfeasibleSize(f"localizable entanglement limited to N <= {bipartite.MAX_LE_SITES}, got {n}")
    if "eb" in measures and n > factorize.MAX_FACTOR_SITES:
        raise InfeasibleSize(f"factorization limited to N <= {factorize.MAX_FACTOR_SITES}, got {n}")


def section_p(psi: PureState) -> dict:
    res = observables.max_fluctuation(psi)
    return {
        "max_fluctuation": res.value,
        "e1": res.top_eigenvalue,
        "feasible_value": res.feasible_value,
        "argmax": res.argmax.coeffs,
    }


def section_q(state, settings, seed) -> dict:
    res = qindex.max_double_commutator(state, settings, seed)
    return {
        "max_double_commutator": res.value,
        "candidate_best": res.candidate_best,
        "converged": res.converged,
        "starts": len(res.per_start),
        "argmax": res.argmax.coeffs,
    }


def section_distance(state, sep_constant, settings, seed, dc_value=None) -> dict:
    b = qindex.separable_distance_bound(state, sep_constant, seed, settings, dc_value)
    return {
        "one_norm_lower": b.one_norm,
        "bures_lower": b.bures,
        "relative_entropy_lower_nats": b.relative_entropy,
        "max_double_commutator": b.max_double_commutator,
        "sep_constant": b.sep_constant,
        "one_norm_convention": "unhalved",
    }


def section_entropy(psi: PureState) -> dict:
    per_site = []
    for l in range(1, psi.n_sites + 1):
        cut = bipartite.schmidt_at_site(psi, l)
        per_site.append({"l": l, "lambda0": cut.lambda0, "lambda1": cut.lambda1, "entropy_bits": cut.entropy})
    return {"half_chain_bits": bipartite.half_chain_entropy(psi), "per_site": per_site}


def section_concurrence(psi: PureState, le_rows=None) -> dict:
    rows = bipartite.pair_table(psi)
    if le_rows is not None:
        for row, le in zip(rows, le_rows):
            row["le_lower"] = le["le_lower"]
    return {"pairs": rows, "max": max(r["concurrence"] for r in rows)}


def section_le(psi: PureState, grid: int, seed) -> dict:
    rows = []
    n = psi.n_sites
    for l in range(1, n + 1):
        for m in range(l + 1, n + 1):
            rows.append({
                "l": l,
                "l_prime": m,
                "le_lower": bipartite.localizable_entanglement_bruteforce(psi, (l, m), grid, seed),
                "max_corr": bipartite.max_pair_correlation(psi, (l, m)),
            })
    return {"grid": grid, "pairs": rows}


def section_census(psi: PureState, threshold: float) -> dict:
    a = observables.max_fluctuation(psi).argmax
    c = observables.correlation_census(psi, a, threshold)
    return {
        "observable": "p_argmax",
        "threshold": threshold,
        "r1_count": c.r1_count,
        "r2_count": c.r2_count,
        "r1_fraction": c.r1_count / psi.n_sites ** 2,
    }


def section_backaction(psi: PureState, sites, tol: float) -> dict:
    reports = [backaction.backaction_report(psi, l, tol).to_json() for l in sites]
    return {"tol": tol, "sites": reports}


def build_analyze(state, family: str, measures, opts: dict) -> dict:
    """Assemble the ``analyze`` document; ``opts`` carries every threshold."""
    check_limits(state, measures)
    settings = opts["optimizer"]
    seed = opts["seed"]
    out: dict = {}
    psi = state if isinstance(state, PureState) else None
    if "p" in measures:
        out["p"] = section_p(psi)
    dc = None
    if "q" in measures:
        out["q"] = section_q(state, settings, seed)
        dc = out["q"]["max_double_commutator"]
    if "distance" in measures:
        out["distance"] = section_distance(state, opts["sep_constant"], settings, seed, dc)
    if "entropy" in measures:
        out["entropy"] = section_entropy(psi)
    le = section_le(psi, opts["le_grid"], seed) if "le" in measures else None
    if le is not None:
        out["le"] = le
    if "concurrence" in measures:
        out["concurrence"] = section_concurrence(psi, le["pairs"] if le else None)
    if "mw" in measures:
        out["mw"] = {"meyer_wallach": bipartite.meyer_wallach(psi)}
    if "census" in measures:
        out["census"] = section_census(psi, opts["threshold"])
    if "eb" in measures:
        out["eb"] = factorize.eb_report(psi, opts["eps"], opts["delta"], opts["tol"]).to_json()
    if "backaction" in measures:
        sites = opts.get("sites") or range(1, state.n_sites + 1)
        out["backaction"] = section_backaction(psi, sites, opts["backaction_tol"])
    return clean({
        "tool": TOOL,
        "version": __version__,
        "command": "analyze",
        "state": {"family": family, "n": state.n_sites, "mixed": isinstance(state, MixedState),
                  "params": opts.get("params", {})},
        "seed": seed,
        "thresholds": thresholds(opts),
        "measures": list(measures),
        "results": out,
    })


def thresholds(opts: dict) -> dict:
    s = opts["optimizer"]
    return {
        "eps": opts["eps"],
        "delta": opts["delta"],
        "threshold": opts["threshold"],
        "tol": opts["tol"],
        "backaction_tol": opts["backaction_tol"],
        "sep_constant": opts["sep_constant"],
        "le_grid": opts["le_grid"],
        "optimizer": {"starts": s.starts, "max_iters": s.max_iters, "tol": s.tol, "axis_samples": s.axis_samples},
    }


def build_sweep(fit, seed, opts: dict) -> dict:
    doc = fit.to_json()
    doc.update({
        "tool": TOOL,
        "version": __version__,
        "command": "sweep",
        "seed": seed,
        "thresholds": thresholds(opts),
    })
    return clean(doc)


def build_validate(results, corpus_size: int, seed: int, inject_fault: bool) -> dict:
    return clean({
        "tool": TOOL,
        "version": __version__,
        "command": "validate",
        "seed": seed,
        "corpus_size": corpus_size,
        "inject_fault": inject_fault,
        "passed": all(r.passed for r in results),
        "properties": [
            {"name": r.name, "checked": r.checked, "violations": r.violations,
             "worst_excess": r.worst_excess, "passed": r.passed, "seconds": r.seconds}
            for r in results
        ],
    })


# -- schemas ---------------------------------------------------------------

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_PROB = {"type": "number", "minimum": -1e-9, "maximum": 1 + 1e-9}
_COEFFS = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}}


def _obj(props: dict, required=None) -> dict:
    return {"type": "object", "properties": props, "required": list(required or props)}


_OPTIMIZER = _obj({"starts": _INT, "max_iters": _INT, "tol": _NUM, "axis_samples": _INT})

THRESHOLDS_SCHEMA = _obj({
    "eps": _NUM, "delta": _NUM, "threshold": _NUM, "tol": _NUM, "backaction_tol": _NUM,
    "sep_constant": _NUM, "le_grid": _INT, "optimizer": _OPTIMIZER,
})

_PAIR_ROW = _obj({
    "l": _INT, "l_prime": _INT, "concurrence": _PROB, "max_corr": _NUM,
    "le_lower": {"type": ["number", "null"]},
})

SECTION_SCHEMAS = {
    "p": _obj({"max_fluctuation": _NUM, "e1": _NUM, "feasible_value": _NUM, "argmax": _COEFFS}),
    "q": _obj({"max_double_commutator": _NUM, "candidate_best": _NUM, "converged": {"type": "boolean"},
               "starts": _INT, "argmax": _COEFFS}),
    "distance": _obj({
        "one_norm_lower": {"type": "number", "minimum": 0, "maximum": 2},
        "bures_lower": _NUM, "relative_entropy_lower_nats": _NUM,
        "max_double_commutator": _NUM, "sep_constant": _NUM,
        "one_norm_convention": {"const": "unhalved"},
    }),
    "entropy": _obj({
        "half_chain_bits": _NUM,
        "per_site": {"type": "array", "items": _obj({"l": _INT, "lambda0": _PROB, "lambda1": _PROB,
                                                     "entropy_bits": _PROB})},
    }),
    "concurrence": _obj({"pairs": {"type": "array", "items": _PAIR_ROW}, "max": _PROB}),
    "le": _obj({"grid": _INT, "pairs": {"type": "array", "items": _obj(
        {"l": _INT, "l_prime": _INT, "le_lower": _PROB, "max_corr": _NUM})}}),
    "mw": _obj({"meyer_wallach": _PROB}),
    "census": _obj({"observable": {"type": "string"}, "threshold": _NUM, "r1_count": _INT,
                    "r2_count": _INT, "r1_fraction": _PROB}),
    "eb": _obj({
        "eps": _NUM, "delta": _NUM, "tol": _NUM,
        "per_site": {"type": "array", "items": _obj({"l": _INT, "entropy_bits": _PROB, "s1_size": _INT})},
        "eb_count": _INT,
        "blocks": {"type": "array", "items": {"type": "array", "items": _INT}},
        "flagged": {"type": "boolean"},
    }),
    "backaction": _obj({"tol": _NUM, "sites": {"type": "array", "items": _obj({
        "site": _INT, "basis": {"type": "string"}, "info_gain_bits": _PROB,
        "outcomes": {"type": "array", "items": _obj({
            "p": _PROB, "label": {"type": "string"}, "affected": _INT,
            "per_site_dist": {"type": "object", "additionalProperties": _NUM}})},
        "affected_sites": _INT,
        "per_site_trace_distance": {"type": "object", "additionalProperties": _NUM},
        "tol": _NUM,
    })}}),
}

_HEADER = {"tool": {"const": TOOL}, "version": {"type": "string"}, "seed": {"type": ["integer", "null"]}}

ANALYZE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        **_HEADER,
        "command": {"const": "analyze"},
        "state": _obj({"family": {"type": "string"}, "n": _INT, "mixed": {"type": "boolean"},
                       "params": {"type": "object"}}),
        "thresholds": THRESHOLDS_SCHEMA,
        "measures": {"type": "array", "items": {"enum": list(ALL_MEASURES)}},
        "results": {"type": "object", "properties": SECTION_SCHEMAS, "additionalProperties": False},
    }),
}

SWEEP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        **_HEADER,
        "command": {"const": "sweep"},
        "family": {"type": "string"},
        "measure": {"enum": ["p", "q"]},
        "n_grid": {"type": "array", "items": _INT, "minItems": 3},
        "values": {"type": "array", "items": _NUM, "minItems": 3},
        "slope": _NUM, "intercept": _NUM, "residual": _NUM,
        "index_hat": _NUM, "baseline": _NUM, "amplitude": _NUM,
        "p_hat": _NUM, "q_hat": _NUM,
        "flags": {"type": "array", "items": {"type": "string"}},
        "thresholds": THRESHOLDS_SCHEMA,
    },
    "required": ["tool", "version", "seed", "command", "family", "measure", "n_grid", "values",
                 "slope", "intercept", "residual", "index_hat", "flags", "thresholds"],
    "oneOf": [{"required": ["p_hat"]}, {"required": ["q_hat"]}],
}

VALIDATE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        **_HEADER,
        "command": {"const": "validate"},
        "corpus_size": _INT,
        "inject_fault": {"type": "boolean"},
        "passed": {"type": "boolean"},
        "properties": {"type": "array", "items": _obj({
            "name": {"type": "string"}, "checked": _INT, "violations": _INT,
            "worst_excess": {"type": ["number", "null"]}, "passed": {"type": "boolean"}, "seconds": _NUM})},
    }),
}
