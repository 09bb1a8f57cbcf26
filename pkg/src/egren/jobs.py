"""Job specifications, schema validation and dispatch to the workbench modules.

A job is a command name plus a JSON payload. Payloads carry a
``schema_version`` and are validated before dispatch; a report echoes the
full job (payload, seed, tolerance) so that re-running the echo reproduces
the report byte for byte.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import jsonschema
import numpy as np

from . import causal, cones, wick
from .distributions import (
    DistributionKernel,
    Inconclusive,
    NeedsExtension,
    fourier_decay_probe,
    scaling_degree_estimate,
)
from .extension import (
    CutoffFamily,
    NeedsSubtraction,
    NotConverged,
    _resolve_sd,
    build_w_operator,
    extend_at_surface,
    extend_unique,
    extend_with_w,
    transversal_scaling_degree,
)
from .fibration import SurfaceFibration
from .quadrature import NonIntegrable, QuadConfig
from .testfunctions import Cutoff, make_bump, random_probe

__all__ = [
    "SCHEMA_VERSION",
    "COMMANDS",
    "SCHEMAS",
    "TOL_PROFILES",
    "JobSpec",
    "Report",
    "SpecError",
    "NumericalFailure",
    "run_job",
    "validate",
    "resolve_tolerance",
]

SCHEMA_VERSION = 1

#: named tolerance profiles (relative tolerance of the quadrature)
TOL_PROFILES = {"fast": 1e-6, "default": 1e-8, "strict": 1e-10}


class SpecError(ValueError):
    """Job specification is malformed, fails its schema, or has the wrong version."""


class NumericalFailure(ArithmeticError):
    """A numerical procedure did not produce a trustworthy result."""


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_rational = {"oneOf": [{"type": "integer"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}
_point = {"type": "array", "items": _rational, "minItems": 2}
_multi_index = {"type": "array", "items": {"type": "integer", "minimum": 0}}
_probe = {
    "type": "object",
    "properties": {
        "center": {"type": "array", "items": {"type": "number"}},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "poly": {"type": "array", "items": {
            "type": "array", "prefixItems": [_multi_index, {"type": "number"}], "minItems": 2, "maxItems": 2}},
    },
    "required": ["radius"],
    "additionalProperties": False,
}
_fibration = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 2},
        "shear": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "required": ["d", "n"],
    "additionalProperties": False,
}
_kernel_props = {
    "schema_version": {"const": SCHEMA_VERSION},
    "kernel": {"type": ["string", "null"]},
    "dim": {"type": "integer", "minimum": 1},
    "delta": {"type": "array", "items": {
        "type": "object",
        "properties": {"alpha": _multi_index, "coeff": {"type": "number"}},
        "required": ["alpha"], "additionalProperties": False}},
    "sd": {"type": ["number", "null"]},
    "eps0": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "mode": {"enum": ["point", "diagonal"]},
    "fibration": _fibration,
    "probes": {"type": "array", "items": _probe},
}
_causal_props = {
    "schema_version": {"const": SCHEMA_VERSION},
    "d": {"type": "integer", "minimum": 2},
    "points": {"type": "array", "items": _point, "minItems": 1},
}
_subset = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "uniqueItems": True}

SCHEMAS: dict[str, dict] = {
    "sd": {
        "type": "object",
        "properties": {**_kernel_props, "n_max": {"type": "integer", "minimum": 8, "maximum": 80}},
        "required": ["schema_version", "dim"],
        "additionalProperties": False,
    },
    "extend": {
        "type": "object",
        "properties": {
            **_kernel_props,
            "cutoff": {"type": "object", "properties": {"eps": {"type": "number"}, "R": {"type": "number"}},
                       "required": ["eps", "R"], "additionalProperties": False},
            "weight": {"type": "object", "properties": {"eps": {"type": "number"}, "R": {"type": "number"}},
                       "required": ["eps", "R"], "additionalProperties": False},
            "w_order": {"type": "integer", "minimum": 0},
            "constants": {"type": "array", "items": {
                "type": "object", "properties": {"alpha": _multi_index, "value": {"type": "number"}},
                "required": ["alpha", "value"], "additionalProperties": False}},
            "random_probes": {"type": "integer", "minimum": 0, "maximum": 100},
            "n_max": {"type": "integer", "minimum": 4, "maximum": 80},
            "estimate_sd": {"type": "boolean"},
        },
        "required": ["schema_version", "kernel", "dim"],
        "additionalProperties": False,
    },
    "wf": {
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "mode": {"enum": ["commutator", "hadamard", "feynman", "gamma_to", "digamma", "hormander", "restriction"]},
            "d": {"type": "integer", "minimum": 2},
            "points": {"type": "array", "items": _point},
            "covectors": {"type": "array", "items": _point},
            "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            "direction_grid": {"type": "array", "items": _point},
            "multiplicity_bound": {"type": "integer", "minimum": 1},
            "cones": {"type": "array", "items": {
                "type": "object", "properties": {"base": _point, "generators": {"type": "array", "items": _point}},
                "required": ["base", "generators"], "additionalProperties": False}},
            "subspace": {"type": "array", "items": _point},
        },
        "required": ["schema_version", "mode"],
        "additionalProperties": False,
    },
    "cover": {
        "type": "object",
        "properties": {**_causal_props},
        "required": ["schema_version", "d", "points"],
        "additionalProperties": False,
    },
    "glue": {
        "type": "object",
        "properties": {**_causal_props, "I1": _subset, "I2": _subset,
                       "word": {"type": "array", "items": _subset}},
        "required": ["schema_version", "d", "points"],
        "additionalProperties": False,
    },
    "wick": {
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 12}, "minItems": 1,
                        "maxItems": 8},
            "saturated_only": {"type": "boolean"},
            "d": {"type": "integer", "minimum": 2},
        },
        "required": ["schema_version", "degrees"],
        "additionalProperties": False,
    },
    "classify": {
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "d": {"type": "integer", "minimum": 2},
            "terms": {"type": "array", "minItems": 1, "items": {
                "type": "object", "properties": {"power": {"type": "integer", "minimum": 1}, "label": {"type": "string"}},
                "required": ["power"], "additionalProperties": False}},
            "k": {"type": "integer", "minimum": 1},
            "lower_sd": _rational,
            "n_max": {"type": "integer", "minimum": 2, "maximum": 64},
        },
        "required": ["schema_version", "d"],
        "oneOf": [{"required": ["terms"]}, {"required": ["k"]}],
        "additionalProperties": False,
    },
    "probe": {
        "type": "object",
        "properties": {
            **{k: v for k, v in _kernel_props.items() if k not in ("mode", "fibration", "probes")},
            "chi": _probe,
            "directions": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 1},
            "N": {"type": "integer", "minimum": 4, "maximum": 16},
        },
        "required": ["schema_version", "dim", "chi", "directions"],
        "additionalProperties": False,
    },
}

COMMANDS = tuple(SCHEMAS)


def validate(command: str, payload: dict) -> None:
    """Validate ``payload`` for ``command``; raise :class:`SpecError` on any problem."""
    if command not in SCHEMAS:
        raise SpecError(f"unknown command {command!r}")
    if not isinstance(payload, dict):
        raise SpecError("payload must be a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SpecError(f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    try:
        jsonschema.validate(payload, SCHEMAS[command], cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise SpecError(f"{command} spec invalid at {where}: {exc.message}") from None


def resolve_tolerance(tol: float | None) -> tuple[float, str]:
    """Explicit tolerance, else the ``EGREN_TOL_PROFILE`` profile, else ``default``."""
    if tol is not None:
        if not (0 < tol < 1):
            raise SpecError("tolerance must lie in (0, 1)")
        return float(tol), "explicit"
    name = os.environ.get("EGREN_TOL_PROFILE", "default")
    if name not in TOL_PROFILES:
        raise SpecError(f"unknown tolerance profile {name!r}; choose from {sorted(TOL_PROFILES)}")
    return TOL_PROFILES[name], name


# ---------------------------------------------------------------------------
# jobs and reports
# ---------------------------------------------------------------------------


@dataclass
class JobSpec:
    command: str
    payload: dict
    seed: int = 0
    tol: float | None = None

    @classmethod
    def from_echo(cls, echo: dict) -> "JobSpec":
        return cls(echo["command"], copy.deepcopy(echo["payload"]), echo["seed"], echo["tol"])


@dataclass
class Report:
    echo: dict
    result: dict
    provenance: dict
    csv_rows: list[list] | None = field(default=None)
    csv_header: list[str] | None = field(default=None)

    def to_json(self) -> dict:
        return {"echo": self.echo, "provenance": self.provenance, "result": self.result}

    def dumps(self) -> str:
        return json.dumps(_jsonable(self.to_json()), indent=2, sort_keys=True) + "\n"

    def csv_text(self) -> str | None:
        if self.csv_rows is None:
            return None
        lines = [",".join(self.csv_header or [])]
        lines += [",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) for row in self.csv_rows]
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def run_job(job: JobSpec) -> Report:
    """Validate and dispatch a job.

    Raises:
        SpecError: schema or input problems.
        NumericalFailure: the numerical procedure failed.
    """
    validate(job.command, job.payload)
    rtol, profile = resolve_tolerance(job.tol)
    cfg = QuadConfig(rtol=rtol)
    handler = _HANDLERS[job.command]
    try:
        result, csv = handler(job.payload, cfg, job.seed)
    except (NonIntegrable, Inconclusive, NotConverged, NeedsExtension, NeedsSubtraction) as exc:
        raise NumericalFailure(f"{type(exc).__name__}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"{type(exc).__name__}: {exc}") from exc
    echo = {"command": job.command, "payload": job.payload, "seed": job.seed, "tol": job.tol}
    provenance = {"module": _MODULES[job.command], "tolerance": rtol, "tolerance_profile": profile,
                  "seed": job.seed, "schema_version": SCHEMA_VERSION}
    header, rows = csv if csv else (None, None)
    return Report(echo, result, provenance, rows, header)


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------


def _kernel_from(p: dict, locus="origin") -> DistributionKernel:
    if not p.get("kernel") and not p.get("delta"):
        raise SpecError("a kernel expression or a delta part is required")
    delta = [{"alpha": tuple(e["alpha"]), "coeff": e.get("coeff", 1.0)} for e in p.get("delta", [])]
    for e in delta:
        if len(e["alpha"]) != p["dim"]:
            raise SpecError("delta multi-index length must equal dim")
    return DistributionKernel.from_dsl(p.get("kernel") or "0", p["dim"], delta=delta, sd=p.get("sd"),
                                       eps0=p.get("eps0"), locus=locus)


def _probe_from(d: int, spec: dict):
    c = spec.get("center")
    if c is not None and len(c) != d:
        raise SpecError("probe center has the wrong dimension")
    poly = [(tuple(a), v) for a, v in spec["poly"]] if "poly" in spec else None
    return make_bump(d, c, spec["radius"], poly)


def _fibration_from(p: dict) -> SurfaceFibration:
    if "fibration" not in p:
        raise SpecError("diagonal mode needs a fibration")
    f = p["fibration"]
    shear = tuple(tuple(r) for r in f["shear"]) if f.get("shear") else None
    fib = SurfaceFibration(f["d"], f["n"], shear)
    if fib.total_dim != p["dim"]:
        raise SpecError("fibration dimension d*n must equal dim")
    return fib


def _pv(v) -> dict:
    return {"value": v.value, "error": v.error, "scale": v.scale}


def _sd_job(p, cfg, seed):
    mode = p.get("mode", "point")
    n_max = p.get("n_max", 64)
    cheap = cfg.cheaper()
    if mode == "diagonal":
        fib = _fibration_from(p)
        t = _kernel_from(p, fib)
        probes = [_probe_from(fib.codim, s) for s in p["probes"]] if "probes" in p else None
        rep = transversal_scaling_degree(t, fib, probes, n_max=n_max, cfg=cheap)
    else:
        t = _kernel_from(p)
        probes = [_probe_from(p["dim"], s) for s in p["probes"]] if "probes" in p else None
        rep = scaling_degree_estimate(t, probes, n_max=n_max, cfg=cheap)
    rows = []
    for k, samples in enumerate(rep.samples):
        for lam, v in samples:
            rows.append([k, lam, float(v)])
    return {"mode": mode, **rep.to_dict()}, (["probe", "lambda", "abs_pairing"], rows)


def _extend_job(p, cfg, seed):
    d = p["dim"]
    fam = CutoffFamily(**p["cutoff"]) if "cutoff" in p else CutoffFamily()
    mode = p.get("mode", "point")
    n_max = p.get("n_max", 40)
    consts = {tuple(c["alpha"]): c["value"] for c in p.get("constants", [])}
    weight = Cutoff(p["weight"]["eps"], p["weight"]["R"]) if "weight" in p else Cutoff(0.5, 1.0)
    if mode == "diagonal":
        fib = _fibration_from(p)
        t0 = _kernel_from(p, fib)
        sd, _ = _resolve_sd(t0, p.get("sd"), fib)
        W = None
        if sd >= fib.codim:
            W = build_w_operator(fib.codim, p.get("w_order", math.floor(sd - fib.codim + 1e-12)), weight)
        res = extend_at_surface(t0, fib, W, consts, fam, sd, n_max, cfg)
    else:
        t0 = _kernel_from(p)
        sd, _ = _resolve_sd(t0, p.get("sd"))
        if sd < d:
            res = extend_unique(t0, fam, n_max, sd, cfg)
        else:
            order = p.get("w_order", math.floor(sd - d + 1e-12))
            W = build_w_operator(d, order, weight)
            res = extend_with_w(t0, W, consts, fam, sd, n_max, cfg)
    probes = [_probe_from(d, s) for s in p.get("probes", [])]
    rng = np.random.default_rng(seed)
    probes += [random_probe(d, rng) for _ in range(p.get("random_probes", 0 if probes else 3))]
    pairings = []
    for ph in probes:
        pairings.append({"probe": ph.describe(), **_pv(res.pair(ph))})
    out = {"mode": res.mode, "ambiguity_dimension": res.ambiguity_dimension,
           "constants": [[list(k), v] for k, v in sorted(res.constants.items())],
           "pairings": pairings, "diagnostics": res.diagnostics}
    if p.get("estimate_sd", False):
        after = res.estimate_sd(n_max=24)
        out["sd_before"] = res.diagnostics.get("sd")
        out["sd_after"] = after.estimate
    return out, None


def _wf_job(p, cfg, seed):
    mode = p["mode"]
    if mode in ("commutator", "hadamard", "feynman"):
        if len(p.get("points", [])) != 2 or len(p.get("covectors", [])) != 2:
            raise SpecError("two-point modes need exactly two points and two covectors")
        fn = {"commutator": cones.wf_commutator_member, "hadamard": cones.wf2_hadamard_member,
              "feynman": cones.wf_feynman_member}[mode]
        x, xp = (_rat(v) for v in p["points"])
        k, kp = (_rat(v) for v in p["covectors"])
        return {"mode": mode, "member": fn(x, k, xp, kp)}, None
    if mode in ("hormander", "restriction"):
        cs = [cones.ConeGenerators(_rat(c["base"]), [_rat(g) for g in c["generators"]]) for c in p.get("cones", [])]
        if mode == "hormander":
            if len(cs) != 2:
                raise SpecError("hormander mode needs exactly two cones")
            return {"mode": mode, "product_allowed": cones.hormander_product_check(*cs)}, None
        sub = [_rat(v) for v in p.get("subspace", [])]
        return {"mode": mode, "restriction_allowed": cones.restriction_allowed(cs, sub)}, None
    cc = cones.CovectorConfig(p["d"], [_rat(v) for v in p["points"]], [_rat(v) for v in p["covectors"]])
    bound = p.get("multiplicity_bound", 4)
    grid = [_rat(v) for v in p["direction_grid"]] if "direction_grid" in p else None
    if mode == "gamma_to":
        v = cones.gamma_to_member(cc, bound, grid)
    else:
        if "degrees" not in p:
            raise SpecError("digamma mode needs degrees")
        v = cones.digamma_member(cc, p["degrees"], bound, grid)
    out = {"mode": mode, "verdict": v.verdict, "multiplicity_bound": bound}
    if isinstance(v, cones.Feasible):
        out["witness"] = v.witness.to_json()
        out["reproduces_covectors"] = v.witness.covector_sums(cc.d) == list(cc.covectors)
    else:
        out["reason"] = v.reason
    return out, None


def _rat(v):
    return tuple(Fraction(str(a)) for a in v)


def _config(p) -> causal.PointConfig:
    return causal.PointConfig(p["d"], [[Fraction(str(a)) for a in pt] for pt in p["points"]])


def _cover_job(p, cfg, seed):
    conf = _config(p)
    w = causal.cover_witness(conf)
    if w is causal.OnDiagonal():
        return {"verdict": "OnDiagonal"}, None
    weights = causal.partition_weights(conf)
    return {
        "verdict": "Covered",
        "witness": sorted(w),
        "members": [sorted(I) for I in causal.members(conf)],
        "partition_weights": weights.to_json(),
    }, None


def _glue_job(p, cfg, seed):
    conf = _config(p)
    out = {}
    if "word" in p:
        nf = causal.causal_factorize(causal.TOWord(p["word"]), conf, record=True)
        out["normal_form"] = nf.to_json()
        out["trace"] = list(nf.trace)
    if "I1" in p or "I2" in p:
        if not ("I1" in p and "I2" in p):
            raise SpecError("give both I1 and I2")
        out["consistent"] = causal.glue_consistency(conf, p["I1"], p["I2"])
    else:
        ms = causal.members(conf)
        checks = [(sorted(a), sorted(b), causal.glue_consistency(conf, a, b)) for a in ms for b in ms]
        out["pairs_checked"] = len(checks)
        out["consistent"] = all(c for _, _, c in checks)
    return out, None


def _wick_job(p, cfg, seed):
    degrees = p["degrees"]
    if p.get("saturated_only"):
        terms = [wick.WickTerm(g, wick.wick_coefficient(g, degrees), tuple([0] * len(degrees)))
                 for g in wick.enumerate_saturated_graphs(degrees)]
    else:
        terms = wick.wick_expand(degrees)
    rows = []
    for t in terms:
        row = t.to_json()
        if "d" in p:
            row["omega"] = wick.graph_scaling_degree(t.graph, p["d"])
            row["rho"] = wick.divergence_degree(t.graph, p["d"])
        rows.append(row)
    return {"degrees": degrees, "terms": rows, "count": len(rows)}, None


def _classify_job(p, cfg, seed):
    terms = p["terms"] if "terms" in p else [{"power": p["k"]}]
    rep = wick.classify_interaction(p["d"], [t["power"] for t in terms], p.get("n_max", 8),
                                    Fraction(str(p.get("lower_sd", 0))))
    out = rep.to_json()
    out["labels"] = [t.get("label", f"phi^{t['power']}") for t in terms]
    return out, None


def _probe_job(p, cfg, seed):
    t = _kernel_from(p)
    chi = _probe_from(p["dim"], p["chi"])
    res = fourier_decay_probe(t, chi, [tuple(v) for v in p["directions"]], N=p.get("N", 10))
    return {"directions": [r.to_dict() for r in res]}, None


_HANDLERS = {
    "sd": _sd_job,
    "extend": _extend_job,
    "wf": _wf_job,
    "cover": _cover_job,
    "glue": _glue_job,
    "wick": _wick_job,
    "classify": _classify_job,
    "probe": _probe_job,
}

_MODULES = {
    "sd": "distributions-core",
    "extend": "extension-engine",
    "wf": "cone-calculus",
    "cover": "minkowski-causal",
    "glue": "minkowski-causal",
    "wick": "wick-power",
    "classify": "wick-power",
    "probe": "distributions-core",
}
