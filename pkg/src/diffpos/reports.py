"""Structured verdicts and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into strict JSON values.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def from_json_float(v):
    if isinstance(v, str):
        return float(v)
    return v


def dumps(payload):
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_json(path, payload):
    Path(path).write_text(dumps(payload))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


@dataclass
class CheckReport:
    """Outcome of a sampled check.

    ``worst_margin`` is the raw minimum of the checked quantity and
    ``threshold`` the level it must reach; the verdict is FAIL iff
    ``worst_margin < threshold - tol``.
    """

    check: str
    verdict: str
    worst_margin: float
    threshold: float = 0.0
    witness: dict = field(default_factory=dict)
    samples_evaluated: int = 0
    config_echo: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    margin_columns: list = field(default_factory=list)
    margins: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self):
        return self.verdict == PASS

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "check",
            "check": self.check,
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "threshold": self.threshold,
            "witness": self.witness,
            "samples_evaluated": self.samples_evaluated,
            "config": self.config_echo,
            "warnings": list(self.warnings),
            "notes": list(self.notes),
        }

    def write_margins(self, path):
        rows = [] if self.margins is None else self.margins.tolist()
        write_csv(path, self.margin_columns or ["margin"], rows)


def decide(worst, threshold, tol, starved):
    if worst < threshold - tol:
        return FAIL
    if starved:
        return INCONCLUSIVE
    return PASS


@dataclass
class ContractionReport:
    fitted_rate: float
    fitted_offset: float
    r_squared: float
    horizon_T: float
    delta_bound: float
    pairs_used: int = 0
    pairs_discarded: int = 0
    per_pair: list = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    times: np.ndarray | None = field(default=None, repr=False)
    distances: np.ndarray | None = field(default=None, repr=False)

    @property
    def contracting(self):
        return bool(self.fitted_rate > 0 and self.r_squared >= 0.9)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "contraction",
            "fitted_rate": self.fitted_rate,
            "fitted_offset": self.fitted_offset,
            "r_squared": self.r_squared,
            "horizon_T": self.horizon_T,
            "delta_bound": self.delta_bound,
            "contracting": self.contracting,
            "pairs_used": self.pairs_used,
            "pairs_discarded": self.pairs_discarded,
            "per_pair": self.per_pair,
            "config": self.config_echo,
            "warnings": list(self.warnings),
        }


FIXED_POINTS = "FixedPoints"
CURVE_1D = "Curve1D"
LIMIT_CYCLE = "LimitCycle"
SYNCHRONIZATION = "Synchronization"
UNDETERMINED = "Undetermined"


@dataclass
class AttractorReport:
    kind: str
    fixed_points: list = field(default_factory=list)
    cycle: dict | None = None
    basin_fraction: float = 0.0
    basins: dict = field(default_factory=dict)
    hypotheses_checked: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind != UNDETERMINED and not self.determined_ok():
            self.details.setdefault("downgraded_from", self.kind)
            self.kind = UNDETERMINED

    def determined_ok(self):
        return all(v == PASS for _, v in self.hypotheses_checked) and self.basin_fraction >= 0.99

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "attractor",
            "kind": self.kind,
            "fixed_points": self.fixed_points,
            "cycle": self.cycle,
            "basin_fraction": self.basin_fraction,
            "basins": self.basins,
            "hypotheses_checked": [list(h) for h in self.hypotheses_checked],
            "assumptions": list(self.assumptions),
            "details": self.details,
            "config": self.config_echo,
        }


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "report"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "report": {"enum": ["check", "contraction", "attractor"]},
    },
    "allOf": [
        {
            "if": {"properties": {"report": {"const": "check"}}},
            "then": {
                "required": ["verdict", "worst_margin", "witness", "config", "samples_evaluated"],
                "properties": {
                    "verdict": {"enum": [PASS, FAIL, INCONCLUSIVE]},
                    "worst_margin": {"type": ["number", "string"]},
                    "witness": {"type": "object"},
                    "samples_evaluated": {"type": "integer", "minimum": 0},
                    "config": {"type": "object"},
                },
            },
        },
        {
            "if": {"properties": {"report": {"const": "contraction"}}},
            "then": {
                "required": ["fitted_rate", "fitted_offset", "r_squared", "horizon_T", "delta_bound"],
                "properties": {
                    "fitted_rate": {"type": ["number", "string"]},
                    "r_squared": {"type": ["number", "string"]},
                    "contracting": {"type": "boolean"},
                },
            },
        },
        {
            "if": {"properties": {"report": {"const": "attractor"}}},
            "then": {
                "required": ["kind", "basin_fraction", "hypotheses_checked"],
                "properties": {
                    "kind": {"enum": [FIXED_POINTS, CURVE_1D, LIMIT_CYCLE, SYNCHRONIZATION, UNDETERMINED]},
                    "basin_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                    "hypotheses_checked": {
                        "type": "array",
                        "items": {"type": "array", "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
    ],
}
