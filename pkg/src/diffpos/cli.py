"""Command-line front end: ``diffpos {check,simulate,hilbert,attractor,list-models}``.

A run is configured by an optional YAML/JSON file plus flag overrides (flags
win).  All outputs go to ``<root>/<config-hash>-seed<seed>/``, where the root
is ``--output``, ``$DIFFPOS_OUTPUT_ROOT`` or ``./runs``.  Exit codes: 0 PASS,
1 FAIL, 2 INCONCLUSIVE / Undetermined, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .attractors import detect_bistable_convergence, detect_limit_cycle, kuramoto_sync_analysis
from .checker import (
    CheckSettings,
    check_theorem1,
    check_theorem2,
    check_theorem3,
    estimate_contraction,
    sample_cone_directions,
    verify_invariance_along_flow,
)
from .cones import polyhedral_cone, quadratic_cone
from .dynamics import _iterate, check_forward_invariance, iter_prolonged
from .errors import ConfigError, DiffPosError, DivergenceError, PreconditionError
from .model_zoo import CONES, MODELS, build_bundle, build_cone, metzler_linear
from .regions import CompactRegion, PhaseGapRegion, wrap_state
from .reports import FAIL, INCONCLUSIVE, PASS, UNDETERMINED, write_csv, write_json

EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_CONFIG = 3
OUTPUT_ENV = "DIFFPOS_OUTPUT_ROOT"


@dataclass
class RunConfig:
    """Everything a run needs; unknown keys are rejected when loading."""

    model: object = "pendulum"
    model_params: dict = field(default_factory=dict)
    cone: object = None
    cone_kind: str = "polyhedral"
    region: dict | None = None
    theorem: str = "3"
    analysis: str | None = None
    density: int = 15
    n_directions: int = 200
    tol: float = 1e-9
    strict_margin: float = 1e-6
    T: float | None = None
    h: float = 1e-3
    eps: float | None = None
    seed: int = 0
    assume_invariant: bool = False
    n_pairs: int = 10
    n_ic: int | None = None
    ics: list | None = None
    prolonged: bool = False
    stride: int = 10
    lambda_param: float | None = None
    output: str | None = None


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_SCALAR = {"density": int, "n_directions": int, "tol": float, "strict_margin": float, "T": float,
           "h": float, "eps": float, "seed": int, "n_pairs": int, "n_ic": int, "stride": int,
           "lambda_param": float}
_BOOL = {"assume_invariant", "prolonged"}
THEOREMS = ("1", "2", "3", "invariance", "forward_invariance")
ANALYSES = ("bistable", "limit_cycle", "kuramoto")
DEFAULT_T = {"check": 10.0, "simulate": 10.0, "hilbert": 30.0, "bistable": 60.0,
             "limit_cycle": 120.0, "kuramoto": 50.0}


def _coerce(name, value):
    if value is None:
        return None
    try:
        if name in _SCALAR:
            return _SCALAR[name](value)
        if name in _BOOL:
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if name == "theorem":
            value = str(value)
            if value not in THEOREMS:
                raise ValueError(f"choose from {THEOREMS}")
        if name == "analysis" and value not in ANALYSES:
            raise ValueError(f"choose from {ANALYSES}")
        if name == "model_params" and not isinstance(value, dict):
            raise ValueError("expected a mapping")
        if name == "region" and not isinstance(value, dict):
            raise ValueError("expected a mapping")
    except (TypeError, ValueError) as err:
        raise ConfigError(f"field '{name}': invalid value {value!r} ({err})", field=name) from err
    return value


def load_config(path=None, overrides=None):
    """Merge a config file with flag overrides into a validated ``RunConfig``."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}", field="config") from err
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as err:
            mark = getattr(err, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"malformed config {path}{where}: {err}", field="config") from err
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping", field="config")
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if key == "model_params":
            merged["model_params"] = {**(merged.get("model_params") or {}), **value}
        elif key == "region":
            merged["region"] = {**(merged.get("region") or {}), **value}
        else:
            merged[key] = value
    unknown = sorted(set(merged) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", field=unknown[0])
    cfg = RunConfig()
    for key, value in merged.items():
        setattr(cfg, key, _coerce(key, value))
    return cfg


def config_hash(cfg):
    payload = {k: v for k, v in dataclasses.asdict(cfg).items() if k != "output"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:12]


def run_directory(cfg):
    root = cfg.output or os.environ.get(OUTPUT_ENV) or "runs"
    path = Path(root) / f"{config_hash(cfg)}-seed{cfg.seed}"
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- building objects from a config ---------------------------------------------

def build_region(cfg, bundle):
    rcfg = cfg.region
    if not rcfg:
        return bundle.default_region
    rcfg = dict(rcfg)
    if "max_gap" in rcfg:
        extra = set(rcfg) - {"max_gap"}
        if extra:
            raise ConfigError(f"region: unknown key(s) {sorted(extra)}", field="region")
        return PhaseGapRegion(bundle.model.dim, float(rcfg["max_gap"]))
    extra = set(rcfg) - {"lo", "hi", "wrap"}
    if extra:
        raise ConfigError(f"region: unknown key(s) {sorted(extra)}", field="region")
    for key in ("lo", "hi"):
        if key not in rcfg:
            raise ConfigError(f"region: missing bounds '{key}'", field=f"region.{key}")
    lo = np.atleast_1d(np.asarray(rcfg["lo"], dtype=float))
    hi = np.atleast_1d(np.asarray(rcfg["hi"], dtype=float))
    if len(lo) != bundle.model.dim or len(hi) != bundle.model.dim:
        raise ConfigError(f"region: bounds must have length {bundle.model.dim}", field="region")
    wrap = rcfg.get("wrap", bundle.model.wrap)
    try:
        return CompactRegion(tuple(lo), tuple(hi), tuple(bool(w) for w in wrap))
    except DiffPosError as err:
        raise ConfigError(f"region: {err}", field="region") from err


def build_objects(cfg):
    if isinstance(cfg.model, list):
        bundle = metzler_linear(cfg.model)
    elif isinstance(cfg.model, str):
        params = dict(cfg.model_params)
        if cfg.model == "kuramoto" and cfg.lambda_param is not None:
            params.setdefault("lambda_param", cfg.lambda_param)
        bundle = build_bundle(cfg.model, params)
    else:
        raise ConfigError("model must be a registry name or a square matrix", field="model")
    dim = bundle.model.dim
    if cfg.cone is None:
        cone = bundle.cone
    elif isinstance(cfg.cone, str):
        cone = build_cone(cfg.cone, dim, {"lambda_param": cfg.lambda_param or 1.0})
    elif isinstance(cfg.cone, list):
        try:
            factory = {"polyhedral": polyhedral_cone, "quadratic": quadratic_cone}[cfg.cone_kind]
        except KeyError:
            raise ConfigError("cone_kind must be 'polyhedral' or 'quadratic'", field="cone_kind") from None
        try:
            cone = factory(cfg.cone, dim=dim)
        except DiffPosError as err:
            raise ConfigError(f"cone: {err}", field="cone") from err
    else:
        raise ConfigError("cone must be a registry name or generator rows", field="cone")
    if cone.dim != dim:
        raise ConfigError(f"cone dimension {cone.dim} does not match model dimension {dim}",
                          field="cone")
    return bundle, cone, build_region(cfg, bundle)


def _settings(cfg):
    return CheckSettings(density=cfg.density, n_directions=cfg.n_directions, tol=cfg.tol,
                         strict_margin=cfg.strict_margin, seed=cfg.seed,
                         assume_invariant=cfg.assume_invariant)


def _write_metadata(run_dir, command, argv):
    write_json(run_dir / "metadata.json", {
        "command": command,
        "argv": list(argv),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    })


def _echo(cfg):
    return {k: v for k, v in dataclasses.asdict(cfg).items() if k != "output"}


def _say(msg):
    print(msg, file=sys.stderr)


# -- subcommands ----------------------------------------------------------------

def cmd_check(cfg, run_dir):
    bundle, cone, region = build_objects(cfg)
    model = bundle.model
    s = _settings(cfg)
    th = cfg.theorem
    if th == "1":
        rep = check_theorem1(model, cone, region, s)
    elif th == "2":
        if cfg.eps is None:
            raise ConfigError("check with theorem '2' needs 'eps'", field="eps")
        rep = check_theorem2(model, cone, region, cfg.T or 1.0, cfg.eps, s)
    elif th == "3":
        rep = check_theorem3(model, cone, region, s)
    elif th == "invariance":
        rep = verify_invariance_along_flow(model, cone, region, T=cfg.T or DEFAULT_T["check"],
                                           h=cfg.h, n_pairs=cfg.n_pairs, seed=cfg.seed)
    else:
        rep = check_forward_invariance(model, region, T=cfg.T or 5.0, h=cfg.h)
    rep.config_echo["run_config"] = _echo(cfg)
    write_json(run_dir / "report.json", rep.to_dict())
    rep.write_margins(run_dir / "margins.csv")
    _say(f"{rep.check}: {rep.verdict} (worst margin {rep.worst_margin:.6g}, "
         f"threshold {rep.threshold:.3g}, {rep.samples_evaluated} samples) -> {run_dir}")
    return EXIT[rep.verdict]


def cmd_simulate(cfg, run_dir):
    bundle, cone, region = build_objects(cfg)
    model = bundle.model
    n = model.dim
    T = cfg.T or DEFAULT_T["simulate"]
    if cfg.ics is not None:
        X0 = np.atleast_2d(np.asarray(cfg.ics, dtype=float))
        if X0.shape[1] != n:
            raise ConfigError(f"ics must have {n} columns", field="ics")
    else:
        X0 = region.sample(np.random.default_rng(cfg.seed), cfg.n_ic or 1)
    header = ["t"] + [f"x_{j + 1}" for j in range(n)]
    if cfg.prolonged:
        header += [f"theta_{j + 1}" for j in range(n)] + ["log_mag"]
        rng = np.random.default_rng(cfg.seed + 1)
        D0 = sample_cone_directions(cone, X0, rng, len(X0))
    files = [open(run_dir / f"trajectory_{k}.csv", "w", newline="") for k in range(len(X0))]
    writers = [csv.writer(fh) for fh in files]
    for w in writers:
        w.writerow(header)
    code = 0
    try:
        if cfg.prolonged:
            for t, x, d, lg in iter_prolonged(model, X0, D0, T, cfg.h, cfg.stride):
                for k, w in enumerate(writers):
                    w.writerow([repr(float(v)) for v in (t, *x[k], *d[k], lg[k])])
        else:
            x0 = wrap_state(X0, model.wrap_mask)
            for t, (x,) in _iterate(lambda y: (model.field(y[0]),), (x0,), T, cfg.h,
                                    model.wrap_mask, cfg.stride):
                for k, w in enumerate(writers):
                    w.writerow([repr(float(v)) for v in (t, *x[k])])
    except DivergenceError as err:
        _say(f"simulation diverged at t={err.time:.6g}; partial trajectories written")
        code = 1
    finally:
        for fh in files:
            fh.close()
    _say(f"wrote {len(X0)} trajectory file(s) to {run_dir}")
    return code


def cmd_hilbert(cfg, run_dir):
    bundle, cone, region = build_objects(cfg)
    T = cfg.T or DEFAULT_T["hilbert"]
    rep = estimate_contraction(bundle.model, cone, region, T=T, h=cfg.h, n_pairs=cfg.n_pairs,
                               seed=cfg.seed)
    rep.config_echo["run_config"] = _echo(cfg)
    write_json(run_dir / "contraction.json", rep.to_dict())
    write_csv(run_dir / "distance.csv", ["t"] + [f"d_{p}" for p in range(rep.distances.shape[1])],
              np.column_stack([rep.times, rep.distances]))
    for w in rep.warnings:
        _say(f"warning: {w}")
    if rep.pairs_used == 0:
        _say("all pairs discarded")
        return 2
    _say(f"fitted rate {rep.fitted_rate:.6g}, r^2 {rep.r_squared:.4f}, "
         f"contracting={rep.contracting} -> {run_dir}")
    return 0 if rep.contracting else 1


def _default_analysis(bundle):
    kind = bundle.expected.get("attractor")
    return {"FixedPoints": "bistable", "LimitCycle": "limit_cycle",
            "Synchronization": "kuramoto"}.get(kind, "bistable")


def cmd_attractor(cfg, run_dir):
    bundle, cone, region = build_objects(cfg)
    analysis = cfg.analysis or _default_analysis(bundle)
    T = cfg.T or DEFAULT_T[analysis]
    s = _settings(cfg)
    if analysis == "bistable":
        rep = detect_bistable_convergence(bundle.model, cone, region, n_ic=cfg.n_ic or 500, T=T,
                                          h=cfg.h, seed=cfg.seed, settings=s)
        rows = np.column_stack([rep.series["x0"], rep.series["final"], rep.series["label"]])
        n = bundle.model.dim
        write_csv(run_dir / "basins.csv",
                  [f"x0_{j + 1}" for j in range(n)] + [f"x_end_{j + 1}" for j in range(n)]
                  + ["equilibrium"], rows)
    elif analysis == "limit_cycle":
        rep = detect_limit_cycle(bundle.model, cone, region, eps=cfg.eps, T=T, h=cfg.h,
                                 n_ic=cfg.n_ic or 10, seed=cfg.seed, settings=s)
        if "orbit" in rep.series:
            n = bundle.model.dim
            write_csv(run_dir / "orbit.csv", ["t"] + [f"x_{j + 1}" for j in range(n)],
                      rep.series["orbit"])
    else:
        if bundle.name != "kuramoto":
            raise ConfigError("analysis 'kuramoto' needs model 'kuramoto'", field="analysis")
        rep = kuramoto_sync_analysis(bundle.model.dim, region, cfg.lambda_param, T=T, h=cfg.h,
                                     n_ic=cfg.n_ic or 50, seed=cfg.seed)
        write_csv(run_dir / "spread.csv", ["t"] + [f"spread_{k}" for k in
                                                   range(rep.series["spread"].shape[1] - 1)],
                  rep.series["spread"])
    rep.config_echo["run_config"] = _echo(cfg)
    write_json(run_dir / "attractor.json", rep.to_dict())
    _say(f"attractor: {rep.kind} (basin fraction {rep.basin_fraction:.3f}; "
         + ", ".join(f"{h}={v}" for h, v in rep.hypotheses_checked) + f") -> {run_dir}")
    return 2 if rep.kind == UNDETERMINED else 0


def cmd_list_models(_args):
    for name, (_, types) in MODELS.items():
        params = ", ".join(f"{k}:{getattr(t, '__name__', 'matrix').lstrip('_')}" for k, t in types.items())
        print(f"{name}({params})")
    print("cones: " + ", ".join(CONES))
    return 0


# -- argument parsing -----------------------------------------------------------

def _parse_kv(items, flag):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"{flag} expects key=value, got {item!r}", field=flag)
        k, v = item.split("=", 1)
        out[k.strip()] = yaml.safe_load(v)
    return out


def _floats(text, flag):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as err:
        raise ConfigError(f"{flag}: expected numbers, got {text!r}", field=flag) from err


def _overrides(args):
    o = {}
    if args.model is not None:
        o["model"] = yaml.safe_load(args.model) if args.model.strip().startswith("[") else args.model
    params = _parse_kv(args.param, "--param")
    if params:
        o["model_params"] = params
    if args.cone is not None:
        o["cone"] = yaml.safe_load(args.cone) if args.cone.strip().startswith("[") else args.cone
    region = {}
    if args.region_lo is not None:
        region["lo"] = _floats(args.region_lo, "--region-lo")
    if args.region_hi is not None:
        region["hi"] = _floats(args.region_hi, "--region-hi")
    if args.region_wrap is not None:
        region["wrap"] = [w.strip().lower() in ("1", "true", "t", "yes")
                          for w in args.region_wrap.split(",")]
    if args.max_gap is not None:
        region["max_gap"] = args.max_gap
    if region:
        o["region"] = region
    for key in ("theorem", "analysis", "density", "tol", "strict_margin", "T", "h", "eps", "seed",
                "n_pairs", "n_ic", "stride", "lambda_param", "output"):
        value = getattr(args, key, None)
        if value is not None:
            o[key] = value
    if getattr(args, "directions", None) is not None:
        o["n_directions"] = args.directions
    if args.assume_invariant:
        o["assume_invariant"] = True
    if getattr(args, "prolonged", False):
        o["prolonged"] = True
    o.update(_parse_kv(args.set, "--set"))
    return o


def build_parser():
    parser = argparse.ArgumentParser(prog="diffpos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"diffpos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML or JSON run configuration")
        p.add_argument("--model", help="registry name or inline matrix, e.g. '[[-1,1],[1,-1]]'")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter")
        p.add_argument("--cone", help="registry cone name or inline generator rows")
        p.add_argument("--region-lo", help="comma-separated lower bounds")
        p.add_argument("--region-hi", help="comma-separated upper bounds")
        p.add_argument("--region-wrap", help="comma-separated wrap flags (true/false)")
        p.add_argument("--max-gap", type=float, help="phase-gap region bound")
        p.add_argument("--density", type=int)
        p.add_argument("--directions", type=int, help="boundary directions per constraint")
        p.add_argument("--tol", type=float)
        p.add_argument("--strict-margin", dest="strict_margin", type=float)
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--h", type=float, help="RK4 step")
        p.add_argument("--eps", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--n-pairs", dest="n_pairs", type=int)
        p.add_argument("--n-ic", dest="n_ic", type=int)
        p.add_argument("--stride", type=int)
        p.add_argument("--lambda-param", dest="lambda_param", type=float)
        p.add_argument("--assume-invariant", action="store_true")
        p.add_argument("--output", help=f"output root (default ${OUTPUT_ENV} or ./runs)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="any config key")
        return p

    p = common(sub.add_parser("check", help="pointwise or trajectory certification"))
    p.add_argument("--theorem", choices=THEOREMS)
    p = common(sub.add_parser("simulate", help="write trajectories as CSV"))
    p.add_argument("--prolonged", action="store_true", help="also integrate a cone tangent")
    common(sub.add_parser("hilbert", help="Hilbert-metric contraction estimate"))
    p = common(sub.add_parser("attractor", help="attractor detection"))
    p.add_argument("--analysis", choices=ANALYSES)
    sub.add_parser("list-models", help="list registered models and cones")
    return parser


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "hilbert": cmd_hilbert,
            "attractor": cmd_attractor}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.command == "list-models":
        return cmd_list_models(args)
    try:
        cfg = load_config(args.config, _overrides(args))
        run_dir = run_directory(cfg)
        _write_metadata(run_dir, args.command, argv)
        return COMMANDS[args.command](cfg, run_dir)
    except ConfigError as err:
        where = f" [{err.field}]" if getattr(err, "field", None) else ""
        _say(f"config error{where}: {err}")
        return EXIT_CONFIG
    except PreconditionError as err:
        # inputs that cannot be checked as configured (e.g. a region that is
        # not forward invariant) are reported like configuration errors
        _say(f"precondition failed: {err}")
        return EXIT_CONFIG
    except DivergenceError as err:
        _say(f"integration diverged: {err}")
        return EXIT[FAIL]


if __name__ == "__main__":
    sys.exit(main())
