"""
Command-line driver.

    cmspin <scenario> [--config cfg.json] [--out DIR] [--format csv|json]
                      [--seed S] [--threads T] [scenario flags]

Scenarios: spectrum, simulate, converge, viscosity, errorsweep, weaktest.
Every output file starts with a header carrying the library version and
the SHA-256 of the canonical config; CSV headers are ``#`` comment lines,
JSON files carry a ``meta`` object. Failures print one JSON object
``{"error": ..., "message": ...}`` on stderr and exit nonzero (2 for
invalid configuration, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .analysis import (
    convergence_study,
    error_norm_sweep,
    map_ordered,
    weak_residual,
)
from .data import FAMILIES, family_from_dict
from .dynamics import FlowParams, integrate
from .lattice import check_odd, spectrum_exact, spectrum_N
from .spectral import TrigPoly

SCENARIOS = ("spectrum", "simulate", "converge", "viscosity", "errorsweep", "weaktest")
CONFIG_SCHEMA_VERSION = "1"
OUTPUT_SCHEMA_VERSION = "1"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cmspin scenario config",
    "type": "object",
    "required": ["scenario"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": CONFIG_SCHEMA_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "N": {"type": ["integer", "null"], "minimum": 3},
        "Ns": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 3}},
        "data": {
            "type": "object",
            "required": ["family"],
            "properties": {"family": {"enum": sorted(FAMILIES)}},
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "minimum": 0},
                "method": {"enum": ["rk4", "rk4-projected"]},
                "record_every": {"type": "integer", "minimum": 1},
                "allow_unstable": {"type": "boolean"},
            },
        },
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "N_ref": {"type": "integer", "minimum": 3},
        "epsilons": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "out": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
        "seed": {"type": ["integer", "null"], "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": "integer", "minimum": 1},
    },
}

_DEFAULTS = {
    "spectrum": dict(N=5),
    "simulate": dict(N=31, flow=dict(dt=1e-3, t_end=1.0, method="rk4-projected", record_every=10)),
    "converge": dict(Ns=[33, 65, 129, 257], T=1.0, N_ref=1025, flow=dict(dt=1e-3)),
    "viscosity": dict(N=31, epsilons=[1e-1, 1e-2, 1e-3, 0.0], flow=dict(dt=1e-3, t_end=1.0, record_every=10)),
    "errorsweep": dict(Ns=[33, 65, 129, 257], data={"family": "algebraic"},
                       flow=dict(dt=1e-3, t_end=1.0, record_every=50)),
    "weaktest": dict(Ns=[33, 129], flow=dict(dt=1e-3, t_end=0.2, record_every=10)),
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str
    N: Optional[int] = None
    Ns: Optional[list] = None
    data: dict = field(default_factory=lambda: {"family": "tilted"})
    flow: dict = field(default_factory=dict)
    eps: float = 0.1
    T: Optional[float] = None
    N_ref: int = 1025
    epsilons: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 0.0])
    out: str = "out"
    format: str = "csv"
    seed: Optional[int] = None
    threads: int = 1

    @classmethod
    def default(cls, scenario: str) -> "ScenarioConfig":
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        return cls.from_dict({"scenario": scenario, **_DEFAULTS[scenario]})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema_version"] = CONFIG_SCHEMA_VERSION
        return d

    def emit(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config field {where}: {exc.message}") from None
        d = {k: v for k, v in d.items() if k != "schema_version"}
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def sha256(self) -> str:
        # the output location does not affect results
        d = {k: v for k, v in self.to_dict().items() if k != "out"}
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- validation ----------------------------------------------------------
    def validate(self) -> None:
        def odd(N, what):
            try:
                check_odd(N)
            except ValueError:
                raise ConfigError(f"{what} must be an odd integer >= 3, got {N}") from None

        needs_N = self.scenario in ("spectrum", "simulate", "viscosity")
        needs_Ns = self.scenario in ("converge", "errorsweep", "weaktest")
        if needs_N:
            if self.N is None:
                raise ConfigError(f"scenario {self.scenario} requires 'N' (e.g. --N 31)")
            odd(self.N, "N")
        if needs_Ns:
            if not self.Ns or len(self.Ns) < 2:
                raise ConfigError(f"scenario {self.scenario} requires 'Ns' with at least 2 entries")
            for N in self.Ns:
                odd(N, "every entry of Ns")
        if self.scenario == "converge":
            odd(self.N_ref, "N_ref")
            if self.N_ref <= 2 * max(self.Ns):
                raise ConfigError(f"N_ref={self.N_ref} must exceed 2 * max(Ns) = {2 * max(self.Ns)}")
        if self.scenario == "viscosity" and not self.epsilons:
            raise ConfigError("scenario viscosity requires a non-empty 'epsilons' list")
        try:
            self.family()
            self.flow_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def family(self):
        d = dict(self.data)
        if self.seed is not None and "seed" in FAMILIES[d["family"]].__dataclass_fields__:
            d["seed"] = self.seed
        return family_from_dict(d)

    def flow_params(self, **override) -> FlowParams:
        return FlowParams(**{**self.flow, **override})


# ---------------------------------------------------------------------------
# output


def _meta(cfg: ScenarioConfig) -> dict:
    return {"library": "cmspin", "version": __version__, "schema": OUTPUT_SCHEMA_VERSION,
            "config_sha256": cfg.sha256(),
            "scenario": cfg.scenario}


def _header(cfg: ScenarioConfig) -> str:
    return (f"# cmspin {__version__} schema={OUTPUT_SCHEMA_VERSION} scenario={cfg.scenario} "
            f"config_sha256={cfg.sha256()}\n")


def _csv_text(cfg: ScenarioConfig, header: list, rows: list, notes: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg))
    for k, v in (notes or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _write(cfg: ScenarioConfig, stem: str, header: list, rows: list, extra: dict | None = None,
           notes: dict | None = None) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.format == "csv":
        path = os.path.join(cfg.out, stem + ".csv")
        text = _csv_text(cfg, header, rows, notes)
    else:
        path = os.path.join(cfg.out, stem + ".json")
        payload = {"meta": _meta(cfg), "columns": header,
                   "rows": [dict(zip(header, r)) for r in rows]}
        if extra:
            payload.update(extra)
        text = json.dumps(payload, indent=1, sort_keys=True, default=_json_default) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


# ---------------------------------------------------------------------------
# scenarios


def _spectrum(cfg):
    mu = spectrum_N(cfg.N)
    exact = spectrum_exact(cfg.N)
    rows = [[k, float(m), str(e)] for k, (m, e) in enumerate(zip(mu, exact))]
    return [_write(cfg, "spectrum", ["k", "mu", "mu_exact"], rows)]


def _simulate(cfg):
    S0 = cfg.family().sample(cfg.N)
    traj = integrate(S0, cfg.flow_params())
    os.makedirs(cfg.out, exist_ok=True)
    tpath = os.path.join(cfg.out, "trajectory.csv")
    with open(tpath, "w") as fh:
        fh.write(_header(cfg))
        fh.write(traj.to_csv())
    keys = list(traj.diagnostics)
    rows = [[float(t)] + [float(traj.diagnostics[k][i]) for k in keys]
            for i, t in enumerate(traj.times)]
    extra = {"trajectory": traj.diagnostics_json()}
    return [tpath, _write(cfg, "diagnostics", ["t"] + keys, rows, extra)]


def _converge(cfg):
    table = convergence_study(cfg.family(), cfg.Ns, T=cfg.T, N_ref=cfg.N_ref,
                              dt=cfg.flow.get("dt", 1e-3), threads=cfg.threads)
    rows = [[r.N, r.error, r.log_N, r.log_error] for r in table.rows]
    summary = {"slope": table.slope, "reference": table.reference, "T": table.T}
    return [_write(cfg, "convergence", ["N", "error", "log_N", "log_error"], rows,
                   extra=summary, notes=summary)]


def _viscosity(cfg):
    S0 = cfg.family().sample(cfg.N)

    def run(eps):
        method = "rk4"
        return integrate(S0, cfg.flow_params(epsilon=eps, method=method))

    trajs = map_ordered(run, cfg.epsilons, cfg.threads)
    base = None
    for e, tr in zip(cfg.epsilons, trajs):
        if e == 0:
            base = tr
    rows = []
    for e, tr in zip(cfg.epsilons, trajs):
        l2, hh = tr.diag("l2"), tr.diag("hhalf")
        mono = bool(np.all(np.diff(l2) <= 1e-9) and np.all(np.diff(hh) <= 1e-9))
        dist = "" if base is None else float(np.sqrt(np.mean(np.sum((tr.states[-1] - base.states[-1]) ** 2, axis=1))))
        rows.append([float(e), float(l2[-1]), float(hh[-1]), dist, int(mono)])
    header = ["epsilon", "l2_final", "hhalf_final", "l2_distance_to_inviscid", "lyapunov_monotone"]
    return [_write(cfg, "viscosity", header, rows)]


def _errorsweep(cfg):
    f = cfg.flow
    reps = error_norm_sweep(cfg.family(), cfg.Ns, T=f.get("t_end", 1.0), eps=cfg.eps,
                            dt=f.get("dt", 1e-3), record_every=f.get("record_every", 50),
                            threads=cfg.threads)
    rows = [[r.N, r.eps, r.sup_error, r.as_row()["log_N"], r.as_row()["log_error"]] for r in reps]
    return [_write(cfg, "errorsweep", ["N", "eps", "sup_error", "log_N", "log_error"], rows)]


def default_test_functions() -> list:
    """Ten real test functions: ``e_a cos(m theta)``, ``e_a sin(m theta)``."""
    out = []
    for a in range(3):
        for m, kind in ((1, "cos"), (1, "sin"), (2, "cos")):
            out.append(_trig_test(a, m, kind))
    out.append(_trig_test(0, 2, "sin"))
    return out


def _trig_test(axis: int, m: int, kind: str) -> TrigPoly:
    v = np.zeros(3)
    v[axis] = 1.0
    c = np.zeros((2 * m + 1, 3), dtype=complex)
    if kind == "cos":
        c[2 * m], c[0] = v / 2, v / 2
    else:
        c[2 * m], c[0] = v / 2j, -v / 2j
    return TrigPoly(c)


def _weaktest(cfg):
    fam = cfg.family()
    phis = default_test_functions()

    def run(N):
        return weak_residual(integrate(fam.sample(N), cfg.flow_params()), phis)

    reps = map_ordered(run, cfg.Ns, cfg.threads)
    rows = [[r.N, i, float(g)] for r in reps for i, g in enumerate(r.sup_per_test())]
    return [_write(cfg, "weak", ["N", "test_function", "sup_gap"], rows)]


RUNNERS = {
    "spectrum": _spectrum,
    "simulate": _simulate,
    "converge": _converge,
    "viscosity": _viscosity,
    "errorsweep": _errorsweep,
    "weaktest": _weaktest,
}


def run(cfg: ScenarioConfig) -> list[str]:
    """Execute one scenario; returns the written paths."""
    cfg.validate()
    return RUNNERS[cfg.scenario](cfg)


# ---------------------------------------------------------------------------
# argument parsing


def _odd_list(text):
    return [int(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmspin", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"cmspin {__version__}")
    sub = p.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON scenario config")
        s.add_argument("--out", help="output directory")
        s.add_argument("--format", choices=["csv", "json"])
        s.add_argument("--seed", type=int, help="seed for random data families")
        s.add_argument("--threads", type=int)
        s.add_argument("--N", type=int)
        s.add_argument("--Ns", type=_odd_list, help="comma-separated odd lattice sizes")
        s.add_argument("--family", choices=sorted(FAMILIES))
        s.add_argument("--dt", type=float)
        s.add_argument("--t-end", type=float, dest="t_end")
        s.add_argument("--epsilon", type=float, help="viscosity")
        s.add_argument("--method", choices=["rk4", "rk4-projected"])
        s.add_argument("--record-every", type=int, dest="record_every")
        s.add_argument("--eps", type=float, help="Sobolev exponent offset")
        s.add_argument("--T", type=float)
        s.add_argument("--N-ref", type=int, dest="N_ref")
        s.add_argument("--emit-config", action="store_true",
                       help="print the effective config as JSON and exit")
    return p


def config_from_args(args) -> ScenarioConfig:
    if args.config:
        with open(args.config) as fh:
            d = json.loads(fh.read())
        if d.get("scenario", args.scenario) != args.scenario:
            raise ConfigError(f"config scenario {d.get('scenario')!r} does not match {args.scenario!r}")
        d.setdefault("scenario", args.scenario)
    else:
        d = ScenarioConfig.default(args.scenario).to_dict()
    for key in ("out", "format", "seed", "threads", "N", "Ns", "eps", "T", "N_ref"):
        val = getattr(args, key)
        if val is not None:
            d[key] = val
    if args.family:
        d["data"] = {"family": args.family}
    flow = dict(d.get("flow", {}))
    for key in ("dt", "t_end", "epsilon", "method", "record_every"):
        val = getattr(args, key)
        if val is not None:
            flow[key] = val
    d["flow"] = flow
    return ScenarioConfig.from_dict(d)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        return _fail("ConfigError", str(exc), 2)
    if args.emit_config:
        print(cfg.emit())
        return 0
    try:
        paths = run(cfg)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _fail(type(exc).__name__, str(exc), 1)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
