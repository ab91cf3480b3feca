"""Run configuration: YAML ingestion, validation and canonical hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .dolgopyat import DolgopyatParams
from .errors import ConfigError, InputError
from .potentials import CylinderFunction, SeriesPotential, TablePotential, as_table
from .subshift import SubshiftModel
from .suspension import HeightProfile, Observable

DEFAULTS = {
    "model": {"A": None, "theta": 0.5, "M0": None},
    "potential": None,
    "roof": None,
    "series_depth": 8,
    "depth": None,
    "a": 0.0,
    "dolgopyat": {"N": 4, "epsilon1": 1.0, "mu0": 0.05, "E": 10.0, "ell0": 2, "a0": 0.1, "b0": 1.0,
                  "q1": 1, "epsilon3": 0.1, "samples": 32, "b": 20.0, "steps": 20},
    "grids": {
        "b": {"min": 10.0, "max": 100.0, "steps": 10},
        "m_max": 40,
        "t": {"min": 0.0, "max": 30.0, "steps": 61},
        "lambda": {"min": 1.0, "max": 18.0, "step": 0.5},
        "s": [1.2],
        "n_max": 20,
        "zeta_n_max": 25,
    },
    "observables": {
        "A": {"base": None, "profile": {"kind": "bump", "width": 1.0}},
        "B": {"base": None, "profile": {"kind": "bump", "width": 1.0}},
    },
    "montecarlo": {"samples": 20000, "seed": 20240601, "method": "auto"},
    "output": {"dir": "out"},
    "threads": 1,
}

ENV_THREADS = "THERMOLAB_THREADS"
ENV_OUTPUT = "THERMOLAB_OUTPUT_DIR"


def _merge(base, over, path, problems):
    if not isinstance(over, dict):
        return over
    out = copy.deepcopy(base) if isinstance(base, dict) else {}
    for k, v in over.items():
        if isinstance(base, dict) and k not in base:
            problems.append(f"unknown key {path + k}")
            continue
        sub = base.get(k) if isinstance(base, dict) else None
        out[k] = _merge(sub, v, f"{path}{k}.", problems) if isinstance(sub, dict) else v
    return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    model: SubshiftModel
    f: object
    roof: object
    roof_table: CylinderFunction
    depth: int
    dolgopyat: DolgopyatParams
    A_obs: dict
    B_obs: dict
    output_dir: str
    threads: int
    source: str | None = None
    hash: str = field(default="")

    @property
    def grids(self) -> dict:
        return self.raw["grids"]

    @property
    def seed(self) -> int:
        return int(self.raw["montecarlo"]["seed"])

    def observable(self, which: str) -> Observable:
        spec = self.A_obs if which == "A" else self.B_obs
        return build_observable(self.model, spec)


def config_hash(raw: dict) -> str:
    canon = {k: v for k, v in raw.items() if k != "output"}
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _potential(spec, model, series_depth, what, problems):
    if spec is None:
        return None
    if not isinstance(spec, dict) or "kind" not in spec:
        problems.append(f"{what}: expected a mapping with 'kind'")
        return None
    kind = spec["kind"]
    try:
        if kind == "table":
            depth = int(spec.get("depth", 1))
            vals = np.asarray(spec.get("values"), dtype=float)
            return TablePotential(CylinderFunction(model, depth, vals))
        if kind == "series":
            w = spec.get("weights")
            if w is None or len(w) != model.k0:
                problems.append(f"{what}: series weights must have one entry per symbol")
                return None
            return SeriesPotential(float(spec.get("c", 0.0)), tuple(w), float(spec.get("rho", 0.5)))
        if kind == "constant":
            return TablePotential(CylinderFunction(model, 1, np.full(model.k0, float(spec.get("value", 0.0)))))
    except (InputError, TypeError, ValueError) as exc:
        problems.append(f"{what}: {exc}")
        return None
    problems.append(f"{what}: unknown kind {kind!r}")
    return None


def _table(p, model, series_depth):
    d = p.depth if p.depth is not None else series_depth
    return as_table(p, model, d)


def profile_from(spec) -> HeightProfile:
    kind = spec.get("kind", "constant")
    if kind == "bump":
        return HeightProfile.bump(float(spec.get("width", 1.0)), spec.get("scale"))
    if kind == "constant":
        upto = spec.get("upto")
        return HeightProfile.constant(float(spec.get("value", 1.0)), math.inf if upto is None else float(upto))
    if kind == "piecewise":
        return HeightProfile(spec["breaks"], tuple(spec["coeffs"]))
    raise InputError(f"unknown height profile kind {kind!r}")


def build_observable(model: SubshiftModel, spec: dict) -> Observable:
    base = spec.get("base")
    if base is None:
        bf = CylinderFunction(model, 1, np.ones(model.k0))
    else:
        bf = CylinderFunction(model, int(base.get("depth", 1)), np.asarray(base["values"], dtype=float))
    return Observable(bf, profile_from(spec.get("profile") or {"kind": "constant"}))


def validate(data: dict, source: str | None = None) -> RunConfig:
    """Fill defaults, validate, and build the model objects; every violation is collected."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    raw = _merge(DEFAULTS, data, "", problems)
    m = raw["model"]
    A = m.get("A")
    model = None
    if A is None:
        problems.append("model.A is required")
    else:
        arr = None
        try:
            arr = np.array(A, dtype=float)
        except (TypeError, ValueError):
            problems.append("matrix rows must be equal-length numeric lists")
        if arr is not None:
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                problems.append("matrix not square")
            if not np.all((arr == 0) | (arr == 1)):
                problems.append("matrix entries must be 0 or 1")
    theta = m.get("theta")
    try:
        th = float(theta)
        if not 0 < th < 1:
            problems.append("theta must lie in (0, 1)")
    except (TypeError, ValueError):
        problems.append("theta must be a number in (0, 1)")
    if not problems:
        try:
            model = SubshiftModel(np.array(A, dtype=np.int64), float(theta), m.get("M0"))
        except InputError as exc:
            problems.append(str(exc))
    sd = int(raw["series_depth"])
    f = roof = roof_table = None
    if model is not None:
        f = _potential(raw["potential"], model, sd, "potential", problems) if raw["potential"] else None
        if f is None and raw["potential"] is None:
            f = TablePotential(CylinderFunction(model, 1, np.zeros(model.k0)))
        if raw["roof"] is None:
            roof = TablePotential(CylinderFunction(model, 1, np.ones(model.k0)))
        else:
            roof = _potential(raw["roof"], model, sd, "roof", problems)
        if roof is not None:
            roof_table = _table(roof, model, sd)
            if roof_table.values.min() <= 0:
                problems.append("roof must be ≥ τ0 > 0")
    dp = raw["dolgopyat"]
    params = None
    try:
        params = DolgopyatParams(**{k: dp[k] for k in ("N", "epsilon1", "mu0", "E", "ell0", "a0", "b0",
                                                       "q1", "epsilon3", "samples")})
    except (ConfigError, TypeError) as exc:
        problems.append(f"dolgopyat: {exc}")
    if abs(float(raw["a"])) > float(dp["a0"]):
        problems.append("|a| must not exceed dolgopyat.a0")
    g = raw["grids"]
    if int(g["b"]["steps"]) < 1:
        problems.append("grids.b.steps must be >= 1")
    if int(g["t"]["steps"]) < 1:
        problems.append("grids.t.steps must be >= 1")
    if raw["montecarlo"]["seed"] is None:
        problems.append("montecarlo.seed must be explicit")
    if model is not None:
        for which in ("A", "B"):
            try:
                build_observable(model, raw["observables"][which])
            except (InputError, KeyError, TypeError, ValueError) as exc:
                problems.append(f"observables.{which}: {exc}")
    if problems:
        raise ConfigError(problems)
    fd = f.depth if f.depth is not None else sd
    depth = int(raw["depth"]) if raw["depth"] is not None else max(fd, roof_table.depth)
    out_dir = os.environ.get(ENV_OUTPUT) or raw["output"]["dir"]
    threads = int(os.environ.get(ENV_THREADS) or raw["threads"])
    cfg = RunConfig(raw, model, f, roof, roof_table, depth, params, raw["observables"]["A"],
                    raw["observables"]["B"], out_dir, threads, source)
    object.__setattr__(cfg, "hash", config_hash(raw))
    return cfg


def parse_config(path: str, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config file; ``overrides`` are dotted keys applied before validation."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return validate(data, path)
