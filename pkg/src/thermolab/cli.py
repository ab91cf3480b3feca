"""Command-line entry point: ``thermolab <command> --config run.yaml [flags]``."""

from __future__ import annotations

import argparse
import csv
import datetime
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import complex_transfer as ct
from . import dolgopyat as dg
from . import orbits_zeta as oz
from . import rpf
from . import suspension as su
from .config import RunConfig, parse_config
from .errors import ConfigError, InputError, NumericalError, ThermolabError
from .potentials import as_table

log = logging.getLogger("thermolab")

COMMANDS = ("pressure", "gibbs", "normalize", "scan-b", "contraction", "dolgopyat-check", "iterate",
            "correlate", "decay", "orbits", "zeta", "poc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


@dataclass
class ResultRecord:
    command: str
    config_hash: str
    timestamp: str
    metrics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"command={self.command}", f"config_hash={self.config_hash}", f"timestamp={self.timestamp}"]
        out += [f"{k}={_fmt(v)}" for k, v in self.metrics.items()]
        out += [f"csv={p}" for p in self.artifacts]
        return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+.17g}j"
    return str(v)


def _write_csv(path: str, header: list[str], rows) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _word(w) -> str:
    return "".join(str(int(s)) for s in w)


# ----------------------------------------------------------------- helpers


def _f_table(cfg: RunConfig):
    d = cfg.f.depth if cfg.f.depth is not None else cfg.raw["series_depth"]
    return as_table(cfg.f, cfg.model, d)


def _normalized(cfg: RunConfig, a: float, t: int | None = None):
    t = t or cfg.depth
    f = _f_table(cfg)
    P_f = rpf.solve_P_f(cfg.model, f, cfg.roof_table, max(f.depth, cfg.roof_table.depth, 1))
    return rpf.normalize_potential(cfg.model, f, cfg.roof_table, a, t, a0=max(cfg.dolgopyat.a0, abs(a)), P_f=P_f)


def _grid(spec, n_key="steps"):
    return np.linspace(float(spec["min"]), float(spec["max"]), int(spec[n_key]))


# ----------------------------------------------------------------- commands


def cmd_pressure(cfg, flags, out):
    f = _f_table(cfg)
    t = max(cfg.depth, f.depth - 1)
    data = rpf.rpf(cfg.model, f, t)
    P_f = rpf.solve_P_f(cfg.model, f, cfg.roof_table, max(t, cfg.roof_table.depth))
    rows = [("pressure", data.pressure), ("lambda", data.lam), ("P_f", P_f), ("iterations", data.iterations)]
    path = _write_csv(os.path.join(out, "pressure.csv"), ["quantity", "value"], rows)
    return {"pressure": data.pressure, "lambda": data.lam, "P_f": P_f, "method": data.method}, [path]


def cmd_gibbs(cfg, flags, out):
    n = flags.get("length") or cfg.depth
    f = _f_table(cfg)
    data = rpf.rpf(cfg.model, f, max(cfg.depth, f.depth - 1))
    W = cfg.model.words(n)
    nu = [rpf.gibbs_cylinder_measure(data, tuple(w)) for w in W]
    path = _write_csv(os.path.join(out, "gibbs.csv"), ["word", "nu"], zip((_word(w) for w in W), nu))
    return {"length": n, "total_mass": float(sum(nu))}, [path]


def cmd_normalize(cfg, flags, out):
    a = float(flags["a"]) if flags.get("a") is not None else float(cfg.raw["a"])
    norm = _normalized(cfg, a)
    M = norm.operator()
    err = float(np.max(np.abs(M @ np.ones(M.dim) - 1.0)))
    W = cfg.model.words(norm.fa.depth)
    h = norm.h.on(W[:, : norm.h.depth])
    path = _write_csv(os.path.join(out, "normalize.csv"), ["word", "f_a", "h_a"],
                      zip((_word(w) for w in W), norm.fa.values, h))
    return {"a": a, "P_f": norm.P_f, "lambda_a": norm.lam, "max_abs_M1_minus_1": err}, [path]


def cmd_scan_b(cfg, flags, out):
    g = dict(cfg.grids["b"])
    for k, fk in (("min", "bmin"), ("max", "bmax"), ("steps", "steps")):
        if flags.get(fk) is not None:
            g[k] = flags[fk]
    m_max = int(flags.get("m") or cfg.grids["m_max"])
    norm = _normalized(cfg, float(cfg.raw["a"]))
    rows = []
    for b in _grid(g):
        prof = ct.contraction_profile(ct.transfer_operator(norm, float(b)), m_max)
        rows.append((float(b), prof.rho_hat, prof.norms[-1], m_max, norm.depth))
    path = _write_csv(os.path.join(out, "scan_b.csv"), ["b", "rho_hat", "final_norm", "m_max", "depth"], rows)
    return {"rows": len(rows), "max_rho_hat": max(r[1] for r in rows)}, [path]


def cmd_contraction(cfg, flags, out):
    b = float(flags.get("b") or cfg.raw["dolgopyat"]["b"])
    m_max = int(flags.get("m") or cfg.grids["m_max"])
    norm = _normalized(cfg, float(cfg.raw["a"]))
    prof = ct.contraction_profile(ct.transfer_operator(norm, b), m_max)
    path = _write_csv(os.path.join(out, "contraction.csv"), ["m", "norm", "envelope"], prof.rows)
    return {"b": b, "rho_hat": prof.rho_hat, "log_scale": prof.log_scale}, [path]


def _setup(cfg, flags):
    b = float(flags.get("b") or cfg.raw["dolgopyat"]["b"])
    return dg.setup(cfg.model, _f_table(cfg), cfg.roof_table, float(cfg.raw["a"]), b, cfg.dolgopyat,
                    depth=cfg.raw["depth"])


def cmd_dolgopyat_check(cfg, flags, out):
    S = _setup(cfg, flags)
    n = len(S.model.words(S.depth))
    _, rep = dg.select_J(S, np.ones(n), np.ones(n))
    fam, pairs = S.family, S.pairs
    rows = []
    for m in range(fam.size):
        words = ";".join(f"{_word(p[0])}|{_word(p[1])}" for p in pairs.pairs[m])
        rows.append((m, fam.ell, pairs.separations[m][0], words, rep.cases[m]))
    path = _write_csv(os.path.join(out, "dolgopyat_check.csv"),
                      ["m_index", "ell_b", "delta_hat", "branch_words", "case"], rows)
    return {"b": S.op.b, "depth": S.depth, "ell_b": fam.ell, "family_size": fam.size,
            "failures": len(rep.failures), "bound_ok": rep.bound_ok}, [path]


def cmd_iterate(cfg, flags, out):
    S = _setup(cfg, flags)
    steps = int(flags.get("steps") or cfg.raw["dolgopyat"]["steps"])
    status, witness = "ok", ""
    try:
        traj = dg.dominated_iteration(S, steps)
        rows = traj.rows
    except dg.DominationFailure as exc:
        rows, status, witness = exc.trajectory, "domination_failed", f"step {exc.step} member {exc.witness}"
    path = _write_csv(os.path.join(out, "iterate.csv"), ["m", "integral_H2", "sup_abs_h"], rows)
    ints = [r[1] for r in rows]
    metrics = {"status": status, "steps_completed": len(rows) - 1,
               "nonincreasing": bool(np.all(np.diff(ints) <= 1e-12 * max(ints))) if len(ints) > 1 else True}
    if witness:
        metrics["witness"] = witness
    return metrics, [path]


def _correlations(cfg, flags):
    g = dict(cfg.grids["t"])
    for k, fk in (("min", "tmin"), ("max", "tmax"), ("steps", "tsteps")):
        if flags.get(fk) is not None:
            g[k] = flags[fk]
    model = su.suspension_model(cfg.model, cfg.roof_table, _f_table(cfg), depth=cfg.raw["depth"])
    mc = cfg.raw["montecarlo"]
    method = flags.get("method") or mc["method"]
    samples = int(flags.get("samples") or mc["samples"])
    return su.correlation_series(model, cfg.observable("A"), cfg.observable("B"), _grid(g), method=method,
                                 samples=samples, seed=cfg.seed)


def cmd_correlate(cfg, flags, out):
    pts = _correlations(cfg, flags)
    path = _write_csv(os.path.join(out, "correlate.csv"), ["t", "C(t)", "estimator", "samples"],
                      [(p.t, p.value, p.estimator, p.samples) for p in pts])
    return {"points": len(pts)}, [path]


def cmd_decay(cfg, flags, out):
    pts = _correlations(cfg, flags)
    path = _write_csv(os.path.join(out, "correlate.csv"), ["t", "C(t)", "estimator", "samples"],
                      [(p.t, p.value, p.estimator, p.samples) for p in pts])
    fit = su.decay_fit([(p.t, p.value, 3 * p.stderr) for p in pts])
    return {"c": fit.c, "quality": fit.quality, "used": fit.used}, [path]


def _orbit_table(cfg, n_max):
    return oz.enumerate_primitive_orbits(cfg.model, n_max, cfg.roof_table)


def cmd_orbits(cfg, flags, out):
    n_max = int(flags.get("n_max") or cfg.grids["n_max"])
    table = _orbit_table(cfg, n_max)
    path = _write_csv(os.path.join(out, "orbits.csv"), ["length", "period", "word"],
                      [(len(w), p, _word(w)) for w, p in zip(table.words, table.periods)])
    return {"orbits": len(table), "n_max": n_max, "divisor_identity": oz.divisor_identity(table)}, [path]


def _parse_s(values):
    return [complex(str(v).replace(" ", "")) for v in values]


def cmd_zeta(cfg, flags, out):
    n_max = int(flags.get("n_max") or cfg.grids["zeta_n_max"])
    ss = _parse_s(flags.get("s") or cfg.grids["s"])
    modes = [flags["mode"]] if flags.get("mode") else ["trace-log", "orbit-product"]
    table = _orbit_table(cfg, n_max) if "orbit-product" in modes else None
    rows = []
    for s in ss:
        for mode in modes:
            z = oz.zeta_truncated(cfg.model, cfg.roof_table, s, n_max, mode, table=table)
            rows.append((s.real, s.imag, z.value.real, z.value.imag, z.tail_bound, mode))
    path = _write_csv(os.path.join(out, "zeta.csv"),
                      ["s_re", "s_im", "value_re", "value_im", "tail_bound", "mode"], rows)
    return {"points": len(rows), "n_max": n_max}, [path]


def cmd_poc(cfg, flags, out):
    g = dict(cfg.grids["lambda"])
    if flags.get("lambda_max") is not None:
        g["max"] = flags["lambda_max"]
    if flags.get("lambda_min") is not None:
        g["min"] = flags["lambda_min"]
    lams = np.arange(float(g["min"]), float(g["max"]) + 1e-9, float(g["step"]))
    tau0 = float(cfg.roof_table.values.min())
    n_max = int(flags.get("n_max") or math.ceil(float(g["max"]) / tau0))
    table = _orbit_table(cfg, n_max)
    hT = oz.entropy_hT(cfg.model, cfg.roof_table)
    rows = oz.poc_rows(table, hT, lams)
    path = _write_csv(os.path.join(out, "poc.csv"), ["lambda", "pi", "li", "ratio"], rows)
    return {"h_T": hT, "n_max": n_max, "final_ratio": rows[-1][3]}, [path]


HANDLERS = {"pressure": cmd_pressure, "gibbs": cmd_gibbs, "normalize": cmd_normalize, "scan-b": cmd_scan_b,
            "contraction": cmd_contraction, "dolgopyat-check": cmd_dolgopyat_check, "iterate": cmd_iterate,
            "correlate": cmd_correlate, "decay": cmd_decay, "orbits": cmd_orbits, "zeta": cmd_zeta,
            "poc": cmd_poc}


def run_command(cfg: RunConfig, command: str, flags: dict | None = None) -> ResultRecord:
    """Execute ``command``; writes CSV artifacts and ``<command>.summary`` into the output dir."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    flags = flags or {}
    out = flags.get("output_dir") or cfg.output_dir
    metrics, paths = HANDLERS[command](cfg, flags, out)
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    rec = ResultRecord(command, cfg.hash, stamp, metrics, paths)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{command}.summary"), "w") as fh:
        fh.write("\n".join(rec.lines()) + "\n")
    return rec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermolab", description="Transfer operators, Dolgopyat-type "
                                "contraction checks, suspension correlations and periodic orbit counts.")
    p.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--bmin", type=float)
    p.add_argument("--bmax", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--tsteps", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--method", choices=["auto", "quadrature", "renewal", "montecarlo"])
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--s", action="append", help="complex s, e.g. 1.2 or 1.2+3j (repeatable)")
    p.add_argument("--mode", choices=["trace-log", "orbit-product"])
    p.add_argument("--lambda-max", dest="lambda_max", type=float)
    p.add_argument("--lambda-min", dest="lambda_min", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command not in COMMANDS:
        print(f"error: unknown command {args.command!r}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {"montecarlo.seed": args.seed, "depth": args.depth}
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "verbose")}
    try:
        cfg = parse_config(args.config, overrides)
        rec = run_command(cfg, args.command, flags)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ThermolabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(rec.lines()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
