"""Configuration-driven experiment runner emitting CSV artifacts.

One study per invocation: a JSON config file names the geometry, mesh levels,
method parameters, problem, and study kind; the runner writes a CSV result
table plus a manifest with the config echo, package versions, and wall times.
CSV output is deterministic: identical configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

import cutpoisson
from cutpoisson.geometry import LevelSetDomain
from cutpoisson import study as study_mod


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "geometry": {"center", "radius", "dirichlet_arcs"},
    "mesh": {"box", "levels", "shift_sweep_count"},
    "params": {"beta", "sigma", "epsilon_rule", "delta_rule"},
    "problem": {"kind", "junction_index"},
    "study": {"kind", "ratios", "eps_factors"},
}
_TOP_LEVEL = set(_SECTIONS) | {"output", "quadrature_tol"}
_STUDY_KINDS = {
    "convergence",
    "regularization",
    "inequalities",
    "cutoff_lemma",
    "condition_sweep",
}


def _check_keys(name, obj, allowed):
    if not isinstance(obj, dict):
        raise ConfigError(f"section '{name}' must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown field '{name}.{unknown[0]}'")


def load_config(path):
    """Parse and validate a config file; raises ConfigError naming bad fields."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    unknown = sorted(set(raw) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown field '{unknown[0]}'")
    for section, allowed in _SECTIONS.items():
        if section in raw:
            _check_keys(section, raw[section], allowed)

    cfg = {
        "geometry": {
            "center": [0.0, 0.0],
            "radius": 0.7,
            "dirichlet_arcs": [[0.0, 2.0 * math.pi]],
        },
        "mesh": {"box": [-1.0, -1.0, 1.0, 1.0], "levels": [8, 16, 32, 64], "shift_sweep_count": 20},
        "params": {
            "beta": 10.0,
            "sigma": 0.1,
            "epsilon_rule": {"kind": "c_h2", "c": 0.1},
            "delta_rule": {"kind": "h"},
        },
        "problem": {"kind": "smooth"},
        "study": {"kind": "convergence"},
        "output": "results",
        "quadrature_tol": 1e-10,
    }
    for section in _SECTIONS:
        cfg[section].update(raw.get(section, {}))
    for key in ("output", "quadrature_tol"):
        if key in raw:
            cfg[key] = raw[key]

    p = cfg["params"]
    if not isinstance(p["beta"], (int, float)) or p["beta"] <= 0.0:
        raise ConfigError(f"params.beta must be positive, got {p['beta']}")
    if not isinstance(p["sigma"], (int, float)) or p["sigma"] < 0.0:
        raise ConfigError(f"params.sigma must be nonnegative, got {p['sigma']}")
    _check_keys("params.epsilon_rule", p["epsilon_rule"], {"kind", "c", "value"})
    if p["epsilon_rule"].get("kind") not in ("fixed", "c_h2"):
        raise ConfigError("params.epsilon_rule.kind must be 'fixed' or 'c_h2'")
    _check_keys("params.delta_rule", p["delta_rule"], {"kind", "value"})
    if p["delta_rule"].get("kind") not in ("h", "fixed"):
        raise ConfigError("params.delta_rule.kind must be 'h' or 'fixed'")
    if cfg["geometry"]["radius"] <= 0.0:
        raise ConfigError("geometry.radius must be positive")
    if cfg["study"]["kind"] not in _STUDY_KINDS:
        raise ConfigError(
            f"study.kind must be one of {sorted(_STUDY_KINDS)}, got {cfg['study']['kind']!r}"
        )
    if cfg["problem"]["kind"] not in ("smooth", "singular"):
        raise ConfigError(
            "problem.kind must be 'smooth' or 'singular' (custom data requires the library API)"
        )
    levels = cfg["mesh"]["levels"]
    if not levels or any(int(n) < 1 for n in levels):
        raise ConfigError("mesh.levels must be positive integers")
    if cfg["quadrature_tol"] <= 0.0:
        raise ConfigError("quadrature_tol must be positive")
    return cfg


def build_domain(cfg):
    g = cfg["geometry"]
    return LevelSetDomain(
        tuple(g["center"]), float(g["radius"]), tuple(tuple(a) for a in g["dirichlet_arcs"])
    )


def build_problem(cfg, domain):
    kind = cfg["problem"]["kind"]
    if kind == "smooth":
        return study_mod.manufactured_smooth(domain)
    return study_mod.manufactured_singular(domain, int(cfg["problem"].get("junction_index", 0)))


def _epsilon_values(cfg, h):
    rule = cfg["params"]["epsilon_rule"]
    if rule["kind"] == "fixed":
        base = float(rule.get("value", 0.0))
        if base <= 0.0:
            raise ConfigError("params.epsilon_rule.value must be positive for 'fixed'")
    else:
        base = float(rule.get("c", 0.1)) * h * h
    return [0.0, base, 2.0 * base, 4.0 * base]


def _fmt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _run_study(cfg, threads):
    """Execute the configured study; returns (csv_name, header, rows, summary)."""
    domain = build_domain(cfg)
    kind = cfg["study"]["kind"]
    box = tuple(cfg["mesh"]["box"])
    levels = [int(n) for n in cfg["mesh"]["levels"]]
    beta = float(cfg["params"]["beta"])
    sigma = float(cfg["params"]["sigma"])
    tol = float(cfg["quadrature_tol"])

    if kind == "convergence":
        problem = build_problem(cfg, domain)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                report = study_mod.run_convergence(
                    problem, levels, beta, sigma, box, tol, level_runner=pool.map
                )
        else:
            report = study_mod.run_convergence(problem, levels, beta, sigma, box, tol)
        header = ["level", "h", "ndof", "energy_err", "sh_norm", "l2_err", "eoc_energy"]
        rows = []
        for i, L in enumerate(report.levels):
            eoc = None if i == 0 else report.eoc_energy[i - 1]
            rows.append([L.n, L.h, L.ndof, L.energy, L.sh, L.l2, eoc])
        summary = {"eoc_energy": report.eoc_energy, "eoc_l2": report.eoc_l2}
        return "convergence.csv", header, rows, summary

    if kind == "regularization":
        problem = build_problem(cfg, domain)
        n = levels[0]
        x0, y0, x1, y1 = box
        h = math.hypot((x1 - x0) / n, (y1 - y0) / n)
        eps_values = _epsilon_values(cfg, h)
        report = study_mod.regularization_study(problem, n, eps_values, beta, sigma, box, tol)
        header = ["eps", "gap"]
        rows = list(zip(report.eps_values, report.gaps))
        return "regularization.csv", header, rows, {"slope": report.slope}

    if kind == "inequalities":
        n = levels[0]
        mesh, topo, dofmap, params, rules = study_mod._discretize(
            domain, n, box, tol, beta=beta, sigma=sigma
        )
        report = study_mod.verify_inequalities(domain, dofmap, rules, params)
        header = ["inequality", "max_constant"]
        rows = [
            ["full_gradient_vs_stabilized", report.full_gradient],
            ["boundary_flux_inverse", report.boundary_flux],
            ["cut_trace", report.cut_trace],
        ]
        return "inequalities.csv", header, rows, {}

    if kind == "cutoff_lemma":
        ratios = [float(r) for r in cfg["study"].get("ratios", [10.0, 100.0, 1000.0])]
        report = study_mod.verify_cutoff_lemma(domain, ratios)
        header = ["ratio", "delta", "epsilon", "integral", "log_bound", "quotient"]
        rows = [
            [r.ratio, r.delta, r.epsilon, r.integral, r.log_bound, r.quotient]
            for r in report.rows
        ]
        summary = {
            "quotient_spread": report.quotient_spread,
            "flagged": report.flagged,
            "model_error": report.model_error,
        }
        return "cutoff_lemma.csv", header, rows, summary

    # condition_sweep
    n = levels[0]
    n_shifts = int(cfg["mesh"]["shift_sweep_count"])
    report = study_mod.condition_sweep(domain, n, n_shifts, beta, sigma, box, tol=1e-8)
    header = [
        "shift_index",
        "shift_x",
        "shift_y",
        "lambda_min_energy",
        "kappa_stabilized",
        "kappa_unstabilized",
    ]
    rows = [
        [i, r.shift[0], r.shift[1], r.lambda_min_energy, r.kappa_stabilized, r.kappa_unstabilized]
        for i, r in enumerate(report.rows)
    ]
    summary = {"kappa_spread": report.kappa_spread, "worst_blowup": report.worst_blowup}
    return "condition_sweep.csv", header, rows, summary


def run(config_path, out_dir=None, threads=1, quiet=False):
    """Execute one configured study and write its artifacts; returns an exit code."""
    t_start = time.perf_counter()
    try:
        cfg = load_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir if out_dir is not None else cfg["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_name, header, rows, summary = _run_study(cfg, threads)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver or quadrature failure with level context
        print(f"error: study failed: {exc}", file=sys.stderr)
        return 1
    _write_csv(out / csv_name, header, rows)
    elapsed = time.perf_counter() - t_start

    manifest = [
        "cutpoisson run manifest",
        f"config file: {config_path}",
        "config:",
        json.dumps(cfg, indent=2, sort_keys=True),
        f"study: {cfg['study']['kind']}",
        f"summary: {json.dumps(summary, sort_keys=True, default=str)}",
        f"versions: cutpoisson {cutpoisson.__version__}, numpy {np.__version__}, "
        f"scipy {scipy.__version__}, python {platform.python_version()}",
        f"threads: {threads}",
        f"wall time: {elapsed:.3f} s",
    ]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    if not quiet:
        print(f"wrote {out / csv_name} and {out / 'manifest.txt'} ({elapsed:.1f} s)")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cutpoisson", description="Cut finite element experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute the study described by a config file")
    run_p.add_argument("config", help="path to the JSON config file")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument("--threads", type=int, default=1, help="parallel level/shift jobs")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, max(1, args.threads), args.quiet)
    return 2


if __name__ == "__main__":
    sys.exit(main())
