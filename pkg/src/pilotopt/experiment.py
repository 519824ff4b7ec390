"""Experiment specs, the run/validate drivers and their file outputs.

A spec is an INI file (``configparser``) or an equivalent JSON object with
the sections ``network``, ``opt``, ``experiment`` and optionally ``sweep`` and
``montecarlo``.  See README.md for the full key list.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .network import NetworkConfig, dbm_to_mw, generate_layout
from .montecarlo import McConfig, verify_closed_form
from .optimize import (OptConfig, OptimizationError, baseline_random, baseline_smart,
                       solve_exhaustive, solve_sca)
from .pilots import EnumerationCapError, PilotAllocation, UnsupportedStructureError
from .se import se_from_sinr

__all__ = [
    "EXIT_OK",
    "EXIT_SOLVER",
    "EXIT_SPEC",
    "EXIT_VALIDATION",
    "ExperimentSpec",
    "SpecError",
    "emit_cdf",
    "load_spec",
    "run_experiment",
    "validate",
]

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

METHODS = ("random", "smart", "exhaustive_pilot_only", "exhaustive_joint", "sca_pilot_only", "sca_joint")
SWEEP_AXES = {"M": "bs_antennas", "K": "users_per_cell", "tau_p": "pilot_len",
              "epsilon": "epsilon", "rho": "rho"}
OUTPUT_ENV = "PILOTOPT_OUT"


class SpecError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid experiment spec:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class MonteCarloSpec:
    realizations: int = 100_000
    seed: int = 0
    modes: tuple[str, ...] = ("ideal", "hardware", "correlated")
    epsilons: tuple[float, ...] = (0.1,)
    rho: float = 0.5
    antennas: int = 20
    instances: int = 1
    audit_runs: int = 5


@dataclass
class ExperimentSpec:
    network: NetworkConfig
    opt: OptConfig
    methods: tuple[str, ...]
    realizations: int = 1
    seed: int = 0
    random_draws: int = 1
    output_dir: str = "results"
    pilot_len_follows_k: bool = True
    sweep: dict[str, list] = field(default_factory=dict)
    mc: MonteCarloSpec | None = None

    def sweep_points(self) -> list[dict]:
        if not self.sweep:
            return [{}]
        axes = sorted(self.sweep)
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.sweep[a] for a in axes))]


# ---------------------------------------------------------------------------
# parsing


def _read_sections(path: str | os.PathLike) -> dict[str, dict[str, str]]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return {sec: {k: _as_text(v) for k, v in body.items()} for sec, body in data.items()}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    return {sec: dict(parser[sec]) for sec in parser.sections()}


def _as_text(value) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


_NETWORK_KEYS = {
    "num_cells": int, "users_per_cell": int, "bs_antennas": int, "pilot_len": int,
    "coherence_len": int, "noise_power": float, "max_pilot_power": float,
    "max_data_power": float, "area_side": float, "min_bs_distance": float, "shadow_std": float,
    "pathloss_intercept": float, "pathloss_exponent_coeff": float,
}
_OPT_KEYS = {
    "objective_mode": str, "epsilon": float, "rho": float, "sca_max_iters": int,
    "sca_rel_tol": float, "init_seed": int, "enumeration_cap": int,
}


def _convert(section: str, key: str, raw: str, kind, errors: list[str]):
    try:
        return kind(raw)
    except ValueError:
        errors.append(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}")
        return None


def load_spec(path: str | os.PathLike) -> ExperimentSpec:
    """Parse and validate a spec, reporting every problem at once."""
    try:
        sections = _read_sections(path)
    except (OSError, configparser.Error, json.JSONDecodeError) as exc:
        raise SpecError([f"cannot read spec: {exc}"]) from exc
    errors: list[str] = []
    known = {"network", "opt", "experiment", "sweep", "montecarlo"}
    for sec in sections:
        if sec not in known:
            errors.append(f"unknown section [{sec}]")

    net_kw = {}
    for key, raw in sections.get("network", {}).items():
        if key == "noise_power_dbm":
            v = _convert("network", key, raw, float, errors)
            if v is not None:
                net_kw["noise_power"] = dbm_to_mw(v)
        elif key in _NETWORK_KEYS:
            v = _convert("network", key, raw, _NETWORK_KEYS[key], errors)
            if v is not None:
                net_kw[key] = v
        else:
            errors.append(f"[network] unknown key {key!r}")
    pilot_follows = "pilot_len" not in net_kw
    if pilot_follows:
        net_kw["pilot_len"] = net_kw.get("users_per_cell", NetworkConfig.users_per_cell)
    network = None
    try:
        network = NetworkConfig(**net_kw)
    except ValueError as exc:
        errors.append(str(exc))

    opt_kw = {}
    for key, raw in sections.get("opt", {}).items():
        if key in _OPT_KEYS:
            v = _convert("opt", key, raw, _OPT_KEYS[key], errors)
            if v is not None:
                opt_kw[key] = v
        else:
            errors.append(f"[opt] unknown key {key!r}")
    opt = None
    try:
        opt = OptConfig(**opt_kw)
    except ValueError as exc:
        errors.append(str(exc))

    exp = sections.get("experiment", {})
    allowed = {"methods", "realizations", "seed", "random_draws", "output_dir"}
    for key in exp:
        if key not in allowed:
            errors.append(f"[experiment] unknown key {key!r}")
    methods = tuple(_split(exp.get("methods", "random, smart, sca_pilot_only, sca_joint")))
    if not methods:
        errors.append("[experiment] methods must not be empty")
    for m in methods:
        if m not in METHODS:
            errors.append(f"[experiment] unknown method {m!r}; choose from {', '.join(METHODS)}")
    realizations = _convert("experiment", "realizations", exp.get("realizations", "1"), int, errors)
    seed = _convert("experiment", "seed", exp.get("seed", "0"), int, errors)
    draws = _convert("experiment", "random_draws", exp.get("random_draws", "1"), int, errors)
    if realizations is not None and realizations < 1:
        errors.append("[experiment] realizations must be >= 1")
    if draws is not None and draws < 1:
        errors.append("[experiment] random_draws must be >= 1")

    sweep = {}
    for key, raw in sections.get("sweep", {}).items():
        if key not in SWEEP_AXES:
            errors.append(f"[sweep] unknown axis {key!r}; choose from {', '.join(SWEEP_AXES)}")
            continue
        kind = float if key in ("epsilon", "rho") else int
        values = [_convert("sweep", key, v, kind, errors) for v in _split(raw)]
        if not values or any(v is None for v in values):
            errors.append(f"[sweep] {key} needs a non-empty list of values")
            continue
        sweep[key] = values

    mc = None
    if "montecarlo" in sections:
        mc = _parse_mc(sections["montecarlo"], errors)

    if errors:
        raise SpecError(errors)
    spec = ExperimentSpec(network=network, opt=opt, methods=methods, realizations=realizations,
                          seed=seed, random_draws=draws, output_dir=exp.get("output_dir", "results"),
                          pilot_len_follows_k=pilot_follows, sweep=sweep, mc=mc)
    point_errors = []
    for point in spec.sweep_points():
        try:
            _point_configs(spec, point)
        except ValueError as exc:
            point_errors.append(f"[sweep] point {point}: {exc}")
    if point_errors:
        raise SpecError(point_errors)
    return spec


def _parse_mc(sec: dict, errors: list[str]) -> MonteCarloSpec:
    kw = {}
    ints = {"realizations", "seed", "antennas", "instances", "audit_runs"}
    for key, raw in sec.items():
        if key in ints:
            v = _convert("montecarlo", key, raw, int, errors)
            if v is not None:
                kw[key] = v
        elif key == "rho":
            v = _convert("montecarlo", key, raw, float, errors)
            if v is not None:
                kw[key] = v
        elif key == "modes":
            kw[key] = tuple(_split(raw))
            for m in kw[key]:
                if m not in ("ideal", "hardware", "correlated"):
                    errors.append(f"[montecarlo] unknown mode {m!r}")
        elif key == "epsilons":
            vals = [_convert("montecarlo", key, v, float, errors) for v in _split(raw)]
            kw[key] = tuple(v for v in vals if v is not None)
        else:
            errors.append(f"[montecarlo] unknown key {key!r}")
    mc = MonteCarloSpec(**kw)
    if mc.realizations < 2 or mc.instances < 1 or mc.antennas < 1 or mc.audit_runs < 0:
        errors.append("[montecarlo] realizations >= 2, instances >= 1, antennas >= 1, audit_runs >= 0")
    return mc


def _point_configs(spec: ExperimentSpec, point: dict) -> tuple[NetworkConfig, OptConfig]:
    net_changes = {SWEEP_AXES[a]: v for a, v in point.items() if a in ("M", "K", "tau_p")}
    opt_changes = {a: v for a, v in point.items() if a in ("epsilon", "rho")}
    if "K" in point and spec.pilot_len_follows_k and "tau_p" not in point:
        net_changes["pilot_len"] = point["K"]
    if opt_changes.get("epsilon") and spec.opt.objective_mode == "ideal":
        opt_changes["objective_mode"] = "hardware"
    return replace(spec.network, **net_changes), replace(spec.opt, **opt_changes)


# ---------------------------------------------------------------------------
# running


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint32)[0])


def _point_label(point: dict) -> str:
    if not point:
        return "base"
    return ";".join(f"{k}={v}" for k, v in sorted(point.items()))


def _run_task(args):
    """One (realization, sweep point): every method, in spec order."""
    spec, r, point = args
    net_cfg, opt = _point_configs(spec, point)
    net = generate_layout(net_cfg, _derived_seed(spec.seed, r))
    label = _point_label(point)
    rows, outcomes = [], []
    for method in spec.methods:
        t0 = time.perf_counter()
        try:
            draws = _run_method(spec, method, net, opt, r)
        except (OptimizationError, UnsupportedStructureError, EnumerationCapError) as exc:
            outcomes.append((method, None, time.perf_counter() - t0, str(exc)))
            continue
        elapsed = time.perf_counter() - t0
        for d, sinr in draws:
            se = se_from_sinr(sinr, net_cfg.pilot_len, net_cfg.coherence_len)
            min_se = float(np.min(se))
            L, K = sinr.shape
            for l in range(L):
                for k in range(K):
                    rows.append((spec.seed, r, d, method, label, l, k, float(sinr[l, k]),
                                 float(se[l, k]), min_se))
            outcomes.append((method, min_se, elapsed / len(draws), None))
    return rows, outcomes


def _run_method(spec: ExperimentSpec, method: str, net, opt: OptConfig, r: int):
    """List of ``(draw index, per-user SINR)``."""
    if method == "random":
        return [(j, baseline_random(net, opt, _derived_seed(spec.seed, r, 1, j)).sinr)
                for j in range(spec.random_draws)]
    if method == "smart":
        return [(0, baseline_smart(net, opt).sinr)]
    power = "pilot_only_full_data" if method.endswith("pilot_only") else "joint_pilot_data"
    cfg = replace(opt, power_mode=power, init_seed=_derived_seed(spec.seed, r, 2, opt.init_seed))
    if method.startswith("exhaustive"):
        return [(0, solve_exhaustive(net, cfg).sinr)]
    return [(0, solve_sca(net, cfg).sinr)]


def emit_cdf(samples) -> str:
    """Empirical CDF as CSV text: ``value, rank / n`` in ascending order."""
    x = np.sort(np.asarray(list(samples), dtype=float))
    if x.size == 0:
        raise ValueError("cannot build a CDF from no samples")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "cdf"])
    n = x.size
    for i, v in enumerate(x, start=1):
        w.writerow([f"{v:.17g}", f"{i / n:.17g}"])
    return buf.getvalue()


def resolve_output_dir(spec_dir: str, override: str | None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ENV) or spec_dir)


def run_experiment(spec_path, seed: int | None = None, threads: int = 1,
                   out: str | None = None) -> tuple[int, Path]:
    """Run every method on every (realization, sweep point) and write
    ``samples.csv``, ``cdf_<method>[_<point>].csv`` and ``summary.json``.

    Returns ``(exit code, output directory)``.
    """
    spec = load_spec(spec_path)
    if seed is not None:
        spec = replace(spec, seed=seed)
    out_dir = resolve_output_dir(spec.output_dir, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = spec.sweep_points()
    tasks = [(spec, r, pt) for pt in points for r in range(spec.realizations)]
    t0 = time.perf_counter()
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    wall = time.perf_counter() - t0

    header = ["seed", "realization", "draw", "method", "sweep_point", "l", "k", "sinr", "se", "min_se"]
    with open(out_dir / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rows, _ in results:
            for row in rows:
                w.writerow(list(row[:7]) + [f"{x:.17g}" for x in row[7:]])

    summary = {"seed": spec.seed, "realizations": spec.realizations,
               "network": spec.network.to_dict(), "opt": spec.opt.to_dict(),
               "averaging": "mean over outer realizations; random assignment also over "
                            f"{spec.random_draws} inner draw(s) per realization",
               "notes": {"smart": "greedy cross-gain heuristic (approximate)"},
               "wall_clock_seconds": wall, "points": {}}
    failures = []
    for pt in points:
        label = _point_label(pt)
        per_method = {m: {"samples": [], "seconds": 0.0, "failures": []} for m in spec.methods}
        for (task_spec, r, task_pt), (_, outcomes) in zip(tasks, results):
            if task_pt != pt:
                continue
            for method, min_se, secs, err in outcomes:
                entry = per_method[method]
                entry["seconds"] += secs
                if err is None:
                    entry["samples"].append(min_se)
                else:
                    entry["failures"].append({"realization": r, "error": err})
                    failures.append((label, method, r, err))
        block = {}
        for method, entry in per_method.items():
            s = entry["samples"]
            block[method] = {
                "n": len(s),
                "mean_min_se": float(np.mean(s)) if s else None,
                "p05_min_se": float(np.percentile(s, 5)) if s else None,
                "wall_clock_seconds": entry["seconds"],
                "failures": entry["failures"],
            }
            if s:
                suffix = "" if not pt else "_" + label.replace(";", "_").replace("=", "")
                (out_dir / f"cdf_{method}{suffix}.csv").write_text(emit_cdf(s))
        summary["points"][label] = block
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return (EXIT_SOLVER if failures else EXIT_OK), out_dir


# ---------------------------------------------------------------------------
# validation


def validate(spec_path, seed: int | None = None, threads: int = 1, out: str | None = None,
             closed_form=None) -> tuple[int, Path]:
    """Closed form vs simulation over every configured mode, plus an SCA
    monotonicity audit.  ``closed_form`` replaces the expression under test
    (negative controls)."""
    spec = load_spec(spec_path)
    if spec.mc is None:
        raise SpecError(["validate needs a [montecarlo] section"])
    mcs = spec.mc
    base_seed = mcs.seed if seed is None else seed
    out_dir = resolve_output_dir(spec.output_dir, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = replace(spec.network, bs_antennas=mcs.antennas)

    z_all = []
    rows = []
    for inst in range(mcs.instances):
        net = generate_layout(cfg, _derived_seed(base_seed, inst))
        rng = np.random.default_rng(_derived_seed(base_seed, inst, 1))
        L, K = cfg.shape
        alloc = PilotAllocation(rng.uniform(0, 1, (L, K, cfg.pilot_len)) * cfg.pilot_caps()[:, :, None])
        data_p = rng.uniform(0, 1, (L, K)) * cfg.data_caps()
        runs = []
        for mode in mcs.modes:
            if mode == "hardware":
                runs += [(mode, eps) for eps in mcs.epsilons]
            else:
                runs.append((mode, 0.0))
        for j, (mode, eps) in enumerate(runs):
            mc = McConfig(n_realizations=mcs.realizations, seed=_derived_seed(base_seed, inst, 2, j),
                          mode=mode, epsilon=eps, rho=mcs.rho, workers=max(threads, 1))
            rep = verify_closed_form(net, alloc, data_p, mc, closed_form=closed_form)
            z_all.extend(np.abs(rep.z).ravel().tolist())
            for l, k, variant, cf, em, se, z in rep.rows():
                rows.append((inst, variant, eps, l, k, cf, em, se, z))

    frac = float(np.mean(np.array(z_all) <= 3.0))
    closed_ok = frac >= 0.95

    audit = []
    opt = replace(spec.opt, objective_mode="ideal")
    for a in range(mcs.audit_runs):
        net = generate_layout(spec.network, _derived_seed(base_seed, 10_000 + a))
        res = solve_sca(net, replace(opt, init_seed=a))
        tr = res.trace
        mono = all(tr[i + 1] >= tr[i] * (1 - 1e-6) for i in range(len(tr) - 1))
        audit.append({"run": a, "monotone": mono, "iterations": len(tr), "xi": res.xi})
    audit_ok = all(x["monotone"] for x in audit)

    with open(out_dir / "validation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "variant", "epsilon", "l", "k", "closed_form", "empirical", "std_err", "z"])
        for inst, variant, eps, l, k, cf, em, se, z in rows:
            w.writerow([inst, variant, f"{eps:.17g}", l, k] + [f"{x:.17g}" for x in (cf, em, se, z)])
    report = {"pass_fraction": frac, "closed_form_pass": closed_ok, "sca_audit": audit,
              "sca_audit_pass": audit_ok, "passed": closed_ok and audit_ok}
    (out_dir / "validation.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return (EXIT_OK if report["passed"] else EXIT_VALIDATION), out_dir
