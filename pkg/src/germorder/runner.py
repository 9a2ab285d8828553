"""Run configured experiments and write reports.

The JSON report depends only on (config, seed): wall-clock times go to a
separate ``timing.json`` so reports stay byte-identical across runs.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bpve import check_moment_survival, check_zero_one_survival, simulate_bpve, survival_binary
from .brw import alive_frequency, extinction_vector, fbrw_survival, first_moment_matrix, perron_root, simulate_brw
from .catalog import ExampleOutput, RunOptions, get_example, verdict
from .config import (
    ExperimentConfig,
    Source,
    build_bpve,
    build_brw,
    build_family,
    build_rumor,
)
from .distributions import make_rng
from .orders import FamilyPair, GridSpec, check_pgf_order, find_germ_delta
from .rumor import (
    FIREWORK,
    environment_csv,
    firework_hetero_series,
    firework_homog_series,
    germ_rumor_transfer,
    reach_probability_dp,
    reverse_hetero_checks,
    reverse_homog_W,
    simulate_rumor,
)

SCHEMA_VERSION = 1


def to_jsonable(obj):
    """Plain JSON values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


# ---------------------------------------------------------------------------
# experiment kinds
# ---------------------------------------------------------------------------


def _grid(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(points_per_axis=cfg.points_per_axis, tolerance=cfg.tolerance)


def _order_check(cfg, src):
    mu = build_family(cfg.models["mu"], ("models", "mu"), src)
    nu = build_family(cfg.models["nu"], ("models", "nu"), src)
    pair = FamilyPair(mu, nu)
    grid = _grid(cfg)
    out = ExampleOutput()
    for name, v in (("pgf order mu >= nu", check_pgf_order(pair, grid)),
                    ("germ order mu >= nu", find_germ_delta(pair, grid))):
        out.verdicts.append(verdict(name, v.kind, v.method, {"points_per_axis": cfg.points_per_axis}, v.to_dict()))
    return out


def _brw(cfg, src):
    model = build_brw(cfg.models["model"], ("models", "model"), src)
    start = int(cfg.models["model"].get("start", 0))
    horizon, reps = cfg.horizon or 50, cfg.reps or 10_000
    out = ExampleOutput()
    ev = extinction_vector(model, tol=min(cfg.tolerance, 1e-12))
    out.verdicts.append(verdict("extinction vector", ev.q.tolist(), "FixedPointIteration", {}, ev.to_dict()))
    m = first_moment_matrix(model)
    out.verdicts.append(verdict("Perron root of first moments", perron_root(m), "PowerIteration", {},
                                {"first_moments": m.tolist()}))
    proj = cfg.models["model"].get("projection")
    if proj is not None:
        fv = fbrw_survival(model, proj)
        out.verdicts.append(verdict("projected survival", fv.kind, "PerronRoot", {"projection": proj},
                                    fv.to_dict()))
    est = alive_frequency(model, start, horizon, reps, make_rng(cfg.seed, 1))
    out.monte_carlo.append({"name": "alive at horizon", "horizon": horizon, "seed": cfg.seed, **est.to_dict()})
    if cfg.output.csv:
        traj = simulate_brw(model, start, min(horizon, 50), make_rng(cfg.seed, 2))
        out.tables["trajectory.csv"] = traj.to_csv()
    return out


def _bpve(cfg, src):
    m = cfg.models["model"]
    model = build_bpve(m, ("models", "model"), src)
    horizon, reps = cfg.horizon or 1000, cfg.reps or 10_000
    out = ExampleOutput()
    if "bernoulli" in m:
        sb = survival_binary(model.tail.params[0])
        out.verdicts.append(verdict("survival of the Bernoulli process", sb.kind, sb.method, {}, sb.to_dict()))
    else:
        crit = check_zero_one_survival(model)
        out.verdicts.append(verdict("limsup criterion", crit.kind, crit.method, {}, crit.to_dict()))
        mc = check_moment_survival(model)
        out.verdicts.append(verdict("moment criterion", mc.kind, "MomentSeries", {}, mc.to_dict()))
    est = simulate_bpve(model, horizon, reps, make_rng(cfg.seed, 1), cap=10**4)
    out.monte_carlo.append({"name": "alive at horizon", "horizon": horizon, "seed": cfg.seed, **est.to_dict()})
    return out


def _rumor_series(model, horizon):
    if model.kind == FIREWORK:
        v = firework_homog_series(model, horizon) if model.is_homogeneous else firework_hetero_series(model, horizon)
        return verdict("survival series", v.classification, v.series.method, {"horizon": horizon}, v.to_dict())
    if model.is_homogeneous:
        v = reverse_homog_W(model, horizon)
        return verdict("survival series", v.classification, v.series.method, {"horizon": horizon}, v.to_dict())
    c = reverse_hetero_checks(model, horizon)
    return verdict("survival conditions", c.classification, "ComparisonSeries", {"horizon": horizon}, c.to_dict())


def _rumor(cfg, src):
    model = build_rumor(cfg.models["model"], ("models", "model"), src)
    n, reps = cfg.horizon or 200, cfg.reps or 10_000
    mode = cfg.options.get("mode", "quenched")
    if mode not in ("annealed", "quenched"):
        raise src.error(("options", "mode"), "mode must be 'annealed' or 'quenched'")
    out = ExampleOutput()
    out.verdicts.append(_rumor_series(model, int(cfg.options.get("series_horizon", 2000))))
    if "lower" in cfg.models:
        lower = build_rumor(cfg.models["lower"], ("models", "lower"), src)
        tr = germ_rumor_transfer(model, lower, grid=_grid(cfg))
        out.verdicts.append(verdict("transfer from lower model", tr.kind, "GermTransfer", {}, tr.to_dict()))
    sim = simulate_rumor(model, n, reps, make_rng(cfg.seed, 1), mode=mode, env_rng=make_rng(cfg.seed, 2))
    mc = {"name": f"{mode} reach", "N": n, "seed": cfg.seed, **sim.to_dict()}
    if model.kind == FIREWORK:
        mc["exact"] = reach_probability_dp(model, n, sim.environment)
    out.monte_carlo.append(mc)
    if sim.environment is not None and cfg.output.csv:
        out.tables["environment.csv"] = environment_csv(sim.environment)
    return out


DISPATCH = {"order-check": _order_check, "brw": _brw, "bpve": _bpve, "rumor": _rumor}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, src: Source | None = None) -> tuple[dict, dict, float]:
    """Report, CSV tables and wall-clock seconds for one experiment."""
    src = src or Source("<config>", None)
    t0 = time.perf_counter()
    if cfg.experiment == "named-example":
        ex = get_example(cfg.example)
        result = ex.run(ex, RunOptions(cfg.seed, cfg.reps, cfg.horizon))
        meta = ex.to_dict()
    else:
        result = DISPATCH[cfg.experiment](cfg, src)
        meta = None
    elapsed = time.perf_counter() - t0
    report = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "experiment": cfg.experiment,
        "name": report_name(cfg),
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json"),
        "verdicts": result.verdicts,
        "monte_carlo": result.monte_carlo,
        "tables": sorted(result.tables),
    }
    if meta is not None:
        report["example"] = meta
    return to_jsonable(report), result.tables, elapsed


def report_name(cfg: ExperimentConfig) -> str:
    return cfg.name or cfg.example or cfg.experiment


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(report: dict, tables: dict, elapsed: float, out_dir: str | Path) -> Path:
    """Write report.json, timing.json and CSV tables under out_dir/<name>/."""
    target = Path(out_dir) / report["name"]
    for fname, text in tables.items():
        _atomic_write(target / fname, text)
    _atomic_write(target / "timing.json", json.dumps({"wall_clock_seconds": elapsed}) + "\n")
    _atomic_write(target / "report.json", dumps(report))
    return target


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    updates = {k: v for k, v in kw.items() if v is not None}
    return cfg.model_copy(update=updates) if updates else cfg

