"""Experiment orchestration.

A single JSON config fully determines every output bit: all randomness is
counter-based off the config seed, realizations fan out over a worker pool
as pure tasks, and the reducer consumes payloads in canonical task order,
so the final report is byte-identical for any worker count.  Records are
streamed to a JSON-lines file as tasks finish (these carry timing and may
arrive in any order); an interrupted run resumes from that file and still
produces the identical report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .disorder import SeedSpec, distribution_from_label, sample_couplings
from .errors import ConfigError, IncompleteRunError, OracleMismatchError
from .exactsolve import (
    BoundaryCondition,
    GibbsSpec,
    antiperiodic_bc,
    edge_correlation,
    free_bc,
    log_partition_enum,
    log_partition_transfer,
    periodic_bc,
    required_edges,
    transfer_supported,
    uniform_fixed_bc,
)
from .fluctuation import (
    BlockConditioning,
    EnsembleSpec,
    block_martingale_report,
    block_martingale_realization,
    bound_check,
    covariance_sample,
    edge_martingale_realization,
    mgf_report_from_values,
    mgf_conditional_mean,
    probe_realization,
    probe_report_from_rows,
    scaling_report_from_values,
    scaling_sub_spec,
    variance_report_from_values,
)
from .interface import region_for_bc
from .lattice import Region, block_partition, interior_edges

KINDS = (
    "fe",
    "domain-wall",
    "ensemble",
    "martingale",
    "edge-martingale",
    "bounds",
    "mgf",
    "probe",
    "scaling",
    "covariance",
    "oracle-verify",
)
SCHEMA_VERSION = 1
WORKERS_ENV = "EAFLUCT_WORKERS"
ORACLE_BC_NAMES = ("free", "periodic", "antiperiodic", "fixed")
ORACLE_LOGZ_TOL = 1e-9
ORACLE_CORR_TOL = 1e-10


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int | None
    # geometry
    box: tuple[int, ...] = (5, 5)
    window: tuple[int, ...] = (3, 3)
    window_sizes: tuple[int, ...] = (2, 3, 4)
    geometries: tuple[tuple[int, ...], ...] = ((2, 2), (2, 3), (3, 3))
    # physics
    beta: float = 1.0
    betas: tuple[float, ...] = ()
    distribution: str = "gaussian(0.0,1.0)"
    bc: str = "free"
    bc_prime: str = "periodic"
    seam_axes: tuple[int, ...] = (0,)
    # sampling
    n: int = 1
    n_outer: int = 50
    bootstrap: int = 1000
    block_side: int = 2
    t_values: tuple[float, ...] = (0.5, 1.0, 2.0)
    epsilons: tuple[float, ...] = (0.005, 0.01, 0.02, 0.05)
    n_observables: int = 2
    noise_tol: float = 1e-10
    # solver
    solver_method: str = "auto"
    enum_cap: int = 24
    transfer_width_cap: int = 12
    # output
    records: str = "records.jsonl"
    report: str = "report.json"
    csv_dir: str = "."


_SECTIONS = {
    "geometry": ("box", "window", "window_sizes", "geometries"),
    "physics": ("beta", "betas", "distribution", "bc", "bc_prime", "seam_axes"),
    "sampling": (
        "n",
        "n_outer",
        "bootstrap",
        "block_side",
        "t_values",
        "epsilons",
        "n_observables",
        "noise_tol",
    ),
    "solver": ("solver_method", "enum_cap", "transfer_width_cap"),
    "output": ("records", "report", "csv_dir"),
}
_SECTION_JSON_NAMES = {"solver_method": "method"}
_INT_FIELDS = ("n", "n_outer", "bootstrap", "block_side", "n_observables",
               "enum_cap", "transfer_width_cap")
_FLOAT_FIELDS = ("beta", "noise_tol")
_INT_TUPLE_FIELDS = ("box", "window", "window_sizes", "seam_axes")


def _pop_known(section: str, data: dict, fields: dict) -> None:
    for name in _SECTIONS[section]:
        json_name = _SECTION_JSON_NAMES.get(name, name)
        if json_name in data:
            raw = data.pop(json_name)
            if isinstance(raw, list):
                if name == "geometries":
                    raw = tuple(tuple(int(x) for x in g) for g in raw)
                elif name in _INT_TUPLE_FIELDS:
                    raw = tuple(int(x) for x in raw)
                else:
                    raw = tuple(float(x) for x in raw)
            elif name in _INT_FIELDS:
                raw = int(raw)
            elif name in _FLOAT_FIELDS:
                raw = float(raw)
            fields[name] = raw
    if data:
        raise ConfigError(f"unknown keys in config section {section!r}: {sorted(data)}")


def parse_config_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported or missing schema_version (expected {SCHEMA_VERSION})")
    kind = data.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
    seed = data.pop("seed", None)
    fields: dict = {}
    for section in _SECTIONS:
        _pop_known(section, dict(data.pop(section, {})), fields)
    if data:
        raise ConfigError(f"unknown top-level config keys: {sorted(data)}")
    cfg = ExperimentConfig(kind=kind, seed=seed, **fields)
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "kind": cfg.kind, "seed": cfg.seed}
    for section, names in _SECTIONS.items():
        body = {}
        for name in names:
            value = getattr(cfg, name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            body[_SECTION_JSON_NAMES.get(name, name)] = value
        out[section] = body
    return out


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_dict(json.load(fh))


def dump_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(
        json.dumps(config_to_dict(cfg), sort_keys=True).encode("utf-8")
    ).hexdigest()


def _bc_from_name(name: str, extents: tuple[int, ...], seam_axes: tuple[int, ...]) -> BoundaryCondition:
    if name == "free":
        return free_bc()
    if name == "periodic":
        return periodic_bc()
    if name == "antiperiodic":
        return antiperiodic_bc(*seam_axes)
    if name in ("fixed", "fixed:+1"):
        return uniform_fixed_bc(Region(extents), +1)
    if name == "fixed:-1":
        return uniform_fixed_bc(Region(extents), -1)
    raise ConfigError(f"unknown boundary condition name {name!r}")


def ensemble_spec_from_config(cfg: ExperimentConfig, beta: float | None = None) -> EnsembleSpec:
    if cfg.seed is None:
        raise ConfigError("a seed is required (no wall-clock seeding)")
    mode = "domain-wall" if cfg.kind == "domain-wall" else "pair"
    if mode == "domain-wall":
        bc, bc_prime = periodic_bc(), antiperiodic_bc(*cfg.seam_axes)
        window = cfg.box
    else:
        bc = _bc_from_name(cfg.bc, cfg.box, cfg.seam_axes)
        bc_prime = _bc_from_name(cfg.bc_prime, cfg.box, cfg.seam_axes)
        window = cfg.window
    return EnsembleSpec(
        dist=distribution_from_label(cfg.distribution),
        box_extents=cfg.box,
        window_extents=window,
        beta=cfg.beta if beta is None else beta,
        bc=bc,
        bc_prime=bc_prime,
        n_realizations=cfg.n,
        master_seed=cfg.seed,
        mode=mode,
        solver=cfg.solver_method,
    )


def validate_config(cfg: ExperimentConfig) -> None:
    if not cfg.beta >= 0 or not math.isfinite(cfg.beta):
        raise ConfigError("beta must be finite and >= 0")
    if any(not (b >= 0 and math.isfinite(b)) for b in cfg.betas):
        raise ConfigError("betas must be finite and >= 0")
    if cfg.n < 1:
        raise ConfigError("n must be >= 1")
    if cfg.n_outer < 2:
        raise ConfigError("n_outer must be >= 2")
    if cfg.bootstrap < 2:
        raise ConfigError("bootstrap resample count must be >= 2")
    if cfg.enum_cap < 1 or cfg.transfer_width_cap < 1:
        raise ConfigError("solver caps must be positive")
    try:
        distribution_from_label(cfg.distribution)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad distribution: {err}") from None
    if cfg.kind == "martingale":
        for e in cfg.window:
            if e % cfg.block_side != 0:
                raise ConfigError(
                    f"block side {cfg.block_side} does not divide window extent {e}"
                )
    if cfg.kind == "scaling" and len(cfg.window_sizes) < 3:
        raise ConfigError("scaling needs at least three window sizes")
    if cfg.kind not in ("fe", "domain-wall", "covariance", "oracle-verify"):
        if cfg.kind in ("ensemble", "martingale", "scaling", "probe", "mgf") and cfg.n < 2:
            raise ConfigError(f"{cfg.kind} needs n >= 2 realizations")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit non-negative integer")
    # pair-mode geometry must leave a margin of at least one
    if cfg.kind not in ("domain-wall", "covariance", "oracle-verify"):
        if any(w + 2 > b for w, b in zip(cfg.window, cfg.box)):
            raise ConfigError("window must fit in the box with margin >= 1")


# ---------------------------------------------------------------------------
# experiment registry: per-kind task count, task body, reducer


def _betas(cfg: ExperimentConfig) -> tuple[float, ...]:
    return cfg.betas or (cfg.beta,)


def task_count(cfg: ExperimentConfig) -> int:
    if cfg.kind == "bounds":
        return cfg.n * len(_betas(cfg))
    if cfg.kind == "scaling":
        return cfg.n * len(cfg.window_sizes)
    if cfg.kind == "oracle-verify":
        return cfg.n * len(cfg.geometries) * len(ORACLE_BC_NAMES) * len(_betas(cfg))
    return cfg.n


def run_task(cfg: ExperimentConfig, task: int) -> dict:
    """Execute one pure task; everything derives from (config, task index)."""
    kind = cfg.kind
    if kind in ("fe", "ensemble"):
        spec = ensemble_spec_from_config(cfg)
        result = spec.f_result(spec.master(task))
        return {"value": result.value, "result": result.to_record()}
    if kind == "domain-wall":
        spec = ensemble_spec_from_config(cfg)
        return {"value": spec.f_value(task)}
    if kind == "martingale":
        spec = ensemble_spec_from_config(cfg)
        partition = block_partition(spec.window_region, cfg.block_side)
        conditioning = BlockConditioning(partition, cfg.n_outer)
        return block_martingale_realization(spec, conditioning, task)
    if kind == "edge-martingale":
        spec = ensemble_spec_from_config(cfg)
        return edge_martingale_realization(spec, task, cfg.n_outer)
    if kind == "bounds":
        spec = ensemble_spec_from_config(cfg, beta=_betas(cfg)[task % len(_betas(cfg))])
        pair = spec.pair_from(spec.master(task))
        report = bound_check(
            pair,
            n_observables=cfg.n_observables,
            seed=cfg.seed,
            method=cfg.solver_method,
        )
        rec = report.to_record()
        rec["beta"] = spec.beta
        return rec
    if kind == "mgf":
        spec = ensemble_spec_from_config(cfg)
        return {"g": mgf_conditional_mean(spec, task, cfg.n_outer)}
    if kind == "probe":
        spec = ensemble_spec_from_config(cfg)
        return {"deltas": probe_realization(spec, task)}
    if kind == "scaling":
        spec = ensemble_spec_from_config(cfg)
        size = cfg.window_sizes[task // cfg.n]
        sub = scaling_sub_spec(spec, size)
        return {"size": size, "value": sub.f_value(task % cfg.n)}
    if kind == "covariance":
        row = covariance_sample(
            cfg.box,
            cfg.beta,
            distribution_from_label(cfg.distribution),
            cfg.seed,
            task,
            enum_cap=cfg.enum_cap,
        )
        return row
    if kind == "oracle-verify":
        return _oracle_task(cfg, task)
    raise ConfigError(f"unknown experiment kind {kind!r}")  # pragma: no cover


def _oracle_task(cfg: ExperimentConfig, task: int) -> dict:
    betas = _betas(cfg)
    n_bc = len(ORACLE_BC_NAMES)
    geom_idx, rest = divmod(task, n_bc * len(betas) * cfg.n)
    bc_idx, rest = divmod(rest, len(betas) * cfg.n)
    beta_idx, _replicate = divmod(rest, cfg.n)
    extents = cfg.geometries[geom_idx]
    bc_name = ORACLE_BC_NAMES[bc_idx]
    beta = betas[beta_idx]
    bc = _bc_from_name(bc_name, extents, cfg.seam_axes)
    region = region_for_bc(extents, bc)
    dist = distribution_from_label(cfg.distribution)
    couplings = sample_couplings(
        dist, required_edges(region, bc), SeedSpec(cfg.seed, task, "oracle")
    )
    spec = GibbsSpec(region, couplings, beta, bc)
    meta = {"extents": list(extents), "bc": bc_name, "beta": beta}
    if region.n_sites > cfg.enum_cap or not transfer_supported(spec, cfg.transfer_width_cap):
        return {"status": "unsupported", **meta}
    logz_enum = log_partition_enum(spec, cap=cfg.enum_cap)
    logz_transfer = log_partition_transfer(spec, width_cap=cfg.transfer_width_cap)
    corr_dev = 0.0
    for e in interior_edges(region):
        ce = edge_correlation(spec, e, method="enum", enum_cap=cfg.enum_cap)
        ct = edge_correlation(spec, e, method="transfer", width_cap=cfg.transfer_width_cap)
        corr_dev = max(corr_dev, abs(ce - ct))
    return {
        "status": "ok",
        "logz_dev": abs(logz_enum - logz_transfer),
        "corr_dev": corr_dev,
        **meta,
    }


def reduce_report(cfg: ExperimentConfig, payloads: list[dict]) -> dict:
    """Aggregate payloads (in canonical task order) into the final summary."""
    kind = cfg.kind
    if kind == "fe":
        values = [p["value"] for p in payloads]
        return {"values": values, "count": len(values)}
    if kind == "domain-wall":
        values = np.array([p["value"] for p in payloads])
        out = {"values": values.tolist(), "count": len(values)}
        if len(values) >= 2:
            out["mean"] = float(values.mean())
            out["variance"] = float(values.var(ddof=1))
        return out
    if kind == "ensemble":
        values = [p["value"] for p in payloads]
        report = variance_report_from_values(values, cfg.seed, cfg.bootstrap)
        return {"values": values, "variance_report": report.to_record()}
    if kind == "martingale":
        spec = ensemble_spec_from_config(cfg)
        partition = block_partition(spec.window_region, cfg.block_side)
        conditioning = BlockConditioning(partition, cfg.n_outer)
        trace, report, details = block_martingale_report(
            spec, conditioning, payloads, cfg.bootstrap
        )
        return {
            "variance_report": report.to_record(),
            "details": details,
            "trace": trace.to_record(),
        }
    if kind == "edge-martingale":
        rows = []
        all_ok = True
        worst_excess = -math.inf
        for p in payloads:
            ys = np.asarray(p["ys"])
            deltas = np.abs(np.diff(ys))
            bounds = np.asarray(p["bounds"])
            sems = np.asarray(p["delta_sem"])
            excess = deltas - (bounds + 3.0 * sems)
            ok = bool(np.all(excess <= 0.0))
            all_ok = all_ok and ok
            worst_excess = max(worst_excess, float(excess.max()))
            rows.append(
                {
                    "index": p["index"],
                    "bound_ok": ok,
                    "max_abs_delta": float(deltas.max()),
                    "min_bound": float(bounds.min()),
                }
            )
        return {
            "instances": rows,
            "all_bounds_ok": all_ok,
            "worst_excess": worst_excess,
            "n_outer": cfg.n_outer,
        }
    if kind == "bounds":
        slacks = [p["slack"] for p in payloads]
        ratio_mins = [min(p["ratio_slacks"]) for p in payloads]
        hist, edges = np.histogram(slacks, bins=20)
        return {
            "count": len(payloads),
            "min_slack": min(slacks),
            "min_ratio_slack": min(ratio_mins),
            "violations": 0,  # bound_check raises on violation
            "histogram": {"bin_edges": edges.tolist(), "counts": hist.tolist()},
            "rows": payloads,
        }
    if kind == "mgf":
        spec = ensemble_spec_from_config(cfg)
        g_values = [p["g"] for p in payloads]
        return mgf_report_from_values(spec, g_values, cfg.t_values, cfg.n_outer, cfg.bootstrap)
    if kind == "probe":
        spec = ensemble_spec_from_config(cfg)
        rows = [p["deltas"] for p in payloads]
        return probe_report_from_rows(spec, rows, cfg.epsilons, cfg.noise_tol, cfg.bootstrap)
    if kind == "scaling":
        spec = ensemble_spec_from_config(cfg)
        value_sets = []
        for s, size in enumerate(cfg.window_sizes):
            value_sets.append(
                [payloads[s * cfg.n + i]["value"] for i in range(cfg.n)]
            )
        return scaling_report_from_values(spec, cfg.window_sizes, value_sets, cfg.bootstrap)
    if kind == "covariance":
        return {
            "n_samples": len(payloads),
            "max_translation_deviation": max(p["translation_deviation"] for p in payloads),
            "max_coupling_deviation": max(p["coupling_deviation"] for p in payloads),
        }
    if kind == "oracle-verify":
        ok_rows = [p for p in payloads if p["status"] == "ok"]
        unsupported = [p for p in payloads if p["status"] == "unsupported"]
        max_logz = max((p["logz_dev"] for p in ok_rows), default=0.0)
        max_corr = max((p["corr_dev"] for p in ok_rows), default=0.0)
        passed = max_logz <= ORACLE_LOGZ_TOL and max_corr <= ORACLE_CORR_TOL
        if not passed:
            raise OracleMismatchError(
                f"solver cross-validation failed: max |dlogZ| = {max_logz:.3e}, "
                f"max correlation deviation = {max_corr:.3e}"
            )
        return {
            "instances": len(payloads),
            "checked": len(ok_rows),
            "unsupported": len(unsupported),
            "max_logz_deviation": max_logz,
            "max_corr_deviation": max_corr,
            "passed": True,
        }
    raise ConfigError(f"unknown experiment kind {kind!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# execution with incremental records and resume


_WORKER_CFG: dict[str, ExperimentConfig] = {}


def _worker(cfg_json: str, task: int) -> tuple[int, dict, float]:
    cfg = _WORKER_CFG.get(cfg_json)
    if cfg is None:
        cfg = parse_config_dict(json.loads(cfg_json))
        _WORKER_CFG[cfg_json] = cfg
    t0 = time.perf_counter()
    payload = run_task(cfg, task)
    return task, payload, time.perf_counter() - t0


def _load_existing_records(path: Path, digest: str) -> dict[int, dict]:
    if not path.exists():
        return {}
    done: dict[int, dict] = {}
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            return {}
        header = json.loads(header_line)
        if header.get("type") != "header" or header.get("config_digest") != digest:
            raise ConfigError(
                f"records file {path} belongs to a different configuration; "
                "refusing to mix runs"
            )
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "record" and rec.get("status") == "ok":
                done[rec["task"]] = rec["payload"]
    return done


def run(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Run the configured experiment; returns (and writes) the final report.

    Partial results are flushed per task; rerunning with the same config
    resumes from the records file and produces the identical report.
    """
    if cfg.seed is None:
        raise ConfigError("a seed is required (no wall-clock seeding)")
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    digest = config_digest(cfg)
    records_path = Path(cfg.records)
    records_path.parent.mkdir(parents=True, exist_ok=True)
    done = _load_existing_records(records_path, digest)
    total = task_count(cfg)
    todo = [t for t in range(total) if t not in done]

    fresh = not records_path.exists() or not done
    mode = "a" if done else "w"
    with open(records_path, mode, encoding="utf-8") as fh:
        if fresh and mode == "w":
            fh.write(
                json.dumps(
                    {
                        "type": "header",
                        "config_digest": digest,
                        "kind": cfg.kind,
                        "version": __version__,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        cfg_json = json.dumps(config_to_dict(cfg), sort_keys=True)

        def record(task: int, payload: dict, elapsed: float) -> None:
            done[task] = payload
            fh.write(
                json.dumps(
                    {
                        "type": "record",
                        "task": task,
                        "status": "ok",
                        "seed": {"master": cfg.seed, "realization": task},
                        "payload": payload,
                        "timing": elapsed,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            fh.flush()

        if workers <= 1:
            for task in todo:
                try:
                    _, payload, elapsed = _worker(cfg_json, task)
                except OracleMismatchError:
                    raise
                except Exception as err:
                    raise type(err)(
                        f"task {task} failed (master seed {cfg.seed}, realization "
                        f"{task}): {err}"
                    ) from err
                record(task, payload, elapsed)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(_worker, cfg_json, t): t for t in todo}
                pending = set(futures)
                while pending:
                    finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        task = futures[fut]
                        try:
                            _, payload, elapsed = fut.result()
                        except OracleMismatchError:
                            raise
                        except Exception as err:
                            raise type(err)(
                                f"task {task} failed (master seed {cfg.seed}, "
                                f"realization {task}): {err}"
                            ) from err
                        record(task, payload, elapsed)

    payloads = [done[t] for t in range(total)]
    report = {
        "kind": cfg.kind,
        "version": __version__,
        "config": config_to_dict(cfg),
        "proxy_note": (
            "states are finite-volume Gibbs proxies selected by deterministic, "
            "coupling-independent boundary conditions; no claim is made that "
            "they represent infinite-volume state sampling"
        ),
        "summary": reduce_report(cfg, payloads),
    }
    report_path = Path(cfg.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# CSV summaries


def _write_csv(path: Path, header: list[str], rows: list[list]) -> str:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


def write_csv_reports(report: dict, out_dir) -> list[str]:
    """Emit the plain-CSV summaries for a completed run's report."""
    kind = report.get("kind")
    summary = report.get("summary")
    if not summary:
        raise IncompleteRunError("report carries no summary; run the experiment first")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    if kind in ("fe", "domain-wall", "ensemble"):
        values = summary.get("values", [])
        if not values:
            raise IncompleteRunError("no recorded values")
        written.append(
            _write_csv(
                out / f"{kind}_values.csv",
                ["realization", "value"],
                [[i, v] for i, v in enumerate(values)],
            )
        )
        if kind == "ensemble":
            rep = summary["variance_report"]
            written.append(
                _write_csv(
                    out / "ensemble_summary.csv",
                    ["n", "f_mean", "f_mean_stderr", "f_variance", "f_variance_stderr"],
                    [[rep["n"], rep["mean"], rep["mean_stderr"], rep["variance"], rep["stderr"]]],
                )
            )
    elif kind == "scaling":
        rows = summary["rows"]
        written.append(
            _write_csv(
                out / "scaling_points.csv",
                [
                    "window_size",
                    "window_sites",
                    "boundary_edges",
                    "variance",
                    "variance_stderr",
                    "log_window_sites",
                    "log_boundary_edges",
                    "log_variance",
                ],
                [
                    [
                        r["window_size"],
                        r["window_sites"],
                        r["boundary_edges"],
                        r["variance"],
                        r["variance_stderr"],
                        math.log(r["window_sites"]),
                        math.log(r["boundary_edges"]),
                        math.log(r["variance"]) if r["variance"] > 0 else "",
                    ]
                    for r in rows
                ],
            )
        )
        fit_rows = [
            [name, f["exponent"], f["ci95"][0], f["ci95"][1], f["intercept"], f["bootstrap_fits"]]
            for name, f in summary.get("fits", {}).items()
        ]
        written.append(
            _write_csv(
                out / "scaling_fit.csv",
                ["predictor", "exponent", "ci95_lo", "ci95_hi", "intercept", "bootstrap_fits"],
                fit_rows,
            )
        )
    elif kind == "bounds":
        written.append(
            _write_csv(
                out / "bounds_slack.csv",
                ["instance", "beta", "f_value", "bound", "slack", "min_ratio_slack"],
                [
                    [i, r["beta"], r["f_value"], r["bound"], r["slack"], r["min_ratio_slack"]]
                    for i, r in enumerate(summary["rows"])
                ],
            )
        )
        hist = summary["histogram"]
        written.append(
            _write_csv(
                out / "bounds_hist.csv",
                ["bin_lo", "bin_hi", "count"],
                [
                    [hist["bin_edges"][i], hist["bin_edges"][i + 1], c]
                    for i, c in enumerate(hist["counts"])
                ],
            )
        )
    elif kind == "probe":
        written.append(
            _write_csv(
                out / "probe_density.csv",
                ["epsilon", "density", "ci95_lo", "ci95_hi"],
                [
                    [r["epsilon"], r["density"], r["ci95"][0], r["ci95"][1]]
                    for r in summary["densities"]
                ],
            )
        )
        written.append(
            _write_csv(
                out / "probe_edges.csv",
                ["edge", "mean_delta", "stderr", "nonzero_fraction"],
                list(
                    map(
                        list,
                        zip(
                            summary["edges"],
                            summary["per_edge_mean"],
                            summary["per_edge_stderr"],
                            summary["per_edge_nonzero_fraction"],
                        ),
                    )
                ),
            )
        )
    elif kind == "mgf":
        written.append(
            _write_csv(
                out / "mgf.csv",
                ["t", "empirical", "stderr", "bound", "bound_normalized_nu", "passed"],
                [
                    [r["t"], r["empirical"], r["stderr"], r["bound"], r["bound_normalized_nu"], r["passed"]]
                    for r in summary["rows"]
                ],
            )
        )
    elif kind == "martingale":
        details = summary["details"]
        written.append(
            _write_csv(
                out / "martingale_blocks.csv",
                ["block", "delta_variance", "conditional_mean_variance", "stderr"],
                [
                    [k, details["var_deltas"][k], details["block_variances"][k], details["block_variance_stderr"][k]]
                    for k in range(len(details["var_deltas"]))
                ],
            )
        )
        written.append(
            _write_csv(
                out / "martingale_summary.csv",
                ["var_f", "sum_var_deltas", "gap", "gap_stderr", "inequality_ok"],
                [
                    [
                        details["var_f"],
                        details["sum_var_deltas"],
                        details["gap"],
                        details["gap_stderr"],
                        details["inequality_ok"],
                    ]
                ],
            )
        )
    elif kind == "edge-martingale":
        written.append(
            _write_csv(
                out / "edge_martingale.csv",
                ["instance", "bound_ok", "max_abs_delta", "min_bound"],
                [
                    [r["index"], r["bound_ok"], r["max_abs_delta"], r["min_bound"]]
                    for r in summary["instances"]
                ],
            )
        )
    elif kind == "covariance":
        written.append(
            _write_csv(
                out / "covariance.csv",
                ["n_samples", "max_translation_deviation", "max_coupling_deviation"],
                [
                    [
                        summary["n_samples"],
                        summary["max_translation_deviation"],
                        summary["max_coupling_deviation"],
                    ]
                ],
            )
        )
    elif kind == "oracle-verify":
        written.append(
            _write_csv(
                out / "oracle_verify.csv",
                ["instances", "checked", "unsupported", "max_logz_deviation", "max_corr_deviation", "passed"],
                [
                    [
                        summary["instances"],
                        summary["checked"],
                        summary["unsupported"],
                        summary["max_logz_deviation"],
                        summary["max_corr_deviation"],
                        summary["passed"],
                    ]
                ],
            )
        )
    else:  # pragma: no cover
        raise IncompleteRunError(f"no CSV emitter for kind {kind!r}")
    return written


def report_from_file(path) -> dict:
    report_path = Path(path)
    if not report_path.exists():
        raise IncompleteRunError(f"no report at {report_path}")
    with open(report_path, encoding="utf-8") as fh:
        return json.load(fh)
