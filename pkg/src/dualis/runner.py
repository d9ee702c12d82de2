"""Configuration-driven experiment runner.

A single JSON document describes a run: lattice, model family and
parameter specs, sampler mode, sample budget, seed, chain count and output
directory.  The runner realizes the model, dispatches to the selected
estimator or diagnostic, and writes

* ``series.csv``:       running per-site estimate (is/uniform modes),
* ``levels.csv``:        per-level ratio estimates (ais mode),
* ``distribution.csv``:  exact vs empirical dual distribution
                         (gibbs-diagnostic mode),
* ``histogram.csv``:     per-realization estimates (histogram runs),
* ``summary.json``:      final values plus the fully resolved configuration
                         (drawn parameter arrays included), which is itself
                         a valid configuration and replays to identical CSV
                         output.

Parameter specs take one of three JSON forms::

    {"constant": 1.5}        {"uniform": [0.25, 1.5]}        {"values": [...]}

Chains are independent sub-seeded streams whose accumulators are merged in
index order, so the output depends on the chain count but not on how the
chains are executed; with more than one chain they run in a process pool.

Histogram runs draw the model parameters once and repeat the estimate over
``realizations`` independent sampling streams: the spread across rows
measures Monte Carlo error on a fixed disorder instance.

CSV floats carry 9 significant digits; the summary JSON serializes floats
at full precision (round-trip exact).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import chi2 as chi2_dist

from . import __version__ as _version
from .dual import dual_factors
from .estimator import EstimateSeries, checkpoint_grid, run_is, run_uniform
from .lattice import build_lattice
from .models import ModelSpec, sample_params
from .oracle import (
    MAX_DIST_CONFIGS,
    SizeGuardError,
    dump_dual_distribution,
    exact_dual_distribution,
    exact_summary,
)
from .rng import RNG_SCHEME, child_key, generator_from_key, root_key
from .samplers import AnnealSchedule, GibbsState, ais_run, draw_is_sample, gibbs_sweeps

MODES = ("is", "uniform", "gibbs-diagnostic", "ais", "oracle")


class ConfigError(Exception):
    """The configuration document is malformed or inconsistent."""


def _make_executor(chains: int) -> ProcessPoolExecutor | None:
    if chains < 2:
        return None
    return ProcessPoolExecutor(max_workers=min(chains, os.cpu_count() or 1))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see module docstring for JSON)."""

    dims: tuple[int, ...]
    periodic: tuple[bool, ...]
    family: str
    q: int
    J: tuple
    H: tuple
    mode: str
    samples: int
    seed: int
    chains: int = 1
    checkpoint_stride: int | None = None
    ais: AnnealSchedule | None = None
    realizations: int | None = None
    burn_in: int = 1000
    dump_distribution: bool = False
    out_dir: str = "runs"

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.mode == "ais" and self.ais is None:
            raise ConfigError("ais mode requires an 'ais' schedule section")
        if self.realizations is not None:
            if self.mode != "is":
                raise ConfigError("histogram runs (realizations) require mode 'is'")
            if self.realizations < 2:
                raise ConfigError("realizations must be >= 2")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        return self


def _param_from_json(node, key: str):
    if isinstance(node, dict) and len(node) == 1:
        ((kind, value),) = node.items()
        if kind == "constant":
            return ("constant", float(value))
        if kind == "uniform":
            lo, hi = (float(v) for v in value)
            return ("uniform", (lo, hi))
        if kind == "values":
            return ("values", tuple(float(v) for v in value))
    raise ConfigError(
        f"key {key!r}: expected {{'constant': c}}, {{'uniform': [lo, hi]}} or {{'values': [...]}}"
    )


def _param_to_json(spec):
    kind, value = spec
    if kind == "uniform":
        return {"uniform": list(value)}
    if kind == "values":
        return {"values": list(value)}
    return {"constant": value}


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate a configuration from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {
        "dims", "periodic", "family", "q", "J", "H", "mode", "samples", "seed",
        "chains", "checkpoint_stride", "ais", "realizations", "burn_in",
        "dump_distribution", "out_dir",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        dims = tuple(int(d) for d in doc["dims"])
        periodic = tuple(bool(p) for p in doc["periodic"])
        family = str(doc["family"])
        q = int(doc.get("q", 2))
        j_spec = _param_from_json(doc["J"], "J")
        h_spec = _param_from_json(doc["H"], "H")
        mode = str(doc["mode"])
        samples = int(doc["samples"])
        seed = int(doc["seed"])
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    ais = None
    if doc.get("ais") is not None:
        node = doc["ais"]
        try:
            ais = AnnealSchedule(
                exponents=tuple(float(a) for a in node["exponents"]),
                sweeps_per_level=int(node["sweeps_per_level"]),
                samples_at_top=int(node["samples_at_top"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid ais section: {exc}") from exc

    stride = doc.get("checkpoint_stride")
    config = ExperimentConfig(
        dims=dims,
        periodic=periodic,
        family=family,
        q=q,
        J=j_spec,
        H=h_spec,
        mode=mode,
        samples=samples,
        seed=seed,
        chains=int(doc.get("chains", 1)),
        checkpoint_stride=None if stride is None else int(stride),
        ais=ais,
        realizations=None if doc.get("realizations") is None else int(doc["realizations"]),
        burn_in=int(doc.get("burn_in", 1000)),
        dump_distribution=bool(doc.get("dump_distribution", False)),
        out_dir=str(doc.get("out_dir", "runs")),
    )
    return config.validate()


def load_config(path) -> ExperimentConfig:
    """Parse and validate a configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    doc = {
        "dims": list(config.dims),
        "periodic": list(config.periodic),
        "family": config.family,
        "q": config.q,
        "J": _param_to_json(config.J),
        "H": _param_to_json(config.H),
        "mode": config.mode,
        "samples": config.samples,
        "seed": config.seed,
        "chains": config.chains,
        "checkpoint_stride": config.checkpoint_stride,
        "realizations": config.realizations,
        "burn_in": config.burn_in,
        "dump_distribution": config.dump_distribution,
        "out_dir": config.out_dir,
    }
    if config.ais is not None:
        doc["ais"] = {
            "exponents": list(config.ais.exponents),
            "sweeps_per_level": config.ais.sweeps_per_level,
            "samples_at_top": config.ais.samples_at_top,
        }
    else:
        doc["ais"] = None
    return doc


def _realize_param(kind: str, value, size: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "values":
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != (size,):
            raise ConfigError(f"explicit parameter list has length {arr.size}, expected {size}")
        return arr
    if kind == "constant":
        return np.full(size, float(value))
    return rng.uniform(value[0], value[1], size=size)


def realize_model(config: ExperimentConfig, rng: np.random.Generator) -> ModelSpec:
    """Build the lattice and draw (or adopt) the model parameters.

    Couplings are realized before fields, matching
    :func:`dualis.models.sample_params`, so a resolved configuration with
    explicit values replays identically (it consumes no draws).
    """
    topo = build_lattice(config.dims, config.periodic)
    j_kind, j_val = config.J
    h_kind, h_val = config.H
    try:
        if j_kind != "values" and h_kind != "values":
            return sample_params(topo, config.family, config.q, j_val, h_val, rng)
        couplings = _realize_param(j_kind, j_val, topo.n_bonds, rng)
        fields = _realize_param(h_kind, h_val, topo.n_sites, rng)
        return ModelSpec(family=config.family, q=config.q, topo=topo, J=couplings, H=fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolved_config(config: ExperimentConfig, model: ModelSpec) -> dict:
    resolved = replace(
        config,
        J=("values", tuple(float(v) for v in model.J)),
        H=("values", tuple(float(v) for v in model.H)),
    )
    return config_to_dict(resolved)


def _chain_counts(total: int, chains: int) -> list[int]:
    base, extra = divmod(total, chains)
    counts = [base + (1 if c < extra else 0) for c in range(chains)]
    return [c for c in counts if c > 0]


def _chain_task(model: ModelSpec, mode: str, count: int, key: bytes, grid: np.ndarray):
    rng = generator_from_key(key)
    runner = run_is if mode == "is" else run_uniform
    series = runner(model, count, rng, checkpoint_grid_override=grid)
    return series.counts, series.snap_log_sum_w, series.snap_log_sum_w2, series.accumulator


def _run_chains(
    model: ModelSpec,
    mode: str,
    total_samples: int,
    chains: int,
    parent_key: bytes,
    checkpoint_stride: int | None,
    executor: ProcessPoolExecutor | None,
) -> EstimateSeries:
    counts = _chain_counts(total_samples, chains)
    grid = checkpoint_grid(min(counts), checkpoint_stride)
    keys = [child_key(parent_key, "chain", c) for c in range(len(counts))]
    if executor is None:
        results = [_chain_task(model, mode, n, k, grid) for n, k in zip(counts, keys)]
    else:
        futures = [executor.submit(_chain_task, model, mode, n, k, grid) for n, k in zip(counts, keys)]
        results = [f.result() for f in futures]
    series = [
        EstimateSeries(
            n_sites=model.topo.n_sites,
            counts=c,
            snap_log_sum_w=ls,
            snap_log_sum_w2=ls2,
            accumulator=acc,
        )
        for c, ls, ls2, acc in results
    ]
    merged = EstimateSeries.merge(series)
    if merged.counts[-1] != merged.accumulator.count:
        # Uneven chain split: the shared grid stops at the shortest chain,
        # so close the series with the full-count state.
        acc = merged.accumulator
        merged = EstimateSeries(
            n_sites=merged.n_sites,
            counts=np.append(merged.counts, acc.count),
            snap_log_sum_w=np.append(merged.snap_log_sum_w, acc.log_sum_w),
            snap_log_sum_w2=np.append(merged.snap_log_sum_w2, acc.log_sum_w2),
            accumulator=acc,
        )
    return merged


def _write_series_csv(path, series: EstimateSeries) -> None:
    per_site = series.per_site_log_Z()
    per_site_se = series.per_site_se()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "per_site_lnZ_running", "se_running"])
        for idx, value, se in zip(series.counts, per_site, per_site_se):
            writer.writerow([int(idx), f"{value:.9g}", f"{se:.9g}"])


def _write_summary(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _series_summary(series: EstimateSeries) -> dict:
    se_rhat, ess = series.diagnostics()
    return {
        "log_Z": series.final_log_Z,
        "per_site_log_Z": series.final_per_site,
        "se_log_Z": series.final_se_log,
        "se_per_site": series.final_se_per_site,
        "se_mean_weight": se_rhat,
        "effective_sample_size": ess,
        "samples": series.accumulator.count,
    }


def _gibbs_diagnostic(model: ModelSpec, config: ExperimentConfig, rng, out_dir) -> dict:
    total = model.q**model.topo.n_bonds
    if total > MAX_DIST_CONFIGS:
        raise SizeGuardError(
            f"gibbs-diagnostic needs the exact dual distribution ({total} > {MAX_DIST_CONFIGS})"
        )
    factors = dual_factors(model)
    p_exact = exact_dual_distribution(model, factors)

    state = GibbsState.from_bond_values(factors, draw_is_sample(factors, rng))
    if config.burn_in:
        gibbs_sweeps(state, factors, config.burn_in, rng)
    powers = model.q ** np.arange(model.topo.n_bonds, dtype=np.int64)
    hits = np.zeros(total, dtype=np.int64)

    def tally(st):
        hits[int(st.x_a.astype(np.int64) @ powers)] += 1

    gibbs_sweeps(state, factors, config.samples, rng, on_sweep=tally)

    # Pool cells whose expected count is below 5 so the reference chi-square
    # distribution is a sound approximation.
    expected = p_exact * config.samples
    order = np.argsort(expected)[::-1]
    exp_sorted, hit_sorted = expected[order], hits[order]
    keep = exp_sorted >= 5.0
    if keep.sum() < 2:
        raise SizeGuardError("too few sweeps for a goodness-of-fit diagnostic")
    obs = np.append(hit_sorted[keep], hit_sorted[~keep].sum()).astype(np.float64)
    exp = np.append(exp_sorted[keep], exp_sorted[~keep].sum())
    if exp[-1] == 0.0:
        # Zero-probability cells: any visit there means the chain left the
        # support of the target, which fails the diagnostic outright.
        if obs[-1] > 0:
            obs[-1] = np.inf
        else:
            obs, exp = obs[:-1], exp[:-1]
    stat = float(((obs - exp) ** 2 / exp).sum()) if np.all(np.isfinite(obs)) else math.inf
    dof = len(exp) - 1
    critical = float(chi2_dist.ppf(0.999, dof))

    with open(out_dir / "distribution.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_index", "p_exact", "p_empirical"])
        for i in range(total):
            writer.writerow([i, f"{p_exact[i]:.9g}", f"{hits[i] / config.samples:.9g}"])

    return {
        "sweeps": config.samples,
        "burn_in": config.burn_in,
        "gof_statistic": stat,
        "gof_dof": dof,
        "gof_critical_0.999": critical,
        "gof_below_critical": bool(stat < critical),
        "cells": int(total),
        "cells_pooled": int((~keep).sum()),
    }


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Execute one configured run and write its outputs.

    Returns the summary document (also written to ``summary.json``).
    """
    config.validate()
    if config.realizations is not None:
        return run_histogram(config, out_dir=out_dir)

    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    root = root_key(config.seed)
    model = realize_model(config, generator_from_key(child_key(root, "params")))
    summary: dict = {
        "mode": config.mode,
        "seed": config.seed,
        "rng_scheme": RNG_SCHEME,
        "dualis_version": _version,
        "config_resolved": _resolved_config(config, model),
    }

    if config.mode in ("is", "uniform"):
        executor = _make_executor(config.chains)
        try:
            series = _run_chains(
                model, config.mode, config.samples, config.chains,
                root, config.checkpoint_stride, executor,
            )
        finally:
            if executor is not None:
                executor.shutdown()
        _write_series_csv(out / "series.csv", series)
        summary["final"] = _series_summary(series)
    elif config.mode == "oracle":
        result = exact_summary(model)
        if config.dump_distribution:
            dump_dual_distribution(model, out / "distribution.csv")
        summary["final"] = {
            "log_Z": result.log_Z,
            "log_Z_dual": result.log_Z_dual,
            "per_site_log_Z": result.log_Z / model.topo.n_sites,
            "log_duality_ratio": result.log_duality_ratio,
            "log_duality_expected": 2.0 * model.topo.n_bonds * math.log(model.q),
        }
    elif config.mode == "ais":
        result = ais_run(model, config.ais, generator_from_key(child_key(root, "ais")))
        with open(out / "levels.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["alpha_low", "alpha_high", "log_ratio", "se_log"])
            for level in result.levels:
                writer.writerow([
                    f"{level.alpha_low:.9g}", f"{level.alpha_high:.9g}",
                    f"{level.log_ratio:.9g}", f"{level.se_log:.9g}",
                ])
        summary["final"] = {
            "log_Z": result.log_Z,
            "log_Z_dual": result.log_Z_dual,
            "per_site_log_Z": result.per_site,
            "se_log_Z": result.se_log,
            "top_se_log": result.top_se_log,
            "top_effective_sample_size": result.top_ess,
        }
    else:  # gibbs-diagnostic
        summary["final"] = _gibbs_diagnostic(
            model, config, generator_from_key(child_key(root, "gibbs")), out
        )

    summary["wall_time_seconds"] = time.perf_counter() - started
    _write_summary(out / "summary.json", summary)
    return summary


def run_histogram(config: ExperimentConfig, out_dir=None) -> dict:
    """Repeat the importance-sampling estimate over independent streams.

    The model parameters are drawn once from the configured specs; each of
    the ``realizations`` rows is an independent estimate of the same
    instance, so the cross-row spread is pure Monte Carlo error.
    """
    config.validate()
    if config.realizations is None:
        raise ConfigError("histogram runs need a realizations count")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    root = root_key(config.seed)
    model = realize_model(config, generator_from_key(child_key(root, "params")))

    executor = _make_executor(config.chains)
    values = np.empty(config.realizations)
    errors = np.empty(config.realizations)
    try:
        for r in range(config.realizations):
            series = _run_chains(
                model, "is", config.samples, config.chains,
                child_key(root, "realization", r), config.checkpoint_stride, executor,
            )
            values[r] = series.final_per_site
            errors[r] = series.final_se_per_site
    finally:
        if executor is not None:
            executor.shutdown()

    with open(out / "histogram.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["realization", "per_site_lnZ", "se_per_site"])
        for r in range(config.realizations):
            writer.writerow([r, f"{values[r]:.9g}", f"{errors[r]:.9g}"])

    summary = {
        "mode": "is",
        "realizations": config.realizations,
        "seed": config.seed,
        "rng_scheme": RNG_SCHEME,
        "dualis_version": _version,
        "config_resolved": _resolved_config(config, model),
        "final": {
            "mean_per_site_log_Z": float(values.mean()),
            "std_per_site_log_Z": float(values.std(ddof=1)),
            "min_per_site_log_Z": float(values.min()),
            "max_per_site_log_Z": float(values.max()),
            "samples_per_realization": config.samples,
        },
        "wall_time_seconds": time.perf_counter() - started,
    }
    _write_summary(out / "summary.json", summary)
    return summary
