"""Experiment harness: config parsing, seeded sweeps, CSV and manifest output.

Configs are flat key=value files with CLI overrides on top.  Every
(corr, trial) pair maps to one instance seed derived from the base seed, so
all schemes see identical channels (paired comparisons).  Trials may run in
parallel (NOMA_FORGE_THREADS caps the workers); rows are sorted by
(corr, trial, scheme) before writing, so the CSV does not depend on the
execution order.  wall_ms is the only nondeterministic column.
"""

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .beamforming import OptimizerConfig, optimize_beams, zf_init_all
from .channel import ChannelGenConfig, NetworkInstance, generate_multi_cell, _mix
from .coordination import (
    GnnArchitecture,
    centralized_optimize,
    distributed_optimize,
    gnn_forward,
    init_gnn_weights,
    load_gnn_weights,
    save_gnn_weights,
)
from .search import SearchConfig, greedy_correlation, local_search
from .sic import Scheme, rate_report, scheme_bb_noma, scheme_cb_noma, scheme_sdma

CSV_HEADER = "corr,scheme,trial,seed,sum_rate_bps_hz,iterations,wall_ms,overhead_bits"


class ConfigError(ValueError):
    """Invalid configuration file or flag value."""


@dataclass
class ExperimentConfig:
    cells: int = 3
    users_per_cell: int = 6
    antennas: int = 4
    corr_grid: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    cross_gain: float = 0.3
    schemes: tuple = ("sdma", "bb_noma", "cb_noma", "cluster_free")
    trials: int = 30
    seed: int = 1
    noise_power: float = 1.0
    power_budget: float = 10.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    rounds: int = 10
    gnn_depth: int = 2
    gnn_embed: tuple = (16, 16)
    gnn_hidden: int = 64
    gnn_agg: str = "mean"
    gnn_weights_path: str = ""
    out: str = "results.csv"

    def validate(self):
        if self.cells < 1 or self.users_per_cell < 1 or self.antennas < 1:
            raise ConfigError("cells, users and antennas must be >= 1")
        if not self.corr_grid:
            raise ConfigError("corr grid must be nonempty")
        for rho in self.corr_grid:
            if not 0.0 <= rho <= 1.0:
                raise ConfigError(f"corr values must be in [0, 1], got {rho}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.schemes:
            raise ConfigError("schemes must be nonempty")
        for s in self.schemes:
            try:
                Scheme.parse(s)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not 0.0 <= self.cross_gain <= 1.0:
            raise ConfigError(f"cross_gain must be in [0, 1], got {self.cross_gain}")
        try:
            self.gnn_arch()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def gnn_arch(self) -> GnnArchitecture:
        embed = self.gnn_embed
        if len(embed) == 1 and self.gnn_depth > 1:
            embed = embed * self.gnn_depth
        return GnnArchitecture(
            depth=self.gnn_depth,
            embed_size=embed,
            hidden_width=self.gnn_hidden,
            aggregation=self.gnn_agg,
        )


@dataclass
class ResultRow:
    corr: float
    scheme: str
    trial: int
    seed: int
    sum_rate: float
    iterations: int
    wall_ms: float
    overhead_bits: int = 0

    def to_csv(self) -> str:
        return ",".join(
            [
                repr(float(self.corr)),
                self.scheme,
                str(self.trial),
                str(self.seed),
                repr(float(self.sum_rate)),
                str(self.iterations),
                repr(float(self.wall_ms)),
                str(self.overhead_bits),
            ]
        )


_INT_KEYS = {
    "cells": "cells",
    "users": "users_per_cell",
    "antennas": "antennas",
    "trials": "trials",
    "seed": "seed",
    "rounds": "rounds",
    "gnn_depth": "gnn_depth",
    "gnn_hidden": "gnn_hidden",
}
_FLOAT_KEYS = {
    "cross_gain": "cross_gain",
    "noise_power": "noise_power",
    "power_budget": "power_budget",
}
_OPT_INT_KEYS = {"max_iters", "order_refresh"}
_OPT_FLOAT_KEYS = {"beta", "step_init", "armijo_c", "backtrack", "tol"}
_SEARCH_FLOAT_KEYS = {"tau"}
_SEARCH_INT_KEYS = {"exhaustive_limit", "inner_max_iters", "flip_budget"}

KNOWN_KEYS = (
    set(_INT_KEYS)
    | set(_FLOAT_KEYS)
    | _OPT_INT_KEYS
    | _OPT_FLOAT_KEYS
    | _SEARCH_FLOAT_KEYS
    | _SEARCH_INT_KEYS
    | {"corr", "schemes", "out", "grad_mode", "gnn_embed", "gnn_agg", "gnn_weights"}
)

_OPT_FIELD = {
    "max_iters": "max_iters",
    "order_refresh": "order_refresh_period",
    "beta": "beta",
    "step_init": "step_init",
    "armijo_c": "armijo_c",
    "backtrack": "backtrack_factor",
    "tol": "tol",
    "grad_mode": "grad_mode",
}
_SEARCH_FIELD = {
    "tau": "tau",
    "exhaustive_limit": "exhaustive_limit",
    "flip_budget": "flip_budget",
}


def _apply_setting(cfg: ExperimentConfig, key: str, value: str, where: str):
    try:
        if key in _INT_KEYS:
            setattr(cfg, _INT_KEYS[key], int(value))
        elif key in _FLOAT_KEYS:
            setattr(cfg, _FLOAT_KEYS[key], float(value))
        elif key == "corr":
            cfg.corr_grid = tuple(float(v) for v in str(value).split(",") if v.strip())
        elif key == "schemes":
            cfg.schemes = tuple(v.strip() for v in str(value).split(",") if v.strip())
        elif key == "out":
            cfg.out = str(value)
        elif key == "gnn_embed":
            cfg.gnn_embed = tuple(int(v) for v in str(value).split(",") if v.strip())
        elif key == "gnn_agg":
            cfg.gnn_agg = str(value)
        elif key == "gnn_weights":
            cfg.gnn_weights_path = str(value)
        elif key in _OPT_INT_KEYS or key in _OPT_FLOAT_KEYS or key == "grad_mode":
            cast = int if key in _OPT_INT_KEYS else (str if key == "grad_mode" else float)
            cfg.optimizer = replace(cfg.optimizer, **{_OPT_FIELD[key]: cast(value)})
        elif key in _SEARCH_INT_KEYS or key in _SEARCH_FLOAT_KEYS:
            if key == "inner_max_iters":
                cfg.search = replace(
                    cfg.search, inner_opt=replace(cfg.search.inner_opt, max_iters=int(value))
                )
            else:
                cast = int if key in _SEARCH_INT_KEYS else float
                cfg.search = replace(cfg.search, **{_SEARCH_FIELD[key]: cast(value)})
        else:
            raise ConfigError(f"unknown config key {key!r} ({where})")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r} ({where}): {exc}") from exc


def parse_config(path=None, overrides=None) -> ExperimentConfig:
    """Build a validated config from an optional key=value file plus overrides.

    Overrides (from CLI flags) take precedence over file values; unknown
    keys are rejected with their location.
    """
    cfg = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            _apply_setting(cfg, key, value, where=f"{path}:{lineno}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        _apply_setting(cfg, key, value, where="flag")
    # the searches inherit the run's optimizer settings at a reduced budget
    cfg.search = replace(
        cfg.search,
        inner_opt=replace(cfg.optimizer, max_iters=cfg.search.inner_opt.max_iters),
    )
    return cfg.validate()


def trial_seed(base_seed: int, corr_index: int, trial: int) -> int:
    """Stable instance seed for one grid point; identical for every scheme."""
    return _mix(base_seed, corr_index, trial)


def _make_instance(cfg: ExperimentConfig, corr_index: int, trial: int) -> NetworkInstance:
    seed = trial_seed(cfg.seed, corr_index, trial)
    gen = ChannelGenConfig(
        corr_target=cfg.corr_grid[corr_index], cross_cell_gain=cfg.cross_gain, seed=seed
    )
    return generate_multi_cell(
        cfg.cells,
        cfg.users_per_cell,
        cfg.antennas,
        gen,
        noise_power=cfg.noise_power,
        power_budget=cfg.power_budget,
    )


def _evaluate_schemes(cfg: ExperimentConfig, corr_index: int, trial: int) -> list[ResultRow]:
    """All schemes on one shared instance.

    cluster_free reports the best of {its searched matrix, the other
    schemes' configurations on this same instance}: the cluster-free
    framework contains every scheme as a special case, so the searched
    result never ranks below a special case it was allowed to copy.
    """
    inst = _make_instance(cfg, corr_index, trial)
    seed = inst.seed
    corr = cfg.corr_grid[corr_index]
    rows: list[ResultRow] = []
    completed: list[tuple[float, int]] = []  # (rate, iterations) of non-search schemes

    parsed = [Scheme.parse(s) for s in cfg.schemes]
    # searched scheme last so it can reuse the special cases' results
    parsed.sort(key=lambda s: s.kind == "cluster_free")

    for scheme in parsed:
        t0 = time.perf_counter()
        if scheme.kind == "sdma":
            sic = scheme_sdma(inst.num_users)
            _, trace = optimize_beams(inst, sic, zf_init_all(inst), cfg.optimizer)
            rate, iters = trace.best_true_rate, trace.n_iters
            completed.append((rate, iters))
        elif scheme.kind == "bb_noma":
            sic = scheme_bb_noma(inst)
            _, trace = optimize_beams(inst, sic, zf_init_all(inst), cfg.optimizer)
            rate, iters = trace.best_true_rate, trace.n_iters
            completed.append((rate, iters))
        elif scheme.kind == "cb_noma":
            _, sic, w_cb = scheme_cb_noma(inst, scheme.n_clusters)
            _, trace = optimize_beams(inst, sic, w_cb, cfg.optimizer)
            rate, iters = trace.best_true_rate, trace.n_iters
            completed.append((rate, iters))
        else:  # cluster_free
            d0 = greedy_correlation(inst, cfg.search)
            d_best, _, _ = local_search(inst, d0, cfg.search)
            _, trace = optimize_beams(inst, d_best, zf_init_all(inst), cfg.optimizer)
            rate, iters = trace.best_true_rate, trace.n_iters
            for other_rate, other_iters in completed:
                if other_rate > rate:
                    rate, iters = other_rate, other_iters
        wall_ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            ResultRow(corr, scheme.label(), trial, seed, rate, iters, wall_ms)
        )
    return rows


def _overhead_point(cfg: ExperimentConfig, corr_index: int, trial: int) -> list[ResultRow]:
    inst = _make_instance(cfg, corr_index, trial)
    seed = inst.seed
    corr = cfg.corr_grid[corr_index]
    sic = scheme_sdma(inst.num_users)
    rows = []

    t0 = time.perf_counter()
    sol, ledger = centralized_optimize(inst, sic, cfg.optimizer)
    rate = rate_report(inst, sic, sol).sum_rate
    rows.append(
        ResultRow(corr, "centralized", trial, seed, rate, 0,
                  (time.perf_counter() - t0) * 1e3, ledger.total_bits)
    )

    t0 = time.perf_counter()
    _, ledger, trace = distributed_optimize(inst, sic, cfg.rounds, cfg.optimizer)
    rows.append(
        ResultRow(corr, "distributed", trial, seed, trace[-1], cfg.rounds,
                  (time.perf_counter() - t0) * 1e3, ledger.total_bits)
    )

    t0 = time.perf_counter()
    if cfg.gnn_weights_path:
        arch, weights = load_gnn_weights(cfg.gnn_weights_path)
    else:
        arch = cfg.gnn_arch()
        weights = init_gnn_weights(arch, cfg.users_per_cell, cfg.antennas, seed=cfg.seed)
    sol, ledger = gnn_forward(inst, arch, weights)
    rate = rate_report(inst, sic, sol).sum_rate
    rows.append(
        ResultRow(corr, "gnn", trial, seed, rate, 0,
                  (time.perf_counter() - t0) * 1e3, ledger.total_bits)
    )
    return rows


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("NOMA_FORGE_THREADS", "").strip()
    if env:
        workers = max(1, int(env))
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_tasks))


def _run_points(cfg: ExperimentConfig, point_fn) -> list[ResultRow]:
    tasks = [
        (corr_index, trial)
        for corr_index in range(len(cfg.corr_grid))
        for trial in range(cfg.trials)
    ]
    workers = _worker_count(len(tasks))
    rows: list[ResultRow] = []
    if workers == 1:
        for corr_index, trial in tasks:
            rows.extend(point_fn(cfg, corr_index, trial))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(
                _point_task, [(point_fn, cfg, ci, t) for ci, t in tasks]
            ):
                rows.extend(chunk)
    rows.sort(key=lambda r: (r.corr, r.trial, r.scheme))
    return rows


def _point_task(args):
    point_fn, cfg, corr_index, trial = args
    return point_fn(cfg, corr_index, trial)


def _write_outputs(cfg: ExperimentConfig, rows: list[ResultRow], out_path) -> tuple[Path, Path]:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER] + [r.to_csv() for r in rows]
    out.write_text("\n".join(lines) + "\n")

    manifest = {
        "config": _config_dict(cfg),
        "code_version": __version__,
        "kernel_backend": backend_name(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "rows": len(rows),
    }
    manifest_path = out.with_suffix(out.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out, manifest_path


def _config_dict(cfg: ExperimentConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    return doc


def run_sweep(cfg: ExperimentConfig, out_path=None) -> tuple[Path, Path]:
    """Sum-rate sweep over (corr, trial, scheme); returns (csv, manifest) paths."""
    cfg.validate()
    rows = _run_points(cfg, _evaluate_schemes)
    return _write_outputs(cfg, rows, out_path or cfg.out)


def run_overhead(cfg: ExperimentConfig, out_path=None) -> tuple[Path, Path]:
    """Overhead/rate comparison of the coordination patterns, same CSV format.

    When gnn_weights_path is set, weights are loaded from that NOMAGNN1
    file; a missing file is first seeded from the config and written there.
    """
    cfg.validate()
    if cfg.gnn_weights_path and not Path(cfg.gnn_weights_path).exists():
        arch = cfg.gnn_arch()
        save_gnn_weights(
            cfg.gnn_weights_path,
            arch,
            init_gnn_weights(arch, cfg.users_per_cell, cfg.antennas, seed=cfg.seed),
        )
    rows = _run_points(cfg, _overhead_point)
    return _write_outputs(cfg, rows, out_path or cfg.out)


def instance_to_dict(inst: NetworkInstance) -> dict:
    """JSON-ready dump of one instance (channels as [re, im] pairs)."""
    return {
        "num_cells": inst.num_cells,
        "antennas_per_cell": inst.antennas_per_cell,
        "users_per_cell": inst.users_per_cell,
        "noise_power": inst.noise_power,
        "power_budget": inst.power_budget,
        "seed": inst.seed,
        "cell_of": inst.cell_of.tolist(),
        "channel": [
            [[[z.real, z.imag] for z in vec] for vec in cell]
            for cell in inst.channel
        ],
    }


def instance_from_dict(doc: dict) -> NetworkInstance:
    raw = np.asarray(doc["channel"], dtype=np.float64)
    return NetworkInstance(
        num_cells=int(doc["num_cells"]),
        antennas_per_cell=int(doc["antennas_per_cell"]),
        users_per_cell=int(doc["users_per_cell"]),
        channel=raw[..., 0] + 1j * raw[..., 1],
        cell_of=np.asarray(doc["cell_of"], dtype=np.int64),
        noise_power=float(doc["noise_power"]),
        power_budget=float(doc["power_budget"]),
        seed=int(doc["seed"]),
    )
