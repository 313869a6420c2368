"""Command-line front end.

Subcommands: gen (dump an instance), eval (one scheme on one instance),
opt (optimize beams for a fixed SIC matrix), search (SIC-matrix search),
sweep (rate-vs-correlation experiment) and overhead (coordination-pattern
comparison).  Exit codes: 0 success, 2 config error, 1 runtime error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelGenConfig, generate_multi_cell
from .beamforming import optimize_beams, zf_init_all
from .harness import (
    ConfigError,
    instance_from_dict,
    instance_to_dict,
    parse_config,
    run_overhead,
    run_sweep,
)
from .search import exhaustive_search, greedy_correlation, local_search
from .sic import (
    Scheme,
    rate_report,
    scheme_bb_noma,
    scheme_cb_noma,
    scheme_sdma,
)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--out", metavar="PATH", help="output path")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--corr", help="comma list of correlation values")
    p.add_argument("--schemes", help="comma list of schemes")
    p.add_argument("--cells", type=int, help="number of BSs")
    p.add_argument("--users", type=int, help="users per cell")
    p.add_argument("--antennas", type=int, help="antennas per BS")
    p.add_argument("--rounds", type=int, help="distributed exchange rounds")
    p.add_argument("--gnn-depth", type=int, dest="gnn_depth", help="GNN layers")
    p.add_argument("--gnn-embed", dest="gnn_embed", help="message embedding size(s)")
    p.add_argument(
        "--gnn-weights", dest="gnn_weights", metavar="PATH",
        help="NOMAGNN1 weights file (created from the config when missing)",
    )


_OVERRIDE_KEYS = (
    "seed",
    "trials",
    "corr",
    "schemes",
    "cells",
    "users",
    "antennas",
    "rounds",
    "gnn_depth",
    "gnn_embed",
    "gnn_weights",
    "out",
)


def _config_from_args(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    return parse_config(args.config, overrides)


def _instance_from_args(args, cfg):
    if getattr(args, "infile", None):
        return instance_from_dict(json.loads(Path(args.infile).read_text()))
    gen = ChannelGenConfig(
        corr_target=cfg.corr_grid[0], cross_cell_gain=cfg.cross_gain, seed=cfg.seed
    )
    return generate_multi_cell(
        cfg.cells,
        cfg.users_per_cell,
        cfg.antennas,
        gen,
        noise_power=cfg.noise_power,
        power_budget=cfg.power_budget,
    )


def _build_scheme(inst, scheme: Scheme):
    """SIC matrix plus construction beams for one scheme tag."""
    if scheme.kind == "sdma":
        return scheme_sdma(inst.num_users), zf_init_all(inst)
    if scheme.kind == "bb_noma":
        return scheme_bb_noma(inst), zf_init_all(inst)
    if scheme.kind == "cb_noma":
        _, sic, sol = scheme_cb_noma(inst, scheme.n_clusters)
        return sic, sol
    return greedy_correlation(inst), zf_init_all(inst)


def _beams_to_json(sol):
    return [[[z.real, z.imag] for z in row] for row in np.asarray(sol.w)]


def _cmd_gen(args):
    cfg = _config_from_args(args)
    inst = _instance_from_args(args, cfg)
    doc = json.dumps(instance_to_dict(inst), indent=1)
    if args.out:
        Path(args.out).write_text(doc)
        print(f"wrote instance to {args.out}")
    else:
        print(doc)
    return 0


def _cmd_eval(args):
    cfg = _config_from_args(args)
    inst = _instance_from_args(args, cfg)
    scheme = Scheme.parse(cfg.schemes[0])
    sic, sol = _build_scheme(inst, scheme)
    report = rate_report(inst, sic, sol)
    print(f"scheme={scheme.label()} sum_rate={report.sum_rate:.6f} bit/s/Hz")
    for u, r in enumerate(report.achievable_rate):
        print(f"  user {u}: {r:.6f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "scheme": scheme.label(),
                    "sum_rate_bps_hz": report.sum_rate,
                    "achievable_rate": report.achievable_rate.tolist(),
                    "order": report.order,
                },
                indent=1,
            )
        )
    return 0


def _cmd_opt(args):
    cfg = _config_from_args(args)
    inst = _instance_from_args(args, cfg)
    scheme = Scheme.parse(cfg.schemes[0])
    sic, sol0 = _build_scheme(inst, scheme)
    before = rate_report(inst, sic, sol0).sum_rate
    sol, trace = optimize_beams(inst, sic, sol0, cfg.optimizer)
    print(
        f"scheme={scheme.label()} sum_rate {before:.6f} -> {trace.best_true_rate:.6f} "
        f"bit/s/Hz in {trace.n_iters} iterations"
    )
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "scheme": scheme.label(),
                    "sum_rate_bps_hz": trace.best_true_rate,
                    "iterations": trace.n_iters,
                    "beams": _beams_to_json(sol),
                },
                indent=1,
            )
        )
    return 0


def _cmd_search(args):
    cfg = _config_from_args(args)
    inst = _instance_from_args(args, cfg)
    if args.strategy == "greedy":
        sic = greedy_correlation(inst, cfg.search)
        sol, trace = optimize_beams(inst, sic, zf_init_all(inst), cfg.search.inner_opt)
        rate = trace.best_true_rate
    elif args.strategy == "exhaustive":
        sic, sol, rate = exhaustive_search(inst, cfg.search)
    else:
        sic, sol, rate = local_search(inst, greedy_correlation(inst, cfg.search), cfg.search)
    print(f"strategy={args.strategy} sum_rate={rate:.6f} bit/s/Hz")
    print(np.asarray(sic.d))
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "strategy": args.strategy,
                    "sum_rate_bps_hz": rate,
                    "sic_matrix": sic.d.tolist(),
                    "beams": _beams_to_json(sol),
                },
                indent=1,
            )
        )
    return 0


def _cmd_sweep(args):
    cfg = _config_from_args(args)
    csv_path, manifest_path = run_sweep(cfg)
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def _cmd_overhead(args):
    cfg = _config_from_args(args)
    csv_path, manifest_path = run_overhead(cfg)
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noma-forge",
        description="Cluster-free NOMA link-level simulator and optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, extra in (
        ("gen", _cmd_gen, ()),
        ("eval", _cmd_eval, ("--in",)),
        ("opt", _cmd_opt, ("--in",)),
        ("search", _cmd_search, ("--in", "--strategy")),
        ("sweep", _cmd_sweep, ()),
        ("overhead", _cmd_overhead, ()),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        if "--in" in extra:
            p.add_argument("--in", dest="infile", metavar="PATH", help="instance JSON")
        if "--strategy" in extra:
            p.add_argument(
                "--strategy",
                choices=("greedy", "local", "exhaustive"),
                default="local",
            )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
