"""Command-line entry point.

    churnlag synth --customers 2000 --seed 7 --out runs/a
    churnlag label runs/a/dataset.csv --out runs/a
    churnlag grid runs/a/dataset.csv --seed 7 --resample-range 1,2,5,17 --lag-range 0,90,365 --out runs/a
    churnlag stats runs/a/dataset.csv --out runs/a

Settings come from built-in defaults, then ``--config FILE``, then flags.
Every command writes the resolved settings to ``<command>_config.ini`` in the
output directory.  Exit status: 0 success, 1 data or runtime failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMA, ConfigError, RunConfig
from .dataset import DataError, generate_synthetic, read_long_csv, write_ground_truth_csv, write_long_csv
from .eval import StratificationError, best_cells, compare_populations, run_grid, write_grid_csvs
from .labeling import align_and_label, write_labels_csv

log = logging.getLogger("churnlag")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# flag name -> (section, key); flags mirror config keys
SYNTH_FLAGS = {
    "customers": ("synth", "n_customers"),
    "churn-fraction": ("synth", "churn_fraction"),
    "horizon-days": ("synth", "horizon_days"),
    "start-date": ("synth", "start_date"),
    "size-mu": ("synth", "size_mu"),
    "size-sigma": ("synth", "size_sigma"),
    "weekly-profile": ("synth", "weekly_profile"),
    "annual-dip-weeks": ("synth", "annual_dip_weeks"),
    "annual-dip-multiplier": ("synth", "annual_dip_multiplier"),
    "churn-decay-days": ("synth", "churn_decay_days"),
    "churn-window-days": ("synth", "churn_window_days"),
    "churn-margin-days": ("synth", "churn_margin_days"),
    "churner-rate-multiplier": ("synth", "churner_rate_multiplier"),
    "noise-dispersion": ("synth", "noise_dispersion"),
}
LABEL_FLAGS = {"gap-days": ("label", "gap_days")}
GRID_FLAGS = {
    "window-days": ("features", "window_days"),
    "mode": ("features", "mode"),
    "resample-range": ("grid", "resample_range"),
    "lag-range": ("grid", "lag_range"),
    "lag-stride": ("grid", "lag_stride"),
    "families": ("grid", "families"),
    "folds": ("grid", "folds"),
    "cut-lags": ("grid", "cut_lags"),
    "cut-resamples": ("grid", "cut_resamples"),
    "jobs": ("run", "jobs"),
}
STATS_FLAGS = {"bins": ("stats", "bins")}
COMMON_FLAGS = {"seed": ("run", "seed"), "out": ("run", "output_dir")}


class CommandError(RuntimeError):
    """Data or runtime failure reported with exit status 1."""


def _add_flags(parser: argparse.ArgumentParser, flags: dict) -> None:
    for flag, (section, key) in flags.items():
        parser.add_argument(f"--{flag}", dest=f"{section}.{key}", metavar=key.upper(), default=None,
                            help=f"overrides [{section}] {key}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="churnlag", description="Churn prediction from download time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="INI experiment file")
    common.add_argument("-v", "--verbose", action="store_true")
    _add_flags(common, COMMON_FLAGS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset with planted churn")
    _add_flags(p, SYNTH_FLAGS)

    p = sub.add_parser("ingest-validate", parents=[common], help="parse a long-form CSV and report its shape")
    p.add_argument("input")

    p = sub.add_parser("label", parents=[common], help="write Active/Inactive labels")
    p.add_argument("input")
    _add_flags(p, LABEL_FLAGS)

    p = sub.add_parser("grid", parents=[common], help="cross-validated accuracy over resample x lag")
    p.add_argument("input")
    _add_flags(p, {**LABEL_FLAGS, **GRID_FLAGS})

    p = sub.add_parser("stats", parents=[common], help="compare Active and Inactive daily volumes")
    p.add_argument("input")
    _add_flags(p, {**LABEL_FLAGS, **STATS_FLAGS})
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for dest, raw in vars(args).items():
        if "." not in dest or raw is None:
            continue
        section, key = dest.split(".", 1)
        assert key in SCHEMA[section]
        cfg.set(section, key, RunConfig.parse_value(section, key, raw))
    return cfg


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["run", "output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: RunConfig, out: Path, command: str) -> None:
    # one echo per command so a shared output directory keeps every stage's settings
    (out / f"{command}_config.ini").write_text(cfg.resolved().to_ini(), encoding="utf-8")


def _load(path):
    try:
        return read_long_csv(path)
    except FileNotFoundError:
        raise CommandError(f"input file not found: {path}") from None


def cmd_synth(args, cfg: RunConfig) -> int:
    synth = cfg.synth_config()
    out = _output_dir(cfg)
    data = generate_synthetic(synth)
    with open(out / "dataset.csv", "w", newline="", encoding="utf-8") as fh:
        write_long_csv(data.dataset, fh)
    with open(out / "ground_truth.csv", "w", newline="", encoding="utf-8") as fh:
        write_ground_truth_csv(data.churn_dates, fh)
    _echo_config(cfg, out, "synth")
    n_churn = sum(d is not None for d in data.churn_dates.values())
    print(f"customers={synth.n_customers} churners={n_churn} days={synth.horizon_days} -> {out}")
    return EXIT_OK


def cmd_ingest_validate(args, cfg: RunConfig) -> int:
    ds = _load(args.input)
    lengths = [len(s.counts) for s in ds]
    total = sum(float(s.counts.sum()) for s in ds)
    print(f"customers={len(lengths)} days={sum(lengths)} downloads={total:g} "
          f"observation_end={ds.observation_end.isoformat()}")
    return EXIT_OK


def cmd_label(args, cfg: RunConfig) -> int:
    ds = _load(args.input)
    out = _output_dir(cfg)
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        tally = write_labels_csv(ds, fh, cfg["label", "gap_days"])
    _echo_config(cfg, out, "label")
    print(f"active={tally['active']} inactive={tally['inactive']} excluded={tally['excluded']}")
    return EXIT_OK


def cmd_grid(args, cfg: RunConfig) -> int:
    from . import plotting

    grid = cfg.grid_spec()
    jobs = cfg.resolved()["run", "jobs"]
    labeled = align_and_label(_load(args.input), cfg["label", "gap_days"])
    out = _output_dir(cfg)
    _echo_config(cfg, out, "grid")
    n_cells = len(grid.resample_range) * len(grid.lag_range) * len(grid.families)
    log.info("%d cells, %d folds, jobs=%d", n_cells, grid.folds, jobs)
    try:
        result = run_grid(labeled, grid, jobs=jobs)
    except StratificationError as exc:
        raise CommandError(str(exc)) from None
    with open(out / "grid_long.csv", "w", newline="", encoding="utf-8") as lf, \
            open(out / "grid_summary.csv", "w", newline="", encoding="utf-8") as sf:
        write_grid_csvs(result, lf, sf)
    if len(result.failed) == len(result):
        for c in result.failed[:5]:
            log.error("cell resample=%d lag=%d %s: %s", c.value, c.lag, c.family, c.error)
        raise CommandError(f"all {len(result)} grid cells failed")

    for spec in grid.families:
        fam = spec.family
        plotting.plot_heatmap(result, fam, out / f"heatmap_{fam}.svg", grid.mode)
        lags = [n for n in cfg["grid", "cut_lags"] if n in grid.lag_range] or [grid.lag_range[0]]
        plotting.plot_cut_by_value(result, fam, lags, out / f"cut_resample_{fam}.svg", grid.mode)
    for value in cfg["grid", "cut_resamples"]:
        if value in grid.resample_range:
            plotting.plot_cut_by_lag(result, value, out / f"cut_lag_at_{value}.svg",
                                     [s.family for s in grid.families])

    if result.failed:
        print(f"warning: {len(result.failed)} of {len(result)} cells failed", file=sys.stderr)
    best = best_cells(result)[0]
    print(f"{labeled.summary_line()} cells={len(result)} "
          f"best: {best.family} resample={best.value} lag={best.lag} accuracy={best.mean:.4f}")
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    from . import plotting

    labeled = align_and_label(_load(args.input), cfg["label", "gap_days"])
    out = _output_dir(cfg)
    stats = compare_populations(labeled, cfg["stats", "bins"])
    with open(out / "population_report.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_report(), fh, indent=2)
        fh.write("\n")
    plotting.plot_populations(stats, out / "population_histogram.svg")
    _echo_config(cfg, out, "stats")
    print(f"active_median={stats.active_median:g} inactive_median={stats.inactive_median:g} "
          f"overlap={stats.overlap_coefficient:.4f} p={stats.p_value:.3g}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "ingest-validate": cmd_ingest_validate,
    "label": cmd_label,
    "grid": cmd_grid,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"churnlag: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"churnlag: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE if exc.filename == getattr(args, "config", None) else EXIT_FAILURE
    except (CommandError, DataError, ValueError, OSError) as exc:
        print(f"churnlag: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
