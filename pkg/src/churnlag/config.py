"""Experiment configuration files.

The file format is INI (``configparser``) with the sections and keys listed
in ``SCHEMA``.  Every key is optional; unknown sections or keys are errors.
Lists are comma separated; integer lists also accept inclusive ranges such
as ``1-30``.  ``lag_range`` ranges are stepped by ``lag_stride``.

Example::

    [synth]
    n_customers = 2000
    churn_decay_days = 120

    [grid]
    resample_range = 1,2,5,10,17,25,30
    lag_range = 0-365
    lag_stride = 5
    families = random_forest,gradient_boosting

    [run]
    seed = 7
    output_dir = results
"""

from __future__ import annotations

import configparser
import datetime as dt
import io
import os
from dataclasses import fields
from typing import Any, Callable

from .dataset import SynthConfig
from .eval import GridSpec
from .features import MODES
from .labeling import DEFAULT_GAP_DAYS
from .models import FAMILIES, ClassifierSpec


class ConfigError(ValueError):
    pass


def _int_list(text: str, stride: int = 1) -> list[int]:
    out: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if "-" in part.lstrip("-"):
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1, stride))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty list {text!r}")
    return out


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _str_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _join(values) -> str:
    return ",".join(str(v) for v in values)


_SYNTH_DEFAULTS = {f.name: f.default for f in fields(SynthConfig)}

# (parser, formatter, default); None default means "unset"
Key = tuple[Callable[[str], Any], Callable[[Any], str], Any]

SCHEMA: dict[str, dict[str, Key]] = {
    "synth": {
        "n_customers": (int, str, _SYNTH_DEFAULTS["n_customers"]),
        "churn_fraction": (float, repr, _SYNTH_DEFAULTS["churn_fraction"]),
        "horizon_days": (int, str, _SYNTH_DEFAULTS["horizon_days"]),
        "start_date": (dt.date.fromisoformat, dt.date.isoformat, _SYNTH_DEFAULTS["start_date"]),
        "size_mu": (float, repr, _SYNTH_DEFAULTS["size_mu"]),
        "size_sigma": (float, repr, _SYNTH_DEFAULTS["size_sigma"]),
        "weekly_profile": (_float_list, _join, list(_SYNTH_DEFAULTS["weekly_profile"])),
        "annual_dip_weeks": (lambda s: _int_list(s) if s.strip() else [], _join, list(_SYNTH_DEFAULTS["annual_dip_weeks"])),
        "annual_dip_multiplier": (float, repr, _SYNTH_DEFAULTS["annual_dip_multiplier"]),
        "churn_decay_days": (int, str, _SYNTH_DEFAULTS["churn_decay_days"]),
        "churn_window_days": (int, str, _SYNTH_DEFAULTS["churn_window_days"]),
        "churn_margin_days": (int, str, _SYNTH_DEFAULTS["churn_margin_days"]),
        "churner_rate_multiplier": (float, repr, _SYNTH_DEFAULTS["churner_rate_multiplier"]),
        "noise_dispersion": (float, repr, _SYNTH_DEFAULTS["noise_dispersion"]),
    },
    "label": {
        "gap_days": (int, str, DEFAULT_GAP_DAYS),
    },
    "features": {
        "window_days": (int, str, 540),
        "mode": (str, str, "downsample"),
    },
    "grid": {
        "resample_range": (_int_list, _join, list(range(1, 31))),
        "lag_range": (str, lambda v: v if isinstance(v, str) else _join(v), None),
        "lag_stride": (int, str, 5),
        "families": (_str_list, _join, ["random_forest"]),
        "folds": (int, str, 5),
        "cut_lags": (_int_list, _join, [0, 90, 180, 365]),
        "cut_resamples": (_int_list, _join, [17]),
    },
    "stats": {
        "bins": (int, str, 40),
    },
    "run": {
        "seed": (int, str, None),
        "output_dir": (str, str, "churnlag-out"),
        "jobs": (int, str, None),
    },
}


class RunConfig:
    """Resolved experiment settings: defaults < config file < command-line flags."""

    def __init__(self, values: dict[str, dict[str, Any]] | None = None):
        self.values = {s: {k: spec[2] for k, spec in keys.items()} for s, keys in SCHEMA.items()}
        for section, items in (values or {}).items():
            for key, value in items.items():
                self.set(section, key, value)

    def set(self, section: str, key: str, value: Any) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {key!r} in [{section}]")
        self.values[section][key] = value

    def __getitem__(self, item: tuple[str, str]):
        return self.values[item[0]][item[1]]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.resolved().values == other.resolved().values

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls()
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown config key {key!r} in [{section}]")
                cfg.set(section, key, cls.parse_value(section, key, raw))
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    @staticmethod
    def parse_value(section: str, key: str, raw: str):
        parser = SCHEMA[section][key][0]
        try:
            return parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def resolved(self) -> "RunConfig":
        """Copy with derived defaults filled in (lag range expanded, jobs set)."""
        out = RunConfig()
        for s, items in self.values.items():
            out.values[s] = dict(items)
        g = out.values["grid"]
        lag = g["lag_range"]
        if lag is None:
            g["lag_range"] = list(range(0, 366, g["lag_stride"]))
        elif isinstance(lag, str):
            try:
                g["lag_range"] = _int_list(lag, g["lag_stride"])
            except ValueError as exc:
                raise ConfigError(f"[grid] lag_range = {lag!r}: {exc}") from None
        jobs = out.values["run"]["jobs"]
        if jobs is None or jobs < 1:
            # unset or non-positive means "all cores"
            out.values["run"]["jobs"] = os.cpu_count() or 1
        return out

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, keys in SCHEMA.items():
            parser.add_section(section)
            for key, (_, fmt, _) in keys.items():
                value = self.values[section][key]
                if value is not None:
                    parser.set(section, key, fmt(value))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def synth_config(self) -> SynthConfig:
        s = dict(self.values["synth"])
        seed = self.values["run"]["seed"]
        s["seed"] = 0 if seed is None else seed
        try:
            return SynthConfig(**s)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def grid_spec(self) -> GridSpec:
        r = self.resolved().values
        seed = r["run"]["seed"]
        if seed is None:
            raise ConfigError("grid runs need an explicit global seed ([run] seed or --seed)")
        unknown = [f for f in r["grid"]["families"] if f not in FAMILIES]
        if unknown:
            raise ConfigError(f"unknown families {unknown}; choose from {', '.join(FAMILIES)}")
        if r["features"]["mode"] not in MODES:
            raise ConfigError(f"[features] mode must be one of {MODES}")
        try:
            return GridSpec(
                resample_range=tuple(r["grid"]["resample_range"]),
                lag_range=tuple(r["grid"]["lag_range"]),
                lag_stride=r["grid"]["lag_stride"],
                families=tuple(ClassifierSpec(f) for f in r["grid"]["families"]),
                folds=r["grid"]["folds"],
                seed=seed,
                mode=r["features"]["mode"],
                window_days=r["features"]["window_days"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
