"""Run configuration and on-disk artifacts.

Config files are flat structured text with dotted keys::

    # comment
    grid.points = 401
    estimate.bandwidth_y = 0.08

Every key has a typed default below; unknown keys and uncastable values
are rejected with the offending line number.  All artifact writes go
through a temp-file + atomic rename, and the manifest echoes the full
effective config plus library versions (never timestamps), so a rerun
with the same seed is bit-identical.
"""

from __future__ import annotations

import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .errors import ConfigError
from .models import SampleSet

OUT_ROOT_ENV = "HETID_OUT_ROOT"
FLOAT_FMT = ".17g"

MODES = ("oracle", "simulate", "estimate", "verify", "mc")


def _as_float(s: str) -> float:
    return float(s)


def _as_int(s: str) -> int:
    return int(s)


def _as_str(s: str) -> str:
    return s


def _as_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _as_int_list(s: str):
    return tuple(int(tok) for tok in s.split(",") if tok.strip())


def _as_str_list(s: str):
    return tuple(tok.strip() for tok in s.split(",") if tok.strip())


def _as_opt_float(s: str):
    return None if s.strip() == "" else float(s)


# key -> (default, caster).  Optional floats use "" (empty) for "auto".
SCHEMA = {
    "model": ("M1", _as_str),
    "error": ("normal", _as_str),
    "seed": (20230, _as_int),
    "input": ("", _as_str),
    "out": ("", _as_str),

    "weight.lo": (0.0, _as_float),
    "weight.hi": (1.0, _as_float),
    "weight.index": (1, _as_int),

    "grid.points": (401, _as_int),
    "grid.half_range": (1.5, _as_float),
    "grid.lo": (None, _as_opt_float),
    "grid.hi": (None, _as_opt_float),

    "constraints.kind": ("canonical", _as_str),
    "constraints.y1": (0.0, _as_float),
    "constraints.alpha": (0.0, _as_float),
    "constraints.y2": (None, _as_opt_float),
    "constraints.ya": (None, _as_opt_float),
    "constraints.yb": (None, _as_opt_float),
    "constraints.alpha_a": (None, _as_opt_float),
    "constraints.alpha_b": (None, _as_opt_float),
    "constraints.slope": (None, _as_opt_float),

    "quadrature.tol": (1e-10, _as_float),
    "reconstruction.excision": (1e-3, _as_float),
    "reconstruction.tol": (1e-11, _as_float),

    "simulate.n": (2000, _as_int),

    "estimate.bandwidth_x": (None, _as_opt_float),
    "estimate.bandwidth_y": (None, _as_opt_float),
    "estimate.cx": (1.0, _as_float),
    "estimate.cy": (1.0, _as_float),
    "estimate.trim_lo": (0.05, _as_float),
    "estimate.trim_hi": (0.95, _as_float),
    "estimate.grid_points": (161, _as_int),
    "estimate.gl_nodes": (24, _as_int),
    "estimate.diagnostic": (True, _as_bool),

    "mc.model": ("M1", _as_str),
    "mc.sizes": ((500, 2000, 8000), _as_int_list),
    "mc.replications": (50, _as_int),
    "mc.seed_base": (977003, _as_int),
    "mc.metric": ("sup", _as_str),
    "mc.eval_lo": (-1.5, _as_float),
    "mc.eval_hi": (0.5, _as_float),
    "mc.eval_points": (161, _as_int),
    "mc.central_halfwidth": (0.5, _as_float),

    "verify.instances": (1000, _as_int),
    "verify.seed": (411013, _as_int),
    "verify.models": (("M1", "M3"), _as_str_list),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings: mode plus the typed key/value table."""

    mode: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; "
                              f"expected one of {', '.join(MODES)}")
        for key in self.values:
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
        tol_keys = ("quadrature.tol", "reconstruction.tol",
                    "reconstruction.excision")
        for key in tol_keys:
            if self[key] <= 0:
                raise ConfigError(f"{key} must be positive, got {self[key]}")

    def __getitem__(self, key: str):
        if key in self.values:
            return self.values[key]
        if key in SCHEMA:
            return SCHEMA[key][0]
        raise KeyError(key)

    def get(self, key: str, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def as_dict(self) -> dict:
        out = {k: default for k, (default, _) in SCHEMA.items()}
        out.update(self.values)
        return out


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse `key = value` lines into typed values; errors carry the line
    number and file name."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        _, caster = SCHEMA[key]
        try:
            out[key] = caster(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(mode: str, path=None, overrides=None) -> RunConfig:
    """Assemble a RunConfig from an optional file plus `key=value`
    override strings (later wins)."""
    values = {}
    if path is not None:
        text = Path(path).read_text()
        values.update(parse_config_text(text, source=str(path)))
    for k, item in enumerate(overrides or (), start=1):
        values.update(parse_config_text(item, source=f"<override {k}>"))
    return RunConfig(mode=mode, values=values)


# ---------------------------------------------------------------------------
# artifact writers (atomic, deterministic)
# ---------------------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return format(float(v), FLOAT_FMT)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_sample_csv(path, samples: SampleSet) -> None:
    header = ["y"] + [f"x{i}" for i in range(1, samples.d_x + 1)]
    rows = ([_fmt(yi)] + [_fmt(c) for c in xi]
            for yi, xi in zip(samples.y, samples.x))
    atomic_write_text(path, _csv_text(header, rows))


def read_sample_csv(path) -> SampleSet:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty sample file") from None
        expected_x = [f"x{i}" for i in range(1, len(header))]
        if len(header) < 2 or header[0] != "y" or header[1:] != expected_x:
            raise ConfigError(
                f"{path}: bad header {header!r}; expected y,x1,...,xd")
        y, x = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}:{lineno}: expected {len(header)} fields, "
                    f"got {len(row)}")
            try:
                y.append(float(row[0]))
                x.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not y:
        raise ConfigError(f"{path}: no data rows")
    return SampleSet(y=np.array(y), x=np.array(x))


def write_lambda_csv(path, grid, values) -> None:
    rows = ([_fmt(g), _fmt(v)] for g, v in zip(grid, values))
    atomic_write_text(path, _csv_text(["y", "lambda"], rows))


def write_reconstruction_csv(path, rt) -> None:
    rows = ([_fmt(y), _fmt(h), _fmt(r), str(int(flag))]
            for y, h, r, flag in zip(rt.grid, rt.values, rt.residuals,
                                     rt.interpolated))
    atomic_write_text(
        path, _csv_text(["y", "h", "residual", "interpolated_flag"], rows))


def write_plot_data_csv(path, grid, h_values, lam_values, residuals) -> None:
    rows = ([_fmt(y), _fmt(h), _fmt(l), _fmt(r)]
            for y, h, l, r in zip(grid, h_values, lam_values, residuals))
    atomic_write_text(path, _csv_text(["y", "h", "lambda", "residual"], rows))


def write_mc_results_csv(path, rows) -> None:
    body = ([str(model), str(n), str(rep), str(metric), _fmt(value)]
            for model, n, rep, metric, value in rows)
    atomic_write_text(
        path, _csv_text(["model", "n", "rep", "metric", "value"], body))


def write_mc_summary_csv(path, summary) -> None:
    body = ([str(model), str(n), _fmt(median), _fmt(iqr), str(fails)]
            for model, n, median, iqr, fails in summary)
    atomic_write_text(
        path, _csv_text(["model", "n", "median", "iqr", "fail_count"], body))


def sidecar_text(entries: dict) -> str:
    lines = []
    for key, value in entries.items():
        if isinstance(value, float):
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_sidecar(path, entries: dict) -> None:
    atomic_write_text(path, sidecar_text(entries))


def write_manifest(path, config: RunConfig) -> None:
    """Config echo + versions + seed; no timestamps, so reruns match."""
    from . import __version__
    lines = [f"mode = {config.mode}"]
    for key, value in sorted(config.as_dict().items()):
        if isinstance(value, float):
            value = _fmt(value)
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = ""
        lines.append(f"{key} = {value}")
    lines.append(f"version.package = {__version__}")
    lines.append(f"version.python = {sys.version_info.major}."
                 f"{sys.version_info.minor}.{sys.version_info.micro}")
    lines.append(f"version.numpy = {np.__version__}")
    lines.append(f"version.scipy = {scipy.__version__}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def resolve_out_dir(config: RunConfig) -> Path:
    """Explicit `out` wins; otherwise a deterministic directory under the
    output root (env var, then ./runs)."""
    if config["out"]:
        return Path(config["out"])
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    tag = config["mc.model"] if config.mode == "mc" else config["model"]
    return root / f"{config.mode}-{tag}-s{config['seed']}"
