"""Experiment configuration (YAML) and structured data export.

A config is one human-readable YAML document with nested sections; the
schema is documented in configs/default.yaml.  Export is deterministic:
identical configs produce byte-identical CSV/JSON files, every file starts
with a metadata block (config hash, parameter echo, analysis settings),
and numbers are written in scientific notation with 13 significant digits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .params import AmplifierParams
from .simulate import InputSignal

EXPERIMENTS = ("steady", "stability", "sweep", "tf", "simulate", "predict", "compare")
SWEEPABLE = ("R", "L", "C", "T", "c1", "c2", "c3", "omega1")

#: fixed float format used in CSV and "precise" JSON output
FLOAT_FORMAT = "{:.12e}"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    lo: float
    hi: float
    points: int


@dataclass(frozen=True)
class TfSpec:
    f_lo: float = 100.0
    f_hi: float = 20000.0
    points: int = 60
    log: bool = True


@dataclass(frozen=True)
class Tolerances:
    """Pass/fail gates for the compare experiment.

    The analytic column truncates at first order in omega*T, so the
    defaults allow the O((omega T)^2) gap between it and the exact
    simulation at 1 kHz; they are comparison gates, not accuracy claims.
    """

    fundamental_abs: float = 2.0e-3    # per real/imag part of harmonic 1
    harmonic_rel: float = 0.25         # relative, harmonics >= 2
    harmonic_floor: float = 1.0e-5     # below this, absolute check instead


@dataclass(frozen=True)
class ExperimentConfig:
    params: AmplifierParams
    signal: InputSignal
    experiment: str
    u0: float = 0.0                    # operating point for steady/stability/tf
    sweep: SweepSpec | None = None
    tf: TfSpec = field(default_factory=TfSpec)
    out_path: str | None = None
    out_format: str = "csv"
    transient_periods: int = 20        # input periods discarded before measuring
    measure_periods: int = 1           # input periods in the analysis window
    n_max: int = 20
    samples_per_period: int = 32
    jobs: int = 1
    seed: int = 0                      # reserved; all computations deterministic
    plot: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)
    raw: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _require(mapping: dict, key: str, kind, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required key '{context}{key}'")
    value = mapping[key]
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"key '{context}{key}' must be {kind.__name__}, got {value!r}"
        )


def _optional(mapping: dict, key: str, kind, default, context: str):
    if key not in mapping or mapping[key] is None:
        return default
    return _require(mapping, key, kind, context)


def _parse_params(section: dict) -> AmplifierParams:
    if not isinstance(section, dict):
        raise ConfigError("section 'params' must be a mapping")
    kwargs = {}
    for name in ("R", "L", "C", "T", "c1", "c2", "c3", "omega1"):
        kwargs[name] = _require(section, name, float, "params.")
    kwargs["k"] = _optional(section, "k", int, 0, "params.")
    unknown = set(section) - set(kwargs)
    if unknown:
        raise ConfigError(f"unknown key 'params.{sorted(unknown)[0]}'")
    try:
        return AmplifierParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}")


def _parse_signal(section: dict) -> InputSignal:
    if not isinstance(section, dict):
        raise ConfigError("section 'input' must be a mapping")
    kind = _require(section, "kind", str, "input.")
    if kind == "constant":
        return InputSignal.constant(_require(section, "u0", float, "input."))
    if kind == "sine":
        return InputSignal.sine(
            _require(section, "amplitude", float, "input."),
            _require(section, "frequency", float, "input."),
            _optional(section, "phase", float, 0.0, "input."),
        )
    if kind == "sum-of-sines":
        amplitudes = _require(section, "amplitudes", list, "input.")
        frequencies = _require(section, "frequencies", list, "input.")
        phases = section.get("phases")
        try:
            return InputSignal.sum_of_sines(amplitudes, frequencies, phases)
        except ValueError as exc:
            raise ConfigError(f"input: {exc}")
    raise ConfigError(
        f"key 'input.kind' must be one of constant|sine|sum-of-sines, got {kind!r}"
    )


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig; errors name the key."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    params = _parse_params(doc.get("params", {}))
    signal = _parse_signal(doc.get("input", {"kind": "constant", "u0": 0.0}))
    experiment = _require(doc, "experiment", str, "")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"key 'experiment' must be one of {'|'.join(EXPERIMENTS)}, "
            f"got {experiment!r}"
        )

    sweep = None
    if "sweep" in doc and doc["sweep"] is not None:
        section = doc["sweep"]
        sweep = SweepSpec(
            parameter=_require(section, "parameter", str, "sweep."),
            lo=_require(section, "lo", float, "sweep."),
            hi=_require(section, "hi", float, "sweep."),
            points=_require(section, "points", int, "sweep."),
        )
        if sweep.parameter not in SWEEPABLE:
            raise ConfigError(
                f"key 'sweep.parameter' must name an amplifier constant "
                f"({'|'.join(SWEEPABLE)}), got {sweep.parameter!r}"
            )
        if not sweep.lo < sweep.hi:
            raise ConfigError("key 'sweep.lo' must be below 'sweep.hi'")
        if sweep.points < 2:
            raise ConfigError("key 'sweep.points' must be at least 2")

    tf = TfSpec()
    if "tf" in doc and doc["tf"] is not None:
        section = doc["tf"]
        tf = TfSpec(
            f_lo=_optional(section, "f_lo", float, tf.f_lo, "tf."),
            f_hi=_optional(section, "f_hi", float, tf.f_hi, "tf."),
            points=_optional(section, "points", int, tf.points, "tf."),
            log=_optional(section, "log", bool, tf.log, "tf."),
        )
        if not 0 < tf.f_lo < tf.f_hi:
            raise ConfigError("keys 'tf.f_lo'/'tf.f_hi' must satisfy 0 < lo < hi")

    out_path, out_format = None, "csv"
    if "output" in doc and doc["output"] is not None:
        section = doc["output"]
        out_path = _optional(section, "path", str, None, "output.")
        out_format = _optional(section, "format", str, "csv", "output.")
        if out_format not in ("csv", "json"):
            raise ConfigError(
                f"key 'output.format' must be csv or json, got {out_format!r}"
            )

    tol = Tolerances()
    if "tolerances" in doc and doc["tolerances"] is not None:
        section = doc["tolerances"]
        tol = Tolerances(
            fundamental_abs=_optional(section, "fundamental_abs", float,
                                      tol.fundamental_abs, "tolerances."),
            harmonic_rel=_optional(section, "harmonic_rel", float,
                                   tol.harmonic_rel, "tolerances."),
            harmonic_floor=_optional(section, "harmonic_floor", float,
                                     tol.harmonic_floor, "tolerances."),
        )

    cfg = ExperimentConfig(
        params=params,
        signal=signal,
        experiment=experiment,
        u0=_optional(doc, "u0", float, 0.0, ""),
        sweep=sweep,
        tf=tf,
        out_path=out_path,
        out_format=out_format,
        transient_periods=_optional(doc, "transient_periods", int, 20, ""),
        measure_periods=_optional(doc, "measure_periods", int, 1, ""),
        n_max=_optional(doc, "n_max", int, 20, ""),
        samples_per_period=_optional(doc, "samples_per_period", int, 32, ""),
        jobs=_optional(doc, "jobs", int, 1, ""),
        seed=_optional(doc, "seed", int, 0, ""),
        plot=_optional(doc, "plot", bool, True, ""),
        tolerances=tol,
        raw=doc,
    )
    for name, minimum in (("transient_periods", 0), ("measure_periods", 1),
                          ("n_max", 1), ("jobs", 1)):
        if getattr(cfg, name) < minimum:
            raise ConfigError(f"key '{name}' must be >= {minimum}")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}")
    return parse_config(doc)


def config_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Apply command-line parameter overrides (e.g. c1=2e5, k=1, u0=0.3)."""
    param_fields = {f.name for f in dataclasses.fields(AmplifierParams)}
    params = cfg.params
    changes = {}
    raw = dict(cfg.raw)
    raw_params = dict(raw.get("params", {}))
    for key, value in overrides.items():
        if value is None:
            continue
        if key in param_fields:
            kind = int if key == "k" else float
            params = params.replace(**{key: kind(value)})
            raw_params[key] = kind(value)
        elif hasattr(cfg, key):
            changes[key] = value
            raw[key] = value
        else:
            raise ConfigError(f"unknown override '{key}'")
    raw["params"] = raw_params
    return dataclasses.replace(cfg, params=params, raw=raw, **changes)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    if isinstance(value, complex):
        return f"{FLOAT_FORMAT.format(value.real)}{value.imag:+.12e}j"
    return str(value)


def emit(records: list[dict], path, fmt: str, metadata: dict | None = None) -> None:
    """Write records to CSV or JSON with a metadata header.

    CSV: '#'-prefixed metadata lines, RFC-4180-style quoting, '.' decimal
    separator, scientific notation with 13 significant digits.  Complex
    values split into _re/_im columns.  JSON: metadata + native-float
    records + a "precise" variant with every number as a decimal string of
    the same precision.
    """
    metadata = metadata or {}
    flat = [_flatten_record(r) for r in records]
    columns: list[str] = []
    for record in flat:
        for key in record:
            if key not in columns:
                columns.append(key)

    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "csv":
        buf = io.StringIO()
        for key in metadata:
            buf.write(f"# {key}: {_format_value(metadata[key])}\n")
        buf.write(",".join(_csv_quote(c) for c in columns) + "\n")
        for record in flat:
            cells = []
            for col in columns:
                value = record.get(col, "")
                cells.append(_csv_quote(_format_value(value)) if value != "" else "")
            buf.write(",".join(cells) + "\n")
        path.write_text(buf.getvalue())
    elif fmt == "json":
        precise = [
            {key: (_format_value(v) if isinstance(v, (float, complex)) else v)
             for key, v in record.items()}
            for record in flat
        ]
        doc = {
            "metadata": {k: _jsonable(v) for k, v in metadata.items()},
            "records": [{k: _jsonable(v) for k, v in r.items()} for r in flat],
            "precise": precise,
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
    else:
        raise ConfigError(f"key 'output.format' must be csv or json, got {fmt!r}")


def _flatten_record(record: dict) -> dict:
    flat = {}
    for key, value in record.items():
        if isinstance(value, complex):
            flat[f"{key}_re"] = value.real
            flat[f"{key}_im"] = value.imag
        else:
            flat[key] = value
    return flat


def _jsonable(value):
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "item"):
        return value.item()
    return value


def _csv_quote(cell: str) -> str:
    if any(ch in cell for ch in ',"\n'):
        return '"' + cell.replace('"', '""') + '"'
    return cell
