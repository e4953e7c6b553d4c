"""Loss datasets, experiment configuration and result files.

Loss files are UTF-8 CSV with the header
``record_id,event_date,entity_category,loss_amount``. Lines starting with
``#`` are comments; ``# key: value`` comments before the header carry dataset
metadata such as the loss unit or, for synthetic files, the generating spec
and seed.

Configuration files are flat ``dotted.key = value`` text. Result files are
long-format CSV with a versioned column schema, and every run also writes a
JSON manifest with the seed, a hash of the resolved configuration and the
library versions.
"""
import csv
from dataclasses import dataclass, field, fields, replace
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import platform
import re
from typing import Optional, Tuple

import numpy as np

from . import dist
from .copula import EFGM, cubic_section_example
from .exceptions import ConfigError, DatasetValidationError, EmptyDatasetError
from .portfolio import TruncationSpec
from .utility import DEFAULT_CURTAILMENT, LiabilitySpec

log = logging.getLogger(__name__)

LOSS_HEADER = ("record_id", "event_date", "entity_category", "loss_amount")
RESULT_HEADER = (
    "schema_version", "experiment", "series", "parameter", "value",
    "metric", "estimate", "ci_low", "ci_high", "verdict",
)
RESULT_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class LossRecord:
    record_id: str
    loss_amount: float
    event_date: Optional[_dt.date] = None
    entity_category: Optional[str] = None

    def __post_init__(self):
        if not self.record_id:
            raise DatasetValidationError("record_id must be non-empty", field="record_id")
        if not (math.isfinite(self.loss_amount) and self.loss_amount > 0.0):
            raise DatasetValidationError(f"loss_amount must be a positive number, got {self.loss_amount!r}", field="loss_amount")


@dataclass(frozen=True)
class LossDataset:
    records: Tuple[LossRecord, ...]
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def amounts(self):
        return np.array([r.loss_amount for r in self.records])


def _format_float(x):
    return repr(float(x))


def _parse_row(row, line):
    if len(row) != len(LOSS_HEADER):
        raise DatasetValidationError(f"expected {len(LOSS_HEADER)} fields, found {len(row)}", line=line)
    record_id, event_date, category, amount = (v.strip() for v in row)
    if not record_id:
        raise DatasetValidationError("must be non-empty", line=line, field="record_id")
    date = None
    if event_date:
        try:
            date = _dt.date.fromisoformat(event_date)
        except ValueError:
            raise DatasetValidationError(f"not an ISO-8601 date: {event_date!r}", line=line, field="event_date") from None
    try:
        value = float(amount)
    except ValueError:
        raise DatasetValidationError(f"not a number: {amount!r}", line=line, field="loss_amount") from None
    if not (math.isfinite(value) and value > 0.0):
        raise DatasetValidationError(f"must be positive, got {amount!r}", line=line, field="loss_amount")
    return LossRecord(record_id, value, date, category or None)


def load_losses(path):
    """Read and validate a loss CSV file."""
    metadata = {}
    records = []
    seen = {}
    header_seen = False
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.rstrip("\r\n")
            if not text.strip():
                continue
            if text.lstrip().startswith("#"):
                body = text.lstrip()[1:].strip()
                if not header_seen and ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            row = next(csv.reader([text]))
            if not header_seen:
                if tuple(v.strip() for v in row) != LOSS_HEADER:
                    raise DatasetValidationError(f"header must be {','.join(LOSS_HEADER)}", line=line_no)
                header_seen = True
                continue
            rec = _parse_row(row, line_no)
            if rec.record_id in seen:
                raise DatasetValidationError(
                    f"duplicate record_id {rec.record_id!r} (first on line {seen[rec.record_id]})",
                    line=line_no, field="record_id",
                )
            seen[rec.record_id] = line_no
            records.append(rec)
    if not header_seen:
        raise DatasetValidationError("missing header line", line=1)
    if not records:
        raise EmptyDatasetError(f"{path} contains no loss records")
    ds = LossDataset(tuple(records), metadata)
    amounts = ds.amounts()
    log.info("loaded %d losses from %s (min %.6g, median %.6g, max %.6g)",
             len(ds), path, amounts.min(), np.median(amounts), amounts.max())
    return ds


def write_losses(dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in dataset.metadata.items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_HEADER)
        for r in dataset.records:
            writer.writerow([
                r.record_id,
                r.event_date.isoformat() if r.event_date else "",
                r.entity_category or "",
                _format_float(r.loss_amount),
            ])


def synth_dataset(spec, count, seed, path=None, unit="synthetic"):
    """Draw ``count`` losses from ``spec`` and optionally write them to ``path``.

    The file header records the spec and seed, so the file can be regenerated
    exactly. Draws that are not strictly positive cannot be losses and raise.
    """
    count = int(count)
    if count < 1:
        raise DatasetValidationError(f"count must be >= 1, got {count}", field="count")
    draws = dist.sample(spec, count, seed)
    bad = np.flatnonzero(~(draws > 0.0))
    if bad.size:
        raise DatasetValidationError(f"{spec!r} produced a nonpositive loss {draws[bad[0]]!r}", field="loss_amount")
    width = max(6, len(str(count)))
    records = tuple(LossRecord(f"S{i + 1:0{width}d}", float(x)) for i, x in enumerate(draws))
    metadata = {"source": "synthetic", "spec": repr(spec), "seed": str(seed), "count": str(count), "unit": unit}
    ds = LossDataset(records, metadata)
    if path is not None:
        write_losses(ds, path)
    return ds


# configuration -------------------------------------------------------------

_FAMILIES = {
    "stable": dist.Stable,
    "normal": dist.Normal,
    "lognormal": dist.LogNormal,
    "cauchy": dist.Cauchy,
    "levy": dist.Levy,
    "gpd": dist.GPD,
    "powerlaw": dist.PowerLaw,
}


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    """Comma list of integers; ``a..b`` expands to the inclusive range."""
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_str(text):
    return text or None


# dotted key -> (SimConfig attribute, parser)
_SCALAR_KEYS = {
    "seed": ("seed", int),
    "mc_count": ("mc_count", lambda t: int(float(t))),
    "levels": ("levels", _floats),
    "n_sweep": ("n_sweep", _ints),
    "m_sweep": ("m_sweep", _ints),
    "output.dir": ("output_dir", str),
    "data.path": ("data_path", _opt_str),
    "data.synth_count": ("synth_count", int),
    "fit.families": ("families", _words),
    "fit.hill_fraction": ("hill_fraction", float),
    "fit.expect_best": ("expect_best", _opt_str),
    "sweep.fit": ("sweep_fit", _opt_str),
    "sweep.expect": ("expect_trend", _opt_str),
    "bootstrap.inner_reps": ("inner_reps", lambda t: int(float(t))),
    "bootstrap.outer_reps": ("outer_reps", int),
    "bootstrap.ci_level": ("ci_level", float),
    "scan.n": ("scan_n", int),
    "scan.steps": ("scan_steps", int),
    "scan.expect": ("expect_verdict", _opt_str),
    "trunc.z": ("trunc_z", float),
    "trunc.r": ("trunc_r", float),
    "trunc.n": ("trunc_n", int),
    "trunc.weights": ("trunc_weights", _floats),
    "trunc.mode": ("trunc_mode", str),
    "trunc.variant": ("trunc_variant", str),
    "copula.alphas": ("copula_alphas", _floats),
    "copula.tail_levels": ("tail_levels", _floats),
    "copula.var_level": ("copula_var_level", float),
    "eu.tail_indices": ("tail_indices", _floats),
}

_CURTAIL_KEYS = ("curtail.support", "curtail.mode")
_LIABILITY_KEYS = {"liability.cap": "cap", "liability.risk_aversion": "risk_aversion", "liability.convention": "convention"}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 20240601
    mc_count: int = 100_000
    levels: Tuple[float, ...] = (0.995,)
    n_sweep: Tuple[int, ...] = tuple(range(1, 51))
    m_sweep: Tuple[int, ...] = (1,)
    dist: object = dist.GPD(0.1862, 1.0, 0.0)
    copula: object = EFGM(2, 0.5)
    liability: LiabilitySpec = LiabilitySpec()
    curtailment: Optional[TruncationSpec] = DEFAULT_CURTAILMENT
    output_dir: str = "results"
    data_path: Optional[str] = None
    synth_count: int = 9015
    families: Tuple[str, ...] = ("normal", "lognormal", "gpd")
    hill_fraction: float = 0.1
    expect_best: Optional[str] = None
    sweep_fit: Optional[str] = None
    expect_trend: Optional[str] = None
    inner_reps: int = 100_000
    outer_reps: int = 200
    ci_level: float = 0.95
    scan_n: int = 4
    scan_steps: int = 4
    expect_verdict: Optional[str] = None
    trunc_z: float = 5.0
    trunc_r: float = 0.5
    trunc_n: int = 2
    trunc_weights: Tuple[float, ...] = (0.5, 0.5)
    trunc_mode: str = "zero-out"
    trunc_variant: str = "symmetric"
    copula_alphas: Tuple[float, ...] = (1.5, 0.7)
    tail_levels: Tuple[float, ...] = (0.99, 0.999)
    copula_var_level: float = 0.999
    tail_indices: Tuple[float, ...] = (1.0, 0.1862)
    source_text: str = field(default="", compare=False, repr=False)

    def as_dict(self):
        out = {}
        for f in fields(self):
            if f.name == "source_text":
                continue
            v = getattr(self, f.name)
            out[f.name] = repr(v) if not isinstance(v, (int, float, str, type(None), tuple)) else v
        return out

    def config_hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()


_INLINE_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_config_text(text):
    """Parse ``key = value`` lines into an ordered dict.

    ``#`` at the start of a line, or after whitespace, begins a comment.
    """
    pairs = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _INLINE_COMMENT.sub("", raw).strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in pairs:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _build_spec(prefix, family, params):
    cls = _FAMILIES.get(family)
    if cls is None:
        raise ConfigError(f"{prefix}.family: unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in params.items():
        if key not in names:
            raise ConfigError(f"{prefix}.{key}: not a parameter of {family} (expected one of {sorted(names)})")
        kwargs[key] = value if key == "orientation" else float(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def config_from_pairs(pairs, env=None):
    env = os.environ if env is None else env
    updates = {}
    dist_params, copula_params, liability, curtail = {}, {}, {}, {}
    dist_family = copula_family = None
    for key, value in pairs.items():
        if key in _SCALAR_KEYS:
            attr, parse = _SCALAR_KEYS[key]
            try:
                updates[attr] = parse(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        elif key == "dist.family":
            dist_family = value
        elif key.startswith("dist."):
            dist_params[key[5:]] = value
        elif key == "copula.family":
            copula_family = value
        elif key == "copula.gamma":
            copula_params["gamma"] = value
        elif key == "copula.dimension":
            copula_params["dimension"] = value
        elif key in _LIABILITY_KEYS:
            liability[_LIABILITY_KEYS[key]] = value
        elif key in _CURTAIL_KEYS:
            curtail[key.split(".", 1)[1]] = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    if "HEAVYTAIL_SEED" in env:
        try:
            updates["seed"] = int(env["HEAVYTAIL_SEED"])
        except ValueError:
            raise ConfigError(f"HEAVYTAIL_SEED must be an integer, got {env['HEAVYTAIL_SEED']!r}") from None

    if dist_family is not None or dist_params:
        updates["dist"] = _build_spec("dist", dist_family or "gpd", dist_params)
    try:
        if copula_family is not None or copula_params:
            fam = copula_family or "efgm"
            gamma = float(copula_params.get("gamma", 0.5))
            if fam == "efgm":
                updates["copula"] = EFGM(int(copula_params.get("dimension", 2)), gamma)
            elif fam == "cubic":
                updates["copula"] = cubic_section_example()
            else:
                raise ConfigError(f"copula.family: unknown family {fam!r}; choose efgm or cubic")
        if liability:
            kw = dict(liability)
            if "cap" in kw:
                kw["cap"] = float(kw["cap"])
            if "risk_aversion" in kw:
                kw["risk_aversion"] = float(kw["risk_aversion"])
            updates["liability"] = LiabilitySpec(**kw)
        if curtail:
            support = curtail.get("support", str(DEFAULT_CURTAILMENT.support))
            if support.lower() in ("none", "inf"):
                updates["curtailment"] = None
            else:
                updates["curtailment"] = TruncationSpec(float(support), curtail.get("mode", DEFAULT_CURTAILMENT.mode))
        cfg = replace(SimConfig(), **updates)
        _validate(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _validate(cfg):
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.mc_count < 2:
        raise ConfigError("mc_count must be >= 2")
    if not cfg.levels or any(not 0.0 < q < 1.0 for q in cfg.levels):
        raise ConfigError("levels must be a nonempty list inside (0, 1)")
    if not cfg.n_sweep or min(cfg.n_sweep) < 1:
        raise ConfigError("n_sweep must be a nonempty list of integers >= 1")
    if not cfg.m_sweep or min(cfg.m_sweep) < 1:
        raise ConfigError("m_sweep must be a nonempty list of integers >= 1")
    TruncationSpec(1.0, cfg.trunc_mode)


def load_config(path=None, env=None, seed=None):
    """Read a config file (or defaults when ``path`` is None); ``seed`` overrides everything."""
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    cfg = config_from_pairs(parse_config_text(text), env)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return replace(cfg, source_text=text)


# results -------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    experiment: str
    series: str
    parameter: str
    value: object
    metric: str
    estimate: float
    ci_low: float = math.nan
    ci_high: float = math.nan
    verdict: str = ""


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "" if x is None else str(x)


def write_results(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow([
                RESULT_SCHEMA_VERSION, r.experiment, r.series, r.parameter, _cell(r.value),
                r.metric, _cell(r.estimate), _cell(r.ci_low), _cell(r.ci_high), r.verdict,
            ])


def _number(text):
    if text == "":
        return math.nan
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_results(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RESULT_HEADER:
            raise DatasetValidationError(f"unexpected result header {header}", line=1)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(RESULT_HEADER):
                raise DatasetValidationError(f"expected {len(RESULT_HEADER)} fields, found {len(row)}", line=line_no)
            if row[0] != RESULT_SCHEMA_VERSION:
                raise DatasetValidationError(f"unsupported schema version {row[0]!r}", line=line_no, field="schema_version")
            rows.append(ResultRow(
                experiment=row[1], series=row[2], parameter=row[3], value=_number(row[4]), metric=row[5],
                estimate=_number(row[6]), ci_low=_number(row[7]), ci_high=_number(row[8]), verdict=row[9],
            ))
    return rows


def library_versions():
    import scipy
    import sklearn

    from . import __version__

    return {
        "heavytail": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "python": platform.python_version(),
    }


def write_manifest(cfg, experiment, path, outputs=(), exit_code=0):
    manifest = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "experiment": experiment,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": cfg.as_dict(),
        "outputs": list(outputs),
        "exit_code": exit_code,
        "versions": library_versions(),
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")
    return manifest
