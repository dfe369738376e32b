"""File formats: observation and covariate CSVs, the flat config file, result tables, manifests.

Observation CSV header: ``site_id,s1[,s2],type,value,holdout[,trials]``;
one row per (site, type).  A held-out site may leave ``value`` empty.
Covariate CSV header: ``site_id,name1,name2,...``, one row per site.

Config file: ``key = value`` lines, ``#`` comments.  Keys::

    family.<k> = logitbeta | weibull | gaussian | poisson | binomial
    family.<k>.alpha_z, family.<k>.kappa_z, family.<k>.alpha_xi = <float>
    alpha_xi = <float>                  default for every family
    covariates.<k> = intercept, x1, response:1, ...
    basis.<name> = gaussian_rbf; scope=1; knots=15 [; lo=..; hi=..; bandwidth=..]
    basis.<name> = bisquare; scope=shared; grid=10x10 [; radius=..; radius_factor=..]
    distance = planar | greatcircle
    prior.<field> = <float>             any hyperprior field, e.g. prior.rho_z_scale
    quantiles = 0.025, 0.5, 0.975
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisBlock, bisquare_block_2d, rbf_block_1d
from .core import DataError, DesignSpec, FamilyKind, HyperpriorConfig, ObservationSet
from .subset import ConfigError

PRECISION_ENV = "SMEPR_PRECISION"
DEFAULT_PRECISION = 10


def precision() -> int:
    raw = os.environ.get(PRECISION_ENV, "")
    if not raw:
        return DEFAULT_PRECISION
    try:
        digits = int(raw)
    except ValueError:
        raise ConfigError(f"{PRECISION_ENV} must be an integer, got {raw!r}") from None
    if not 1 <= digits <= 17:
        raise ConfigError(f"{PRECISION_ENV} must lie in [1, 17], got {digits}")
    return digits


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.{precision()}g}"


def write_table(path, header, rows) -> Path:
    """Write ``rows`` (sequences) under ``header`` with the configured precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        return header, [row for row in reader if row]


def _number(text, path, line, col, kind=float):
    try:
        value = kind(text.strip())
    except ValueError:
        raise DataError(f"{path}:{line}: column {col!r} is not a valid number: {text!r}") from None
    return value


# observations ---------------------------------------------------------------

def load_observations(path, covariates_path=None) -> ObservationSet:
    """Parse the observation CSV (and optional covariate CSV) into an ObservationSet."""
    header, body = read_table(path)
    need = {"site_id", "type", "value", "holdout"}
    if not need <= set(header):
        raise DataError(f"{path}: header must contain {sorted(need)}, got {header}")
    coord_cols = [c for c in ("s1", "s2") if c in header]
    if not coord_cols or coord_cols[0] != "s1":
        raise DataError(f"{path}: header needs coordinate column s1 (and optionally s2)")
    idx = {name: header.index(name) for name in header}
    has_trials = "trials" in idx

    site_coord: dict[int, tuple] = {}
    site_hold: dict[int, bool] = {}
    rs, rt, rz, rm = [], [], [], []
    for line, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        site = _number(row[idx["site_id"]], path, line, "site_id", int)
        k = _number(row[idx["type"]], path, line, "type", int)
        if k < 1:
            raise DataError(f"{path}:{line}: unknown type index {k}")
        hold_text = row[idx["holdout"]].strip()
        if hold_text not in ("0", "1"):
            raise DataError(f"{path}:{line}: holdout must be 0 or 1, got {hold_text!r}")
        hold = hold_text == "1"
        coord = tuple(_number(row[idx[c]], path, line, c) for c in coord_cols)
        if site in site_coord:
            if site_coord[site] != coord:
                raise DataError(f"{path}:{line}: site {site} has conflicting coordinates")
            if site_hold[site] != hold:
                raise DataError(f"{path}:{line}: site {site} has conflicting holdout flags")
        site_coord[site] = coord
        site_hold[site] = hold
        text = row[idx["value"]].strip()
        if not text:
            if hold:
                continue
            raise DataError(f"{path}:{line}: missing value at a training site")
        rs.append(site)
        rt.append(k)
        rz.append(_number(text, path, line, "value"))
        rm.append(_number(row[idx["trials"]], path, line, "trials", int) if has_trials else 1)
    if not site_coord:
        raise DataError(f"{path}: no observation rows")

    site_ids = np.array(sorted(site_coord), dtype=np.int64)
    coords = np.array([site_coord[s] for s in site_ids], dtype=float)
    holdout = np.array([site_hold[s] for s in site_ids], dtype=bool)
    K = max(rt) if rt else 1
    covs = load_covariates(covariates_path, site_ids) if covariates_path else {}
    return ObservationSet(site_ids=site_ids, coords=coords, holdout=holdout, K=K,
                          row_site=np.array(rs, dtype=np.int64), row_type=np.array(rt, dtype=np.int64),
                          row_z=np.array(rz, dtype=float),
                          row_trials=np.array(rm, dtype=np.int64) if has_trials else None,
                          covariates=covs)


def load_covariates(path, site_ids) -> dict[str, np.ndarray]:
    header, body = read_table(path)
    if not header or header[0] != "site_id":
        raise DataError(f"{path}: first column must be site_id")
    names = header[1:]
    values: dict[int, list[float]] = {}
    for line, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        site = _number(row[0], path, line, "site_id", int)
        if site in values:
            raise DataError(f"{path}:{line}: duplicate site {site}")
        values[site] = [_number(v, path, line, n) for v, n in zip(row[1:], names)]
    missing = [int(s) for s in site_ids if int(s) not in values]
    if missing:
        raise DataError(f"{path}: no covariates for sites {missing[:5]}")
    table = np.array([values[int(s)] for s in site_ids], dtype=float).reshape(len(site_ids), len(names))
    return {name: table[:, j] for j, name in enumerate(names)}


def write_observations(obs: ObservationSet, path, covariates_path=None) -> list[Path]:
    """Write ``obs`` in canonical row order; held-out rows keep their values."""
    d = obs.coords.shape[1]
    pos = np.searchsorted(obs.site_ids, obs.row_site)
    order = np.lexsort((pos, obs.row_type))
    write_trials = bool(np.any(obs.row_trials != 1))
    header = ["site_id"] + [f"s{j + 1}" for j in range(d)] + ["type", "value", "holdout"]
    header += ["trials"] if write_trials else []

    def rows():
        for i in order:
            j = pos[i]
            row = [int(obs.site_ids[j]), *obs.coords[j], int(obs.row_type[i]), obs.row_z[i],
                   int(obs.holdout[j])]
            yield row + ([int(obs.row_trials[i])] if write_trials else [])

    out = [write_table(path, header, rows())]
    if covariates_path is not None:
        names = list(obs.covariates)
        out.append(write_table(covariates_path, ["site_id", *names],
                               ([int(s), *(obs.covariates[n][j] for n in names)]
                                for j, s in enumerate(obs.site_ids))))
    return out


# config ---------------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a fit needs besides data and run flags."""

    families: tuple[FamilyKind, ...]
    design: DesignSpec
    hyperpriors: HyperpriorConfig = field(default_factory=HyperpriorConfig)
    quantiles: tuple[float, ...] = (0.025, 0.5, 0.975)


def parse_config_text(text: str, coords=None, source="config") -> RunConfig:
    """Parse the flat config format; ``coords`` supplies defaults for basis extents."""
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        entries[key] = value

    def take(key, default=None):
        return entries.pop(key, default)

    def as_float(key, text):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{source}: {key} must be a number, got {text!r}") from None

    types = sorted({int(k.split(".")[1]) for k in entries if k.startswith("family.")
                    and k.split(".")[1].isdigit()})
    if not types or types != list(range(1, len(types) + 1)):
        raise ConfigError(f"{source}: family.1 .. family.K must be given without gaps")
    alpha_xi = as_float("alpha_xi", take("alpha_xi", "0.5"))
    families = []
    for k in types:
        tag = take(f"family.{k}")
        if tag is None:
            raise ConfigError(f"{source}: family.{k} is missing")
        consts = {}
        for c in ("alpha_z", "kappa_z", "alpha_xi"):
            v = take(f"family.{k}.{c}")
            if v is not None:
                consts[c] = as_float(f"family.{k}.{c}", v)
        consts.setdefault("alpha_xi", alpha_xi)
        try:
            families.append(FamilyKind(tag.strip().lower(), **consts))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}: family.{k}: {exc}") from None

    covariates = []
    for k in types:
        text = take(f"covariates.{k}", "")
        covariates.append(tuple(c.strip() for c in text.split(",") if c.strip()))

    distance = take("distance", "planar")
    blocks = []
    for key in [k for k in entries if k.startswith("basis.")]:
        blocks.append(_parse_block(key[len("basis."):], take(key), coords, source))

    prior_fields = {f.name for f in dataclasses.fields(HyperpriorConfig)}
    priors = {}
    for key in [k for k in entries if k.startswith("prior.")]:
        name = key[len("prior."):]
        if name not in prior_fields:
            raise ConfigError(f"{source}: unknown hyperprior {name!r}")
        priors[name] = as_float(key, take(key))
    quantiles = tuple(as_float("quantiles", q) for q in take("quantiles", "0.025,0.5,0.975").split(",")
                      if q.strip())
    if entries:
        raise ConfigError(f"{source}: unknown keys {sorted(entries)}")
    try:
        design = DesignSpec(tuple(covariates), tuple(blocks), distance=distance)
        hp = HyperpriorConfig(**priors)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(tuple(families), design, hp, quantiles)


def _parse_block(name, text, coords, source) -> BasisBlock:
    parts = [p.strip() for p in text.split(";") if p.strip()]
    kind = parts[0].lower()
    opts = {}
    for p in parts[1:]:
        if "=" not in p:
            raise ConfigError(f"{source}: basis.{name}: expected option=value, got {p!r}")
        k, v = (x.strip() for x in p.split("=", 1))
        opts[k] = v
    scope_text = opts.pop("scope", "shared")
    scope = None if scope_text == "shared" else int(scope_text)
    try:
        if kind == "gaussian_rbf":
            count = int(opts.pop("knots"))
            lo = float(opts.pop("lo")) if "lo" in opts else float(np.min(coords[:, 0]))
            hi = float(opts.pop("hi")) if "hi" in opts else float(np.max(coords[:, 0]))
            bw = float(opts.pop("bandwidth")) if "bandwidth" in opts else None
            block = rbf_block_1d(lo, hi, count, scope=scope, bandwidth=bw, name=name)
        elif kind == "bisquare":
            shape = tuple(int(x) for x in opts.pop("grid").lower().split("x"))
            radius = float(opts.pop("radius")) if "radius" in opts else None
            factor = float(opts.pop("radius_factor", 1.5))
            block = bisquare_block_2d(coords, shape, scope=scope, radius=radius, radius_factor=factor,
                                      name=name)
        else:
            raise ConfigError(f"{source}: basis.{name}: unknown kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"{source}: basis.{name}: missing option {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: basis.{name}: {exc}") from None
    if opts:
        raise ConfigError(f"{source}: basis.{name}: unknown options {sorted(opts)}")
    return block


def load_config(path, coords=None) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), coords, source=str(path))


def format_config(cfg: RunConfig, extents: dict[str, tuple[float, float]] | None = None) -> str:
    """Inverse of :func:`parse_config_text` for 1-D RBF designs (used by ``simulate``)."""
    lines = []
    for k, fam in enumerate(cfg.families, start=1):
        lines.append(f"family.{k} = {fam.tag}")
        if fam.tag == "logitbeta":
            lines += [f"family.{k}.alpha_z = {fam.alpha_z!r}", f"family.{k}.kappa_z = {fam.kappa_z!r}"]
        if fam.tag in ("poisson", "binomial"):
            lines.append(f"family.{k}.alpha_xi = {fam.alpha_xi!r}")
    for k, covs in enumerate(cfg.design.covariates, start=1):
        lines.append(f"covariates.{k} = {', '.join(covs)}")
    for block in cfg.design.blocks:
        if block.kind != "gaussian_rbf" or block.knots.shape[1] != 1:
            raise ValueError("only 1-D Gaussian RBF blocks can be written back")
        knots = block.knots[:, 0]
        scope = "shared" if block.scope is None else block.scope
        lines.append(f"basis.{block.name} = gaussian_rbf; scope={scope}; knots={len(knots)}; "
                     f"lo={float(knots.min())!r}; hi={float(knots.max())!r}; bandwidth={float(block.bandwidth)!r}")
    lines.append(f"distance = {cfg.design.distance}")
    default = HyperpriorConfig()
    for f in dataclasses.fields(HyperpriorConfig):
        value = getattr(cfg.hyperpriors, f.name)
        if value != getattr(default, f.name):
            lines.append(f"prior.{f.name} = {value!r}")
    lines.append("quantiles = " + ", ".join(repr(q) for q in cfg.quantiles))
    return "\n".join(lines) + "\n"


# manifest -------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def add_input(self, role: str, path) -> None:
        self.inputs[role] = {"path": str(Path(path).resolve()), "sha256": sha256_file(path)}

    def add_outputs(self, paths, root) -> None:
        for p in paths:
            self.outputs[str(Path(p).relative_to(root))] = sha256_file(p)

    def write(self, directory, name="manifest.json") -> Path:
        path = Path(directory) / name
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path

    @classmethod
    def read(cls, directory) -> "RunManifest":
        path = Path(directory) / "manifest.json"
        if not path.exists():
            raise DataError(f"{directory}: no manifest.json")
        return cls(**json.loads(path.read_text(encoding="utf-8")))
