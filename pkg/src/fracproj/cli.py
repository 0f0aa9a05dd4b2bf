"""Command-line experiment runner.

Every subcommand reads its knobs from flags, optionally overridden by a
JSON config file (``--config``), and writes CSV or JSON artifacts into
``--out``.  Each artifact records the package version and seed together
with a hash of the resolved configuration.  Nothing that varies between
runs is written, so identical configurations give byte-identical files.  When the environment
variable ``FRACPROJ_CACHE`` names a directory, finished artifacts are
stored there under the configuration hash and reused on later runs.

Run ``fracproj describe <subcommand>`` for the schema of a subcommand and a
runnable example.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import math
import os
import re
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import BudgetExceededError, HypothesisError, ResolutionError

CACHE_ENV = "FRACPROJ_CACHE"
GOLDEN = "(sqrt(5)-1)/2"


# ----------------------------------------------------------------------
# schemas
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Knob:
    type: type
    default: Any
    help: str
    choices: tuple | None = None


def _range_help(what: str) -> str:
    return f"{what} grid as lo:hi:step (inclusive of hi up to rounding)"


SCHEMAS: dict[str, dict[str, Knob]] = {
    "scan-bernoulli": {
        "lambda": Knob(str, "0.50:0.65:0.005", _range_help("contraction ratio")),
        "depth": Knob(int, 14, "dyadic depth n of the entropy H(mu, D_n)"),
        "guard": Knob(int, 6, "extra binary digits kept below depth n"),
        "threshold": Knob(float, 0.02, "flag points whose deficit min(1, sd) - H/n exceeds this"),
        "method": Knob(str, "auto", "tree construction", ("auto", "words", "grid")),
        "witness_depth": Knob(int, 3, "word length searched for exact-overlap witnesses"),
    },
    "entropy-profile": {
        "ifs": Knob(str, None, "parametric IFS description file (JSON)"),
        "grid": Knob(str, None, _range_help("parameter") + "; defaults to 41 points over the file's interval"),
        "depth": Knob(int, 12, "dyadic depth n"),
        "guard": Knob(int, 6, "extra binary digits kept below depth n"),
        "threshold": Knob(float, 0.02, "dip threshold on the deficit"),
        "method": Knob(str, "auto", "tree construction", ("auto", "words", "grid")),
    },
    "transversality": {
        "ifs": Knob(str, None, "parametric IFS file; default is the Bernoulli-convolution family"),
        "interval": Knob(str, "0.50:0.60", "parameter interval lo:hi"),
        "beta": Knob(float, 1.0, "exponent beta of the audited condition"),
        "c_beta": Knob(float, 0.01, "constant C_beta of the audited condition"),
        "depth": Knob(int, 8, "prefix length of the audited codings"),
        "t_grid": Knob(int, 101, "number of parameter grid points"),
        "max_pairs": Knob(int, 1 << 18, "exhaustive up to this many pairs, sampled above"),
    },
    "overlaps": {
        "ifs": Knob(str, None, "fixed IFS file; default is the Bernoulli convolution at --lam"),
        "lam": Knob(str, GOLDEN, "exact contraction ratio, e.g. 1/2 or (sqrt(5)-1)/2"),
        "length": Knob(int, 3, "word length searched"),
    },
    "project-cantor": {
        "theta_grid": Knob(int, 256, "number of directions in [0, pi)"),
        "depth": Knob(int, 12, "dyadic depth n"),
        "guard": Knob(int, 6, "extra binary digits kept below depth n"),
        "method": Knob(str, "auto", "tree construction", ("auto", "words", "grid")),
        "witness_depth": Knob(int, 2, "word length for coincidence-direction witnesses"),
    },
    "assouad": {
        "k": Knob(int, 2, "big scale 2^-k"),
        "m": Knob(int, 8, "scale gap: small scale 2^-(k+m)"),
        "theta": Knob(str, "0", "projection direction (exact, e.g. 0 or atan2(1,1) as 1:1)"),
    },
    "scenery": {
        "measure": Knob(str, "bernoulli", "measure preset", ("bernoulli", "cantor3", "four-corner-fiber")),
        "p": Knob(float, 0.5, "weight of digit 0 for the bernoulli preset"),
        "steps": Knob(int, 200, "magnification steps N"),
        "l": Knob(int, 8, "component resolution l"),
        "seed": Knob(int, 0, "seed for the point drawn from the measure"),
    },
    "uniform-entropy": {
        "measure": Knob(str, "bernoulli", "measure preset", ("bernoulli", "cantor3", "lebesgue")),
        "p": Knob(float, 0.5, "weight of digit 0 for the bernoulli preset"),
        "n": Knob(int, 10, "number of scales"),
        "l": Knob(int, 4, "component resolution"),
        "eps": Knob(float, 0.1, "tolerance epsilon"),
        "alpha": Knob(float, 1.0, "target entropy dimension alpha"),
    },
    "spreading": {
        "measure": Knob(str, "digits03", "measure preset", ("lebesgue", "dirac", "digits03")),
        "n": Knob(int, 16, "number of scales"),
        "l": Knob(int, 3, "refinement step l"),
        "eps": Knob(float, 0.1, "tolerance epsilon"),
        "translations": Knob(str, "0", "comma-separated translations, or 'default' for the golden-ratio list"),
    },
    "sumset-growth": {
        "preset": Knob(str, "positive", "experiment", ("positive", "failed", "adversarial")),
        "n": Knob(int, 12, "grid resolution"),
        "gamma": Knob(float, 0.25, "gamma"),
        "l": Knob(int, 2, "spreading step l"),
        "delta": Knob(float, 0.1, "growth exponent delta"),
    },
    "regularize": {
        "measure": Knob(str, "random", "measure preset", ("random", "lebesgue", "dirac")),
        "dim": Knob(int, 1, "ambient dimension"),
        "T": Knob(int, 3, "levels per block"),
        "l": Knob(int, 4, "number of blocks"),
        "seed": Knob(int, 0, "seed for the random tree"),
    },
    "porosity": {
        "set": Knob(str, "digits01", "grid set preset", ("point", "digits01", "full")),
        "n": Knob(int, 12, "resolution"),
        "l": Knob(int, 1, "window length l"),
        "tau": Knob(float, 0.5, "decay factor tau"),
        "gamma": Knob(float, 0.4, "gamma"),
        "point": Knob(int, 0, "grid index for the point preset"),
    },
}

SCENERY_PRESETS = {
    "bernoulli": "base-2 Bernoulli(p) measure",
    "cantor3": "middle-thirds Cantor measure, weights 1/2",
    "four-corner-fiber": "vertical fiber of the four-corner measure: base-4 digits {0,3}, weights 1/2",
}

EXAMPLES = {
    "scan-bernoulli": {"lambda": "0.60:0.63:0.01", "depth": 10},
    "entropy-profile": {"ifs": "bernoulli.json", "grid": "0.55:0.65:0.05", "depth": 10},
    "transversality": {"interval": "0.50:0.60", "depth": 6, "t_grid": 21},
    "overlaps": {"lam": GOLDEN, "length": 3},
    "project-cantor": {"theta_grid": 8, "depth": 8},
    "assouad": {"k": 2, "m": 8, "theta": "0"},
    "scenery": {"measure": "bernoulli", "p": 0.25, "steps": 50, "l": 8},
    "uniform-entropy": {"measure": "lebesgue", "n": 8, "l": 4},
    "spreading": {"measure": "lebesgue", "n": 10, "l": 2},
    "sumset-growth": {"preset": "positive", "n": 12, "gamma": 0.25},
    "regularize": {"measure": "random", "T": 3, "l": 4, "seed": 0},
    "porosity": {"set": "digits01", "n": 12, "l": 1, "tau": 0.5, "gamma": 0.4},
}


class ConfigError(ValueError):
    """A configuration value or file violates the subcommand schema."""


# ----------------------------------------------------------------------
# config handling
# ----------------------------------------------------------------------
def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _coerce(name: str, knob: Knob, value, where: str = ""):
    if value is None:
        return None
    if knob.type is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif knob.type is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"{where}field '{name}': expected {knob.type.__name__}, got {type(value).__name__} ({value!r})")
    if knob.choices and value not in knob.choices:
        raise ConfigError(f"{where}field '{name}': {value!r} not in {list(knob.choices)}")
    return value


def load_config(path: str | Path, subcommand: str) -> dict:
    """Read and validate a JSON config file; errors name the line and field."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: invalid JSON ({e.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    schema = SCHEMAS[subcommand]
    out = {}
    for key, value in data.items():
        line = _line_of(text, key)
        where = f"{path}:{line}: " if line else f"{path}: "
        if key == "subcommand":
            if value != subcommand:
                raise ConfigError(f"{where}field 'subcommand': config is for {value!r}, not {subcommand!r}")
            continue
        if key not in schema:
            hint = difflib.get_close_matches(key, list(schema), n=1)
            extra = f" (did you mean '{hint[0]}'?)" if hint else ""
            raise ConfigError(f"{where}unknown field '{key}'{extra}")
        out[key] = _coerce(key, schema[key], value, where)
    return out


def resolve_config(subcommand: str, flags: dict, config_path: str | None) -> dict:
    """Defaults, then flags, then the config file (which wins)."""
    schema = SCHEMAS[subcommand]
    cfg = {name: knob.default for name, knob in schema.items()}
    for name, knob in schema.items():
        v = flags.get(name)
        if v is not None:
            cfg[name] = _coerce(name, knob, v, "flag ")
    if config_path:
        cfg.update(load_config(config_path, subcommand))
    return cfg


def config_hash(subcommand: str, cfg: dict) -> str:
    blob = json.dumps({"subcommand": subcommand, "config": cfg, "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------
def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (Fraction,)):
        return str(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    return str(obj)


def _meta(subcommand: str, cfg: dict) -> dict:
    return {
        "subcommand": subcommand,
        "config": cfg,
        "config_hash": config_hash(subcommand, cfg),
        "seed": cfg.get("seed", 0),
        "version": __version__,
    }


def render_json(meta: dict, result) -> str:
    return json.dumps({"meta": meta, "result": result}, sort_keys=True, indent=2, default=_jsonable) + "\n"


def render_csv(meta: dict, body: str) -> str:
    head = f"# fracproj {meta['version']} {meta['subcommand']} config_hash={meta['config_hash']} seed={meta['seed']}\n"
    return head + body


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------
def parse_range(text: str, name: str) -> np.ndarray:
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"field '{name}': expected lo:hi:step, got {text!r}") from None
    if len(vals) != 3 or vals[2] <= 0 or vals[1] < vals[0]:
        raise ConfigError(f"field '{name}': expected lo:hi:step with lo <= hi and step > 0, got {text!r}")
    lo, hi, step = vals
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def parse_interval(text: str, name: str) -> tuple[float, float]:
    parts = text.split(":")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"field '{name}': expected lo:hi, got {text!r}") from None
    if not lo < hi:
        raise ConfigError(f"field '{name}': need lo < hi")
    return lo, hi


def _bernoulli_family(interval):
    from .parametric import ParametricFamily

    return ParametricFamily.bernoulli_convolution(interval=interval)


def _load_family(path: str):
    from .ifsfile import load_ifs
    from .parametric import ParametricFamily

    fam = load_ifs(path)
    if not isinstance(fam, ParametricFamily):
        raise ConfigError(f"field 'ifs': {path} describes a fixed IFS, a parametric family is required")
    return fam


# ----------------------------------------------------------------------
# runners: each returns {filename: text}
# ----------------------------------------------------------------------
def _profile_outputs(meta, family, grid, cfg, jobs):
    from .scan import dip_detector, entropy_profile

    prof = entropy_profile(family, grid, cfg["depth"], guard=cfg["guard"], method=cfg["method"], jobs=jobs)
    dips = dip_detector(prof, cfg["threshold"], family, cfg.get("witness_depth", 3))
    return {
        "profile.csv": render_csv(meta, prof.to_csv(cfg["threshold"])),
        "dips.json": render_json(meta, json.loads(dips.to_json())),
    }


def run_scan_bernoulli(cfg, meta, jobs):
    grid = parse_range(cfg["lambda"], "lambda")
    if grid.min() <= 0 or grid.max() >= 1:
        raise ConfigError("field 'lambda': ratios must lie in (0, 1)")
    family = _bernoulli_family((float(grid.min()), float(grid.max())))
    return _profile_outputs(meta, family, grid, cfg, jobs)


def run_entropy_profile(cfg, meta, jobs):
    if not cfg["ifs"]:
        raise ConfigError("field 'ifs': required")
    family = _load_family(cfg["ifs"])
    if cfg["grid"]:
        grid = parse_range(cfg["grid"], "grid")
    else:
        grid = np.round(np.linspace(*family.interval, 41), 12)
    return _profile_outputs(meta, family, grid, cfg, jobs)


def run_transversality(cfg, meta, jobs):
    from .parametric import transversality_audit

    interval = parse_interval(cfg["interval"], "interval")
    family = _load_family(cfg["ifs"]) if cfg["ifs"] else _bernoulli_family(interval)
    rep = transversality_audit(
        family, interval, cfg["beta"], cfg["c_beta"], cfg["depth"], t_grid=cfg["t_grid"], max_pairs=cfg["max_pairs"]
    )
    result = asdict(rep)
    result["passed"] = rep.passed
    return {"transversality.json": render_json(meta, result)}


def run_overlaps(cfg, meta, jobs):
    from .exact import parse_exact
    from .ifs import WeightedIFS
    from .ifsfile import load_ifs
    from .overlaps import exact_overlap_search

    if cfg["ifs"]:
        ifs = load_ifs(cfg["ifs"])
        if not isinstance(ifs, WeightedIFS):
            raise ConfigError("field 'ifs': overlaps need a fixed IFS")
    else:
        try:
            lam = parse_exact(cfg["lam"])
        except ValueError as e:
            raise ConfigError(f"field 'lam': {e}") from None
        ifs = WeightedIFS.bernoulli_convolution(lam)
    pairs = exact_overlap_search(ifs, cfg["length"])
    return {"overlaps.json": render_json(meta, {"pairs": [[str(a), str(b)] for a, b in pairs]})}


def run_project_cantor(cfg, meta, jobs):
    from .planar import coincidence_witnesses, direction_scan, four_corner_ifs, scan_to_csv

    ifs = four_corner_ifs()
    thetas = [math.pi * j / cfg["theta_grid"] for j in range(cfg["theta_grid"])]
    rows = direction_scan(ifs, thetas, cfg["depth"], guard=cfg["guard"], method=cfg["method"])
    wits = coincidence_witnesses(ifs, cfg["witness_depth"])
    return {
        "direction_scan.csv": render_csv(meta, scan_to_csv(rows)),
        "witnesses.json": render_json(meta, [w.to_dict() for w in wits]),
    }


def _parse_direction(text: str):
    from .planar import Direction

    if ":" in text:
        u, v = (int(p) for p in text.split(":"))
        return Direction.from_vector(u, v)
    return Direction(float(text))


def run_assouad(cfg, meta, jobs):
    from .ifs import attractor_cells
    from .planar import assouad_estimate, four_corner_ifs, planar_attractor_cells, project_ifs

    k, m = cfg["k"], cfg["m"]
    ifs = four_corner_ifs()
    try:
        direction = _parse_direction(cfg["theta"])
    except ValueError:
        raise ConfigError(f"field 'theta': cannot read a direction from {cfg['theta']!r}") from None
    planar = assouad_estimate(planar_attractor_cells(ifs, k + m), k, m)
    proj, _ = project_ifs(ifs, direction).rescaled()
    cells = attractor_cells(proj.ratios, proj.translations, proj.probabilities, k + m)
    line = assouad_estimate(cells, k, m)
    result = {
        "k": k,
        "m": m,
        "theta": direction.theta,
        "set_estimate": planar.estimate,
        "projection_estimate": line.estimate,
        "set_cells": len(planar_attractor_cells(ifs, k + m)),
        "projection_cells": len(cells),
    }
    return {"assouad.json": render_json(meta, result)}


def scenery_source(name: str, p: float = 0.5):
    from .ifs import WeightedIFS
    from .scenery import SelfSimilarSource

    if name == "bernoulli":
        return SelfSimilarSource.bernoulli([p, 1 - p])
    if name == "cantor3":
        return SelfSimilarSource.from_ifs(WeightedIFS.from_pairs([(Fraction(1, 3), 0), (Fraction(1, 3), Fraction(2, 3))]))
    if name == "four-corner-fiber":
        return SelfSimilarSource.from_ifs(WeightedIFS.from_pairs([(Fraction(1, 4), 0), (Fraction(1, 4), Fraction(3, 4))]))
    raise ConfigError(f"field 'measure': unknown preset {name!r}")


def run_scenery(cfg, meta, jobs):
    from .scenery import scenery_orbit

    src = scenery_source(cfg["measure"], cfg["p"])
    stats = scenery_orbit(src, None, cfg["steps"], cfg["l"], seed=cfg["seed"])
    return {"scenery.csv": render_csv(meta, stats.to_csv())}


def _tree_preset(name: str, depth: int, p: float = 0.5):
    from .dyadic import TreeMeasure
    from .ifs import WeightedIFS, build_tree_measure

    if name == "bernoulli":
        return TreeMeasure.bernoulli([p, 1 - p], depth)
    if name == "lebesgue":
        return TreeMeasure.uniform(depth)
    if name == "cantor3":
        return build_tree_measure(WeightedIFS.from_pairs([(Fraction(1, 3), 0), (Fraction(1, 3), Fraction(2, 3))]), depth)
    raise ConfigError(f"field 'measure': unknown preset {name!r}")


def run_uniform_entropy(cfg, meta, jobs):
    from .scenery import uniform_entropy_statistic

    mu = _tree_preset(cfg["measure"], cfg["n"] + cfg["l"], cfg["p"])
    value = uniform_entropy_statistic(mu, cfg["n"], cfg["l"], cfg["eps"], cfg["alpha"])
    return {"uniform_entropy.json": render_json(meta, {"mass_of_uniform_points": value})}


def run_spreading(cfg, meta, jobs):
    from .additive import digit_measure
    from .dyadic import TreeMeasure
    from .scenery import default_translations, spreading_check

    depth = cfg["n"] + cfg["l"]
    depth += depth % 2
    if cfg["measure"] == "lebesgue":
        eta = TreeMeasure.uniform(depth)
    elif cfg["measure"] == "dirac":
        eta = TreeMeasure.dirac(0.0, depth)
    else:
        eta = digit_measure(depth, 2, (0, 3))
    if cfg["translations"] == "default":
        ts = default_translations()
    else:
        try:
            ts = [float(v) for v in cfg["translations"].split(",")]
        except ValueError:
            raise ConfigError("field 'translations': comma-separated numbers or 'default'") from None
    rep = spreading_check(eta, cfg["n"], cfg["l"], cfg["eps"], ts)
    result = {
        "spreading": rep.spreading,
        "translation": rep.translation,
        "good_mass": {repr(float(k)): float(v) for k, v in rep.good_mass.items()},
        "bad_fraction_min": float(rep.bad_fractions.min()) if rep.bad_fractions.size else None,
        "bad_fraction_max": float(rep.bad_fractions.max()) if rep.bad_fractions.size else None,
    }
    return {"spreading.json": render_json(meta, result)}


def run_sumset_growth(cfg, meta, jobs):
    from .additive import adversarial_search, preset_experiment

    if cfg["preset"] == "adversarial":
        result = adversarial_search(cfg["n"], cfg["gamma"], cfg["l"], cfg["delta"])
    else:
        result = preset_experiment(cfg["preset"], cfg["n"], cfg["gamma"], cfg["l"], cfg["delta"]).to_dict()
    return {"growth.json": render_json(meta, result)}


def run_regularize(cfg, meta, jobs):
    from .additive import regularize
    from .dyadic import TreeMeasure

    depth, d = cfg["T"] * cfg["l"], cfg["dim"]
    if d not in (1, 2):
        raise ConfigError("field 'dim': 1 or 2")
    if cfg["measure"] == "lebesgue":
        mu = TreeMeasure.uniform(depth, d)
    elif cfg["measure"] == "dirac":
        mu = TreeMeasure.dirac((1 / 3,) * d, depth)
    else:
        rng = np.random.default_rng(cfg["seed"])
        arr = rng.random((1 << depth,) * d) ** 3
        mu = TreeMeasure(arr / arr.sum())
    res = regularize(mu, cfg["T"], cfg["l"])
    result = {
        "ratios": [str(r) for r in res.ratios],
        "exponents": list(res.exponents),
        "retained_mass": res.retained_mass,
        "mass_floor": float(res.mass_floor),
        "selected_cells": int(res.mask.sum()),
    }
    return {"regularization.json": render_json(meta, result)}


def run_porosity(cfg, meta, jobs):
    from .additive import GridSet, digit_measure, porosity_witness
    from .dyadic import TreeMeasure

    n = cfg["n"]
    if cfg["set"] == "point":
        D = GridSet.from_indices(n, [cfg["point"]])
    elif cfg["set"] == "full":
        D = GridSet.full(n)
    else:
        if n % 2:
            raise ConfigError("field 'n': the digits01 set needs an even resolution")
        D = GridSet.from_indices(n, np.nonzero(np.asarray(digit_measure(n, 2, (0, 1)).masses(n)))[0])
    w = porosity_witness(TreeMeasure.uniform(n), D, n, cfg["l"], cfg["tau"], cfg["gamma"])
    result = {"rho": w.rho, "bound": w.bound, "mass_D": w.mass_D, "points": len(D), "min_windows": min(w.windows)}
    return {"porosity.json": render_json(meta, result)}


RUNNERS: dict[str, Callable] = {
    "scan-bernoulli": run_scan_bernoulli,
    "entropy-profile": run_entropy_profile,
    "transversality": run_transversality,
    "overlaps": run_overlaps,
    "project-cantor": run_project_cantor,
    "assouad": run_assouad,
    "scenery": run_scenery,
    "uniform-entropy": run_uniform_entropy,
    "spreading": run_spreading,
    "sumset-growth": run_sumset_growth,
    "regularize": run_regularize,
    "porosity": run_porosity,
}


# ----------------------------------------------------------------------
# describe
# ----------------------------------------------------------------------
def describe(subcommand: str) -> dict:
    """Machine-readable schema plus one runnable example config."""
    if subcommand not in SCHEMAS:
        hint = difflib.get_close_matches(subcommand, list(SCHEMAS), n=3)
        raise ConfigError(
            f"unknown subcommand {subcommand!r}; did you mean {hint}? known: {sorted(SCHEMAS)}"
            if hint
            else f"unknown subcommand {subcommand!r}; known: {sorted(SCHEMAS)}"
        )
    fields = {
        name: {
            "type": knob.type.__name__,
            "default": knob.default,
            "help": knob.help,
            **({"choices": list(knob.choices)} if knob.choices else {}),
        }
        for name, knob in SCHEMAS[subcommand].items()
    }
    out = {"subcommand": subcommand, "fields": fields, "example": {"subcommand": subcommand, **EXAMPLES[subcommand]}}
    if subcommand == "scenery":
        out["measure_presets"] = dict(SCENERY_PRESETS)
    return out


# ----------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------
def run(subcommand: str, cfg: dict, out_dir: Path, jobs: int = 1, use_cache: bool = True) -> tuple[list[Path], bool]:
    """Run a resolved config; returns the written paths and whether the cache served them."""
    meta = _meta(subcommand, cfg)
    cache_root = os.environ.get(CACHE_ENV)
    cache_dir = Path(cache_root) / subcommand / meta["config_hash"] if cache_root and use_cache else None
    if cache_dir is not None and (cache_dir / "MANIFEST").exists():
        names = (cache_dir / "MANIFEST").read_text().split()
        paths = []
        for name in names:
            atomic_write(out_dir / name, (cache_dir / name).read_text())
            paths.append(out_dir / name)
        return paths, True
    files = RUNNERS[subcommand](cfg, meta, jobs)
    paths = []
    for name in sorted(files):
        atomic_write(out_dir / name, files[name])
        paths.append(out_dir / name)
    if cache_dir is not None:
        staging = Path(tempfile.mkdtemp(dir=cache_dir.parent if cache_dir.parent.exists() else None))
        try:
            for name, text in files.items():
                (staging / name).write_text(text)
            (staging / "MANIFEST").write_text("\n".join(sorted(files)) + "\n")
            cache_dir.parent.mkdir(parents=True, exist_ok=True)
            if not cache_dir.exists():
                shutil.move(str(staging), str(cache_dir))
        finally:
            if staging.exists():
                shutil.rmtree(staging, ignore_errors=True)
    return paths, False


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracproj", description="Fractal projection and entropy experiments.")
    parser.add_argument("--version", action="version", version=f"fracproj {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    d = sub.add_parser("describe", help="print the schema and an example config of a subcommand")
    d.add_argument("name")
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment")
        for key, knob in schema.items():
            flag = "--" + key.replace("_", "-")
            kwargs = {"dest": key, "default": None, "help": f"{knob.help} (default: {knob.default})"}
            kwargs["type"] = knob.type
            if knob.choices:
                kwargs["choices"] = knob.choices
            p.add_argument(flag, **kwargs)
        p.add_argument("--config", help="JSON config file; its values override flags")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (outputs do not depend on it)")
        p.add_argument("--no-cache", action="store_true", help=f"ignore ${CACHE_ENV}")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "describe":
            print(json.dumps(describe(args.name), indent=2, sort_keys=True))
            return 0
        flags = vars(args)
        cfg = resolve_config(args.subcommand, flags, args.config)
        if args.jobs < 1:
            raise ConfigError("flag '--jobs': must be at least 1")
        paths, hit = run(args.subcommand, cfg, Path(args.out), args.jobs, not args.no_cache)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BudgetExceededError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (HypothesisError, ResolutionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    for p in paths:
        print(f"{'cached' if hit else 'wrote'} {p}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
