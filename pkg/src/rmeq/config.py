"""Run configuration: strict JSON schema -> domain objects.

Unknown keys are rejected at every nesting level so a typo cannot silently
change a run.  Every command writes a resolved echo of its configuration
(defaults filled in) next to its outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensembles import BaseLaw, ColumnEnsemble, ColumnModel
from .errors import ConfigError
from .matio import read_matrix
from .spectral import ContourSpec

VERIFY_SUITES = ("rates", "tails", "identities", "talagrand", "products",
                 "hanson_wright")


def _take(d: dict, allowed: dict, context: str) -> dict:
    """Apply defaults and reject unknown keys; ``...`` marks required."""
    if not isinstance(d, dict):
        raise ConfigError(f"{context}: expected an object, got {type(d).__name__}")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    out = {}
    for key, default in allowed.items():
        if key in d:
            out[key] = d[key]
        elif default is ...:
            raise ConfigError(f"{context}: missing required key '{key}'")
        else:
            out[key] = default
    return out


def _as_complex(value, context: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{context}: expected a number or [re, im] pair")


def _load_vector(value, p: int, base_dir: Path, context: str) -> np.ndarray:
    if isinstance(value, str):
        m = read_matrix(base_dir / value)
        v = m.reshape(-1)
    elif isinstance(value, (list, tuple)):
        v = np.asarray(value, dtype=np.float64)
    else:
        raise ConfigError(f"{context}: expected a path or an inline list")
    if v.shape != (p,):
        raise ConfigError(f"{context}: expected {p} entries, got {v.shape}")
    return v


def _load_factor(value, p: int, base_dir: Path, context: str):
    if value is None or value == "identity":
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return read_matrix(base_dir / value)
    if isinstance(value, (list, tuple)):
        return np.asarray(value, dtype=np.float64)
    raise ConfigError(f"{context}: expected 'identity', a number, a path "
                      "or an inline matrix")


def parse_ensemble(cfg: dict, base_dir: Path, seed_override: int | None = None) -> ColumnEnsemble:
    c = _take(cfg, {"p": ..., "n": ..., "gamma": 0.0, "seed": ..., "classes": ...},
              "ensemble")
    p, n = int(c["p"]), int(c["n"])
    seed = int(seed_override if seed_override is not None else c["seed"])
    if not isinstance(c["classes"], list) or not c["classes"]:
        raise ConfigError("ensemble.classes: expected a non-empty list")
    models = []
    assignment = np.empty(n, dtype=np.int64)
    cursor = 0
    for ci, cls in enumerate(c["classes"]):
        ctx = f"ensemble.classes[{ci}]"
        cc = _take(cls, {"mean": None, "factor": "identity", "base": ...,
                         "count": ...}, ctx)
        mean = (np.zeros(p) if cc["mean"] is None
                else _load_vector(cc["mean"], p, base_dir, f"{ctx}.mean"))
        factor = _load_factor(cc["factor"], p, base_dir, f"{ctx}.factor")
        try:
            base = BaseLaw(cc["base"])
        except ValueError:
            raise ConfigError(f"{ctx}.base: unknown law {cc['base']!r}") from None
        count = int(cc["count"])
        if count <= 0:
            raise ConfigError(f"{ctx}.count: must be positive")
        models.append(ColumnModel(mean, factor, base))
        if cursor + count > n:
            raise ConfigError("ensemble.classes: counts exceed n")
        assignment[cursor:cursor + count] = ci
        cursor += count
    if cursor != n:
        raise ConfigError(f"ensemble.classes: counts sum to {cursor}, expected n={n}")
    return ColumnEnsemble(p, n, tuple(models), assignment, seed,
                          float(c["gamma"]))


def parse_contour(cfg: dict, context: str) -> ContourSpec:
    c = _take(cfg, {"x_min": ..., "x_max": ..., "y_half": ...,
                    "nodes_per_side": 64}, context)
    return ContourSpec(float(c["x_min"]), float(c["x_max"]), float(c["y_half"]),
                       int(c["nodes_per_side"]))


@dataclass
class RunConfig:
    """Parsed top-level configuration plus the resolved echo dictionary."""

    ensemble: ColumnEnsemble
    output_dir: Path
    seed: int
    blocks: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)


_TOP_KEYS = {
    "ensemble": ...,
    "output_dir": "out",
    "seed": None,
    "solve": None,
    "density": None,
    "projector": None,
    "verify": None,
    "mc": None,
    "stats": None,
    "gen": None,
}


def load_config(path, seed_override: int | None = None,
                out_override: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    top = _take(raw, _TOP_KEYS, "config")
    seed = seed_override
    if seed is None:
        seed = top["seed"]
    ens = parse_ensemble(top["ensemble"], path.parent, seed)
    blocks = {}
    if top["solve"] is not None:
        blocks["solve"] = _take(top["solve"], {
            "z_grid": None, "contour": None, "tol": 1e-10, "max_iter": 1000,
            "damping": 1.0, "dump_q_tilde": False,
        }, "solve")
    if top["density"] is not None:
        blocks["density"] = _take(top["density"], {
            "x_min": ..., "x_max": ..., "points": ..., "eta": ...,
            "mc": False, "n_draws": 200,
        }, "density")
    if top["projector"] is not None:
        blocks["projector"] = _take(top["projector"], {
            "contour": ..., "A": "identity", "mc": False, "n_draws": 200,
            "tol": 1e-10, "max_iter": 2000,
        }, "projector")
    if top["verify"] is not None:
        blocks["verify"] = _take(top["verify"], {
            "suites": ..., "n_draws": 2000, "n_list": [100, 200, 400],
            "z": [-1.0, 0.0],
        }, "verify")
        for s in blocks["verify"]["suites"]:
            if s not in VERIFY_SUITES:
                raise ConfigError(f"verify.suites: unknown suite {s!r}")
    if top["mc"] is not None:
        blocks["mc"] = _take(top["mc"], {"n_draws": ..., "z": ...}, "mc")
    if top["stats"] is not None:
        blocks["stats"] = _take(top["stats"], {"n_draws": 100, "eps": 0.05},
                                "stats")
    if top["gen"] is not None:
        blocks["gen"] = _take(top["gen"], {"draw_index": 0, "format": "csv"},
                              "gen")
    out_dir = Path(out_override if out_override is not None else top["output_dir"])
    resolved = {
        "ensemble": _echo_ensemble(top["ensemble"], ens),
        "output_dir": str(out_dir),
        "seed": ens.seed,
        **{k: blocks.get(k) for k in
           ("solve", "density", "projector", "verify", "mc", "stats", "gen")},
    }
    return RunConfig(ensemble=ens, output_dir=out_dir, seed=ens.seed,
                     blocks=blocks, resolved=resolved)


def _echo_ensemble(raw_block: dict, ens: ColumnEnsemble) -> dict:
    echo = dict(raw_block)
    echo["seed"] = ens.seed
    echo["gamma"] = ens.gamma
    return echo
