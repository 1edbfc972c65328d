"""JSON reconstruction configs.

Example::

    {
      "method": "darcs",
      "schedule": [
        {"start_iter": 1, "alpha": 0.1, "mu": 0.005, "K": 2, "beta": 0.01, "net_index": 0},
        {"start_iter": 11, "alpha": 0.1, "mu": 0.01, "K": 2, "beta": 0.01, "net_index": 0}
      ],
      "T": 20, "cg_tol": 1e-6, "cg_maxiter": 50,
      "net_paths": ["blur_residual.dwn"]
    }

Unknown keys are rejected.  Relative ``net_paths`` resolve against the
config file's directory.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .solvers import ReconSchedule, Stage

__all__ = ["ConfigError", "ReconConfig", "METHODS", "NET_METHODS", "load_config", "config_hash"]

METHODS = ("zf", "sense", "cs-haar", "cs-fd", "pnp", "dagan", "aics", "darcs")
NET_METHODS = ("pnp", "dagan", "aics", "darcs")

_TOP_KEYS = {"method", "schedule", "T", "cg_tol", "cg_maxiter", "net_paths"}
_STAGE_KEYS = {"start_iter", "alpha", "mu", "K", "beta", "net_index"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ReconConfig:
    method: str
    schedule: ReconSchedule
    net_paths: tuple = ()

    @property
    def first_stage(self):
        return self.schedule.stages[0]


def _number(doc, key, kind, default):
    value = doc.get(key, default)
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, (int, float) if kind is float else int):
        raise ConfigError(f"{key} must be {'a number' if kind is float else 'an integer'}, got {value!r}")
    return kind(value)


def _stage(doc, i):
    if not isinstance(doc, dict):
        raise ConfigError(f"schedule[{i}] must be an object")
    unknown = set(doc) - _STAGE_KEYS
    if unknown:
        raise ConfigError(f"schedule[{i}]: unknown keys {sorted(unknown)}")
    if "start_iter" not in doc:
        raise ConfigError(f"schedule[{i}]: start_iter is required")
    d = Stage(1)
    return Stage(
        start_iter=_number(doc, "start_iter", int, None),
        alpha=_number(doc, "alpha", float, d.alpha),
        mu=_number(doc, "mu", float, d.mu),
        K=_number(doc, "K", int, d.K),
        beta=_number(doc, "beta", float, d.beta),
        transform_index=_number(doc, "net_index", int, d.transform_index),
    )


def parse_config(doc, base_dir=".", method=None):
    """Validate a decoded config document; ``method`` overrides the document's."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    method = method or doc.get("method")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {method!r}")
    stages = doc.get("schedule", [{"start_iter": 1}])
    if not isinstance(stages, list):
        raise ConfigError("schedule must be a list of stages")
    net_paths = doc.get("net_paths", [])
    if not isinstance(net_paths, list) or not all(isinstance(p, str) for p in net_paths):
        raise ConfigError("net_paths must be a list of strings")
    if method in NET_METHODS and not net_paths:
        raise ConfigError(f"method {method} needs at least one entry in net_paths")
    try:
        schedule = ReconSchedule(
            tuple(_stage(s, i) for i, s in enumerate(stages)),
            T=_number(doc, "T", int, 20),
            cg_tol=_number(doc, "cg_tol", float, 1e-6),
            cg_maxiter=_number(doc, "cg_maxiter", int, 50),
        )
        if method in NET_METHODS:
            schedule.check_transforms(len(net_paths))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    base = Path(base_dir)
    paths = tuple(str(p if Path(p).is_absolute() else base / p) for p in net_paths)
    return ReconConfig(method, schedule, paths)


def load_config(path, method=None):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(doc, path.parent, method), doc


def config_hash(doc):
    """SHA-256 of the canonical JSON encoding of ``doc``."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
