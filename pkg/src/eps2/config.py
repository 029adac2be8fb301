"""Run configuration: YAML schema, defaults and validation.

A configuration file looks like::

    scene: half_plane.yaml        # relative to the file, or builtin:<name>
    tasks: [coeff, dini]
    seed: 7
    jobs: 1
    out: out/run
    params:
      coeff: {x: [0.0, 0.0], mode: exact-arc}

Every task has a fixed parameter set with defaults; unknown keys anywhere
are rejected with the dotted path of the offending entry.
"""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

TASKS = ("coeff", "dini", "beta", "corona", "capacity", "slice", "spectral", "fourier", "verify")
SUITE_NAMES = ("chain", "smoothed", "fourier", "corona", "capacity", "akn", "all")
SCENE_TASKS = ("coeff", "dini", "spectral")
MODES = ("exact-arc", "lattice", "stratified-random")

_CLOUD = {"kind": "zigzag", "n": 2000, "path": None}

DEFAULTS: dict[str, dict[str, Any]] = {
    "coeff": {"x": None, "radii": None, "r_min": 0.05, "r_max": 2.0, "count": 16, "mode": "exact-arc",
              "m": 2048, "kernel": "gaussian"},
    "dini": {"x": None, "r_min": 0.01, "r_max": 1.0, "mode": "exact-arc", "m": 2048},
    "beta": {"cloud": _CLOUD, "center": [0.0, 0.0], "radii": [0.0625, 0.125, 0.25, 0.5, 1.0]},
    "corona": {"cloud": dict(_CLOUD, n=10_000), "center": [0.0, 0.0], "radius": 1.0, "theta": 0.01,
               "alpha": 0.1},
    "capacity": {"set": {"kind": "ball_net", "spacing": 0.15, "level": 4, "path": None}, "s": [0.5, 1.0, 1.5],
                 "log": False},
    "slice": {"K": {"center": [0.0, 0.0, 0.5], "radius": 0.1, "spacing": 0.04}, "G_radius": 0.5, "G_rings": 9,
              "s": 1.5, "r0": 1.0},
    "spectral": {"x": None, "r_min": 0.05, "r_max": 4.0, "count": 16},
    "fourier": {"function": {"kind": "bump", "N": 16384, "slope": 0.1, "path": None},
                "checks": ["plancherel", "second_difference"]},
    "verify": {"suites": [], "x": None, "r_min": 0.05, "r_max": 2.0, "count": 16},
}

_ENUMS = {
    ("coeff", "mode"): MODES, ("dini", "mode"): MODES, ("coeff", "kernel"): ("gaussian", "bump"),
    ("beta", "cloud", "kind"): ("zigzag", "spike", "csv"), ("corona", "cloud", "kind"): ("zigzag", "spike", "csv"),
    ("capacity", "set", "kind"): ("ball_net", "cantor", "csv"),
    ("fourier", "function", "kind"): ("bump", "tent", "random", "csv"),
}
_LISTS = {("fourier", "checks"): ("plancherel", "second_difference", "lips"), ("verify", "suites"): SUITE_NAMES}

TOP_KEYS = ("scene", "tasks", "seed", "jobs", "out", "params")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` points into the document tree."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass
class RunConfig:
    scene: str | None = None
    tasks: list[str] = field(default_factory=list)
    params: dict[str, dict] = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    out: str = "out"
    base_dir: Path = field(default=Path("."), repr=False)

    def scene_path(self) -> Path | None:
        """Resolved scene file; ``builtin:<name>`` refers to the bundled data."""
        if self.scene is None:
            return None
        if self.scene.startswith("builtin:"):
            return bundled(self.scene.split(":", 1)[1] + ".yaml")
        p = Path(self.scene)
        return p if p.is_absolute() else self.base_dir / p

    def resolved(self) -> dict:
        """Full configuration as echoed into the manifest (``out`` is where it lives)."""
        return {"scene": self.scene, "tasks": list(self.tasks), "seed": self.seed, "jobs": self.jobs,
                "params": {t: copy.deepcopy(self.params[t]) for t in self.tasks}}


def bundled(name: str) -> Path:
    return Path(str(resources.files("eps2") / "data" / name))


def _merge(defaults: dict, given: Any, path: str, key: tuple) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(path, "expected a mapping")
    extra = sorted(set(given) - set(defaults))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", f"unknown key (allowed: {', '.join(sorted(defaults))})")
    out = {}
    for k, d in defaults.items():
        v = given.get(k, copy.deepcopy(d))
        sub = f"{path}.{k}"
        if isinstance(d, dict):
            v = _merge(d, given.get(k), sub, key + (k,))
        elif key + (k,) in _ENUMS and v not in _ENUMS[key + (k,)]:
            raise ConfigError(sub, f"must be one of {', '.join(_ENUMS[key + (k,)])}")
        elif key + (k,) in _LISTS:
            if not isinstance(v, list) or any(x not in _LISTS[key + (k,)] for x in v):
                raise ConfigError(sub, f"must be a list drawn from {', '.join(_LISTS[key + (k,)])}")
        elif isinstance(d, bool):
            if not isinstance(v, bool):
                raise ConfigError(sub, "must be true or false")
        elif isinstance(d, (int, float)):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(sub, "must be a number")
        elif isinstance(d, list) and not isinstance(v, list):
            raise ConfigError(sub, "must be a list")
        if isinstance(d, int) and not isinstance(d, bool) and isinstance(v, float):
            if not v.is_integer():
                raise ConfigError(sub, "must be an integer")
            v = int(v)
        out[k] = v
    return out


def _int(v, path: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, "must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return v


def from_dict(doc: Any, base_dir: Path | str = ".", seed: int | None = None, jobs: int | None = None,
              out: str | None = None, tasks: list[str] | None = None, env=None) -> RunConfig:
    """Validate a parsed document and apply overrides.

    Precedence is command-line value, then ``EPS2_JOBS`` / ``EPS2_OUT``,
    then the file, then the default.
    """
    env = os.environ if env is None else env
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config", "expected a mapping at the top level")
    extra = sorted(set(doc) - set(TOP_KEYS))
    if extra:
        raise ConfigError(f"config.{extra[0]}", f"unknown key (allowed: {', '.join(TOP_KEYS)})")
    task_list = tasks if tasks is not None else doc.get("tasks", [])
    if not isinstance(task_list, list) or not task_list:
        raise ConfigError("config.tasks", "expected a non-empty list of tasks")
    for i, t in enumerate(task_list):
        if t not in TASKS:
            raise ConfigError(f"config.tasks[{i}]", f"unknown task {t!r} (allowed: {', '.join(TASKS)})")
    params_doc = doc.get("params", {}) or {}
    if not isinstance(params_doc, dict):
        raise ConfigError("config.params", "expected a mapping")
    bad = sorted(set(params_doc) - set(TASKS))
    if bad:
        raise ConfigError(f"config.params.{bad[0]}", "unknown task")
    params = {t: _merge(DEFAULTS[t], params_doc.get(t), f"config.params.{t}", (t,)) for t in TASKS}
    scene = doc.get("scene")
    if scene is not None and not isinstance(scene, str):
        raise ConfigError("config.scene", "expected a path")
    if scene is None and any(t in SCENE_TASKS for t in task_list):
        raise ConfigError("config.scene", f"required by task(s) {', '.join(t for t in task_list if t in SCENE_TASKS)}")
    s = _int(seed if seed is not None else doc.get("seed", 0), "config.seed", 0)
    if s >= 2 ** 64:
        raise ConfigError("config.seed", "must fit in 64 bits")
    if jobs is None and "EPS2_JOBS" in env:
        try:
            jobs = int(env["EPS2_JOBS"])
        except ValueError:
            raise ConfigError("EPS2_JOBS", "must be an integer") from None
    j = _int(jobs if jobs is not None else doc.get("jobs", 1), "config.jobs", 1)
    o = out if out is not None else env.get("EPS2_OUT", doc.get("out", "out"))
    if not isinstance(o, str):
        raise ConfigError("config.out", "expected a path")
    return RunConfig(scene, list(task_list), params, s, j, o, Path(base_dir))


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"cannot parse: {exc}") from None
    return from_dict(doc, path.parent, **overrides)
