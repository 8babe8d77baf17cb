"""Run manifests parsed from INI-style ``key = value`` files.

Example::

    [problem]
    eps = 0.02
    sigma = 100
    m = 0.4
    theta = 0.5
    dt = 0.0004
    n_steps = 25

    [mesh]
    dim = 2
    n = 64

    [solver]
    cheby_iters = 10
    richardson_steps = 2
    mg_cycles = 5

    [output]
    directory = out
    snapshot_every = 5
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from okflow.errors import ConfigurationError
from okflow.okmodel import SolverConfig

EXPERIMENTS = ("run", "mesh-study", "eps-study", "verify")


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"not an integer: {s}")
    return int(v)


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s}")


def _opt_int(s):
    return None if s.strip().lower() in ("none", "", "0") else _int(s)


def _list(conv):
    return lambda s: [conv(x) for x in s.replace(",", " ").split()]


# section -> key -> (converter, destination); destination "cfg" feeds SolverConfig
SCHEMA = {
    "problem": {
        "eps": (_float, "cfg"),
        "sigma": (_float, "cfg"),
        "m": (_float, "cfg"),
        "theta": (_float, "cfg"),
        "dt": (_float, "cfg"),
        "n_steps": (_int, "cfg"),
        "T": (_float, "manifest"),
        "eps_list": (_list(_float), "manifest"),
        "verify_steps": (_list(_int), "manifest"),
    },
    "mesh": {
        "dim": (_int, "cfg"),
        "n": (_int, "cfg"),
        "study_n": (_list(_int), "manifest"),
        "dx_per_eps": (_float, "manifest"),
        "verify_n": (_int, "manifest"),
        "max_vertices": (_int, "manifest"),
    },
    "solver": {
        "newton_tol": (_float, "cfg"),
        "newton_maxit": (_int, "cfg"),
        "gmres_tol": (_float, "cfg"),
        "gmres_maxit": (_int, "cfg"),
        "gmres_restart": (_opt_int, "cfg"),
        "cheby_iters": (_int, "cfg"),
        "cheby_precond": (str, "cfg"),
        "richardson_steps": (_int, "cfg"),
        "mg_cycles": (_int, "cfg"),
        "mg_pre_smooths": (_int, "cfg"),
        "mg_post_smooths": (_int, "cfg"),
        "mg_omega": (_float, "cfg"),
        "min_coarse_size": (_int, "cfg"),
        "compute_energy": (_bool, "cfg"),
        "interval_deltas": (_list(_float), "manifest"),
        "threads": (_int, "manifest"),
    },
    "output": {
        "directory": (str, "manifest"),
        "snapshot_every": (_int, "manifest"),
    },
}

REQUIRED = {
    "problem": ("eps", "sigma", "m", "theta", "dt"),
    "mesh": ("dim", "n"),
}


@dataclass
class RunManifest:
    config: SolverConfig
    kind: str = "run"
    output_dir: Path = Path("okflow-out")
    snapshot_every: int = 10
    study_n: list = field(default_factory=lambda: [32, 64, 128])
    eps_list: list = field(default_factory=lambda: [0.02, 0.01])
    dx_per_eps: float = 0.5
    verify_n: int = 8
    verify_steps: list = field(default_factory=lambda: [0, 5, 25])
    interval_deltas: list = field(default_factory=lambda: [1e-8, 1e-6, 1e-4])
    max_vertices: int = 250_000
    threads: int | None = None


def parse_config(path, kind="run"):
    """Read ``path`` into a validated :class:`RunManifest`."""
    if kind not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment kind {kind!r}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case ("T")
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc

    cfg_kw, man_kw = {}, {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            conv, dest = SCHEMA[section][key]
            try:
                value = conv(raw)
            except ValueError as exc:
                raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None
            (cfg_kw if dest == "cfg" else man_kw)[key] = value

    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in (cfg_kw if SCHEMA[section][key][1] == "cfg" else man_kw):
                raise ConfigurationError(f"missing required key {key!r} in [{section}]")

    final_time = man_kw.pop("T", None)
    if "n_steps" not in cfg_kw:
        if final_time is None:
            raise ConfigurationError("missing required key 'n_steps' (or 'T') in [problem]")
        cfg_kw["n_steps"] = int(round(final_time / cfg_kw["dt"]))

    config = SolverConfig(**cfg_kw)
    if "directory" in man_kw:
        man_kw["output_dir"] = Path(man_kw.pop("directory"))
    manifest = RunManifest(config=config, kind=kind, **man_kw)
    if manifest.snapshot_every < 0:
        raise ConfigurationError("snapshot_every must be non-negative")
    return manifest
