"""Experiment configuration: flat key = value text with env overrides.

Schema (all keys optional; defaults in parentheses):

    model          random_deposition | rsos | ballistic | lpp | polymer |
                   rsos_alternating                     (random_deposition)
    d              lattice dimension                    (1)
    beta           inverse temperature, polymer only    (1.0)
    noise_transform identity | gaussian_cdf | centered_cdf  (identity)
    t_list         horizons, e.g. [16, 64, 256]         ([64])
    diff_offsets   pair offsets b, e.g. [[1], [2]]      ([[1]])
    probe_offsets  extra probes beyond origin + pairs   ([])
    n_replicas     ensemble size                        (1000)
    seed           base noise seed                      (1)
    replica        replica index for single runs        (0)
    parallelism    worker threads                       (1)
    out_dir        output directory                     (results)
    retain_trajectory  keep all time slices             (false)
    tail_r_factors     exceedance radii in units of L sqrt(t)   ([1, 2, 3])
    mgf_theta_factors  exponents in units of 1/(L sqrt(t))      ([1, -1])
    tol_pair_se    SE multiplier for the pair-vs-variance check (3.0)
    tol_tail_se    SE multiplier for tail checks                (3.0)
    tol_mgf_se     SE multiplier for exponential-moment checks  (3.0)

Values are JSON fragments where that parses (lists, numbers, booleans) and
bare strings otherwise.  Lines starting with '#' are comments.  Environment
variables GROWTHLAB_<KEY> override file values with the same syntax.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import driving
from .engine import AlternatingRsos, Model

ENV_PREFIX = "GROWTHLAB_"

MODEL_IDS = ("random_deposition", "rsos", "ballistic", "lpp", "polymer",
             "rsos_alternating")
ENSEMBLE_MODEL_IDS = ("random_deposition", "rsos", "ballistic", "lpp", "polymer")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    model: str = "random_deposition"
    d: int = 1
    beta: float = 1.0
    noise_transform: str = "identity"
    t_list: list = field(default_factory=lambda: [64])
    diff_offsets: list = field(default_factory=lambda: [[1]])
    probe_offsets: list = field(default_factory=list)
    n_replicas: int = 1000
    seed: int = 1
    replica: int = 0
    parallelism: int = 1
    out_dir: str = "results"
    retain_trajectory: bool = False
    tail_r_factors: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    mgf_theta_factors: list = field(default_factory=lambda: [1.0, -1.0])
    tol_pair_se: float = 3.0
    tol_tail_se: float = 3.0
    tol_mgf_se: float = 3.0

    def validate(self, *, statistical: bool = False) -> None:
        if self.model not in MODEL_IDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODEL_IDS}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.noise_transform not in driving.TRANSFORMS:
            raise ConfigError(f"unknown noise_transform {self.noise_transform!r}")
        if not self.t_list:
            raise ConfigError("t_list must be nonempty")
        if any(int(t) < 0 for t in self.t_list):
            raise ConfigError("every t in t_list must be >= 0")
        for b in self.diff_offsets:
            if len(b) != self.d:
                raise ConfigError(f"pair offset {b} must have length d={self.d}")
            if all(int(c) == 0 for c in b):
                raise ConfigError("pair offsets must be nonzero")
        for p in self.probe_offsets:
            if len(p) != self.d:
                raise ConfigError(f"probe offset {p} must have length d={self.d}")
        if statistical:
            if self.n_replicas < 2:
                raise ConfigError("statistical commands need n_replicas >= 2")
            if self.model not in ENSEMBLE_MODEL_IDS:
                raise ConfigError(
                    f"model {self.model!r} has no declared noise-Lipschitz "
                    "constant; ensemble statistics are defined for "
                    f"{ENSEMBLE_MODEL_IDS}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def build_model(self) -> Model:
        transform = driving.TRANSFORMS[self.noise_transform]()
        if self.model == "random_deposition":
            return driving.make_random_deposition(transform, self.d)
        if self.model == "rsos":
            return driving.make_rsos(self.d)
        if self.model == "ballistic":
            return driving.make_ballistic(self.d)
        if self.model == "lpp":
            return driving.make_lpp(transform, self.d)
        if self.model == "polymer":
            return driving.make_polymer(self.beta, transform, self.d)
        if self.model == "rsos_alternating":
            return AlternatingRsos(self.d)
        raise ConfigError(f"unknown model {self.model!r}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_kv_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = _parse_value(value)
    return out


def load_config(path: str | Path | None = None, *, env: dict | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then file, then GROWTHLAB_* environment, then CLI overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_kv_text(p.read_text()))
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _parse_value(env[env_key])
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig()
    for name, value in values.items():
        setattr(cfg, name, value)
    # normalize numeric fields that may arrive as JSON numbers or strings
    try:
        cfg.d = int(cfg.d)
        cfg.beta = float(cfg.beta)
        cfg.t_list = [int(t) for t in cfg.t_list]
        cfg.diff_offsets = [[int(c) for c in b] for b in cfg.diff_offsets]
        cfg.probe_offsets = [[int(c) for c in p] for p in cfg.probe_offsets]
        cfg.n_replicas = int(cfg.n_replicas)
        cfg.seed = int(cfg.seed)
        cfg.replica = int(cfg.replica)
        cfg.parallelism = int(cfg.parallelism)
        cfg.retain_trajectory = bool(cfg.retain_trajectory)
        cfg.tail_r_factors = [float(r) for r in cfg.tail_r_factors]
        cfg.mgf_theta_factors = [float(x) for x in cfg.mgf_theta_factors]
        cfg.tol_pair_se = float(cfg.tol_pair_se)
        cfg.tol_tail_se = float(cfg.tol_tail_se)
        cfg.tol_mgf_se = float(cfg.tol_mgf_se)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    return cfg
