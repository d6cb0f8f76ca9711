"""Experiment configuration: a flat key = value text format.

Unknown keys are rejected; every key mirrors a field of
:class:`ExperimentConfig`.  Lines starting with ``#`` and blank lines are
ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .env import NoiseKind, RuleChange
from .errors import ConfigError

_SCHEDULES = ("none", "reward_switch", "transition_switch")
_AGENTS = ("goei", "cei")


@dataclass
class ExperimentConfig:
    agent: str = "goei"
    noise_type: str = NoiseKind.SELF_TRANSITION.value
    noise_bits: int = 4
    e0: float | None = None          # per-noise-type default when None
    e1: float | None = None
    schedule: str = "reward_switch"
    period: int = 5000
    total_trials: int = 20000
    window: int = 500
    rho: float = 0.95
    evidence_retention: float = 0.15
    gamma: float = 0.95
    prior: float = 0.1
    module_prior: float = 1.0
    alpha_trans: float = 1.0
    alpha_reward: float = 1.0
    alpha_cluster: float = 1.0
    alpha_ar: float = 1.0
    k_states: int = 70
    k_modules: int = 10
    max_sweeps: int = 20
    fe_tol: float = 1e-4
    vi_tol: float = 1e-6
    vi_max_iter: int = 10000
    active_threshold: float = 15.0
    seeds: tuple = tuple(range(20))
    out: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.agent not in _AGENTS:
            raise ConfigError("agent", f"must be one of {_AGENTS}, got {self.agent!r}")
        try:
            NoiseKind(self.noise_type)
        except ValueError:
            raise ConfigError("noise_type", f"unknown noise type {self.noise_type!r}") from None
        if self.noise_bits < 0:
            raise ConfigError("noise_bits", "must be nonnegative")
        for name in ("e0", "e1"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if self.schedule not in _SCHEDULES:
            raise ConfigError("schedule", f"must be one of {_SCHEDULES}, got {self.schedule!r}")
        if self.window < 1:
            raise ConfigError("window", "must be positive")
        if self.period < 1 or self.period % self.window != 0:
            raise ConfigError("period", "must be a positive multiple of window")
        if self.total_trials < 1 or self.total_trials % self.period != 0:
            raise ConfigError("total_trials", "must be a positive multiple of period")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho", "must lie in [0, 1]")
        if not 0.0 < self.evidence_retention <= 1.0:
            raise ConfigError("evidence_retention", "must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma", "must lie in [0, 1)")
        if self.prior <= 0.0:
            raise ConfigError("prior", "must be positive")
        if self.module_prior <= 0.0:
            raise ConfigError("module_prior", "must be positive")
        for name in ("alpha_trans", "alpha_reward", "alpha_cluster", "alpha_ar"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(name, "must be positive")
        if self.k_states < 2:
            raise ConfigError("k_states", "must be at least 2")
        if self.k_modules < 1:
            raise ConfigError("k_modules", "must be at least 1")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps", "must be at least 1")
        if self.fe_tol <= 0.0 or self.vi_tol <= 0.0:
            raise ConfigError("fe_tol", "tolerances must be positive")
        if self.vi_max_iter < 1:
            raise ConfigError("vi_max_iter", "must be at least 1")
        if self.active_threshold <= 0.0:
            raise ConfigError("active_threshold", "must be positive")
        if len(self.seeds) == 0:
            raise ConfigError("seeds", "need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "seeds must be distinct")

    @property
    def noise_kind(self) -> NoiseKind:
        return NoiseKind(self.noise_type)

    @property
    def schedule_change(self) -> RuleChange | None:
        if self.schedule == "none":
            return None
        return (RuleChange.SWAP_REWARD_RULE if self.schedule == "reward_switch"
                else RuleChange.SWAP_TRANSITION_RULE)

    @property
    def n_obs(self) -> int:
        return 4 * (1 << self.noise_bits)

    def noise_probs(self):
        if self.e0 is not None or self.e1 is not None:
            e0 = 0.1 if self.e0 is None else self.e0
            e1 = 0.1 if self.e1 is None else self.e1
            return e0, e1
        if self.noise_kind is NoiseKind.SELF_TRANSITION:
            return 0.1, 0.1
        return 0.1, 0.9

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}
_INT_KEYS = {"noise_bits", "period", "total_trials", "window", "k_states",
             "k_modules", "max_sweeps", "vi_max_iter"}
_FLOAT_KEYS = {"e0", "e1", "rho", "evidence_retention", "gamma", "prior", "module_prior", "alpha_trans",
               "alpha_reward", "alpha_cluster", "alpha_ar", "fe_tol", "vi_tol",
               "active_threshold"}
_STR_KEYS = {"agent", "noise_type", "schedule", "out"}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(key, "unknown configuration key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = _parse_value(key, val)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _parse_value(key: str, val: str):
    try:
        if key == "seeds":
            return tuple(int(v) for v in val.split(",") if v.strip() != "")
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return None if val.lower() == "none" else float(val)
        if key in _STR_KEYS:
            return val
    except ValueError:
        raise ConfigError(key, f"cannot parse value {val!r}") from None
    raise ConfigError(key, "unknown configuration key")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
