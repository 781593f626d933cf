"""Scenario configuration: a flat, documented, deterministic file format.

One scenario per JSON file; every value is a scalar (numbers, strings).
``methods`` is a comma-separated subset of ``dde,quantum,moments``.  The
complex initial amplitude is split into ``alpha0_re`` / ``alpha0_im``.
Serialization is canonical (sorted keys, fixed indentation), so a config
round-trips byte-identically.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from importlib import resources

from .cascade import DEFAULT_BUDGET_BYTES, NOISE_COMPOUNDING, NOISE_CONSTANT, CascadeParams
from .errors import ConfigError

VALID_METHODS = ("dde", "quantum", "moments")
BUDGET_ENV_VAR = "DELAYOSC_BUDGET_BYTES"


@dataclass
class ScenarioConfig:
    """All physical and numerical parameters of one run."""

    name: str
    methods: str = "dde,quantum,moments"
    kappa1: float = 1.0
    kappa2: float = 1.0
    gain: float = 1.5
    tau: float = 1.0
    phi: float = 0.0
    omega: float = 0.0
    gamma_non: float = 0.0
    nbar_input: float = 0.0
    nbar_amp: float = 0.0
    noise_model: str = NOISE_CONSTANT
    n_trunc: int = 12
    m_max: int = 1
    moment_order: int = 1
    dt: float = 0.1
    substeps: int = 32
    alpha0_re: float = 1.0
    alpha0_im: float = 0.0
    out_dir: str = "."
    budget_bytes: int = DEFAULT_BUDGET_BYTES
    notes: str = ""

    # -- validation ----------------------------------------------------
    def validate(self) -> None:
        def bad(field, why):
            raise ConfigError("field %r: %s" % (field, why))

        if not self.name or "/" in self.name:
            bad("name", "must be a non-empty string without '/'")
        for method in self.method_list():
            if method not in VALID_METHODS:
                bad("methods", "unknown method %r (allowed: %s)"
                    % (method, ",".join(VALID_METHODS)))
        if not self.method_list():
            bad("methods", "at least one method is required")
        if self.kappa1 <= 0:
            bad("kappa1", "must be > 0")
        if self.kappa2 < 0:
            bad("kappa2", "must be >= 0")
        if self.gain < 1:
            bad("gain", "must be >= 1")
        if self.tau <= 0:
            bad("tau", "must be > 0")
        if self.gamma_non < 0:
            bad("gamma_non", "must be >= 0")
        if self.nbar_input < 0 or self.nbar_amp < 0:
            bad("nbar_input/nbar_amp", "must be >= 0")
        if self.noise_model not in (NOISE_CONSTANT, NOISE_COMPOUNDING):
            bad("noise_model", "must be %r or %r"
                % (NOISE_CONSTANT, NOISE_COMPOUNDING))
        if self.n_trunc < 2:
            bad("n_trunc", "must be >= 2")
        if self.m_max < 0:
            bad("m_max", "must be >= 0")
        if self.moment_order < 1:
            bad("moment_order", "must be >= 1")
        if not 0 < self.dt <= self.tau:
            bad("dt", "must satisfy 0 < dt <= tau")
        if self.substeps < 1:
            bad("substeps", "must be >= 1")
        if self.budget_bytes <= 0:
            bad("budget_bytes", "must be > 0")

    # -- derived -------------------------------------------------------
    def method_list(self) -> list:
        return [m.strip() for m in self.methods.split(",") if m.strip()]

    @property
    def alpha0(self) -> complex:
        return complex(self.alpha0_re, self.alpha0_im)

    @property
    def horizon(self) -> float:
        return (self.m_max + 1) * self.tau

    def cascade_params(self) -> CascadeParams:
        return CascadeParams(kappa1=self.kappa1, kappa2=self.kappa2,
                             gain=self.gain, tau=self.tau, phi=self.phi,
                             omega=self.omega, gamma_non=self.gamma_non,
                             nbar_input=self.nbar_input,
                             nbar_amp=self.nbar_amp,
                             noise_model=self.noise_model)

    # -- serialization ---------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_dict(data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(ScenarioConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError("unknown field(s): %s"
                              % ", ".join(sorted(unknown)))
        if "name" not in data:
            raise ConfigError("field 'name': required")
        cfg = ScenarioConfig(**data)
        cfg.validate()
        return cfg

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_json())


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("not valid JSON: %s" % exc) from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a single JSON object")
    return ScenarioConfig.from_dict(data)


def preset_names() -> list:
    root = resources.files("delayosc").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ScenarioConfig:
    root = resources.files("delayosc").joinpath("presets")
    path = root.joinpath(name + ".json")
    if not path.is_file():
        raise ConfigError("unknown preset %r (have: %s)"
                          % (name, ", ".join(preset_names())))
    return ScenarioConfig.from_dict(json.loads(path.read_text()))


def resolve_config(spec: str) -> ScenarioConfig:
    """Interpret a CLI argument as a preset name or a config file path."""
    if os.path.exists(spec):
        return load_config(spec)
    try:
        return load_preset(spec)
    except ConfigError:
        raise ConfigError("no config file or preset named %r" % (spec,))


def resolve_budget(config: ScenarioConfig, flag_value=None) -> int:
    """Budget resolution order: CLI flag, environment, config, default."""
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(BUDGET_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError("environment variable %s=%r is not an integer"
                              % (BUDGET_ENV_VAR, env))
    return config.budget_bytes
