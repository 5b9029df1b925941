"""Experiment configuration: YAML-backed dataclasses, cross-field
validation, and conversion from logarithmic (dB/dBm) units to the linear
quantities the simulation consumes."""

from __future__ import annotations

import math
from dataclasses import MISSING, asdict, dataclass, field, fields

import yaml

from .channel import ChannelParams
from .env import EnvParams, SecureSimEnv
from .geometry import SimGeometry
from .ppo import PpoHyper


class ConfigError(Exception):
    """Invalid or incomplete experiment configuration."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class GeometryConfig:
    num_layers: int
    atoms_per_layer: int
    num_antennas: int
    num_users: int
    wavelength_m: float = 0.0107
    atom_spacing_wavelengths: float = 0.5
    thickness_wavelengths: float = 5.0
    atom_area_wavelengths_sq: float = 0.25


@dataclass
class ChannelConfig:
    rician_factor_db: float = -30.0
    ref_path_loss_db: float = -35.0
    path_loss_exponent: float = 3.5
    noise_user_dbm: float = -104.0
    noise_eve_dbm: float = -104.0
    csi_uncertainty: float = 0.1
    bs_height_m: float = 10.0
    distance_min_m: float = 75.0
    distance_max_m: float = 100.0


@dataclass
class EnvConfig:
    horizon: int = 20
    p0_dbm: float = 10.0
    r_min_rate: float = 0.0


@dataclass
class AgentConfig:
    kind: str
    num_qubits: int = 5
    pqc_layers: int = 4
    inverse_temperature: float = 1.0
    pre_conv_filters: list = field(default_factory=lambda: [128, 128])
    pre_conv_kernel: int = 3
    pre_conv_stride: int = 2
    pre_dense: int = 64
    post_hidden: list = field(default_factory=lambda: [62, 32])
    classical_hidden: list = field(default_factory=lambda: [1024, 1024, 1024, 1024])
    log_std_init: float = 0.0


@dataclass
class RunConfig:
    seed: int = 1
    total_steps: int = 50_000
    eval_episodes: int = 40
    output_dir: str = "runs/out"


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = None
    ppo: PpoHyper = field(default_factory=PpoHyper)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self):
        """Check every cross-field constraint; raise ConfigError listing
        the offending fields."""
        problems = []
        g = self.geometry
        if g.num_layers < 1:
            problems.append("geometry.num_layers must be >= 1")
        n_root = math.isqrt(max(g.atoms_per_layer, 0))
        if g.atoms_per_layer < 1 or n_root * n_root != g.atoms_per_layer:
            problems.append("geometry.atoms_per_layer must be a perfect square")
        if not (1 <= g.num_users <= g.num_antennas):
            problems.append("geometry.num_users must satisfy 1 <= M <= K (num_antennas)")
        for name in ("wavelength_m", "atom_spacing_wavelengths",
                     "thickness_wavelengths", "atom_area_wavelengths_sq"):
            if getattr(g, name) <= 0:
                problems.append(f"geometry.{name} must be positive")
        c = self.channel
        if c.path_loss_exponent <= 0:
            problems.append("channel.path_loss_exponent must be positive")
        if c.csi_uncertainty < 0:
            problems.append("channel.csi_uncertainty must be >= 0")
        if not (1.0 <= c.distance_min_m <= c.distance_max_m):
            problems.append("channel.distance_min_m must satisfy 1 <= min <= max")
        if c.bs_height_m < 0:
            problems.append("channel.bs_height_m must be >= 0")
        e = self.env
        if e.horizon < 1:
            problems.append("env.horizon must be >= 1")
        if e.r_min_rate < 0:
            problems.append("env.r_min_rate must be >= 0")
        a = self.agent
        if a is None:
            problems.append("agent section is required")
        else:
            if a.kind not in ("classical", "quantum", "random"):
                problems.append("agent.kind must be classical, quantum, or random")
            if not (1 <= a.num_qubits <= 12):
                problems.append("agent.num_qubits must be in [1, 12]")
            if a.pqc_layers < 1:
                problems.append("agent.pqc_layers must be >= 1")
            if a.inverse_temperature <= 0:
                problems.append("agent.inverse_temperature must be positive")
        r = self.run
        if r.total_steps < self.ppo.batch_steps:
            problems.append("run.total_steps must be >= ppo.batch_steps")
        if r.eval_episodes < 1:
            problems.append("run.eval_episodes must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    # ---- derived simulation objects -------------------------------------

    def sim_geometry(self) -> SimGeometry:
        g = self.geometry
        return SimGeometry.from_wavelengths(
            num_layers=g.num_layers,
            atoms_per_layer=g.atoms_per_layer,
            num_antennas=g.num_antennas,
            num_users=g.num_users,
            wavelength=g.wavelength_m,
            atom_spacing_wl=g.atom_spacing_wavelengths,
            thickness_wl=g.thickness_wavelengths,
            atom_area_wl2=g.atom_area_wavelengths_sq,
        )

    def channel_params(self) -> ChannelParams:
        c = self.channel
        return ChannelParams(
            rician_factor=db_to_linear(c.rician_factor_db),
            ref_path_loss=db_to_linear(c.ref_path_loss_db),
            path_loss_exponent=c.path_loss_exponent,
            noise_power_user=dbm_to_watts(c.noise_user_dbm),
            noise_power_eve=dbm_to_watts(c.noise_eve_dbm),
            csi_uncertainty=c.csi_uncertainty,
        )

    def env_params(self) -> EnvParams:
        return EnvParams(
            geometry=self.sim_geometry(),
            channel=self.channel_params(),
            bs_height=self.channel.bs_height_m,
            distance_min=self.channel.distance_min_m,
            distance_max=self.channel.distance_max_m,
            horizon=self.env.horizon,
            power_budget=dbm_to_watts(self.env.p0_dbm),
            min_rate=self.env.r_min_rate,
        )

    def env_factory(self):
        params = self.env_params()
        return lambda seed: SecureSimEnv(params, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "geometry": GeometryConfig,
    "channel": ChannelConfig,
    "env": EnvConfig,
    "agent": AgentConfig,
    "ppo": PpoHyper,
    "run": RunConfig,
}


def _build_section(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {', '.join(sorted(unknown))}")
    required = {
        f.name
        for f in fields(cls)
        if f.default is MISSING and f.default_factory is MISSING
    }
    missing = required - set(data)
    if missing:
        raise ConfigError(
            f"missing required field(s): {', '.join(f'{name}.{m}' for m in sorted(missing))}"
        )
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    for required in ("geometry", "agent"):
        if required not in data:
            raise ConfigError(f"missing required section {required!r}")
    parts = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            parts[name] = _build_section(name, cls, data[name])
    return ExperimentConfig(**parts)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    cfg = config_from_dict(data)
    cfg.validate()
    return cfg


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
