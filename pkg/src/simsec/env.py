"""Episodic environment around the secrecy objective: CSI state encoding,
action decoding with built-in constraint satisfaction, and the QoS-gated
reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelParams,
    ChannelRealization,
    NodePlacement,
    correlation_sqrt,
    sample_realization,
    spatial_correlation,
)
from .geometry import PhaseConfiguration, SimGeometry, build_propagation_matrices
from .secrecy import PowerAllocation, SecrecyReport, evaluate

_LOGIT_CLIP = 30.0
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class EnvParams:
    """Everything the environment needs beyond the geometry itself."""

    geometry: SimGeometry
    channel: ChannelParams
    bs_height: float
    distance_min: float
    distance_max: float
    horizon: int = 20
    power_budget: float = 0.01
    min_rate: float = 0.0

    def __post_init__(self):
        if not (1.0 <= self.distance_min <= self.distance_max):
            raise ValueError("need 1 <= distance_min <= distance_max")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.power_budget <= 0:
            raise ValueError("power budget must be positive")
        if self.min_rate < 0:
            raise ValueError("min_rate must be >= 0")


@dataclass(frozen=True)
class EnvState:
    """Raw channels plus their flat real encoding of length 2*N*(M+1)."""

    channels: ChannelRealization
    encoded: np.ndarray


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    done: bool
    info: SecrecyReport


def encode_channels(channels: ChannelRealization, scale: float) -> np.ndarray:
    """Stack [Re, Im] blocks of each user channel and the CSI estimate."""
    vectors = [channels.h_users[i] for i in range(channels.h_users.shape[0])]
    vectors.append(channels.h_eve_est)
    parts = []
    for v in vectors:
        parts.append(v.real)
        parts.append(v.imag)
    return scale * np.concatenate(parts)


class SecureSimEnv:
    """Quasi-static secrecy environment.

    Channels and placements are drawn at reset and held fixed for the whole
    episode; each step scores one (power, phases) action.  The reward is
    the average secrecy rate when every user meets the minimum-rate
    constraint, and zero otherwise.
    """

    def __init__(self, params: EnvParams, seed=None):
        self.params = params
        geom = params.geometry
        self.props = build_propagation_matrices(geom)
        self.corr_sqrt = correlation_sqrt(spatial_correlation(geom))
        # Fixed observation scale: inverse amplitude at the closest placement,
        # so encoded features are O(1).
        d_min_link = math.hypot(params.bs_height, params.distance_min)
        beta_max = params.channel.ref_path_loss * d_min_link ** (
            -params.channel.path_loss_exponent
        )
        self.obs_scale = 1.0 / math.sqrt(beta_max)
        self._rng = np.random.default_rng(seed)
        self._state = None
        self._step_count = 0

    @property
    def state_dim(self) -> int:
        geom = self.params.geometry
        return 2 * geom.atoms_per_layer * (geom.num_users + 1)

    @property
    def action_dim(self) -> int:
        geom = self.params.geometry
        return geom.num_users + geom.atoms_per_layer * geom.num_layers

    @property
    def num_users(self) -> int:
        return self.params.geometry.num_users

    @property
    def num_vectors(self) -> int:
        """Channel vectors in the encoded state: M users plus the estimate."""
        return self.params.geometry.num_users + 1

    @property
    def vector_len(self) -> int:
        return self.params.geometry.atoms_per_layer

    @property
    def state(self) -> EnvState:
        return self._state

    def _draw_placement(self) -> NodePlacement:
        r = self._rng.uniform(self.params.distance_min, self.params.distance_max)
        azimuth = self._rng.uniform(0.0, _TWO_PI)
        elevation = self._rng.uniform(0.0, np.pi / 2.0)
        return NodePlacement(
            horizontal_distance=r,
            azimuth=azimuth,
            elevation=elevation,
            bs_height=self.params.bs_height,
        )

    def reset(self, seed=None) -> EnvState:
        """Sample fresh placements and channels; deterministic per seed."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        geom = self.params.geometry
        users = [self._draw_placement() for _ in range(geom.num_users)]
        eve = self._draw_placement()
        channels = sample_realization(
            geom, self.params.channel, users, eve, self.corr_sqrt, self._rng
        )
        self._state = EnvState(
            channels=channels, encoded=encode_channels(channels, self.obs_scale)
        )
        self._step_count = 0
        return self._state

    def decode_action(self, raw) -> tuple:
        """Map an unbounded action vector onto the feasible set.

        The first M entries are power logits, exponentiated after clipping
        and normalized to spend the whole budget; the rest are squashed by
        tanh onto [0, 2*pi) layer-by-layer phases.
        """
        arr = np.asarray(raw, dtype=float)
        if arr.shape != (self.action_dim,):
            raise ValueError(
                f"action must have shape ({self.action_dim},), got {arr.shape}"
            )
        if np.any(np.isnan(arr)):
            raise ValueError("action contains NaN")
        geom = self.params.geometry
        m = geom.num_users
        logits = np.clip(arr[:m], -_LOGIT_CLIP, _LOGIT_CLIP)
        weights = np.exp(logits)
        p = self.params.power_budget * weights / np.sum(weights)
        theta = (np.tanh(arr[m:]) + 1.0) * np.pi
        # tanh saturation can land exactly on 2*pi; wrap it back into range.
        theta = np.mod(theta, _TWO_PI)
        phases = PhaseConfiguration(
            phases=theta.reshape(geom.num_layers, geom.atoms_per_layer)
        )
        return PowerAllocation(p=p), phases

    def step(self, raw_action) -> StepOutcome:
        if self._state is None:
            raise RuntimeError("step called before reset")
        power, phases = self.decode_action(raw_action)
        report = evaluate(
            self._state.channels,
            phases,
            power,
            self.params.geometry,
            self.params.channel,
            props=self.props,
            min_rate=self.params.min_rate,
        )
        reward = report.asr if report.qos_ok else 0.0
        self._step_count += 1
        done = self._step_count >= self.params.horizon
        return StepOutcome(
            next_state=self._state, reward=reward, done=done, info=report
        )
