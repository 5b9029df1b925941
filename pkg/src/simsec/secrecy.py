"""SINRs, per-user secrecy rates, the average-secrecy-rate objective, QoS
feasibility, and Jain's fairness index."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, ChannelRealization
from .geometry import (
    PhaseConfiguration,
    PropagationMatrices,
    SimGeometry,
    build_propagation_matrices,
    transfer_function,
)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-stream transmit powers in watts, shape (M,)."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", arr)
        if arr.ndim != 1:
            raise ValueError("power allocation must be a 1-D vector")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("powers must be finite and nonnegative")


@dataclass(frozen=True)
class SecrecyReport:
    """Everything the reward and the evaluation metrics need for one slot."""

    user_sinr: np.ndarray
    eve_sinr: np.ndarray
    user_rate: np.ndarray
    secrecy_rate: np.ndarray
    asr: float
    qos_ok: bool
    jain: float


def effective_gains(channels: ChannelRealization, g_transfer: np.ndarray,
                    w_first: np.ndarray) -> np.ndarray:
    """Receiver-by-stream gain matrix h^H G w, shape (M+2, M).

    Rows are the M users, then the eavesdropper's estimated channel, then
    its estimation error.  Stream j feeds antenna j, i.e. column j of the
    antenna-to-first-layer matrix; antennas beyond M carry no stream.
    """
    m = channels.h_users.shape[0]
    n = channels.h_users.shape[1]
    if g_transfer.shape != (n, n):
        raise ValueError("transfer function shape does not match channels")
    if w_first.shape[0] != n or w_first.shape[1] < m:
        raise ValueError("first-layer matrix cannot feed all streams")
    receivers = np.vstack(
        [channels.h_users, channels.h_eve_est[None, :], channels.h_eve_err[None, :]]
    )
    streams = g_transfer @ w_first[:, :m]
    return receivers.conj() @ streams


def user_sinr(m: int, gains: np.ndarray, power: PowerAllocation,
              noise_power: float) -> float:
    """Downlink SINR of user m (0-based) under inter-user interference."""
    p = power.p
    row = np.abs(gains[m, :]) ** 2
    signal = row[m] * p[m]
    interference = float(np.dot(row, p) - row[m] * p[m])
    return signal / (interference + noise_power)


def eve_sinr(m: int, gains: np.ndarray, power: PowerAllocation,
             noise_power: float) -> float:
    """Eavesdropper SINR on stream m when only the channel estimate is
    coherently usable; the estimation error acts as extra interference."""
    p = power.p
    num_users = gains.shape[1]
    est_row = gains[num_users, :]
    err_row = gains[num_users + 1, :]
    true_row = est_row + err_row
    signal = np.abs(est_row[m]) ** 2 * p[m]
    psi = np.abs(err_row[m]) ** 2 * p[m]
    other = np.abs(true_row) ** 2 * p
    psi += float(np.sum(other) - other[m])
    return signal / (psi + noise_power)


def secrecy_rate(gamma_user: float, gamma_eve: float) -> float:
    """Nonnegative rate margin of the user link over the eavesdropper."""
    if gamma_user < 0 or gamma_eve < 0:
        raise ValueError("SINRs must be nonnegative")
    return max(0.0, math.log2(1.0 + gamma_user) - math.log2(1.0 + gamma_eve))


def jain_index(rates: np.ndarray) -> float:
    """Jain fairness of a nonnegative rate vector; 1 for the all-zero case."""
    total = float(np.sum(rates))
    if total == 0.0:
        return 1.0
    return total**2 / (len(rates) * float(np.sum(rates**2)))


def evaluate(channels: ChannelRealization, phases: PhaseConfiguration,
             power: PowerAllocation, geom: SimGeometry, params: ChannelParams,
             props: PropagationMatrices = None, min_rate: float = 0.0) -> SecrecyReport:
    """Full secrecy report for one channel realization and one action."""
    if props is None:
        props = build_propagation_matrices(geom)
    g = transfer_function(phases, props)
    gains = effective_gains(channels, g, props.w_first)
    m = channels.h_users.shape[0]

    gamma_u = np.array(
        [user_sinr(i, gains, power, params.noise_power_user) for i in range(m)]
    )
    gamma_e = np.array(
        [eve_sinr(i, gains, power, params.noise_power_eve) for i in range(m)]
    )
    user_rate = np.log2(1.0 + gamma_u)
    rates = np.maximum(0.0, user_rate - np.log2(1.0 + gamma_e))
    return SecrecyReport(
        user_sinr=gamma_u,
        eve_sinr=gamma_e,
        user_rate=user_rate,
        secrecy_rate=rates,
        asr=float(np.mean(rates)),
        qos_ok=bool(np.all(user_rate >= min_rate)),
        jain=jain_index(rates),
    )
