"""Spatially-correlated Rician channels from the output metasurface to the
users and the eavesdropper, plus the eavesdropper's corrupted CSI."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SimGeometry


@dataclass(frozen=True)
class NodePlacement:
    """Position of a receiver relative to the elevated output layer."""

    horizontal_distance: float
    azimuth: float  # [0, 2*pi)
    elevation: float  # [0, pi/2]
    bs_height: float

    def __post_init__(self):
        if self.horizontal_distance < 0 or self.bs_height < 0:
            raise ValueError("distances must be nonnegative")
        if not (0.0 <= self.azimuth < 2.0 * np.pi):
            raise ValueError("azimuth must lie in [0, 2*pi)")
        if not (0.0 <= self.elevation <= np.pi / 2.0):
            raise ValueError("elevation must lie in [0, pi/2]")
        if self.link_distance <= 0:
            raise ValueError("link distance must be positive")

    @property
    def link_distance(self) -> float:
        return math.hypot(self.bs_height, self.horizontal_distance)


@dataclass(frozen=True)
class ChannelParams:
    """Statistical parameters of the fading model, all in linear scale."""

    rician_factor: float
    ref_path_loss: float
    path_loss_exponent: float
    noise_power_user: float
    noise_power_eve: float
    csi_uncertainty: float

    def __post_init__(self):
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        if self.ref_path_loss <= 0 or self.path_loss_exponent <= 0:
            raise ValueError("path loss parameters must be positive")
        if self.noise_power_user <= 0 or self.noise_power_eve <= 0:
            raise ValueError("noise powers must be positive")
        if self.csi_uncertainty < 0:
            raise ValueError("csi_uncertainty must be >= 0")


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all downlink channels.

    h_users has shape (M, N); the eavesdropper vectors have shape (N,) and
    satisfy h_eve_true = h_eve_est + h_eve_err exactly.
    """

    h_users: np.ndarray
    h_eve_true: np.ndarray
    h_eve_est: np.ndarray
    h_eve_err: np.ndarray


def _lattice_indices(geom: SimGeometry):
    idx = np.arange(1, geom.atoms_per_layer + 1)
    xs = (idx - 1) % geom.n_max + 1
    zs = np.ceil(idx / geom.n_max).astype(int)
    return xs, zs


def spatial_correlation(geom: SimGeometry) -> np.ndarray:
    """Isotropic-scattering correlation across the output layer.

    Entry (n, n') is the normalized sinc of twice the atom separation in
    wavelengths: unit diagonal, symmetric, zero for atoms exactly a
    half-wavelength multiple apart along a lattice axis.
    """
    xs, zs = _lattice_indices(geom)
    dist = geom.atom_spacing * np.hypot(
        xs[:, None] - xs[None, :], zs[:, None] - zs[None, :]
    )
    return np.sinc(2.0 * dist / geom.wavelength)


def correlation_sqrt(corr: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root, clipping small negative eigenvalues.

    Sinc correlation matrices are numerically rank-deficient; eigenvalues
    below zero (tiny by construction) are clipped before taking the root.
    """
    eigval, eigvec = np.linalg.eigh(corr)
    eigval = np.clip(eigval, 0.0, None)
    return (eigvec * np.sqrt(eigval)) @ eigvec.T


def los_steering(placement: NodePlacement, geom: SimGeometry) -> np.ndarray:
    """Unit-modulus planar steering vector toward the node's direction."""
    xs, zs = _lattice_indices(geom)
    coef = 2.0 * np.pi * geom.atom_spacing / geom.wavelength
    phase = coef * (
        xs * np.sin(placement.azimuth) * np.sin(placement.elevation)
        + zs * np.cos(placement.elevation)
    )
    return np.exp(1j * phase)


def path_loss(link_distance: float, params: ChannelParams) -> float:
    """Power attenuation relative to the 1 m reference distance."""
    if link_distance < 1.0:
        raise ValueError("link distance below the 1 m reference distance")
    return params.ref_path_loss * link_distance ** (-params.path_loss_exponent)


def sample_channel(placement: NodePlacement, params: ChannelParams,
                   geom: SimGeometry, corr_sqrt: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw one Rician channel vector of length N.

    The scattered part is corr_sqrt @ z with z standard circularly-symmetric
    complex Gaussian, so its covariance equals the clipped correlation
    matrix; the deterministic part is the steering vector weighted by the
    Rician factor.  Both are scaled by the distance-dependent path loss.
    """
    n = corr_sqrt.shape[0]
    beta = path_loss(placement.link_distance, params)
    kappa = params.rician_factor
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    h_nlos = corr_sqrt @ z
    h_los = los_steering(placement, geom)
    return math.sqrt(beta / (1.0 + kappa)) * (math.sqrt(kappa) * h_los + h_nlos)


def corrupt_eve_csi(h_eve: np.ndarray, delta: float, rng: np.random.Generator):
    """Split the true eavesdropper channel into an estimate and an error.

    The error is circularly-symmetric Gaussian with per-entry variance
    delta^2/N times the squared norm of the true channel, so the expected
    relative estimation error is delta^2; the estimate is what remains
    after subtracting the drawn error, making the additive split exact.
    """
    if delta < 0:
        raise ValueError("csi uncertainty must be >= 0")
    n = h_eve.shape[0]
    var_per_entry = (delta**2 / n) * float(np.vdot(h_eve, h_eve).real)
    scale = math.sqrt(var_per_entry / 2.0)
    err = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    est = h_eve - err
    return est, err


def sample_realization(geom: SimGeometry, params: ChannelParams,
                       user_placements, eve_placement: NodePlacement,
                       corr_sqrt: np.ndarray,
                       rng: np.random.Generator) -> ChannelRealization:
    """Draw channels for every user and the eavesdropper in a fixed order."""
    h_users = np.stack(
        [sample_channel(p, params, geom, corr_sqrt, rng) for p in user_placements]
    )
    h_eve = sample_channel(eve_placement, params, geom, corr_sqrt, rng)
    h_est, h_err = corrupt_eve_csi(h_eve, params.csi_uncertainty, rng)
    return ChannelRealization(
        h_users=h_users, h_eve_true=h_eve, h_eve_est=h_est, h_eve_err=h_err
    )
