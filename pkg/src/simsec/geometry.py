"""Stacked-metasurface geometry: element layout, Rayleigh-Sommerfeld
propagation matrices, per-layer phase masks, and the cascaded wave-domain
transfer function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimGeometry:
    """Physical layout of the antenna array and the stacked metasurface.

    Lengths are in meters.  The metasurface layers are square n_max x n_max
    lattices parallel to the xz-plane, stacked with a uniform gap; the
    antenna array sits behind the first layer at the same gap.
    """

    num_layers: int
    atoms_per_layer: int
    num_antennas: int
    num_users: int
    atom_spacing: float
    wavelength: float
    total_thickness: float
    atom_area: float = None  # defaults to wavelength^2 / 4
    antenna_spacing: float = None  # defaults to wavelength / 2

    def __post_init__(self):
        if self.atom_area is None:
            object.__setattr__(self, "atom_area", self.wavelength**2 / 4.0)
        if self.antenna_spacing is None:
            object.__setattr__(self, "antenna_spacing", self.wavelength / 2.0)
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.atoms_per_layer < 1:
            raise ValueError("atoms_per_layer must be >= 1")
        n_max = math.isqrt(self.atoms_per_layer)
        if n_max * n_max != self.atoms_per_layer:
            raise ValueError(
                f"atoms_per_layer={self.atoms_per_layer} is not a perfect square"
            )
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if not (1 <= self.num_users <= self.num_antennas):
            raise ValueError("need 1 <= num_users <= num_antennas")
        for name in ("atom_spacing", "wavelength", "total_thickness",
                     "atom_area", "antenna_spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def from_wavelengths(cls, num_layers, atoms_per_layer, num_antennas,
                         num_users, wavelength, atom_spacing_wl=0.5,
                         thickness_wl=5.0, atom_area_wl2=0.25):
        """Build a geometry with lengths given in units of the wavelength."""
        return cls(
            num_layers=num_layers,
            atoms_per_layer=atoms_per_layer,
            num_antennas=num_antennas,
            num_users=num_users,
            atom_spacing=atom_spacing_wl * wavelength,
            wavelength=wavelength,
            total_thickness=thickness_wl * wavelength,
            atom_area=atom_area_wl2 * wavelength**2,
        )

    @property
    def n_max(self) -> int:
        return math.isqrt(self.atoms_per_layer)

    @property
    def gap(self) -> float:
        """Uniform spacing between adjacent layers (and antenna to layer 1)."""
        return self.total_thickness / self.num_layers


@dataclass(frozen=True)
class PhaseConfiguration:
    """Per-layer, per-atom transmission phases in radians, shape (L, N)."""

    phases: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.phases, dtype=float)
        object.__setattr__(self, "phases", arr)
        if arr.ndim != 2:
            raise ValueError("phases must be a 2-D (layers x atoms) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("phases must be finite")
        if np.any(arr < 0.0) or np.any(arr >= 2.0 * np.pi):
            raise ValueError("phases must lie in [0, 2*pi)")


@dataclass(frozen=True)
class PropagationMatrices:
    """Deterministic propagation coefficients of a fixed geometry.

    w_first has shape (N, K): antenna k to atom n of the first layer.
    w_inner holds L-1 matrices of shape (N, N): layer l-1 to layer l.  With
    uniform layer gaps the inner matrices are all identical.
    """

    w_first: np.ndarray
    w_inner: tuple


def atom_index(n: int, n_max: int):
    """1-based (n_x, n_z) lattice indices of atom n on an n_max x n_max layer."""
    if not (1 <= n <= n_max * n_max):
        raise ValueError(f"atom index {n} outside [1, {n_max * n_max}]")
    n_x = (n - 1) % n_max + 1
    n_z = math.ceil(n / n_max)
    return n_x, n_z


def intra_layer_distance(n: int, n_other: int, geom: SimGeometry) -> float:
    """Distance between atoms n and n' on the same layer."""
    nx, nz = atom_index(n, geom.n_max)
    mx, mz = atom_index(n_other, geom.n_max)
    return geom.atom_spacing * math.hypot(nx - mx, nz - mz)


def inter_layer_distance(n: int, n_other: int, geom: SimGeometry) -> float:
    """Propagation distance from atom n on layer l-1 to atom n' on layer l."""
    return math.hypot(intra_layer_distance(n, n_other, geom), geom.gap)


def antenna_to_layer_distance(k: int, n: int, geom: SimGeometry) -> float:
    """Distance from antenna element k to atom n of the first layer.

    The antenna array is a half-wavelength-spaced line along z, centered on
    the layer center; atom offsets are measured from the lattice center.
    """
    if not (1 <= k <= geom.num_antennas):
        raise ValueError(f"antenna index {k} outside [1, {geom.num_antennas}]")
    nx, nz = atom_index(n, geom.n_max)
    center = (geom.n_max + 1) / 2.0
    z_term = (nz - center) * geom.atom_spacing - geom.antenna_spacing * (
        k - (geom.num_antennas + 1) / 2.0
    )
    x_term = (nx - center) * geom.atom_spacing
    return math.sqrt(z_term**2 + x_term**2 + geom.gap**2)


def diffraction_coefficient(dist, geom: SimGeometry):
    """Rayleigh-Sommerfeld propagation coefficient at the given distance.

    Accepts a scalar or an ndarray of distances.  The phase advances by
    2*pi per wavelength of travel.
    """
    arr = np.asarray(dist, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("propagation distance must be strictly positive")
    lam = geom.wavelength
    amp = geom.atom_area * geom.gap / arr**2
    w = amp * (1.0 / (2.0 * np.pi * arr) - 1j / lam) * np.exp(2j * np.pi * arr / lam)
    if np.isscalar(dist):
        return complex(w)
    return w


def build_propagation_matrices(geom: SimGeometry) -> PropagationMatrices:
    """All antenna-to-layer and layer-to-layer coefficient matrices."""
    n = geom.atoms_per_layer
    idx = np.arange(1, n + 1)
    xs = (idx - 1) % geom.n_max + 1
    zs = np.ceil(idx / geom.n_max).astype(int)

    intra = geom.atom_spacing * np.hypot(
        xs[:, None] - xs[None, :], zs[:, None] - zs[None, :]
    )
    inter = np.sqrt(intra**2 + geom.gap**2)
    w_layer = diffraction_coefficient(inter, geom)

    center = (geom.n_max + 1) / 2.0
    ks = np.arange(1, geom.num_antennas + 1)
    z_term = (zs[:, None] - center) * geom.atom_spacing - geom.antenna_spacing * (
        ks[None, :] - (geom.num_antennas + 1) / 2.0
    )
    x_term = (xs - center) * geom.atom_spacing
    dist_first = np.sqrt(z_term**2 + x_term[:, None] ** 2 + geom.gap**2)
    w_first = diffraction_coefficient(dist_first, geom)

    # Uniform gaps make every inner matrix identical; share one array.
    return PropagationMatrices(
        w_first=w_first, w_inner=tuple([w_layer] * (geom.num_layers - 1))
    )


def phase_matrix(layer_phases) -> np.ndarray:
    """Diagonal unit-modulus transmission matrix of one layer."""
    theta = np.asarray(layer_phases, dtype=float)
    if theta.ndim != 1:
        raise ValueError("layer phases must be a 1-D vector")
    if not np.all(np.isfinite(theta)):
        raise ValueError("layer phases must be finite")
    if np.any(theta < 0.0) or np.any(theta >= 2.0 * np.pi):
        raise ValueError("layer phases must lie in [0, 2*pi)")
    return np.diag(np.exp(1j * theta))


def transfer_function(phases: PhaseConfiguration, props: PropagationMatrices) -> np.ndarray:
    """Cascaded response of the stack: Phi_L W_L ... Phi_2 W_2 Phi_1.

    The antenna-to-first-layer matrix is not part of the cascade; for a
    single layer this is just the first phase mask.
    """
    theta = phases.phases
    num_layers, n = theta.shape
    if len(props.w_inner) != num_layers - 1:
        raise ValueError(
            f"phase configuration has {num_layers} layers but propagation "
            f"matrices cover {len(props.w_inner) + 1}"
        )
    for w in props.w_inner:
        if w.shape != (n, n):
            raise ValueError("layer matrix shape does not match atom count")
    g = np.diag(np.exp(1j * theta[0]))
    for layer in range(1, num_layers):
        g = np.exp(1j * theta[layer])[:, None] * (props.w_inner[layer - 1] @ g)
    return g
