"""Dense statevector simulation of the hardware-efficient policy circuit:
Y/Z rotations, CZ entanglers, data reuploading across layers, weighted
Pauli-Z measurements, the softmax policy head, and exact reverse-mode
gradients through the whole circuit.

Qubit i corresponds to bit i of the basis index (little-endian), so basis
state |0...0> is amplitude index 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


def ry(angle: float) -> np.ndarray:
    """Rotation exp(-i*angle*Y/2)."""
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(angle: float) -> np.ndarray:
    """Rotation exp(-i*angle*Z/2)."""
    phase = np.exp(-0.5j * angle)
    return np.array([[phase, 0.0], [0.0, phase.conjugate()]], dtype=complex)


def _ry_batch(angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles / 2.0), np.sin(angles / 2.0)
    out = np.empty(angles.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def _rz_batch(angles: np.ndarray) -> np.ndarray:
    phase = np.exp(-0.5j * angles)
    out = np.zeros(angles.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = phase
    out[..., 1, 1] = np.conj(phase)
    return out


@dataclass(frozen=True)
class QuantumState:
    """Normalized statevector over 2**num_qubits basis states."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if self.num_qubits < 1 or self.num_qubits > MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}]")
        if amps.shape != (2**self.num_qubits,):
            raise ValueError("amplitude vector length must be 2**num_qubits")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"statevector norm {norm} deviates from 1")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(num_qubits: int) -> QuantumState:
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return QuantumState(amplitudes=amps, num_qubits=num_qubits)


def _apply_1q(amps: np.ndarray, gate: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Apply a 2x2 gate to one qubit of a (..., 2**q) amplitude array.

    `gate` is either a single (2, 2) matrix or a batch (B, 2, 2) matching
    the leading batch axis of `amps`.
    """
    if not (0 <= qubit < num_qubits):
        raise ValueError(f"qubit index {qubit} outside [0, {num_qubits})")
    lead = amps.shape[:-1]
    outer = 2 ** (num_qubits - 1 - qubit)
    inner = 2**qubit
    reshaped = amps.reshape(lead + (outer, 2, inner))
    if gate.ndim == 2:
        out = np.einsum("st,...ati->...asi", gate, reshaped)
    else:
        out = np.einsum("bst,bati->basi", gate, reshaped)
    return out.reshape(amps.shape)


def apply_1q(state: QuantumState, gate: np.ndarray, qubit: int) -> QuantumState:
    """Apply a single-qubit unitary and return the new state."""
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise ValueError("single-qubit gate must be a 2x2 matrix")
    amps = _apply_1q(state.amplitudes, gate, qubit, state.num_qubits)
    return QuantumState(amplitudes=amps, num_qubits=state.num_qubits)


def _cz_mask(q1: int, q2: int, num_qubits: int) -> np.ndarray:
    if q1 == q2:
        raise ValueError("controlled-Z needs two distinct qubits")
    for q in (q1, q2):
        if not (0 <= q < num_qubits):
            raise ValueError(f"qubit index {q} outside [0, {num_qubits})")
    idx = np.arange(2**num_qubits)
    both = ((idx >> q1) & 1) & ((idx >> q2) & 1)
    return np.where(both, -1.0, 1.0)


def apply_cz(state: QuantumState, q1: int, q2: int) -> QuantumState:
    """Flip the sign of amplitudes where both qubits are |1>."""
    mask = _cz_mask(q1, q2, state.num_qubits)
    return QuantumState(amplitudes=state.amplitudes * mask, num_qubits=state.num_qubits)


class Observable:
    """Hermitian single-qubit factors attached to distinct qubits.

    The represented operator is the tensor product of the given 2x2
    Hermitian matrices on their qubits and identity elsewhere.  Construction
    rejects non-Hermitian input.
    """

    def __init__(self, matrices, qubits):
        mats = tuple(np.asarray(m, dtype=complex) for m in matrices)
        qubits = tuple(int(q) for q in qubits)
        if len(mats) != len(qubits) or not mats:
            raise ValueError("need one matrix per qubit")
        if len(set(qubits)) != len(qubits):
            raise ValueError("observable qubits must be distinct")
        for m in mats:
            if m.shape != (2, 2):
                raise ValueError("observable factors must be 2x2")
            if not np.allclose(m, m.conj().T, atol=1e-12):
                raise ValueError("observable factor is not Hermitian")
        self.matrices = mats
        self.qubits = qubits

    @classmethod
    def single_z(cls, qubit: int) -> "Observable":
        return cls([PAULI_Z], [qubit])

    @classmethod
    def pauli_string(cls, spec: str) -> "Observable":
        """Build from a string like 'ZIZ' where character i acts on qubit i."""
        table = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
        mats, qubits = [], []
        for i, ch in enumerate(spec.upper()):
            if ch == "I":
                continue
            if ch not in table:
                raise ValueError(f"unknown Pauli letter {ch!r}")
            mats.append(table[ch])
            qubits.append(i)
        if not mats:
            mats, qubits = [np.eye(2, dtype=complex)], [0]
        return cls(mats, qubits)

    def apply(self, amps: np.ndarray, num_qubits: int) -> np.ndarray:
        out = amps
        for m, q in zip(self.matrices, self.qubits):
            out = _apply_1q(out, m, q, num_qubits)
        return out


def expectation(state: QuantumState, components, weights) -> float:
    """Weighted sum of component expectation values <psi|H_i|psi>."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(components),):
        raise ValueError("need one weight per observable component")
    total = 0.0
    for w, obs in zip(weights, components):
        acted = obs.apply(state.amplitudes, state.num_qubits)
        total += w * float(np.vdot(state.amplitudes, acted).real)
    return total


def _z_signs(num_qubits: int) -> np.ndarray:
    """(2**q, q) matrix of Pauli-Z eigenvalues per basis state and qubit."""
    idx = np.arange(2**num_qubits)
    bits = (idx[:, None] >> np.arange(num_qubits)[None, :]) & 1
    return 1.0 - 2.0 * bits


def z_expectations(amps: np.ndarray, num_qubits: int) -> np.ndarray:
    """Per-qubit <Z_i> for a (..., 2**q) amplitude array; returns (..., q)."""
    probs = np.abs(amps) ** 2
    return probs @ _z_signs(num_qubits)


def softmax_policy(expectations, inverse_temperature: float) -> np.ndarray:
    """Action distribution proportional to exp(zeta * <O_a>)."""
    if inverse_temperature <= 0:
        raise ValueError("inverse temperature must be positive")
    vals = inverse_temperature * np.asarray(expectations, dtype=float)
    vals = vals - np.max(vals, axis=-1, keepdims=True)
    e = np.exp(vals)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass(frozen=True)
class PolicyConfig:
    """Measurement head configuration for the softmax policy."""

    inverse_temperature: float = 1.0
    observables: tuple = None

    def __post_init__(self):
        if self.inverse_temperature <= 0:
            raise ValueError("inverse temperature must be positive")


@dataclass
class PqcParameters:
    """Trainable circuit parameters.

    input_scales and rotation_angles have shape (layers, qubits, 2) with the
    last axis ordered (Y, Z); observable_weights has shape
    (num_outputs, qubits) and mixes the per-qubit Z readouts.
    """

    input_scales: np.ndarray
    rotation_angles: np.ndarray
    observable_weights: np.ndarray

    def __post_init__(self):
        self.input_scales = np.asarray(self.input_scales, dtype=float)
        self.rotation_angles = np.asarray(self.rotation_angles, dtype=float)
        self.observable_weights = np.asarray(self.observable_weights, dtype=float)
        if self.input_scales.ndim != 3 or self.input_scales.shape[2] != 2:
            raise ValueError("input_scales must have shape (layers, qubits, 2)")
        if self.rotation_angles.shape != self.input_scales.shape:
            raise ValueError("rotation_angles must match input_scales shape")
        if self.input_scales.shape[0] < 1:
            raise ValueError("need at least one circuit layer")
        if self.num_qubits > MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits supported")
        if self.observable_weights.ndim != 2 or (
            self.observable_weights.shape[1] != self.num_qubits
        ):
            raise ValueError("observable_weights must have shape (outputs, qubits)")
        for arr in (self.input_scales, self.rotation_angles, self.observable_weights):
            if not np.all(np.isfinite(arr)):
                raise ValueError("circuit parameters must be finite")

    @property
    def num_layers(self) -> int:
        return self.input_scales.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.input_scales.shape[1]

    @property
    def num_outputs(self) -> int:
        return self.observable_weights.shape[0]

    @classmethod
    def init(cls, num_qubits: int, num_layers: int, num_outputs: int = None,
             rng: np.random.Generator = None) -> "PqcParameters":
        """Unit input scales, uniform rotation angles, unit readout weights."""
        if num_outputs is None:
            num_outputs = num_qubits
        if rng is None:
            rng = np.random.default_rng()
        return cls(
            input_scales=np.ones((num_layers, num_qubits, 2)),
            rotation_angles=rng.uniform(-np.pi, np.pi, (num_layers, num_qubits, 2)),
            observable_weights=np.ones((num_outputs, num_qubits)),
        )


@dataclass
class PqcGradients:
    """Gradients aligned with PqcParameters fields."""

    input_scales: np.ndarray
    rotation_angles: np.ndarray
    observable_weights: np.ndarray


@dataclass
class PqcForward:
    """Forward-pass products reused by the backward pass."""

    amplitudes: np.ndarray  # final statevector(s), shape (B, 2**q)
    z_values: np.ndarray  # per-qubit <Z_i>, shape (B, q)
    expectations: np.ndarray  # weighted readouts, shape (B, outputs)


def _check_features(features: np.ndarray, num_qubits: int):
    if features.ndim != 2 or features.shape[1] != num_qubits:
        raise ValueError(
            f"features must have shape (batch, {num_qubits}), got {features.shape}"
        )
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    if np.any(np.abs(features) > np.pi + 1e-9):
        raise ValueError("features must be pre-normalized to [-pi, pi]")


def pqc_forward(params: PqcParameters, features) -> PqcForward:
    """Run the circuit on a batch of feature vectors.

    Starting from |0...0>, a Hadamard wall creates the uniform
    superposition; every layer then re-encodes the features with scaled Y/Z
    rotations, applies the trainable Y/Z rotations, and entangles
    neighboring qubits with a CZ chain.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    q = params.num_qubits
    _check_features(features, q)
    batch = features.shape[0]

    amps = np.zeros((batch, 2**q), dtype=complex)
    amps[:, 0] = 1.0
    for i in range(q):
        amps = _apply_1q(amps, HADAMARD, i, q)
    for layer in range(params.num_layers):
        for i in range(q):
            amps = _apply_1q(
                amps, _ry_batch(params.input_scales[layer, i, 0] * features[:, i]), i, q
            )
            amps = _apply_1q(
                amps, _rz_batch(params.input_scales[layer, i, 1] * features[:, i]), i, q
            )
        for i in range(q):
            amps = _apply_1q(amps, ry(params.rotation_angles[layer, i, 0]), i, q)
            amps = _apply_1q(amps, rz(params.rotation_angles[layer, i, 1]), i, q)
        for i in range(q - 1):
            amps = amps * _cz_mask(i, i + 1, q)

    z_vals = z_expectations(amps, q)
    return PqcForward(
        amplitudes=amps,
        z_values=z_vals,
        expectations=z_vals @ params.observable_weights.T,
    )


def run_pqc(params: PqcParameters, features, return_layer_norms: bool = False):
    """Single-sample circuit run returning the output QuantumState.

    With return_layer_norms=True also returns the statevector norm after
    every layer (useful to assert norm preservation).
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise ValueError("run_pqc expects a single feature vector")
    q = params.num_qubits
    _check_features(features[None, :], q)

    amps = np.zeros(2**q, dtype=complex)
    amps[0] = 1.0
    for i in range(q):
        amps = _apply_1q(amps, HADAMARD, i, q)
    norms = []
    for layer in range(params.num_layers):
        for i in range(q):
            amps = _apply_1q(
                amps, ry(params.input_scales[layer, i, 0] * features[i]), i, q
            )
            amps = _apply_1q(
                amps, rz(params.input_scales[layer, i, 1] * features[i]), i, q
            )
        for i in range(q):
            amps = _apply_1q(amps, ry(params.rotation_angles[layer, i, 0]), i, q)
            amps = _apply_1q(amps, rz(params.rotation_angles[layer, i, 1]), i, q)
        for i in range(q - 1):
            amps = amps * _cz_mask(i, i + 1, q)
        norms.append(float(np.linalg.norm(amps)))
    state = QuantumState(amplitudes=amps, num_qubits=q)
    if return_layer_norms:
        return state, norms
    return state


def _pauli_on(amps: np.ndarray, pauli: np.ndarray, qubit: int, q: int) -> np.ndarray:
    return _apply_1q(amps, pauli, qubit, q)


def pqc_backward(params: PqcParameters, features, upstream,
                 forward: PqcForward = None):
    """Exact gradients of the weighted readouts via adjoint reverse mode.

    `upstream` is dLoss/dExpectations with shape (batch, outputs).  Returns
    (PqcGradients summed over the batch, dLoss/dFeatures of shape
    (batch, qubits)).  The pass walks the gates backwards, un-applying each
    unitary to recover intermediate states, so no per-gate caching is
    needed; the angle gradient of a rotation exp(-i*a*P/2) is
    Im(<cotangent| P |state after the gate>).
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    q = params.num_qubits
    _check_features(features, q)
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (features.shape[0], params.num_outputs):
        raise ValueError(
            f"upstream must have shape ({features.shape[0]}, {params.num_outputs})"
        )
    if forward is None:
        forward = pqc_forward(params, features)

    grads = PqcGradients(
        input_scales=np.zeros_like(params.input_scales),
        rotation_angles=np.zeros_like(params.rotation_angles),
        observable_weights=upstream.T @ forward.z_values,
    )
    d_features = np.zeros_like(features)

    # Cotangent dL/d(conj(psi)) of the final state for the weighted Z sums:
    # the effective operator is diagonal with entries sum_i u_i * (+-1).
    u = upstream @ params.observable_weights  # (B, q) weights on each <Z_i>
    diag = u @ _z_signs(q).T  # (B, 2**q) real diagonal
    psi = forward.amplitudes
    lam = diag * psi

    def rotation_grad(pauli, qubit):
        acted = _pauli_on(psi, pauli, qubit, q)
        return np.sum(np.conj(lam) * acted, axis=1).imag  # (B,)

    def unapply(gate_batch, qubit):
        nonlocal psi, lam
        inv = np.conj(np.swapaxes(gate_batch, -1, -2)) if gate_batch.ndim == 3 else gate_batch.conj().T
        psi = _apply_1q(psi, inv, qubit, q)
        lam = _apply_1q(lam, inv, qubit, q)

    for layer in reversed(range(params.num_layers)):
        for i in reversed(range(q - 1)):
            mask = _cz_mask(i, i + 1, q)
            psi = psi * mask
            lam = lam * mask
        for i in reversed(range(q)):
            g = rotation_grad(PAULI_Z, i)
            grads.rotation_angles[layer, i, 1] = np.sum(g)
            unapply(rz(params.rotation_angles[layer, i, 1]), i)
            g = rotation_grad(PAULI_Y, i)
            grads.rotation_angles[layer, i, 0] = np.sum(g)
            unapply(ry(params.rotation_angles[layer, i, 0]), i)
        for i in reversed(range(q)):
            scale_z = params.input_scales[layer, i, 1]
            g = rotation_grad(PAULI_Z, i)
            grads.input_scales[layer, i, 1] = np.dot(g, features[:, i])
            d_features[:, i] += g * scale_z
            unapply(_rz_batch(scale_z * features[:, i]), i)
            scale_y = params.input_scales[layer, i, 0]
            g = rotation_grad(PAULI_Y, i)
            grads.input_scales[layer, i, 0] = np.dot(g, features[:, i])
            d_features[:, i] += g * scale_y
            unapply(_ry_batch(scale_y * features[:, i]), i)

    return grads, d_features
