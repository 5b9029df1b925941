"""Policy and value networks: a classical MLP actor, the hybrid
pre-network / quantum-circuit / post-network actor, a random baseline, and
the (always classical) critic."""

from __future__ import annotations

import numpy as np

from . import nn
from .quantum import PqcParameters, pqc_backward, pqc_forward

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


def _mlp_specs(in_dim, hidden, out_dim):
    specs = []
    prev = in_dim
    for width in hidden:
        specs.append(nn.LayerSpec(kind="dense", in_dim=prev, out_dim=width))
        specs.append(nn.LayerSpec(kind="activation", activation="relu"))
        prev = width
    specs.append(nn.LayerSpec(kind="dense", in_dim=prev, out_dim=out_dim))
    return specs


class ClassicalActor:
    """MLP mapping the encoded state to the Gaussian action mean."""

    kind = "classical"

    def __init__(self, state_dim, action_dim, hidden, rng, log_std_init=0.0):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.net = nn.build_network(_mlp_specs(state_dim, hidden, action_dim), rng)
        self.log_std = np.full(action_dim, float(log_std_init))

    def forward(self, states):
        return self.net.forward(states)

    def backward(self, cache, d_means, d_log_std):
        grads, _ = self.net.backward(cache, d_means)
        return grads + [d_log_std]

    def parameters(self):
        return self.net.parameters() + [self.log_std]


class HybridActor:
    """Pre-network -> parameterized quantum circuit -> post-network actor.

    The flat state is reshaped to two channels (real/imaginary parts) over
    the concatenated channel-vector positions; two strided convolutions and
    a dense layer compress it to one feature per qubit, squashed into
    [-pi, pi].  The circuit's weighted Pauli-Z readouts feed the dense
    post-network that emits the Gaussian action mean.
    """

    kind = "quantum"

    def __init__(self, state_dim, action_dim, num_vectors, vector_len,
                 num_qubits, pqc_layers, rng, conv_filters=(128, 128),
                 conv_kernel=3, conv_stride=2, pre_dense=64,
                 post_hidden=(62, 32), log_std_init=0.0):
        if 2 * num_vectors * vector_len != state_dim:
            raise ValueError("state_dim does not match the channel layout")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.num_vectors = num_vectors
        self.vector_len = vector_len
        self.num_qubits = num_qubits

        positions = num_vectors * vector_len
        specs = []
        prev_ch = 2
        length = positions
        for filters in conv_filters:
            specs.append(
                nn.LayerSpec(kind="conv1d", in_dim=prev_ch, out_dim=filters,
                             kernel_size=conv_kernel, stride=conv_stride)
            )
            specs.append(nn.LayerSpec(kind="activation", activation="relu"))
            prev_ch = filters
            length = -(-length // conv_stride)
        specs.append(nn.LayerSpec(kind="flatten"))
        specs.append(nn.LayerSpec(kind="dense", in_dim=prev_ch * length,
                                  out_dim=pre_dense))
        specs.append(nn.LayerSpec(kind="activation", activation="relu"))
        specs.append(nn.LayerSpec(kind="dense", in_dim=pre_dense,
                                  out_dim=num_qubits))
        self.pre = nn.build_network(specs, rng)

        self.pqc = PqcParameters.init(num_qubits, pqc_layers, rng=rng)
        self.post = nn.build_network(
            _mlp_specs(self.pqc.num_outputs, post_hidden, action_dim), rng
        )
        self.log_std = np.full(action_dim, float(log_std_init))

    def _to_channels(self, states):
        batch = states.shape[0]
        x = states.reshape(batch, self.num_vectors, 2, self.vector_len)
        return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(
            batch, 2, self.num_vectors * self.vector_len
        )

    def forward(self, states):
        x = self._to_channels(states)
        pre_out, pre_cache = self.pre.forward(x)
        features = np.pi * np.tanh(pre_out)
        fwd = pqc_forward(self.pqc, features)
        means, post_cache = self.post.forward(fwd.expectations)
        return means, (pre_cache, pre_out, features, fwd, post_cache)

    def backward(self, cache, d_means, d_log_std):
        pre_cache, pre_out, features, fwd, post_cache = cache
        post_grads, d_expect = self.post.backward(post_cache, d_means)
        pqc_grads, d_features = pqc_backward(self.pqc, features, d_expect, fwd)
        d_pre = d_features * np.pi * (1.0 - np.tanh(pre_out) ** 2)
        pre_grads, _ = self.pre.backward(pre_cache, d_pre)
        return (
            pre_grads
            + [pqc_grads.input_scales, pqc_grads.rotation_angles,
               pqc_grads.observable_weights]
            + post_grads
            + [d_log_std]
        )

    def parameters(self):
        return (
            self.pre.parameters()
            + [self.pqc.input_scales, self.pqc.rotation_angles,
               self.pqc.observable_weights]
            + self.post.parameters()
            + [self.log_std]
        )


class RandomPolicy:
    """Feasible-range random baseline: uniform phases, random power split.

    Phase entries are drawn so the environment's tanh squash yields exactly
    uniform phases in [0, 2*pi); power logits are standard normal.
    """

    kind = "random"

    def __init__(self, action_dim, num_users):
        self.action_dim = action_dim
        self.num_users = num_users

    def sample(self, batch, rng):
        logits = rng.standard_normal((batch, self.num_users))
        u = rng.uniform(0.0, 1.0, (batch, self.action_dim - self.num_users))
        phases_raw = np.arctanh(2.0 * u - 1.0)
        return np.concatenate([logits, phases_raw], axis=1)

    def parameters(self):
        return []


class Critic:
    """Classical MLP state-value estimator."""

    def __init__(self, state_dim, hidden, rng):
        self.net = nn.build_network(_mlp_specs(state_dim, hidden, 1), rng)

    def forward(self, states):
        out, cache = self.net.forward(states)
        return out[:, 0], cache

    def backward(self, cache, d_values):
        grads, _ = self.net.backward(cache, d_values[:, None])
        return grads

    def parameters(self):
        return self.net.parameters()


def value(critic: Critic, state) -> float:
    """Scalar value estimate of a single encoded state."""
    v, _ = critic.forward(np.asarray(state, dtype=float)[None, :])
    return float(v[0])


def build_actor(agent_cfg, state_dim, action_dim, num_vectors, vector_len,
                num_users, rng):
    """Construct the actor named by agent_cfg.kind."""
    kind = agent_cfg.kind
    if kind == "classical":
        return ClassicalActor(
            state_dim, action_dim, tuple(agent_cfg.classical_hidden), rng,
            log_std_init=agent_cfg.log_std_init,
        )
    if kind == "quantum":
        return HybridActor(
            state_dim, action_dim, num_vectors, vector_len,
            agent_cfg.num_qubits, agent_cfg.pqc_layers, rng,
            conv_filters=tuple(agent_cfg.pre_conv_filters),
            conv_kernel=agent_cfg.pre_conv_kernel,
            conv_stride=agent_cfg.pre_conv_stride,
            pre_dense=agent_cfg.pre_dense,
            post_hidden=tuple(agent_cfg.post_hidden),
            log_std_init=agent_cfg.log_std_init,
        )
    if kind == "random":
        return RandomPolicy(action_dim, num_users)
    raise ValueError(f"unknown actor kind {kind!r}")


def save_agent(path, actor, critic, meta=None, opt_actor=None, opt_critic=None):
    """Persist all actor/critic parameters plus optimizer state."""
    arrays = {}
    for i, p in enumerate(actor.parameters()):
        arrays[f"actor/{i:03d}"] = p
    if critic is not None:
        for i, p in enumerate(critic.parameters()):
            arrays[f"critic/{i:03d}"] = p
    header = dict(meta or {})
    header["agent_kind"] = actor.kind
    for name, opt in (("opt_actor", opt_actor), ("opt_critic", opt_critic)):
        if opt is None:
            continue
        for i, (m, v) in enumerate(zip(opt.first_moment, opt.second_moment)):
            arrays[f"{name}/m/{i:03d}"] = m
            arrays[f"{name}/v/{i:03d}"] = v
        header[f"{name}_step"] = opt.step_count
        header[f"{name}_lr"] = opt.lr
    nn.save_checkpoint(path, arrays, header)


def load_agent(path, actor, critic):
    """Copy checkpoint tensors into freshly built actor/critic structures.

    Raises CheckpointError when the stored kind or any tensor shape does
    not match what the configuration implies.
    """
    arrays, meta = nn.load_checkpoint(path)
    if meta.get("agent_kind") != actor.kind:
        raise nn.CheckpointError(
            f"checkpoint holds a {meta.get('agent_kind')!r} agent but the "
            f"configuration asks for {actor.kind!r}"
        )
    groups = [("actor", actor.parameters())]
    if critic is not None:
        groups.append(("critic", critic.parameters()))
    for prefix, params in groups:
        for i, p in enumerate(params):
            key = f"{prefix}/{i:03d}"
            if key not in arrays:
                raise nn.CheckpointError(f"checkpoint is missing tensor {key}")
            stored = arrays[key]
            if stored.shape != p.shape:
                raise nn.CheckpointError(
                    f"tensor {key} has shape {stored.shape}, expected {p.shape}"
                )
            np.copyto(p, stored)
    return meta
