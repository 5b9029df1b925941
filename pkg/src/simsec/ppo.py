"""PPO training core: rollout collection, generalized advantage estimation,
the clipped surrogate with entropy bonus and value regression, and the
iteration loop shared by the classical, hybrid-quantum, and random actors."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .actors import LOG_STD_MAX, LOG_STD_MIN, Critic, RandomPolicy, build_actor

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PpoHyper:
    """Training hyperparameters; defaults follow the standard PPO recipe."""

    discount: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 10
    minibatch: int = 64
    batch_steps: int = 1024
    entropy_coeff: float = 0.01
    value_coeff: float = 0.5
    lr: float = 3e-4
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.discount <= 1.0):
            raise ValueError("discount must be in [0, 1]")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.epochs < 1 or self.minibatch < 1 or self.batch_steps < 1:
            raise ValueError("epochs, minibatch, and batch_steps must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class RolloutBuffer:
    """Aligned on-policy trajectories plus GAE outputs."""

    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    bootstrap_value: float = 0.0
    advantages: np.ndarray = None
    returns: np.ndarray = None

    def __len__(self):
        return self.rewards.shape[0]


@dataclass(frozen=True)
class GaussianPolicyOutput:
    """Diagonal Gaussian over raw actions; log_std is state-independent."""

    mean: np.ndarray
    log_std: np.ndarray


def gaussian_sample_logprob(output: GaussianPolicyOutput, rng: np.random.Generator):
    """Draw one action and its log-density under the policy."""
    mean = np.asarray(output.mean, dtype=float)
    log_std = np.clip(output.log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    action = mean + std * rng.standard_normal(mean.shape)
    return action, float(gaussian_log_prob(action[None, :], mean[None, :], log_std)[0])


def gaussian_log_prob(actions, means, log_std):
    """Batched diagonal-Gaussian log density, shape (B,)."""
    z = (actions - means) / np.exp(log_std)
    return -0.5 * np.sum(z * z, axis=1) - np.sum(log_std) - 0.5 * _LOG_2PI * actions.shape[1]


def gaussian_entropy(log_std) -> float:
    """Differential entropy of the diagonal Gaussian policy."""
    dim = log_std.shape[0]
    return float(np.sum(log_std) + 0.5 * dim * (1.0 + _LOG_2PI))


def clip_ratio(psi: float, eps: float) -> float:
    """Likelihood ratio clamped to [1 - eps, 1 + eps]."""
    if eps <= 0:
        raise ValueError("clip range must be positive")
    if psi > 1.0 + eps:
        return 1.0 + eps
    if psi < 1.0 - eps:
        return 1.0 - eps
    return psi


def compute_gae(buffer: RolloutBuffer, discount: float, gae_lambda: float):
    """Exponentially weighted temporal-difference advantages.

    Done flags cut both the bootstrap and the recursion across episode
    boundaries.  Returns (advantages, returns) and stores them on the
    buffer; returns are advantages plus the value baseline.
    """
    t_max = len(buffer)
    if buffer.values.shape[0] != t_max or buffer.dones.shape[0] != t_max:
        raise ValueError("buffer sequences have mismatched lengths")
    advantages = np.zeros(t_max)
    next_adv = 0.0
    for t in reversed(range(t_max)):
        not_done = 1.0 - buffer.dones[t]
        next_value = buffer.bootstrap_value if t == t_max - 1 else buffer.values[t + 1]
        delta = buffer.rewards[t] + discount * not_done * next_value - buffer.values[t]
        next_adv = delta + discount * gae_lambda * not_done * next_adv
        advantages[t] = next_adv
    returns = advantages + buffer.values
    buffer.advantages = advantages
    buffer.returns = returns
    return advantages, returns


@dataclass
class LossReport:
    surrogate: float
    value_loss: float
    entropy: float
    total: float
    clip_fraction: float


def ppo_losses(minibatch: dict, actor, critic, hyper: PpoHyper) -> LossReport:
    """Loss terms on one minibatch with already-normalized advantages.

    The surrogate is the clipped objective being maximized; the reported
    total is the minimized combination
    -surrogate - c1 * entropy + c2 * value_loss.
    """
    terms = _policy_terms(minibatch, actor, critic, hyper)
    return terms["report"]


def _policy_terms(minibatch, actor, critic, hyper):
    states = minibatch["states"]
    actions = minibatch["actions"]
    old_log_probs = minibatch["log_probs"]
    advantages = minibatch["advantages"]
    returns = minibatch["returns"]
    if states.shape[0] == 0:
        raise ValueError("empty minibatch")

    means, actor_cache = actor.forward(states)
    log_std = np.clip(actor.log_std, LOG_STD_MIN, LOG_STD_MAX)
    new_log_probs = gaussian_log_prob(actions, means, log_std)
    ratios = np.exp(new_log_probs - old_log_probs)

    clipped = np.clip(ratios, 1.0 - hyper.clip, 1.0 + hyper.clip)
    surr_raw = ratios * advantages
    surr_clip = clipped * advantages
    objective = np.minimum(surr_raw, surr_clip)
    surrogate = float(np.mean(objective))
    clip_fraction = float(np.mean(np.abs(ratios - 1.0) > hyper.clip))

    entropy = gaussian_entropy(log_std)

    values, critic_cache = critic.forward(states)
    value_err = values - returns
    value_loss = float(np.mean(value_err**2))

    total = -surrogate - hyper.entropy_coeff * entropy + hyper.value_coeff * value_loss
    return {
        "report": LossReport(surrogate, value_loss, entropy, total, clip_fraction),
        "means": means,
        "actor_cache": actor_cache,
        "log_std": log_std,
        "new_log_probs": new_log_probs,
        "ratios": ratios,
        "objective_raw_selected": surr_raw <= surr_clip,
        "values": values,
        "critic_cache": critic_cache,
        "value_err": value_err,
    }


def _update_minibatch(minibatch, actor, critic, hyper, opt_actor, opt_critic):
    """One gradient step of the combined loss on actor and critic."""
    terms = _policy_terms(minibatch, actor, critic, hyper)
    states = minibatch["states"]
    batch = states.shape[0]
    actions = minibatch["actions"]
    advantages = minibatch["advantages"]

    # d(total)/d(ratio): the clipped branch has zero slope once saturated.
    active = terms["objective_raw_selected"]
    d_obj_d_ratio = np.where(active, advantages, 0.0)
    d_total_d_logp = -(d_obj_d_ratio * terms["ratios"]) / batch

    std = np.exp(terms["log_std"])
    z = (actions - terms["means"]) / std
    d_means = d_total_d_logp[:, None] * z / std
    d_log_std = np.sum(d_total_d_logp[:, None] * (z * z - 1.0), axis=0)
    d_log_std -= hyper.entropy_coeff  # entropy bonus pushes log_std up

    actor_grads = actor.backward(terms["actor_cache"], d_means, d_log_std)

    d_values = hyper.value_coeff * 2.0 * terms["value_err"] / batch
    critic_grads = critic.backward(terms["critic_cache"], d_values)

    nn.clip_global_norm(actor_grads + critic_grads, hyper.max_grad_norm)
    nn.adam_step(actor.parameters(), actor_grads, opt_actor)
    nn.adam_step(critic.parameters(), critic_grads, opt_critic)
    np.clip(actor.log_std, LOG_STD_MIN, LOG_STD_MAX, out=actor.log_std)
    return terms["report"]


def normalize_advantages(adv):
    return (adv - np.mean(adv)) / (np.std(adv) + 1e-8)


def collect_rollout(env, actor, critic, steps, rng, state):
    """Gather `steps` transitions from the environment.

    Returns the filled buffer, per-step environment metrics, and the state
    to resume from.  Episodes are reset in place when they end.
    """
    state_dim = env.state_dim
    action_dim = env.action_dim
    buffer = RolloutBuffer(
        states=np.zeros((steps, state_dim)),
        actions=np.zeros((steps, action_dim)),
        log_probs=np.zeros(steps),
        rewards=np.zeros(steps),
        values=np.zeros(steps),
        dones=np.zeros(steps),
    )
    stats = {"asr": np.zeros(steps), "jain": np.zeros(steps),
             "qos_violation": np.zeros(steps)}
    random_actor = isinstance(actor, RandomPolicy)

    for t in range(steps):
        encoded = state.encoded
        buffer.states[t] = encoded
        if random_actor:
            action = actor.sample(1, rng)[0]
            log_prob = 0.0
            val = 0.0
        else:
            means, _ = actor.forward(encoded[None, :])
            action, log_prob = gaussian_sample_logprob(
                GaussianPolicyOutput(mean=means[0], log_std=actor.log_std), rng
            )
            v, _ = critic.forward(encoded[None, :])
            val = float(v[0])
        outcome = env.step(action)
        buffer.actions[t] = action
        buffer.log_probs[t] = log_prob
        buffer.rewards[t] = outcome.reward
        buffer.values[t] = val
        buffer.dones[t] = float(outcome.done)
        stats["asr"][t] = outcome.info.asr
        stats["jain"][t] = outcome.info.jain
        stats["qos_violation"][t] = 0.0 if outcome.info.qos_ok else 1.0
        state = env.reset() if outcome.done else outcome.next_state

    if random_actor or buffer.dones[-1] > 0:
        buffer.bootstrap_value = 0.0
    else:
        v, _ = critic.forward(state.encoded[None, :])
        buffer.bootstrap_value = float(v[0])
    return buffer, stats, state


@dataclass
class TrainResult:
    metrics: list
    actor: object
    critic: object
    opt_actor: object
    opt_critic: object


def train(env_factory, actor_kind: str, hyper: PpoHyper, agent_cfg,
          total_steps: int, seed: int, on_iteration=None) -> TrainResult:
    """Run the full collect/update loop.

    Each iteration gathers hyper.batch_steps transitions, computes GAE, and
    runs hyper.epochs passes of shuffled minibatch updates; the random
    baseline collects but never updates.  Metrics rows are dictionaries,
    one per iteration.
    """
    seeds = np.random.SeedSequence(seed).generate_state(4)
    env = env_factory(int(seeds[0]))
    rng_init = np.random.default_rng(int(seeds[1]))
    rng_sample = np.random.default_rng(int(seeds[2]))
    rng_shuffle = np.random.default_rng(int(seeds[3]))

    num_vectors = getattr(env, "num_vectors", 1)
    vector_len = getattr(env, "vector_len", env.state_dim // 2)
    num_users = getattr(env, "num_users", 0)
    actor = build_actor(agent_cfg, env.state_dim, env.action_dim,
                        num_vectors, vector_len, num_users, rng_init)
    critic = Critic(env.state_dim, tuple(agent_cfg.classical_hidden), rng_init)
    opt_actor = nn.AdamState.for_params(actor.parameters(), hyper.lr)
    opt_critic = nn.AdamState.for_params(critic.parameters(), hyper.lr)

    state = env.reset(seed=int(seeds[0]))
    iterations = total_steps // hyper.batch_steps
    metrics = []
    env_steps = 0
    for iteration in range(1, iterations + 1):
        t0 = time.perf_counter()
        buffer, stats, state = collect_rollout(
            env, actor, critic, hyper.batch_steps, rng_sample, state
        )
        env_steps += len(buffer)

        reports = []
        if actor_kind != "random":
            compute_gae(buffer, hyper.discount, hyper.gae_lambda)
            indices = np.arange(len(buffer))
            for _ in range(hyper.epochs):
                rng_shuffle.shuffle(indices)
                for start in range(0, len(indices), hyper.minibatch):
                    sel = indices[start:start + hyper.minibatch]
                    minibatch = {
                        "states": buffer.states[sel],
                        "actions": buffer.actions[sel],
                        "log_probs": buffer.log_probs[sel],
                        "advantages": normalize_advantages(buffer.advantages[sel]),
                        "returns": buffer.returns[sel],
                    }
                    reports.append(
                        _update_minibatch(minibatch, actor, critic, hyper,
                                          opt_actor, opt_critic)
                    )

        row = {
            "iteration": iteration,
            "env_steps": env_steps,
            "mean_asr": float(np.mean(stats["asr"])),
            "mean_reward": float(np.mean(buffer.rewards)),
            "jain": float(np.mean(stats["jain"])),
            "qos_violation_rate": float(np.mean(stats["qos_violation"])),
            "surrogate_loss": float(np.mean([r.surrogate for r in reports])) if reports else 0.0,
            "value_loss": float(np.mean([r.value_loss for r in reports])) if reports else 0.0,
            "entropy": float(np.mean([r.entropy for r in reports])) if reports else 0.0,
            "clip_fraction": float(np.mean([r.clip_fraction for r in reports])) if reports else 0.0,
            "wall_seconds": time.perf_counter() - t0,
        }
        metrics.append(row)
        if on_iteration is not None:
            on_iteration(row)

    return TrainResult(metrics=metrics, actor=actor, critic=critic,
                       opt_actor=opt_actor, opt_critic=opt_critic)


def evaluate_policy(env, actor, episodes: int, eval_seed: int,
                    sample_rng_seed: int = None):
    """Deterministic-policy evaluation over freshly seeded episodes.

    Trained actors act through their Gaussian mean; the random baseline
    samples from its own seeded stream.  Returns per-episode means of the
    secrecy metrics.
    """
    random_actor = isinstance(actor, RandomPolicy)
    rng = np.random.default_rng(
        sample_rng_seed if sample_rng_seed is not None else eval_seed
    )
    asr, jain, qos_viol, rewards = [], [], [], []
    for episode in range(episodes):
        state = env.reset(seed=eval_seed + episode)
        ep_asr, ep_jain, ep_qos, ep_rew = [], [], [], []
        done = False
        while not done:
            if random_actor:
                action = actor.sample(1, rng)[0]
            else:
                means, _ = actor.forward(state.encoded[None, :])
                action = means[0]
            outcome = env.step(action)
            ep_asr.append(outcome.info.asr)
            ep_jain.append(outcome.info.jain)
            ep_qos.append(0.0 if outcome.info.qos_ok else 1.0)
            ep_rew.append(outcome.reward)
            state = outcome.next_state
            done = outcome.done
        asr.append(np.mean(ep_asr))
        jain.append(np.mean(ep_jain))
        qos_viol.append(np.mean(ep_qos))
        rewards.append(np.mean(ep_rew))
    return {
        "episodes": episodes,
        "asr": np.array(asr),
        "jain": np.array(jain),
        "qos_violation": np.array(qos_viol),
        "reward": np.array(rewards),
    }
