"""Clipped-surrogate policy-gradient training over parallel environments.

One training round collects `steps_per_update` transitions spread across the
parallel environments, computes generalized advantage estimates with episode
boundaries respected, then runs up to `epochs` minibatch passes; the epoch
loop aborts once the exact KL between the sampling policy and the updated
one exceeds `kl_limit`. Early stopping watches an exponential moving average
of episode returns and gives up after `patience` rounds without improvement.

Environments are duck-typed: anything with n_zones, reset() -> (state,
masks), step(actions) -> result carrying state/reward/done/masks/info works,
which keeps the trainer testable on one-step sanity worlds.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import os

import numpy as np

from .adaptation import N_ACTIONS
from .env import EnvConfig, FloodAdaptEnv
from .errors import NumericalError, ValidationError
from .policy import (
    TRAINABLE,
    exact_kl,
    forward_batch,
    init_params,
    loss_and_gradients,
    normalized_adjacency,
    save_checkpoint,
)
from .worldio import World


@dataclass(frozen=True)
class PpoConfig:
    batch_size: int = 64
    steps_per_update: int = 1024
    epochs: int = 10
    entropy_coef: float = 0.01
    kl_limit: float = 0.2
    clip: float = 0.2
    gae_lambda: float = 0.95
    parallel_envs: int = 10
    max_steps: int = 4_500_000
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    grad_clip: float = 0.5
    patience: int = 15
    ema_alpha: float = 0.3
    seed: int = 0
    hidden: int = 64

    def __post_init__(self):
        positives = {
            "batch_size": self.batch_size,
            "steps_per_update": self.steps_per_update,
            "epochs": self.epochs,
            "kl_limit": self.kl_limit,
            "clip": self.clip,
            "parallel_envs": self.parallel_envs,
            "max_steps": self.max_steps,
            "learning_rate": self.learning_rate,
            "grad_clip": self.grad_clip,
            "patience": self.patience,
            "hidden": self.hidden,
        }
        for name, v in positives.items():
            if v <= 0:
                raise ValidationError(f"{name} must be positive, got {v}")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValidationError("gae_lambda must lie in [0, 1]")
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValidationError("ema_alpha must lie in (0, 1]")

    def rollout_length(self) -> int:
        """Per-env steps each round; rounds the budget up to a full sweep."""
        return -(-self.steps_per_update // self.parallel_envs)

    def transitions_per_update(self) -> int:
        return self.rollout_length() * self.parallel_envs


@dataclass
class RolloutBuffer:
    """Transitions laid out (T, E, ...); flattened views feed the updates."""

    states: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    dones: np.ndarray
    old_probs: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)
    episode_returns: list = field(default_factory=list)
    component_means: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.states.shape[0] * self.states.shape[1]

    def flat(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        return arr.reshape(self.size, *arr.shape[2:])


def compute_gae(rewards, values, dones, last_values, gamma, lam):
    """delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t, accumulated backward."""
    t_max, n_env = rewards.shape
    adv = np.zeros_like(rewards)
    carry = np.zeros(n_env)
    next_values = last_values
    for t in range(t_max - 1, -1, -1):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * not_done - values[t]
        carry = delta + gamma * lam * not_done * carry
        adv[t] = carry
        next_values = values[t]
    return adv, adv + values


class EnvRunner:
    """Keeps one environment's pending observation and running return."""

    def __init__(self, env):
        self.env = env
        self.state, self.masks = env.reset()
        self.acc_return = 0.0

    @property
    def n_zones(self) -> int:
        return self.env.n_zones


def collect(runners: list[EnvRunner], params, adj, config: PpoConfig,
            gamma: float, rng: np.random.Generator) -> RolloutBuffer:
    """Roll all environments forward steps_per_update/len(runners) steps each.

    Environments that finish an episode are reset in place; their returns
    (undiscounted sums of the scaled reward) are recorded for the curve.
    """
    n_env = len(runners)
    t_max = -(-config.steps_per_update // n_env)
    n = runners[0].n_zones

    cur_states = np.array([r.state for r in runners])
    cur_masks = np.array([r.masks for r in runners])
    f = cur_states.shape[2]
    states = np.zeros((t_max, n_env, n, f))
    masks = np.zeros((t_max, n_env, n, N_ACTIONS), dtype=bool)
    actions = np.zeros((t_max, n_env, n), dtype=np.int64)
    rewards = np.zeros((t_max, n_env))
    values = np.zeros((t_max, n_env))
    log_probs = np.zeros((t_max, n_env))
    dones = np.zeros((t_max, n_env))
    old_probs = np.zeros((t_max, n_env, n, N_ACTIONS))
    episode_returns: list[float] = []
    comp_sums = {k: 0.0 for k in ("I", "D", "C", "A", "M")}

    for t in range(t_max):
        probs, vals = forward_batch(params, adj, cur_states, cur_masks)
        cum = np.cumsum(probs, axis=-1)
        u = rng.random((n_env, n))
        acts = np.minimum((u[..., None] >= cum).sum(axis=-1), N_ACTIONS - 1)
        chosen = np.take_along_axis(probs, acts[..., None], axis=-1)[..., 0]
        lps = np.log(chosen).sum(axis=-1)

        states[t] = cur_states
        masks[t] = cur_masks
        actions[t] = acts
        values[t] = vals
        log_probs[t] = lps
        old_probs[t] = probs

        for e, runner in enumerate(runners):
            res = runner.env.step(acts[e])
            rewards[t, e] = res.reward
            runner.acc_return += res.reward
            if res.info is not None:
                for k, v in res.info.totals.items():
                    comp_sums[k] += v
            if res.done:
                dones[t, e] = 1.0
                episode_returns.append(runner.acc_return)
                runner.state, runner.masks = runner.env.reset()
                runner.acc_return = 0.0
            else:
                runner.state, runner.masks = res.state, res.masks
            cur_states[e] = runner.state
            cur_masks[e] = runner.masks

    _, last_values = forward_batch(params, adj, cur_states, cur_masks)
    buf = RolloutBuffer(
        states=states, masks=masks, actions=actions, rewards=rewards,
        values=values, log_probs=log_probs, dones=dones, old_probs=old_probs,
        last_values=last_values,
        episode_returns=episode_returns,
        component_means={k: v / (t_max * n_env) for k, v in comp_sums.items()},
    )
    adv, rets = compute_gae(rewards, values, dones, last_values,
                            gamma, config.gae_lambda)
    buf.advantages = adv
    buf.returns = rets
    return buf


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def init(cls, params) -> "AdamState":
        return cls(m={k: np.zeros_like(params[k]) for k in TRAINABLE},
                   v={k: np.zeros_like(params[k]) for k in TRAINABLE})


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    state.t += 1
    for k in TRAINABLE:
        state.m[k] = beta1 * state.m[k] + (1 - beta1) * grads[k]
        state.v[k] = beta2 * state.v[k] + (1 - beta2) * grads[k] ** 2
        mhat = state.m[k] / (1 - beta1 ** state.t)
        vhat = state.v[k] / (1 - beta2 ** state.t)
        params[k] = params[k] - lr * mhat / (np.sqrt(vhat) + eps)
    return params


def clip_gradients(grads, max_norm):
    total = np.sqrt(sum(float((grads[k] ** 2).sum()) for k in TRAINABLE))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        grads = {k: g * scale for k, g in grads.items()}
    return grads, total


def update(params, opt_state: AdamState, buffer: RolloutBuffer, adj,
           config: PpoConfig, rng: np.random.Generator):
    """Minibatch PPO epochs with a KL trust-region stop between epochs."""
    size = buffer.size
    states = buffer.flat("states")
    masks = buffer.flat("masks")
    actions = buffer.flat("actions")
    old_lp = buffer.flat("log_probs")
    old_probs = buffer.flat("old_probs")
    adv = buffer.flat("advantages")
    rets = buffer.flat("returns")
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    metrics = {"epochs_run": 0, "mean_kl": 0.0, "clip_fraction": 0.0,
               "loss": 0.0, "pi_loss": 0.0, "v_loss": 0.0, "entropy": 0.0,
               "grad_norm": 0.0, "aborted": False}
    batches = 0
    for epoch in range(config.epochs):
        order = rng.permutation(size)
        for lo in range(0, size, config.batch_size):
            sel = order[lo:lo + config.batch_size]
            batch = {
                "states": states[sel], "masks": masks[sel],
                "actions": actions[sel], "advantages": adv[sel],
                "old_log_probs": old_lp[sel], "returns": rets[sel],
            }
            try:
                _, grads, m = loss_and_gradients(
                    params, adj, batch, clip=config.clip,
                    entropy_coef=config.entropy_coef,
                    value_coef=config.value_coef)
            except NumericalError:
                metrics["aborted"] = True
                return params, opt_state, metrics
            grads, norm = clip_gradients(grads, config.grad_clip)
            params = adam_step(params, grads, opt_state, config.learning_rate)
            batches += 1
            for key in ("loss", "pi_loss", "v_loss", "entropy", "clip_fraction"):
                metrics[key] += m[key]
            metrics["grad_norm"] += norm
        metrics["epochs_run"] = epoch + 1
        new_probs, _ = forward_batch(params, adj, states, masks)
        kl = exact_kl(old_probs, new_probs)
        metrics["mean_kl"] = kl
        if kl > config.kl_limit:
            break
    if batches:
        for key in ("loss", "pi_loss", "v_loss", "entropy", "clip_fraction",
                    "grad_norm"):
            metrics[key] /= batches
    return params, opt_state, metrics


@dataclass
class TrainResult:
    params: dict
    curve: list[dict]
    total_steps: int
    stopped_early: bool


def train_loop(envs, graph_adj, gamma: float, config: PpoConfig,
               out_dir: str | None = None,
               initial_params: dict | None = None) -> TrainResult:
    """Drive collect/update rounds until max_steps or a return plateau."""
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    runners = [EnvRunner(env) for env in envs]
    n_features = runners[0].state.shape[1]
    params = initial_params if initial_params is not None else init_params(
        np.random.default_rng(config.seed), n_features=n_features,
        hidden=config.hidden)
    opt_state = AdamState.init(params)

    curve: list[dict] = []
    total = 0
    best = -np.inf
    ema = None
    bad_rounds = 0
    stopped = False
    horizon = getattr(envs[0], "horizon", 1)
    while total < config.max_steps:
        buf = collect(runners, params, graph_adj, config, gamma, rng)
        params, opt_state, metrics = update(params, opt_state, buf,
                                            graph_adj, config, rng)
        total += buf.size
        if buf.episode_returns:
            mean_ret = float(np.mean(buf.episode_returns))
        else:
            mean_ret = float(buf.rewards.mean()) * horizon
        ema = mean_ret if ema is None else (
            config.ema_alpha * mean_ret + (1 - config.ema_alpha) * ema)
        row = {"step": total, "meanReturn": mean_ret, "emaReturn": ema}
        row.update({f"mean{k}": v for k, v in buf.component_means.items()})
        row.update({k: metrics[k] for k in
                    ("mean_kl", "clip_fraction", "entropy", "epochs_run")})
        curve.append(row)
        if metrics["aborted"]:
            stopped = True
            break
        if ema > best + 1e-12:
            best = ema
            bad_rounds = 0
            if out_dir is not None:
                save_checkpoint(os.path.join(out_dir, "best.npz"), params,
                                meta={"steps": total, "emaReturn": ema})
        else:
            bad_rounds += 1
            if bad_rounds >= config.patience:
                stopped = True
                break
    if out_dir is not None:
        save_checkpoint(os.path.join(out_dir, "latest.npz"), params,
                        meta={"steps": total})
        with open(os.path.join(out_dir, "curve.jsonl"), "w") as fh:
            for row in curve:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return TrainResult(params=params, curve=curve, total_steps=total,
                       stopped_early=stopped)


def train(world: World, env_config: EnvConfig, config: PpoConfig,
          out_dir: str | None = None,
          initial_params: dict | None = None) -> TrainResult:
    """Train on one world: distinctly seeded parallel environments."""
    envs = [FloodAdaptEnv(world, replace(env_config, seed=env_config.seed + i))
            for i in range(config.parallel_envs)]
    adj = normalized_adjacency(envs[0].graph)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    return train_loop(envs, adj, env_config.gamma, config, out_dir=out_dir,
                      initial_params=initial_params)
