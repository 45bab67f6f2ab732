"""Graph-convolutional policy/value network in plain numpy.

Two graph-convolution layers with symmetric-normalized adjacency (self loops
included), a per-zone action head, and a mean-pooled value head. The policy
factorizes over zones: each zone draws independently from its own masked
categorical, and the joint log-probability is the sum of zone log-probs.
Shapes never depend on zone count, so one parameter set serves any world.

Gradients of the clipped-surrogate loss are computed by hand (backprop
through the two convolutions and both heads) and are checked against central
finite differences in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .adaptation import N_ACTIONS
from .env import N_FEATURES, ZoneGraph
from .errors import NumericalError, ValidationError

HIDDEN = 64
CHECKPOINT_VERSION = 1

# input features are DKK-scale costs followed by measure effects; these fixed
# diagonal scales bring both groups to order one before the first convolution
COST_SCALE = 1e-6
EFFECT_SCALE = 0.1

TRAINABLE = ("W1", "b1", "W2", "b2", "Wa", "ba", "Wv", "bv")


def default_input_scale(n_features: int = N_FEATURES) -> np.ndarray:
    scale = np.full(n_features, EFFECT_SCALE)
    scale[:3] = COST_SCALE
    return scale


def init_params(
    rng: np.random.Generator,
    n_features: int = N_FEATURES,
    hidden: int = HIDDEN,
    n_actions: int = N_ACTIONS,
    input_scale: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """He-scaled random layers; the action head starts small so early
    distributions stay near uniform over unmasked actions."""

    def he(n_in, n_out, gain=1.0):
        return rng.normal(0.0, gain * np.sqrt(2.0 / n_in), size=(n_in, n_out))

    scale = default_input_scale(n_features) if input_scale is None else \
        np.asarray(input_scale, dtype=np.float64)
    if scale.shape != (n_features,) or np.any(scale <= 0):
        raise ValidationError("input_scale must be positive with one entry per feature")
    return {
        "W1": he(n_features, hidden),
        "b1": np.zeros(hidden),
        "W2": he(hidden, hidden),
        "b2": np.zeros(hidden),
        "Wa": he(hidden, n_actions, gain=0.01),
        "ba": np.zeros(n_actions),
        "Wv": he(hidden, 1, gain=0.1),
        "bv": np.zeros(1),
        "input_scale": scale,
    }


def normalized_adjacency(graph: ZoneGraph) -> np.ndarray:
    """Symmetric normalization D^(-1/2) (A + I) D^(-1/2)."""
    a = graph.adjacency_matrix() + np.eye(graph.n_zones)
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass(frozen=True)
class ActionDistribution:
    """Masked per-zone categoricals; probs[z, a] = 0 wherever masked."""

    probs: np.ndarray

    def __post_init__(self):
        sums = self.probs.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValidationError("zone probabilities must sum to 1")

    @property
    def n_zones(self) -> int:
        return self.probs.shape[0]

    def log_prob(self, actions: np.ndarray) -> float:
        p = self.probs[np.arange(self.n_zones), np.asarray(actions)]
        if np.any(p <= 0):
            raise ValidationError("log_prob of a masked (zero-probability) action")
        return float(np.log(p).sum())

    def entropy(self) -> float:
        p = self.probs
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p > 0, p * np.log(p), 0.0)
        return float(-t.sum())


def _forward_core(params, adj, states, masks):
    """Batched trunk; returns per-layer caches needed for backprop."""
    x = states * params["input_scale"]
    m1 = adj @ x
    p1 = m1 @ params["W1"] + params["b1"]
    h1 = np.maximum(p1, 0.0)
    m2 = adj @ h1
    p2 = m2 @ params["W2"] + params["b2"]
    h2 = np.maximum(p2, 0.0)
    logits = h2 @ params["Wa"] + params["ba"]
    logits = np.where(masks, logits, -np.inf)
    shift = logits.max(axis=-1, keepdims=True)
    expl = np.exp(logits - shift)
    probs = expl / expl.sum(axis=-1, keepdims=True)
    pooled = h2.mean(axis=-2)
    values = (pooled @ params["Wv"] + params["bv"])[..., 0]
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(probs)):
        raise NumericalError("non-finite activations in policy forward pass")
    cache = {"x": x, "m1": m1, "p1": p1, "h1": h1, "m2": m2, "p2": p2,
             "h2": h2, "probs": probs, "pooled": pooled}
    return probs, values, cache


def forward_batch(params, adj, states, masks):
    """(B, n, F) states -> probs (B, n, A) and values (B,)."""
    states = np.asarray(states, dtype=np.float64)
    masks = np.asarray(masks, dtype=bool)
    if not masks.any(axis=-1).all():
        raise ValidationError("every zone needs at least one unmasked action")
    probs, values, _ = _forward_core(params, adj, states, masks)
    return probs, values


def forward(params, adj, state, masks) -> tuple[ActionDistribution, float]:
    probs, values = forward_batch(params, adj, state[None], masks[None])
    return ActionDistribution(probs[0]), float(values[0])


def sample(dist: ActionDistribution, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """One independent categorical draw per zone; returns the joint log-prob."""
    p = dist.probs
    cum = np.cumsum(p, axis=-1)
    u = rng.random(p.shape[0])
    actions = (u[:, None] >= cum).sum(axis=-1)
    actions = np.minimum(actions, p.shape[1] - 1).astype(np.int64)
    return actions, dist.log_prob(actions)


def argmax_actions(dist: ActionDistribution) -> np.ndarray:
    return dist.probs.argmax(axis=-1).astype(np.int64)


def _log_probs_of(probs, actions):
    """Joint log-prob per batch row under factorized categoricals."""
    b, n, _ = probs.shape
    chosen = probs[np.arange(b)[:, None], np.arange(n)[None, :], actions]
    if np.any(chosen <= 0):
        raise ValidationError("batch contains an action its mask forbids")
    return np.log(chosen).sum(axis=1)


def _entropies_of(probs):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -t.sum(axis=(1, 2))


def loss_and_gradients(
    params: dict[str, np.ndarray],
    adj: np.ndarray,
    batch: dict[str, np.ndarray],
    clip: float = 0.2,
    entropy_coef: float = 0.01,
    value_coef: float = 0.5,
):
    """Clipped-surrogate PPO loss and exact parameter gradients.

    batch needs: states (B,n,F), masks (B,n,A), actions (B,n),
    advantages (B,), old_log_probs (B,), returns (B,).
    Returns (loss, grads over TRAINABLE, metrics).
    """
    states = np.asarray(batch["states"], dtype=np.float64)
    masks = np.asarray(batch["masks"], dtype=bool)
    actions = np.asarray(batch["actions"], dtype=np.int64)
    adv = np.asarray(batch["advantages"], dtype=np.float64)
    old_lp = np.asarray(batch["old_log_probs"], dtype=np.float64)
    rets = np.asarray(batch["returns"], dtype=np.float64)
    b, n, _ = states.shape

    probs, values, cache = _forward_core(params, adj, states, masks)
    lp = _log_probs_of(probs, actions)
    ent = _entropies_of(probs)

    ratio = np.exp(lp - old_lp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    surrogate = np.minimum(unclipped, clipped)
    use_unclipped = unclipped <= clipped

    v_err = values - rets
    pi_loss = -float(surrogate.mean())
    ent_loss = -entropy_coef * float(ent.mean())
    v_loss = value_coef * 0.5 * float((v_err ** 2).mean())
    loss = pi_loss + ent_loss + v_loss
    if not np.isfinite(loss):
        raise NumericalError("non-finite PPO loss")

    # d loss / d joint log-prob, then spread to the chosen logits
    dlp = -(ratio * adv * use_unclipped) / b
    onehot = np.zeros_like(probs)
    onehot[np.arange(b)[:, None], np.arange(n)[None, :], actions] = 1.0
    dlogits = dlp[:, None, None] * (onehot - probs)

    # entropy term: dH/dl_j = -p_j (log p_j + H_zone); the loss carries -coef*H
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0, np.log(probs), 0.0)
    h_zone = -(np.where(probs > 0, probs * logp, 0.0)).sum(axis=-1, keepdims=True)
    dlogits += (entropy_coef / b) * probs * (logp + h_zone)

    dvalues = value_coef * v_err / b

    grads = {}
    h2, m2, m1 = cache["h2"], cache["m2"], cache["m1"]
    grads["Wa"] = np.einsum("bnh,bna->ha", h2, dlogits)
    grads["ba"] = dlogits.sum(axis=(0, 1))
    grads["Wv"] = (cache["pooled"] * dvalues[:, None]).sum(axis=0)[:, None]
    grads["bv"] = np.array([dvalues.sum()])
    dh2 = dlogits @ params["Wa"].T
    dh2 += (dvalues[:, None, None] * params["Wv"].T[None]) / n
    dp2 = dh2 * (cache["p2"] > 0)
    grads["W2"] = np.einsum("bnh,bng->hg", m2, dp2)
    grads["b2"] = dp2.sum(axis=(0, 1))
    dm2 = dp2 @ params["W2"].T
    dh1 = adj @ dm2
    dp1 = dh1 * (cache["p1"] > 0)
    grads["W1"] = np.einsum("bnf,bnh->fh", m1, dp1)
    grads["b1"] = dp1.sum(axis=(0, 1))

    kl = float(np.mean(old_lp - lp))
    metrics = {
        "loss": loss,
        "pi_loss": pi_loss,
        "v_loss": v_loss,
        "entropy": float(ent.mean()),
        "approx_kl": kl,
        "clip_fraction": float(np.mean(~use_unclipped)),
    }
    return loss, grads, metrics


def exact_kl(old_probs: np.ndarray, new_probs: np.ndarray) -> float:
    """Mean over the batch of the joint KL(old || new), zones summed."""
    old = np.asarray(old_probs)
    new = np.asarray(new_probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(old > 0, old * (np.log(old) - np.log(np.maximum(new, 1e-300))), 0.0)
    return float(t.sum(axis=(1, 2)).mean())


def save_checkpoint(path: str, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Versioned npz with named little-endian arrays plus a JSON meta blob."""
    arrays = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in params.items()}
    header = {"version": CHECKPOINT_VERSION, "meta": meta or {}}
    arrays["__header__"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8).copy()
    np.savez(path, **arrays)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as data:
        if "__header__" not in data:
            raise ValidationError(f"{path}: not a policy checkpoint")
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(
                f"{path}: unsupported checkpoint version {header.get('version')!r}")
        params = {k: np.array(data[k], dtype=np.float64)
                  for k in data.files if k != "__header__"}
    for name in TRAINABLE + ("input_scale",):
        if name not in params:
            raise ValidationError(f"{path}: checkpoint missing array {name!r}")
    return params, header.get("meta", {})
