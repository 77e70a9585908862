"""Training for the learned guidance: DQN and PPO on MDPs derived from models.

Losses return analytic gradients that are the exact derivatives of the
returned scalar (verified against central finite differences in the tests),
so the PPO advantage term keeps its full gradient path through the critic
and the batch normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import domains
from .mdp import Mdp, build_mdp
from .model import Model
from .nn import (
    AdamState, Grads, NetworkParams, adam_step, backward, forward,
    forward_cached, init_network, masked_softmax,
)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries where it happened."""

    def __init__(self, message: str, episode: int | None = None, loss: float | None = None):
        super().__init__(message)
        self.episode = episode
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    episodes: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    gamma: float = 1.0
    temperature: float = 2.0
    entropy_coef: float = 1e-3
    clip: float = 0.1
    epochs: int = 3
    beta: float | None = None
    buffer_capacity: int = 20000
    updates_per_episode: int = 1
    target_sync: int = 10
    embed_dim: int = 16
    hidden_dim: int = 32
    encoder_layers: int = 2
    head_layers: int = 2

    def __post_init__(self) -> None:
        for name in ("episodes", "batch_size", "buffer_capacity", "updates_per_episode",
                     "target_sync", "embed_dim", "hidden_dim", "encoder_layers", "head_layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or self.temperature <= 0 or self.entropy_coef < 0 or self.epochs <= 0:
            raise ValueError("lr, temperature and epochs must be positive; entropy_coef nonnegative")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must be in (0, 1)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")


# Published per-domain settings: (batch for n<=35, batch above, lr, softmax
# temperature for DQN, PPO epochs). Reward scales live in mdp.REWARD_SCALE.
_TABLE = {
    ("tsp", "dqn"): (128, 256, 1e-4, (10.0, 2.0), 3),
    ("tsp", "ppo"): (256, 256, 1e-4, None, 3),
    ("tsptw", "dqn"): (32, 64, 1e-4, (10.0, 10.0), 3),
    ("tsptw", "ppo"): (128, 64, 1e-4, None, 3),
    ("knapsack", "dqn"): (128, 128, 1e-4, (2.0, 2.0), 4),
    ("knapsack", "ppo"): (128, 128, 1e-3, None, 4),
    ("portfolio", "dqn"): (64, 128, 1e-5, (10.0, 10.0), 4),
    ("portfolio", "ppo"): (128, 128, 1e-5, None, 4),
}


def default_config(domain_tag: str, algo: str, n: int, **overrides) -> TrainConfig:
    """Published hyperparameters for a domain/algorithm pair, sized by n."""
    try:
        small_batch, large_batch, lr, temps, epochs = _TABLE[(domain_tag, algo)]
    except KeyError:
        raise ValueError(f"no published defaults for {domain_tag!r}/{algo!r}") from None
    small = n <= 35
    cfg = dict(
        batch_size=small_batch if small else large_batch,
        lr=lr,
        epochs=epochs,
        entropy_coef=1e-3,
        clip=0.1,
        gamma=1.0,
    )
    if temps is not None:
        cfg["temperature"] = temps[0] if small else temps[1]
    cfg.update(overrides)
    return TrainConfig(**cfg)


class ReplayBuffer:
    """Ring buffer with seeded uniform sampling (without replacement when the
    buffer is large enough)."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list = []
        self._next = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._items)

    def add(self, item) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample(self, k: int) -> list:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = self._rng.choice(len(self._items), size=k, replace=len(self._items) < k)
        return [self._items[i] for i in idx]


# -- batches -----------------------------------------------------------------


@dataclass
class DqnBatch:
    feats: np.ndarray        # (B, n, d)
    actions: np.ndarray      # (B,)
    rewards: np.ndarray      # (B,)
    next_feats: np.ndarray   # (B, n, d)
    next_masks: np.ndarray   # (B, A)
    terminals: np.ndarray    # (B,) bool

    @staticmethod
    def from_samples(samples: list) -> "DqnBatch":
        f, a, r, nf, nm, t = zip(*samples)
        return DqnBatch(np.stack(f), np.asarray(a), np.asarray(r, dtype=float),
                        np.stack(nf), np.stack(nm), np.asarray(t, dtype=bool))


@dataclass
class PpoBatch:
    feats: np.ndarray        # (B, n, d)
    actions: np.ndarray      # (B,)
    old_logp: np.ndarray     # (B,)
    returns: np.ndarray      # (B,)
    masks: np.ndarray        # (B, A)


# -- losses ------------------------------------------------------------------


def dqn_loss(params: NetworkParams, target_params: NetworkParams,
             batch: DqnBatch, gamma: float) -> tuple[float, Grads]:
    """Mean squared TD error with a frozen target network.

    y = r + gamma * max over unmasked actions of the target Q at the next
    state, or y = r at terminal transitions.
    """
    q, cache = forward_cached(params, batch.feats)
    b = np.arange(len(batch.actions))
    qa = q[b, batch.actions]
    q_next, _ = forward_cached(target_params, batch.next_feats)
    masked = np.where(batch.next_masks, q_next, -np.inf)
    best_next = masked.max(axis=1)
    y = np.where(batch.terminals, batch.rewards, batch.rewards + gamma * best_next)
    diff = qa - y
    loss = float((diff * diff).mean())
    dq = np.zeros_like(q)
    dq[b, batch.actions] = 2.0 * diff / len(diff)
    return loss, backward(params, cache, dq)


def _normalize_advantages(x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batch-normalize; returns (advantages, context for the backward pass).

    A zero-variance batch skips the division (the normalized value would be
    all zeros with an ill-conditioned gradient), leaving centered values.
    """
    mu = x.mean()
    centered = x - mu
    var = float((centered * centered).mean())
    s = math.sqrt(var)
    if s < 1e-8:
        return centered, {"centered_only": True}
    d = s + 1e-8
    return centered / d, {"centered_only": False, "s": s, "d": d, "centered": centered}


def _normalize_backward(g: np.ndarray, ctx: dict) -> np.ndarray:
    """dL/dx given dL/dA for _normalize_advantages."""
    if ctx["centered_only"]:
        return g - g.mean()
    s, d, centered = ctx["s"], ctx["d"], ctx["centered"]
    return (g - g.mean()) / d - centered * float((g * centered).mean()) / (s * d * d)


def ppo_loss(actor: NetworkParams, critic: NetworkParams, batch: PpoBatch,
             clip: float, entropy_coef: float) -> tuple[float, Grads, Grads]:
    """Clipped-surrogate actor loss with a critic baseline and entropy bonus.

    loss = -mean(min(ratio * A, clip(ratio) * A)) - entropy_coef * mean(H)
         + mean((return - V)^2)

    where A is the batch-normalized (return - V). The returned gradients are
    the exact derivatives of this scalar for both networks, including the
    advantage path into the critic.
    """
    bsz = len(batch.actions)
    b = np.arange(bsz)
    logits, actor_cache = forward_cached(actor, batch.feats)
    probs = masked_softmax(logits, batch.masks)
    pa = probs[b, batch.actions]
    logp = np.log(pa)
    ratio = np.exp(logp - batch.old_logp)

    values_out, critic_cache = forward_cached(critic, batch.feats)
    v = values_out[..., 0]
    x = batch.returns - v
    adv, norm_ctx = _normalize_advantages(x)

    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    unclipped_term = ratio * adv
    clipped_term = clipped * adv
    take_unclipped = unclipped_term <= clipped_term
    surrogate = np.where(take_unclipped, unclipped_term, clipped_term)

    safe_logp = np.where(batch.masks, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    entropies = -(probs * safe_logp).sum(axis=1)

    value_err = batch.returns - v
    loss = float(-surrogate.mean() - entropy_coef * entropies.mean()
                 + (value_err * value_err).mean())

    # surrogate backward
    coef = np.where(take_unclipped, ratio, clipped)
    d_adv = -coef / bsz
    in_band = (ratio > 1.0 - clip) & (ratio < 1.0 + clip)
    d_ratio = -(np.where(take_unclipped, adv, np.where(in_band, adv, 0.0))) / bsz
    d_logp = d_ratio * ratio
    d_pa = d_logp / pa

    # entropy backward: dH/dp_j = -(log p_j + 1) on unmasked entries
    d_probs = np.where(batch.masks & (probs > 0),
                       entropy_coef / bsz * (safe_logp + 1.0), 0.0)
    d_probs[b, batch.actions] += d_pa
    inner = (d_probs * probs).sum(axis=1, keepdims=True)
    d_logits = probs * (d_probs - inner)
    actor_grads = backward(actor, actor_cache, d_logits)

    # critic backward: advantage path plus the value error term
    dx = _normalize_backward(d_adv, norm_ctx)
    dv = -dx - 2.0 * value_err / bsz
    critic_grads = backward(critic, critic_cache, dv[:, None])
    return loss, actor_grads, critic_grads


# -- rollouts ----------------------------------------------------------------


def make_network(domain_tag: str, kind: str, cfg: TrainConfig, n_actions: int, seed: int) -> NetworkParams:
    arity = "element" if domain_tag in ("tsp", "tsptw") and kind != "critic" else "global"
    out_dim = 1 if kind == "critic" else (1 if arity == "element" else n_actions)
    return init_network(domain_tag, kind, arity, domains.n_features(domain_tag),
                        out_dim=out_dim, embed_dim=cfg.embed_dim,
                        encoder_layers=cfg.encoder_layers, hidden_dim=cfg.hidden_dim,
                        head_layers=cfg.head_layers, seed=seed)


def softmax_sample(rng: np.random.Generator, scores: np.ndarray, mask: np.ndarray,
                   temperature: float) -> int:
    probs = masked_softmax(scores / temperature, mask)
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def greedy_sequence(mdp: Mdp, select) -> tuple[list[str], float]:
    """Roll an episode with `select(state, mask) -> action`; returns the
    transition ids and the undiscounted episode return."""
    state = mdp.initial_state
    tids: list[str] = []
    total = 0.0
    while not mdp.terminal(state):
        mask = mdp.mask(state)
        action = select(state, mask)
        state, r, _, _ = mdp.step(state, action)
        tids.append(mdp.tid_of(action))
        total += r
    return tids, total


def q_greedy_select(mdp: Mdp, params: NetworkParams):
    from .nn import forward

    def select(state, mask):
        q = forward(params, mdp.features(state), mask)
        return int(np.where(mask, q, -np.inf).argmax())

    return select


def policy_greedy_select(mdp: Mdp, params: NetworkParams):
    from .nn import forward

    def select(state, mask):
        probs = forward(params, mdp.features(state), mask)
        return int(probs.argmax())

    return select


@dataclass
class TrainResult:
    params: NetworkParams
    episode_returns: list[float]
    losses: list[float]
    critic: NetworkParams | None = None


def _check_finite(loss: float, episode: int) -> None:
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss} at episode {episode}",
                              episode=episode, loss=loss)


def train_dqn(domain_tag: str, instance_generator, config: TrainConfig) -> TrainResult:
    """Episode loop: softmax-over-Q exploration, replay buffer, batched TD
    updates after each episode, periodic target sync."""
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    net_seed = int(seeds[0].generate_state(1)[0])
    env_rng = np.random.default_rng(seeds[1])
    buffer = ReplayBuffer(config.buffer_capacity, seed=int(seeds[2].generate_state(1)[0]))

    mdp = None
    last_instance = None
    params = None
    target = None
    adam = None
    returns_log: list[float] = []
    losses: list[float] = []

    for episode in range(config.episodes):
        instance = instance_generator(episode)
        if instance is not last_instance:
            model = domains.build_model(domain_tag, instance)
            mdp = build_mdp(model, domain_tag, beta=config.beta)
            last_instance = instance
        if params is None:
            params = make_network(domain_tag, "q", config, mdp.n_actions, net_seed)
            target = params.copy()
            adam = AdamState.init(params)
        state = mdp.initial_state
        ep_return = 0.0
        while not mdp.terminal(state):
            feats = mdp.features(state)
            mask = mdp.mask(state)
            q = forward(params, feats)
            action = softmax_sample(env_rng, q, mask, config.temperature)
            nxt, reward, terminal, next_mask = mdp.step(state, action)
            buffer.add((feats, action, reward, mdp.features(nxt), next_mask, terminal))
            ep_return += reward
            state = nxt
        returns_log.append(ep_return)
        if len(buffer) >= config.batch_size:
            for _ in range(config.updates_per_episode):
                batch = DqnBatch.from_samples(buffer.sample(config.batch_size))
                loss, grads = dqn_loss(params, target, batch, config.gamma)
                _check_finite(loss, episode)
                losses.append(loss)
                adam_step(params, grads, adam, config.lr)
        if (episode + 1) % config.target_sync == 0:
            target = params.copy()
    if params is None:
        raise ValueError("training ran zero episodes")
    return TrainResult(params=params, episode_returns=returns_log, losses=losses)


def train_ppo(domain_tag: str, instance_generator, config: TrainConfig) -> TrainResult:
    """On-policy loop: collect whole episodes until the batch is full, compute
    Monte-Carlo returns, then several epochs of clipped-surrogate updates."""
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    actor_seed = int(seeds[0].generate_state(1)[0])
    critic_seed = int(seeds[1].generate_state(1)[0])
    env_rng = np.random.default_rng(seeds[2])

    mdp = None
    last_instance = None
    actor = None
    critic = None
    adam_actor = None
    adam_critic = None
    returns_log: list[float] = []
    losses: list[float] = []

    pending: list[tuple] = []

    def flush() -> None:
        feats, actions, old_logp, rets, masks = zip(*pending)
        batch = PpoBatch(np.stack(feats), np.asarray(actions), np.asarray(old_logp),
                         np.asarray(rets), np.stack(masks))
        for _ in range(config.epochs):
            loss, a_grads, c_grads = ppo_loss(actor, critic, batch, config.clip, config.entropy_coef)
            _check_finite(loss, episode)
            losses.append(loss)
            adam_step(actor, a_grads, adam_actor, config.lr)
            adam_step(critic, c_grads, adam_critic, config.lr)
        pending.clear()

    for episode in range(config.episodes):
        instance = instance_generator(episode)
        if instance is not last_instance:
            model = domains.build_model(domain_tag, instance)
            mdp = build_mdp(model, domain_tag, beta=config.beta)
            last_instance = instance
        if actor is None:
            actor = make_network(domain_tag, "actor", config, mdp.n_actions, actor_seed)
            critic = make_network(domain_tag, "critic", config, mdp.n_actions, critic_seed)
            adam_actor = AdamState.init(actor)
            adam_critic = AdamState.init(critic)
        state = mdp.initial_state
        steps: list[tuple] = []
        rewards: list[float] = []
        while not mdp.terminal(state):
            feats = mdp.features(state)
            mask = mdp.mask(state)
            probs = forward(actor, feats, mask)
            action = int(env_rng.choice(len(probs), p=probs / probs.sum()))
            nxt, reward, _, _ = mdp.step(state, action)
            steps.append((feats, action, float(np.log(probs[action])), mask))
            rewards.append(reward)
            state = nxt
        returns_log.append(float(sum(rewards)))
        acc = 0.0
        rets = []
        for r in reversed(rewards):
            acc = r + config.gamma * acc
            rets.append(acc)
        rets.reverse()
        for (feats, action, lp, mask), ret in zip(steps, rets):
            pending.append((feats, action, lp, ret, mask))
        if len(pending) >= config.batch_size:
            flush()
    if actor is None:
        raise ValueError("training ran zero episodes")
    if pending:
        episode = config.episodes - 1
        flush()
    return TrainResult(params=actor, episode_returns=returns_log, losses=losses, critic=critic)


def fixed_instance(instance):
    """Instance generator that always yields the same instance."""
    return lambda episode: instance


def sampled_instances(domain_tag: str, n: int, seed: int):
    """Instance generator drawing a fresh seeded instance per episode."""
    base = np.random.SeedSequence(seed)

    def gen(episode: int):
        child = int(np.random.SeedSequence((seed, episode)).generate_state(1)[0])
        return domains.generate_instance(domain_tag, n, child)

    return gen
