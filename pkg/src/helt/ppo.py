"""PPO with GAE advantages and an Adam optimizer, all in numpy."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractViolation, NumericError
from .policy import NetSpec, Params, action_logp, backward, forward_batch


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.995
    lam: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 2e-4
    n_steps: int = 100
    batch_size: int = 1024
    minibatch_size: int = 256
    epochs_per_batch: int = 2
    normalize_advantages: bool = True
    max_grad_norm: float | None = 0.5
    hidden: int = 128
    embed_dim: int = 8

    def __post_init__(self) -> None:
        if not 0 < self.gamma <= 1:
            raise ConfigError("learner.gamma", "must be in (0, 1]")
        if not 0 < self.lam <= 1:
            raise ConfigError("learner.lam", "must be in (0, 1]")
        if not 0 < self.clip < 1:
            raise ConfigError("learner.clip", "must be in (0, 1)")
        if self.entropy_coef < 0:
            raise ConfigError("learner.entropy_coef", "must be >= 0")
        if self.value_coef < 0:
            raise ConfigError("learner.value_coef", "must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learner.learning_rate", "must be > 0")
        for name in ("n_steps", "batch_size", "minibatch_size", "epochs_per_batch", "hidden",
                     "embed_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"learner.{name}", "must be >= 1")

    @classmethod
    def full_scale(cls, **overrides) -> "LearnerConfig":
        """Full-scale values: batch 5120 and the rest of the published table."""
        return replace(cls(batch_size=5120, minibatch_size=1024), **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """One rollout fragment from a single match slot."""

    ids: np.ndarray
    attrs: np.ndarray
    masks: list[np.ndarray]
    actions: np.ndarray  # [T, 4]
    old_logp: np.ndarray  # [T, 4] per-head
    rewards: np.ndarray
    values: np.ndarray
    terminals: np.ndarray
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.rewards)

    def check(self, n_steps: int | None = None) -> None:
        t = len(self.rewards)
        for name in ("actions", "old_logp", "values", "terminals"):
            if len(getattr(self, name)) != t:
                raise ContractViolation(f"trajectory field {name} has wrong length")
        if n_steps is not None and t > n_steps:
            raise ContractViolation(f"trajectory longer than n_steps={n_steps}")
        if t and self.terminals[:-1].any():
            raise ContractViolation("terminal flag may only be set on the last step")


def gae(rewards: Sequence[float], values: Sequence[float], terminals: Sequence[bool],
        bootstrap_value: float, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    Past a terminal step the bootstrap value is zero.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    done = np.asarray(terminals, dtype=bool)
    adv = np.zeros_like(r)
    running = 0.0
    next_value = float(bootstrap_value)
    for t in range(len(r) - 1, -1, -1):
        live = 0.0 if done[t] else 1.0
        delta = r[t] + gamma * next_value * live - v[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = v[t]
    return adv, adv + v


@dataclass
class Batch:
    ids: np.ndarray
    attrs: np.ndarray
    masks: list[np.ndarray]
    actions: np.ndarray
    old_logp: np.ndarray  # joint (summed over heads), shape [B]
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(self.ids[idx], self.attrs[idx], [m[idx] for m in self.masks],
                     self.actions[idx], self.old_logp[idx], self.advantages[idx],
                     self.returns[idx])


def build_batch(trajs: Iterable[Trajectory], gamma: float, lam: float) -> Batch:
    trajs = [t for t in trajs if len(t)]
    advs, rets = [], []
    for t in trajs:
        t.check()
        a, r = gae(t.rewards, t.values, t.terminals, t.bootstrap_value, gamma, lam)
        advs.append(a)
        rets.append(r)
    return Batch(
        ids=np.concatenate([t.ids for t in trajs]),
        attrs=np.concatenate([t.attrs for t in trajs]),
        masks=[np.concatenate([t.masks[k] for t in trajs]) for k in range(4)],
        actions=np.concatenate([t.actions for t in trajs]),
        old_logp=np.concatenate([t.old_logp.sum(axis=1) for t in trajs]),
        advantages=np.concatenate(advs),
        returns=np.concatenate(rets),
    )


def normalize(adv: np.ndarray) -> np.ndarray:
    if len(adv) < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_loss(params: Params, spec: NetSpec, batch: Batch, cfg: LearnerConfig,
             terms: Sequence[str] = ("policy", "value", "entropy"),
             ) -> tuple[float, Params, dict]:
    """Clipped surrogate + value regression - entropy bonus, with exact gradients.

    ``batch.advantages`` is used as given; normalize beforehand if wanted.
    The joint ratio is the product of the four per-head ratios.
    """
    n = len(batch)
    out = forward_batch(params, spec, batch.ids, batch.attrs, batch.masks)
    lp_heads = action_logp(out.logp, batch.actions)
    logp = lp_heads.sum(axis=1)
    ratio = np.exp(logp - batch.old_logp)
    adv = batch.advantages
    lo, hi = 1.0 - cfg.clip, 1.0 + cfg.clip
    surr1 = ratio * adv
    surr2 = np.clip(ratio, lo, hi) * adv
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    dlogits = [np.zeros_like(p) for p in out.probs]
    rows = np.arange(n)
    if "policy" in terms:
        # the gradient flows only where the unclipped branch is the active one
        passes = (surr1 <= surr2) | ((ratio >= lo) & (ratio <= hi))
        dlogp = np.where(passes, -adv / n, 0.0) * ratio
        for k, p in enumerate(out.probs):
            g = -p * dlogp[:, None]
            g[rows, batch.actions[:, k]] += dlogp
            dlogits[k] += g

    entropies = []
    for k, (p, lp) in enumerate(zip(out.probs, out.logp)):
        safe = np.where(p > 0, lp, 0.0)
        h = -(p * safe).sum(axis=1)
        entropies.append(h)
        if "entropy" in terms and cfg.entropy_coef:
            dh = -p * (safe + h[:, None])
            dlogits[k] += (-cfg.entropy_coef / n) * dh
    entropy = np.sum(entropies, axis=0)

    err = out.value - batch.returns
    with np.errstate(invalid="ignore", over="ignore"):
        value_loss = np.mean(err * err)
    dvalue = (2.0 * cfg.value_coef / n) * err if "value" in terms else np.zeros(n)

    loss = 0.0
    if "policy" in terms:
        loss += policy_loss
    if "value" in terms:
        loss += cfg.value_coef * value_loss
    if "entropy" in terms:
        loss -= cfg.entropy_coef * float(entropy.mean())

    # non-finite inputs are reported below as a NumericError, not as warnings
    with np.errstate(invalid="ignore", over="ignore"):
        grads = backward(params, spec, out.cache, dlogits, dvalue)
        finite = all(np.isfinite(g).all() for g in grads.values())
    if not np.isfinite(loss) or not finite:
        raise NumericError("non-finite PPO loss or gradient", {
            "policy_loss": float(policy_loss), "value_loss": float(value_loss),
            "max_ratio": float(np.max(ratio)), "max_abs_adv": float(np.max(np.abs(adv))),
            "batch_size": n,
        })
    stats = {
        "loss": float(loss), "policy_loss": float(policy_loss), "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip)),
        "approx_kl": float(np.mean(batch.old_logp - logp)),
    }
    return float(loss), grads, stats


# --- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_init(params: Params) -> AdamState:
    return AdamState({k: np.zeros_like(v) for k, v in params.items()},
                     {k: np.zeros_like(v) for k, v in params.items()}, 0)


def update(params: Params, grads: Params, state: AdamState, learning_rate: float,
           beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
           ) -> tuple[Params, AdamState]:
    """One bias-corrected Adam step; inputs are left untouched."""
    if set(grads) != set(params):
        raise ContractViolation(f"gradient keys {sorted(grads)} != parameter keys {sorted(params)}")
    t = state.t + 1
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ContractViolation(f"gradient shape {g.shape} != parameter shape {p.shape} for {k}")
        m = beta1 * state.m[k] + (1 - beta1) * g
        v = beta2 * state.v[k] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new_p[k] = p - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v, t)


def clip_grad_norm(grads: Params, max_norm: float | None) -> tuple[Params, float]:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is None or norm <= max_norm:
        return grads, norm
    scale = max_norm / (norm + 1e-12)
    return {k: g * scale for k, g in grads.items()}, norm


class Learner:
    """Owns one parameter set and its optimizer state; the single writer."""

    def __init__(self, spec: NetSpec, params: Params, cfg: LearnerConfig,
                 rng: np.random.Generator) -> None:
        self.spec = spec
        self.params = params
        self.cfg = cfg
        self.rng = rng
        self.opt = adam_init(params)
        self.updates = 0

    def reset(self, params: Params) -> None:
        self.params = {k: np.array(v, copy=True) for k, v in params.items()}
        self.opt = adam_init(self.params)

    def train(self, trajs: Sequence[Trajectory]) -> dict:
        batch = build_batch(trajs, self.cfg.gamma, self.cfg.lam)
        n = len(batch)
        mb = min(self.cfg.minibatch_size, n)
        stats: list[dict] = []
        for _ in range(self.cfg.epochs_per_batch):
            order = self.rng.permutation(n)
            for start in range(0, n, mb):
                part = batch.take(order[start:start + mb])
                if self.cfg.normalize_advantages:
                    part.advantages = normalize(part.advantages)
                _, grads, s = ppo_loss(self.params, self.spec, part, self.cfg)
                grads, s["grad_norm"] = clip_grad_norm(grads, self.cfg.max_grad_norm)
                self.params, self.opt = update(self.params, grads, self.opt,
                                               self.cfg.learning_rate)
                stats.append(s)
        self.updates += 1
        summary = {k: float(np.mean([s[k] for s in stats])) for k in stats[0]}
        summary["samples"] = n
        return summary

