"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def naive_gae(rewards, values, terminals, bootstrap, gamma, lam):
    """Double loop over sum_k (gamma*lam)^k delta_{t+k}, stopping after a terminal."""
    n = len(rewards)
    nxt = list(values[1:]) + [bootstrap]
    deltas = []
    for t in range(n):
        v_next = 0.0 if terminals[t] else nxt[t]
        deltas.append(rewards[t] + gamma * v_next - values[t])
    adv = []
    for t in range(n):
        total, coef = 0.0, 1.0
        for k in range(t, n):
            total += coef * deltas[k]
            if terminals[k]:
                break
            coef *= gamma * lam
        adv.append(total)
    return np.array(adv)


def reference_forward(params, spec, ids, attrs, masks):
    """Row-by-row forward pass written with plain Python loops where practical."""
    from helt.policy import HEAD_NAMES

    out_probs = [[] for _ in HEAD_NAMES]
    values = []
    e = spec.embed_dim
    for r in range(len(attrs)):
        x = []
        for k, table in enumerate(spec.id_tables):
            x.extend(params[f"emb_{table}"][ids[r, k]])
        x.extend(attrs[r])
        x = np.array(x)
        h1 = np.tanh(x @ params["w1"] + params["b1"])
        h2 = np.tanh(h1 @ params["w2"] + params["b2"])
        for k, name in enumerate(HEAD_NAMES):
            z = h2 @ params[f"w_{name}"] + params[f"b_{name}"]
            legal = [i for i in range(len(z)) if masks[k][r, i]]
            m = max(z[i] for i in legal)
            ex = {i: math.exp(z[i] - m) for i in legal}
            s = sum(ex.values())
            out_probs[k].append([ex.get(i, 0.0) / s for i in range(len(z))])
        values.append(float(h2 @ params["w_v"][:, 0] + params["b_v"][0]))
    assert e > 0
    return [np.array(p) for p in out_probs], np.array(values)


def finite_difference(f, params, key, index, eps=1e-6):
    p_plus = {k: v.copy() for k, v in params.items()}
    p_minus = {k: v.copy() for k, v in params.items()}
    p_plus[key][index] += eps
    p_minus[key][index] -= eps
    return (f(p_plus) - f(p_minus)) / (2 * eps)


def random_batch(spec, params, rng, n=16, ratio_noise=0.3):
    """A synthetic PPO batch with random legal actions and perturbed old log-probs."""
    from helt.encoders import ATTR_DIM
    from helt.game import HEAD_SIZES
    from helt.policy import action_logp, forward_batch
    from helt.ppo import Batch

    sizes = {"char": spec.table.n_chars, "skill": spec.table.n_skills}
    ids = np.stack([rng.integers(0, sizes[t], n) for t in spec.id_tables], axis=1) \
        if spec.id_tables else np.zeros((n, 0), dtype=np.int64)
    attrs = rng.uniform(-1, 1, (n, ATTR_DIM))
    masks = []
    for size in HEAD_SIZES:
        m = rng.random((n, size)) < 0.6
        m[np.arange(n), rng.integers(0, size, n)] = True
        masks.append(m)
    actions = np.stack([[rng.choice(np.flatnonzero(m[r])) for r in range(n)] for m in masks],
                       axis=1)
    out = forward_batch(params, spec, ids, attrs, masks)
    logp = action_logp(out.logp, actions).sum(axis=1)
    return Batch(ids, attrs, masks, actions, logp + rng.normal(0, ratio_noise, n),
                 rng.normal(0, 1, n), rng.normal(0, 1, n))


def grad_check(spec, params, batch, cfg, terms, rng, per_key=6, eps=1e-6):
    """Worst relative error ||analytic - numeric|| / (||analytic|| + ||numeric||) over keys."""
    from helt.ppo import ppo_loss

    _, grads, _ = ppo_loss(params, spec, batch, cfg, terms)
    loss = lambda p: ppo_loss(p, spec, batch, cfg, terms)[0]  # noqa: E731
    worst = 0.0
    for key, g in grads.items():
        flat = rng.choice(g.size, size=min(per_key, g.size), replace=False)
        # include the largest-magnitude entry so the check is never vacuous
        flat = np.unique(np.append(flat, np.argmax(np.abs(g))))
        idx = [np.unravel_index(i, g.shape) for i in flat]
        a = np.array([g[i] for i in idx])
        num = np.array([finite_difference(loss, params, key, i, eps) for i in idx])
        denom = np.linalg.norm(a) + np.linalg.norm(num)
        if denom > 1e-10:
            worst = max(worst, float(np.linalg.norm(a - num) / denom))
    return worst
