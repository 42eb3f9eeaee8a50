"""Multi-head policy/value network in plain numpy.

Ids are looked up in embedding tables and concatenated with the numeric
attributes; two tanh layers form a shared trunk feeding four masked action
heads (ud, lr, skill, direction) and a scalar value head.  Parameters live in
a flat ``dict[str, ndarray]`` so they are trivial to copy, freeze and save.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .encoders import ATTR_DIM, ID_LAYOUT, CharacterTable, EncoderMode, Observation, n_ids
from .errors import ContractViolation
from .game import HEAD_SIZES, ActionMask, ActionTriple

HEAD_NAMES = ("ud", "lr", "skill", "direction")
Params = dict  # name -> float64 ndarray


@dataclass(frozen=True)
class NetSpec:
    mode: EncoderMode
    table: CharacterTable
    hidden: int = 128
    embed_dim: int = 8

    @property
    def id_tables(self) -> tuple[str, ...]:
        return tuple(t for t, _ in ID_LAYOUT[self.mode])

    @property
    def input_dim(self) -> int:
        return n_ids(self.mode) * self.embed_dim + ATTR_DIM

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "char_ids": list(self.table.char_ids),
                "hidden": self.hidden, "embed_dim": self.embed_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        return cls(EncoderMode(d["mode"]), CharacterTable.from_ids(d["char_ids"]),
                   int(d["hidden"]), int(d["embed_dim"]))


def init_params(spec: NetSpec, rng: np.random.Generator) -> Params:
    h, d = spec.hidden, spec.input_dim
    p: Params = {}
    if n_ids(spec.mode):
        p["emb_char"] = rng.normal(0.0, 1.0, (spec.table.n_chars, spec.embed_dim))
        p["emb_skill"] = rng.normal(0.0, 1.0, (spec.table.n_skills, spec.embed_dim))
    p["w1"] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, h))
    p["b1"] = np.zeros(h)
    p["w2"] = rng.normal(0.0, 1.0 / np.sqrt(h), (h, h))
    p["b2"] = np.zeros(h)
    for name, size in zip(HEAD_NAMES, HEAD_SIZES):
        # small head weights start every head close to uniform
        p[f"w_{name}"] = rng.normal(0.0, 0.01, (h, size))
        p[f"b_{name}"] = np.zeros(size)
    p["w_v"] = rng.normal(0.0, 1.0 / np.sqrt(h), (h, 1))
    p["b_v"] = np.zeros(1)
    return p


class Forward(NamedTuple):
    probs: list[np.ndarray]
    logp: list[np.ndarray]  # log-probabilities, -inf on masked entries
    value: np.ndarray
    cache: dict


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not mask.any(axis=-1).all():
        raise ContractViolation("every head needs at least one legal entry")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    total = e.sum(axis=-1, keepdims=True)
    probs = e / total
    logp = np.where(mask, z - np.log(total), -np.inf)
    return probs, logp


def _trunk_input(params: Params, spec: NetSpec, ids: np.ndarray, attrs: np.ndarray) -> np.ndarray:
    parts = [params[f"emb_{t}"][ids[:, k]] for k, t in enumerate(spec.id_tables)]
    parts.append(attrs)
    return np.concatenate(parts, axis=1)


def forward_batch(params: Params, spec: NetSpec, ids: np.ndarray, attrs: np.ndarray,
                  masks: Sequence[np.ndarray]) -> Forward:
    x = _trunk_input(params, spec, ids, attrs)
    h1 = np.tanh(x @ params["w1"] + params["b1"])
    h2 = np.tanh(h1 @ params["w2"] + params["b2"])
    probs, logps = [], []
    for name, mask in zip(HEAD_NAMES, masks):
        logits = h2 @ params[f"w_{name}"] + params[f"b_{name}"]
        p, lp = masked_softmax(logits, np.asarray(mask, dtype=bool))
        probs.append(p)
        logps.append(lp)
    value = (h2 @ params["w_v"] + params["b_v"])[:, 0]
    return Forward(probs, logps, value, {"x": x, "h1": h1, "h2": h2, "ids": ids})


def forward(params: Params, spec: NetSpec, obs: Observation, masks: ActionMask) -> Forward:
    """Single-observation convenience wrapper around ``forward_batch``."""
    return forward_batch(params, spec, obs.ids[None, :], obs.attrs[None, :],
                         [np.asarray(m)[None, :] for m in masks])


def backward(params: Params, spec: NetSpec, cache: dict, dlogits: Sequence[np.ndarray],
             dvalue: np.ndarray) -> Params:
    """Gradients of a scalar loss given its derivatives w.r.t. head logits and values."""
    x, h1, h2, ids = cache["x"], cache["h1"], cache["h2"], cache["ids"]
    g: Params = {}
    dh2 = np.zeros_like(h2)
    for name, dz in zip(HEAD_NAMES, dlogits):
        g[f"w_{name}"] = h2.T @ dz
        g[f"b_{name}"] = dz.sum(axis=0)
        dh2 += dz @ params[f"w_{name}"].T
    dv = dvalue[:, None]
    g["w_v"] = h2.T @ dv
    g["b_v"] = dv.sum(axis=0)
    dh2 += dv @ params["w_v"].T
    da2 = dh2 * (1.0 - h2 * h2)
    g["w2"] = h1.T @ da2
    g["b2"] = da2.sum(axis=0)
    da1 = (da2 @ params["w2"].T) * (1.0 - h1 * h1)
    g["w1"] = x.T @ da1
    g["b1"] = da1.sum(axis=0)
    dx = da1 @ params["w1"].T
    if spec.id_tables:
        e = spec.embed_dim
        for t in ("char", "skill"):
            g[f"emb_{t}"] = np.zeros_like(params[f"emb_{t}"])
        for k, t in enumerate(spec.id_tables):
            np.add.at(g[f"emb_{t}"], ids[:, k], dx[:, k * e:(k + 1) * e])
    return g


def sample_heads(probs: Sequence[np.ndarray], rng: np.random.Generator,
                 greedy: bool = False) -> np.ndarray:
    """Draw one entry per head per row; returns int array ``[B, 4]``.

    Inverse-CDF sampling scaled by the row total, so zero-probability
    (masked) entries can never be selected.
    """
    cols = []
    for p in probs:
        if greedy:
            cols.append(p.argmax(axis=1))
            continue
        c = np.cumsum(p, axis=1)
        u = rng.random(p.shape[0])[:, None] * c[:, -1:]
        cols.append((c > u).argmax(axis=1))
    return np.stack(cols, axis=1)


def action_logp(logp: Sequence[np.ndarray], actions: np.ndarray) -> np.ndarray:
    """Per-head log-probabilities of ``actions``; shape ``[B, 4]``."""
    rows = np.arange(actions.shape[0])
    return np.stack([lp[rows, actions[:, k]] for k, lp in enumerate(logp)], axis=1)


def to_action(row: Sequence[int]) -> ActionTriple:
    return ActionTriple(int(row[0]), int(row[1]), int(row[2]), int(row[3]))


def stack_masks(masks: Sequence[ActionMask]) -> list[np.ndarray]:
    return [np.stack([m[k] for m in masks]) for k in range(4)]


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def freeze_params(params: Params) -> Params:
    out = copy_params(params)
    for v in out.values():
        v.setflags(write=False)
    return out
