"""Recurrent actor-critic controller and its gradients, in plain numpy.

The network is a linear encoder feeding a single bias-free LSTM cell whose
hidden state drives a softmax action head and a scalar value head:

    f_en = s @ u_en
    z    = [f_en, h_prev]
    f_fg = sigma(z @ u_fg)      f_ig = sigma(z @ u_ig)
    f_cg = tanh(z @ u_cg)       f_og = sigma(z @ u_og)
    c    = c_prev * f_fg + f_ig * f_cg
    h    = f_og * tanh(c)
    pi   = softmax(h @ u_po)    v = h @ u_vo

The actor view (theta) is every tensor except u_vo; the critic view (w) is
every tensor except u_po. Both are names over the same storage, so encoder
and LSTM layers are shared.

Gradients are accumulated over one truncation block: backpropagation runs
through the unrolled steps of the block only, never into the recurrent state
the block started from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

GATE_FIELDS = ("u_fg", "u_ig", "u_cg", "u_og")
FIELD_NAMES = ("u_en",) + GATE_FIELDS + ("u_po", "u_vo")
THETA_FIELDS = ("u_en",) + GATE_FIELDS + ("u_po",)
W_FIELDS = ("u_en",) + GATE_FIELDS + ("u_vo",)


class NumericalFault(RuntimeError):
    """Raised when a forward pass or policy draw produced non-finite numbers."""


@dataclass
class ActorCriticWeights:
    """All trainable tensors. Also doubles as the gradient container."""

    u_en: np.ndarray  # (input_dim, hidden)
    u_fg: np.ndarray  # (2*hidden, hidden)
    u_ig: np.ndarray
    u_cg: np.ndarray
    u_og: np.ndarray
    u_po: np.ndarray  # (hidden, actions)
    u_vo: np.ndarray  # (hidden, 1)

    @property
    def input_dim(self) -> int:
        return self.u_en.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.u_en.shape[1]

    @property
    def action_dim(self) -> int:
        return self.u_po.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ActorCriticWeights":
        return ActorCriticWeights(**{k: v.copy() for k, v in self.as_dict().items()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.as_dict().values())

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, action_dim: int) -> "ActorCriticWeights":
        g = 2 * hidden_dim
        return cls(
            u_en=np.zeros((input_dim, hidden_dim)),
            u_fg=np.zeros((g, hidden_dim)),
            u_ig=np.zeros((g, hidden_dim)),
            u_cg=np.zeros((g, hidden_dim)),
            u_og=np.zeros((g, hidden_dim)),
            u_po=np.zeros((hidden_dim, action_dim)),
            u_vo=np.zeros((hidden_dim, 1)),
        )

    @classmethod
    def random_init(
        cls, input_dim: int, hidden_dim: int, action_dim: int, rng: np.random.Generator
    ) -> "ActorCriticWeights":
        """Uniform +-1/sqrt(fan_in) per layer; keeps the initial policy near uniform."""

        def u(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        g = 2 * hidden_dim
        return cls(
            u_en=u(input_dim, (input_dim, hidden_dim)),
            u_fg=u(g, (g, hidden_dim)),
            u_ig=u(g, (g, hidden_dim)),
            u_cg=u(g, (g, hidden_dim)),
            u_og=u(g, (g, hidden_dim)),
            u_po=u(hidden_dim, (hidden_dim, action_dim)),
            u_vo=u(hidden_dim, (hidden_dim, 1)),
        )


def zeros_like(w: ActorCriticWeights) -> ActorCriticWeights:
    return ActorCriticWeights(**{k: np.zeros_like(v) for k, v in w.as_dict().items()})


def add(a: ActorCriticWeights, b: ActorCriticWeights) -> ActorCriticWeights:
    return ActorCriticWeights(**{k: v + getattr(b, k) for k, v in a.as_dict().items()})


def scale(a: ActorCriticWeights, c: float) -> ActorCriticWeights:
    return ActorCriticWeights(**{k: v * c for k, v in a.as_dict().items()})


def global_norm(a: ActorCriticWeights) -> float:
    return float(np.sqrt(sum(float((v ** 2).sum()) for v in a.as_dict().values())))


def clip_by_global_norm(a: ActorCriticWeights, max_norm: float) -> ActorCriticWeights:
    norm = global_norm(a)
    if norm <= max_norm or norm == 0.0:
        return a
    return scale(a, max_norm / norm)


@dataclass
class RecurrentState:
    cell: np.ndarray
    hidden: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "RecurrentState":
        return cls(cell=np.zeros(hidden_dim), hidden=np.zeros(hidden_dim))

    def copy(self) -> "RecurrentState":
        return RecurrentState(self.cell.copy(), self.hidden.copy())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def forward(
    w: ActorCriticWeights, s_vec: np.ndarray, rs: RecurrentState
) -> tuple[np.ndarray, float, RecurrentState]:
    """One step: (policy, value, next recurrent state)."""
    s_vec = np.asarray(s_vec, dtype=float)
    if s_vec.shape != (w.input_dim,):
        raise ValueError(f"state has shape {s_vec.shape}, expected ({w.input_dim},)")
    f_en = s_vec @ w.u_en
    z = np.concatenate([f_en, rs.hidden])
    f_fg = _sigmoid(z @ w.u_fg)
    f_ig = _sigmoid(z @ w.u_ig)
    f_cg = np.tanh(z @ w.u_cg)
    f_og = _sigmoid(z @ w.u_og)
    c = rs.cell * f_fg + f_ig * f_cg
    h = f_og * np.tanh(c)
    policy = softmax(h @ w.u_po)
    value = float(h @ w.u_vo)
    if not (np.all(np.isfinite(policy)) and np.isfinite(value)):
        raise NumericalFault("non-finite activations in forward pass")
    return policy, value, RecurrentState(cell=c, hidden=h)


def sample_action(policy: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw from the policy via inverse CDF."""
    if not np.all(np.isfinite(policy)):
        raise NumericalFault("policy contains non-finite probabilities")
    cdf = np.cumsum(policy)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right").clip(0, len(policy) - 1))


@dataclass
class BlockCache:
    """Per-step intermediates of one unrolled truncation block."""

    states: np.ndarray   # (T, input_dim)
    f_en: np.ndarray     # (T, hidden)
    z: np.ndarray        # (T, 2*hidden)
    f_fg: np.ndarray
    f_ig: np.ndarray
    f_cg: np.ndarray
    f_og: np.ndarray
    c_prev: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray
    logits: np.ndarray   # (T, actions)
    policies: np.ndarray
    values: np.ndarray   # (T,)


def forward_block(
    w: ActorCriticWeights, states, rs0: RecurrentState
) -> tuple[BlockCache, RecurrentState]:
    """Unroll the network over a block of states, caching everything backward needs."""
    s = np.asarray(states, dtype=float)
    if s.ndim != 2 or s.shape[1] != w.input_dim:
        raise ValueError(f"states must be (T, {w.input_dim}), got {s.shape}")
    t_len, hd = len(s), w.hidden_dim
    cache = BlockCache(
        states=s,
        f_en=np.empty((t_len, hd)),
        z=np.empty((t_len, 2 * hd)),
        f_fg=np.empty((t_len, hd)),
        f_ig=np.empty((t_len, hd)),
        f_cg=np.empty((t_len, hd)),
        f_og=np.empty((t_len, hd)),
        c_prev=np.empty((t_len, hd)),
        tanh_c=np.empty((t_len, hd)),
        h=np.empty((t_len, hd)),
        logits=np.empty((t_len, w.action_dim)),
        policies=np.empty((t_len, w.action_dim)),
        values=np.empty(t_len),
    )
    c, h = rs0.cell.copy(), rs0.hidden.copy()
    for t in range(t_len):
        f_en = s[t] @ w.u_en
        z = np.concatenate([f_en, h])
        f_fg = _sigmoid(z @ w.u_fg)
        f_ig = _sigmoid(z @ w.u_ig)
        f_cg = np.tanh(z @ w.u_cg)
        f_og = _sigmoid(z @ w.u_og)
        cache.c_prev[t] = c
        c = c * f_fg + f_ig * f_cg
        tanh_c = np.tanh(c)
        h = f_og * tanh_c
        logits = h @ w.u_po
        cache.f_en[t], cache.z[t] = f_en, z
        cache.f_fg[t], cache.f_ig[t], cache.f_cg[t], cache.f_og[t] = f_fg, f_ig, f_cg, f_og
        cache.tanh_c[t], cache.h[t] = tanh_c, h
        cache.logits[t] = logits
        cache.policies[t] = softmax(logits)
        cache.values[t] = h @ w.u_vo
    if not (np.all(np.isfinite(cache.policies)) and np.all(np.isfinite(cache.values))):
        raise NumericalFault("non-finite activations in block forward")
    return cache, RecurrentState(cell=c, hidden=h)


def backward_block(
    w: ActorCriticWeights, cache: BlockCache, dlogits: np.ndarray, dvalues: np.ndarray
) -> ActorCriticWeights:
    """Backpropagate head seeds through the unrolled block.

    dlogits[t] and dvalues[t] are the objective's gradients at the policy
    logits and the value output of step t. The recurrent flow is truncated at
    the block start.
    """
    grads = zeros_like(w)
    hd = w.hidden_dim
    dh_next = np.zeros(hd)
    dc_next = np.zeros(hd)
    for t in range(len(cache.states) - 1, -1, -1):
        h, tanh_c = cache.h[t], cache.tanh_c[t]
        grads.u_po += np.outer(h, dlogits[t])
        grads.u_vo += dvalues[t] * h[:, None]
        dh = dh_next + w.u_po @ dlogits[t] + dvalues[t] * w.u_vo[:, 0]
        f_og = cache.f_og[t]
        dc = dc_next + dh * f_og * (1.0 - tanh_c ** 2)
        dpre_og = dh * tanh_c * f_og * (1.0 - f_og)
        f_fg, f_ig, f_cg = cache.f_fg[t], cache.f_ig[t], cache.f_cg[t]
        dpre_fg = dc * cache.c_prev[t] * f_fg * (1.0 - f_fg)
        dpre_ig = dc * f_cg * f_ig * (1.0 - f_ig)
        dpre_cg = dc * f_ig * (1.0 - f_cg ** 2)
        z = cache.z[t]
        grads.u_fg += np.outer(z, dpre_fg)
        grads.u_ig += np.outer(z, dpre_ig)
        grads.u_cg += np.outer(z, dpre_cg)
        grads.u_og += np.outer(z, dpre_og)
        dz = w.u_fg @ dpre_fg + w.u_ig @ dpre_ig + w.u_cg @ dpre_cg + w.u_og @ dpre_og
        grads.u_en += np.outer(cache.states[t], dz[:hd])
        dh_next = dz[hd:]
        dc_next = dc * f_fg
    return grads


def n_step_targets(rewards, bootstrap_value: float, gamma: float) -> np.ndarray:
    """Discounted targets by backward recursion seeded with the bootstrap value."""
    rewards = np.asarray(rewards, dtype=float)
    targets = np.empty_like(rewards)
    running = float(bootstrap_value)
    for j in range(len(rewards) - 1, -1, -1):
        running = rewards[j] + gamma * running
        targets[j] = running
    return targets


def policy_entropy(policy: np.ndarray) -> float:
    p = np.clip(policy, 1e-30, None)
    return float(-(p * np.log(p)).sum())


def bptt_gradients(
    w: ActorCriticWeights, segment, gamma: float, entropy_coeff: float
) -> tuple[ActorCriticWeights, ActorCriticWeights]:
    """Accumulated actor and critic gradients over one truncation block.

    Returns ascent directions: grad_theta for the advantage-weighted log-policy
    objective plus the entropy bonus, grad_w for the advantage-weighted value
    objective. Advantages are computed once from this forward pass and treated
    as constants, so grad_w is the (negated-by-half) squared-error direction.
    grad_theta.u_vo and grad_w.u_po are identically zero.
    """
    states = list(segment.states)
    if len(states) == 0:
        raise ValueError("segment must contain at least one step")
    cache, rs_end = forward_block(w, np.stack(states), segment.start_recurrent)
    if segment.terminal:
        bootstrap = 0.0
    else:
        _, bootstrap, _ = forward(w, segment.bootstrap_state, rs_end)
    targets = n_step_targets(segment.rewards, bootstrap, gamma)
    adv = targets - cache.values

    t_len = len(states)
    log_pi = np.stack([_log_softmax(cache.logits[t]) for t in range(t_len)])
    pis = cache.policies
    ent = -(pis * log_pi).sum(axis=1)

    dlogits = np.zeros_like(pis)
    dlogits[np.arange(t_len), list(segment.actions)] = 1.0
    dlogits = adv[:, None] * (dlogits - pis)
    # Entropy bonus: d H(pi) / d logits_k = -pi_k (log pi_k + H).
    dlogits += entropy_coeff * (-pis * (log_pi + ent[:, None]))

    grad_theta = backward_block(w, cache, dlogits, np.zeros(t_len))
    grad_w = backward_block(w, cache, np.zeros_like(pis), adv)
    return grad_theta, grad_w


# --- named-tensor serialization (weights, checkpoints, SL-init handoff) ---


def write_named_tensors(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """JSON document of named tensors: name -> {shape, row-major data}."""
    doc = {
        "format": "named-tensors-v1",
        "meta": meta or {},
        "tensors": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, float).ravel().tolist()}
            for name, arr in tensors.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_named_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "named-tensors-v1":
        raise ValueError(f"unrecognized tensor file format in {path}")
    tensors = {
        name: np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in doc["tensors"].items()
    }
    return tensors, doc.get("meta", {})


def save_weights(w: ActorCriticWeights, path, meta: dict | None = None) -> None:
    write_named_tensors(path, w.as_dict(), meta=meta)


def load_weights(path) -> ActorCriticWeights:
    tensors, _ = read_named_tensors(path)
    missing = [n for n in FIELD_NAMES if n not in tensors]
    if missing:
        raise ValueError(f"weight file {path} is missing tensors: {missing}")
    return ActorCriticWeights(**{n: tensors[n] for n in FIELD_NAMES})
