"""Actor-critic networks with hand-derived gradients, in float64 numpy.

Two fixed architectures:

  * feedforward: separate actor/critic trunks of two tanh(64) layers; the
    actor mean head is tanh-squashed, the action log-std is a free
    state-independent parameter.
  * recurrent ("rtl"): one LSTM cell (input 4, hidden 64) shared by actor and
    critic, followed by per-branch tanh(64) layers and the same heads.

Parameters live in a flat ``dict[str, np.ndarray]``; every forward pass
returns the caches its matching backward pass needs. Gradients are written
out by hand so the whole training path stays deterministic and dependency
free; each primitive is checked against central finite differences in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureVariant

HIDDEN = 64
ACTION_DIM = 2
LOG_2PI = float(np.log(2.0 * np.pi))


class ShapeMismatch(ValueError):
    """Feature vector does not match the network's input dimension."""


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.standard_normal(size=shape)
    if shape[0] < shape[1]:
        q, r = np.linalg.qr(a.T)
        q = (q * np.sign(np.diag(r))).T
    else:
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(gain * q[: shape[0], : shape[1]], dtype=np.float64)


def init_params(variant: FeatureVariant, rng: np.random.Generator, log_std_init: float = -0.5) -> dict[str, np.ndarray]:
    """Fresh parameter dict for the variant's architecture."""
    d = variant.dim
    p: dict[str, np.ndarray] = {}
    if variant.recurrent:
        # Gate order: input, forget, cell, output. Forget bias starts at 1.
        p["lstm.wx"] = np.concatenate(
            [orthogonal(rng, (d, HIDDEN), 1.0) for _ in range(4)], axis=1
        )
        p["lstm.wh"] = np.concatenate(
            [orthogonal(rng, (HIDDEN, HIDDEN), 1.0) for _ in range(4)], axis=1
        )
        b = np.zeros(4 * HIDDEN)
        b[HIDDEN : 2 * HIDDEN] = 1.0
        p["lstm.b"] = b
    else:
        p["actor.w1"] = orthogonal(rng, (d, HIDDEN), np.sqrt(2.0))
        p["actor.b1"] = np.zeros(HIDDEN)
        p["critic.w1"] = orthogonal(rng, (d, HIDDEN), np.sqrt(2.0))
        p["critic.b1"] = np.zeros(HIDDEN)
    p["actor.w2"] = orthogonal(rng, (HIDDEN, HIDDEN), np.sqrt(2.0))
    p["actor.b2"] = np.zeros(HIDDEN)
    p["actor.w_mean"] = orthogonal(rng, (HIDDEN, ACTION_DIM), 0.01)
    p["actor.b_mean"] = np.zeros(ACTION_DIM)
    p["critic.w2"] = orthogonal(rng, (HIDDEN, HIDDEN), np.sqrt(2.0))
    p["critic.b2"] = np.zeros(HIDDEN)
    p["critic.w_out"] = orthogonal(rng, (HIDDEN, 1), 1.0)
    p["critic.b_out"] = np.zeros(1)
    p["log_std"] = np.full(ACTION_DIM, log_std_init, dtype=np.float64)
    return p


def trainable_keys(params: dict[str, np.ndarray]) -> list[str]:
    return sorted(k for k in params if not k.startswith("norm."))


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# Primitives: forward returns what backward needs.

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db)."""
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def tanh_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient through tanh given its output ``y``."""
    return dy * (1.0 - y * y)


def lstm_forward(
    params: dict[str, np.ndarray], x: np.ndarray, h: np.ndarray, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray, dict]:
    z = x @ params["lstm.wx"] + h @ params["lstm.wh"] + params["lstm.b"]
    i = sigmoid(z[:, :HIDDEN])
    f = sigmoid(z[:, HIDDEN : 2 * HIDDEN])
    g = np.tanh(z[:, 2 * HIDDEN : 3 * HIDDEN])
    o = sigmoid(z[:, 3 * HIDDEN :])
    c2 = f * c + i * g
    tc2 = np.tanh(c2)
    h2 = o * tc2
    cache = {"x": x, "h": h, "c": c, "i": i, "f": f, "g": g, "o": o, "tc2": tc2}
    return h2, c2, cache


def lstm_backward(
    params: dict[str, np.ndarray],
    cache: dict,
    dh2: np.ndarray,
    dc2: np.ndarray,
    grads: dict[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accumulates parameter grads; returns (dx, dh, dc) for the previous step."""
    i, f, g, o, tc2 = cache["i"], cache["f"], cache["g"], cache["o"], cache["tc2"]
    do = dh2 * tc2
    dc_total = dc2 + dh2 * o * (1.0 - tc2 * tc2)
    di = dc_total * g
    dg = dc_total * i
    df = dc_total * cache["c"]
    dc_prev = dc_total * f
    dz = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
        axis=1,
    )
    grads["lstm.wx"] += cache["x"].T @ dz
    grads["lstm.wh"] += cache["h"].T @ dz
    grads["lstm.b"] += dz.sum(axis=0)
    return dz @ params["lstm.wx"].T, dz @ params["lstm.wh"].T, dc_prev


# ---------------------------------------------------------------------------
# Feedforward policy/value network.

def forward(
    params: dict[str, np.ndarray],
    variant: FeatureVariant,
    x: np.ndarray,
    hidden: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple | None, dict]:
    """Batched forward pass.

    Returns (mean, log_std, value, hidden', cache). ``hidden`` is passed
    through untouched for the feedforward variants; the recurrent variant
    threads an (h, c) pair, starting from zeros when None.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != variant.dim:
        raise ShapeMismatch(f"expected feature dim {variant.dim} for {variant.value}, got {x.shape[1]}")
    n = x.shape[0]
    cache: dict = {"x": x}
    if variant.recurrent:
        if hidden is None:
            hidden = (np.zeros((n, HIDDEN)), np.zeros((n, HIDDEN)))
        h2, c2, lstm_cache = lstm_forward(params, x, hidden[0], hidden[1])
        cache["lstm"] = lstm_cache
        trunk_a = trunk_c = h2
        new_hidden: tuple | None = (h2, c2)
    else:
        a1 = np.tanh(dense_forward(x, params["actor.w1"], params["actor.b1"]))
        c1 = np.tanh(dense_forward(x, params["critic.w1"], params["critic.b1"]))
        cache["a1"], cache["c1"] = a1, c1
        trunk_a, trunk_c = a1, c1
        new_hidden = hidden

    a2 = np.tanh(dense_forward(trunk_a, params["actor.w2"], params["actor.b2"]))
    mean = np.tanh(dense_forward(a2, params["actor.w_mean"], params["actor.b_mean"]))
    c2l = np.tanh(dense_forward(trunk_c, params["critic.w2"], params["critic.b2"]))
    value = dense_forward(c2l, params["critic.w_out"], params["critic.b_out"])[:, 0]
    cache.update({"trunk_a": trunk_a, "trunk_c": trunk_c, "a2": a2, "mean": mean, "c2l": c2l})
    return mean, params["log_std"].copy(), value, new_hidden, cache


def backward(
    params: dict[str, np.ndarray],
    variant: FeatureVariant,
    cache: dict,
    dmean: np.ndarray,
    dvalue: np.ndarray,
    grads: dict[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Backprop head gradients into ``grads``.

    For the recurrent variant returns (dh, dc) flowing into the LSTM output of
    this timestep (the caller runs the cell's backward-through-time);
    feedforward variants return zeros.
    """
    dz_mean = tanh_backward(cache["mean"], dmean)
    da2, dw, db = dense_backward(cache["a2"], params["actor.w_mean"], dz_mean)
    grads["actor.w_mean"] += dw
    grads["actor.b_mean"] += db
    dz_a2 = tanh_backward(cache["a2"], da2)
    dtrunk_a, dw, db = dense_backward(cache["trunk_a"], params["actor.w2"], dz_a2)
    grads["actor.w2"] += dw
    grads["actor.b2"] += db

    dv = dvalue[:, None]
    dc2l, dw, db = dense_backward(cache["c2l"], params["critic.w_out"], dv)
    grads["critic.w_out"] += dw
    grads["critic.b_out"] += db
    dz_c2 = tanh_backward(cache["c2l"], dc2l)
    dtrunk_c, dw, db = dense_backward(cache["trunk_c"], params["critic.w2"], dz_c2)
    grads["critic.w2"] += dw
    grads["critic.b2"] += db

    if variant.recurrent:
        n = cache["x"].shape[0]
        return dtrunk_a + dtrunk_c, np.zeros((n, HIDDEN))

    dz_a1 = tanh_backward(cache["a1"], dtrunk_a)
    _, dw, db = dense_backward(cache["x"], params["actor.w1"], dz_a1)
    grads["actor.w1"] += dw
    grads["actor.b1"] += db
    dz_c1 = tanh_backward(cache["c1"], dtrunk_c)
    _, dw, db = dense_backward(cache["x"], params["critic.w1"], dz_c1)
    grads["critic.w1"] += dw
    grads["critic.b1"] += db
    n = cache["x"].shape[0]
    return np.zeros((n, HIDDEN)), np.zeros((n, HIDDEN))


# ---------------------------------------------------------------------------
# Gaussian policy head math.

def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log density of ``actions`` under the diagonal Gaussian, summed over dims."""
    z = (actions - mean) / np.exp(log_std)
    return -0.5 * np.sum(z * z + 2.0 * log_std + LOG_2PI, axis=-1)


def gaussian_log_prob_backward(
    actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray, dlogp: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (dmean, dlog_std) given upstream gradient on the log-prob."""
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    dmean = dlogp[:, None] * diff * inv_var
    dlog_std = (dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0)
    return dmean, dlog_std


def gaussian_entropy(log_std: np.ndarray) -> float:
    """Entropy of the diagonal Gaussian (state independent)."""
    return float(np.sum(log_std + 0.5 * (1.0 + LOG_2PI)))


# ---------------------------------------------------------------------------
# Running feature standardization (updated during rollouts, frozen at eval).

@dataclass
class RunningNorm:
    """Welford running mean/variance with a clipped standardize transform."""

    mean: np.ndarray
    m2: np.ndarray
    count: float
    clip: float = 8.0

    @classmethod
    def create(cls, dim: int) -> "RunningNorm":
        # A tiny prior count with unit variance keeps the first samples sane.
        return cls(mean=np.zeros(dim), m2=np.full(dim, 1e-4), count=1e-4)

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64)
        delta = x - self.mean
        self.count += 1.0
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        var = self.m2 / self.count
        z = (np.asarray(x, dtype=np.float64) - self.mean) / np.sqrt(var + 1e-8)
        return np.clip(z, -self.clip, self.clip)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "norm.mean": self.mean.copy(),
            "norm.m2": self.m2.copy(),
            "norm.count": np.array([self.count], dtype=np.float64),
        }

    @classmethod
    def from_state(cls, arrays: dict[str, np.ndarray]) -> "RunningNorm":
        return cls(
            mean=np.asarray(arrays["norm.mean"], dtype=np.float64).copy(),
            m2=np.asarray(arrays["norm.m2"], dtype=np.float64).copy(),
            count=float(np.asarray(arrays["norm.count"]).reshape(-1)[0]),
        )
