"""Small tanh MLPs with hand-derived gradients, Adam, and soft target updates.

Weights are stored ``(out, in)``; every array is float64.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

INIT_STD = 0.1


@dataclass(frozen=True)
class Descriptor:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.activation != "tanh":
            raise ValueError("only tanh hidden activations are supported")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden),
                "output_dim": self.output_dim, "activation": self.activation}


@dataclass
class NetworkParams:
    descriptor: Descriptor
    layers: list[tuple[np.ndarray, np.ndarray]]

    def arrays(self) -> list[np.ndarray]:
        return [a for W, b in self.layers for a in (W, b)]

    def map(self, fn, *others: "NetworkParams") -> "NetworkParams":
        layers = []
        for k, (W, b) in enumerate(self.layers):
            oW = [o.layers[k][0] for o in others]
            ob = [o.layers[k][1] for o in others]
            layers.append((fn(W, *oW), fn(b, *ob)))
        return NetworkParams(self.descriptor, layers)

    def copy(self) -> "NetworkParams":
        return self.map(np.copy)

    def zeros_like(self) -> "NetworkParams":
        return self.map(np.zeros_like)

    def flat(self) -> np.ndarray:
        """Concatenated (W, b) per layer, the layout the kernels expect."""
        return np.concatenate([a.ravel() for a in self.arrays()])

    def dims_array(self) -> np.ndarray:
        return np.array(self.descriptor.dims, dtype=np.int64)

    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def same_shape(self, other: "NetworkParams") -> bool:
        return [a.shape for a in self.arrays()] == [a.shape for a in other.arrays()]

    def equal(self, other: "NetworkParams") -> bool:
        return self.descriptor == other.descriptor and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays()))


def init(descriptor: Descriptor, seed: int | np.random.Generator, std: float = INIT_STD) -> NetworkParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dims = descriptor.dims
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        layers.append((rng.normal(0.0, std, size=(n_out, n_in)), rng.normal(0.0, std, size=n_out)))
    return NetworkParams(descriptor, layers)


def _forward(params: NetworkParams, x: np.ndarray):
    acts = [np.asarray(x, dtype=np.float64)]
    h = acts[0]
    last = len(params.layers) - 1
    for k, (W, b) in enumerate(params.layers):
        h = W @ h + b
        if k < last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def _backward(params: NetworkParams, acts, dout: np.ndarray) -> NetworkParams:
    grads = [None] * len(params.layers)
    delta = dout
    for k in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[k]
        grads[k] = (np.outer(delta, acts[k]), delta.copy())
        if k:
            delta = (W.T @ delta) * (1.0 - acts[k] ** 2)
    return NetworkParams(params.descriptor, grads)


def _check_mask(mask, n):
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("every action is masked")
    return mask


def logits(params: NetworkParams, x) -> np.ndarray:
    return _forward(params, x)[-1]


def masked_log_softmax(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    zm = np.where(mask, z, -np.inf)
    m = zm.max()
    lse = m + np.log(np.exp(zm - m).sum())
    return zm - lse


def policy_forward(params: NetworkParams, x, mask=None) -> np.ndarray:
    z = logits(params, x)
    mask = _check_mask(mask, z.size)
    zm = np.where(mask, z, -np.inf)
    e = np.exp(zm - zm.max())
    return e / e.sum()


def policy_logprob(params: NetworkParams, x, mask, action: int) -> float:
    mask = _check_mask(mask, params.descriptor.output_dim)
    return float(masked_log_softmax(logits(params, x), mask)[action])


def policy_grad_logprob(params: NetworkParams, x, mask, action: int) -> NetworkParams:
    """Gradient of ``ln pi(action | x)`` with respect to every parameter."""
    acts = _forward(params, x)
    mask = _check_mask(mask, acts[-1].size)
    if not mask[action]:
        raise ValueError(f"action {action} is masked")
    probs = np.exp(masked_log_softmax(acts[-1], mask))
    dz = -probs
    dz[action] += 1.0
    dz[~mask] = 0.0
    return _backward(params, acts, dz)


def value_forward(params: NetworkParams, x) -> float:
    return float(_forward(params, x)[-1][0])


def value_grad(params: NetworkParams, x) -> NetworkParams:
    acts = _forward(params, x)
    return _backward(params, acts, np.ones(1))


# -- optimisation -------------------------------------------------------------


@dataclass
class AdamState:
    m: NetworkParams
    v: NetworkParams
    step: int = 0
    lr: float = 3.8e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: NetworkParams, lr: float = 3.8e-4, **kw) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0, lr, **kw)


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState,
              direction: str = "descend") -> tuple[NetworkParams, AdamState]:
    if not (params.same_shape(grads) and params.same_shape(state.m)):
        raise ValueError("parameter, gradient and moment shapes differ")
    if direction not in ("descend", "ascend"):
        raise ValueError("direction must be 'descend' or 'ascend'")
    sign = 1.0 if direction == "descend" else -1.0
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = state.m.map(lambda m_, g: b1 * m_ + (1.0 - b1) * g, grads)
    v = state.v.map(lambda v_, g: b2 * v_ + (1.0 - b2) * g * g, grads)
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    lr, eps = state.lr, state.eps
    new = params.map(lambda p, m_, v_: p - sign * lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps), m, v)
    return new, AdamState(m, v, t, lr, b1, b2, eps)


def soft_update(online: NetworkParams, target: NetworkParams, lam: float) -> NetworkParams:
    if not online.same_shape(target):
        raise ValueError("online and target shapes differ")
    return online.map(lambda w, wt: lam * w + (1.0 - lam) * wt, target)


# -- checkpoint container -----------------------------------------------------


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def params_to_dict(p: NetworkParams) -> dict:
    return {"descriptor": p.descriptor.to_dict(),
            "layers": [[encode_array(W), encode_array(b)] for W, b in p.layers]}


def params_from_dict(d: dict) -> NetworkParams:
    desc = Descriptor(**d["descriptor"])
    return NetworkParams(desc, [(decode_array(W), decode_array(b)) for W, b in d["layers"]])


def adam_to_dict(s: AdamState) -> dict:
    return {"m": params_to_dict(s.m), "v": params_to_dict(s.v), "step": s.step, "lr": s.lr,
            "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps}


def adam_from_dict(d: dict) -> AdamState:
    return AdamState(params_from_dict(d["m"]), params_from_dict(d["v"]), int(d["step"]),
                     float(d["lr"]), float(d["beta1"]), float(d["beta2"]), float(d["eps"]))


@dataclass
class Checkpoint:
    policy: NetworkParams
    value: NetworkParams
    target: NetworkParams
    policy_opt: AdamState | None = None
    value_opt: AdamState | None = None
    meta: dict = field(default_factory=dict)

    def dumps(self) -> str:
        d = {
            "format": "flexline-checkpoint/1",
            "meta": self.meta,
            "policy": params_to_dict(self.policy),
            "value": params_to_dict(self.value),
            "target": params_to_dict(self.target),
            "policy_opt": adam_to_dict(self.policy_opt) if self.policy_opt else None,
            "value_opt": adam_to_dict(self.value_opt) if self.value_opt else None,
        }
        return json.dumps(d, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Checkpoint":
        d = json.loads(text)
        if d.get("format") != "flexline-checkpoint/1":
            raise ValueError("not a flexline checkpoint")
        return cls(
            params_from_dict(d["policy"]), params_from_dict(d["value"]), params_from_dict(d["target"]),
            adam_from_dict(d["policy_opt"]) if d["policy_opt"] else None,
            adam_from_dict(d["value_opt"]) if d["value_opt"] else None,
            d.get("meta", {}),
        )

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        from pathlib import Path

        return cls.loads(Path(path).read_text(encoding="utf-8"))
