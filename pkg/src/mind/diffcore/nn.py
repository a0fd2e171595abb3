"""MLPs, parameter initialization, and the Adam optimizer."""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .tape import Tensor, add, matmul, param, relu, sigmoid


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None, dtype=np.float32, gain: float = 1.0) -> np.ndarray:
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(dtype)


class MLP:
    """Fully connected net with ReLU hidden layers and identity or sigmoid output."""

    def __init__(self, in_dim: int, hidden: tuple[int, ...], out_dim: int = 1,
                 out_act: str = "identity", rng: np.random.Generator | None = None,
                 dtype=np.float32, name: str = "mlp"):
        if out_act not in ("identity", "sigmoid"):
            raise ContractError(f"unsupported output activation {out_act!r}")
        rng = rng or np.random.default_rng()
        self.name = name
        self.out_act = out_act
        self.widths = (in_dim, *hidden, out_dim)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for i, (a, b) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            self.weights.append(param(xavier_uniform(rng, a, b, dtype=dtype)))
            self.biases.append(param(np.zeros(b, dtype=dtype)))

    def __call__(self, x) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = add(matmul(h, w), b)
            if i < last:
                h = relu(h)
        if self.out_act == "sigmoid":
            h = sigmoid(h)
        return h

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{self.name}/w{i}"] = w
            out[f"{self.name}/b{i}"] = b
        return out


class AdamState:
    """Bias-corrected Adam moments for a named parameter set."""

    def __init__(self, params: dict[str, Tensor], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for k in self.m:
            out[f"{prefix}/m/{k}"] = self.m[k]
            out[f"{prefix}/v/{k}"] = self.v[k]
        return out

    def load_state(self, prefix: str, arrays: dict[str, np.ndarray], t: int) -> None:
        for k in self.m:
            self.m[k] = arrays[f"{prefix}/m/{k}"].astype(self.m[k].dtype).reshape(self.m[k].shape)
            self.v[k] = arrays[f"{prefix}/v/{k}"].astype(self.v[k].dtype).reshape(self.v[k].shape)
        self.t = t


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One in-place Adam update from each parameter's accumulated .grad."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        if p.grad is None:
            raise ContractError(f"parameter {k} has no gradient")
        g = p.grad
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None
