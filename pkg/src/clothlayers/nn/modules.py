"""Parameter containers: Linear layers and small MLPs.

Parameters register in insertion order, so ``named_parameters`` is
deterministic and checkpoints are byte-stable.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, add, matmul, relu, softplus, tanh

# the sharp softplus trains like relu but stays smooth for gradient checks
_ACTIVATIONS = {"softplus": lambda t: softplus(t, beta=4.0),
                "relu": relu, "tanh": tanh}


class Parameter(Tensor):
    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


class Module:
    """Base container; submodules and parameters are found via attributes."""

    def named_parameters(self, prefix: str = "") -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Parameter):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Parameter):
                        out[f"{key}.{i}"] = item
        return out

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.zero_grad()

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"checkpoint misses parameters: {sorted(missing)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: "
                                 f"{arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}


class Linear(Module):
    """y = x @ W + b with Glorot-uniform init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 dtype=np.float32, bias: bool = True):
        s = float(np.sqrt(6.0 / (n_in + n_out)))
        self.weight = Parameter(rng.uniform(-s, s, (n_in, n_out)).astype(dtype))
        self.bias = Parameter(np.zeros(n_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.weight)
        if self.bias is not None:
            y = add(y, self.bias)
        return y


class MLP(Module):
    """Chain of Linear layers with an activation between (and optionally
    after) them."""

    def __init__(self, widths: list[int], rng: np.random.Generator,
                 dtype=np.float32, activation: str = "softplus",
                 final_activation: bool = False):
        self.layers = [Linear(widths[i], widths[i + 1], rng, dtype)
                       for i in range(len(widths) - 1)]
        self.act = activation
        self.final_activation = final_activation

    def __call__(self, x: Tensor) -> Tensor:
        act = _ACTIVATIONS[self.act]
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_activation:
                x = act(x)
        return x
