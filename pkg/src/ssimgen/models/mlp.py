"""Fully connected networks over flat parameter lists [W0, b0, W1, b1, ...]."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError

HIDDEN = {"relu": ad.relu, "tanh": ad.tanh, "linear": ad.identity}
OUTPUT = {"sigmoid": ad.sigmoid, "linear": ad.identity}


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]
    hidden: str = "relu"
    output: str = "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ConfigError("an MLP needs at least one hidden layer")
        if any(w < 1 for w in self.widths):
            raise ConfigError("layer widths must be positive")
        if self.hidden not in HIDDEN:
            raise ConfigError(f"hidden activation must be one of {sorted(HIDDEN)}")
        if self.output not in OUTPUT:
            raise ConfigError(f"output activation must be one of {sorted(OUTPUT)}")

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        out = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            out += [(fan_in, fan_out), (fan_out,)]
        return out

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["widths"]), d.get("hidden", "relu"), d.get("output", "sigmoid"))


def init_params(spec: MlpSpec, rng: np.random.Generator) -> list[np.ndarray]:
    params = []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        params.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(spec: MlpSpec, params, x, logits: bool = False) -> ad.Tensor:
    """Run the network; ``logits`` skips the output activation."""
    h = ad.as_tensor(x)
    n_layers = len(spec.widths) - 1
    act = HIDDEN[spec.hidden]
    for k in range(n_layers):
        h = ad.affine(h, params[2 * k], params[2 * k + 1])
        if k < n_layers - 1:
            h = act(h)
    return h if logits else OUTPUT[spec.output](h)


def predict(spec: MlpSpec, params, x) -> np.ndarray:
    return forward(spec, params, np.asarray(x, dtype=float)).data


def flatten(params) -> list[float]:
    return [float(v) for p in params for v in np.asarray(p).reshape(-1)]


def unflatten(spec: MlpSpec, flat) -> list[np.ndarray]:
    flat = np.asarray(flat, dtype=float)
    if flat.size != spec.n_params:
        raise ConfigError(f"expected {spec.n_params} parameters, got {flat.size}")
    out, pos = [], 0
    for shape in spec.shapes:
        size = int(np.prod(shape))
        out.append(flat[pos : pos + size].reshape(shape).copy())
        pos += size
    return out
