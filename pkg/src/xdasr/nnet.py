"""Minimal sequence network stack: BiLSTM, TDNN splice layers, affine output.

Utterance-at-a-time (no cross-utterance minibatching). Parameters are stored
in float32 by default; all forward/backward math runs in float64. The hot
recurrences live in the kernels backend.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels

CHECKPOINT_MAGIC = b"XDCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # bilstm | tdnn | affine | relu | softmax
    width: int
    input_dim: int
    offsets: tuple[int, ...] = ()

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("layer width must be positive")
        if self.kind == "tdnn":
            if not self.offsets:
                raise ValueError("tdnn layer needs splice offsets")
            if list(self.offsets) != sorted(set(self.offsets)):
                raise ValueError("splice offsets must be sorted and unique")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "width": self.width, "input_dim": self.input_dim}
        if self.kind == "tdnn":
            d["offsets"] = list(self.offsets)
        return d

    @staticmethod
    def from_dict(d: dict) -> "LayerSpec":
        return LayerSpec(
            kind=d["kind"],
            width=d["width"],
            input_dim=d["input_dim"],
            offsets=tuple(d.get("offsets", ())),
        )

    @property
    def output_dim(self) -> int:
        return 2 * self.width if self.kind == "bilstm" else self.width


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class _Layer:
    spec: LayerSpec
    param_names: tuple[str, ...] = ()

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _p64(self, name: str) -> np.ndarray:
        return np.ascontiguousarray(self.params[name], dtype=np.float64)


class Affine(_Layer):
    param_names = ("w", "b")

    def init_params(self, rng, dtype):
        s = self.spec
        self.params = {
            "w": _glorot(rng, s.input_dim, s.width).astype(dtype),
            "b": np.zeros(s.width, dtype=dtype),
        }

    def forward(self, x):
        self._x = x
        return x @ self._p64("w") + self._p64("b")

    def backward(self, dy):
        self.grads = {"w": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self._p64("w").T


class Relu(_Layer):
    def init_params(self, rng, dtype):
        self.params = {}

    def forward(self, x):
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        self.grads = {}
        return np.where(self._mask, dy, 0.0)


class Tdnn(_Layer):
    """Spliced (possibly dilated) affine over a temporal context, then ReLU."""

    param_names = ("w", "b")

    def init_params(self, rng, dtype):
        s = self.spec
        fan_in = s.input_dim * len(s.offsets)
        self.params = {
            "w": _glorot(rng, fan_in, s.width).astype(dtype),
            "b": np.zeros(s.width, dtype=dtype),
        }

    def _splice(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = x.shape[0]
        idx = np.clip(np.arange(t)[:, None] + np.array(self.spec.offsets)[None, :], 0, t - 1)
        return x[idx].reshape(t, -1), idx

    def forward(self, x):
        self._t, self._d = x.shape
        xs, idx = self._splice(x)
        self._xs, self._idx = xs, idx
        z = xs @ self._p64("w") + self._p64("b")
        self._mask = z > 0.0
        return np.where(self._mask, z, 0.0)

    def backward(self, dy):
        dz = np.where(self._mask, dy, 0.0)
        self.grads = {"w": self._xs.T @ dz, "b": dz.sum(axis=0)}
        dxs = (dz @ self._p64("w").T).reshape(self._t, len(self.spec.offsets), self._d)
        dx = np.zeros((self._t, self._d))
        np.add.at(dx, self._idx.reshape(-1), dxs.reshape(-1, self._d))
        return dx


class BiLstm(_Layer):
    """Concatenated forward and time-reversed LSTM passes (width per direction)."""

    param_names = ("wx_f", "wh_f", "b_f", "wx_b", "wh_b", "b_b")

    def init_params(self, rng, dtype):
        s = self.spec
        h = s.width
        params = {}
        for d in ("f", "b"):
            wx = _glorot(rng, s.input_dim, 4 * h)
            wh = rng.uniform(-np.sqrt(3.0 / h), np.sqrt(3.0 / h), size=(h, 4 * h))
            b = np.zeros(4 * h)
            b[h : 2 * h] = 1.0  # forget-gate bias
            params[f"wx_{d}"] = wx.astype(dtype)
            params[f"wh_{d}"] = wh.astype(dtype)
            params[f"b_{d}"] = b.astype(dtype)
        self.params = params

    def _run_direction(self, x: np.ndarray, d: str):
        xp = x @ self._p64(f"wx_{d}") + self._p64(f"b_{d}")
        h, c, gates = kernels.lstm_forward(np.ascontiguousarray(xp), self._p64(f"wh_{d}"))
        if np.isnan(h[-1]).any():
            raise FloatingPointError(f"NaN in {d}-direction LSTM activations (T={x.shape[0]})")
        return h, c, gates

    def forward(self, x):
        self._x = x
        self._xr = np.ascontiguousarray(x[::-1])
        self._fwd = self._run_direction(x, "f")
        self._bwd = self._run_direction(self._xr, "b")
        return np.hstack([self._fwd[0], self._bwd[0][::-1]])

    def backward(self, dy):
        h = self.spec.width
        grads = {}
        dx_total = np.zeros_like(self._x)
        for d, cache, x_in, dh in (
            ("f", self._fwd, self._x, dy[:, :h]),
            ("b", self._bwd, self._xr, dy[:, h:][::-1]),
        ):
            hs, cs, gates = cache
            dxp, dwh = kernels.lstm_backward(
                np.ascontiguousarray(dh), self._p64(f"wh_{d}"), hs, cs, gates
            )
            grads[f"wx_{d}"] = x_in.T @ dxp
            grads[f"wh_{d}"] = dwh
            grads[f"b_{d}"] = dxp.sum(axis=0)
            dx = dxp @ self._p64(f"wx_{d}").T
            dx_total += dx if d == "f" else dx[::-1]
        self.grads = grads
        return dx_total


_LAYER_TYPES = {"affine": Affine, "relu": Relu, "tdnn": Tdnn, "bilstm": BiLstm}


class Network:
    """Ordered layer stack ending in logits; a trailing softmax spec is kept
    as an architecture marker and applied by :meth:`log_probs` only."""

    def __init__(self, specs: list[LayerSpec], seed: int = 0, dtype=np.float32):
        self.specs = list(specs)
        self.dtype = np.dtype(dtype)
        self.layers: list[_Layer] = []
        rng = np.random.default_rng(seed)
        expected = None
        for spec in self.specs:
            if expected is not None and spec.input_dim != expected:
                raise ValueError(f"layer {spec.kind} expects input {spec.input_dim}, got {expected}")
            expected = spec.output_dim
            if spec.kind == "softmax":
                continue
            layer = _LAYER_TYPES[spec.kind](spec)
            layer.init_params(rng, self.dtype)
            self.layers.append(layer)

    @property
    def input_dim(self) -> int:
        return self.specs[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].output_dim

    def forward(self, x: np.ndarray, upto: int | None = None) -> np.ndarray:
        """Forward pass to logits, or through the first ``upto`` layers."""
        out = np.asarray(x, dtype=np.float64)
        layers = self.layers if upto is None else self.layers[:upto]
        for layer in layers:
            out = layer.forward(out)
        return out

    def log_probs(self, x: np.ndarray) -> np.ndarray:
        return log_softmax(self.forward(x))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = np.asarray(grad_logits, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    # Flat parameter/gradient views (fixed layer-then-name order).
    def _param_items(self):
        for layer in self.layers:
            for name in layer.param_names:
                yield layer, name

    def params_flat(self) -> np.ndarray:
        if not self.layers:
            return np.zeros(0, dtype=self.dtype)
        return np.concatenate([layer.params[name].ravel() for layer, name in self._param_items()])

    def set_params_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for layer, name in self._param_items():
            size = layer.params[name].size
            layer.params[name] = (
                vec[pos : pos + size].astype(self.dtype).reshape(layer.params[name].shape)
            )
            pos += size
        if pos != vec.size:
            raise ValueError(f"parameter vector has {vec.size} entries, expected {pos}")

    def grads_flat(self) -> np.ndarray:
        return np.concatenate(
            [layer.grads[name].ravel().astype(np.float64) for layer, name in self._param_items()]
        )

    @property
    def num_params(self) -> int:
        return sum(layer.params[name].size for layer, name in self._param_items())


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def sgd_step(
    params: np.ndarray,
    grads: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
    clip: float | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Momentum SGD with global-norm gradient clipping (pure function)."""
    if params.shape != grads.shape or params.shape != velocity.shape:
        raise ValueError("params/grads/velocity length mismatch")
    g = np.asarray(grads, dtype=np.float64)
    if clip is not None and np.isfinite(clip):
        norm = float(np.sqrt((g * g).sum()))
        if norm > clip:
            g = g * (clip / norm)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient after clipping")
    v = momentum * np.asarray(velocity, dtype=np.float64) - lr * g
    return (np.asarray(params, dtype=np.float64) + v).astype(params.dtype), v.astype(velocity.dtype)


class SgdMomentum:
    """Stateful wrapper around :func:`sgd_step` holding the velocity."""

    def __init__(self, n_params: int, lr: float, momentum: float = 0.9, clip: float | None = 5.0):
        self.lr = lr
        self.momentum = momentum
        self.clip = clip
        self.velocity = np.zeros(n_params, dtype=np.float32)

    def step(self, net: Network) -> None:
        params, self.velocity = sgd_step(
            net.params_flat(), net.grads_flat(), self.velocity, self.lr, self.momentum, self.clip
        )
        net.set_params_flat(params)


def bilstm_arch(input_dim: int, hidden: int, depth: int, n_out: int) -> list[LayerSpec]:
    specs = []
    d = input_dim
    for _ in range(depth):
        specs.append(LayerSpec("bilstm", hidden, d))
        d = 2 * hidden
    specs.append(LayerSpec("affine", n_out, d))
    specs.append(LayerSpec("softmax", n_out, n_out))
    return specs


DEFAULT_TDNN_OFFSETS: tuple[tuple[int, ...], ...] = ((-2, -1, 0, 1, 2), (-1, 0, 1), (-3, 0, 3), (0,))


def tdnn_arch(
    input_dim: int,
    width: int,
    n_out: int,
    offsets: tuple[tuple[int, ...], ...] = DEFAULT_TDNN_OFFSETS,
) -> list[LayerSpec]:
    specs = []
    d = input_dim
    for offs in offsets:
        specs.append(LayerSpec("tdnn", width, d, tuple(offs)))
        d = width
    specs.append(LayerSpec("affine", n_out, d))
    specs.append(LayerSpec("softmax", n_out, n_out))
    return specs


def save_checkpoint(path, net: Network, meta: dict | None = None) -> None:
    header = {
        "arch": [s.to_dict() for s in net.specs],
        "meta": meta or {},
        "param_count": int(net.num_params),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = net.params_flat().astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(payload)


def load_checkpoint(path) -> tuple[Network, dict]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = f.read()
    params = np.frombuffer(payload, dtype="<f4")
    if params.size != header["param_count"]:
        raise ValueError(
            f"{path}: payload has {params.size} parameters, header says {header['param_count']}"
        )
    specs = [LayerSpec.from_dict(d) for d in header["arch"]]
    net = Network(specs, seed=0)
    net.set_params_flat(params.astype(np.float64))
    return net, header["meta"]
