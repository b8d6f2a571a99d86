"""Feed-forward ReLU network with hand-written backprop and Adam.

The network maps HD points to LD coordinates: ReLU on every hidden layer,
identity on the output layer. Weights are stored as (fan_in, fan_out) so a
batch propagates as ``a @ W + b``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_WIDTHS = (500, 500, 2000, 500)


@dataclass
class MlpModel:
    layer_dims: list
    weights: list
    biases: list
    seed: int | None = None

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        return MlpModel(list(self.layer_dims), [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.seed)

    def parameters(self):
        """Flat list [W1, b1, W2, b2, ...] of parameter arrays (views)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class ForwardCache:
    inputs: np.ndarray
    # pre_acts[l] = a_{l-1} @ W_l + b_l; acts[l] = relu(pre_acts[l]) except last
    pre_acts: list = field(default_factory=list)
    acts: list = field(default_factory=list)


@dataclass
class Gradients:
    weights: list
    biases: list

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list | None = None
    v: list | None = None


def init_mlp(layer_dims, seed=0):
    """He-uniform weights (bound sqrt(6 / fan_in)) and zero biases."""
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) < 3:
        raise ValueError(f"need at least one hidden layer, got dims {layer_dims}")
    if any(d < 1 for d in layer_dims):
        raise ValueError(f"all layer dims must be >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims, weights, biases, seed)


def forward(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"input has shape {x.shape}, model expects {model.input_dim} columns")
    cache = ForwardCache(inputs=x)
    a = x
    last = model.n_layers - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        cache.pre_acts.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        cache.acts.append(a)
    return a, cache


def backward(model, cache, dloss_dy):
    """Backpropagate dL/dy through the network; ReLU'(0) is taken as 0."""
    g = np.asarray(dloss_dy, dtype=np.float64)
    y = cache.acts[-1]
    if g.shape != y.shape:
        raise ValueError(f"dloss_dy has shape {g.shape}, expected {y.shape}")
    dws = [None] * model.n_layers
    dbs = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        a_prev = cache.inputs if l == 0 else cache.acts[l - 1]
        dws[l] = a_prev.T @ g
        dbs[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ model.weights[l].T) * (cache.pre_acts[l - 1] > 0.0)
    return Gradients(dws, dbs)


def adam_step(model, grads, state):
    """One bias-corrected Adam update, in place. Returns (model, state)."""
    params = model.parameters()
    gs = grads.parameters()
    if len(gs) != len(params):
        raise ValueError("gradient / parameter count mismatch")
    for k, (p, g) in enumerate(zip(params, gs)):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            kind = "weights" if k % 2 == 0 else "biases"
            raise FloatingPointError(f"non-finite gradient in layer {k // 2} {kind}")
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return model, state


# -- serialization -----------------------------------------------------------

MAGIC = b"MSPT"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def serialize_model(model):
    """Binary model file: magic, version, layer count, dims, f64 params, checksum.

    All integers are little-endian u32, parameters little-endian float64
    (per layer: weights row-major, then biases), followed by a u64 checksum
    equal to the byte sum of the parameter block modulo 2**64.
    """
    head = MAGIC + struct.pack("<II", FORMAT_VERSION, model.n_layers)
    head += struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims)
    chunks = []
    for w, b in zip(model.weights, model.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    body = b"".join(chunks)
    checksum = int(np.frombuffer(body, dtype=np.uint8).sum(dtype=np.uint64))
    return head + body + struct.pack("<Q", checksum)


def deserialize_model(data):
    data = bytes(data)
    if len(data) < 12:
        raise ModelFormatError("truncated model file (header)")
    if data[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if n_layers < 1 or n_layers > 1024:
        raise ModelFormatError(f"implausible layer count {n_layers}")
    off = 12
    need = off + 4 * (n_layers + 1)
    if len(data) < need:
        raise ModelFormatError("truncated model file (layer dims)")
    dims = list(struct.unpack_from(f"<{n_layers + 1}I", data, off))
    off = need
    n_params = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    if len(data) != off + 8 * n_params + 8:
        raise ModelFormatError(
            f"model file size {len(data)} does not match dims {dims} "
            f"(expected {off + 8 * n_params + 8} bytes)")
    body = data[off:off + 8 * n_params]
    (checksum,) = struct.unpack_from("<Q", data, off + 8 * n_params)
    if int(np.frombuffer(body, dtype=np.uint8).sum(dtype=np.uint64)) != checksum:
        raise ModelFormatError("checksum mismatch")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    weights, biases = [], []
    pos = 0
    for a, b in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos:pos + a * b].reshape(a, b).copy())
        pos += a * b
        biases.append(flat[pos:pos + b].copy())
        pos += b
    return MlpModel(dims, weights, biases, seed=None)


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
