"""A small convolutional network written directly against numpy.

Activations use NHWC layout. Every kernel comes as a ``*_forward`` returning
``(out, cache)`` and a ``*_backward`` consuming the upstream gradient and that
cache. Single examples (HWC) are accepted wherever a batch is.

Architectures are written as strings, e.g. ``"IC(5,15,64)LPC(1,5,64)LPF(384)F(192)O"``:

    I           input
    C(s,f,d)    conv, stride s, f x f receptive field, depth d, then ReLU
    C(s,f,d,p)  same with explicit zero padding p
    L           local response normalization across channels
    P           max pooling, 3 x 3 window, stride 2
    F(n)        fully connected, n units, then ReLU
    O           linear output layer, one unit per class
"""

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hyperwave.tensorio import load_container, save_container

LRN_DEFAULTS = dict(n=5, k=2.0, alpha=1e-4, beta=0.75)
POOL_DEFAULTS = dict(window=3, stride=2)


class ArchitectureError(ValueError):
    def __init__(self, message, position=None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class ShapeError(ValueError):
    pass


# -- kernels ---------------------------------------------------------------


def _batched(x):
    x = np.asarray(x)
    return (x, False) if x.ndim == 4 else (x[None], True)


def _windows(x, field, stride):
    """(N, H, W, C) -> (N, H', W', C, field, field) strided view."""
    view = np.lib.stride_tricks.sliding_window_view(x, (field, field), axis=(1, 2))
    return view[:, ::stride, ::stride]


def conv_output_size(size, field, stride, pad):
    return (size + 2 * pad - field) // stride + 1


def conv2d_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation of x (N,H,W,Cin) with w (f,f,Cin,Cout) plus bias b (Cout,)."""
    x, single = _batched(x)
    f, f2, cin, cout = w.shape
    if f != f2 or x.shape[3] != cin or b.shape != (cout,):
        raise ShapeError(f"conv shapes disagree: x {x.shape}, w {w.shape}, b {b.shape}")
    n, h, wd, _ = x.shape
    ho, wo = conv_output_size(h, f, stride, pad), conv_output_size(wd, f, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError(f"{f}x{f} kernel does not fit a {h}x{wd} map with pad {pad}")
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else x
    cols = _windows(xp, f, stride)[:, :ho, :wo].reshape(n * ho * wo, cin * f * f)
    wmat = w.transpose(2, 0, 1, 3).reshape(cin * f * f, cout)
    out = (cols @ wmat + b).reshape(n, ho, wo, cout)
    cache = (xp.shape, cols, w, stride, pad)
    return (out[0] if single else out), cache


def conv2d_backward(dout, cache, need_input_grad=True):
    xp_shape, cols, w, stride, pad = cache
    dout, single = _batched(dout)
    f, _, cin, cout = w.shape
    n, ho, wo, _ = dout.shape
    dflat = dout.reshape(-1, cout)
    dw = (cols.T @ dflat).reshape(cin, f, f, cout).transpose(1, 2, 0, 3)
    db = dflat.sum(axis=0)
    dx = None
    if need_input_grad and stride == 1:
        # full correlation of dout with the flipped, channel-swapped kernel
        flipped = w[::-1, ::-1].transpose(0, 1, 3, 2)
        padded = np.pad(dout, ((0, 0), (f - 1, f - 1), (f - 1, f - 1), (0, 0)))
        dxp, _ = conv2d_forward(padded, flipped, np.zeros(cin, dtype=dout.dtype))
        dx = dxp[:, pad:xp_shape[1] - pad, pad:xp_shape[2] - pad, :]
    elif need_input_grad:
        wmat = w.transpose(2, 0, 1, 3).reshape(cin * f * f, cout)
        dcols = (dflat @ wmat.T).reshape(n, ho, wo, cin, f, f)
        dxp = np.zeros(xp_shape, dtype=dout.dtype)
        for i in range(f):
            for j in range(f):
                dxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += dcols[..., i, j]
        dx = dxp[:, pad:xp_shape[1] - pad, pad:xp_shape[2] - pad, :]
    if dx is not None:
        dx = np.ascontiguousarray(dx[0] if single else dx)
    return dx, dw, db


def relu_forward(x):
    x = np.asarray(x)
    return np.maximum(x, 0), x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def relu(x):
    return relu_forward(x)[0]


def _channel_window_sum(a, n):
    """Sum over a centred window of n channels, clipped at the channel ends."""
    half = n // 2
    padded = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(half, half)])
    c = a.shape[-1]
    total = np.zeros_like(a)
    for offset in range(n):
        total += padded[..., offset:offset + c]
    return total


def lrn_forward(x, n=5, k=2.0, alpha=1e-4, beta=0.75):
    """b_c = a_c / (k + alpha/n * sum of a_j^2 over the n channels around c) ** beta."""
    if n % 2 != 1:
        raise ValueError(f"LRN window must be odd, got {n}")
    x = np.asarray(x)
    scale = k + (alpha / n) * _channel_window_sum(x * x, n)
    out = x * scale ** -beta
    return out, (x, scale, n, alpha, beta)


def lrn_backward(dout, cache):
    x, scale, n, alpha, beta = cache
    inner = _channel_window_sum(dout * x * scale ** (-beta - 1.0), n)
    return dout * scale ** -beta - (2.0 * alpha * beta / n) * x * inner


def lrn(x, n=5, k=2.0, alpha=1e-4, beta=0.75):
    return lrn_forward(x, n, k, alpha, beta)[0]


def pool_output_size(size, window, stride):
    return (size - window) // stride + 1


def max_pool_forward(x, window=3, stride=2):
    x, single = _batched(x)
    n, h, w, c = x.shape
    if window > h or window > w:
        raise ShapeError(f"pool window {window} larger than {h}x{w} map")
    ho, wo = pool_output_size(h, window, stride), pool_output_size(w, window, stride)
    patches = _windows(x, window, stride)[:, :ho, :wo].reshape(n, ho, wo, c, window * window)
    # argmax returns the first maximum in row-major window order
    arg = patches.argmax(axis=-1)
    out = np.take_along_axis(patches, arg[..., None], axis=-1)[..., 0]
    return (out[0] if single else out), (x.shape, arg, window, stride)


def max_pool_backward(dout, cache):
    x_shape, arg, window, stride = cache
    dout, single = _batched(dout)
    _, ho, wo, _ = dout.shape
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for idx in range(window * window):
        i, j = divmod(idx, window)
        dx[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += dout * (arg == idx)
    return dx[0] if single else dx


def fully_connected_forward(x, w, b):
    """y = W x + b with W of shape (units, inputs); x is flattened per example."""
    x = np.asarray(x)
    single = x.ndim == 1
    flat = x.reshape(1 if single else x.shape[0], -1)
    if flat.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"fc shapes disagree: x {x.shape}, w {w.shape}, b {b.shape}")
    out = flat @ w.T + b
    return (out[0] if single else out), (x.shape, flat, w)


def fully_connected_backward(dout, cache, need_input_grad=True):
    x_shape, flat, w = cache
    dout = np.asarray(dout).reshape(flat.shape[0], -1)
    dw = dout.T @ flat
    db = dout.sum(axis=0)
    dx = (dout @ w).reshape(x_shape) if need_input_grad else None
    return dx, dw, db


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    Accepts a single logit vector with an int label, or (N, K) logits with N labels.
    """
    logits = np.asarray(logits)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (z.shape[0],):
        raise ValueError(f"{labels.shape[0]} labels for {z.shape[0]} examples")
    if labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError(f"label outside [0, {z.shape[1]})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = float(np.mean(log_norm - shifted[rows, labels]))
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    grad /= z.shape[0]
    return loss, (grad[0] if single else grad)


# -- architecture ------------------------------------------------------------


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    stride: int = 0
    field: int = 0
    depth: int = 0
    pad: int = 0
    n: int = 0
    k: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    window: int = 0
    units: int = 0


@dataclass(frozen=True)
class NetworkSpec:
    architecture: str
    input_shape: tuple
    layers: tuple
    shapes: tuple = field(default=())

    @property
    def n_classes(self):
        return self.layers[-1].units

    @property
    def embedding_layer(self):
        """Name of the last fully connected layer before the output."""
        hidden = [layer.name for layer in self.layers if layer.kind == "fc"]
        return hidden[-1] if hidden else None

    def shape_of(self, name):
        for layer, shape in zip(self.layers, self.shapes):
            if layer.name == name:
                return shape
        raise KeyError(name)


_TOKEN = re.compile(r"([ICLPFO])(?:\(([^)]*)\))?")


def _int_args(text, position, count):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise ArchitectureError(f"expected integers, got '({text})'", position) from None
    if len(values) not in count:
        raise ArchitectureError(f"expected {' or '.join(map(str, count))} arguments, got {len(values)}",
                                position)
    if any(v <= 0 for v in values[:3]) or (len(values) > 3 and values[3] < 0):
        raise ArchitectureError(f"arguments must be positive, got ({text})", position)
    return values


def parse_architecture(s, input_shape=(205, 216, 1), n_classes=9,
                       lrn_params=None, pool_params=None):
    """Decode an architecture string into a `NetworkSpec` and infer every layer shape."""
    lrn_params = {**LRN_DEFAULTS, **(lrn_params or {})}
    pool_params = {**POOL_DEFAULTS, **(pool_params or {})}
    layers = []
    counters = {}
    pos = 0
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise ArchitectureError(f"unexpected character {s[pos]!r}", pos)
        letter, args = m.group(1), m.group(2)
        if (letter == "I") != (pos == 0):
            raise ArchitectureError("the input layer I must come first and only once", pos)
        if layers and layers[-1].kind == "output":
            raise ArchitectureError("nothing may follow the output layer O", pos)
        if args is not None and letter in "IL":
            raise ArchitectureError(f"{letter} takes no arguments", pos)
        counters[letter] = counters.get(letter, 0) + 1
        idx = counters[letter]
        if letter == "I":
            layers.append(LayerSpec("input", "input"))
        elif letter == "C":
            if args is None:
                raise ArchitectureError("C needs (stride,field,depth)", pos)
            vals = _int_args(args, pos, (3, 4))
            stride, fsize, depth = vals[:3]
            pad = vals[3] if len(vals) == 4 else max(0, (fsize - stride) // 2)
            if pad >= fsize:
                raise ArchitectureError(f"padding {pad} must be smaller than field {fsize}", pos)
            layers.append(LayerSpec("conv", f"conv{idx}", stride=stride, field=fsize,
                                    depth=depth, pad=pad))
        elif letter == "L":
            layers.append(LayerSpec("lrn", f"lrn{idx}", **lrn_params))
        elif letter == "P":
            vals = _int_args(args, pos, (2,)) if args is not None else None
            window, stride = vals if vals else (pool_params["window"], pool_params["stride"])
            layers.append(LayerSpec("pool", f"pool{idx}", window=window, stride=stride))
        elif letter == "F":
            if args is None:
                raise ArchitectureError("F needs (units)", pos)
            (units,) = _int_args(args, pos, (1,))
            layers.append(LayerSpec("fc", f"fc{idx}", units=units))
        else:
            units = _int_args(args, pos, (1,))[0] if args is not None else n_classes
            layers.append(LayerSpec("output", "output", units=units))
        pos = m.end()
    if not layers or layers[0].kind != "input":
        raise ArchitectureError("architecture must start with I", 0)
    if layers[-1].kind != "output":
        raise ArchitectureError("architecture must end with O", len(s))
    if layers[-1].units < 2:
        raise ArchitectureError("output layer needs at least 2 classes", len(s) - 1)
    spec = NetworkSpec(s, tuple(input_shape), tuple(layers))
    return replace(spec, shapes=tuple(infer_shapes(spec)))


def infer_shapes(spec):
    shape = tuple(spec.input_shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ShapeError(f"input shape must be (H, W, C) with positive extents, got {shape}")
    shapes = []
    for layer in spec.layers:
        if layer.kind == "conv":
            if len(shape) != 3:
                raise ShapeError(f"{layer.name}: convolution after a flat layer")
            h = conv_output_size(shape[0], layer.field, layer.stride, layer.pad)
            w = conv_output_size(shape[1], layer.field, layer.stride, layer.pad)
            if h < 1 or w < 1:
                raise ShapeError(f"{layer.name}: field {layer.field} too large for {shape[:2]}")
            shape = (h, w, layer.depth)
        elif layer.kind == "pool":
            if len(shape) != 3:
                raise ShapeError(f"{layer.name}: pooling after a flat layer")
            if layer.window > shape[0] or layer.window > shape[1]:
                raise ShapeError(f"{layer.name}: window {layer.window} larger than map {shape[:2]}")
            shape = (pool_output_size(shape[0], layer.window, layer.stride),
                     pool_output_size(shape[1], layer.window, layer.stride), shape[2])
        elif layer.kind == "lrn" and len(shape) != 3:
            raise ShapeError(f"{layer.name}: LRN after a flat layer")
        elif layer.kind in ("fc", "output"):
            shape = (layer.units,)
        shapes.append(shape)
    return shapes


def parameter_shapes(spec):
    """Ordered mapping parameter name -> shape."""
    shapes = {}
    prev = tuple(spec.input_shape)
    for layer, out in zip(spec.layers, spec.shapes):
        if layer.kind == "conv":
            shapes[f"{layer.name}.weight"] = (layer.field, layer.field, prev[2], layer.depth)
            shapes[f"{layer.name}.bias"] = (layer.depth,)
        elif layer.kind in ("fc", "output"):
            shapes[f"{layer.name}.weight"] = (layer.units, int(np.prod(prev)))
            shapes[f"{layer.name}.bias"] = (layer.units,)
        prev = out
    return shapes


def init_parameters(spec, seed=0, conv_std=0.01):
    """Gaussian init: conv weights std `conv_std`, dense weights std 1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(spec).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        elif name.startswith("conv"):
            params[name] = rng.normal(0.0, conv_std, shape)
        else:
            params[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[1]), shape)
    return params


# -- network -----------------------------------------------------------------


class Activations(dict):
    """Layer outputs by name; also carries the backward caches of one forward pass."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.caches = {}
        self.batched = True


class Network:
    """A `NetworkSpec` plus its parameter tensors."""

    def __init__(self, spec, params=None, seed=0, conv_std=0.01, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        params = params if params is not None else init_parameters(spec, seed, conv_std)
        self.params = {k: np.asarray(v, dtype=self.dtype) for k, v in params.items()}
        expected = parameter_shapes(spec)
        for name, shape in expected.items():
            if name not in self.params:
                raise ShapeError(f"missing parameter {name}")
            if tuple(self.params[name].shape) != shape:
                raise ShapeError(f"{name}: shape {self.params[name].shape}, spec wants {shape}")

    @classmethod
    def from_string(cls, architecture, input_shape, n_classes, seed=0, **kwargs):
        return cls(parse_architecture(architecture, input_shape, n_classes), seed=seed, **kwargs)

    def forward(self, x):
        """Run every layer in order. Returns (logits, activations)."""
        x = np.asarray(x, dtype=self.dtype)
        batched = x.ndim == 4
        if not batched:
            x = x[None] if x.ndim == 3 else x[None, :, :, None]
        if tuple(x.shape[1:]) != tuple(self.spec.input_shape):
            raise ShapeError(f"input shape {x.shape[1:]} does not match network {self.spec.input_shape}")
        acts = Activations()
        acts.batched = batched
        p = self.params
        out = x
        for layer in self.spec.layers:
            if layer.kind == "input":
                pass
            elif layer.kind == "conv":
                out, conv_cache = conv2d_forward(out, p[f"{layer.name}.weight"],
                                                 p[f"{layer.name}.bias"], layer.stride, layer.pad)
                out, relu_cache = relu_forward(out)
                acts.caches[layer.name] = (conv_cache, relu_cache)
            elif layer.kind == "lrn":
                out, acts.caches[layer.name] = lrn_forward(out, layer.n, layer.k, layer.alpha, layer.beta)
            elif layer.kind == "pool":
                out, acts.caches[layer.name] = max_pool_forward(out, layer.window, layer.stride)
            elif layer.kind == "fc":
                out, fc_cache = fully_connected_forward(out, p[f"{layer.name}.weight"],
                                                        p[f"{layer.name}.bias"])
                out, relu_cache = relu_forward(out)
                acts.caches[layer.name] = (fc_cache, relu_cache)
            else:
                out, acts.caches[layer.name] = fully_connected_forward(
                    out, p[f"{layer.name}.weight"], p[f"{layer.name}.bias"])
            acts[layer.name] = out if batched else out[0]
        return acts["output"], acts

    def backward(self, activations, loss_grad, need_input_grad=False):
        """Gradients of every parameter given d(loss)/d(logits).

        With `need_input_grad`, the gradient w.r.t. the input is returned under "input".
        """
        if not activations.caches:
            raise ValueError("activations carry no caches; run forward first")
        grad = np.asarray(loss_grad, dtype=self.dtype)
        if not activations.batched:
            grad = grad[None]
        grads = {}
        layers = self.spec.layers
        for pos in range(len(layers) - 1, 0, -1):
            layer = layers[pos]
            if layer.name not in activations.caches:
                raise ValueError(f"missing activation cache for {layer.name}")
            cache = activations.caches[layer.name]
            want_dx = need_input_grad or pos > 1
            if layer.kind == "conv":
                conv_cache, relu_cache = cache
                grad = relu_backward(grad, relu_cache)
                grad, grads[f"{layer.name}.weight"], grads[f"{layer.name}.bias"] = \
                    conv2d_backward(grad, conv_cache, want_dx)
            elif layer.kind == "lrn":
                grad = lrn_backward(grad, cache)
            elif layer.kind == "pool":
                grad = max_pool_backward(grad, cache)
            elif layer.kind == "fc":
                fc_cache, relu_cache = cache
                grad = relu_backward(grad, relu_cache)
                grad, grads[f"{layer.name}.weight"], grads[f"{layer.name}.bias"] = \
                    fully_connected_backward(grad, fc_cache, want_dx)
            else:
                grad, grads[f"{layer.name}.weight"], grads[f"{layer.name}.bias"] = \
                    fully_connected_backward(grad, cache, want_dx)
        if need_input_grad:
            grads["input"] = grad if activations.batched else grad[0]
        return {name: grads[name] for name in [*self.params, "input"] if name in grads}

    def loss_and_grads(self, x, labels, need_input_grad=False):
        logits, acts = self.forward(x)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(acts, dlogits, need_input_grad)

    def input_gradient(self, x, target_label):
        """d(cross-entropy against `target_label`)/d(input), shaped like `x`."""
        x = np.asarray(x, dtype=np.float64)
        logits, acts = self.forward(x)
        labels = target_label if x.ndim == 4 else [target_label]
        _, dlogits = softmax_cross_entropy(logits if x.ndim == 4 else logits[None], labels)
        if x.ndim != 4:
            dlogits = dlogits[0]
        grad = self.backward(acts, dlogits, need_input_grad=True)["input"]
        return grad.reshape(x.shape)

    def predict_proba(self, x, batch_size=64):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4:
            return softmax(self.forward(x)[0])
        return np.concatenate([softmax(self.forward(x[i:i + batch_size])[0])
                               for i in range(0, len(x), batch_size)])

    def copy(self, dtype=None):
        return Network(self.spec, {k: v.copy() for k, v in self.params.items()},
                       dtype=dtype or self.dtype)


class SGD:
    """Momentum SGD with L2 weight decay.

    v <- momentum * v - lr * (g + weight_decay * p);  p <- p + v
    """

    def __init__(self, lr=0.01, momentum=0.9, weight_decay=5e-4):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {}

    def step(self, params, grads):
        for name, p in params.items():
            v = self.velocity.get(name)
            if v is None:
                v = self.velocity[name] = np.zeros_like(p)
            v *= self.momentum
            v -= self.lr * (grads[name] + self.weight_decay * p)
            p += v
        return params


def sgd_step(params, grads, lr, momentum=0.0, weight_decay=0.0, velocity=None):
    """Functional form of one `SGD` update; returns (new_params, new_velocity)."""
    velocity = velocity or {}
    new_params, new_velocity = {}, {}
    for name, p in params.items():
        v = momentum * velocity.get(name, np.zeros_like(p)) - lr * (grads[name] + weight_decay * p)
        new_velocity[name] = v
        new_params[name] = p + v
    return new_params, new_velocity


# -- checkpoints ---------------------------------------------------------------


@dataclass
class Checkpoint:
    network: Network
    seed: int = 0
    epoch: int = 0
    config_hash: str = ""
    velocity: dict = field(default_factory=dict)
    classes: list = field(default_factory=list)

    @property
    def spec(self):
        return self.network.spec

    def save(self, stem):
        """Writes ``<stem>.tnsc`` (tensors) and ``<stem>.json`` (header)."""
        stem = Path(stem)
        tensors = dict(self.network.params)
        tensors.update({f"velocity/{k}": v for k, v in self.velocity.items()})
        save_container(stem.with_suffix(".tnsc"), tensors)
        spec = self.network.spec
        header = {
            "architecture": spec.architecture,
            "input_shape": list(spec.input_shape),
            "n_classes": spec.n_classes,
            "lrn": next(({k: getattr(layer, k) for k in LRN_DEFAULTS}
                         for layer in spec.layers if layer.kind == "lrn"), None),
            "dtype": self.network.dtype.name,
            "seed": self.seed,
            "epoch": self.epoch,
            "config_hash": self.config_hash,
            "classes": list(self.classes),
            "parameters": list(self.network.params),
            "optimizer_state": [f"velocity/{k}" for k in self.velocity],
        }
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        tensors = load_container(stem.with_suffix(".tnsc"))
        spec = parse_architecture(header["architecture"], tuple(header["input_shape"]),
                                  header["n_classes"], lrn_params=header.get("lrn"))
        params = {k: tensors[k].astype(np.float64) for k in header["parameters"]}
        velocity = {k.split("/", 1)[1]: tensors[k].astype(np.float64)
                    for k in header["optimizer_state"]}
        network = Network(spec, params, dtype=header.get("dtype", "float64"))
        return cls(network, header["seed"], header["epoch"],
                   header["config_hash"], velocity, header.get("classes", []))
