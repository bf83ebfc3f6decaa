"""A small trainable CNN: three stride-2 conv stages, global max pooling, one
fully connected head. Provides feature maps, logits, exact input gradients and
per-neuron activation ranges.

Feature maps are the post-ReLU output of the last conv stage. The monitored
neurons for range tracking are the pooled final features plus the logits.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ArchiveFormatError, DatasetError, DimensionError, SelectorError

INPUT_SIZE = 32
INPUT_CHANNELS = 3
STAGE_CHANNELS = (8, 16, 32)
KERNEL_SIZE = 3
STRIDE = 2
PAD = 1

_TCNN_MAGIC = b"TCNN"
_TCNN_VERSION = 1


@dataclass
class ConvStage:
    weights: np.ndarray  # (k, k, cin, cout)
    bias: np.ndarray     # (cout,)
    stride: int = STRIDE
    pad: int = PAD


@dataclass
class ToyCnn:
    stages: list
    fc_weights: np.ndarray  # (D, N)
    fc_bias: np.ndarray     # (N,)
    input_shape: tuple = (INPUT_SIZE, INPUT_SIZE, INPUT_CHANNELS)

    @property
    def n_classes(self):
        return self.fc_bias.shape[0]

    @property
    def feature_depth(self):
        return self.stages[-1].weights.shape[3]

    def parameters(self):
        params = []
        for s in self.stages:
            params.extend([s.weights, s.bias])
        params.extend([self.fc_weights, self.fc_bias])
        return params


@dataclass
class ClassifierTrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    optimizer: str = "adaptive"  # "adaptive" (Adam) or "sgd_momentum"
    batch_size: int = 16
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.epochs < 1:
            raise DatasetError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise DatasetError("learning rate must be positive")
        if self.optimizer not in ("adaptive", "sgd_momentum"):
            raise DatasetError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class NeuronRanges:
    """Per-neuron (min, max) observed on the training set.

    Monitored neurons: the D pooled final features followed by the N logits.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if self.mins.shape != self.maxs.shape or (self.mins > self.maxs).any():
            raise DimensionError("invalid neuron ranges")


def init_model(n_classes, seed=0):
    """He-normal seeded initialization of the fixed desk-scale architecture."""
    stages = []
    cin = INPUT_CHANNELS
    for i, cout in enumerate(STAGE_CHANNELS):
        rng = np.random.default_rng([seed, i])
        std = np.sqrt(2.0 / (KERNEL_SIZE * KERNEL_SIZE * cin))
        w = rng.normal(0.0, std, size=(KERNEL_SIZE, KERNEL_SIZE, cin, cout))
        stages.append(ConvStage(weights=w, bias=np.zeros(cout)))
        cin = cout
    rng = np.random.default_rng([seed, len(STAGE_CHANNELS)])
    d = STAGE_CHANNELS[-1]
    fc_w = rng.normal(0.0, np.sqrt(1.0 / d), size=(d, n_classes))
    return ToyCnn(stages=stages, fc_weights=fc_w, fc_bias=np.zeros(n_classes))


def _check_input(model, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise DimensionError(f"input shape {x.shape} != {model.input_shape}")
    return x


def _trace(model, x):
    """Forward pass keeping every intermediate needed for backprop."""
    acts = [x]      # post-activation per stage, acts[0] = input
    pres = []       # pre-activation per stage
    for s in model.stages:
        z = _kernels.conv2d_forward(acts[-1], s.weights, s.bias, s.stride, s.pad)
        pres.append(z)
        acts.append(np.maximum(z, 0.0))
    fmap = acts[-1]
    d = fmap.shape[2]
    flat = fmap.reshape(-1, d)
    pool_idx = np.argmax(flat, axis=0)  # first occurrence wins ties
    pooled = flat[pool_idx, np.arange(d)]
    logits = pooled @ model.fc_weights + model.fc_bias
    return acts, pres, pool_idx, pooled, logits


def forward(model, x):
    """Return (feature map, logits) for one input image."""
    x = _check_input(model, x)
    acts, _, _, _, logits = _trace(model, x)
    return acts[-1], logits


def _backprop_to_input(model, acts, pres, dfmap):
    g = dfmap
    for i in range(len(model.stages) - 1, -1, -1):
        s = model.stages[i]
        g = g * (pres[i] > 0.0)
        h, w, _ = acts[i].shape
        g = _kernels.conv2d_input_grad(g, s.weights, s.stride, s.pad, h, w)
    return g


def input_gradient(model, x, selector):
    """Gradient of a scalar head w.r.t. the input image.

    selector: an int selects that logit; a length-D vector selects the
    max-correlation detector score of that kernel on the feature map.
    """
    x = _check_input(model, x)
    acts, pres, pool_idx, _, _ = _trace(model, x)
    fmap = acts[-1]
    h, w, d = fmap.shape

    if isinstance(selector, (int, np.integer)) and not isinstance(selector, bool):
        if not 0 <= selector < model.n_classes:
            raise SelectorError(f"logit index {selector} out of range")
        dpooled = model.fc_weights[:, int(selector)]
        dfmap = np.zeros_like(fmap)
        flat = dfmap.reshape(-1, d)
        flat[pool_idx, np.arange(d)] = dpooled
    else:
        kernel = np.asarray(selector, dtype=np.float64)
        if kernel.ndim != 1:
            raise SelectorError("selector must be a logit index or a 1-D kernel")
        if kernel.shape[0] != d:
            raise DimensionError(f"kernel length {kernel.shape[0]} != depth {d}")
        corr = _kernels.correlate_maps(fmap, kernel[None, :])[0]
        idx = int(np.argmax(corr))
        dfmap = np.zeros_like(fmap)
        dfmap[idx // w, idx % w, :] = kernel
    return _backprop_to_input(model, acts, pres, dfmap)


def _param_gradients(model, x, label):
    """Softmax cross-entropy gradients for one labeled sample."""
    acts, pres, pool_idx, pooled, logits = _trace(model, x)
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    dlogits = p
    dlogits[label] -= 1.0

    grads = []
    gfcw = np.outer(pooled, dlogits)
    gfcb = dlogits
    dpooled = model.fc_weights @ dlogits

    fmap = acts[-1]
    d = fmap.shape[2]
    dfmap = np.zeros_like(fmap)
    flat = dfmap.reshape(-1, d)
    flat[pool_idx, np.arange(d)] = dpooled

    g = dfmap
    stage_grads = []
    for i in range(len(model.stages) - 1, -1, -1):
        s = model.stages[i]
        g = g * (pres[i] > 0.0)
        gw, gb = _kernels.conv2d_param_grad(acts[i], g, s.stride, s.pad, KERNEL_SIZE)
        stage_grads.append((gw, gb))
        if i > 0:
            h, w, _ = acts[i].shape
            g = _kernels.conv2d_input_grad(g, s.weights, s.stride, s.pad, h, w)
    for gw, gb in reversed(stage_grads):
        grads.extend([gw, gb])
    grads.extend([gfcw, gfcb])
    return grads


def train_classifier(images, labels, config=None):
    """Train on a labeled image set; deterministic for a fixed seed."""
    config = config or ClassifierTrainConfig()
    if len(images) == 0:
        raise DatasetError("empty training set")
    labels = [int(l) for l in labels]
    if len(labels) != len(images):
        raise DatasetError("images and labels differ in length")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DatasetError("need at least 2 classes")
    if min(classes) < 0:
        raise DatasetError("negative label")
    n_classes = max(classes) + 1

    model = init_model(n_classes, seed=config.seed)
    params = model.parameters()
    xs = [_check_input(model, im) for im in images]

    # Adam moments / SGD velocity, one slot per parameter array.
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, 1, epoch]).permutation(len(xs))
        for start in range(0, len(xs), config.batch_size):
            batch = order[start : start + config.batch_size]
            acc = [np.zeros_like(p) for p in params]
            for idx in batch:
                grads = _param_gradients(model, xs[idx], labels[idx])
                for a, g in zip(acc, grads):
                    a += g
            for a in acc:
                a /= len(batch)
            step += 1
            if config.optimizer == "adaptive":
                for p, a, v1, v2 in zip(params, acc, m1, m2):
                    v1 *= beta1
                    v1 += (1 - beta1) * a
                    v2 *= beta2
                    v2 += (1 - beta2) * a * a
                    mh = v1 / (1 - beta1**step)
                    vh = v2 / (1 - beta2**step)
                    p -= config.learning_rate * mh / (np.sqrt(vh) + eps)
            else:
                for p, a, v1 in zip(params, acc, m1):
                    v1 *= config.momentum
                    v1 += a
                    p -= config.learning_rate * v1
    return model


def accuracy(model, images, labels):
    hits = 0
    for im, lab in zip(images, labels):
        _, logits = forward(model, im)
        hits += int(np.argmax(logits)) == int(lab)
    return hits / len(images)


def global_max_pool(fmap):
    """Channel-wise spatial maximum of an (H, W, D) feature map."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3 or fmap.size == 0:
        raise DimensionError("feature map must be non-empty (H, W, D)")
    return fmap.reshape(-1, fmap.shape[2]).max(axis=0)


def monitored_activations(model, x):
    """Pooled final features followed by logits, the fNRD-monitored neurons."""
    x = _check_input(model, x)
    _, _, _, pooled, logits = _trace(model, x)
    return np.concatenate([pooled, logits])


def fit_neuron_ranges(model, images):
    """Elementwise min/max of monitored activations over a training set."""
    if len(images) == 0:
        raise DatasetError("empty set")
    acts = np.stack([monitored_activations(model, im) for im in images])
    return NeuronRanges(mins=acts.min(axis=0), maxs=acts.max(axis=0))


def save_model(model, path):
    """Checkpoint: magic TCNN, version byte, little-endian header + f64 params."""
    with open(path, "wb") as f:
        f.write(_TCNN_MAGIC)
        f.write(struct.pack("<B", _TCNN_VERSION))
        h, w, c = model.input_shape
        f.write(struct.pack("<4I", h, w, c, len(model.stages)))
        for s in model.stages:
            k, _, cin, cout = s.weights.shape
            f.write(struct.pack("<5I", k, cin, cout, s.stride, s.pad))
        f.write(struct.pack("<I", model.n_classes))
        for p in model.parameters():
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _TCNN_MAGIC:
        raise ArchiveFormatError("bad magic", offset=0)
    if data[4] != _TCNN_VERSION:
        raise ArchiveFormatError(f"unsupported version {data[4]}", offset=4)
    off = 5
    h, w, c, n_stages = struct.unpack_from("<4I", data, off)
    off += 16
    dims = []
    for _ in range(n_stages):
        k, cin, cout, stride, pad = struct.unpack_from("<5I", data, off)
        off += 20
        dims.append((k, cin, cout, stride, pad))
    (n_classes,) = struct.unpack_from("<I", data, off)
    off += 4

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        if off + 8 * n > len(data):
            raise ArchiveFormatError("truncated parameters", offset=off)
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        return arr.copy()

    stages = []
    for k, cin, cout, stride, pad in dims:
        wgt = take((k, k, cin, cout))
        bias = take((cout,))
        stages.append(ConvStage(weights=wgt, bias=bias, stride=stride, pad=pad))
    d = dims[-1][2]
    fc_w = take((d, n_classes))
    fc_b = take((n_classes,))
    if off != len(data):
        raise ArchiveFormatError("trailing bytes", offset=off)
    return ToyCnn(stages=stages, fc_weights=fc_w, fc_bias=fc_b, input_shape=(h, w, c))
