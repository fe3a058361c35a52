"""MLP and small CNN classifiers with explicit forward/backward passes."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from . import layers as L

DEFAULT_LABELS = ("happiness", "neutral")
DEFAULT_HIDDEN = (1024, 512, 256)
RELU, SOFTMAX = "relu", "softmax"


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray   # (out,)
    activation: str = RELU

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


class Model:
    """Shared plumbing: parameter access, dtype casting, prediction."""

    kind: str
    class_labels: list

    def params(self) -> list:
        raise NotImplementedError

    def forward(self, x, train: bool = False, rng=None, masks=None) -> np.ndarray:
        raise NotImplementedError

    def sample_masks(self, n: int, rng: np.random.Generator) -> list:
        raise NotImplementedError

    def loss_and_grads(self, x, labels, masks=None):
        """Mean cross-entropy over the batch and its gradient for every parameter.

        ``masks`` are the dropout multipliers of the paired forward pass (None
        means no dropout).
        """
        loss, grads, _ = self.backprop(x, labels, masks)
        return loss, grads

    def backprop(self, x, labels, masks=None):
        """Like :meth:`loss_and_grads` but also returns the batch probabilities."""
        x = np.asarray(x).astype(self.dtype, copy=False)
        labels = np.asarray(labels, dtype=np.intp)
        if len(x) == 0 or len(x) != len(labels):
            raise DimensionMismatch("batch must be nonempty with one label per row")
        return self._backprop(x, labels, masks)

    @property
    def dtype(self):
        return self.params()[0].dtype

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params()))

    def astype(self, dtype) -> "Model":
        m = copy.deepcopy(self)
        m._set_params([p.astype(dtype) for p in self.params()])
        return m

    def _set_params(self, values: Sequence[np.ndarray]) -> None:
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        return self.forward(x, train=False)

    def _run(self, x, train: bool, rng, masks):
        single = np.ndim(x) == self.input_ndim
        xb = np.asarray(x)[None] if single else np.asarray(x)
        xb = xb.astype(self.dtype, copy=False)
        if train and masks is None:
            if rng is None:
                raise ValueError("train mode needs an rng or explicit dropout masks")
            masks = self.sample_masks(len(xb), rng)
        elif not train:
            masks = None
        probs, _ = self._forward(xb, masks)
        return probs[0] if single else probs


class MlpModel(Model):
    """Dense relu stack with a softmax output and inverted dropout after each hidden layer."""

    kind = "mlp"
    input_ndim = 1

    def __init__(self, layers: list, dropout_rates: Sequence[float],
                 class_labels: Sequence[str] = DEFAULT_LABELS):
        self.layers = list(layers)
        self.dropout_rates = [float(r) for r in dropout_rates]
        self.class_labels = list(class_labels)
        if len(self.dropout_rates) != len(self.layers) - 1:
            raise ValueError("need one dropout rate per hidden layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise DimensionMismatch(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.layers[-1].activation != SOFTMAX or any(
                l.activation != RELU for l in self.layers[:-1]):
            raise ValueError("hidden layers must be relu and the output layer softmax")
        if self.layers[-1].out_dim != len(self.class_labels):
            raise DimensionMismatch("output width must equal the number of class labels")
        if not all(0.0 <= r < 1.0 for r in self.dropout_rates):
            raise ValueError("dropout rates must lie in [0, 1)")

    @classmethod
    def create(cls, input_dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
               class_labels: Sequence[str] = DEFAULT_LABELS, dropout: float = 0.5,
               seed: int = 0, dtype=np.float32) -> "MlpModel":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        dims = [input_dim, *hidden, len(class_labels)]
        layers = []
        for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
            act = SOFTMAX if i == len(dims) - 2 else RELU
            w = L.glorot_uniform(rng, (n_out, n_in), n_in, n_out, dtype)
            layers.append(DenseLayer(w, np.zeros(n_out, dtype=dtype), act))
        return cls(layers, [dropout] * len(hidden), class_labels)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def dims(self) -> list:
        return [self.input_dim] + [l.out_dim for l in self.layers]

    def params(self) -> list:
        out = []
        for l in self.layers:
            out += [l.weights, l.biases]
        return out

    def param_names(self) -> list:
        names = []
        for i in range(len(self.layers)):
            names += [f"dense{i}.weights", f"dense{i}.biases"]
        return names

    def _set_params(self, values):
        for i, l in enumerate(self.layers):
            l.weights, l.biases = values[2 * i], values[2 * i + 1]

    def sample_masks(self, n, rng):
        return [L.dropout_mask(rng, (n, l.out_dim), r, self.dtype)
                for l, r in zip(self.layers[:-1], self.dropout_rates)]

    def _forward(self, x, masks):
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"model expects {self.input_dim} inputs, got shape {x.shape}")
        acts = [x]
        h = x
        for i, l in enumerate(self.layers[:-1]):
            h = L.relu(L.dense_forward(h, l.weights, l.biases))
            if masks is not None and masks[i] is not None:
                h = h * masks[i]
            acts.append(h)
        out = self.layers[-1]
        probs = L.softmax(L.dense_forward(h, out.weights, out.biases))
        return probs, acts

    def forward(self, x, train=False, rng=None, masks=None):
        return self._run(x, train, rng, masks)

    def _backprop(self, x, labels, masks):
        probs, acts = self._forward(x, masks)
        loss = L.mean_cross_entropy(probs, labels)
        grads = [None] * (2 * len(self.layers))
        dz = L.softmax_ce_grad(probs, labels)
        for i in range(len(self.layers) - 1, -1, -1):
            l = self.layers[i]
            dx, grads[2 * i], grads[2 * i + 1] = L.dense_backward(acts[i], l.weights, dz)
            if i > 0:
                if masks is not None and masks[i - 1] is not None:
                    dx = dx * masks[i - 1]
                # acts[i] > 0 exactly where the relu (and mask) let the signal through
                dz = dx * (acts[i] > 0)
        return loss, grads, probs

    def describe(self) -> str:
        lines = [f"MLP  {' -> '.join(map(str, self.dims))}"]
        for i, (l, r) in enumerate(zip(self.layers, self.dropout_rates + [None])):
            drop = f", dropout {r:g}" if r else ""
            lines.append(f"  dense{i}: {l.in_dim} -> {l.out_dim} {l.activation}{drop}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CnnShapes:
    grid_size: int
    conv: tuple
    pool: tuple
    flattened: int


def cnn_shapes(grid_size: int, filters: int = 32, kernel: int = 3, pool: int = 2) -> CnnShapes:
    c = grid_size - kernel + 1
    p = c // pool
    return CnnShapes(grid_size, (c, c, filters), (p, p, filters), p * p * filters)


class CnnModel(Model):
    """conv(3x3, relu) -> maxpool(2x2) -> dropout -> flatten -> dense softmax."""

    kind = "cnn"
    input_ndim = 2

    def __init__(self, conv_w: np.ndarray, conv_b: np.ndarray, dense_w: np.ndarray,
                 dense_b: np.ndarray, grid_size: int, dropout_rate: float = 0.25,
                 pool: int = 2, class_labels: Sequence[str] = DEFAULT_LABELS):
        self.conv_w, self.conv_b = conv_w, conv_b
        self.dense_w, self.dense_b = dense_w, dense_b
        self.grid_size = int(grid_size)
        self.dropout_rate = float(dropout_rate)
        self.pool = int(pool)
        self.class_labels = list(class_labels)
        shapes = self.shapes
        if dense_w.shape != (len(self.class_labels), shapes.flattened):
            raise DimensionMismatch(
                f"dense weights {dense_w.shape} do not match flattened size {shapes.flattened}")

    @classmethod
    def create(cls, grid_size: int = 350, filters: int = 32, kernel: int = 3,
               class_labels: Sequence[str] = DEFAULT_LABELS, dropout: float = 0.25,
               seed: int = 0, dtype=np.float32) -> "CnnModel":
        rng = np.random.default_rng(seed)
        flat = cnn_shapes(grid_size, filters, kernel).flattened
        k = len(class_labels)
        conv_w = L.glorot_uniform(rng, (filters, kernel, kernel), kernel * kernel,
                                  kernel * kernel * filters, dtype)
        dense_w = L.glorot_uniform(rng, (k, flat), flat, k, dtype)
        return cls(conv_w, np.zeros(filters, dtype), dense_w, np.zeros(k, dtype),
                   grid_size, dropout, class_labels=class_labels)

    @property
    def filters(self) -> int:
        return self.conv_w.shape[0]

    @property
    def kernel(self) -> int:
        return self.conv_w.shape[1]

    @property
    def shapes(self) -> CnnShapes:
        return cnn_shapes(self.grid_size, self.filters, self.kernel, self.pool)

    @property
    def input_dim(self) -> int:
        return self.grid_size * self.grid_size

    def params(self):
        return [self.conv_w, self.conv_b, self.dense_w, self.dense_b]

    def param_names(self):
        return ["conv.weights", "conv.biases", "dense.weights", "dense.biases"]

    def _set_params(self, values):
        self.conv_w, self.conv_b, self.dense_w, self.dense_b = values

    def sample_masks(self, n, rng):
        return [L.dropout_mask(rng, (n, *self.shapes.pool), self.dropout_rate, self.dtype)]

    def _forward(self, x, masks):
        g = self.grid_size
        if x.ndim != 3 or x.shape[1:] != (g, g):
            raise DimensionMismatch(f"model expects {g}x{g} grids, got shape {x.shape[1:]}")
        patches = L.conv_patches(x, self.kernel)
        z = L.conv_forward(patches, self.conv_w, self.conv_b)
        a = L.relu(z)
        pooled, arg = L.maxpool_forward(a, self.pool)
        if masks is not None and masks[0] is not None:
            pooled = pooled * masks[0]
        flat = pooled.reshape(len(x), -1)
        probs = L.softmax(L.dense_forward(flat, self.dense_w, self.dense_b))
        return probs, (patches, a, arg, flat)

    def forward(self, x, train=False, rng=None, masks=None):
        return self._run(x, train, rng, masks)

    def _backprop(self, x, labels, masks):
        probs, (patches, a, arg, flat) = self._forward(x, masks)
        loss = L.mean_cross_entropy(probs, labels)
        dz = L.softmax_ce_grad(probs, labels)
        dflat, d_dense_w, d_dense_b = L.dense_backward(flat, self.dense_w, dz)
        dpool = dflat.reshape(len(x), *self.shapes.pool)
        if masks is not None and masks[0] is not None:
            dpool = dpool * masks[0]
        da = L.maxpool_backward(dpool, arg, a.shape, self.pool)
        dconv = da * (a > 0)
        d_conv_w, d_conv_b = L.conv_backward(patches, dconv, self.conv_w.shape)
        return loss, [d_conv_w, d_conv_b, d_dense_w, d_dense_b], probs

    def describe(self) -> str:
        s = self.shapes
        return "\n".join([
            f"CNN  grid {self.grid_size}x{self.grid_size}",
            f"  conv: {self.filters} filters {self.kernel}x{self.kernel} relu -> {s.conv}",
            f"  maxpool {self.pool}x{self.pool} -> {s.pool}, dropout {self.dropout_rate:g}",
            f"  dense: {s.flattened} -> {self.n_classes} softmax",
        ])


def mlp_forward(model: MlpModel, x, mode: str = "infer", rng=None) -> np.ndarray:
    return model.forward(x, train=(mode == "train"), rng=rng)


def cnn_forward(model: CnnModel, grid, mode: str = "infer", rng=None) -> np.ndarray:
    return model.forward(grid, train=(mode == "train"), rng=rng)


def backward(model: Model, x, labels, masks=None):
    """Gradient of the mean batch cross-entropy; returns (loss, grads)."""
    return model.loss_and_grads(x, labels, masks)
