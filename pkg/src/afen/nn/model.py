"""The five-branch network: per-feature conv stacks with self-attention and
global max pooling, concatenated into a three-block dropout-dense head.

Branch stack (identical for every feature, heights differing):

    block1  32 filters, 5x5, stride (2,3), then 2x2 max pool
    block2  64 filters, 3x3, stride (2,2), then 2x2 max pool
    block3  96 filters, 2x2, stride (1,1)
    block4 128 filters, 2x2, stride (1,1)
    block5 128 filters, 2x2, stride (1,1)

For the 40x259 input this walks 40x259 -> (20,87) -> (10,44) -> (5,22)
-> (3,11) and stays (3,11) through blocks 3-5; pools clamp to 1 along
height-1 inputs. The expected chain is asserted when the model is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..features import FEATURE_ORDER, FEATURE_ROWS, N_FRAMES
from ..rng import RandomStream
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    GlobalMaxPool,
    MaxPool2D,
    ReLU,
    SelfAttention,
    _effective_pool,
    same_pad,
    softmax,
)


@dataclass(frozen=True)
class ConvBlockSpec:
    filters: int
    kernel: tuple[int, int]
    stride: tuple[int, int]
    pool: tuple[int, int] | None


DEFAULT_BLOCKS = (
    ConvBlockSpec(32, (5, 5), (2, 3), (2, 2)),
    ConvBlockSpec(64, (3, 3), (2, 2), (2, 2)),
    ConvBlockSpec(96, (2, 2), (1, 1), None),
    ConvBlockSpec(128, (2, 2), (1, 1), None),
    ConvBlockSpec(128, (2, 2), (1, 1), None),
)
DEFAULT_HEAD = (256, 128)
DEFAULT_INPUTS = {name: (FEATURE_ROWS[name], N_FRAMES) for name in FEATURE_ORDER}

# fixed input conditioning: the raw feature scales span five orders of
# magnitude across branches (rolloff is in Hz), which stalls optimization
INPUT_SCALES = {"mfcc": 0.01, "mel": 0.1, "chroma": 1.0, "rolloff": 1.0 / 11025.0, "zcr": 1.0}

# documented spatial chain for the 40x259 branch of the default architecture:
# conv1, pool1, conv2, pool2, conv3, conv4, conv5
MFCC_CHAIN = [(20, 87), (10, 44), (5, 22), (3, 11), (3, 11), (3, 11), (3, 11)]


def block_output_shape(shape: tuple[int, int], spec: ConvBlockSpec) -> list[tuple[int, int]]:
    """Spatial sizes after the conv (and pool, when present) of one block."""
    h, _, _ = same_pad(shape[0], spec.kernel[0], spec.stride[0])
    w, _, _ = same_pad(shape[1], spec.kernel[1], spec.stride[1])
    shapes = [(h, w)]
    if spec.pool is not None:
        ph = _effective_pool(h, spec.pool[0])
        pw = _effective_pool(w, spec.pool[1])
        shapes.append((-(-h // ph), -(-w // pw)))
    return shapes


class CnnModel:
    """Parameters and forward/backward passes for the full classifier."""

    def __init__(
        self,
        branch_inputs: dict[str, tuple[int, int]] | None = None,
        blocks: tuple[ConvBlockSpec, ...] = DEFAULT_BLOCKS,
        head: tuple[int, ...] = DEFAULT_HEAD,
        class_count: int = 8,
        dropout: float = 0.3,
        seed: int = 0,
        dtype=np.float32,
        input_scales: dict[str, float] | None = None,
    ):
        self.branch_inputs = dict(branch_inputs or DEFAULT_INPUTS)
        self.blocks = tuple(blocks)
        self.head_widths = tuple(head)
        self.class_count = class_count
        self.dropout = dropout
        self.seed = seed
        self.dtype = dtype
        self.input_scales = dict(input_scales or {name: 1.0 for name in self.branch_inputs})
        for name in self.branch_inputs:
            self.input_scales.setdefault(name, 1.0)
        stream = RandomStream(seed).substream("init")
        self.branches: dict[str, list] = {}
        self.branch_shapes: dict[str, list[tuple[int, int]]] = {}
        for name in self.branch_inputs:
            layers = []
            chain = []
            shape = self.branch_inputs[name]
            in_ch = 1
            for spec in self.blocks:
                layers.append(Conv2D(in_ch, spec.filters, spec.kernel, spec.stride,
                                     stream.substream(f"{name}/conv{len(layers)}"), dtype))
                layers.append(BatchNorm(spec.filters, dtype))
                layers.append(ReLU())
                shapes = block_output_shape(shape, spec)
                if spec.pool is not None:
                    layers.append(MaxPool2D(spec.pool))
                chain.extend(shapes)
                shape = shapes[-1]
                in_ch = spec.filters
            layers.append(SelfAttention(in_ch, stream.substream(f"{name}/attn"), dtype))
            layers.append(GlobalMaxPool())
            self.branches[name] = layers
            self.branch_shapes[name] = chain
        if self.branch_inputs == DEFAULT_INPUTS and self.blocks == DEFAULT_BLOCKS:
            if self.branch_shapes["mfcc"] != MFCC_CHAIN:
                raise ShapeMismatch(f"mfcc branch chain {self.branch_shapes['mfcc']} != {MFCC_CHAIN}")
        self.branch_dim = self.blocks[-1].filters
        concat = self.branch_dim * len(self.branch_inputs)
        self.head: list = []
        widths = [concat, *self.head_widths]
        for i in range(len(self.head_widths)):
            self.head.append(Dropout(dropout))
            self.head.append(Dense(widths[i], widths[i + 1], stream.substream(f"head/dense{i}"), dtype))
            self.head.append(ReLU())
        self.head.append(Dropout(dropout))
        self.head.append(Dense(widths[-1], class_count, stream.substream("head/out"), dtype))
        self.set_dropout_stream(RandomStream(seed).substream("dropout"))
        self._cache = None

    # --- plumbing ---

    def set_dropout_stream(self, stream: RandomStream) -> None:
        for layer in self.head:
            if isinstance(layer, Dropout):
                layer.stream = stream

    def _layer_items(self):
        for name in self.branch_inputs:
            for i, layer in enumerate(self.branches[name]):
                yield f"{name}/{i}", layer
        for i, layer in enumerate(self.head):
            yield f"head/{i}", layer

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for prefix, layer in self._layer_items():
            for pname, arr in layer.params():
                out.append((f"{prefix}/{pname}", arr))
        return out

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for prefix, layer in self._layer_items():
            for pname, arr in layer.grads():
                out.append((f"{prefix}/{pname}", arr))
        return out

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for prefix, layer in self._layer_items():
            if isinstance(layer, BatchNorm):
                for bname, arr in layer.buffers():
                    out.append((f"{prefix}/{bname}", arr))
        return out

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        return self.parameters() + self.buffers()

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in self.state_arrays():
            if name not in arrays:
                raise ShapeMismatch(f"missing parameter {name}")
            src = np.asarray(arrays[name], dtype=arr.dtype)
            if src.shape != arr.shape:
                raise ShapeMismatch(f"{name}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state_arrays()}

    def architecture(self) -> dict:
        return {
            "branch_inputs": {k: list(v) for k, v in self.branch_inputs.items()},
            "blocks": [
                {"filters": s.filters, "kernel": list(s.kernel),
                 "stride": list(s.stride), "pool": list(s.pool) if s.pool else None}
                for s in self.blocks
            ],
            "head": list(self.head_widths),
            "class_count": self.class_count,
            "dropout": self.dropout,
            "input_scales": {k: self.input_scales[k] for k in self.branch_inputs},
        }

    # --- compute ---

    def _check_batch(self, batch: dict[str, np.ndarray]) -> int:
        sizes = set()
        for name, (h, w) in self.branch_inputs.items():
            if name not in batch:
                raise ShapeMismatch(f"batch is missing branch input {name!r}")
            x = batch[name]
            if x.ndim != 4 or x.shape[1:] != (h, w, 1):
                raise ShapeMismatch(f"{name} input must be (n, {h}, {w}, 1), got {x.shape}")
            sizes.add(x.shape[0])
        if len(sizes) != 1:
            raise ShapeMismatch(f"branch batch sizes differ: {sorted(sizes)}")
        return sizes.pop()

    def forward(self, batch: dict[str, np.ndarray], train: bool = False) -> np.ndarray:
        """Class probabilities, shape (n, class_count)."""
        self._check_batch(batch)
        pooled = []
        for name in self.branch_inputs:
            x = np.asarray(batch[name], dtype=self.dtype) * self.dtype(self.input_scales[name])
            for layer in self.branches[name]:
                x = layer.forward(x, train)
            pooled.append(x)
        z = np.concatenate(pooled, axis=1)
        for layer in self.head:
            z = layer.forward(z, train)
        probs = softmax(z)
        if train:
            self._cache = probs
        return probs

    def backward(self, labels: np.ndarray) -> None:
        """Accumulate gradients of the mean cross-entropy after a train-mode forward."""
        probs = self._cache
        if probs is None:
            raise ShapeMismatch("backward requires a preceding train-mode forward")
        n = probs.shape[0]
        dz = probs.astype(self.dtype).copy()
        dz[np.arange(n), labels] -= 1.0
        dz /= n
        for layer in reversed(self.head):
            dz = layer.backward(dz)
        for b, name in enumerate(self.branch_inputs):
            dbranch = dz[:, b * self.branch_dim : (b + 1) * self.branch_dim]
            for layer in reversed(self.branches[name]):
                dbranch = layer.backward(dbranch)

    def clone_architecture(self) -> "CnnModel":
        return CnnModel(
            branch_inputs=self.branch_inputs,
            blocks=self.blocks,
            head=self.head_widths,
            class_count=self.class_count,
            dropout=self.dropout,
            seed=self.seed,
            dtype=self.dtype,
            input_scales=self.input_scales,
        )

    def copy(self) -> "CnnModel":
        dup = self.clone_architecture()
        dup.load_state(dict(self.snapshot()))
        return dup
