"""On-disk artifact formats.

Feature cache:  magic "AFEN", u16 version, u8 kind tag, u32 rows, u32 cols,
                then row-major little-endian float32 values.
Network bundle: magic "AFENMODL", u16 version, length-prefixed architecture
                JSON, then named parameter blobs (name, dims, f32 LE).
Forest file:    magic "AFENGBDT", u16 version, length-prefixed config JSON,
                f32 base scores, then per-tree preorder nodes
                (tag byte, f32 leaf weight / u16 feature + f32 threshold).

All integers little-endian. Writers are deterministic byte for byte given
identical inputs, which is what makes rerun verification possible.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CacheFormatError, IoFailure
from .gbdt import BoostConfig, GbdtModel, TreeNode
from .nn.model import CnnModel, ConvBlockSpec

FEATURE_MAGIC = b"AFEN"
MODEL_MAGIC = b"AFENMODL"
FOREST_MAGIC = b"AFENGBDT"
FORMAT_VERSION = 1

KIND_CODES = {"mfcc": 1, "mel": 2, "chroma": 3, "rolloff": 4, "zcr": 5, "vectors": 6}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

_NODE_LEAF = 0
_NODE_SPLIT_LEFT = 1  # default direction left
_NODE_SPLIT_RIGHT = 2


def _write(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# --- feature cache ---

def write_feature_matrix(path: str | Path, kind: str, values: np.ndarray) -> None:
    values = np.asarray(values)
    if kind not in KIND_CODES:
        raise CacheFormatError(f"unknown feature kind {kind!r}")
    if values.ndim != 2:
        raise CacheFormatError("feature matrices are 2-D")
    rows, cols = values.shape
    header = FEATURE_MAGIC + struct.pack("<HBII", FORMAT_VERSION, KIND_CODES[kind], rows, cols)
    _write(path, header + values.astype("<f4").tobytes())


def read_feature_matrix(path: str | Path) -> tuple[str, np.ndarray]:
    data = _read(path)
    if len(data) < 15 or data[:4] != FEATURE_MAGIC:
        raise CacheFormatError(f"{path}: not a feature cache file")
    version, code, rows, cols = struct.unpack_from("<HBII", data, 4)
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{path}: cache version {version} != {FORMAT_VERSION}")
    if code not in CODE_KINDS:
        raise CacheFormatError(f"{path}: unknown kind tag {code}")
    payload = data[15:]
    if len(payload) != rows * cols * 4:
        raise CacheFormatError(f"{path}: payload is {len(payload)} bytes, expected {rows * cols * 4}")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return CODE_KINDS[code], values.astype(np.float32)


# --- network bundle ---

def save_cnn_model(path: str | Path, model: CnnModel) -> None:
    arch = json.dumps(model.architecture(), sort_keys=True).encode("utf-8")
    parts = [MODEL_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(arch)), arch]
    arrays = model.state_arrays()
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays:
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4").tobytes())
    _write(path, b"".join(parts))


def load_cnn_model(path: str | Path, dtype=np.float32) -> CnnModel:
    data = _read(path)
    if data[:8] != MODEL_MAGIC:
        raise CacheFormatError(f"{path}: not a network bundle")
    version, arch_len = struct.unpack_from("<HI", data, 8)
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{path}: bundle version {version} != {FORMAT_VERSION}")
    pos = 14
    arch = json.loads(data[pos : pos + arch_len].decode("utf-8"))
    pos += arch_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += size * 4
    model = CnnModel(
        branch_inputs={k: tuple(v) for k, v in arch["branch_inputs"].items()},
        blocks=tuple(
            ConvBlockSpec(b["filters"], tuple(b["kernel"]), tuple(b["stride"]),
                          tuple(b["pool"]) if b["pool"] else None)
            for b in arch["blocks"]
        ),
        head=tuple(arch["head"]),
        class_count=arch["class_count"],
        dropout=arch["dropout"],
        dtype=dtype,
        input_scales=arch["input_scales"],
    )
    model.load_state(arrays)
    return model


# --- forest file ---

def _serialize_node(node: TreeNode, out: list[bytes]) -> None:
    if node.is_leaf:
        out.append(struct.pack("<Bf", _NODE_LEAF, node.weight))
        return
    tag = _NODE_SPLIT_LEFT if node.default_left else _NODE_SPLIT_RIGHT
    out.append(struct.pack("<BHf", tag, node.feature, node.threshold))
    _serialize_node(node.left, out)
    _serialize_node(node.right, out)


def _count_nodes(node: TreeNode) -> int:
    if node.is_leaf:
        return 1
    return 1 + _count_nodes(node.left) + _count_nodes(node.right)


def save_gbdt_model(path: str | Path, model: GbdtModel) -> None:
    cfg = json.dumps(
        {
            "n_rounds": model.config.n_rounds,
            "learning_rate": model.config.learning_rate,
            "max_depth": model.config.max_depth,
            "min_child_weight": model.config.min_child_weight,
            "reg_lambda": model.config.reg_lambda,
            "gamma": model.config.gamma,
            "class_count": model.config.class_count,
            "seed": model.config.seed,
        },
        sort_keys=True,
    ).encode("utf-8")
    parts = [FOREST_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(cfg)), cfg]
    parts.append(np.asarray(model.base_score, dtype="<f4").tobytes())
    flat_trees = [t for round_trees in model.trees for t in round_trees]
    parts.append(struct.pack("<I", len(flat_trees)))
    for tree in flat_trees:
        parts.append(struct.pack("<I", _count_nodes(tree)))
        nodes: list[bytes] = []
        _serialize_node(tree, nodes)
        parts.extend(nodes)
    _write(path, b"".join(parts))


def _parse_node(data: bytes, pos: int) -> tuple[TreeNode, int]:
    (tag,) = struct.unpack_from("<B", data, pos)
    pos += 1
    if tag == _NODE_LEAF:
        (weight,) = struct.unpack_from("<f", data, pos)
        return TreeNode(is_leaf=True, weight=weight), pos + 4
    if tag not in (_NODE_SPLIT_LEFT, _NODE_SPLIT_RIGHT):
        raise CacheFormatError(f"bad node tag {tag}")
    feature, threshold = struct.unpack_from("<Hf", data, pos)
    pos += 6
    left, pos = _parse_node(data, pos)
    right, pos = _parse_node(data, pos)
    return (
        TreeNode(
            is_leaf=False,
            feature=feature,
            threshold=threshold,
            default_left=tag == _NODE_SPLIT_LEFT,
            left=left,
            right=right,
        ),
        pos,
    )


def load_gbdt_model(path: str | Path) -> GbdtModel:
    data = _read(path)
    if data[:8] != FOREST_MAGIC:
        raise CacheFormatError(f"{path}: not a forest file")
    version, cfg_len = struct.unpack_from("<HI", data, 8)
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{path}: forest version {version} != {FORMAT_VERSION}")
    pos = 14
    cfg = json.loads(data[pos : pos + cfg_len].decode("utf-8"))
    pos += cfg_len
    config = BoostConfig(**cfg)
    k = config.class_count
    base = np.frombuffer(data, dtype="<f4", count=k, offset=pos).astype(np.float64)
    pos += 4 * k
    (n_trees,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if n_trees % k:
        raise CacheFormatError(f"{path}: {n_trees} trees is not a multiple of {k} classes")
    flat: list[TreeNode] = []
    for _ in range(n_trees):
        (_n_nodes,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tree, pos = _parse_node(data, pos)
        flat.append(tree)
    trees = [flat[i : i + k] for i in range(0, n_trees, k)]
    return GbdtModel(config=config, base_score=base, trees=trees)


# --- text artifacts ---

def write_history_csv(path: str | Path, rows: list[dict], columns: list[str]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for col in columns:
            v = row[col]
            cells.append(str(v) if isinstance(v, int) else repr(float(v)))
        lines.append(",".join(cells))
    _write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def write_json(path: str | Path, payload: dict) -> None:
    _write(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(_read(path)).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
