"""Binary model files.

Layout (little-endian)::

    "OADF"  u16 version  u16 0  u32 header_len  header JSON  zero padding to 8
    u32 n_trees  u32 n_classes
    per tree:  u64 n_nodes, then node records in preorder
        split: u8 0, 3x pad, u32 feature, f64 threshold
        leaf:  u8 1, 7x pad, n_classes x f64 class_dist, f64 mean_loc, u64 n_samples
    u64 CRC-64/XZ of everything before it

Every float starts at a multiple of 8 bytes from the file start.
"""
from __future__ import annotations

import json
import struct

import numpy as np
from fastcrc import crc64

from .detector import OnlineActionDetector
from .exceptions import FormatError
from .forest import ContextForestClassifier
from .tree import Tree

MAGIC = b"OADF"
VERSION = 1
_SPLIT, _LEAF = 0, 1
_SPLIT_REC = struct.Struct("<B3xId")


class ChecksumError(FormatError):
    pass


def _pad8(n):
    return (-n) % 8


def _header(model):
    forest = model.forest_
    params = forest.get_params()
    params.pop("n_jobs", None)
    return {
        "forest": params,
        "objective_weights": forest.params_.objective_weights,
        "classes": [int(c) for c in forest.classes_],
        "n_joints": int(model.n_joints_),
        "n_features": int(forest.n_features_in_),
        "deriv_lag": int(model.deriv_lag),
        "beta": None if getattr(model, "beta_", None) is None else float(model.beta_),
    }


def _tree_bytes(tree, n_classes):
    leaf_rec = struct.Struct(f"<B7x{n_classes}ddQ")
    out = bytearray(struct.pack("<Q", tree.n_nodes))
    feature, threshold, left = tree._f, tree._t, tree._l
    for i in range(tree.n_nodes):
        if left[i] >= 0:
            out += _SPLIT_REC.pack(_SPLIT, feature[i], threshold[i])
        else:
            out += leaf_rec.pack(_LEAF, *tree.value[i].tolist(), float(tree.mean_loc[i]),
                                 int(tree.n_samples[i]))
    return out


def serialize(model):
    """Encode a fitted :class:`OnlineActionDetector` as bytes."""
    header = json.dumps(_header(model), sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray(MAGIC + struct.pack("<HHI", VERSION, 0, len(header)) + header)
    out += b"\0" * _pad8(len(out))
    trees = model.forest_.estimators_
    n_classes = model.forest_.classes_.size
    out += struct.pack("<II", len(trees), n_classes)
    for tree in trees:
        out += _tree_bytes(tree, n_classes)
    out += struct.pack("<Q", crc64.xz(bytes(out)))
    return bytes(out)


def _read_tree(buf, pos, n_classes, end):
    leaf_rec = struct.Struct(f"<B7x{n_classes}ddQ")
    (n_nodes,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    feature = np.full(n_nodes, -1, dtype=np.int64)
    threshold = np.zeros(n_nodes)
    left = np.full(n_nodes, -1, dtype=np.int64)
    right = np.full(n_nodes, -1, dtype=np.int64)
    value = np.zeros((n_nodes, n_classes))
    mean_loc = np.zeros(n_nodes)
    n_samples = np.zeros(n_nodes, dtype=np.int64)
    pending = []  # split nodes still waiting for their right child
    for i in range(n_nodes):
        if pos >= end:
            raise FormatError("truncated tree record")
        if i > 0:
            parent = i - 1
            if left[parent] == -2:
                left[parent] = i
            else:
                right[pending.pop()] = i
        tag = buf[pos]
        if tag == _SPLIT:
            if pos + _SPLIT_REC.size > end:
                raise FormatError("truncated split record")
            _, feature[i], threshold[i] = _SPLIT_REC.unpack_from(buf, pos)
            pos += _SPLIT_REC.size
            left[i] = -2
            pending.append(i)
        elif tag == _LEAF:
            if pos + leaf_rec.size > end:
                raise FormatError("truncated leaf record")
            fields = leaf_rec.unpack_from(buf, pos)
            value[i] = fields[1:1 + n_classes]
            mean_loc[i] = fields[1 + n_classes]
            n_samples[i] = fields[2 + n_classes]
            pos += leaf_rec.size
        else:
            raise FormatError(f"unknown node tag {tag}")
    if pending or np.any(left == -2):
        raise FormatError("tree records end before every split has two children")
    return Tree(feature, threshold, left, right, value, mean_loc, n_samples), pos


def deserialize(data):
    """Decode bytes produced by :func:`serialize`."""
    buf = memoryview(bytes(data))
    if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
        raise FormatError("not an OADF model file (bad magic)")
    if len(buf) < 12 + 8:
        raise FormatError("truncated model file")
    version, _, header_len = struct.unpack_from("<HHI", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported model format version {version} (expected {VERSION})")
    end = len(buf) - 8
    (stored,) = struct.unpack_from("<Q", buf, end)
    if crc64.xz(bytes(buf[:end])) != stored:
        raise ChecksumError("model checksum mismatch (file corrupted or truncated)")
    pos = 12 + header_len
    if pos > end:
        raise FormatError("truncated header")
    try:
        header = json.loads(bytes(buf[12:pos]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from None
    pos += _pad8(pos)
    if pos + 8 > end:
        raise FormatError("truncated model file")
    n_trees, n_classes = struct.unpack_from("<II", buf, pos)
    pos += 8
    if n_trees == 0:
        raise FormatError("model contains no trees")
    if n_classes != len(header["classes"]):
        raise FormatError("class count disagrees with the header")
    trees = []
    for _ in range(n_trees):
        tree, pos = _read_tree(buf, pos, n_classes, end)
        trees.append(tree)
    if pos != end:
        raise FormatError("trailing bytes after the last tree")

    forest = ContextForestClassifier(**header["forest"])
    forest.classes_ = np.array(header["classes"], dtype=np.int64)
    forest.n_features_in_ = int(header["n_features"])
    forest.params_ = forest._params()
    forest._set_trees(trees)
    if any(int(t.feature.max(initial=-1)) >= forest.n_features_in_ for t in trees):
        raise FormatError("split feature index outside the skeleton feature range")
    model = OnlineActionDetector(forest=ContextForestClassifier(**header["forest"]),
                                 deriv_lag=int(header["deriv_lag"]), beta=header["beta"])
    model.forest_ = forest
    model.n_joints_ = int(header["n_joints"])
    model.classes_ = forest.classes_
    if header["beta"] is not None:
        model.beta_ = float(header["beta"])
    return model


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
