"""Binary artifacts: a JSON header followed by raw little-endian float64 arrays.

Layout::

    bytes 0..3    magic b"DPME"
    bytes 4..7    header length H, uint32 little endian
    bytes 8..8+H  UTF-8 JSON header
    rest          arrays listed in header["arrays"], C order, '<f8'

The header always carries ``format_version`` and ``kind``.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .embedding import MeanEmbedding
from .exceptions import FormatError, UnsupportedVersionError
from .training import Generator

MAGIC = b"DPME"
FORMAT_VERSION = 1
_PREFIX = len(MAGIC) + 4


def write_artifact(path, kind, arrays, meta=None):
    """Write named arrays with a metadata header; returns the header."""
    header = {"format_version": FORMAT_VERSION, "kind": kind, **(meta or {})}
    header["arrays"] = []
    payload = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        header["arrays"].append({"name": name, "shape": list(arr.shape)})
        payload.append(arr.tobytes())
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for chunk in payload:
            fh.write(chunk)
    return header


def read_artifact(path, kind=None):
    """Read an artifact, returning ``(header, {name: array})``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _PREFIX:
        raise FormatError("file too short for header prefix", offset=len(data))
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}", offset=0)
    (hlen,) = struct.unpack("<I", data[4:8])
    if _PREFIX + hlen > len(data):
        raise FormatError(f"header of {hlen} bytes runs past end of file", offset=len(data))
    try:
        header = json.loads(data[_PREFIX:_PREFIX + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}", offset=_PREFIX) from exc
    if not isinstance(header, dict) or "format_version" not in header:
        raise FormatError("header lacks format_version", offset=_PREFIX)
    if header["format_version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported format version {header['format_version']!r}; this build reads {FORMAT_VERSION}",
            offset=_PREFIX)
    if kind is not None and header.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} artifact, found {header.get('kind')!r}", offset=_PREFIX)
    offset = _PREFIX + hlen
    arrays = {}
    for spec in header.get("arrays", []):
        shape = tuple(int(s) for s in spec["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(data):
            raise FormatError(f"array {spec['name']!r} truncated: needs {nbytes} bytes, "
                              f"{len(data) - offset} remain", offset=offset)
        arrays[spec["name"]] = np.frombuffer(data, dtype="<f8", count=nbytes // 8,
                                             offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after payload", offset=offset)
    return header, arrays


def save_embedding(path, emb: MeanEmbedding, extra=None):
    arrays = {"part1": emb.part1}
    if emb.part2 is not None:
        arrays["part2"] = emb.part2
    meta = {
        "dim": emb.dim,
        "m": emb.sample_count,
        "num_classes": emb.num_classes,
        "class_counts": None if emb.class_counts is None else list(emb.class_counts),
        "moments": emb.moments,
        "sigma": emb.sigma,
        "seed": emb.noise_seed,
        "private": emb.private,
        "feature_map": emb.feature_config,
        **(extra or {}),
    }
    return write_artifact(path, "embedding", arrays, meta)


def load_embedding(path):
    """Return ``(embedding, header)``."""
    header, arrays = read_artifact(path, "embedding")
    try:
        emb = MeanEmbedding(arrays["part1"], arrays.get("part2"), header["m"],
                            class_counts=header.get("class_counts"), sigma=header.get("sigma", 0.0),
                            noise_seed=header.get("seed"), private=header.get("private", False),
                            feature_config=header.get("feature_map"))
    except KeyError as exc:
        raise FormatError(f"embedding header lacks {exc}") from exc
    return emb, header


def save_dataset(path, X, labels=None, extra=None):
    arrays = {"X": np.asarray(X, dtype=np.float64)}
    if labels is not None:
        arrays["labels"] = np.asarray(labels, dtype=np.float64)
    return write_artifact(path, "dataset", arrays, extra)


def load_dataset(path):
    """Return ``(X, labels or None, header)``."""
    header, arrays = read_artifact(path, "dataset")
    if "X" not in arrays:
        raise FormatError("dataset has no X array")
    labels = arrays.get("labels")
    return arrays["X"], (None if labels is None else labels.astype(np.int64)), header


def save_generator(path, gen: Generator, theta=None, extra=None):
    theta = gen.theta if theta is None else theta
    return write_artifact(path, "generator", {"theta": theta}, {"generator": gen.config(), **(extra or {})})


def load_generator(path):
    """Return ``(generator, header)``."""
    header, arrays = read_artifact(path, "generator")
    try:
        cfg = header["generator"]
        gen = Generator(cfg["layer_sizes"], arrays["theta"], cfg.get("num_classes", 1))
    except KeyError as exc:
        raise FormatError(f"generator artifact lacks {exc}") from exc
    return gen, header


def save_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{os.fspath(path)}: invalid JSON: {exc.msg}", offset=exc.pos) from exc
