"""Binary model file (``LEXAN001``).

All integers and floats are little-endian.

=========  ==============================================================
header     8-byte magic ``LEXAN001``; u32 format version; u32 vocab_size,
           embed_dim, num_layers, hidden, num_labels; u32 scheme_bytes,
           vocab_bytes
scheme     ``scheme_bytes`` of UTF-8 scheme text (``code\\tne\\tdesc`` lines)
vocab      u32 count (= vocab_size - 2, the reserved UNK/PAD rows are
           implicit), then per character in id order: u32 byte length and
           the UTF-8 bytes
params     per array: u64 rows, u64 cols, rows*cols float32 row-major.
           Vectors are stored as rows = n, cols = 1. Order: embedding;
           for each layer the forward then backward direction as W_ux,
           W_uh, b_u, W_rx, W_rh, b_r, W_cx, W_ch, b_c; projection weight,
           projection bias; CRF transitions, CRF start scores
=========  ==============================================================

The header alone fixes the file size, see :func:`expected_size`.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .crf import CrfParams
from .model import Model
from .network import zeros_like_network
from .tagset import build_label_space, format_scheme, parse_scheme

MAGIC = b"LEXAN001"
VERSION = 1
_HEADER = struct.Struct("<8s8I")
_DIMS = struct.Struct("<QQ")


class ModelFormatError(ValueError):
    pass


def _param_shapes(vocab_size, embed_dim, num_layers, hidden, num_labels):
    shapes = [(vocab_size, embed_dim)]
    d_in = embed_dim
    for _ in range(num_layers):
        for _direction in range(2):
            for gate in range(3):
                shapes += [(hidden, d_in), (hidden, hidden), (hidden, 1)]
        d_in = 2 * hidden
    shapes += [(num_labels, d_in), (num_labels, 1), (num_labels, num_labels), (num_labels, 1)]
    return shapes


def expected_size(vocab_size, embed_dim, num_layers, hidden, num_labels, scheme_bytes,
                  vocab_bytes) -> int:
    params = sum(_DIMS.size + 4 * r * c
                 for r, c in _param_shapes(vocab_size, embed_dim, num_layers, hidden, num_labels))
    return _HEADER.size + scheme_bytes + vocab_bytes + params


def _vocab_block(vocab: Vocabulary) -> bytes:
    parts = [struct.pack("<I", len(vocab.chars))]
    for ch in vocab.chars:
        b = ch.encode("utf-8")
        parts += [struct.pack("<I", len(b)), b]
    return b"".join(parts)


def _model_arrays(model: Model):
    yield from (a for _, a in model.network.arrays())
    yield from (a for _, a in model.crf.arrays())


def dumps(model: Model) -> bytes:
    net = model.network
    scheme = format_scheme(model.space.tags).encode("utf-8")
    vocab = _vocab_block(model.vocab)
    if net.vocab_size != model.vocab.size:
        raise ModelFormatError(f"embedding rows {net.vocab_size} != vocabulary size {model.vocab.size}")
    out = [_HEADER.pack(MAGIC, VERSION, net.vocab_size, net.embed_dim, len(net.layers), net.hidden,
                        net.num_labels, len(scheme), len(vocab)), scheme, vocab]
    for arr in _model_arrays(model):
        a = np.asarray(arr, dtype="<f4")
        rows, cols = a.shape if a.ndim == 2 else (a.shape[0], 1)
        out += [_DIMS.pack(rows, cols), a.tobytes(order="C")]
    return b"".join(out)


def save(model: Model, path: str | Path) -> None:
    """Write atomically: the target is either complete or untouched."""
    path = Path(path)
    data = dumps(model)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def loads(data: bytes, dtype=np.float32) -> Model:
    if len(data) < _HEADER.size:
        raise ModelFormatError("file too short for a header")
    magic, version, V, D, n_layers, H, L, scheme_bytes, vocab_bytes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    want = expected_size(V, D, n_layers, H, L, scheme_bytes, vocab_bytes)
    if len(data) != want:
        raise ModelFormatError(f"file is {len(data)} bytes, header implies {want}")

    pos = _HEADER.size
    tags = parse_scheme(data[pos:pos + scheme_bytes].decode("utf-8"))
    pos += scheme_bytes
    space = build_label_space(tags)
    if space.size != L:
        raise ModelFormatError(f"scheme yields {space.size} labels, header says {L}")

    end = pos + vocab_bytes
    (count,), pos = struct.unpack_from("<I", data, pos), pos + 4
    chars = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        chars.append(data[pos + 4:pos + 4 + n].decode("utf-8"))
        pos += 4 + n
    if pos != end or count + 2 != V:
        raise ModelFormatError("vocabulary block inconsistent with header")
    vocab = Vocabulary(chars)

    net = zeros_like_network(V, D, H, n_layers, L, dtype)
    crf = CrfParams.zeros(L, dtype)
    model = Model(space, vocab, net, crf)
    for arr, shape in zip(_model_arrays(model), _param_shapes(V, D, n_layers, H, L)):
        rows, cols = _DIMS.unpack_from(data, pos)
        if (rows, cols) != shape:
            raise ModelFormatError(f"block shape {(rows, cols)} != expected {shape}")
        pos += _DIMS.size
        n = rows * cols
        arr[...] = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(arr.shape)
        pos += 4 * n
    return model


def load(path: str | Path, dtype=np.float32) -> Model:
    return loads(Path(path).read_bytes(), dtype)


def save_wide(model: Model, path: str | Path) -> None:
    """float64 sidecar of every parameter, for exact resumption of training."""
    arrays = {name: a for name, a in model.network.arrays()}
    arrays.update(dict(model.crf.arrays()))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_wide(model: Model, path: str | Path) -> Model:
    """Replace ``model``'s parameters with the float64 values of a sidecar."""
    wide = model.network.astype(np.float64)
    crf = model.crf.astype(np.float64)
    with np.load(path) as z:
        for name, arr in list(wide.arrays()) + list(crf.arrays()):
            arr[...] = z[name]
    return Model(model.space, model.vocab, wide, crf)
