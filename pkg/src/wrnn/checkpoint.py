"""
Checkpoint files.

Layout::

    WRNN-CHECKPOINT 1
    spec.<field> <value>          one line per ModelSpec field
    vocab.size <n>
    vocab.hash <sha256 hex>
    meta.<key> <value>            optional free-form lines
    tensors <count>
    tensor <name> <ndim> <dim...> <nbytes>
    <nbytes of little-endian float64, row-major>
    ... (one block per tensor)
    END

Loading is all-or-nothing: shapes are checked against the model spec, the byte
counts against the declared shapes, and the trailer must be present.
"""

from dataclasses import fields

import numpy as np

from .errors import CheckpointError
from .models import ModelSpec, expected_shapes

MAGIC = b"WRNN-CHECKPOINT 1"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def save_checkpoint(path, params, spec, vocab_hash, meta=None):
    want = expected_shapes(spec)
    got = {k: np.shape(v) for k, v in params.items()}
    if got != want:
        bad = sorted(k for k in set(got) | set(want) if got.get(k) != want.get(k))
        raise CheckpointError(f"parameters do not match the model spec: {', '.join(bad)}")
    lines = [MAGIC.decode()]
    for f in fields(ModelSpec):
        lines.append(f"spec.{f.name} {_fmt(getattr(spec, f.name))}")
    lines.append(f"vocab.size {spec.vocab_size}")
    lines.append(f"vocab.hash {vocab_hash}")
    for k, v in (meta or {}).items():
        lines.append(f"meta.{k} {v}")
    lines.append(f"tensors {len(params)}")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        for name, arr in params.items():
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            dims = " ".join(str(d) for d in arr.shape)
            fh.write(f"tensor {name} {arr.ndim} {dims} {len(data)}\n".encode())
            fh.write(data)
            fh.write(b"\n")
        fh.write(b"END\n")


def _parse_value(typ, text):
    if typ is bool or typ == "bool":
        if text not in ("true", "false"):
            raise CheckpointError(f"bad boolean {text!r}")
        return text == "true"
    if typ is int or typ == "int":
        return int(text)
    return text


def load_checkpoint(path, vocab_hash=None):
    """Returns ``(params, spec, meta)``; refuses a mismatching vocabulary hash."""
    try:
        return _load(path, vocab_hash)
    except ValueError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None


def _load(path, vocab_hash):
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def line():
        nonlocal pos
        end = blob.find(b"\n", pos)
        if end < 0:
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = blob[pos:end]
        pos = end + 1
        return out.decode("utf-8", errors="replace")

    if line().encode() != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic line)")
    spec_kw, meta, header = {}, {}, {}
    types = {f.name: f.type for f in fields(ModelSpec)}
    while True:
        text = line()
        key, _, value = text.partition(" ")
        if key == "tensors":
            count = int(value)
            break
        if key.startswith("spec."):
            name = key[5:]
            if name not in types:
                raise CheckpointError(f"{path}: unknown spec field {name!r}")
            spec_kw[name] = _parse_value(types[name], value)
        elif key.startswith("meta."):
            meta[key[5:]] = value
        elif key in ("vocab.size", "vocab.hash"):
            header[key] = value
        else:
            raise CheckpointError(f"{path}: unexpected header line {text!r}")
    try:
        spec = ModelSpec(**spec_kw)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: invalid model spec: {exc}") from None
    if int(header.get("vocab.size", -1)) != spec.vocab_size:
        raise CheckpointError(f"{path}: vocabulary size header disagrees with spec")
    stored_hash = header.get("vocab.hash", "")
    if vocab_hash is not None and stored_hash != vocab_hash:
        raise CheckpointError(
            f"{path}: vocabulary hash mismatch (checkpoint {stored_hash[:12]}..., "
            f"data {vocab_hash[:12]}...); refusing to load")

    want = expected_shapes(spec)
    params = {}
    for _ in range(count):
        parts = line().split(" ")
        if parts[0] != "tensor" or len(parts) < 4:
            raise CheckpointError(f"{path}: malformed tensor header")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(d) for d in parts[3:3 + ndim])
        nbytes = int(parts[3 + ndim])
        if name not in want or want[name] != shape:
            raise CheckpointError(f"{path}: tensor {name} has shape {shape}, expected {want.get(name)}")
        if nbytes != 8 * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"{path}: tensor {name} byte count disagrees with its shape")
        if pos + nbytes + 1 > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint in tensor {name}")
        arr = np.frombuffer(blob, dtype="<f8", count=nbytes // 8, offset=pos).astype(np.float64)
        params[name] = arr.reshape(shape)
        pos += nbytes
        if blob[pos:pos + 1] != b"\n":
            raise CheckpointError(f"{path}: corrupt tensor block {name}")
        pos += 1
    if set(params) != set(want) or len(params) != count:
        raise CheckpointError(f"{path}: tensor set does not match the model spec")
    if blob[pos:] != b"END\n":
        raise CheckpointError(f"{path}: missing END trailer")
    meta["vocab_hash"] = stored_hash
    return params, spec, meta
