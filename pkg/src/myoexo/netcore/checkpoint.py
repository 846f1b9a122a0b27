"""Self-describing checkpoint container.

Layout: an ASCII magic line, one JSON header line (architecture descriptor,
shapes, format version, RNG seed), a single NUL separator byte, then the raw
little-endian IEEE-754 float32 parameter payload in header order.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = b"MYONET1\n"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, kind: str, arrays, meta: dict | None = None,
                seed: int | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "shapes": [list(a.shape) for a in arrays],
        "payload_dtype": "float32-le",
        "seed": seed,
        "meta": meta or {},
    }
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n\x00")
        f.write(payload)


def load_arrays(path):
    """Returns (kind, list of float32 arrays, header dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic")
    rest = blob[len(MAGIC):]
    sep = rest.index(b"\n\x00")
    header = json.loads(rest[:sep].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version")
    payload = rest[sep + 2:]
    arrays = []
    offset = 0
    for shape in header["shapes"]:
        n = int(np.prod(shape)) if shape else 1
        chunk = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        arrays.append(chunk.reshape(shape).copy())
        offset += 4 * n
    if offset != len(payload):
        raise CheckpointError(f"{path}: payload size does not match shapes")
    return header["kind"], arrays, header


def save_net(path, net, seed: int | None = None, extra: dict | None = None):
    """Persist a DenseNet or TcnNet with enough metadata to rebuild it."""
    from .dense import DenseNet
    from .tcn import TcnNet

    if isinstance(net, DenseNet):
        meta = {"sizes": net.sizes, "head": net.head}
        kind = "dense"
    elif isinstance(net, TcnNet):
        meta = {
            "window": net.window,
            "in_channels": net.in_channels,
            "blocks": [[b.channels, b.kernel, b.dilation] for b in net.blocks],
        }
        kind = "tcn"
    else:
        raise CheckpointError(f"cannot serialize {type(net).__name__}")
    if extra:
        meta["extra"] = extra
    save_arrays(path, kind, net.params, meta=meta, seed=seed)


def load_net(path):
    from .dense import DenseNet
    from .tcn import TcnNet

    kind, arrays, header = load_arrays(path)
    meta = header["meta"]
    if kind == "dense":
        net = DenseNet(meta["sizes"], head=meta["head"])
    elif kind == "tcn":
        net = TcnNet(window=meta["window"], blocks=meta["blocks"],
                     in_channels=meta["in_channels"])
    else:
        raise CheckpointError(f"{path}: unknown net kind {kind!r}")
    if [list(p.shape) for p in net.params] != [list(a.shape) for a in arrays]:
        raise CheckpointError(f"{path}: shape table does not match architecture")
    net.params = arrays
    net.bump_version()
    return net, meta
