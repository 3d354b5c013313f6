"""Self-describing binary container for named numpy arrays.

Layout: 4 magic bytes "GPDC", one version byte, an 8-byte little-endian
manifest length, the UTF-8 JSON manifest, then each array's raw C-order
little-endian payload in manifest order. The manifest records array names,
dtypes, shapes, and a free-form metadata mapping, so files are readable
from any language with a JSON parser.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContainerFormatError

MAGIC = b"GPDC"
VERSION = 1

_ALLOWED_DTYPES = {"uint8", "int32", "int64", "float32", "float64"}


def canonical_json(obj) -> bytes:
    """Stable JSON encoding (sorted keys, no whitespace) used for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class DatasetContainer:
    """Named arrays plus a JSON-serializable metadata mapping."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, arr: np.ndarray) -> None:
        if name in self.arrays:
            raise ContainerFormatError(f"duplicate array name {name!r}")
        self.arrays[name] = arr


def write_dataset(container: DatasetContainer, path) -> None:
    path = Path(path)
    entries = []
    payloads = []
    # serialize in name order so equal content always yields equal bytes,
    # regardless of how the arrays dict was assembled
    for name in sorted(container.arrays):
        arr = container.arrays[name]
        dt = np.dtype(arr.dtype)
        if dt.name not in _ALLOWED_DTYPES:
            raise ContainerFormatError(
                f"array {name!r} has unsupported dtype {dt.name}"
            )
        le = dt.newbyteorder("<")
        payloads.append(np.ascontiguousarray(arr, dtype=le).tobytes())
        entries.append({"name": name, "dtype": dt.name, "shape": list(arr.shape)})
    manifest = canonical_json({"arrays": entries, "meta": container.meta})
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for chunk in payloads:
            fh.write(chunk)


def read_dataset(path) -> DatasetContainer:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 13 or blob[:4] != MAGIC:
        raise ContainerFormatError(f"{path}: not a GPDC container (bad magic)")
    if blob[4] != VERSION:
        raise ContainerFormatError(f"{path}: unsupported container version {blob[4]}")
    (mlen,) = struct.unpack("<Q", blob[5:13])
    if 13 + mlen > len(blob):
        raise ContainerFormatError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(blob[13 : 13 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"{path}: unreadable manifest: {exc}") from exc
    if not isinstance(manifest, dict) or "arrays" not in manifest:
        raise ContainerFormatError(f"{path}: manifest missing arrays list")
    out = DatasetContainer(meta=manifest.get("meta", {}))
    offset = 13 + mlen
    for entry in manifest["arrays"]:
        name = entry.get("name", "<unnamed>")
        dtype_name = entry.get("dtype")
        if dtype_name not in _ALLOWED_DTYPES:
            raise ContainerFormatError(
                f"{path}: array {name!r} has unsupported dtype {dtype_name!r}"
            )
        shape = tuple(int(s) for s in entry.get("shape", []))
        dt = np.dtype(dtype_name).newbyteorder("<")
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = dt.itemsize * count
        if offset + nbytes > len(blob):
            raise ContainerFormatError(
                f"{path}: truncated payload for array {name!r}"
            )
        flat = np.frombuffer(blob, dtype=dt, count=count, offset=offset)
        arr = flat.reshape(shape).astype(np.dtype(dtype_name), copy=True)
        out.add(name, arr)
        offset += nbytes
    if offset != len(blob):
        raise ContainerFormatError(
            f"{path}: {len(blob) - offset} trailing bytes after last payload"
        )
    return out
