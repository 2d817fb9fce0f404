"""Minimal NFAT writer/reader implementing the published wire format.

This is the adapter's half of the interface to the statistical core: both
sides implement the same byte layout independently, and cross-compatibility
is enforced by golden-file tests. Little-endian: magic ``NFAT``; u32 version
(1); u8 kind (0 clean, 1 attacked); u32 class id; u64 N; u64 m; u32 layer
count followed by that many u64 layer sizes; then m*N float32 values,
row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import AdapterError

MAGIC = b"NFAT"
FORMAT_VERSION = 1
KIND_CODES = {"clean": 0, "attacked": 1}
_HEADER = struct.Struct("<4sIBIQQI")


@dataclass(frozen=True)
class NfatTable:
    class_id: int
    kind: str  # "clean" | "attacked"
    values: np.ndarray  # (m, N) float32
    layer_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise AdapterError(f"kind must be clean|attacked, got {self.kind!r}")
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.size == 0:
            raise AdapterError(f"values must be a non-empty matrix, got {values.shape}")
        if not np.isfinite(values).all():
            raise AdapterError("values contain non-finite entries")
        if self.layer_sizes is not None:
            sizes = tuple(int(s) for s in self.layer_sizes)
            if sum(sizes) != values.shape[1]:
                raise AdapterError(
                    f"layer sizes sum to {sum(sizes)}, table has {values.shape[1]} columns"
                )
            object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "values", values)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.values.shape[1]


def write_nfat(table: NfatTable, destination: BinaryIO | str | Path) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            write_nfat(table, fh)
        return
    layers = table.layer_sizes or ()
    destination.write(
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            KIND_CODES[table.kind],
            table.class_id,
            table.n_neurons,
            table.n_samples,
            len(layers),
        )
    )
    if layers:
        destination.write(struct.pack(f"<{len(layers)}Q", *layers))
    destination.write(table.values.astype("<f4", copy=False).tobytes())


def read_nfat(source: BinaryIO | str | Path) -> NfatTable:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_nfat(fh)
    header = source.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise AdapterError("truncated NFAT header")
    magic, version, kind_code, class_id, n_neurons, n_samples, n_layers = _HEADER.unpack(header)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise AdapterError(f"not a version-{FORMAT_VERSION} NFAT stream")
    layer_sizes = None
    if n_layers:
        raw = source.read(8 * n_layers)
        layer_sizes = struct.unpack(f"<{n_layers}Q", raw)
    payload = source.read(n_samples * n_neurons * 4)
    if len(payload) != n_samples * n_neurons * 4:
        raise AdapterError("truncated NFAT payload")
    kind = {v: k for k, v in KIND_CODES.items()}[kind_code]
    values = np.frombuffer(payload, dtype="<f4").reshape(n_samples, n_neurons)
    return NfatTable(
        class_id=class_id, kind=kind, values=values, layer_sizes=layer_sizes
    )
