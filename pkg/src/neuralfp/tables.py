"""Activation tables and the NFAT on-disk format.

An activation table is an m x N matrix: one row per sample, one column per
neuron, for a single class under a single condition (clean or attacked).
Everything downstream of data collection consumes only these tables.

NFAT layout (little-endian throughout)::

    bytes 0-3    magic "NFAT"
    bytes 4-7    format version, u32 (currently 1)
    byte  8      kind: 0 = clean, 1 = attacked
    bytes 9-12   class_id, u32
    bytes 13-20  n_neurons N, u64
    bytes 21-28  n_samples m, u64
    bytes 29-32  layer count, u32 (0 = layer sizes absent)
    ...          layer sizes, u64 each
    ...          m * N IEEE-754 float32 values, row-major (sample-major)

Values are stored in single precision; statistics elsewhere in the package
accumulate in double precision.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import (
    PairingError,
    TableFormatError,
    TableIOError,
    TableTruncationError,
    TableValidationError,
    TableVersionError,
)

MAGIC = b"NFAT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIBIQQI")


class TableKind(Enum):
    CLEAN = 0
    ATTACKED = 1

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "TableKind":
        try:
            return cls[name.upper()]
        except KeyError:
            raise TableFormatError(f"unknown table kind {name!r}") from None


@dataclass(frozen=True)
class ActivationTable:
    """Immutable m x N activation matrix for one class and one condition.

    ``values`` is kept as a read-only float32 array in row-major order;
    ``n_samples`` and ``n_neurons`` are derived from its shape.
    """

    class_id: int
    kind: TableKind
    values: np.ndarray
    layer_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.class_id < 2**32:
            raise TableValidationError(
                f"class_id must be in [0, 2^32), got {self.class_id}"
            )
        if not isinstance(self.kind, TableKind):
            raise TableValidationError(f"kind must be a TableKind, got {self.kind!r}")
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise TableValidationError(
                f"values must be a non-empty 2-D matrix, got shape {np.shape(self.values)}"
            )
        bad = ~np.isfinite(values)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise TableValidationError(
                f"non-finite activation at (row {row}, column {col})"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.layer_sizes is not None:
            sizes = tuple(int(s) for s in self.layer_sizes)
            if any(s <= 0 for s in sizes):
                raise TableValidationError(f"layer sizes must be positive, got {sizes}")
            if sum(sizes) != self.n_neurons:
                raise TableValidationError(
                    f"layer sizes sum to {sum(sizes)}, table has {self.n_neurons} neurons"
                )
            object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivationTable):
            return NotImplemented
        return (
            self.class_id == other.class_id
            and self.kind == other.kind
            and self.layer_sizes == other.layer_sizes
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    def __hash__(self):
        return hash((self.class_id, self.kind, self.values.shape))


class _CountingWriter:
    """Wraps a byte sink so failures can be reported with the offset reached."""

    def __init__(self, sink: BinaryIO):
        self._sink = sink
        self.offset = 0

    def write(self, data: bytes) -> None:
        try:
            self._sink.write(data)
        except OSError as exc:
            raise TableIOError(self.offset, exc) from exc
        self.offset += len(data)


def write_table(table: ActivationTable, destination: BinaryIO | str | Path) -> None:
    """Serialize ``table`` to ``destination`` in NFAT format."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            _write_stream(table, fh)
    else:
        _write_stream(table, destination)


def _write_stream(table: ActivationTable, sink: BinaryIO) -> None:
    layers = table.layer_sizes or ()
    out = _CountingWriter(sink)
    out.write(
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            table.kind.value,
            table.class_id,
            table.n_neurons,
            table.n_samples,
            len(layers),
        )
    )
    if layers:
        out.write(struct.pack(f"<{len(layers)}Q", *layers))
    out.write(table.values.astype("<f4", copy=False).tobytes())


def read_table(source: BinaryIO | str | Path) -> ActivationTable:
    """Parse and validate one NFAT record from ``source``.

    Rejects the stream outright on bad magic, unsupported version, size
    mismatches, or non-finite values; never returns a partial table.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return _read_stream(fh)
    return _read_stream(source)


def _read_exact(stream: BinaryIO, n: int, what: str, offset: int) -> bytes:
    try:
        data = stream.read(n)
    except OSError as exc:
        raise TableIOError(offset, exc) from exc
    if len(data) != n:
        raise TableTruncationError(n, len(data), what)
    return data


def _read_stream(stream: BinaryIO) -> ActivationTable:
    header = _read_exact(stream, _HEADER.size, "header", 0)
    magic, version, kind_byte, class_id, n_neurons, n_samples, n_layers = _HEADER.unpack(header)
    if magic != MAGIC:
        raise TableFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise TableVersionError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    try:
        kind = TableKind(kind_byte)
    except ValueError:
        raise TableFormatError(f"invalid kind byte {kind_byte}") from None
    offset = _HEADER.size
    layer_sizes: tuple[int, ...] | None = None
    if n_layers:
        raw = _read_exact(stream, 8 * n_layers, "layer sizes", offset)
        layer_sizes = struct.unpack(f"<{n_layers}Q", raw)
        offset += len(raw)
    expected = n_samples * n_neurons * 4
    payload = _read_exact(stream, expected, "payload", offset)
    values = np.frombuffer(payload, dtype="<f4").reshape(n_samples, n_neurons)
    return ActivationTable(
        class_id=class_id, kind=kind, values=values, layer_sizes=layer_sizes
    )


def validate_pair(clean: ActivationTable, attacked: ActivationTable) -> None:
    """Check that a clean/attacked table pair is commensurate for screening."""
    if clean.kind is not TableKind.CLEAN:
        raise PairingError("kind", f"first table has kind {clean.kind}, expected clean")
    if attacked.kind is not TableKind.ATTACKED:
        raise PairingError(
            "kind", f"second table has kind {attacked.kind}, expected attacked"
        )
    if clean.class_id != attacked.class_id:
        raise PairingError(
            "class_id", f"clean class {clean.class_id} vs attacked class {attacked.class_id}"
        )
    if clean.n_neurons != attacked.n_neurons:
        raise PairingError(
            "n_neurons", f"clean N={clean.n_neurons} vs attacked N={attacked.n_neurons}"
        )


def table_digest(table: ActivationTable) -> str:
    """SHA-256 of the table's canonical NFAT serialization (provenance anchor)."""
    buf = io.BytesIO()
    write_table(table, buf)
    return hashlib.sha256(buf.getvalue()).hexdigest()


def table_summary(table: ActivationTable) -> dict:
    """Header fields plus value summary statistics, for inspection output."""
    values = table.values
    return {
        "kind": str(table.kind),
        "class_id": table.class_id,
        "n_neurons": table.n_neurons,
        "n_samples": table.n_samples,
        "layer_sizes": list(table.layer_sizes) if table.layer_sizes else None,
        "value_min": float(values.min()),
        "value_max": float(values.max()),
        "value_mean": float(values.mean(dtype=np.float64)),
        "value_std": float(values.std(dtype=np.float64)),
    }
