"""Wire-format compatibility with the statistical core's table format."""

import io
import struct

import numpy as np
import pytest

from nf_adapter import AdapterError, NfatTable, read_nfat, write_nfat


def test_roundtrip():
    rng = np.random.default_rng(3)
    table = NfatTable(
        class_id=2,
        kind="attacked",
        values=rng.standard_normal((4, 6)).astype(np.float32),
        layer_sizes=(2, 4),
    )
    buf = io.BytesIO()
    write_nfat(table, buf)
    back = read_nfat(io.BytesIO(buf.getvalue()))
    assert back.class_id == 2
    assert back.kind == "attacked"
    assert back.layer_sizes == (2, 4)
    assert np.array_equal(back.values, table.values)


def test_header_layout_matches_published_format():
    values = np.array([[1.5, -2.0]], dtype=np.float32)
    table = NfatTable(class_id=9, kind="clean", values=values, layer_sizes=(2,))
    buf = io.BytesIO()
    write_nfat(table, buf)
    data = buf.getvalue()
    assert data[:4] == b"NFAT"
    version, = struct.unpack_from("<I", data, 4)
    kind = data[8]
    class_id, = struct.unpack_from("<I", data, 9)
    n, = struct.unpack_from("<Q", data, 13)
    m, = struct.unpack_from("<Q", data, 21)
    n_layers, = struct.unpack_from("<I", data, 29)
    assert (version, kind, class_id, n, m, n_layers) == (1, 0, 9, 2, 1, 1)
    layer, = struct.unpack_from("<Q", data, 33)
    assert layer == 2
    assert data[41:] == struct.pack("<ff", 1.5, -2.0)


def test_byte_identical_to_primary_writer():
    # Golden cross-check: both implementations serialize to the same bytes.
    neuralfp = pytest.importorskip("neuralfp")
    rng = np.random.default_rng(11)
    values = rng.standard_normal((5, 7)).astype(np.float32)
    ours = io.BytesIO()
    write_nfat(
        NfatTable(class_id=3, kind="attacked", values=values, layer_sizes=(3, 4)),
        ours,
    )
    theirs = io.BytesIO()
    neuralfp.write_table(
        neuralfp.ActivationTable(
            class_id=3,
            kind=neuralfp.TableKind.ATTACKED,
            values=values,
            layer_sizes=(3, 4),
        ),
        theirs,
    )
    assert ours.getvalue() == theirs.getvalue()


def test_rejects_non_finite_values():
    values = np.array([[np.nan]], dtype=np.float32)
    with pytest.raises(AdapterError):
        NfatTable(class_id=0, kind="clean", values=values)


def test_rejects_bad_kind():
    with pytest.raises(AdapterError):
        NfatTable(class_id=0, kind="dirty", values=np.zeros((1, 1), dtype=np.float32))
