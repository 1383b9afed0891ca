"""ATSR container and score sidecar: round-trips, golden bytes, hard failures."""

import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adatok.errors import FormatError, IoError, TruncationError, UnsupportedDtype
from adatok.tensor_io import (
    TensorFile,
    parse_tensor,
    read_sidecar,
    read_tensor,
    validate_sidecar,
    write_sidecar,
    write_tensor,
)


def test_identity_round_trip(tmp_path):
    values = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32).reshape(2, 2, 1)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    back = read_tensor(path)
    assert back.dims == (2, 2, 1)
    assert back.dtype_name == "f32"
    assert np.array_equal(back.values, values)


def test_truncated_payload_is_error(tmp_path):
    values = np.arange(12, dtype=np.float32).reshape(3, 4)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-1])
    with pytest.raises(TruncationError):
        read_tensor(path)


def test_f16_round_trip_bitwise(tmp_path, rng):
    values = rng.standard_normal((10, 10, 10)).astype(np.float16)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    assert read_tensor(path).values.tobytes() == values.tobytes()


def test_write_is_deterministic(tmp_path, rng):
    values = rng.standard_normal((5, 7)).astype(np.float32)
    a, b = tmp_path / "a.atsr", tmp_path / "b.atsr"
    write_tensor(TensorFile.from_array(values), a)
    write_tensor(TensorFile.from_array(values), b)
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()


def test_file_size_formula(tmp_path):
    values = np.zeros((24, 24, 1024), dtype=np.float16)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    assert path.stat().st_size == 8 + 3 * 4 + 24 * 24 * 1024 * 2 == 1_179_668


def test_empty_dims_rejected(tmp_path):
    t = TensorFile(values=np.float32(1.0).reshape(()), dtype_tag=1)
    with pytest.raises(FormatError):
        write_tensor(t, tmp_path / "t.atsr")


def test_zero_inner_dim_rejected(tmp_path):
    with pytest.raises(FormatError):
        write_tensor(TensorFile.from_array(np.zeros((3, 0), dtype=np.float32)), tmp_path / "t")


def test_zero_mask_stack_allowed(tmp_path):
    path = tmp_path / "empty.atsr"
    write_tensor(TensorFile.from_array(np.zeros((0, 4, 4), dtype=np.uint8)), path)
    assert read_tensor(path).dims == (0, 4, 4)


def test_bad_magic(tmp_path):
    path = tmp_path / "t.atsr"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError):
        read_tensor(path)


def test_unknown_dtype(tmp_path):
    values = np.zeros((2, 2), dtype=np.float32)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    blob = bytearray(path.read_bytes())
    blob[5] = 7
    with pytest.raises(UnsupportedDtype):
        parse_tensor(bytes(blob))


def test_trailing_bytes_rejected(tmp_path):
    values = np.zeros((2, 2), dtype=np.float32)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        read_tensor(path)


def test_unwritable_path_is_io_error(tmp_path):
    values = np.zeros((2, 2), dtype=np.float32)
    with pytest.raises(IoError):
        write_tensor(TensorFile.from_array(values), tmp_path / "missing" / "t.atsr")


def test_header_golden_bytes(tmp_path):
    """Freeze the exact little-endian layout so the format cannot drift."""
    values = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    path = tmp_path / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    blob = path.read_bytes()
    assert blob[:4] == b"ATSR"
    assert blob[4:8] == bytes([1, 1, 2, 0])  # version, dtype f32, rank 2, pad
    assert blob[8:16] == struct.pack("<II", 2, 2)
    assert blob[16:] == struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)


_dtype_strategy = st.sampled_from([np.float16, np.float32, np.uint8])


@st.composite
def _tensors(draw):
    dtype = draw(_dtype_strategy)
    rank = draw(st.sampled_from([2, 3]))
    dims = tuple(draw(st.integers(min_value=1, max_value=6)) for _ in range(rank))
    n = int(np.prod(dims))
    if dtype is np.uint8:
        flat = draw(st.lists(st.integers(0, 255), min_size=n, max_size=n))
        return np.array(flat, dtype=np.uint8).reshape(dims)
    flat = draw(
        st.lists(
            st.floats(
                min_value=-1000,
                max_value=1000,
                allow_nan=False,
                width=16 if dtype is np.float16 else 32,
            ),
            min_size=n,
            max_size=n,
        )
    )
    return np.array(flat, dtype=dtype).reshape(dims)


@settings(max_examples=150, deadline=None)
@given(_tensors())
def test_round_trip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "t.atsr"
    write_tensor(TensorFile.from_array(values), path)
    back = read_tensor(path)
    assert back.values.dtype == values.dtype
    assert back.values.tobytes() == values.tobytes()


def test_sidecar_round_trip(tmp_path):
    confidences = [0.9, 0.79, 0.8, 1.0, 0.0, 0.123456789]
    path = tmp_path / "scores.txt"
    write_sidecar(confidences, path)
    scores = read_sidecar(path)
    validate_sidecar(scores, len(confidences))
    assert [scores[i] for i in range(len(confidences))] == confidences


def test_sidecar_golden_text(tmp_path):
    path = tmp_path / "scores.txt"
    write_sidecar([0.9, 0.5], path)
    assert path.read_text() == "0 0.9\n1 0.5\n"


def test_sidecar_rejects_duplicates(tmp_path):
    path = tmp_path / "scores.txt"
    path.write_text("0 0.5\n0 0.6\n")
    with pytest.raises(FormatError):
        read_sidecar(path)


def test_sidecar_rejects_out_of_range(tmp_path):
    path = tmp_path / "scores.txt"
    path.write_text("0 1.5\n")
    with pytest.raises(FormatError):
        read_sidecar(path)


def test_sidecar_coverage_check():
    with pytest.raises(FormatError):
        validate_sidecar({0: 0.5, 2: 0.5}, 2)
