"""The hex dumps in docs/formats.md must stay true to the bytes we actually emit."""

from pathlib import Path

import numpy as np

from adatok.object_merge import CompressedTokenSet, Origin, TokenMeta
from adatok.tensor_io import TensorFile, write_tensor
from adatok.token_wire import pack

DOCS = Path(__file__).resolve().parent.parent / "docs" / "formats.md"


def hexdump_lines(blob: bytes) -> list[str]:
    lines = []
    for off in range(0, len(blob), 16):
        chunk = blob[off : off + 16]
        hexpart = " ".join(f"{c:02x}" for c in chunk)
        asc = "".join(chr(c) if 32 <= c < 127 else "." for c in chunk)
        lines.append(f"{off:08x}  {hexpart:<47}  |{asc}|")
    return lines


def test_atsr_example_dump_matches(tmp_path):
    path = tmp_path / "demo.atsr"
    write_tensor(TensorFile.from_array(np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)), path)
    doc = DOCS.read_text()
    for line in hexdump_lines(path.read_bytes()):
        assert line in doc


def test_tok_example_dump_matches():
    cts = CompressedTokenSet(np.array([[1.0, 2.0]]), (TokenMeta(0, 12),), Origin(8, 8, 2, 2))
    doc = DOCS.read_text()
    for line in hexdump_lines(pack(cts, "f16")):
        assert line in doc


def test_sidecar_example_matches(tmp_path):
    from adatok.tensor_io import write_sidecar

    path = tmp_path / "scores.txt"
    write_sidecar([0.9, 0.5], path)
    assert path.read_text() in DOCS.read_text()
