import numpy as np
import pytest

from bboxpose.errors import InvalidInput, ParseError, UnsupportedFormat
from bboxpose.plyio import load_ply, save_ply

THREE = """ply
format ascii 1.0
comment fixture
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 2 3
-1.5 0.25 4e-3
"""


def write(tmp_path, text, name="m.ply"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_vertices(tmp_path):
    pts = load_ply(write(tmp_path, THREE))
    np.testing.assert_array_equal(pts, [[0, 0, 0], [1, 2, 3], [-1.5, 0.25, 4e-3]])


def test_empty_cloud(tmp_path):
    text = THREE.replace("element vertex 3", "element vertex 0").split("end_header")[0] + "end_header\n"
    with pytest.raises(InvalidInput):
        load_ply(write(tmp_path, text))


def test_binary(tmp_path):
    p = tmp_path / "b.ply"
    p.write_bytes(b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n\x00\x01")
    with pytest.raises(UnsupportedFormat) as err:
        load_ply(p)
    assert err.value.line == 2


def test_missing_magic(tmp_path):
    with pytest.raises(ParseError) as err:
        load_ply(write(tmp_path, "plx\n" + THREE[4:]))
    assert err.value.line == 1
    assert "line 1" in str(err.value)


def test_garbled_header_line(tmp_path):
    with pytest.raises(ParseError) as err:
        load_ply(write(tmp_path, THREE.replace("property float y", "propty float y")))
    assert err.value.line == 6


def test_unterminated_header(tmp_path):
    with pytest.raises(ParseError):
        load_ply(write(tmp_path, THREE.replace("end_header\n", "")))


def test_bad_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_ply(write(tmp_path, THREE.replace("1 2 3", "1 two 3")))
    assert err.value.line == 10


def test_truncated(tmp_path):
    with pytest.raises(ParseError):
        load_ply(write(tmp_path, THREE.rsplit("\n", 2)[0] + "\n"))


def test_faces_and_extra_properties(tmp_path):
    text = """ply
format ascii 1.0
element material 1
property uchar id
element vertex 2
property float nx
property double x
property double y
property double z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
7
0.5 1 2 3 255
0.5 4 5 6 0
3 0 1 1
"""
    np.testing.assert_array_equal(load_ply(write(tmp_path, text)), [[1, 2, 3], [4, 5, 6]])


def test_round_trip_full_precision(tmp_path):
    pts = np.random.default_rng(0).normal(size=(50, 3)) / 3
    p = tmp_path / "r.ply"
    save_ply(p, pts, comment="test")
    np.testing.assert_array_equal(load_ply(p), pts)
