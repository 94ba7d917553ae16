"""Minimal ASCII PLY reader/writer for vertex positions."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from bboxpose.errors import InvalidInput, ParseError, UnsupportedFormat

_SCALAR_TYPES = {
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double",
    "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64",
}


class _Element:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        self.props: list[str] = []
        self.has_list = False


def _parse_header(lines: list[str]) -> tuple[list[_Element], int]:
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", line=1)
    elements: list[_Element] = []
    fmt_seen = False
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens:
            continue
        key = tokens[0]
        if key in ("comment", "obj_info"):
            continue
        if key == "format":
            if len(tokens) != 3:
                raise ParseError(f"malformed format line {raw.strip()!r}", line=lineno)
            if tokens[1] != "ascii":
                raise UnsupportedFormat(f"only ASCII PLY is supported, got {tokens[1]!r}", line=lineno)
            fmt_seen = True
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError(f"malformed element line {raw.strip()!r}", line=lineno)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}", line=lineno) from None
            if count < 0:
                raise ParseError(f"negative element count {count}", line=lineno)
            elements.append(_Element(tokens[1], count))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if len(tokens) == 5 and tokens[1] == "list":
                elements[-1].has_list = True
                elements[-1].props.append(tokens[4])
            elif len(tokens) == 3 and tokens[1] in _SCALAR_TYPES:
                elements[-1].props.append(tokens[2])
            else:
                raise ParseError(f"malformed property line {raw.strip()!r}", line=lineno)
        elif key == "end_header":
            if not fmt_seen:
                raise ParseError("header has no format line", line=lineno)
            return elements, lineno
        else:
            raise ParseError(f"unexpected header keyword {key!r}", line=lineno)
    raise ParseError("header is not terminated by 'end_header'", line=len(lines))


def load_ply(path) -> np.ndarray:
    """Vertex positions of an ASCII PLY file as an ``(n, 3)`` array, in file order.

    Faces and extra vertex properties (normals, colors) are skipped.

    Raises
    ------
    ParseError
        Malformed header or data; the message carries the 1-based line number.
    UnsupportedFormat
        Binary PLY.
    InvalidInput
        No vertices.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(512)
    if b"format binary" in head:
        line = head[: head.index(b"format binary")].count(b"\n") + 1
        raise UnsupportedFormat(f"{path}: only ASCII PLY is supported", line=line)
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: non-ASCII content ({exc.reason})") from None

    elements, header_end = _parse_header(lines)
    vertex = next((e for e in elements if e.name == "vertex"), None)
    if vertex is None:
        raise ParseError(f"{path}: no vertex element", line=header_end)
    missing = [c for c in "xyz" if c not in vertex.props]
    if missing:
        raise ParseError(f"{path}: vertex element lacks properties {missing}", line=header_end)
    if vertex.count == 0:
        raise InvalidInput(f"{path}: point cloud has no vertices")
    cols = [vertex.props.index(c) for c in "xyz"]

    cursor = header_end  # index of the first data line in ``lines``
    points = None
    for elem in elements:
        if elem is not vertex:
            cursor += elem.count
            continue
        points = np.empty((elem.count, 3))
        for k in range(elem.count):
            lineno = cursor + k + 1
            if cursor + k >= len(lines):
                raise ParseError(f"{path}: expected {elem.count} vertices, file ended", line=lineno)
            tokens = lines[cursor + k].split()
            if elem.has_list:
                if len(tokens) <= max(cols):
                    raise ParseError(f"{path}: vertex row has {len(tokens)} values", line=lineno)
            elif len(tokens) != len(elem.props):
                raise ParseError(
                    f"{path}: vertex row has {len(tokens)} values, header declares {len(elem.props)}",
                    line=lineno,
                )
            try:
                points[k] = [float(tokens[c]) for c in cols]
            except ValueError:
                raise ParseError(f"{path}: non-numeric vertex coordinate", line=lineno) from None
        break
    if not np.all(np.isfinite(points)):
        raise InvalidInput(f"{path}: point cloud has non-finite coordinates")
    return points


def save_ply(path, points, comment: str | None = None) -> None:
    """Write vertex positions as ASCII PLY with round-trip (repr) precision."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines += [f"comment {c}" for c in comment.splitlines()]
    lines += [
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines += [" ".join(repr(float(c)) for c in p) for p in pts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
