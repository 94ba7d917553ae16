"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class BBoxPoseError(Exception):
    exit_code = 1
    code = "error"


class InvalidInput(BBoxPoseError, ValueError):
    exit_code = 2
    code = "invalid_input"


class DegenerateInput(InvalidInput):
    """A vector that must be normalized has (near) zero length."""

    code = "degenerate_input"


class InvalidRotation(InvalidInput):
    code = "invalid_rotation"


class BehindCamera(InvalidInput):
    code = "behind_camera"


class DegenerateGeometry(BBoxPoseError):
    exit_code = 3
    code = "degenerate_geometry"


class ParseError(BBoxPoseError):
    exit_code = 4
    code = "parse_error"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFormat(ParseError):
    code = "unsupported_format"
