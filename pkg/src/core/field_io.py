"""
Binary field dumps and PGM previews.

Dump layout: a 16-byte header (magic ``NSMS``, format version, grid size n,
field kind) followed by little-endian float64 values in row-major order with
x varying fastest. Vector fields store the x component, then the y component.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from src.core.grid import Grid, ScalarField, VectorField
from src.exceptions import ConfigurationError, FieldFormatError

logger = logging.getLogger(__name__)

MAGIC = b"NSMS"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIII")
KIND_SCALAR = 1
KIND_VECTOR = 2


def _payload(field: ScalarField | VectorField) -> tuple[int, bytes]:
    if isinstance(field, VectorField):
        data = np.concatenate([field.x.values.ravel(), field.y.values.ravel()])
        return KIND_VECTOR, data.astype("<f8").tobytes()
    return KIND_SCALAR, field.values.astype("<f8").tobytes()


def write_field(path: Path, field: ScalarField | VectorField) -> Path:
    """Write a scalar or vector field dump."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind, payload = _payload(field)
    with path.open("wb") as handle:
        handle.write(HEADER.pack(MAGIC, FORMAT_VERSION, field.grid.n, kind))
        handle.write(payload)
    logger.debug(f"💾 Wrote field dump {path} (n={field.grid.n}, kind={kind})")
    return path


def read_field(path: Path, length: float = 1.0) -> ScalarField | VectorField:
    """Read a dump written by :func:`write_field`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise FieldFormatError(str(path), f"cannot read file ({e})")

    if len(raw) < HEADER.size:
        raise FieldFormatError(str(path), "truncated header")
    magic, version, n, kind = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(str(path), f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FieldFormatError(str(path), f"unsupported version {version}")
    if kind not in {KIND_SCALAR, KIND_VECTOR}:
        raise FieldFormatError(str(path), f"unknown field kind {kind}")

    components = 1 if kind == KIND_SCALAR else 2
    expected = HEADER.size + components * n * n * 8
    if len(raw) != expected:
        raise FieldFormatError(str(path), f"size {len(raw)} bytes, expected {expected}")

    try:
        grid = Grid(n, length)
    except ConfigurationError as e:
        raise FieldFormatError(str(path), str(e))
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise FieldFormatError(str(path), "non-finite values")
    if kind == KIND_SCALAR:
        return ScalarField(grid, data.reshape(grid.shape))
    return VectorField.unflatten(grid, data)


def write_pgm(path: Path, field: ScalarField, lower: float | None = None, upper: float | None = None) -> Path:
    """Write an 8-bit binary PGM preview, linearly scaled to [lower, upper]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = field.values
    lo = float(values.min()) if lower is None else lower
    hi = float(values.max()) if upper is None else upper
    span = hi - lo if hi > lo else 1.0
    pixels = np.clip(np.rint(255.0 * (values - lo) / span), 0, 255).astype(np.uint8)
    # PGM rows run top to bottom, so flip y
    header = f"P5\n{field.grid.n} {field.grid.n}\n255\n".encode("ascii")
    path.write_bytes(header + pixels[::-1].tobytes())
    return path
