"""File formats: HSF fields, coefficient JSON, deterministic JSON reports.

An HSF file is one UTF-8 JSON header line followed by the raw payload of
little-endian ``(re, im)`` double pairs in level-major, spatial row-major,
channel-minor order.  A boundary field (no t-levels) is stored with
``K = 0`` and null ``t_min``/``t_max``.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..calculus import CoefficientMatrix
from ..halfspace import Field, GridSpec

HEADER_KEYS = ("n", "m", "L", "Nx", "t_min", "t_max", "K", "channels", "dtype", "byte_order")
_DTYPE = np.dtype("<c16")


class FormatError(ValueError):
    """A file that does not follow its declared format."""


def atomic_write(path, data: bytes):
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj).encode("utf-8"))


# ---------------------------------------------------------------------------
# HSF


def _header_bytes(header: dict) -> bytes:
    return (json.dumps({k: header[k] for k in HEADER_KEYS}, separators=(",", ":")) + "\n").encode("utf-8")


def _encode(header: dict, values: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(values, dtype=_DTYPE).tobytes()
    return _header_bytes(header) + payload


def field_header(field: Field) -> dict:
    h = field.spec.to_dict()
    h.update(channels=field.channels, dtype="c128", byte_order="LE")
    return h


def boundary_header(spec: GridSpec, channels: int) -> dict:
    return {"n": spec.n, "m": spec.m, "L": spec.L, "Nx": spec.Nx, "t_min": None, "t_max": None,
            "K": 0, "channels": channels, "dtype": "c128", "byte_order": "LE"}


def write_field(path, field: Field):
    atomic_write(path, _encode(field_header(field), field.values))


def write_boundary(path, spec: GridSpec, values: np.ndarray):
    """Write a boundary field of shape ``spatial`` or ``spatial + (channels,)``."""
    values = np.asarray(values, dtype=np.complex128)
    if values.shape == spec.spatial_shape:
        values = values[..., None]
    if values.shape[:-1] != spec.spatial_shape:
        raise ValueError("boundary values do not fit the grid")
    atomic_write(path, _encode(boundary_header(spec, values.shape[-1]), values))


def _parse(data: bytes, path) -> tuple:
    cut = data.find(b"\n")
    if cut < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(data[:cut].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not a JSON object ({exc})") from None
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header is not a JSON object")
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise FormatError(f"{path}: header lacks {', '.join(missing)}")
    if header["byte_order"] != "LE":
        raise FormatError(f"{path}: byte order {header['byte_order']!r} is not supported, only 'LE'")
    if header["dtype"] != "c128":
        raise FormatError(f"{path}: dtype {header['dtype']!r} is not supported, only 'c128'")
    n, Nx, K, ch = (header[k] for k in ("n", "Nx", "K", "channels"))
    if not all(isinstance(v, int) and v >= 0 for v in (n, Nx, K, ch)) or n < 1 or ch < 1:
        raise FormatError(f"{path}: header dimensions must be positive integers")
    shape = ((K,) if K else ()) + (Nx,) * n + (ch,)
    expected = int(np.prod(shape)) * _DTYPE.itemsize
    start = cut + 1
    got = len(data) - start
    if got < expected:
        raise FormatError(f"{path}: payload truncated at byte offset {len(data)} "
                          f"(expected {expected} payload bytes after offset {start}, got {got})")
    if got > expected:
        raise FormatError(f"{path}: payload has {got - expected} trailing bytes after offset "
                          f"{start + expected}; header n={n}, Nx={Nx}, K={K}, channels={ch} "
                          "does not match the payload size")
    values = np.frombuffer(data, dtype=_DTYPE, offset=start).reshape(shape)
    return header, values


def _spec(header: dict, t_min, t_max, K) -> GridSpec:
    return GridSpec(n=header["n"], m=header["m"], L=header["L"], Nx=header["Nx"],
                    t_min=t_min, t_max=t_max, K=K)


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    header, values = _parse(data, path)
    if header["K"] == 0:
        raise FormatError(f"{path}: holds a boundary field, not a half-space field")
    spec = _spec(header, header["t_min"], header["t_max"], header["K"])
    return Field(spec, values.astype(np.complex128))


def read_boundary(path) -> tuple:
    """Returns ``(header, values)`` with values of shape ``spatial + (channels,)``."""
    data = Path(path).read_bytes()
    header, values = _parse(data, path)
    if header["K"] != 0:
        raise FormatError(f"{path}: holds a half-space field, not a boundary field")
    return header, values.astype(np.complex128)


# ---------------------------------------------------------------------------
# coefficients


def _pairs_to_matrix(rows, name: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"block {name}: entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise FormatError(f"block {name}: expected rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _matrix_to_pairs(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def coefficients_to_dict(A: CoefficientMatrix) -> dict:
    return {"m": A.m, "n": A.n,
            "blocks": {k: _matrix_to_pairs(v) for k, v in A.blocks().items()}}


def coefficients_from_dict(d: dict) -> CoefficientMatrix:
    try:
        m, n, blocks = int(d["m"]), int(d["n"]), d["blocks"]
        parts = [_pairs_to_matrix(blocks[k], k) for k in ("pp", "pt", "tp", "tt")]
    except KeyError as exc:
        raise FormatError(f"coefficient file lacks {exc}") from None
    try:
        return CoefficientMatrix.from_blocks(*parts, m=m, n=n)
    except ValueError as exc:
        raise FormatError(f"coefficient blocks do not fit m={m}, n={n}: {exc}") from None


def read_coefficients(path) -> CoefficientMatrix:
    with open(path) as fh:
        return coefficients_from_dict(json.load(fh))


def write_coefficients(path, A: CoefficientMatrix):
    write_json(path, coefficients_to_dict(A))
