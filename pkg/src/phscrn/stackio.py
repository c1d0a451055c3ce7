"""Bit-exact persistence: binary frame stacks, parameter files, CSV export.

Stack layout (little-endian throughout):

    magic   8 bytes  "PHSCRN1\\0"
    header  u32 ny, u32 nx, u64 nt, f64 delta_m, f64 fs_hz, f64 lambda_m,
            u8 dtype (0 = float32, 1 = float64), u8 has_mask
    mask    ny*nx bytes of 0/1, row-major (only when has_mask = 1)
    payload nt*ny*nx values, time-major row-major

Writes are atomic: data goes to a temporary file in the target directory
which is renamed into place, so a crashed run never leaves a half-valid
stack.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile

import numpy as np

from .core import FrameSeries
from .errors import DataError
from .metrics import SpectrumCurve, StructureGrid
from .screens import BoilingParams

MAGIC = b"PHSCRN1\x00"
_HEADER = struct.Struct("<IIQdddBB")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_MAX_BYTES = 2**63 - 1


class BadMagicError(DataError):
    pass


class TruncatedPayloadError(DataError):
    pass


class UnknownDtypeError(DataError):
    pass


class DimensionOverflowError(DataError):
    pass


def _atomic_write(path, payload_writer):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".phscrn-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            payload_writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_stack(series: FrameSeries, path, dtype: int = 1) -> None:
    """Write a frame stack; dtype 1 (float64) round-trips bit-exactly."""
    if dtype not in _DTYPES:
        raise UnknownDtypeError(f"unknown dtype code {dtype}")
    has_mask = series.mask is not None

    def writer(fh):
        fh.write(MAGIC)
        fh.write(
            _HEADER.pack(
                series.ny, series.nx, series.nt,
                series.delta_m, series.fs_hz, series.lambda_m,
                dtype, int(has_mask),
            )
        )
        if has_mask:
            fh.write(series.mask.astype(np.uint8).tobytes())
        fh.write(np.ascontiguousarray(series.frames, dtype=_DTYPES[dtype]).tobytes())

    _atomic_write(path, writer)


def read_stack(path) -> FrameSeries:
    """Read a frame stack, validating magic, header and payload length."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r} in {path}")
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise TruncatedPayloadError(f"truncated header in {path}")
        ny, nx, nt, delta_m, fs_hz, lambda_m, dtype, has_mask = _HEADER.unpack(raw)
        if dtype not in _DTYPES:
            raise UnknownDtypeError(f"unknown dtype code {dtype} in {path}")
        itemsize = _DTYPES[dtype].itemsize
        if ny == 0 or nx == 0 or nt == 0 or nt * ny * nx > _MAX_BYTES // itemsize:
            raise DimensionOverflowError(f"header dimensions {(nt, ny, nx)} overflow or are empty")
        mask = None
        if has_mask:
            mbytes = fh.read(ny * nx)
            if len(mbytes) < ny * nx:
                raise TruncatedPayloadError(f"truncated mask in {path}")
            mask = np.frombuffer(mbytes, dtype=np.uint8).reshape(ny, nx).astype(bool)
        expected = nt * ny * nx * itemsize
        payload = fh.read(expected)
        if len(payload) != expected:
            raise TruncatedPayloadError(
                f"truncated payload in {path}: expected {expected} bytes, got {len(payload)}"
            )
        frames = np.frombuffer(payload, dtype=_DTYPES[dtype]).reshape(nt, ny, nx).astype(np.float64)
    return FrameSeries(frames, delta_m, fs_hz, lambda_m, mask)


def write_params(params: BoilingParams, path, provenance: dict | None = None) -> None:
    """Write a parameter file (JSON); floats round-trip losslessly."""
    doc = {
        "L0_m": params.L0_m,
        "r0_m": params.r0_m,
        "vx_px": params.vx_px,
        "vy_px": params.vy_px,
        "alpha": params.alpha,
        "delta_m": params.delta_m,
        "provenance": provenance or {},
    }

    def writer(fh):
        fh.write(json.dumps(doc, indent=2).encode() + b"\n")

    _atomic_write(path, writer)


def read_params(path) -> tuple[BoilingParams, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        params = BoilingParams(
            L0_m=float(doc["L0_m"]),
            r0_m=float(doc["r0_m"]),
            vx_px=float(doc["vx_px"]),
            vy_px=float(doc["vy_px"]),
            alpha=float(doc["alpha"]),
            delta_m=float(doc["delta_m"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise DataError(f"malformed params file {path}: {e}") from e
    return params, doc.get("provenance", {})


def export_curve(obj, path) -> None:
    """Export a SpectrumCurve or StructureGrid as CSV with a header row.

    Curves are (freq_hz, power); grids are (x_px, y_px, value, count)
    in ascending (y, x) order. Values carry 17 significant digits so a
    parse-back is lossless.
    """

    def writer(fh):
        text = io.TextIOWrapper(fh, newline="")
        w = csv.writer(text)
        if isinstance(obj, SpectrumCurve):
            w.writerow(["freq_hz", "power"])
            for f, p in zip(obj.freqs, obj.power):
                w.writerow([repr(float(f)), repr(float(p))])
        elif isinstance(obj, StructureGrid):
            w.writerow(["x_px", "y_px", "value", "count"])
            for yi, y in enumerate(obj.y_offsets):
                for xi, x in enumerate(obj.x_offsets):
                    w.writerow([int(x), int(y), repr(float(obj.values[yi, xi])), int(obj.count[yi, xi])])
        else:
            raise DataError(f"cannot export object of type {type(obj).__name__}")
        text.flush()
        text.detach()

    _atomic_write(path, writer)


def export_stack_csv(series: FrameSeries, path) -> None:
    """Long-format (t, y, x, value) CSV of a frame stack; masked pixels skipped."""
    mask = series.valid_mask()

    def writer(fh):
        text = io.TextIOWrapper(fh, newline="")
        w = csv.writer(text)
        w.writerow(["t", "y", "x", "value"])
        ys, xs = np.nonzero(mask)
        for t in range(series.nt):
            frame = series.frames[t]
            for y, x in zip(ys, xs):
                w.writerow([t, int(y), int(x), repr(float(frame[y, x]))])
        text.flush()
        text.detach()

    _atomic_write(path, writer)


def import_stack_csv(path, delta_m, fs_hz, lambda_m) -> FrameSeries:
    """Read a long-format (t, y, x, value) CSV into a FrameSeries.

    Pixels absent from the file become invalid (masked out); the mask is
    dropped when every pixel is present.
    """
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:4]] != ["t", "y", "x", "value"]:
                raise DataError(f"expected 't,y,x,value' header in {path}")
            for row in reader:
                if not row:
                    continue
                rows.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
    except (ValueError, IndexError) as e:
        raise DataError(f"malformed CSV stack {path}: {e}") from e
    if not rows:
        raise DataError(f"no data rows in {path}")
    nt = max(r[0] for r in rows) + 1
    ny = max(r[1] for r in rows) + 1
    nx = max(r[2] for r in rows) + 1
    frames = np.zeros((nt, ny, nx))
    seen = np.zeros((nt, ny, nx), dtype=bool)
    for t, y, x, v in rows:
        frames[t, y, x] = v
        seen[t, y, x] = True
    mask = seen.all(axis=0)
    if mask.all():
        mask = None
    return FrameSeries(frames, delta_m, fs_hz, lambda_m, mask)
