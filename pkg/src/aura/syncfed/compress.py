"""Lossless delta compression for timestamped telemetry series.

Timestamps: delta-of-delta, zigzag varint, with run-length encoding of zero
runs (regular sampling compresses to almost nothing).

Values: if every value survives an exact decimal-scaling round trip (scale in
{1, 10, 100, 1000}), the scaled integers are encoded delta-of-delta like the
timestamps; otherwise each value's IEEE-754 bits are XORed against the
previous value and varint encoded. Either way decompress(compress(x)) == x
byte-exactly.
"""

from __future__ import annotations

import struct

_MODE_INT = 1
_MODE_XOR = 2
_SCALES = (1, 10, 100, 1000)

# token preceding a varint run length of zero delta-of-deltas
_ZERO_RUN = 0


def _zigzag(n: int) -> int:
    return (n << 1) ^ (n >> 63) if n < 0 else n << 1


def _unzigzag(z: int) -> int:
    return (z >> 1) ^ -(z & 1)


def _write_varint(out: bytearray, n: int) -> None:
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _read_varint(blob: bytes, pos: int) -> tuple[int, int]:
    result = shift = 0
    while True:
        b = blob[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7


def _encode_dod(out: bytearray, values: list[int]) -> None:
    """First value raw, first delta, then delta-of-deltas.

    Each delta-of-delta is a varint token: 0 announces a run of zeros (run
    length follows), any other token t encodes the value unzigzag(t - 1).
    """
    _write_varint(out, _zigzag(values[0]))
    if len(values) == 1:
        return
    prev_delta = values[1] - values[0]
    _write_varint(out, _zigzag(prev_delta))
    zero_run = 0
    for i in range(2, len(values)):
        delta = values[i] - values[i - 1]
        dod = delta - prev_delta
        prev_delta = delta
        if dod == 0:
            zero_run += 1
            continue
        if zero_run:
            _write_varint(out, _ZERO_RUN)
            _write_varint(out, zero_run)
            zero_run = 0
        _write_varint(out, _zigzag(dod) + 1)
    if zero_run:
        _write_varint(out, _ZERO_RUN)
        _write_varint(out, zero_run)


def _decode_dod(blob: bytes, pos: int, count: int) -> tuple[list[int], int]:
    z, pos = _read_varint(blob, pos)
    values = [_unzigzag(z)]
    if count == 1:
        return values, pos
    z, pos = _read_varint(blob, pos)
    prev_delta = _unzigzag(z)
    values.append(values[0] + prev_delta)
    while len(values) < count:
        token, pos = _read_varint(blob, pos)
        if token == _ZERO_RUN:
            run, pos = _read_varint(blob, pos)
            for _ in range(run):
                values.append(values[-1] + prev_delta)
        else:
            prev_delta += _unzigzag(token - 1)
            values.append(values[-1] + prev_delta)
    return values, pos


def _try_int_mode(values: list[float]) -> tuple[int, list[int]] | None:
    for scale in _SCALES:
        scaled = []
        ok = True
        for v in values:
            try:
                s = round(v * scale)
            except (OverflowError, ValueError):
                ok = False
                break
            if abs(s) > 1 << 52 or s / scale != v:
                ok = False
                break
            scaled.append(s)
        if ok:
            return scale, scaled
    return None


def delta_compress(series: list[tuple[int, float]]) -> bytes:
    """Compress a timestamp-ordered list of (timestamp_ms, value) pairs."""
    if not series:
        return b""
    timestamps = [int(t) for t, _ in series]
    values = [float(v) for _, v in series]
    out = bytearray()
    _write_varint(out, len(series))
    _encode_dod(out, timestamps)
    attempt = _try_int_mode(values)
    if attempt is not None:
        scale, scaled = attempt
        out.append(_MODE_INT)
        _write_varint(out, scale)
        _encode_dod(out, scaled)
    else:
        out.append(_MODE_XOR)
        prev = 0
        for v in values:
            bits = struct.unpack("<Q", struct.pack("<d", v))[0]
            _write_varint(out, bits ^ prev)
            prev = bits
    return bytes(out)


def delta_decompress(blob: bytes) -> list[tuple[int, float]]:
    if not blob:
        return []
    count, pos = _read_varint(blob, 0)
    timestamps, pos = _decode_dod(blob, pos, count)
    mode = blob[pos]
    pos += 1
    values: list[float] = []
    if mode == _MODE_INT:
        scale, pos = _read_varint(blob, pos)
        scaled, pos = _decode_dod(blob, pos, count)
        values = [s / scale for s in scaled]
    elif mode == _MODE_XOR:
        prev = 0
        for _ in range(count):
            x, pos = _read_varint(blob, pos)
            prev ^= x
            values.append(struct.unpack("<d", struct.pack("<Q", prev))[0])
    else:
        raise ValueError(f"unknown value mode {mode}")
    return list(zip(timestamps, values))


def raw_size(series: list[tuple[int, float]]) -> int:
    """Uncompressed wire size: 8-byte timestamp + 8-byte double per sample."""
    return 16 * len(series)
