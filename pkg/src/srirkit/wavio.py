"""Minimal RIFF/WAVE codec: PCM 16/24-bit and IEEE float32, any channel count.

The stdlib ``wave`` module cannot write float or 24-bit data, so the few
chunk layouts this package needs are handled directly. Writing is fully
deterministic (fixed 44-byte header, no metadata chunks), which the CLI
relies on for byte-identical reruns.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_FMT_PCM = 1
_FMT_FLOAT = 3


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file.

    Returns
    -------
    data : ndarray, shape (n_channels, n_samples), float64 in [-1, 1]
    sample_rate : int
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1:
        raise ValueError(f"{path}: invalid channel count {n_channels}")

    if audio_format == _FMT_FLOAT and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    elif audio_format == _FMT_PCM and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FMT_PCM and bits == 24:
        b = np.frombuffer(data, dtype=np.uint8)
        b = b[: (b.size // 3) * 3].reshape(-1, 3)
        ints = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / float(1 << 23)
    elif audio_format == _FMT_PCM and bits == 32:
        flat = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise ValueError(f"{path}: unsupported format (code {audio_format}, {bits}-bit)")

    frames = flat.size // n_channels
    return flat[: frames * n_channels].reshape(frames, n_channels).T.copy(), int(sample_rate)


def write_wav(path, data: np.ndarray, sample_rate: int, encoding: str = "float32") -> None:
    """Write channel-major ``data`` (n_channels, n_samples) to a WAV file.

    encoding: one of ``float32`` (default), ``pcm16``, ``pcm24``. PCM output
    clips to [-1, 1).
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n_channels, n_samples = data.shape
    interleaved = data.T.reshape(-1)

    if encoding == "float32":
        payload = interleaved.astype("<f4").tobytes()
        fmt_code, bits = _FMT_FLOAT, 32
    elif encoding == "pcm16":
        scaled = np.clip(np.round(interleaved * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
        fmt_code, bits = _FMT_PCM, 16
    elif encoding == "pcm24":
        scaled = np.clip(np.round(interleaved * float(1 << 23)), -(1 << 23), (1 << 23) - 1)
        ints = scaled.astype(np.int64)
        ints = np.where(ints < 0, ints + (1 << 24), ints)
        out = np.empty((ints.size, 3), dtype=np.uint8)
        out[:, 0] = ints & 0xFF
        out[:, 1] = (ints >> 8) & 0xFF
        out[:, 2] = (ints >> 16) & 0xFF
        payload = out.tobytes()
        fmt_code, bits = _FMT_PCM, 24
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block_align = n_channels * bits // 8
    byte_rate = int(sample_rate) * block_align
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt_code, n_channels, int(sample_rate), byte_rate, block_align, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)
