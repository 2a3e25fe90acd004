"""WAV ingestion/emission and the fixed-rate standard clip.

Every recording is reduced to a 6.0 s mono clip at 22050 Hz (132300
samples); with 2048-point frames hopped by 512 this yields exactly 259
analysis frames downstream, which is the shape the models are built around.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .errors import (
    EmptyClip,
    IoFailure,
    MalformedRiff,
    ShapeMismatch,
    TruncatedData,
    UnsupportedEncoding,
)

SAMPLE_RATE = 22050
CLIP_SECONDS = 6.0
CLIP_SAMPLES = 132300  # 6.0 s * 22050 Hz

_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    """Mono waveform with its sample rate; amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyClip("clip must hold a nonempty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            raise EmptyClip("clip contains non-finite samples")
        if self.sample_rate <= 0:
            raise EmptyClip(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def require_standard(clip: AudioClip) -> AudioClip:
    """Assert the clip is in standardized form (22050 Hz, 132300 samples)."""
    if clip.sample_rate != SAMPLE_RATE or len(clip.samples) != CLIP_SAMPLES:
        raise ShapeMismatch(
            f"expected standardized clip ({CLIP_SAMPLES} samples @ {SAMPLE_RATE} Hz), "
            f"got {len(clip.samples)} @ {clip.sample_rate}"
        )
    return clip


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE byte stream (PCM 16/24/32-bit int or 32-bit float, 1-2 channels).

    Integer samples are scaled to [-1, 1] by the signed maximum of their bit
    width; stereo is averaged down to mono.
    """
    if len(data) < 12:
        raise TruncatedData("buffer shorter than a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedRiff("not a RIFF/WAVE container")

    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + size > len(data):
            raise TruncatedData(f"chunk {cid!r} declares {size} bytes past end of buffer")
        body = data[body_start : body_start + size]
        if cid == b"fmt ":
            if size < 16:
                raise MalformedRiff("fmt chunk too small")
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", body, 0)
            if tag == _FMT_EXTENSIBLE:
                if size < 40:
                    raise MalformedRiff("extensible fmt chunk too small")
                (tag,) = struct.unpack_from("<H", body, 24)
            fmt = (tag, channels, rate, block_align, bits)
        elif cid == b"data":
            raw = body
        pos = body_start + size + (size & 1)

    if fmt is None or raw is None:
        raise MalformedRiff("missing fmt or data chunk")
    tag, channels, rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels}-channel audio not supported")
    if rate <= 0:
        raise MalformedRiff(f"invalid sample rate {rate}")

    if tag == _FMT_PCM and bits == 16:
        x = np.frombuffer(raw[: len(raw) - len(raw) % 2], dtype="<i2").astype(np.float64)
        x /= 2 ** 15
    elif tag == _FMT_PCM and bits == 24:
        usable = len(raw) - len(raw) % 3
        b = np.frombuffer(raw[:usable], dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v[v >= 2 ** 23] -= 2 ** 24
        x = v.astype(np.float64) / 2 ** 23
    elif tag == _FMT_PCM and bits == 32:
        x = np.frombuffer(raw[: len(raw) - len(raw) % 4], dtype="<i4").astype(np.float64)
        x /= 2 ** 31
    elif tag == _FMT_FLOAT and bits == 32:
        x = np.frombuffer(raw[: len(raw) - len(raw) % 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncoding(f"format tag {tag} with {bits} bits not supported")

    expected_frames = len(raw) // max(block_align, 1) if block_align else None
    if x.size == 0:
        raise TruncatedData("data chunk holds no complete sample")
    if channels == 2:
        if len(x) % 2:
            x = x[:-1]
        x = x.reshape(-1, 2).mean(axis=1)
    if expected_frames and len(x) < expected_frames:
        raise TruncatedData("data chunk ends mid-frame")
    return AudioClip(samples=x, sample_rate=int(rate))


def read_wav(path: str | Path) -> AudioClip:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_wav(data)


def write_wav(clip: AudioClip, path: str | Path, float32: bool = False) -> None:
    """Write a mono WAV: 16-bit PCM by default, or 32-bit float for lossless caching."""
    x = clip.samples
    if float32:
        payload = x.astype("<f4").tobytes()
        tag, bits = _FMT_FLOAT, 32
    else:
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
        tag, bits = _FMT_PCM, 16
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        1,
        clip.sample_rate,
        clip.sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(payload),
    )
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def standardize_clip(clip: AudioClip) -> AudioClip:
    """Resample to 22050 Hz, then truncate (keeping the head) or zero-pad to 132300 samples."""
    x = clip.samples
    if clip.sample_rate != SAMPLE_RATE:
        ratio = SAMPLE_RATE / clip.sample_rate
        n_full = int(round(len(x) * ratio))
        if n_full > CLIP_SAMPLES:
            # only the head survives truncation; resample just that prefix
            # (plus kernel margin) instead of the whole recording
            margin = int(np.ceil(32 / (min(1.0, ratio) * 0.945))) + 2
            need = min(len(x), int(np.ceil(CLIP_SAMPLES / ratio)) + margin)
            x = dsp.resample_to_length(x[:need], int(round(need * ratio)))
        else:
            x = dsp.resample_to_length(x, max(n_full, 1))
    if len(x) >= CLIP_SAMPLES:
        x = x[:CLIP_SAMPLES].copy()
    else:
        x = np.pad(x, (0, CLIP_SAMPLES - len(x)))
    return AudioClip(samples=x, sample_rate=SAMPLE_RATE)
