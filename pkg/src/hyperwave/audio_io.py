"""Decoding and conditioning of raw audio.

Only uncompressed RIFF/WAVE is read here. Lossy formats (mp3 and friends)
must be decoded beforehand with an external tool, e.g.::

    ffmpeg -i song.mp3 -ac 1 -ar 22050 song.wav
"""

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_SAMPLE_RATE = 22050

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioDecodeError(ValueError):
    """Base class for WAV decoding failures."""


class MalformedHeaderError(AudioDecodeError):
    pass


class UnsupportedCodecError(AudioDecodeError):
    pass


class TruncatedDataError(AudioDecodeError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


def _parse_fmt(chunk):
    if len(chunk) < 16:
        raise MalformedHeaderError(f"fmt chunk too short ({len(chunk)} bytes)")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", chunk)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 40:
            raise MalformedHeaderError("extensible fmt chunk too short")
        # first two bytes of the subformat GUID carry the real format tag
        (tag,) = struct.unpack_from("<H", chunk, 24)
    if channels < 1:
        raise MalformedHeaderError("channel count is zero")
    if rate == 0:
        raise MalformedHeaderError("sample rate is zero")
    if tag == WAVE_FORMAT_PCM and bits in (16, 32):
        dtype = np.dtype(f"<i{bits // 8}")
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedCodecError(f"unsupported codec: format tag 0x{tag:04x}, {bits} bits")
    if block_align != channels * dtype.itemsize:
        raise MalformedHeaderError(
            f"block align {block_align} inconsistent with {channels} x {bits}-bit samples")
    return dtype, channels, rate


def decode_wav(data, source_id=""):
    """Decode a RIFF/WAVE byte string into a mono `AudioBuffer`.

    Integer PCM is scaled by the type's maximum magnitude (2**15 or 2**31),
    channels are averaged, and float samples are clipped to [-1, 1].
    """
    data = bytes(data)
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeaderError("missing RIFF/WAVE signature")
    offset = 12
    fmt = None
    while offset + 8 <= len(data):
        chunk_id = data[offset:offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        if chunk_id == b"fmt ":
            if body_start + size > len(data):
                raise MalformedHeaderError("fmt chunk runs past end of file")
            fmt = _parse_fmt(data[body_start:body_start + size])
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedHeaderError("data chunk precedes fmt chunk")
            dtype, channels, rate = fmt
            if body_start + size > len(data):
                raise TruncatedDataError(
                    f"data chunk declares {size} bytes, only {len(data) - body_start} present")
            if size % (channels * dtype.itemsize):
                raise TruncatedDataError("data chunk ends mid-frame")
            raw = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=body_start)
            if raw.size == 0:
                raise TruncatedDataError("data chunk is empty")
            frames = raw.reshape(-1, channels).astype(np.float64)
            if dtype.kind == "i":
                frames /= float(2 ** (8 * dtype.itemsize - 1))
            samples = frames.mean(axis=1) if channels > 1 else frames[:, 0]
            return AudioBuffer(np.clip(samples, -1.0, 1.0), int(rate), source_id)
        offset = body_start + size + (size & 1)
    if fmt is None:
        raise MalformedHeaderError("no fmt chunk")
    raise TruncatedDataError("no data chunk")


def encode_wav(buf, sample_format="float32"):
    """Encode a buffer as mono WAV bytes, `sample_format` in {"float32", "pcm16"}."""
    if sample_format == "float32":
        tag, payload = WAVE_FORMAT_IEEE_FLOAT, buf.samples.astype("<f4").tobytes()
        bits = 32
    elif sample_format == "pcm16":
        scaled = np.clip(np.round(buf.samples * 32768.0), -32768, 32767)
        tag, payload, bits = WAVE_FORMAT_PCM, scaled.astype("<i2").tobytes(), 16
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, buf.sample_rate, buf.sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path):
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id=str(path))


def write_wav(path, buf, sample_format="float32"):
    Path(path).write_bytes(encode_wav(buf, sample_format))


def resample(buf, target_rate):
    """Linear-interpolation resampler.

    Output length is ``round(len * target_rate / sample_rate)``; output sample
    ``j`` sits at input position ``j * sample_rate / target_rate``.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buf.sample_rate:
        return buf
    n_out = max(1, int(round(len(buf) * target_rate / buf.sample_rate)))
    positions = np.arange(n_out) * (buf.sample_rate / target_rate)
    samples = np.interp(positions, np.arange(len(buf)), buf.samples)
    return AudioBuffer(samples, int(target_rate), buf.source_id)


def snippet(buf, start_s, dur_s):
    """Contiguous slice of ``round(dur_s * sample_rate)`` samples."""
    start = int(round(start_s * buf.sample_rate))
    length = int(round(dur_s * buf.sample_rate))
    if start_s < 0 or length < 1 or start + length > len(buf):
        raise ValueError(
            f"window [{start_s}s, {start_s + dur_s}s) outside buffer of {buf.duration:.3f}s")
    return AudioBuffer(buf.samples[start:start + length], buf.sample_rate, buf.source_id)


def snippet_starts(duration_s, dur_s, count):
    """Start times of `count` evenly spaced snippets that fit inside `duration_s`."""
    if dur_s > duration_s:
        raise ValueError(f"snippet of {dur_s}s does not fit in {duration_s:.3f}s of audio")
    if count == 1:
        return [0.0]
    span = duration_s - dur_s
    return [span * i / (count - 1) for i in range(count)]


@dataclass
class DatasetManifest:
    """Rows of ``(audio_path, label, song_id)`` plus the sorted class list."""

    entries: list
    classes: list = field(default_factory=list)

    def __post_init__(self):
        if not self.classes:
            self.classes = sorted({label for _, label, _ in self.entries})
        missing = {label for _, label, _ in self.entries} - set(self.classes)
        if missing:
            raise ValueError(f"labels not in class list: {sorted(missing)}")

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["path", "label", "song_id"]:
                raise ValueError(f"{path}: expected header path,label,song_id, got {header}")
            entries = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                audio = Path(row[0])
                if not audio.is_absolute():
                    audio = path.parent / audio
                entries.append((str(audio), row[1], row[2]))
        return cls(entries)

    def to_csv(self, path):
        """Write the manifest; audio paths under its directory are stored relative to it."""
        path = Path(path)
        base = path.parent.resolve()
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", "label", "song_id"])
            for audio, label, song_id in self.entries:
                resolved = Path(audio).resolve()
                if resolved.is_relative_to(base):
                    audio = resolved.relative_to(base).as_posix()
                writer.writerow([audio, label, song_id])
