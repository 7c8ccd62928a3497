"""Binary tensor files.

A TNSR record is::

    b"TNSR" | version u32 | rank u32 | dims u64 * rank | float32 data (row-major)

all little-endian. A TNSC container holds named records::

    b"TNSC" | count u32 | (name_len u32 | utf-8 name | TNSR record) * count
"""

import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"TNSR"
CONTAINER_MAGIC = b"TNSC"
FORMAT_VERSION = 1


class TensorFormatError(ValueError):
    pass


def tensor_to_bytes(array):
    array = np.ascontiguousarray(array, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<II", FORMAT_VERSION, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + array.tobytes(order="C")


def _read_tensor(buf, offset):
    if buf[offset:offset + 4] != TENSOR_MAGIC:
        raise TensorFormatError(f"bad tensor magic at byte {offset}")
    if len(buf) < offset + 12:
        raise TensorFormatError("truncated tensor header")
    version, rank = struct.unpack_from("<II", buf, offset + 4)
    if version != FORMAT_VERSION:
        raise TensorFormatError(f"unsupported tensor format version {version}")
    offset += 12
    if len(buf) < offset + 8 * rank:
        raise TensorFormatError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}Q", buf, offset)
    offset += 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    end = offset + 4 * count
    if len(buf) < end:
        raise TensorFormatError("truncated tensor data")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    return data.reshape(dims).astype(np.float32), end


def tensor_from_bytes(buf):
    array, end = _read_tensor(bytes(buf), 0)
    if end != len(buf):
        raise TensorFormatError(f"{len(buf) - end} trailing bytes after tensor")
    return array


def container_to_bytes(tensors):
    """Serialize a mapping of name -> array, preserving insertion order."""
    parts = [CONTAINER_MAGIC, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(tensor_to_bytes(array))
    return b"".join(parts)


def container_from_bytes(buf):
    buf = bytes(buf)
    if buf[:4] != CONTAINER_MAGIC:
        raise TensorFormatError("bad container magic")
    (count,) = struct.unpack_from("<I", buf, 4)
    offset = 8
    tensors = {}
    for _ in range(count):
        if len(buf) < offset + 4:
            raise TensorFormatError("truncated container entry")
        (name_len,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        tensors[name], offset = _read_tensor(buf, offset)
    if offset != len(buf):
        raise TensorFormatError(f"{len(buf) - offset} trailing bytes after container")
    return tensors


def save_tensor(path, array):
    Path(path).write_bytes(tensor_to_bytes(array))


def load_tensor(path):
    return tensor_from_bytes(Path(path).read_bytes())


def save_container(path, tensors):
    Path(path).write_bytes(container_to_bytes(tensors))


def load_container(path):
    return container_from_bytes(Path(path).read_bytes())
