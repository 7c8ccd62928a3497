"""Binary PGM/PPM output for panels, hyper-images and scatter plots."""

from pathlib import Path

import numpy as np

# qualitative palette for class colouring
PALETTE = np.array([
    (228, 26, 28), (55, 126, 184), (77, 175, 74), (152, 78, 163), (255, 127, 0),
    (166, 86, 40), (247, 129, 191), (153, 153, 153), (255, 255, 51),
], dtype=np.uint8)


def to_gray(values, lo=None, hi=None, flip=True):
    """Min-max scale to 0..255; a constant matrix maps to black.

    With `flip`, row 0 is drawn at the bottom (low frequencies low).
    """
    values = np.asarray(values, dtype=np.float64)
    lo = values.min() if lo is None else lo
    hi = values.max() if hi is None else hi
    if hi > lo:
        scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    else:
        scaled = np.zeros_like(values)
    img = np.round(scaled * 255).astype(np.uint8)
    return img[::-1] if flip else img


def pgm_bytes(gray):
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes()


def ppm_bytes(rgb):
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def write_pgm(path, gray):
    Path(path).write_bytes(pgm_bytes(gray))


def write_ppm(path, rgb):
    Path(path).write_bytes(ppm_bytes(rgb))


def read_pnm(path):
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    magic, w, h, maxval, payload = parts[0], int(parts[1]), int(parts[2]), int(parts[3]), parts[4]
    if maxval != 255 or magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM variant")
    channels = 1 if magic == b"P5" else 3
    pixels = np.frombuffer(payload, dtype=np.uint8, count=w * h * channels)
    return pixels.reshape(h, w) if channels == 1 else pixels.reshape(h, w, channels)


def waveform_image(samples, width=1000, height=200):
    """Per-column min/max envelope of a waveform, white on black."""
    samples = np.asarray(samples, dtype=np.float64)
    img = np.zeros((height, width), dtype=np.uint8)
    cols = np.array_split(samples, width)
    mid = (height - 1) / 2
    for x, chunk in enumerate(cols):
        if chunk.size == 0 or not np.any(chunk):
            continue
        top = int(round(mid - np.clip(chunk.max(), -1, 1) * mid))
        bottom = int(round(mid - np.clip(chunk.min(), -1, 1) * mid))
        img[min(top, bottom):max(top, bottom) + 1, x] = 255
    return img


def scatter_image(points, labels, classes, size=300, margin=10):
    """Side-by-side scatter panels of (pc1, pc2), (pc1, pc3), (pc2, pc3)."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] < 3:
        points = np.pad(points, ((0, 0), (0, 3 - points.shape[1])))
    canvas = np.full((size, 3 * size, 3), 255, dtype=np.uint8)
    index = {c: i for i, c in enumerate(classes)}
    for panel, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
        xs, ys = points[:, a], points[:, b]
        span_x = max(xs.max() - xs.min(), 1e-12)
        span_y = max(ys.max() - ys.min(), 1e-12)
        px = margin + np.round((xs - xs.min()) / span_x * (size - 2 * margin - 1)).astype(int)
        py = size - 1 - margin - np.round((ys - ys.min()) / span_y * (size - 2 * margin - 1)).astype(int)
        canvas[:, panel * size] = 0
        for x, y, label in zip(px, py, labels):
            colour = PALETTE[index[label] % len(PALETTE)]
            x0 = panel * size + x
            canvas[max(0, y - 1):y + 2, max(0, x0 - 1):x0 + 2] = colour
    return canvas
