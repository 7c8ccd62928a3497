import numpy as np
import pytest

from hyperwave.audio_io import AudioBuffer

SR = 22050


def naive_dft(x):
    """O(N^2) DFT with exact integer phase reduction, row-blocked to bound memory."""
    x = np.asarray(x, dtype=np.complex128)
    n = len(x)
    idx = np.arange(n)
    out = np.empty(n, dtype=np.complex128)
    for start in range(0, n, 256):
        k = np.arange(start, min(n, start + 256))[:, None]
        phase = (k * idx[None, :]) % n
        out[start:start + len(k)] = np.exp(-2j * np.pi * phase / n) @ x
    return out


def numerical_gradient(f, x, step=1e-3, indices=None):
    """Central differences of scalar f at array x (perturbed in place, restored)."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in (range(flat.size) if indices is None else indices):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        g[i] = (up - down) / (2 * step)
    return grad


def relative_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def tone(freq, seconds=5.0, sr=SR, amplitude=0.5):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * t), sr, f"sine{freq}")


def jacobi_eigenvalues(a, sweeps=100, tol=1e-15):
    """Cyclic Jacobi rotations on a symmetric matrix; independent of LAPACK."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * np.linalg.norm(a):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1)) if theta else 1.0
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::-1]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
