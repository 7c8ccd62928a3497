"""Run configuration shared by every pipeline stage."""

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from hyperwave.features import FeatureConfig
from hyperwave.neuralnet import ArchitectureError, parse_architecture
from hyperwave.training import MODES, SONG_ORDERED, TrainConfig

PATH_FIELDS = ("manifest", "out_dir", "audio")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = 22050
    n_fft: int = 2048
    hop: int = 512
    snippet_s: float = 5.0
    snippets_per_song: int = 4
    n_mels: int = 128
    n_mfcc: int = 20
    n_tempo_bins: int = 32
    tempo_window: int = 128
    contrast_bands: int = 6
    contrast_alpha: float = 0.02
    architecture: str = "IC(5,15,64)LPC(1,5,64)LPF(384)F(192)O"
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    conv_std: float = 0.01
    patience: int = 5
    dtype: str = "float32"
    k: int = 10
    split_mode: str = SONG_ORDERED
    seed: int = 0
    checkpoint_fold: int = 0
    pca_components: int = 3
    synth_target: str = ""
    synth_steps: int = 500
    synth_step_size: float = 10.0
    synth_l2: float = 1e-3
    manifest: str = ""
    out_dir: str = "out"
    audio: str = ""

    def __post_init__(self):
        positive = ("sample_rate", "n_fft", "hop", "snippet_s", "snippets_per_song", "n_mels",
                    "n_mfcc", "n_tempo_bins", "tempo_window", "contrast_bands", "epochs",
                    "batch_size", "lr", "pca_components", "synth_steps", "synth_step_size")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("momentum", "weight_decay", "conv_std", "patience", "synth_l2",
                     "checkpoint_fold"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.n_fft & (self.n_fft - 1):
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.hop > self.n_fft:
            raise ConfigError("hop must not exceed n_fft")
        if self.n_mfcc > self.n_mels:
            raise ConfigError("n_mfcc must not exceed n_mels")
        if not 0 < self.contrast_alpha <= 0.5:
            raise ConfigError("contrast_alpha must lie in (0, 0.5]")
        if self.split_mode not in MODES:
            raise ConfigError(f"split_mode must be one of {MODES}")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        try:
            parse_architecture(self.architecture, self.input_shape, 2)
        except (ArchitectureError, ValueError) as exc:
            raise ConfigError(f"architecture {self.architecture!r}: {exc}") from None

    @property
    def features(self):
        return FeatureConfig(sample_rate=self.sample_rate, n_fft=self.n_fft, hop=self.hop,
                             n_mels=self.n_mels, n_mfcc=self.n_mfcc,
                             n_tempo_bins=self.n_tempo_bins, tempo_window=self.tempo_window,
                             contrast_bands=self.contrast_bands,
                             contrast_alpha=self.contrast_alpha)

    @property
    def n_frames(self):
        return 1 + int(round(self.snippet_s * self.sample_rate)) // self.hop

    @property
    def input_shape(self):
        height = self.n_mels + self.n_mfcc + 12 + self.n_tempo_bins + self.contrast_bands + 1 + 6
        return (height, self.n_frames, 1)

    @property
    def training(self):
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                           momentum=self.momentum, weight_decay=self.weight_decay,
                           conv_std=self.conv_std, patience=self.patience, dtype=self.dtype,
                           seed=self.seed)

    def _hash(self, names):
        blob = json.dumps({n: getattr(self, n) for n in sorted(names)}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def feature_hash(self):
        """Hash of everything that determines the hyper-image store."""
        return self._hash(["sample_rate", "n_fft", "hop", "snippet_s", "snippets_per_song",
                           "n_mels", "n_mfcc", "n_tempo_bins", "tempo_window",
                           "contrast_bands", "contrast_alpha"])

    def training_hash(self):
        """Hash of everything that determines the trained checkpoints."""
        return self._hash(["sample_rate", "n_fft", "hop", "snippet_s", "snippets_per_song",
                           "n_mels", "n_mfcc", "n_tempo_bins", "tempo_window",
                           "contrast_bands", "contrast_alpha", "architecture", "epochs",
                           "batch_size", "lr", "momentum", "weight_decay", "conv_std",
                           "patience", "dtype", "k", "split_mode", "seed"])

    def hash(self):
        """Hash of every non-path field; stamped into all stage outputs."""
        return self._hash([f.name for f in fields(self) if f.name not in PATH_FIELDS])

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path=None, **overrides):
        data = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if path and data.get("manifest") and not Path(data["manifest"]).is_absolute():
            data["manifest"] = str(Path(path).parent / data["manifest"])
        data.update({k: v for k, v in overrides.items() if v is not None})
        for name, value in data.items():
            expected = (int, float) if known[name] is float else known[name]
            if isinstance(value, bool) or not isinstance(value, expected):
                raise ConfigError(f"{name}: expected {known[name].__name__}, got {value!r}")
        return cls(**data)
