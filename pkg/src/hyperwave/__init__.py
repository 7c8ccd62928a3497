"""hyperwave: acoustic hyper-images, a from-scratch CNN, and latent song embeddings."""

from hyperwave.audio_io import AudioBuffer, DatasetManifest, decode_wav, resample, snippet
from hyperwave.features import HyperImage, build_hyperimage
from hyperwave.neuralnet import Network, parse_architecture

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "DatasetManifest",
    "HyperImage",
    "Network",
    "build_hyperimage",
    "decode_wav",
    "parse_architecture",
    "resample",
    "snippet",
]
