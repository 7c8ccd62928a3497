# %% [markdown]
# # From waveform to hyper-image
#
# One synthetic "low" song is cut into a 5 s snippet and pushed through every
# feature extractor. The six planes are then stacked and standardized.

# %%
import numpy as np

from hyperwave import dsp, features, pnm
from hyperwave.audio_io import snippet
from hyperwave.synthetic import make_corpus

buf, label, song_id = make_corpus(n_songs=1, seed=0)[0]
clip = snippet(buf, 2.0, 5.0)
print(song_id, label, clip.duration, "s at", clip.sample_rate, "Hz")

# %% [markdown]
# The STFT grid: 2048-sample Hann frames every 512 samples give 216 columns.

# %%
spec = dsp.stft(clip)
print(spec.bins.shape)

# %%
mel = features.mel_spectrogram(clip)
chroma = features.chromagram(clip)
tempo = features.cyclic_tempogram(clip)
print("dominant pitch classes:",
      np.bincount(chroma.values.argmax(axis=0), minlength=12).argsort()[::-1][:3])
print("dominant tempo class:", np.bincount(tempo.values.argmax(axis=0)).argmax())

# %% [markdown]
# Assemble the hyper-image. Each plane has mean 0 and std 1 on its own.

# %%
img = features.build_hyperimage(clip, label=label)
for name, height in img.planes:
    p = img.plane(name)
    print(f"{name:18s} rows={height:3d} mean={p.mean():+.1e} std={p.std():.6f}")
pnm.write_pgm("hyperimage.pgm", pnm.to_gray(img.pixels))
