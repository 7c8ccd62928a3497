# %% [markdown]
# # Latent embeddings, PCA and synthesis
#
# Embed every snippet with the fold-0 network, project to three principal
# components, and run gradient descent on the input to build a hyper-image the
# network assigns to each class.

# %%
import numpy as np

from hyperwave import pnm
from hyperwave.benchmark import run_benchmark
from hyperwave.embedding import (centroid_separation, embed_store, pca_fit, pca_project,
                                 synthesize_hyperimage)

run = run_benchmark(seed=0)
network = run.result.checkpoints[0].network
ids = run.store.ids()
labels = [run.store[i].label for i in ids]
vectors = embed_store(network, run.store, ids)
print(vectors.shape, "intra/inter cosine:", centroid_separation(vectors, labels))

# %%
model = pca_fit(vectors, 3)
print("explained variance:", model.explained_variance_ratio.round(3))
points = pca_project(model, vectors)
pnm.write_ppm("pca.ppm", pnm.scatter_image(points[:, :2], labels, run.manifest.classes))

# %%
net64 = network.copy(dtype=np.float64)
for target, name in enumerate(run.manifest.classes):
    x, trajectory = synthesize_hyperimage(net64, target, steps=500, stop_probability=0.95)
    print(f"{name:6s} steps={len(trajectory) - 1:3d} p={trajectory[-1]:.3f}")
    pnm.write_pgm(f"synth_{name}.pgm", pnm.to_gray(x[..., 0]))
