# %% [markdown]
# # The convolutional network
#
# Parse the architecture string, check its shape chain, and verify the
# hand-written backward pass against finite differences on a tiny net.

# %%
import numpy as np

from hyperwave import neuralnet as nn

spec = nn.parse_architecture("IC(5,15,64)LPC(1,5,64)LPF(384)F(192)O", (205, 216, 1), 9)
for layer, shape in zip(spec.layers, spec.shapes):
    print(f"{layer.name:7s} {layer.kind:6s} {shape}")

# %%
tiny = nn.Network(nn.parse_architecture("IC(2,3,4)PF(8)O", (8, 8, 1), 9), seed=0, conv_std=0.5)
x = np.random.default_rng(0).standard_normal((8, 8, 1))
loss, grads = tiny.loss_and_grads(x, 3)

w = tiny.params["conv1.weight"]
i = (1, 1, 0, 2)
old = w[i]
w[i] = old + 1e-3
up = tiny.loss_and_grads(x, 3)[0]
w[i] = old - 1e-3
down = tiny.loss_and_grads(x, 3)[0]
w[i] = old
print("analytic", grads["conv1.weight"][i], "numeric", (up - down) / 2e-3)

# %% [markdown]
# An all-zero network outputs uniform logits, so its loss is ln 9.

# %%
zero = nn.Network(spec, seed=0)
for v in zero.params.values():
    v[...] = 0
print(zero.loss_and_grads(np.zeros((205, 216, 1)), 0)[0], np.log(9))
