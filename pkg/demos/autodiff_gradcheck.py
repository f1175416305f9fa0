"""
Checking the autodiff tape against finite differences
=====================================================

A small two-layer convolution with a skip connection, differentiated by the
tape and by central differences in float64.
"""

import numpy as np

from ssfusion import tensor as T

rng = np.random.default_rng(0)
x = rng.standard_normal((1, 2, 6, 6))
k1 = rng.standard_normal((3, 2, 3, 3))
k2 = rng.standard_normal((3, 3, 3, 3))


def forward(k1_value):
    h = T.relu(T.conv2d(T.constant(x), T.constant(k1_value)))
    out = T.add(h, T.conv2d(h, T.constant(k2)))
    return float(T.reduce_mean(T.square(out)).value)


# tape gradient with respect to the first kernel
k1_node = T.parameter(k1.copy(), name="k1")
h = T.relu(T.conv2d(T.constant(x), k1_node))
loss = T.reduce_mean(T.square(T.add(h, T.conv2d(h, T.constant(k2)))))
T.backward(loss)

# the same gradient by central differences
eps = 1e-6
numeric = np.zeros_like(k1)
for idx in np.ndindex(k1.shape):
    up, down = k1.copy(), k1.copy()
    up[idx] += eps
    down[idx] -= eps
    numeric[idx] = (forward(up) - forward(down)) / (2 * eps)

err = np.abs(k1_node.grad - numeric).max() / np.abs(numeric).max()
print(f"loss {float(loss.value):.6f}")
print(f"max relative gradient error {err:.2e}")
