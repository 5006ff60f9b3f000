"""The tensor engine in miniature: a conv layer, a loss, and its gradients,
verified against central finite differences.

Run: python demos/02_autograd_and_gradcheck.py
"""
import numpy as np

import freqface.autograd as ag
from freqface.autograd import Tensor, tensor
from freqface.gradcheck import check_function

rng = np.random.default_rng(0)

x = tensor(rng.standard_normal((3, 8, 8)), requires_grad=True, dtype=np.float64)
w = tensor(ag.conv_weight(rng, 4, 3, 3, np.float64), requires_grad=True, dtype=np.float64)
b = tensor(np.zeros(4), requires_grad=True, dtype=np.float64)

out = ag.leaky_relu(ag.conv2d(x, w, b, padding=1), 0.2)
loss = (out * out).mean()
loss.backward()

print(f"loss = {loss.item():.6f}")
print(f"grad shapes: x {x.grad.shape}, w {w.grad.shape}, b {b.grad.shape}")
print(f"|dL/dw| max = {np.abs(w.grad).max():.4f}")

proj = Tensor(rng.standard_normal((4, 8, 8)))
err = check_function(
    lambda xx, ww, bb: (ag.conv2d(xx, ww, bb, padding=1) * proj).sum(),
    [rng.standard_normal((3, 8, 8)), rng.standard_normal((4, 3, 3, 3)),
     rng.standard_normal(4)])
print(f"conv2d analytic vs central differences: max rel err {err:.2e}")

# gradients accumulate additively across uses
y = tensor(np.ones(4), requires_grad=True, dtype=np.float64)
(y + y).sum().backward()
print(f"d(sum(y + y))/dy = {y.grad} (each use contributes once)")
