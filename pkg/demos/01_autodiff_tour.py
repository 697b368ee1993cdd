"""A tour of the tiny reverse-mode autodiff engine behind storyanchor.

Every model in this package is built from a handful of float64 numpy
primitives wrapped in `Tensor` nodes. Calling `.backward()` on a scalar
walks the tape in reverse topological order and accumulates gradients.
Run:  python3 demos/01_autodiff_tour.py
"""

import numpy as np

from storyanchor import tensor as T

# --- forward + backward on a small expression ------------------------------
# f(W, x) = sum(tanh(W @ x))
rng = np.random.default_rng(0)
W = T.Tensor(rng.normal(size=(3, 4)))
x = T.Tensor(rng.normal(size=4))

y = T.sum_(T.tanh(T.matmul(W, x)))
y.backward()
print("f(W, x)      =", float(y.data))
print("df/dx        =", x.grad)

# --- the same gradient, checked against finite differences -----------------
# grad_check rebuilds the computation twice per coordinate with +/- eps
# perturbations and reports the worst relative error across all params.
W.zero_grad()
x.zero_grad()
err = T.grad_check(lambda: T.sum_(T.tanh(T.matmul(W, x))), {"W": W, "x": x})
print("worst relative error vs finite differences:", err)

# --- a cross-entropy head ---------------------------------------------------
logits = T.matmul(W, x)
loss = T.softmax_cross_entropy(logits, target_id=1)
loss.backward()
print("cross-entropy loss =", float(loss.data))
print("dloss/dW[1] =", W.grad[1])

# The full model-level check (encoder + decoder + both training losses) is
# available from the command line:   storyanchor gradcheck
