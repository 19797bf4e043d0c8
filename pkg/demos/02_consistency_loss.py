"""
Pairwise ordering loss between layers
=====================================

The loss asks each layer to keep the previous layer's answer to "is graph
n closer to graph k than graph m is?".  This walks through the pieces on
random representations.
"""

import numpy as np

from igk import autodiff as ad
from igk.autodiff import Tensor
from igk.consistency import (consistency_loss, cosine_distance_matrix, layer_pair_loss,
                             predicted_prob, reference_prob)
from igk.metrics import layer_rank_correlation

rng = np.random.default_rng(0)
prev = rng.normal(size=(5, 4))
cur = prev + 0.5 * rng.normal(size=(5, 4))

D_prev = cosine_distance_matrix(prev)
D_cur = cosine_distance_matrix(cur)
print("cosine distances, previous layer\n", D_prev.round(3))

###############################################################################
# For anchor k = 0: target from the previous layer, prediction from the
# current one.

for n, m in [(1, 2), (1, 3), (2, 4)]:
    print(f"k=0 n={n} m={m}: target {reference_prob(D_prev, 0, n, m):.1f}"
          f"  predicted {predicted_prob(D_cur, 0, n, m):.3f}")

###############################################################################
# The loss is the mean cross-entropy over all such pairs.  Only the current
# layer receives gradient; the previous one is a fixed target.

a, b = Tensor(prev, requires_grad=True), Tensor(cur, requires_grad=True)
loss = layer_pair_loss(a, b, k=0)
ad.backward(loss)
print("\npair loss", round(loss.item(), 4))
print("grad norm, previous layer:", np.linalg.norm(a.grad))
print("grad norm, current layer: ", round(float(np.linalg.norm(b.grad)), 4))

###############################################################################
# Rescaling any graph's vector leaves the loss alone (it only sees angles).

scaled = [Tensor(prev * rng.uniform(0.1, 10, (5, 1))), Tensor(cur * rng.uniform(0.1, 10, (5, 1)))]
plain = [Tensor(prev), Tensor(cur)]
print("\nloss plain vs rescaled:",
      consistency_loss(plain, rng=np.random.default_rng(1)).item(),
      consistency_loss(scaled, rng=np.random.default_rng(1)).item())

###############################################################################
# How well do the two layers agree on rankings?

print("layer rank correlation:", round(layer_rank_correlation([prev, cur]).overall, 4))
