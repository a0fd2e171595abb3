"""What featureless message passing can and cannot see.

Every node starts from the same all-ones vectors, so any discrimination must
come from structure.  Softmax-normalized attention provably cannot move off
that constant start (uniform weights average identical vectors into identical
vectors); sigmoid coefficients without neighborhood normalization can.  The
same operator algebra also recovers spectral structure: iterating
T = (I + D^-1/2 A D^-1/2)/2 and deflating the principal direction leaves the
Fiedler vector, the classic spectral cut direction.
"""
# %%
import numpy as np

from mind.diffcore import symmetric_eigh
from mind.encoder import (
    EncoderConfig,
    EncoderParams,
    encode,
    fiedler_estimate,
    init_reference_params,
    normalized_laplacian,
    softmax_attention_reference,
)
from mind.graph import Graph

rng = np.random.default_rng(2)

# %%
# A star: one hub, five leaves.  Between-node variance per layer:
star = Graph(6, np.array([(0, i) for i in range(1, 6)]))
cfg = EncoderConfig()
ref_states = softmax_attention_reference(star, cfg, init_reference_params(cfg, rng))
print("softmax-normalized reference, per-layer embedding variance:")
print([f"{s.reshape(6, -1).var(axis=0).max():.2e}" for s in ref_states])

params = EncoderParams.create(cfg, seed=3)
res = encode(star, params)
print("unnormalized attention profile variance:",
      f"{res.profiles.var(axis=0).max():.2e}")
print("hub vs leaf profile distance:",
      f"{np.linalg.norm(res.profiles[0] - res.profiles[1]):.3f}")

# %%
# Equal degree, different context: node 0's neighbors are leaves, node 3's
# neighbors branch further.  Profiles tell them apart; a degree histogram
# cannot.
witness = Graph(10, np.array([(0, 1), (0, 2), (3, 4), (3, 5),
                              (4, 6), (4, 7), (5, 8), (5, 9)]))
res = encode(witness, params)
print("\nequal-degree witness, profile distance:",
      f"{np.linalg.norm(res.profiles[0] - res.profiles[3]):.4f}")

# %%
# Fiedler estimation on a barbell: two 5-cliques joined by one edge.  The
# estimate's sign splits the cliques; the dense Jacobi eigensolver is the
# independent oracle.
k = 5
edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
edges += [(k + i, k + j) for i in range(k) for j in range(i + 1, k)]
edges.append((k - 1, k))
barbell = Graph(2 * k, np.array(edges))
est = fiedler_estimate(barbell, iters=500)
w, v = symmetric_eigh(normalized_laplacian(barbell))
oracle = v[:, 1]
cos = abs(est @ oracle) / (np.linalg.norm(est) * np.linalg.norm(oracle))
print(f"\nbarbell Fiedler cosine vs eigensolver: {cos:.6f}")
print("estimate signs:", np.sign(est).astype(int))
