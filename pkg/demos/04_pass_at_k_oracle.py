#!/usr/bin/env python3
"""The oracle ceiling: pass@k as a function of sample count.

pass@k estimates the probability that at least one of k drawn candidates
passes every evaluation test, given c correct among n sampled. It bounds
what any selection method can achieve on the same pool, so reports carry
it next to the per-method accuracies.
"""

import numpy as np

from execrank import pass_at_k

# Per-task correct-candidate counts for a hypothetical 50-candidate pool.
correct_counts = np.array([0, 1, 2, 5, 10, 20, 35, 50])
n = 50
ks = [1, 5, 10, 20, 25, 50]

header = "c\\k " + "".join(f"{k:>9}" for k in ks)
print(header)
print("-" * len(header))
for c in correct_counts:
    row = "".join(f"{pass_at_k(n, int(c), k):>9.4f}" for k in ks)
    print(f"{c:>3} {row}")

print()
print("suite-level oracle (mean over the task pool):")
for k in ks:
    mean = float(np.mean([pass_at_k(n, int(c), k) for c in correct_counts]))
    print(f"  pass@{k:>2} = {mean:.4f}")

# Sanity: the closed form agrees with resampling draws.
rng = np.random.default_rng(7)
c, k, draws = 5, 10, 200_000
subset = rng.random((draws, n)).argpartition(k - 1, axis=1)[:, :k]
estimate = float((subset < c).any(axis=1).mean())
print()
print(f"closed form pass@{k} with c={c}: {pass_at_k(n, c, k):.4f}; "
      f"{draws}-draw resampler: {estimate:.4f}")
