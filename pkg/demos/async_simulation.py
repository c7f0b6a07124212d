"""How delay and loss slow down the asynchronous iteration.

With zero delay and no loss the simulator is plain Gauss-Seidel.
"""
import numpy as np

from fastlip import AsyncSimConfig, make_toy, solve_async
from fastlip.solver import solve_gauss_seidel

p = make_toy(-0.3, 0.3)
gs = solve_gauss_seidel(p, [1.0, 1.0])
a0 = solve_async(p, [1.0, 1.0], AsyncSimConfig(max_delay=0, drop_prob=0.0, seed=0))
print("Gauss-Seidel iterations:", gs.iterations, " async B=0:", a0.iterations,
      " identical:", np.array_equal(np.array(gs.iterates), np.array(a0.iterates)))

print("\n B  drop  mean updates")
for B in (0, 2, 5, 10):
    for drop in (0.0, 0.2, 0.5):
        counts = [solve_async(p, None, AsyncSimConfig(max_delay=B, drop_prob=drop, seed=s)).iterations
                  for s in range(20)]
        print(f"{B:2d}  {drop:4.1f}  {np.mean(counts):8.1f}")
