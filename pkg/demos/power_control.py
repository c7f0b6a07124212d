"""Uplink power control with random gain matrices.

The fixed point of p = Gp + eta is the minimum-power allocation, so the
iterate should land on (I - G)^-1 eta. We also run the lossy
asynchronous simulator and compare.
"""
import numpy as np

from fastlip import AsyncSimConfig, kkt_certificate, make_power_control, solve_async, solve_fixed_point

rng = np.random.default_rng(3)
n = 4
G = rng.uniform(0, 1, (n, n))
np.fill_diagonal(G, 0.0)
G *= 0.6 / np.max(np.abs(np.linalg.eigvals(G)))
eta = rng.uniform(0.5, 1.5, n)
print("spectral radius of G:", round(float(np.max(np.abs(np.linalg.eigvals(G)))), 3))

p = make_power_control(G, eta)
sync = solve_fixed_point(p, tol=1e-12)
exact = np.linalg.solve(np.eye(n) - G, eta)
print("sync iterations:", sync.iterations)
print("max |x* - closed form|:", np.max(np.abs(sync.xstar - exact)))

# %% delays up to 5 steps, 20% of messages dropped
for seed in range(3):
    res = solve_async(p, None, AsyncSimConfig(max_delay=5, drop_prob=0.2, seed=seed), tol=1e-10)
    print(f"async seed {seed}: {res.iterations:4d} updates, gap {np.max(np.abs(res.xstar - sync.xstar)):.1e}")

# %% dual certificate
cert = kkt_certificate(p, sync.xstar, n_mu=100)
print("KKT passed:", cert.passed, " min lambda:", f"{cert.min_lambda:.3e}")
