"""Qualifying conditions on the two-variable toy problem.

Sweeps the coupling coefficients and prints which conditions hold on a
33x33 grid, then solves one instance and looks at its residual decay.
"""
import numpy as np

from fastlip import Q1, Q2D, QINFD, check_condition, make_toy, sample_grid, solve_fixed_point

# %% verdict table
conds = [Q1, Q2D, QINFD]
print("     a      b  " + "  ".join(f"{str(c):>6}" for c in conds))
for a, b in [(0.5, 0.5), (0.9, 0.9), (1.0, 1.0), (-0.4, -0.4), (-0.6, -0.6), (-0.3, 0.3), (-0.4, 0.4)]:
    p = make_toy(a, b)
    grid = sample_grid(p.box, 33)
    row = ["  pass" if check_condition(p, c, grid).passed else "  fail" for c in conds]
    print(f"{a:6.2f} {b:6.2f}  " + "  ".join(row))

# %% solve the mixed-sign instance from the corner
p = make_toy(-0.3, 0.3)
res = solve_fixed_point(p, [1.0, 1.0], tol=1e-6)
print("\nx* =", res.xstar, "after", res.iterations, "iterations")
r = np.asarray(res.residuals)
print("residual ratios:", np.round(r[1:] / r[:-1], 3))
