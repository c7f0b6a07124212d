"""Finite-horizon control of a scalar stock.

Checks the zero-control criterion for two control gains and compares
with brute-force enumeration over a level grid on a short horizon.
"""
import numpy as np

from fastlip import control_bruteforce, make_optimal_control, result1_check, solve_fixed_point

params = {"a": 0.5, "b": 0.3, "c_s": 3.0, "c_u": 2.0}

for b in (0.3, 0.5):
    oc, P, _ = make_optimal_control("linear", dict(params, b=b), N=20)
    rep = result1_check(oc)
    print(f"b={b}: {'pass' if rep.passed else 'fail'}  lhs={rep.lhs:.4f} rhs={rep.rhs:.4f} margin={rep.margin:.4f}")

# %% the stacked fixed point picks zero control when the criterion holds
oc, P, _ = make_optimal_control("linear", params, N=3, w=[0, 0, 0])
xs = solve_fixed_point(P).xstar
u_fl = -xs[oc.N:] + 0.0
seq, cost = control_bruteforce(oc, 11)
print("\nfixed-point control:", u_fl, " cost", round(oc.total_cost(u_fl), 6))
print("brute-force control:", seq.ravel(), " cost", round(cost, 6))

# %% larger gain: enumeration finds a cheaper non-zero policy
oc, _, _ = make_optimal_control("linear", dict(params, b=0.5), N=3, w=[0, 0, 0])
seq, cost = control_bruteforce(oc, 11)
print("b=0.5 brute force:", seq.ravel(), " cost", round(cost, 6), " zero-control cost", oc.total_cost(np.zeros(3)))
