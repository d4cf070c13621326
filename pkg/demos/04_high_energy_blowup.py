"""
Blow-up from arbitrarily high energy
====================================

A sign condition on ``(u0, u1)`` forces blow-up whatever the size of
``E(0)``.  Build such data at twice the well depth, run them, and compare
the detected time with the explicit upper bound.
"""

# %%
import math

from conewave.diagnostics import (
    blowup_time_upper_bound,
    construct_high_energy_data,
    high_energy_blowup_check,
    high_energy_constants_for,
    norm_hypothesis_threshold,
)
from conewave.grid import GridSpec, build_grid
from conewave.integrator import SchemeParams, simulate
from conewave.operators import second_eigenmode
from conewave.variational import make_model, total_energy, well_constants

# %%
# ``p = 4`` lies above the exponent range needed for the well theory on
# ``n = 3`` but the high-energy argument does not use it.
grid = build_grid(GridSpec(3, 32, 8, -4.0))
model = make_model(grid, 4.0, 2.0, enforce_hp=False)
wc = well_constants(model, restarts=40)
hec = high_energy_constants_for(model, wc)
print(f"M0 = {hec.M0:.6g} (= 0.5/lambda1 = {0.5 / wc.lambda1:.6g}), M = {hec.M:.6g}, K(M) = {hec.K_M}, eta(M) = {hec.eta_M:.6g}")
print(f"phi changes sign on {hec.bracket}: {hec.phi_at_bracket}")

# %%
# Data ``u0 = r1 w1``, ``u1 = r1 w1 + r2 w2`` with ``E(0) = 2d`` exactly.
w1 = wc.omega1
w2 = second_eigenmode(grid, w1)
R = 2 * wc.d
u0, u1 = construct_high_energy_data(R, w1, w2, model, hec)
print(f"E(0)/R - 1 = {total_energy(u0, u1, model) / R - 1:.1e}, sign condition holds: {high_energy_blowup_check(u0, u1, model, hec)}")
res = simulate(u0, u1, model, SchemeParams(t_max=20.0), wc)
print(f"blow-up detected at t = {res.blowup_time:.4f}")

# %%
# The lifespan bound needs ``|u0|^2`` above a multiple of ``E(0)``; start the
# amplitude search there.  The bound uses truncation-dependent surrogate
# constants and is loose by a couple of orders of magnitude.
r1_min = (1 + 1e-9) * math.sqrt(norm_hypothesis_threshold(R, model, wc)) / grid.norm(w1)
u0, u1 = construct_high_energy_data(R, w1, w2, model, hec, r1_min=r1_min)
bound = blowup_time_upper_bound(u0, u1, model, wc, hec)
res = simulate(u0, u1, model, SchemeParams(t_max=20.0), wc)
print(f"detected T = {res.blowup_time:.4f} <= T_upper = {bound.T_upper:.4g}")
print(f"(the coefficient ratio taken the other way round would give {bound.T_upper_as_printed:.3g}, below the observed time)")
