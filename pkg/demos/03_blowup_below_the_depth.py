"""
Blow-up below the depth
=======================

Outside the well, with energy below ``d``, solutions blow up.  Detected
blow-up times are insensitive to the norm cap, and the negative-energy
lifespan estimate can be calibrated from one run and tested on another.
"""

# %%
import numpy as np

from conewave.diagnostics import (
    calibrate_subcritical_C,
    first_entry_into_V,
    subcritical_L0,
    subcritical_eta_range,
    subcritical_time_bound,
)
from conewave.grid import GridSpec, build_grid
from conewave.integrator import SchemeParams, simulate
from conewave.variational import lambda_star, make_model, total_energy, well_constants

grid = build_grid(GridSpec(3, 64, 16, -4.0))
model = make_model(grid, 3.0, 2.0)
wc = well_constants(model, restarts=20)
w = wc.omega1 / grid.norm(wc.omega1)

# %%
# Ground-state data past the Nehari point: ``I(u0) < 0``.  Once the energy is
# below ``d`` the label is ``InsideV`` on every record until blow-up.
u0 = 1.2 * lambda_star(w, model) * w
res = simulate(u0, grid.zeros(), model, SchemeParams(t_max=50.0), wc)
labels = {lab.value for lab in res.series.label}
print(f"E0/d = {res.series.E[0] / wc.d:.3f}, blow-up at t = {res.blowup_time:.4f}, labels seen {labels}")
print("first record inside V below d:", first_entry_into_V(res.series, wc.d))

# %%
# Raising the cap tenfold barely moves the detected time: the solution is
# already on its way to infinity when the cap is crossed.
for cap_factor in (1.0, 10.0):
    r = simulate(20 * w, grid.zeros(), model, SchemeParams(t_max=50.0, blowup_cap=cap_factor * 1e6 * 20))
    print(f"cap x{cap_factor:>4}: T = {r.blowup_time:.5f}")

# %%
# The negative-energy lifespan bound ``T* = (1-eta)/(C eta) L0^(-eta/(1-eta))``
# has an unspecified constant ``C``.  Fit it on one run, then check that a
# run with larger ``L0`` blows up before its own ``T*``.
eta = subcritical_eta_range(3.0, 2.0)[1] / 2
runs = []
for A in (20.0, 30.0, 40.0):
    u0 = A * w
    E0 = total_energy(u0, np.zeros_like(u0), model)
    T = simulate(u0, np.zeros_like(u0), model, SchemeParams(t_max=50.0)).blowup_time
    runs.append((A, subcritical_L0(E0, 0.0, eta, 0.01), T))
C = calibrate_subcritical_C(runs[0][2], runs[0][1], eta)
for A, L0, T in runs:
    print(f"A = {A:4.0f}: L0 = {L0:9.4g}, observed T = {T:.4f}, T* = {subcritical_time_bound(L0, eta, C):.4f}")
