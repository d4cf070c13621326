"""
When damping dominates the source
=================================

For ``m >= p`` solutions exist globally.  Large data still grow, but only
polynomially.  This demo also shows why the default step splits the drift
from the damped velocity equation: splitting the damping from the force kick
turns that growth into a spurious blow-up.
"""

# %%
from conewave.grid import GridSpec, build_grid
from conewave.integrator import SchemeParams, simulate
from conewave.variational import make_model, well_constants

grid = build_grid(GridSpec(3, 32, 8, -4.0))
wc = well_constants(make_model(grid, 3.0, 2.0))
w = wc.omega1 / grid.norm(wc.omega1)

# %%
# With linear damping, ground-state data of amplitude 10 blow up.
print("m = 2:", simulate(10 * w, grid.zeros(), make_model(grid, 3.0, 2.0), SchemeParams(t_max=20.0)).status)

# %%
# With ``m = 4`` the same data, and data a hundred times larger, stay global.
model4 = make_model(grid, 3.0, 4.0)
for A in (10, 100, 1000):
    res = simulate(A * w, grid.zeros(), model4, SchemeParams(t_max=20.0))
    L2 = res.series.column("L2")
    print(f"m = 4, A = {A:5d}: {res.status}, |u|_2 from {L2[0]:.3g} to {L2[-1]:.3g}, E from {res.series.E[0]:.3g} to {res.series.E[-1]:.3g}")

# %%
# The damping-exact split drifts with the undamped kick ``h g |u|^(p-1)``,
# which is far above the balance velocity when ``|u|`` is large.
res = simulate(10 * w, grid.zeros(), model4, SchemeParams(t_max=20.0, damping="exact"))
print(f"m = 4, A = 10, damping-exact split: {res.status} at t = {res.blowup_time}")
