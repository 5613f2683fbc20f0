"""A 2-mil gold wire carrying 3.7 A for half a second.

Runs the coupling fixed point, prints the wire temperature along its
length at the end of the pulse, and checks the series against the
finite-difference oracle that solves the same linearised equation.
"""

import numpy as np

from bondheat import default_config, fixed_point
from bondheat.materials import Drive
from bondheat.verify import wire_linear_gap
from bondheat.wire import solve_for_state, wire_temperature

run = default_config("Au", 2.0, 2.5)
drive = Drive(3.7, 0.5)

res = fixed_point(run.model, drive)
print(f"fixed point: {res.iterations} iterations, T_we = {res.state.T_we:.2f} K, "
      f"chi_w = {res.state.chi_w:.4g} K^3")

sol = solve_for_state(run.model, drive, res.state)
for y in np.linspace(0, run.wire.length, 6):
    T = wire_temperature(sol, y, drive.duration)
    print(f"  y = {y * 1e3:4.2f} mm   T = {T - 273.15:7.2f} degC")

gap = wire_linear_gap(run.model, drive, res.state)
print(f"series vs Crank-Nicolson (max-norm, relative): {100 * gap['max_rel']:.3f}%")
