"""Temperature of the moulding compound around the reference wire.

Prints a coarse map of the cross-section through the middle of the wire
at the end of the pulse: chip and die-attach heating plus the wire's own
contribution through the heat kernel.
"""

import numpy as np

from bondheat import fixed_point
from bondheat.compound import CompoundSolution, line_source
from bondheat.dataio import default_config
from bondheat.materials import Drive
from bondheat.spectral import build_basis
from bondheat.wire import solve_for_state

model = default_config("Au", 2.0, 2.5).model
drive = Drive(3.7, 0.5)
state = fixed_point(model, drive).state

basis = build_basis(model.wire, model.compound, model.bc, *model.counts)
comp = CompoundSolution(model.compound, model.bc, basis, model.wire.length)
src = line_source(solve_for_state(model, drive, state), state, model.constants, comp.modes)

W, H, L = model.compound.width, model.compound.height, model.wire.length
xs = np.linspace(0, W / 2, 7)
zs = np.linspace(H / 2, -H / 2, 7)
print("degC at y = L/2; rows top to die, columns wire axis to side wall")
for z in zs:
    row = comp.temperature(xs, L / 2, z, drive.duration, source=src) - 273.15
    print(" ".join(f"{v:6.1f}" for v in row))
