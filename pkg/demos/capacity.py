"""Current capacity: mid-point temperature after 50 ms against current.

Gold wires of 1 and 2 mil at 2.5 mm; the melting crossing is found by
inverse interpolation on a 0.5 A grid.
"""

from bondheat.dataio import scan_to_melting
from bondheat.materials import ModelConfig, epoxy_compound, nominal_wire, reference_boundaries

for d in (1.0, 2.0):
    model = ModelConfig(nominal_wire("Au", d, 2.5), epoxy_compound(), reference_boundaries())
    curve = scan_to_melting(model, hold=0.05, step=0.5, i_max=20.0)
    print(f"Au {d:g} mil:")
    for p in curve.points[::2]:
        print(f"  {p.current:5.1f} A  {p.temperature - 273.15:8.1f} degC  ({p.status})")
    print(f"  melts at about {curve.crossing:.2f} A")
