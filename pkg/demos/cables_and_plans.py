"""
Cable lengths and actuation plans
=================================

Map an arc to cable lengths and back, then turn a move between two
configurations into motor increments.
"""
import math

import numpy as np

from tiltx import ArcParams, Geometry, TiltXConfig, actuation_plan
from tiltx.arckin import cables_from_config, config_from_cables
from tiltx.chain import revolutions, tilt_compensation

g = Geometry()

arc = ArcParams(0.002, math.radians(90), g.L)
lengths = cables_from_config(arc, g.layout)
print("cable lengths (mm):", np.round(lengths.as_array(), 4))
back = config_from_cables(lengths, g.layout, g.L)
print(f"recovered kappa {back.kappa:.6f} /mm, phi {math.degrees(back.phi):.3f} deg")

# tilting moves cable 1 over its pulley; the other two stay put
print("tilt 0 -> 90 deg changes the cables by", tilt_compensation(0.0, math.pi / 2, g))

a = TiltXConfig.make(0.0, 0.0, 0.0, 0.0, g)
b = TiltXConfig.make(0.003, math.radians(45), math.radians(60), 30.0, g)
c = TiltXConfig.make(0.001, math.radians(-120), math.radians(90), 75.0, g)
plan = actuation_plan(a, c, g)
for name, dq in zip(["q1", "q2", "q3", "q4 (tilt)", "q5 (telescope)"], plan.dq.as_array()):
    print(f"  {name:15s} {revolutions(dq):9.4f} rev")

# plans depend only on their endpoints, so a detour through b costs the same
via_b = actuation_plan(a, b, g).dq + actuation_plan(b, c, g).dq
print("detour mismatch:", np.abs(via_b.as_array() - plan.dq.as_array()).max())
