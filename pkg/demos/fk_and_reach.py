"""
Forward kinematics and reach
============================

Walk the hinge-to-tip chain for a few configurations, then sample the
workspace and look at how far the tip gets.
"""
import math

import numpy as np

from tiltx import Geometry, TiltXConfig, reach_stats, sample_workspace, tiltx_fk
from tiltx.chain import closed_form_fk

g = Geometry()
print(f"section length {g.L} mm, hinge-to-base {g.s} mm, stroke {g.beta_max} mm")

# straight, pointing down, retracted: the tip sits s + L below the hinge
home = TiltXConfig.make(0.0, 0.0, 0.0, 0.0, g)
print("home tip:", tiltx_fk(home, g).translation)

# tilted forward and fully extended: the longest straight-line reach
forward = TiltXConfig.make(0.0, 0.0, math.pi / 2, g.beta_max, g)
print("forward tip:", tiltx_fk(forward, g).translation)

# a bent configuration, by matrix chain and by the expanded closed form
bent = TiltXConfig.make(math.radians(60) / g.L, math.radians(30), math.radians(20), 40.0, g)
a, b = tiltx_fk(bent, g).matrix, closed_form_fk(bent, g).matrix
print("bent tip:", np.round(a[:3, 3], 3), " chain vs closed form:", np.abs(a - b).max())

cloud = sample_workspace(g, 12, 24, 10, 4)
stats = reach_stats(cloud)
print(f"{len(cloud)} samples, reach {stats.min_reach:.1f} .. {stats.max_reach:.1f} mm")
print("bounding box:", np.round(stats.bbox_min, 1), np.round(stats.bbox_max, 1))
