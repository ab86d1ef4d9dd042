"""
Exporting the workspace
=======================

Write a sampled workspace as CSV and PLY, then solve inverse kinematics
for a few of its points.
"""
import tempfile
from pathlib import Path

import numpy as np

from tiltx import Geometry, export_cloud, sample_workspace, tiltx_fk
from tiltx.chain import ik_solve

g = Geometry()
cloud = sample_workspace(g, 8, 12, 6, 3, workers=4)

out = Path(tempfile.mkdtemp())
export_cloud(cloud, out / "cloud.csv")
export_cloud(cloud, out / "cloud.ply")
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
print((out / "cloud.csv").read_text().splitlines()[:3])

rng = np.random.default_rng(3)
for i in rng.choice(len(cloud), 5, replace=False):
    target = cloud.positions[i]
    res = ik_solve(target, g)
    err = np.linalg.norm(tiltx_fk(res.cfg, g).translation - target)
    print(f"point {i:4d}: {res.total_iterations:3d} iterations, residual {err:.2e} mm")
