"""
Slice targets and error analysis
================================

Generate the experiment targets, fake a pair of motion-capture runs
(propellers off and on), and compute per-target error statistics.
"""
import math
import tempfile
from pathlib import Path

import numpy as np

from tiltx import Geometry, slice_targets
from tiltx.analysis import compare_runs, compare_to_model, load_pose_log, read_targets_csv, synthetic_log, write_pose_log
from tiltx.se3core import UnitQuaternion, matrix_to_quat
from tiltx.workspace import export_targets

g = Geometry()
out = Path(tempfile.mkdtemp())

targets = slice_targets(g)
export_targets(targets, out / "targets.csv")
print(f"{len(targets)} targets; first bent slice starts at {targets[12].id}, kappa {targets[12].cfg.kappa:.6f} /mm")

rng = np.random.default_rng(11)
refs = {t.id: (t.pose.translation, matrix_to_quat(t.pose.rotation)) for t in targets[12:24]}
offsets = {tid: rng.normal(size=3) * 3 for tid in refs}
wobble = {tid: UnitQuaternion.from_axis_angle(rng.normal(size=3), math.radians(2)) for tid in refs}

write_pose_log(synthetic_log(refs, noise_mm=0.1, rng=rng), out / "off.csv")
write_pose_log(synthetic_log(refs, offsets=offsets, rotations=wobble, noise_mm=0.5, rng=rng), out / "on.csv")
off, on = load_pose_log(out / "off.csv"), load_pose_log(out / "on.csv")

table = compare_runs(off, on)
print("target   mu_pos  |offset|  mu_ang")
for row in table.rows:
    print(f"{row.target_id:6s} {row.mu_pos:7.3f} {np.linalg.norm(offsets[row.target_id]):8.3f} {math.degrees(row.mu_ang):7.3f} deg")

model = compare_to_model(off, read_targets_csv(out / "targets.csv", g))
print("against the model:", f"{len(model.rows)} targets,", f"{len(model.gaps)} without data")
print("worst model error:", max(r.mu_pos for r in model.rows), "mm")
