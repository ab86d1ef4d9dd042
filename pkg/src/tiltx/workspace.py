"""Workspace sampling and experiment slice targets."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arckin import ArcParams, cables_from_config, tip_depth
from .chain import TiltXConfig, hinge_to_tip_matrices, tiltx_fk
from .geometry import Geometry
from .se3core import RigidTransform

CLOUD_COLUMNS = ["x_mm", "y_mm", "z_mm", "r_mm", "kappa", "phi_deg", "alpha_deg", "beta_mm"]
TARGET_COLUMNS = ["id", "kappa", "phi_deg", "alpha_deg", "beta_mm", "l1_mm", "l2_mm", "l3_mm", "x_mm", "y_mm", "z_mm"]


@dataclass
class PointCloud:
    """Tip positions (hinge frame) with the configuration that produced each one."""

    positions: np.ndarray  # (N, 3) mm
    kappa: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def radial(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def __len__(self) -> int:
        return len(self.positions)

    def config(self, i: int, g: Geometry) -> TiltXConfig:
        return TiltXConfig(ArcParams(float(self.kappa[i]), float(self.phi[i]), g.L), float(self.alpha[i]), float(self.beta[i]))

    @classmethod
    def empty(cls) -> PointCloud:
        z = np.zeros(0)
        return cls(np.zeros((0, 3)), z, z.copy(), z.copy(), z.copy())


def grid_axes(g: Geometry, n_kappa: int, n_phi: int, n_alpha: int, n_beta: int):
    """Sample values along each configuration axis.

    Bend angle, tilt and extension are closed ranges starting at zero; the
    bend-plane angle steps by ``2*pi/n_phi`` from 0 and is wrapped to
    ``(-pi, pi]``.
    """
    for name, n in (("n_kappa", n_kappa), ("n_phi", n_phi), ("n_alpha", n_alpha), ("n_beta", n_beta)):
        if int(n) < 1:
            raise ValueError(f"{name} must be >= 1, got {n}")
    bend = np.linspace(0.0, g.theta_max, n_kappa)
    phi = np.array([math.remainder(2 * math.pi * j / n_phi, 2 * math.pi) for j in range(n_phi)])
    phi[phi == -math.pi] = math.pi
    alpha = np.linspace(0.0, math.pi / 2, n_alpha)
    beta = np.linspace(0.0, g.beta_max, n_beta)
    return bend / g.L, phi, alpha, beta


def _evaluate(kappa, phi, alpha, beta, g):
    return hinge_to_tip_matrices(kappa, phi, alpha, beta, g)[:, :3, 3]


def sample_workspace(
    g: Geometry,
    n_kappa: int = 10,
    n_phi: int = 12,
    n_alpha: int = 10,
    n_beta: int = 4,
    workers: int = 1,
    chunk_size: int = 20000,
) -> PointCloud:
    """Enumerate the configuration grid (bend-major) and record every tip position.

    Chunks may be evaluated on several threads; results are reassembled in
    grid order so the cloud does not depend on ``workers``.
    """
    kappa, phi, alpha, beta = grid_axes(g, n_kappa, n_phi, n_alpha, n_beta)
    K, F, A, B = (m.ravel() for m in np.meshgrid(kappa, phi, alpha, beta, indexing="ij"))
    bounds = range(0, len(K), chunk_size)
    jobs = [(K[i:i + chunk_size], F[i:i + chunk_size], A[i:i + chunk_size], B[i:i + chunk_size], g) for i in bounds]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _evaluate(*job), jobs))
    else:
        parts = [_evaluate(*job) for job in jobs]
    return PointCloud(np.concatenate(parts), K, F, A, B)


@dataclass(frozen=True)
class ReachStats:
    max_reach: float
    min_reach: float
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    def to_dict(self) -> dict:
        return {
            "max_reach_mm": self.max_reach,
            "min_reach_mm": self.min_reach,
            "bbox_min_mm": self.bbox_min.tolist(),
            "bbox_max_mm": self.bbox_max.tolist(),
        }


def reach_stats(cloud: PointCloud) -> ReachStats:
    if len(cloud) == 0:
        raise ValueError("cannot summarise an empty point cloud")
    r = cloud.radial
    return ReachStats(float(r.max()), float(r.min()), cloud.positions.min(axis=0), cloud.positions.max(axis=0))


# --- slice targets -----------------------------------------------------------


@dataclass(frozen=True)
class Target:
    id: str
    slice_index: int
    cfg: TiltXConfig
    pose: RigidTransform
    cable_lengths: object  # arckin.CableLengths


def default_slice_offsets(g: Geometry) -> list[float]:
    return [g.L, 0.9 * g.L, 0.8 * g.L, 0.7 * g.L]


def bend_for_depth(depth: float, g: Geometry, tol: float = 1e-10) -> float:
    """Bend angle that puts the section tip ``depth`` mm below its base.

    Bisection on the decreasing map ``bend -> L*sin(bend)/bend`` over
    ``[0, theta_max]``.
    """
    lo, hi = 0.0, g.theta_max
    deepest, shallowest = g.L, float(tip_depth(hi, g.L))
    if not (shallowest - 1e-9 <= depth <= deepest + 1e-9):
        raise ValueError(f"depth {depth} mm outside [{shallowest:.6f}, {deepest:.6f}] mm")
    if depth >= deepest:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if tip_depth(mid, g.L) > depth:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def slice_targets(
    g: Geometry,
    slice_offsets=None,
    phi_step_deg: float = 30.0,
    alpha: float = 0.0,
    beta: float = 0.0,
    id_offset: int = 0,
) -> list[Target]:
    """Experiment targets: one per bend-plane angle on each depth slice.

    Slice ``k`` with ``n`` angles gets ids ``P{id_offset + k*n + j + 1}``.
    """
    offsets = default_slice_offsets(g) if slice_offsets is None else list(slice_offsets)
    n = 360.0 / phi_step_deg
    if phi_step_deg <= 0 or abs(n - round(n)) > 1e-9:
        raise ValueError(f"phi step {phi_step_deg} deg does not divide 360")
    n = int(round(n))
    targets = []
    for k, depth in enumerate(offsets):
        try:
            bend = bend_for_depth(float(depth), g)
        except ValueError as exc:
            raise ValueError(f"slice {k} (offset {depth} mm): {exc}") from None
        for j in range(n):
            arc = ArcParams(bend / g.L, math.radians(j * phi_step_deg), g.L)
            cfg = TiltXConfig(arc, alpha, beta)
            targets.append(
                Target(
                    id=f"P{id_offset + k * n + j + 1}",
                    slice_index=k,
                    cfg=cfg,
                    pose=tiltx_fk(cfg, g),
                    cable_lengths=cables_from_config(arc, g.layout),
                )
            )
    return targets


# --- export ------------------------------------------------------------------


def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file + rename."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def cloud_csv_text(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CLOUD_COLUMNS)
    r = cloud.radial
    for i in range(len(cloud)):
        x, y, z = cloud.positions[i]
        w.writerow(
            [_fmt(x), _fmt(y), _fmt(z), _fmt(r[i]), _fmt(cloud.kappa[i]),
             _fmt(math.degrees(cloud.phi[i])), _fmt(math.degrees(cloud.alpha[i])), _fmt(cloud.beta[i])]
        )
    return buf.getvalue()


def cloud_ply_text(cloud: PointCloud) -> str:
    lines = [
        "ply",
        "format ascii 1.0",
        "comment tiltx workspace, hinge frame, mm",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property float radial",
        "end_header",
    ]
    r = cloud.radial
    for p, rad in zip(cloud.positions, r):
        lines.append(" ".join(_fmt(v) for v in (*p, rad)))
    return "\n".join(lines) + "\n"


def export_cloud(cloud: PointCloud, path, fmt: str | None = None) -> None:
    """Write the cloud as CSV or ASCII PLY (format from ``fmt`` or the file suffix)."""
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "csv":
        atomic_write_text(path, cloud_csv_text(cloud))
    elif fmt == "ply":
        atomic_write_text(path, cloud_ply_text(cloud))
    else:
        raise ValueError(f"unsupported cloud format {fmt!r} (use csv or ply)")


def targets_csv_text(targets) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TARGET_COLUMNS)
    for t in targets:
        x, y, z = t.pose.translation
        l1, l2, l3 = t.cable_lengths.as_array()
        w.writerow(
            [t.id, _fmt(t.cfg.kappa), _fmt(math.degrees(t.cfg.phi)), _fmt(math.degrees(t.cfg.alpha)),
             _fmt(t.cfg.beta), _fmt(l1), _fmt(l2), _fmt(l3), _fmt(x), _fmt(y), _fmt(z)]
        )
    return buf.getvalue()


def export_targets(targets, path) -> None:
    atomic_write_text(path, targets_csv_text(targets))
