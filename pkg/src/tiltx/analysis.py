"""Motion-capture pose logs and per-target error statistics.

Position error is the Euclidean distance of each rest-window sample to a
reference position; orientation error is the geodesic angle of each sample
to a reference orientation. The orientation metric is our own choice: the
source experiments report an "orientation error" without defining it.
Standard deviations use the population divisor ``N`` unless ``ddof=1`` is
requested.
"""
from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arckin import ArcParams, CableLengths, config_from_cables
from .chain import TiltXConfig, tiltx_fk
from .geometry import Geometry
from .se3core import (
    RigidTransform,
    UnitQuaternion,
    geodesic_angle,
    matrix_to_quat,
    quat_average,
    quat_multiply,
)
from .workspace import CLOUD_COLUMNS, TARGET_COLUMNS, PointCloud, atomic_write_text

LOG_COLUMNS = ["t_s", "target_id", "frame_id", "x_mm", "y_mm", "z_mm", "qx", "qy", "qz", "qw"]
STATS_COLUMNS = ["target_id", "n", "mu_pos_mm", "sigma_pos_mm", "mu_ang_deg", "sigma_ang_deg"]
FRAME_IDS = ("U", "H", "B", "T", "E")
QUAT_NORM_TOL = 1e-3
MAX_REJECT_FRACTION = 0.10
REST_WINDOW_S = 10.0


class LogFormatError(ValueError):
    pass


def natural_key(label: str):
    """Sort key that orders ``P2`` before ``P10``."""
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", label)]


@dataclass
class PoseLog:
    """Column-oriented pose samples. Quaternions are stored scalar-first ``(w, x, y, z)``."""

    t: np.ndarray
    target_id: np.ndarray
    frame_id: np.ndarray
    position: np.ndarray
    quat: np.ndarray
    rejected: list = field(default_factory=list)  # (line number, reason)

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_records(cls, records) -> PoseLog:
        """Build from ``(t, target_id, frame_id, position, quat_wxyz)`` tuples."""
        records = list(records)
        if not records:
            return cls(np.zeros(0), np.array([], dtype=object), np.array([], dtype=object), np.zeros((0, 3)), np.zeros((0, 4)))
        t, tid, fid, pos, q = zip(*records)
        return cls(
            np.asarray(t, dtype=float),
            np.asarray(tid, dtype=object),
            np.asarray(fid, dtype=object),
            np.asarray(pos, dtype=float).reshape(-1, 3),
            np.asarray(q, dtype=float).reshape(-1, 4),
        )

    def target_ids(self) -> list[str]:
        return sorted(set(self.target_id.tolist()), key=natural_key)

    def group(self, target_id: str, frame_id: str = "E") -> np.ndarray:
        """Indices of one (target, frame) group in time order."""
        idx = np.flatnonzero((self.target_id == target_id) & (self.frame_id == frame_id))
        return idx[np.argsort(self.t[idx], kind="stable")]

    def transformed(self, rotation=None, shift=None) -> PoseLog:
        """Copy with every pose left-multiplied by a rigid motion (rotation as unit quaternion)."""
        pos = self.position.copy()
        q = self.quat.copy()
        if rotation is not None:
            r = rotation.to_matrix()
            pos = pos @ r.T
            q = np.array([quat_multiply(rotation.as_array(), qi) for qi in q]).reshape(-1, 4)
        if shift is not None:
            pos = pos + np.asarray(shift, dtype=float)
        return PoseLog(self.t.copy(), self.target_id.copy(), self.frame_id.copy(), pos, q)


def _normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(q @ q))
    # leave already-unit quaternions untouched so write/read round trips are exact
    return q if abs(n - 1.0) <= 1e-15 else q / n


def parse_pose_log(text: str, source: str = "<log>") -> PoseLog:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError(f"{source}: missing header") from None
    if header != LOG_COLUMNS:
        raise LogFormatError(f"{source}: header must be {','.join(LOG_COLUMNS)}, got {','.join(header)}")
    records, rejected = [], []
    last_t: dict = {}
    n_rows = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        n_rows += 1
        try:
            if len(row) != len(LOG_COLUMNS):
                raise ValueError(f"expected {len(LOG_COLUMNS)} fields, got {len(row)}")
            t = float(row[0])
            tid, fid = row[1], row[2]
            vals = [float(v) for v in row[3:]]
            if not all(math.isfinite(v) for v in [t, *vals]):
                raise ValueError("non-finite value")
            if not tid:
                raise ValueError("empty target_id")
            if fid not in FRAME_IDS:
                raise ValueError(f"unknown frame_id {fid!r}")
            qx, qy, qz, qw = vals[3:]
            q = np.array([qw, qx, qy, qz])
            if abs(math.sqrt(float(q @ q)) - 1.0) > QUAT_NORM_TOL:
                raise ValueError("quaternion norm off by more than 1e-3")
            key = (tid, fid)
            if key in last_t and t < last_t[key]:
                raise ValueError("timestamp goes backwards within its group")
            last_t[key] = t
        except ValueError as exc:
            rejected.append((lineno, str(exc)))
            continue
        records.append((t, tid, fid, vals[:3], _normalize(q)))
    if n_rows and len(rejected) > MAX_REJECT_FRACTION * n_rows:
        first = "; ".join(f"line {ln}: {why}" for ln, why in rejected[:3])
        raise LogFormatError(f"{source}: {len(rejected)} of {n_rows} rows rejected ({first})")
    log = PoseLog.from_records(records)
    log.rejected = rejected
    return log


def load_pose_log(path) -> PoseLog:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read pose log {path}: {exc.strerror}") from exc
    return parse_pose_log(text, str(path))


def pose_log_text(log: PoseLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for i in range(len(log)):
        qw, qx, qy, qz = log.quat[i]
        w.writerow([repr(float(log.t[i])), log.target_id[i], log.frame_id[i],
                    *(repr(float(v)) for v in log.position[i]),
                    repr(float(qx)), repr(float(qy)), repr(float(qz)), repr(float(qw))])
    return buf.getvalue()


def write_pose_log(log: PoseLog, path) -> None:
    """Write a log in the ingest format with shortest round-trip float text."""
    atomic_write_text(path, pose_log_text(log))


# --- statistics --------------------------------------------------------------


@dataclass
class Window:
    t: np.ndarray
    position: np.ndarray
    quat: np.ndarray
    short: bool  # group shorter than the requested window

    def __len__(self) -> int:
        return len(self.t)


def rest_window(log: PoseLog, target_id: str, frame_id: str = "E", window_s: float = REST_WINDOW_S) -> Window:
    """Trailing ``window_s`` seconds of one target's samples.

    A group spanning less than the window is returned whole with
    ``short=True`` and a warning.
    """
    idx = log.group(target_id, frame_id)
    if len(idx) == 0:
        raise ValueError(f"no samples for target {target_id!r}, frame {frame_id!r}")
    t = log.t[idx]
    span = t[-1] - t[0]
    short = span < window_s - 1e-9
    if short:
        warnings.warn(
            f"target {target_id} frame {frame_id}: only {span:.3f} s of data for a {window_s:g} s window",
            stacklevel=2,
        )
    else:
        idx = idx[t >= t[-1] - window_s - 1e-9]
    return Window(log.t[idx], log.position[idx], log.quat[idx], short)


def _mean_std(e: np.ndarray, ddof: int) -> tuple[float, float]:
    if len(e) == 0:
        raise ValueError("no samples")
    mu = float(np.mean(e))
    if len(e) - ddof <= 0:
        return mu, 0.0
    sigma = math.sqrt(float(np.sum((e - mu) ** 2)) / (len(e) - ddof))
    return mu, sigma


def position_errors(positions, reference) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    return np.linalg.norm(p - np.asarray(reference, dtype=float), axis=1)


def position_error_stats(positions, reference, ddof: int = 0) -> tuple[float, float]:
    """Mean and standard deviation of per-sample Euclidean distance to ``reference`` (mm)."""
    return _mean_std(position_errors(positions, reference), ddof)


def _as_quats(samples) -> list[UnitQuaternion]:
    return [s if isinstance(s, UnitQuaternion) else UnitQuaternion.from_array(s) for s in samples]


def orientation_error_stats(samples, reference: UnitQuaternion, ddof: int = 0):
    """``(mean_quat, mu_ang, sigma_ang)`` with angles in radians."""
    quats = _as_quats(samples)
    if not quats:
        raise ValueError("no samples")
    mean = quat_average(quats)
    angles = np.array([geodesic_angle(q, reference) for q in quats])
    mu, sigma = _mean_std(angles, ddof)
    return mean, mu, sigma


@dataclass(frozen=True)
class TargetStats:
    target_id: str
    n_samples: int
    mu_pos: float
    sigma_pos: float
    mean_quat: UnitQuaternion
    mu_ang: float
    sigma_ang: float


@dataclass
class ErrorTable:
    rows: list[TargetStats]
    gaps: list[str] = field(default_factory=list)  # ids present in only one source
    short_windows: list[str] = field(default_factory=list)

    def by_id(self) -> dict[str, TargetStats]:
        return {r.target_id: r for r in self.rows}

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for r in self.rows:
            w.writerow([r.target_id, r.n_samples, f"{r.mu_pos:.6f}", f"{r.sigma_pos:.6f}",
                        f"{math.degrees(r.mu_ang):.6f}", f"{math.degrees(r.sigma_ang):.6f}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.csv_text())


def _quiet_window(log, tid, frame_id, window_s) -> Window:
    # short windows are collected into the table instead of warned about
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rest_window(log, tid, frame_id, window_s)


def _stats_against(test: PoseLog, tid: str, ref_pos, ref_quat, frame_id, window_s, ddof, short):
    win = _quiet_window(test, tid, frame_id, window_s)
    if win.short:
        short.append(tid)
    mu_p, sd_p = position_error_stats(win.position, ref_pos, ddof)
    mean_q, mu_a, sd_a = orientation_error_stats(win.quat, ref_quat, ddof)
    return TargetStats(tid, len(win), mu_p, sd_p, mean_q, mu_a, sd_a)


def _target_ids(targets) -> list[str] | None:
    if targets is None:
        return None
    return [t if isinstance(t, str) else t.id for t in targets]


def compare_runs(
    baseline: PoseLog,
    test: PoseLog,
    targets=None,
    frame_id: str = "E",
    window_s: float = REST_WINDOW_S,
    ddof: int = 0,
) -> ErrorTable:
    """Error of ``test`` samples against the baseline rest-window mean pose, per target.

    The reference is the baseline's mean position and Markley-mean
    orientation. Ids missing from either log (or from ``targets``, when
    given) go to ``gaps`` and are left out of the table.
    """
    base_ids, test_ids = set(baseline.target_ids()), set(test.target_ids())
    wanted = _target_ids(targets)
    pool = base_ids | test_ids if wanted is None else set(wanted)
    usable = sorted(pool & base_ids & test_ids, key=natural_key)
    gaps = sorted(pool - set(usable), key=natural_key)
    rows, short = [], []
    for tid in usable:
        ref = _quiet_window(baseline, tid, frame_id, window_s)
        if ref.short:
            short.append(tid)
        ref_pos = ref.position.mean(axis=0)
        ref_quat = quat_average(ref.quat)
        rows.append(_stats_against(test, tid, ref_pos, ref_quat, frame_id, window_s, ddof, short))
    return ErrorTable(rows, gaps, sorted(set(short), key=natural_key))


def compare_to_model(
    test: PoseLog,
    targets,
    frame_id: str = "E",
    window_s: float = REST_WINDOW_S,
    ddof: int = 0,
) -> ErrorTable:
    """Error of logged samples against each target's model pose."""
    test_ids = set(test.target_ids())
    rows, short, gaps = [], [], []
    for tgt in sorted(targets, key=lambda t: natural_key(t.id)):
        if tgt.id not in test_ids:
            gaps.append(tgt.id)
            continue
        ref_quat = matrix_to_quat(tgt.pose.rotation)
        rows.append(_stats_against(test, tgt.id, tgt.pose.translation, ref_quat, frame_id, window_s, ddof, short))
    known = {t.id for t in targets}
    gaps += sorted(test_ids - known, key=natural_key)
    return ErrorTable(rows, sorted(gaps, key=natural_key), short)


# --- readers for files written by the workspace module -----------------------


def _read_csv(path, columns) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != columns:
        raise LogFormatError(f"{path}: header must be {','.join(columns)}")
    return list(reader)


def read_cloud_csv(path) -> PointCloud:
    rows = _read_csv(path, CLOUD_COLUMNS)
    if not rows:
        return PointCloud.empty()
    a = np.array([[float(r[c]) for c in CLOUD_COLUMNS] for r in rows])
    return PointCloud(a[:, 0:3].copy(), a[:, 4].copy(), np.radians(a[:, 5]), np.radians(a[:, 6]), a[:, 7].copy())


@dataclass(frozen=True)
class ModelTarget:
    id: str
    cfg: TiltXConfig
    pose: RigidTransform
    cable_lengths: CableLengths


def read_targets_csv(path, g: Geometry) -> list[ModelTarget]:
    """Load a slice-target table and rebuild each model pose.

    Curvature is recovered from the stored cable lengths, which keep more
    significant digits than the rounded ``kappa`` column; the bend-plane
    angle comes from ``phi_deg`` so straight targets keep their twist.
    """
    out = []
    for r in _read_csv(path, TARGET_COLUMNS):
        cables = CableLengths(float(r["l1_mm"]), float(r["l2_mm"]), float(r["l3_mm"]))
        kappa = config_from_cables(cables, g.layout, g.L).kappa
        arc = ArcParams(kappa, math.radians(float(r["phi_deg"])), g.L)
        cfg = TiltXConfig(arc, math.radians(float(r["alpha_deg"])), float(r["beta_mm"]))
        pose = tiltx_fk(cfg, g)
        xyz = np.array([float(r["x_mm"]), float(r["y_mm"]), float(r["z_mm"])])
        out.append(ModelTarget(r["id"], cfg, RigidTransform(pose.rotation, xyz), cables))
    return out


# --- synthetic logs ----------------------------------------------------------


def synthetic_log(
    references: dict,
    rate_hz: float = 100.0,
    duration_s: float = 12.0,
    offsets: dict | None = None,
    noise_mm: float = 0.0,
    rotations: dict | None = None,
    frame_id: str = "E",
    rng: np.random.Generator | None = None,
) -> PoseLog:
    """Pose log holding each target still at a known pose.

    ``references`` maps target id to ``(position, UnitQuaternion)``.
    ``offsets`` adds a constant position shift per target, ``rotations`` a
    constant orientation perturbation (left-multiplied), ``noise_mm`` an
    isotropic Gaussian position noise.
    """
    rng = rng or np.random.default_rng(0)
    n = int(round(duration_s * rate_hz)) + 1
    records = []
    t0 = 0.0
    for tid in sorted(references, key=natural_key):
        pos, q = references[tid]
        pos = np.asarray(pos, dtype=float) + (np.asarray(offsets[tid], dtype=float) if offsets and tid in offsets else 0.0)
        qa = q.as_array()
        if rotations and tid in rotations:
            qa = quat_multiply(rotations[tid].as_array(), qa)
            qa = qa / np.linalg.norm(qa)
        noise = rng.normal(0.0, noise_mm, size=(n, 3)) if noise_mm > 0 else np.zeros((n, 3))
        for i in range(n):
            records.append((t0 + i / rate_hz, tid, frame_id, pos + noise[i], qa))
        t0 += duration_s + 5.0
    return PoseLog.from_records(records)
