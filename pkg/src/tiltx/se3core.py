"""Rigid transforms, elementary motions and quaternion helpers.

Rotations live as 3x3 matrices inside :class:`RigidTransform`; quaternions
are only used for logged orientations and averaging. Quaternions are stored
scalar-first ``(w, x, y, z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ORTHO_TOL = 1e-9


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over the last two axes with a fixed summation order.

    Works on single matrices and on stacks; every output element is the
    same sequence of float operations regardless of stack size, so batched
    and one-off evaluations agree bit for bit.
    """
    n = a.shape[-1]
    out = a[..., :, 0, None] * b[..., None, 0, :]
    for k in range(1, n):
        out = out + a[..., :, k, None] * b[..., None, k, :]
    return out


def project_to_rotation(m: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (Frobenius sense) via SVD."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def orthonormality_error(r: np.ndarray) -> float:
    return float(np.max(np.abs(r.T @ r - np.eye(3))))


@dataclass(frozen=True)
class RigidTransform:
    """Homogeneous pose: ``p_A = rotation @ p_B + translation`` (mm)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("transform must be finite")
        if orthonormality_error(r) > 1e-6 or abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("rotation is not a proper orthonormal matrix")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> RigidTransform:
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points) -> np.ndarray:
        """Map points (shape ``(3,)`` or ``(N, 3)``) from the child to the parent frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return compose(self, other)

    def allclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))


def compose(*transforms: RigidTransform) -> RigidTransform:
    """Left-to-right product ``a @ b @ ...`` of rigid transforms.

    The rotation block is re-projected onto SO(3) if accumulated drift
    exceeds ``ORTHO_TOL``.
    """
    if not transforms:
        return RigidTransform.identity()
    m = transforms[0].matrix
    for tf in transforms[1:]:
        m = matmul(m, tf.matrix)
    r = m[:3, :3]
    if orthonormality_error(r) > ORTHO_TOL:
        r = project_to_rotation(r)
    return RigidTransform(r, m[:3, 3])


def inverse(tf: RigidTransform) -> RigidTransform:
    return tf.inverse()


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Hinge-convention y rotation ``[[c, 0, -s], [0, 1, 0], [s, 0, c]]``.

    This is the transpose of the usual right-handed matrix. With it, the
    hinge tilt ``rot_y(-alpha)`` swings the -z axis towards -x.
    """
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


_ROTATIONS = {"x": rot_x, "y": rot_y, "z": rot_z}
_AXES = {"x": 0, "y": 1, "z": 2}


def elementary(kind: str, axis: str, value: float) -> RigidTransform:
    """Pure rotation (``kind="rotation"``, radians) or translation (mm) along one axis."""
    if axis not in _AXES:
        raise ValueError(f"unknown axis {axis!r}")
    if not math.isfinite(value):
        raise ValueError("elementary motion value must be finite")
    if kind == "rotation":
        return RigidTransform(_ROTATIONS[axis](value), np.zeros(3))
    if kind == "translation":
        t = np.zeros(3)
        t[_AXES[axis]] = value
        return RigidTransform(np.eye(3), t)
    raise ValueError(f"unknown elementary kind {kind!r}")


def translation(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> RigidTransform:
    return RigidTransform(np.eye(3), [x, y, z])


# --- quaternions -------------------------------------------------------------


@dataclass(frozen=True)
class UnitQuaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not abs(n - 1.0) < 1e-9:
            raise ValueError(f"quaternion norm {n} is not 1")

    @classmethod
    def from_array(cls, q, normalize: bool = True) -> UnitQuaternion:
        q = np.asarray(q, dtype=float).reshape(4)
        if normalize:
            n = np.linalg.norm(q)
            if n == 0.0 or not np.isfinite(n):
                raise ValueError("cannot normalize a zero or non-finite quaternion")
            q = q / n
        return cls(*(float(v) for v in q))

    @classmethod
    def identity(cls) -> UnitQuaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> UnitQuaternion:
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        h = 0.5 * angle
        return cls.from_array([math.cos(h), *(math.sin(h) * a)])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __neg__(self) -> UnitQuaternion:
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)

    def canonical(self) -> UnitQuaternion:
        return UnitQuaternion(*canonical_sign(self.as_array()))

    def to_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.as_array())


def canonical_sign(q: np.ndarray) -> np.ndarray:
    """Pick the representative with ``w >= 0``; ties go to the first non-zero component."""
    q = np.asarray(q, dtype=float)
    for v in q:
        if v != 0.0:
            return q if v > 0.0 else -q
    return q


def quat_to_matrix(q) -> np.ndarray:
    """Right-handed (active) rotation matrix for a scalar-first unit quaternion."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(r) -> UnitQuaternion:
    """Shepperd's method; result has non-negative ``w``."""
    r = np.asarray(r, dtype=float)
    tr = np.trace(r)
    diag = np.array([tr, r[0, 0], r[1, 1], r[2, 2]])
    i = int(np.argmax(diag))
    if i == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif i == 1:
        s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif i == 2:
        s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    q = np.asarray(q)
    return UnitQuaternion.from_array(canonical_sign(q / np.linalg.norm(q)))


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product of scalar-first quaternions given as arrays."""
    aw, ax, ay, az = np.asarray(a, dtype=float)
    bw, bx, by, bz = np.asarray(b, dtype=float)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def _as_quat_array(samples: Iterable) -> np.ndarray:
    rows = [s.as_array() if isinstance(s, UnitQuaternion) else np.asarray(s, dtype=float) for s in samples]
    if not rows:
        raise ValueError("no samples")
    return np.vstack(rows).reshape(-1, 4)


def quat_average(samples: Sequence[UnitQuaternion] | np.ndarray, weights=None) -> UnitQuaternion:
    """Markley average: principal eigenvector of ``sum_i w_i q_i q_i^T``.

    The result maximizes ``sum_i w_i (q . q_i)^2`` and is therefore blind to
    the sign of each sample.
    """
    q = _as_quat_array(samples)
    w = np.ones(len(q)) if weights is None else np.asarray(weights, dtype=float)
    acc = (q * w[:, None]).T @ q
    vals, vecs = np.linalg.eigh(acc)
    mean = vecs[:, int(np.argmax(vals))]
    return UnitQuaternion.from_array(canonical_sign(mean))


def geodesic_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Rotation angle between two orientations, in ``[0, pi]`` rad."""
    dot = abs(float(np.dot(a.as_array(), b.as_array())))
    return 2.0 * math.acos(min(1.0, dot))
