"""Constant-curvature kinematics of the single continuum section.

The section base frame {T} has its z-axis pointing back along the
telescope, so a straight section ends at ``(0, 0, -ell)``. The bend plane
angle ``phi`` is measured about the base axis from the base x-axis, which
also carries cable 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CableLayout
from .se3core import RigidTransform

EPS_KL = 1e-6  # below this bend angle (rad) the series branch is used
EPS_KAPPA = 1e-12  # curvature (1/mm) treated as straight when recovering phi


def wrap_angle(a: float) -> float:
    """Map an angle onto ``(-pi, pi]``."""
    r = math.remainder(a, 2.0 * math.pi)
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class ArcParams:
    kappa: float
    phi: float
    ell: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and math.isfinite(self.phi) and math.isfinite(self.ell)):
            raise ValueError("arc parameters must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0; express the bend direction through phi")
        if not self.ell > 0:
            raise ValueError("arc length must be positive")
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def bend_angle(self) -> float:
        return self.kappa * self.ell

    def check_range(self, theta_max: float = math.pi) -> None:
        if self.bend_angle > theta_max * (1 + 1e-12):
            raise ValueError(
                f"bend angle {math.degrees(self.bend_angle):.3f} deg exceeds the "
                f"{math.degrees(theta_max):.3f} deg limit"
            )

    @classmethod
    def from_bend(cls, bend: float, phi: float, ell: float) -> ArcParams:
        """Build from the total bend angle ``kappa*ell``; negative bends flip ``phi``."""
        if bend < 0:
            bend, phi = -bend, phi + math.pi
        return cls(bend / ell, phi, ell)


@dataclass(frozen=True)
class CableLengths:
    l1: float
    l2: float
    l3: float

    def __post_init__(self):
        for i, v in enumerate(self.as_array(), start=1):
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"cable length l{i} must be positive, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.l1, self.l2, self.l3], dtype=float)


def arc_matrices(kappa, phi, ell) -> np.ndarray:
    """Stack of section transforms T_TE, shape ``(N, 4, 4)``.

    Above ``EPS_KL`` the textbook entries ``(1 - cos(kappa*ell))/kappa`` and
    ``sin(kappa*ell)/kappa`` are used verbatim; below it, their second-order
    series in the bend angle, which is exact at ``kappa = 0``.
    """
    kappa, phi, ell = np.broadcast_arrays(
        np.atleast_1d(np.asarray(kappa, dtype=float)),
        np.atleast_1d(np.asarray(phi, dtype=float)),
        np.atleast_1d(np.asarray(ell, dtype=float)),
    )
    x = kappa * ell
    ck, sk = np.cos(x), np.sin(x)
    cp, sp = np.cos(phi), np.sin(phi)

    small = x <= EPS_KL
    safe_k = np.where(small, 1.0, kappa)
    radial = np.where(small, ell * x * 0.5 * (1.0 - x * x / 12.0), (1.0 - ck) / safe_k)
    axial = np.where(small, ell * (1.0 - x * x / 6.0), sk / safe_k)

    m = np.zeros(x.shape + (4, 4))
    m[..., 0, 0] = ck * cp
    m[..., 0, 1] = sp
    m[..., 0, 2] = sk * cp
    m[..., 0, 3] = radial * cp
    m[..., 1, 0] = ck * sp
    m[..., 1, 1] = -cp
    m[..., 1, 2] = sk * sp
    m[..., 1, 3] = radial * sp
    m[..., 2, 0] = sk
    m[..., 2, 2] = -ck
    m[..., 2, 3] = -axial
    m[..., 3, 3] = 1.0
    return m


def arc_transform(arc: ArcParams) -> RigidTransform:
    """Pose of the section tip {E} in the section base {T}."""
    return RigidTransform.from_matrix(arc_matrices(arc.kappa, arc.phi, arc.ell)[0])


def tip_depth(bend, ell) -> np.ndarray:
    """Distance of the tip below the section base along -z: ``sin(kappa*ell)/kappa``."""
    x = np.asarray(bend, dtype=float)
    return ell * np.sinc(x / np.pi)


def cable_deltas_from_config(arc: ArcParams, layout: CableLayout) -> np.ndarray:
    """Cable length changes ``-L kappa d cos(theta_i - phi)`` relative to straight."""
    theta = np.asarray(layout.theta)
    return -arc.ell * arc.kappa * layout.d * np.cos(theta - arc.phi)


def cables_from_config(arc: ArcParams, layout: CableLayout) -> CableLengths:
    return CableLengths(*(arc.ell + cable_deltas_from_config(arc, layout)))


def config_from_cables(l: CableLengths, layout: CableLayout, L: float) -> ArcParams:
    """Recover ``(kappa, phi, ell)`` from three cable lengths of an inextensible section.

    ``phi`` uses the four-quadrant arctangent and is 0 when the section is
    straight.
    """
    if not isinstance(l, CableLengths):
        l = CableLengths(*l)
    l1, l2, l3 = l.as_array()
    # l1^2 + l2^2 + l3^2 - l1 l2 - l1 l3 - l2 l3, in a cancellation-free form
    radicand = 0.5 * ((l1 - l2) ** 2 + (l2 - l3) ** 2 + (l3 - l1) ** 2)
    kappa = 2.0 * math.sqrt(max(radicand, 0.0)) / (layout.d * (l1 + l2 + l3))
    if kappa < EPS_KAPPA:
        return ArcParams(0.0, 0.0, L)
    phi = math.atan2(math.sqrt(3.0) * (l2 - l3), l2 + l3 - 2.0 * l1)
    return ArcParams(kappa, phi, L)
