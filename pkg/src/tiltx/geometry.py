"""Physical constants of a Tilt-X build and their JSON representation.

Lengths are millimetres everywhere. Angles are radians in memory and
degrees in the JSON file.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

GEOMETRY_ENV = "TILTX_GEOMETRY"


@dataclass(frozen=True)
class CableLayout:
    """Cable offset ``d`` from the backbone centroid and angular cable positions.

    The default numbering runs clockwise seen along -z: (0, 240, 120) deg.
    """

    d: float = 8.0
    theta: tuple[float, float, float] = (0.0, math.radians(240.0), math.radians(120.0))

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("cable offset d must be positive")
        th = tuple(float(t) for t in self.theta)
        if len(th) != 3:
            raise ValueError("exactly three cable angles are required")
        if th[0] != 0.0:
            raise ValueError("cable 1 must sit on the base x-axis (theta_1 = 0)")
        for i in range(3):
            gap = (th[(i + 1) % 3] - th[i]) % (2 * math.pi)
            if min(abs(gap - 2 * math.pi / 3), abs(gap - 4 * math.pi / 3)) > 1e-9:
                raise ValueError("cable angles must be mutually 120 deg apart")
        object.__setattr__(self, "theta", th)

    @classmethod
    def counter_clockwise(cls, d: float = 8.0) -> CableLayout:
        return cls(d, (0.0, math.radians(120.0), math.radians(240.0)))


@dataclass(frozen=True)
class PulleyGeometry:
    """Tilt pulley layout: fixed pulley-1 centre ``c1`` and pulley-2 orbit radius ``r``."""

    c1: tuple[float, float] = (0.0, 40.0)
    r: float = 15.0


@dataclass(frozen=True)
class Geometry:
    s: float = 131.0
    L: float = 384.0
    layout: CableLayout = field(default_factory=CableLayout)
    hinge_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    P: float = 2.0
    N_t: float = 1.0
    N_w: float = 35.0
    r_motor: tuple[float, float, float] = (10.0, 10.0, 10.0)
    pulley: PulleyGeometry = field(default_factory=PulleyGeometry)
    theta_max: float = math.pi
    beta_max: float = 75.0

    def __post_init__(self):
        for name in ("s", "L", "P", "N_t", "N_w", "theta_max", "beta_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"geometry field {name} must be positive, got {v}")
        if len(self.r_motor) != 3 or min(self.r_motor) <= 0:
            raise ValueError("r_motor needs three positive spool radii")
        if len(self.hinge_offset) != 3:
            raise ValueError("hinge_offset needs three components")
        if not self.pulley.r > 0:
            raise ValueError("pulley radius r must be positive")

    @property
    def max_reach(self) -> float:
        """Radius of the ball that contains every reachable tip position."""
        return self.s + self.beta_max + self.L

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "L": self.L,
            "layout": {"d": self.layout.d, "theta_deg": [math.degrees(t) for t in self.layout.theta]},
            "hinge_offset": list(self.hinge_offset),
            "P": self.P,
            "N_t": self.N_t,
            "N_w": self.N_w,
            "r_motor": list(self.r_motor),
            "pulley": {"c1": list(self.pulley.c1), "r": self.pulley.r},
            "theta_max_deg": math.degrees(self.theta_max),
            "beta_max": self.beta_max,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Geometry:
        _check_keys(doc, _TOP_KEYS, "geometry")
        kw = {}
        for key in ("s", "L", "P", "N_t", "N_w", "beta_max"):
            if key in doc:
                kw[key] = float(doc[key])
        if "theta_max_deg" in doc:
            kw["theta_max"] = math.radians(float(doc["theta_max_deg"]))
        if "hinge_offset" in doc:
            kw["hinge_offset"] = tuple(float(v) for v in doc["hinge_offset"])
        if "r_motor" in doc:
            kw["r_motor"] = tuple(float(v) for v in doc["r_motor"])
        if "layout" in doc:
            lay = doc["layout"]
            _check_keys(lay, {"d", "theta_deg"}, "layout")
            default = CableLayout()
            kw["layout"] = CableLayout(
                d=float(lay.get("d", default.d)),
                theta=tuple(math.radians(float(t)) for t in lay["theta_deg"]) if "theta_deg" in lay else default.theta,
            )
        if "pulley" in doc:
            pul = doc["pulley"]
            _check_keys(pul, {"c1", "r"}, "pulley")
            default = PulleyGeometry()
            kw["pulley"] = PulleyGeometry(
                c1=tuple(float(v) for v in pul.get("c1", default.c1)),
                r=float(pul.get("r", default.r)),
            )
        return cls(**kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


_TOP_KEYS = {
    "s", "L", "layout", "hinge_offset", "P", "N_t", "N_w",
    "r_motor", "pulley", "theta_max_deg", "beta_max",
}


def _check_keys(doc, allowed: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ValueError(f"{where}: expected a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}")


def load_geometry(path=None) -> Geometry:
    """Read a geometry JSON file.

    ``path=None`` falls back to ``$TILTX_GEOMETRY`` and then to the built-in
    defaults.
    """
    if path is None:
        path = os.environ.get(GEOMETRY_ENV) or None
    if path is None:
        return Geometry()
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read geometry file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    try:
        return Geometry.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


DEFAULT_GEOMETRY = Geometry()
