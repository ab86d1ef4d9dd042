"""Tilt-X frame chain, gear trains and motor-command planning.

Frames: {W} world, {U} UAV body, {H} hinge, {B} telescope base (rotated by
the tilt about y of {H}), {T} telescope tip / continuum base, {E} end
effector. ``T_HE = Ry(-alpha) . Tz(-(s + beta)) . T_TE``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arckin import ArcParams, arc_matrices, cable_deltas_from_config
from .errors import RangeError, UnreachableTargetError
from .geometry import Geometry
from .se3core import RigidTransform, compose, matmul, translation

ALPHA_MAX = math.pi / 2
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class TiltXConfig:
    """Configuration-space point: continuum arc, tilt ``alpha`` (rad), extension ``beta`` (mm)."""

    arc: ArcParams
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise RangeError("alpha and beta must be finite")
        if not (-_ANGLE_SLACK <= self.alpha <= ALPHA_MAX + _ANGLE_SLACK):
            raise RangeError(f"tilt {math.degrees(self.alpha):.4f} deg outside [0, 90] deg")
        if self.beta < -1e-12:
            raise RangeError(f"extension {self.beta} mm is negative")
        object.__setattr__(self, "alpha", min(max(self.alpha, 0.0), ALPHA_MAX))
        object.__setattr__(self, "beta", max(self.beta, 0.0))

    @classmethod
    def make(cls, kappa=0.0, phi=0.0, alpha=0.0, beta=0.0, g: Geometry | None = None) -> TiltXConfig:
        g = g or Geometry()
        return cls(ArcParams(kappa, phi, g.L), alpha, beta)

    @property
    def kappa(self) -> float:
        return self.arc.kappa

    @property
    def phi(self) -> float:
        return self.arc.phi


def check_config(cfg: TiltXConfig, g: Geometry) -> None:
    """Raise :class:`RangeError` if ``cfg`` is outside the travel allowed by ``g``."""
    if cfg.beta > g.beta_max + 1e-9:
        raise RangeError(f"extension {cfg.beta:.6f} mm outside [0, {g.beta_max:g}] mm")
    try:
        cfg.arc.check_range(g.theta_max)
    except ValueError as exc:
        raise RangeError(str(exc)) from None


# --- forward kinematics ------------------------------------------------------


def _tilt_matrices(alpha: np.ndarray) -> np.ndarray:
    # Ry(-alpha) in the hinge convention [[c, 0, -s], [0, 1, 0], [s, 0, c]]
    c, s = np.cos(-alpha), np.sin(-alpha)
    m = np.zeros(alpha.shape + (4, 4))
    m[..., 0, 0] = c
    m[..., 0, 2] = -s
    m[..., 1, 1] = 1.0
    m[..., 2, 0] = s
    m[..., 2, 2] = c
    m[..., 3, 3] = 1.0
    return m


def _offset_matrices(offset: np.ndarray) -> np.ndarray:
    m = np.zeros(offset.shape + (4, 4))
    m[..., 0, 0] = m[..., 1, 1] = m[..., 2, 2] = m[..., 3, 3] = 1.0
    m[..., 2, 3] = -offset
    return m


def hinge_to_tip_matrices(kappa, phi, alpha, beta, g: Geometry) -> np.ndarray:
    """Vectorised ``T_HE`` for arrays of configuration values, shape ``(N, 4, 4)``."""
    kappa, phi, alpha, beta = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (kappa, phi, alpha, beta))
    )
    hb = _tilt_matrices(alpha)
    bt = _offset_matrices(g.s + beta)
    te = arc_matrices(kappa, phi, g.L)
    return matmul(matmul(hb, bt), te)


def tiltx_fk(cfg: TiltXConfig, g: Geometry) -> RigidTransform:
    """End-effector pose in the hinge frame, ``T_HE``."""
    m = hinge_to_tip_matrices(cfg.arc.kappa, cfg.arc.phi, cfg.alpha, cfg.beta, g)[0]
    return RigidTransform.from_matrix(m)


def closed_form_fk(cfg: TiltXConfig, g: Geometry) -> RigidTransform:
    """Expanded closed form of ``T_HE``, written out entry by entry.

    Independent of the matrix chain; used as a cross-check. The straight
    limit is taken explicitly for ``kappa * ell <= 1e-6``.
    """
    k, phi, a, b = cfg.arc.kappa, cfg.arc.phi, cfg.alpha, cfg.beta
    ell = cfg.arc.ell
    ca, sa = math.cos(a), math.sin(a)
    cp, sp = math.cos(phi), math.sin(phi)
    x = k * ell
    ck, sk = math.cos(x), math.sin(x)
    if x > 1e-6:
        inv_k = 1.0 / k
        radial = inv_k * (1 - ck)
        axial = inv_k * sk
    else:
        radial = ell * x * 0.5 * (1 - x * x / 12)
        axial = ell * (1 - x * x / 6)
    ext = g.s + b
    r = np.array(
        [
            [ca * ck * cp + sa * sk, ca * sp, ca * sk * cp - sa * ck],
            [ck * sp, -cp, sk * sp],
            [-sa * ck * cp + ca * sk, -sa * sp, -sa * sk * cp - ca * ck],
        ]
    )
    t = np.array(
        [
            ca * radial * cp - sa * axial - sa * ext,
            radial * sp,
            -sa * radial * cp - ca * axial - ca * ext,
        ]
    )
    return RigidTransform(r, t)


def uav_to_hinge(g: Geometry) -> RigidTransform:
    hx, hy, hz = g.hinge_offset
    return compose(translation(x=hx), translation(y=hy), translation(z=-hz))


def world_fk(T_WU: RigidTransform, cfg: TiltXConfig, g: Geometry) -> RigidTransform:
    """End-effector pose in the world: ``T_WU . T_UH . T_HE``."""
    return compose(T_WU, uav_to_hinge(g), tiltx_fk(cfg, g))


# --- gear trains -------------------------------------------------------------


def telescopic_delta(dq5: float, g: Geometry, beta: float = 0.0) -> float:
    """Extension change (mm) for a telescope-motor rotation ``dq5`` (rad).

    ``P`` is the lead per lead-screw revolution, so the motor angle is
    converted to revolutions first. The same change applies to every cable.
    Raises :class:`RangeError` if ``beta + dbeta`` leaves ``[0, beta_max]``.
    """
    if not math.isfinite(dq5):
        raise RangeError("motor angle must be finite")
    dbeta = g.P * g.N_t * dq5 / (2.0 * math.pi)
    end = beta + dbeta
    if not (-1e-9 <= end <= g.beta_max + 1e-9):
        raise RangeError(f"extension would reach {end:.6f} mm, outside [0, {g.beta_max:g}] mm")
    return dbeta


def motor_from_telescopic(dbeta: float, g: Geometry) -> float:
    return 2.0 * math.pi * dbeta / (g.P * g.N_t)


def tilt_from_motor(q4: float, g: Geometry) -> float:
    """Tilt angle (rad) from the worm-drive motor angle ``q4`` (rad).

    Equivalent to ``2*pi*q4_rev / N_w`` with ``q4_rev`` in revolutions.
    """
    alpha = q4 / g.N_w
    _check_alpha(alpha)
    return alpha


def motor_from_tilt(alpha: float, g: Geometry) -> float:
    _check_alpha(alpha)
    return alpha * g.N_w


def _check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and -_ANGLE_SLACK <= alpha <= ALPHA_MAX + _ANGLE_SLACK):
        raise RangeError(f"tilt {math.degrees(alpha):.6f} deg outside [0, 90] deg")


def revolutions(angle: float) -> float:
    return angle / (2.0 * math.pi)


def tilt_pulley_distance(alpha: float, g: Geometry) -> float:
    """Distance between the fixed pulley and the pulley swinging with the tilt."""
    c1x, c1y = g.pulley.c1
    r = g.pulley.r
    return math.hypot(r * math.sin(alpha) - c1x, -r * math.cos(alpha) - c1y)


def tilt_compensation(alpha_from: float, alpha_to: float, g: Geometry) -> np.ndarray:
    """Cable length changes caused by tilting from ``alpha_from`` to ``alpha_to``.

    Only cable 1 runs over the moving pulley; cables 2 and 3 pass through
    small pulleys on the hinge axis and are left unchanged. Wrap-angle
    changes are ignored.
    """
    _check_alpha(alpha_from)
    _check_alpha(alpha_to)
    d1 = tilt_pulley_distance(alpha_from, g) - tilt_pulley_distance(alpha_to, g)
    return np.array([d1, 0.0, 0.0])


@dataclass(frozen=True)
class ActuatorState:
    """Motor angles in radians: cable spools q1..q3, tilt worm q4, telescope q5."""

    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0
    q4: float = 0.0
    q5: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3, self.q4, self.q5])

    def __add__(self, other: ActuatorState) -> ActuatorState:
        return ActuatorState(*(self.as_array() + other.as_array()))


@dataclass(frozen=True)
class ActuationPlan:
    """Motor deltas plus the per-cable length budget they were built from (mm)."""

    dq: ActuatorState
    tilt: np.ndarray
    tele: np.ndarray
    bend: np.ndarray

    @property
    def cable_total(self) -> np.ndarray:
        return self.tilt + self.tele + self.bend

    def to_dict(self) -> dict:
        return {
            "dq_rad": self.dq.as_array().tolist(),
            "dq_rev": (self.dq.as_array() / (2 * math.pi)).tolist(),
            "cable_tilt_mm": self.tilt.tolist(),
            "cable_tele_mm": self.tele.tolist(),
            "cable_bend_mm": self.bend.tolist(),
            "cable_total_mm": self.cable_total.tolist(),
        }


def actuation_plan(frm: TiltXConfig, to: TiltXConfig, g: Geometry) -> ActuationPlan:
    """Motor increments that move the manipulator from ``frm`` to ``to``.

    Every cable's change is the sum of its tilt-pulley, telescope and bending
    contributions, each of which depends only on the two endpoints, so plans
    add up along any path.
    """
    check_config(frm, g)
    check_config(to, g)
    tilt = tilt_compensation(frm.alpha, to.alpha, g)
    dbeta = to.beta - frm.beta
    tele = np.full(3, dbeta)
    bend = cable_deltas_from_config(to.arc, g.layout) - cable_deltas_from_config(frm.arc, g.layout)
    total = tilt + tele + bend
    dq_cables = total / np.asarray(g.r_motor)
    dq4 = motor_from_tilt(to.alpha, g) - motor_from_tilt(frm.alpha, g)
    dq5 = motor_from_telescopic(dbeta, g)
    return ActuationPlan(ActuatorState(*dq_cables, dq4, dq5), tilt, tele, bend)


# --- inverse kinematics ------------------------------------------------------

TOL_IK = 0.1
MAX_ITERS = 200
DAMPING = 1e-3
_BETA_SCALE = 100.0  # extension is iterated in units of 100 mm


def _tip_position(u: float, v: float, alpha: float, b: float, g: Geometry) -> tuple[float, float, float]:
    # (u, v) is the bend vector kappa*L*(cos phi, sin phi), smooth through
    # straight; b is the extension in units of _BETA_SCALE mm
    bend = math.hypot(u, v)
    L = g.L
    if bend > 1e-6:
        half = math.sin(0.5 * bend)
        radial_over_bend = L * 2.0 * half * half / (bend * bend)
        axial = L * math.sin(bend) / bend
    else:
        radial_over_bend = L * 0.5 * (1 - bend * bend / 12)
        axial = L * (1 - bend * bend / 6)
    px = radial_over_bend * u
    py = radial_over_bend * v
    pz = -(g.s + b * _BETA_SCALE) - axial
    ca, sa = math.cos(alpha), math.sin(alpha)
    return ca * px + sa * pz, py, -sa * px + ca * pz


def _project(x: np.ndarray, g: Geometry) -> np.ndarray:
    u, v, a, b = x
    bend = math.hypot(u, v)
    if bend > g.theta_max:
        u, v = u * g.theta_max / bend, v * g.theta_max / bend
    a = min(max(a, 0.0), ALPHA_MAX)
    b = min(max(b, 0.0), g.beta_max / _BETA_SCALE)
    return np.array([u, v, a, b])


def _to_config(x: np.ndarray, g: Geometry) -> TiltXConfig:
    u, v, a, b = x
    bend = math.hypot(u, v)
    phi = math.atan2(v, u) if bend > 0 else 0.0
    return TiltXConfig(ArcParams(bend / g.L, phi, g.L), a, b * _BETA_SCALE)


def _from_config(cfg: TiltXConfig, g: Geometry) -> np.ndarray:
    bend = cfg.arc.kappa * g.L
    return np.array([bend * math.cos(cfg.arc.phi), bend * math.sin(cfg.arc.phi), cfg.alpha, cfg.beta / _BETA_SCALE])


_STEP_LIMIT = 0.5  # max change per iteration in any (scaled) coordinate


def _at_bounds(x: np.ndarray, g: Geometry) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([-np.inf, -np.inf, 0.0, 0.0])
    hi = np.array([np.inf, np.inf, ALPHA_MAX, g.beta_max / _BETA_SCALE])
    return x <= lo + 1e-12, x >= hi - 1e-12


def _dls(target: np.ndarray, x: np.ndarray, g: Geometry, tol: float, max_iters: int, damping: float):
    h = 1e-7
    lam2 = damping * damping
    p = np.array(_tip_position(*x, g=g))
    err = target - p
    res = float(np.linalg.norm(err))
    it = 0
    while it < max_iters and res > tol:
        it += 1
        jac = np.empty((3, 4))
        for j in range(4):
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (np.array(_tip_position(*xp, g=g)) - p) / h
        at_lo, at_hi = _at_bounds(x, g)
        free = np.ones(4, dtype=bool)
        for _ in range(4):
            jf = jac * free
            step = jf.T @ np.linalg.solve(jf @ jf.T + lam2 * np.eye(3), err)
            blocked = free & ((at_lo & (step < 0)) | (at_hi & (step > 0)))
            if not blocked.any():
                break
            free &= ~blocked
        biggest = np.max(np.abs(step))
        if biggest > _STEP_LIMIT:
            step *= _STEP_LIMIT / biggest
        # backtrack until the residual drops
        for _ in range(8):
            x_new = _project(x + step, g)
            p_new = np.array(_tip_position(*x_new, g=g))
            res_new = float(np.linalg.norm(target - p_new))
            if res_new < res:
                break
            step *= 0.5
        else:
            break
        x, p, res = x_new, p_new, res_new
        err = target - p
    return x, res, it


def _restart_seeds(g: Geometry) -> list[np.ndarray]:
    mid_bend = 0.5 * g.theta_max
    seeds = []
    for alpha in (0.0, 0.25 * math.pi, ALPHA_MAX):
        for phi in (0.0, 0.5 * math.pi, math.pi, -0.5 * math.pi):
            for beta in (0.0, g.beta_max):
                seeds.append(np.array([mid_bend * math.cos(phi), mid_bend * math.sin(phi), alpha, beta / _BETA_SCALE]))
    return seeds


@dataclass(frozen=True)
class IKResult:
    """Outcome of :func:`ik_solve`.

    ``iterations`` counts the steps of the attempt that converged and
    ``total_iterations`` those of every attempt tried.
    """

    cfg: TiltXConfig
    residual: float
    iterations: int
    total_iterations: int
    attempts: int


def ik_solve(
    target,
    g: Geometry,
    seed: TiltXConfig | None = None,
    tol: float = TOL_IK,
    max_iters: int = MAX_ITERS,
    damping: float = DAMPING,
    restarts: bool = True,
) -> IKResult:
    """Configuration whose tip reaches ``target`` (mm, hinge frame) within ``tol``.

    Damped least squares with a forward-difference Jacobian over the bend
    vector, tilt and extension; each step is projected back into the joint
    box. If the first attempt (from ``seed``, default
    straight/untilted/retracted) fails, a fixed set of restart seeds is
    tried. All attempts together share a budget of ``max_iters`` iterations.
    """
    target = np.asarray(target, dtype=float).reshape(3)
    if not np.all(np.isfinite(target)):
        raise RangeError("target must be finite")
    if np.linalg.norm(target) > g.max_reach + 1e-6:
        raise UnreachableTargetError(
            f"target lies {np.linalg.norm(target):.3f} mm from the hinge, beyond the {g.max_reach:g} mm reach",
            residual=float(np.linalg.norm(target) - g.max_reach),
        )
    # iterate a bit past tol so the matrix-chain check below has margin
    inner_tol = tol * 1e-3
    x0 = _project(_from_config(seed, g), g) if seed is not None else np.zeros(4)
    seeds = [x0]
    if restarts:
        extra = _restart_seeds(g)
        extra.sort(key=lambda s: math.dist(_tip_position(*s, g=g), target))
        seeds += extra
    best_x, best_res, best_it, total, attempts = x0, math.inf, 0, 0, 0
    for s in seeds:
        if total >= max_iters:
            break
        x, res, it = _dls(target, s, g, inner_tol, max_iters - total, damping)
        total += it
        attempts += 1
        if res < best_res:
            best_x, best_res, best_it = x, res, it
        if res <= inner_tol:
            break
    cfg = _to_config(best_x, g)
    res = float(np.linalg.norm(tiltx_fk(cfg, g).translation - target))
    if res > tol:
        raise UnreachableTargetError(
            f"no configuration within {tol} mm of the target (best {res:.4f} mm)",
            residual=res,
            best=cfg,
            iterations=total,
        )
    return IKResult(cfg, res, best_it, total, attempts)


def ik_position(target, g: Geometry, **kwargs) -> TiltXConfig:
    """Shorthand for ``ik_solve(...).cfg``; keyword arguments are passed through."""
    return ik_solve(target, g, **kwargs).cfg
