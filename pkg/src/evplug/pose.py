"""Rigid transforms between the socket, camera, marker and charger frames.

Translations are in millimetres, angles at the public surface in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

ORTHO_TOL = 1e-9


class PoseDomainError(ValueError):
    """Pose outside the regime where the tilt angles are defined."""


def _polar(rot: np.ndarray) -> np.ndarray:
    # closest rotation in the Frobenius sense
    u, _, vt = np.linalg.svd(rot)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def orthonormality_defect(rot: np.ndarray) -> float:
    return float(np.max(np.abs(rot.T @ rot - np.eye(3))))


def check_rotation(rot: np.ndarray, tol: float = ORTHO_TOL) -> None:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    if orthonormality_defect(rot) > tol or abs(np.linalg.det(rot) - 1.0) > tol:
        raise ValueError("rotation is not a proper orthonormal matrix")


@dataclass(frozen=True)
class Transform:
    """Homogeneous transform ``[R | t]``; ``a_from_b`` maps b-coordinates into a."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        trans = np.array(self.translation, dtype=float).reshape(3)
        check_rotation(rot)
        if not np.all(np.isfinite(trans)):
            raise ValueError("translation must be finite")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def from_matrix(cls, mat) -> "Transform":
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (4, 4):
            raise ValueError("expected a 4x4 homogeneous matrix")
        return cls(mat[:3, :3], mat[:3, 3])

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)


def compose(a: Transform, b: Transform) -> Transform:
    """Return ``a @ b``, re-projecting the rotation onto SO(3) if it drifted."""
    rot = a.rotation @ b.rotation
    if orthonormality_defect(rot) > ORTHO_TOL:
        rot = _polar(rot)
    return Transform(rot, a.rotation @ b.translation + a.translation)


def invert(t: Transform) -> Transform:
    rt = t.rotation.T
    return Transform(rt, -rt @ t.translation)


def charger_in_socket(socket_from_camera: Transform,
                      camera_from_marker: Transform,
                      marker_from_charger: Transform) -> Transform:
    """Chain the fixed camera pose, the marker observation and the marker mount."""
    return compose(compose(socket_from_camera, camera_from_marker), marker_from_charger)


class TiltPair(NamedTuple):
    """Misalignment of the charger z-axis w.r.t. the socket z-axis, degrees."""

    theta_x: float
    theta_y: float

    @property
    def total(self) -> float:
        return math.hypot(self.theta_x, self.theta_y)

    def __abs__(self) -> "TiltPair":
        return TiltPair(abs(self.theta_x), abs(self.theta_y))


def _rotation_of(t) -> np.ndarray:
    return t.rotation if isinstance(t, Transform) else np.asarray(t, dtype=float)


def tilt_angles(t: Transform | np.ndarray) -> TiltPair:
    """Unsigned tilt of the charger z-axis projected on the socket planes.

    ``theta_x`` is measured in the z_s-y_s plane (rotation about x_s) and
    ``theta_y`` in the z_s-x_s plane (rotation about y_s).

    Raises:
        PoseDomainError: if ``r33 <= 0``; the charger then points across or
            away from the socket and the projections are meaningless.
    """
    rot = _rotation_of(t)
    r13, r23, r33 = rot[0, 2], rot[1, 2], rot[2, 2]
    if not r33 > 0.0:
        raise PoseDomainError(f"r33 = {r33:.6g} <= 0: pose outside capture regime")
    # arccos(r33 / hypot(r23, r33)) written as an arctangent, which keeps
    # full precision for small tilts
    return TiltPair(math.degrees(math.atan2(abs(r23), r33)),
                    math.degrees(math.atan2(abs(r13), r33)))


def signed_tilt_angles(t: Transform | np.ndarray) -> TiltPair:
    """Tilt angles carrying sign(-r23) on theta_x and sign(r13) on theta_y."""
    rot = _rotation_of(t)
    mag = tilt_angles(rot)
    sx = -1.0 if -rot[1, 2] < 0 else 1.0
    sy = -1.0 if rot[0, 2] < 0 else 1.0
    return TiltPair(sx * mag.theta_x, sy * mag.theta_y)


def rotation_from_tilt(tilt: TiltPair | tuple[float, float]) -> np.ndarray:
    """Rotation whose z-axis has the given signed projected tilts.

    The z-axis is placed at ``(tan θy, -tan θx, 1)`` (normalised) and reached
    from the socket z-axis by the minimal rotation, so the charger carries no
    spin about its own axis.  For a single-axis tilt this is exactly R_x or
    R_y.
    """
    tx, ty = float(tilt[0]), float(tilt[1])
    if abs(tx) >= 45.0 or abs(ty) >= 45.0:
        raise PoseDomainError("tilt components must stay below 45 deg")
    a = math.tan(math.radians(ty))
    b = -math.tan(math.radians(tx))
    n = math.sqrt(a * a + b * b + 1.0)
    zx, zy, zz = a / n, b / n, 1.0 / n
    # Rodrigues for the rotation taking e_z onto z; axis = e_z x z
    k = 1.0 / (1.0 + zz)
    return np.array([
        [1.0 - k * zx * zx, -k * zx * zy, zx],
        [-k * zx * zy, 1.0 - k * zy * zy, zy],
        [-zx, -zy, zz],
    ])


def transform_from_tilt(tilt, translation=(0.0, 0.0, 0.0)) -> Transform:
    return Transform(rotation_from_tilt(tilt), translation)


def rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
