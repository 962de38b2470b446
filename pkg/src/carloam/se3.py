"""Rigid-body math on SE(3).

Twists are 6-vectors ordered ``(v, w)``: linear part first, angular part
second. Poses map points from a body frame into a reference frame,
``p_ref = R @ p_body + t``. Perturbations are applied on the left,
``T <- exp(dxi) @ T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SMALL_ANGLE = 1e-8


def hat(w) -> np.ndarray:
    """Skew-symmetric matrix such that ``hat(w) @ u == cross(w, u)``."""
    x, y, z = np.asarray(w, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def hat_batch(w: np.ndarray) -> np.ndarray:
    """Vectorized :func:`hat` for an ``(N, 3)`` array."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class PoseSE3:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "PoseSE3":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return compose(self, other)

    def inverse(self) -> "PoseSE3":
        return inverse(self)

    def apply(self, points) -> np.ndarray:
        """Transform a single point ``(3,)`` or a batch ``(N, 3)``."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    # re-projection keeps rounding from compounding through long products
    # (constant-velocity extrapolation amplifies it roughly 2.4x per scan)
    return PoseSE3(nearest_rotation(a.rotation @ b.rotation), a.rotation @ b.translation + a.translation)


def nearest_rotation(M) -> np.ndarray:
    """Closest rotation matrix to ``M`` in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    if np.linalg.det(U @ Vt) < 0:
        U[:, -1] = -U[:, -1]
    return U @ Vt


def inverse(T: PoseSE3) -> PoseSE3:
    Rt = T.rotation.T
    return PoseSE3(Rt, -Rt @ T.translation)


def transform_point(T: PoseSE3, p) -> np.ndarray:
    return T.apply(p)


def so3_exp(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * W @ W
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * W + b * W @ W


def left_jacobian_so3(w) -> np.ndarray:
    """``V`` in ``t = V @ v`` for the SE(3) exponential."""
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * W + W @ W / 6.0
    b = (1.0 - np.cos(theta)) / theta**2
    c = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + b * W + c * W @ W


def exp_se3(xi) -> PoseSE3:
    xi = np.asarray(xi, dtype=float).reshape(6)
    v, w = xi[:3], xi[3:]
    return PoseSE3(so3_exp(w), left_jacobian_so3(w) @ v)


def rotation_angle(R) -> float:
    """Rotation angle in radians, robust near 0 and pi."""
    R = np.asarray(R, dtype=float)
    # atan2 form keeps precision at small angles where arccos of the trace loses it
    s = 0.5 * np.linalg.norm(np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]))
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def so3_log(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    theta = rotation_angle(R)
    axial = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-6:
        return 0.5 * axial
    if np.pi - theta < 1e-6:
        # axis from the symmetric part; sin(theta) is too small to divide by
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if axis @ axial < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * axial


def log_se3(T: PoseSE3) -> np.ndarray:
    """Inverse of :func:`exp_se3`; used by metrics and tests only."""
    w = so3_log(T.rotation)
    v = np.linalg.solve(left_jacobian_so3(w), T.translation)
    return np.concatenate([v, w])


def point_jacobian(Tp) -> np.ndarray:
    """3x6 derivative of ``exp(dxi) @ Tp`` with respect to ``dxi`` at zero."""
    J = np.zeros((3, 6))
    J[:, :3] = np.eye(3)
    J[:, 3:] = -hat(Tp)
    return J


def point_jacobian_batch(Tp: np.ndarray) -> np.ndarray:
    Tp = np.asarray(Tp, dtype=float)
    J = np.zeros(Tp.shape[:-1] + (3, 6))
    J[..., :, :3] = np.eye(3)
    J[..., :, 3:] = -hat_batch(Tp)
    return J


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return bool(
        np.allclose(R.T @ R, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) < tol
    )


def to_quaternion(R) -> np.ndarray:
    """Unit quaternion ``(qx, qy, qz, qw)`` with ``qw >= 0``."""
    from scipy.spatial.transform import Rotation

    q = Rotation.from_matrix(np.asarray(R, dtype=float)).as_quat()
    if q[3] < 0:
        q = -q
    return q / np.linalg.norm(q)


def from_quaternion(q) -> np.ndarray:
    from scipy.spatial.transform import Rotation

    return Rotation.from_quat(np.asarray(q, dtype=float)).as_matrix()


def random_pose(rng: np.random.Generator, max_angle: float = np.pi, max_trans: float = 1.0) -> PoseSE3:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return PoseSE3(so3_exp(axis * angle), rng.uniform(-max_trans, max_trans, size=3))
