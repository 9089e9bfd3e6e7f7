"""Rotation algebra and the boxplus/boxminus operators on SO(3) x R^n.

States handled here are pairs ``(R, a)`` of a 3x3 rotation matrix and an
n-vector.  Perturbations live in the tangent space as pairs ``(r, b)`` of a
rotation vector (radians) and an n-vector:

    (R, a) boxplus  (r, b) = (R @ exp(r), a + b)
    (R1, a) boxminus (R2, b) = (log(R2.T @ R1), a - b)

All functions broadcast over leading batch dimensions: rotations may be
``(..., 3, 3)`` and vectors ``(..., 3)``.

Conventions:
  * ``so3_log`` returns the canonical rotation vector with angle in [0, pi].
  * At angle pi the axis sign is ambiguous; we return the axis whose first
    nonzero component is positive.
  * Angles below ``SMALL_ANGLE`` use series expansions of the trigonometric
    coefficients to avoid division by ~0.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

SMALL_ANGLE = 1e-8
NEAR_PI = 1e-6
ORTHONORMALITY_TOL = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix [v]x such that [v]x @ w = cross(v, w)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=float)
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _vee(m: np.ndarray) -> np.ndarray:
    return np.stack(
        [m[..., 2, 1] - m[..., 1, 2],
         m[..., 0, 2] - m[..., 2, 0],
         m[..., 1, 0] - m[..., 0, 1]],
        axis=-1,
    ) * 0.5


def is_rotation(matrix: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> bool:
    """True when R.T @ R = I within tol and det(R) > 0."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[-2:] != (3, 3) or not np.all(np.isfinite(matrix)):
        return False
    eye_err = np.swapaxes(matrix, -2, -1) @ matrix - np.eye(3)
    if np.max(np.abs(eye_err)) > tol:
        return False
    return bool(np.all(np.linalg.det(matrix) > 0))


def require_rotation(matrix: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if not is_rotation(matrix, tol):
        raise InvalidArgumentError("expected orthonormal rotation matrix with det +1")
    return matrix


def so3_exp(rotvec: np.ndarray) -> np.ndarray:
    """Rodrigues map from a rotation vector to a rotation matrix.

    Accepts ``(..., 3)`` input and returns ``(..., 3, 3)``.
    """
    r = np.asarray(rotvec, dtype=float)
    if r.shape[-1] != 3:
        raise InvalidArgumentError("rotation vector must have 3 components")
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("rotation vector must be finite")

    theta = np.linalg.norm(r, axis=-1)
    small = theta < SMALL_ANGLE
    theta_safe = np.where(small, 1.0, theta)

    # sin(t)/t and (1-cos(t))/t^2 with second-order series fallbacks.
    sin_coef = np.where(small, 1.0 - theta**2 / 6.0, np.sin(theta_safe) / theta_safe)
    cos_coef = np.where(
        small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta_safe)) / theta_safe**2
    )

    k = skew(r)
    k2 = k @ k
    return (
        np.eye(3)
        + sin_coef[..., None, None] * k
        + cos_coef[..., None, None] * k2
    )


def _log_near_pi(matrix: np.ndarray, theta: float, sin_axis: np.ndarray) -> np.ndarray:
    # Axis magnitudes from the diagonal, relative signs from the symmetric
    # off-diagonal part; stable where sin(theta) ~ 0.
    diag = np.diagonal(matrix)
    k = int(np.argmax(diag))
    axis = np.zeros(3)
    axis[k] = np.sqrt(max((diag[k] + 1.0) * 0.5, 0.0))
    denom = 4.0 * axis[k]
    for j in range(3):
        if j != k:
            axis[j] = (matrix[k, j] + matrix[j, k]) / denom
    axis /= np.linalg.norm(axis)

    # Global sign: follow the antisymmetric part while it still resolves the
    # direction; at theta == pi (a true +-axis tie) fall back to the
    # convention that the first nonzero component is positive.
    if np.linalg.norm(sin_axis) > 1e-12:
        if float(sin_axis @ axis) < 0.0:
            axis = -axis
    else:
        for component in axis:
            if abs(component) > 1e-12:
                if component < 0.0:
                    axis = -axis
                break
    return theta * axis


def so3_log(matrix: np.ndarray) -> np.ndarray:
    """Inverse of :func:`so3_exp`; angle canonicalized to [0, pi].

    Raises if the input is not orthonormal within ``ORTHONORMALITY_TOL``.
    """
    matrix = require_rotation(matrix)
    sin_axis = _vee(matrix)  # sin(theta) * axis
    sin_theta = np.linalg.norm(sin_axis, axis=-1)
    cos_theta = (np.trace(matrix, axis1=-2, axis2=-1) - 1.0) * 0.5
    # atan2 keeps full precision for angles near both 0 and pi.
    theta = np.arctan2(sin_theta, cos_theta)

    small = theta < SMALL_ANGLE
    near_pi = (np.pi - theta) < NEAR_PI
    mid = ~(small | near_pi)

    sin_safe = np.where(mid, sin_theta, 1.0)
    scale = np.where(mid, theta / sin_safe, 1.0)
    out = sin_axis * scale[..., None]

    if np.any(near_pi):
        flat_m = matrix.reshape(-1, 3, 3)
        flat_t = np.asarray(theta).reshape(-1)
        flat_sa = sin_axis.reshape(-1, 3)
        flat_out = out.reshape(-1, 3)
        for i in np.flatnonzero(np.asarray(near_pi).reshape(-1)):
            flat_out[i] = _log_near_pi(flat_m[i], flat_t[i], flat_sa[i])
        out = flat_out.reshape(out.shape)
    return out


def so3_right_jacobian(rotvec: np.ndarray) -> np.ndarray:
    """Right Jacobian J_r of SO(3): exp(r + d) ~ exp(r) @ exp(J_r(r) @ d)."""
    r = np.asarray(rotvec, dtype=float)
    theta = np.linalg.norm(r, axis=-1)
    small = theta < SMALL_ANGLE
    theta_safe = np.where(small, 1.0, theta)

    c1 = np.where(
        small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta_safe)) / theta_safe**2
    )
    c2 = np.where(
        small,
        1.0 / 6.0 - theta**2 / 120.0,
        (theta_safe - np.sin(theta_safe)) / theta_safe**3,
    )
    k = skew(r)
    return np.eye(3) - c1[..., None, None] * k + c2[..., None, None] * (k @ k)


def so3_right_jacobian_inv(rotvec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`so3_right_jacobian`; valid for angles below pi."""
    r = np.asarray(rotvec, dtype=float)
    theta = np.linalg.norm(r, axis=-1)
    small = theta < SMALL_ANGLE
    theta_safe = np.where(small, 1.0, theta)

    coef = np.where(
        small,
        1.0 / 12.0 + theta**2 / 720.0,
        (1.0 / theta_safe**2)
        - (1.0 + np.cos(theta_safe)) / (2.0 * theta_safe * np.sin(theta_safe)),
    )
    k = skew(r)
    return np.eye(3) + 0.5 * k + coef[..., None, None] * (k @ k)


def boxplus(
    x: tuple[np.ndarray, np.ndarray], delta: tuple[np.ndarray, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Compose a manifold state with a tangent perturbation."""
    rot, euclid = x
    d_rot, d_euclid = delta
    rot = np.asarray(rot, dtype=float)
    euclid = np.asarray(euclid, dtype=float)
    d_euclid = np.asarray(d_euclid, dtype=float)
    if euclid.shape[-1] != d_euclid.shape[-1]:
        raise InvalidArgumentError(
            "euclidean parts differ in dimension: "
            f"{euclid.shape[-1]} vs {d_euclid.shape[-1]}"
        )
    return rot @ so3_exp(d_rot), euclid + d_euclid


def boxminus(
    x1: tuple[np.ndarray, np.ndarray], x2: tuple[np.ndarray, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Tangent difference such that ``boxplus(x2, boxminus(x1, x2)) == x1``."""
    rot1, a1 = x1
    rot2, a2 = x2
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape[-1] != a2.shape[-1]:
        raise InvalidArgumentError(
            f"euclidean parts differ in dimension: {a1.shape[-1]} vs {a2.shape[-1]}"
        )
    rot2_t = np.swapaxes(np.asarray(rot2, dtype=float), -2, -1)
    return so3_log(rot2_t @ np.asarray(rot1, dtype=float)), a1 - a2
