"""Closed-form fusion of radar radial velocity with optical flow.

For a point q observed at the later frame of a flow pair, three linear
constraints pin down its full 3D velocity m (expressed in the later camera
frame, then rotated back into the radar frame):

    [ R1 - u_p * R3 ]       [ (q1 - u_p * q3) / dt ]
    [ R2 - v_p * R3 ] * m = [ (q2 - v_p * q3) / dt ]
    [     r_hat     ]       [        r_dot         ]

R1..R3 are the rows of the rotation carrying earlier-frame vectors into the
later camera frame, (u_p, v_p) the normalized image coordinates of the
point's earlier observation (reconstructed by walking its pixel back along
the flow), and r_dot the radial velocity along the radar line of sight
r_hat. For a static rig the rotation is the identity and both camera frames
coincide.
"""
from __future__ import annotations

import numpy as np

from .types import CameraModel, FlowField, FramePair, PointCloud, PointStatus, VelocityPointCloud
from .velcube import ContextWindow, VelocityCube, cartesian_to_polar, point_bins, query_radial_velocity

DEFAULT_COND_BOUND = 1e6


class DegenerateGeometryError(RuntimeError):
    """Raised when the constraint matrix is too ill-conditioned to invert."""


def project_points(points: np.ndarray, camera: CameraModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized pinhole projection of radar-frame points.

    Returns (u, v, depth) arrays; u/v are NaN wherever depth <= 0 (behind the
    camera, no pixel).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = pts @ camera.rotation.T + camera.translation
    depth = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[:, 0] / depth + camera.cx
        v = camera.fy * cam[:, 1] / depth + camera.cy
    u = np.where(depth > 0, u, np.nan)
    v = np.where(depth > 0, v, np.nan)
    return u, v, depth


def project_to_pixel(point: np.ndarray, camera: CameraModel) -> tuple[float, float, float]:
    """Project one radar-frame point; depth <= 0 signals behind-camera (u, v NaN)."""
    u, v, depth = project_points(np.asarray(point, dtype=np.float64)[None, :], camera)
    return float(u[0]), float(v[0]), float(depth[0])


def lookup_flow(flow: FlowField, u: float, v: float) -> tuple[np.ndarray, bool]:
    """Flow vector at the nearest pixel to (u, v); covered=False off the image
    or on an uncovered pixel."""
    col = int(np.floor(u + 0.5))
    row = int(np.floor(v + 0.5))
    h, w = flow.covered.shape
    if not (0 <= col < w and 0 <= row < h) or not flow.covered[row, col]:
        return np.zeros(2), False
    return flow.flow[row, col].astype(np.float64), True


def solve_full_velocity(
    p_norm: tuple[float, float],
    q_cam: np.ndarray,
    r_hat: np.ndarray,
    r_dot: float,
    pair: FramePair,
    cond_bound: float = DEFAULT_COND_BOUND,
) -> np.ndarray:
    """Invert the three flow/radial constraints for the full velocity.

    p_norm is the normalized image coordinate pair of the earlier
    observation, q_cam the point's position in the later camera frame, r_hat
    the unit radar line of sight. The solved velocity is expressed in the
    frame the rotation maps from; with an identity rotation everything lives
    in the one static camera frame. Raises DegenerateGeometryError when the
    constraint matrix's condition number reaches cond_bound.
    """
    r_hat = np.asarray(r_hat, dtype=np.float64)
    if abs(float(np.linalg.norm(r_hat)) - 1.0) > 1e-9:
        raise ValueError(f"r_hat must be a unit vector, got norm {np.linalg.norm(r_hat)!r}")
    q = np.asarray(q_cam, dtype=np.float64)
    u_p, v_p = float(p_norm[0]), float(p_norm[1])
    rot = pair.rotation_a_to_b
    m = np.empty((3, 3))
    m[0] = rot[0] - u_p * rot[2]
    m[1] = rot[1] - v_p * rot[2]
    m[2] = r_hat
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond >= cond_bound:
        raise DegenerateGeometryError(
            f"constraint matrix condition number {cond:.3e} >= bound {cond_bound:.3e}"
        )
    rhs = np.array(
        [
            (q[0] - u_p * q[2]) / pair.dt,
            (q[1] - v_p * q[2]) / pair.dt,
            r_dot,
        ]
    )
    return np.linalg.solve(m, rhs)


def estimate_frame(
    cloud: PointCloud,
    vc: VelocityCube,
    flow: FlowField,
    camera: CameraModel,
    pair: FramePair,
    window: ContextWindow | None = None,
    cond_bound: float = DEFAULT_COND_BOUND,
) -> VelocityPointCloud:
    """Estimate a 3D velocity for every point of the later frame's cloud.

    Points keep their input order. A point that cannot be estimated gets a
    zero velocity and a status explaining why; calibration inconsistencies
    raise before any point is processed.
    """
    window = window or ContextWindow()
    cfg = vc.config
    if flow.flow.shape[:2] != (camera.height, camera.width):
        raise ValueError(
            f"flow grid {flow.flow.shape[:2]} does not match camera image "
            f"{(camera.height, camera.width)}"
        )
    if abs(flow.dt - pair.dt) > 1e-9 * max(flow.dt, pair.dt):
        raise ValueError(f"flow dt {flow.dt!r} disagrees with frame pair dt {pair.dt!r}")

    n = len(cloud)
    velocities = np.zeros((n, 3))
    status = np.full(n, PointStatus.OK, dtype=np.uint8)

    for i in range(n):
        point = cloud.positions[i]
        if float(np.linalg.norm(point)) == 0.0 or point_bins(point, cfg) is None:
            status[i] = PointStatus.OUT_OF_RADAR_FOV
            continue
        r_dot, found = query_radial_velocity(vc, point, window)
        if not found:
            status[i] = PointStatus.NO_RADAR_RETURN
            continue
        u, v, depth = project_to_pixel(point, camera)
        if depth <= 0:
            status[i] = PointStatus.OUT_OF_CAMERA
            continue
        flow_vec, covered = lookup_flow(flow, u, v)
        if not covered:
            status[i] = PointStatus.OUT_OF_CAMERA
            continue
        # Walk the pixel back along the flow to the earlier frame, then
        # normalize with the intrinsics.
        u_p = (u - flow_vec[0] - camera.cx) / camera.fx
        v_p = (v - flow_vec[1] - camera.cy) / camera.fy
        rng, _, _ = cartesian_to_polar(point)
        q_cam = camera.rotation @ point + camera.translation
        r_hat_cam = camera.rotation @ (point / rng)
        try:
            vel_cam = solve_full_velocity((u_p, v_p), q_cam, r_hat_cam, r_dot, pair, cond_bound)
        except DegenerateGeometryError:
            status[i] = PointStatus.DEGENERATE_GEOMETRY
            continue
        velocities[i] = camera.rotation.T @ vel_cam  # back into the radar frame

    return VelocityPointCloud(cloud.positions.copy(), velocities, status)
