"""Object-wise velocity metrics: clustering, tracks, AVE and angular error."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .types import PointStatus

logger = logging.getLogger(__name__)

ANGLE_EPS = 1e-6          # m/s; pairs with a smaller norm carry no direction
ASSOCIATION_GATE = 0.5    # m, max centroid jump between consecutive frames


def cluster_points(points: np.ndarray, eps: float, min_points: int) -> np.ndarray:
    """Density-based Euclidean clustering (DBSCAN-style), labels (N,) int.

    Core points have >= min_points neighbors within eps (the point itself
    counts); clusters are the connected components of the core points, border
    points join the cluster of their nearest core neighbor, everything else
    is noise (-1). Labels are numbered by first point appearance, and
    membership does not depend on point order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_points < 1:
        raise ValueError(f"min_points must be >= 1, got {min_points}")
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    within = dist <= eps
    core = within.sum(axis=1) >= min_points

    # Union-find over core-core adjacencies.
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    core_idx = np.flatnonzero(core)
    for a in core_idx:
        for b in np.flatnonzero(within[a] & core):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    labels = np.full(n, -1, dtype=np.int64)
    for a in core_idx:
        labels[a] = find(a)
    # Border points: non-core with a core neighbor; nearest core wins.
    for a in np.flatnonzero(~core):
        cands = np.flatnonzero(within[a] & core)
        if len(cands):
            labels[a] = find(cands[np.argmin(dist[a, cands])])

    # Renumber by first appearance.
    out = np.full(n, -1, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i in range(n):
        if labels[i] >= 0:
            out[i] = mapping.setdefault(labels[i], len(mapping))
    return out


@dataclass
class TrackFrame:
    """One observation of a tracked object."""

    frame_index: int
    timestamp: float                      # s
    centroid: np.ndarray                  # (3,) m, radar frame
    mean_velocity: np.ndarray | None      # (3,) m/s over OK points, None if none
    gt_velocity: np.ndarray | None        # (3,) m/s, None when unknown
    n_points: int
    n_ok: int


@dataclass
class ObjectTrack:
    """Temporally consecutive cluster observations of one object."""

    track_id: int
    frames: list[TrackFrame] = field(default_factory=list)

    def __post_init__(self) -> None:
        for prev, cur in zip(self.frames, self.frames[1:]):
            if cur.frame_index != prev.frame_index + 1:
                raise ValueError(
                    f"track {self.track_id}: frames {prev.frame_index} -> "
                    f"{cur.frame_index} are not consecutive"
                )


@dataclass
class MetricsReport:
    ave: float                   # m/s
    ave_radial: float            # m/s
    ave_tangential: float        # m/s
    avae_deg: float              # degrees
    avae_weighted_deg: float     # degrees
    n_frames: int                # evaluated (track, frame) pairs

    def __post_init__(self) -> None:
        for name in ("ave", "ave_radial", "ave_tangential"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("avae_deg", "avae_weighted_deg"):
            if not 0 <= getattr(self, name) <= 180:
                raise ValueError(f"{name} must lie in [0, 180]")

    def to_dict(self) -> dict:
        return {
            "ave": self.ave,
            "ave_radial": self.ave_radial,
            "ave_tangential": self.ave_tangential,
            "avae_deg": self.avae_deg,
            "avae_weighted_deg": self.avae_weighted_deg,
            "n_frames": self.n_frames,
        }


def centroid_velocity(track: ObjectTrack, index: int) -> np.ndarray:
    """Centroid displacement between frames index and index+1 over their dt."""
    if not 0 <= index < len(track.frames) - 1:
        raise ValueError(
            f"index {index} has no successor in a track of {len(track.frames)} frames"
        )
    a, b = track.frames[index], track.frames[index + 1]
    dt = b.timestamp - a.timestamp
    if not dt > 0:
        raise ValueError(f"non-increasing timestamps {a.timestamp} -> {b.timestamp}")
    return (b.centroid - a.centroid) / dt


def ave(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Average Euclidean error between velocity vectors, m/s."""
    est = np.asarray(estimates, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(truths, dtype=np.float64).reshape(-1, 3)
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    if len(est) == 0:
        raise ValueError("no velocity pairs to evaluate")
    return float(np.mean(np.linalg.norm(est - gt, axis=1)))


def decompose_radial_tangential(
    velocity: np.ndarray, position: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Split a velocity into components along and across the line of sight."""
    pos = np.asarray(position, dtype=np.float64)
    rng = float(np.linalg.norm(pos))
    if rng == 0.0:
        raise ValueError("zero position has no radial direction")
    r_hat = pos / rng
    vel = np.asarray(velocity, dtype=np.float64)
    radial = float(np.dot(vel, r_hat)) * r_hat
    return radial, vel - radial


def angular_errors(
    estimates: np.ndarray, truths: np.ndarray, eps: float = ANGLE_EPS
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-pair angle in degrees plus ground-truth-norm weights.

    Pairs where either vector's norm falls below eps are excluded; the
    third return value is how many were dropped.
    """
    est = np.asarray(estimates, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(truths, dtype=np.float64).reshape(-1, 3)
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    norm_est = np.linalg.norm(est, axis=1)
    norm_gt = np.linalg.norm(gt, axis=1)
    keep = (norm_est >= eps) & (norm_gt >= eps)
    excluded = int(np.sum(~keep))
    cos = np.sum(est[keep] * gt[keep], axis=1) / (norm_est[keep] * norm_gt[keep])
    angles = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return angles, norm_gt[keep], excluded


def avae(estimates: np.ndarray, truths: np.ndarray, weighted: bool = False) -> float:
    """Average velocity angular error in degrees.

    weighted=True weights each pair by its ground-truth speed, emphasizing
    fast objects. Near-zero pairs are excluded (count logged).
    """
    angles, weights, excluded = angular_errors(estimates, truths)
    if excluded:
        logger.info("avae: excluded %d near-zero pairs", excluded)
    if len(angles) == 0:
        raise ValueError("no pairs with a measurable direction")
    if weighted:
        return float(np.sum(weights * angles) / np.sum(weights))
    return float(np.mean(angles))


@dataclass
class EvalFrame:
    """Aligned truth/estimate data of one frame, input to track building."""

    frame_index: int
    timestamp: float
    positions: np.ndarray            # (N, 3) truth points
    velocities: np.ndarray           # (N, 3) estimated
    status: np.ndarray               # (N,) PointStatus codes
    gt_velocities: np.ndarray | None  # (N, 3) exact truth or None


def build_tracks(
    frames: list[EvalFrame],
    eps: float,
    min_points: int,
    gate: float = ASSOCIATION_GATE,
) -> list[ObjectTrack]:
    """Cluster each frame and chain clusters into tracks.

    Clusters of consecutive frames are matched greedily by ascending centroid
    distance, capped at gate meters; unmatched clusters open new tracks.
    """
    tracks: list[ObjectTrack] = []
    active: dict[int, ObjectTrack] = {}  # track_id -> track with a frame at f-1
    for frame in sorted(frames, key=lambda f: f.frame_index):
        labels = cluster_points(frame.positions, eps, min_points)
        observations = []
        for cid in range(labels.max() + 1 if len(labels) else 0):
            members = labels == cid
            centroid = frame.positions[members].mean(axis=0)
            ok = members & (frame.status == PointStatus.OK)
            mean_vel = frame.velocities[ok].mean(axis=0) if ok.any() else None
            gt_vel = (
                frame.gt_velocities[members].mean(axis=0)
                if frame.gt_velocities is not None
                else None
            )
            observations.append(
                TrackFrame(
                    frame_index=frame.frame_index,
                    timestamp=frame.timestamp,
                    centroid=centroid,
                    mean_velocity=mean_vel,
                    gt_velocity=gt_vel,
                    n_points=int(members.sum()),
                    n_ok=int(ok.sum()),
                )
            )

        # Greedy nearest-centroid association against last frame's tracks.
        pairs = []
        for tid, track in active.items():
            for cid, obs in enumerate(observations):
                d = float(np.linalg.norm(obs.centroid - track.frames[-1].centroid))
                if d <= gate:
                    pairs.append((d, tid, cid))
        pairs.sort()
        taken_tracks: set[int] = set()
        taken_clusters: set[int] = set()
        next_active: dict[int, ObjectTrack] = {}
        for d, tid, cid in pairs:
            if tid in taken_tracks or cid in taken_clusters:
                continue
            taken_tracks.add(tid)
            taken_clusters.add(cid)
            active[tid].frames.append(observations[cid])
            next_active[tid] = active[tid]
        for cid, obs in enumerate(observations):
            if cid not in taken_clusters:
                track = ObjectTrack(track_id=len(tracks), frames=[obs])
                tracks.append(track)
                next_active[track.track_id] = track
        active = next_active
    return tracks


def evaluate_tracks(tracks: list[ObjectTrack]) -> MetricsReport:
    """Aggregate object-wise velocity metrics over all track frames.

    The estimate of a (track, frame) pair is the mean velocity of the
    cluster's OK points. Ground truth comes from the stored per-frame truth
    when present, otherwise from the centroid displacement to the next frame.
    """
    est, gt, centroids = [], [], []
    for track in tracks:
        for i, tf in enumerate(track.frames):
            if tf.mean_velocity is None:
                continue
            if tf.gt_velocity is not None:
                truth = tf.gt_velocity
            elif i + 1 < len(track.frames):
                truth = centroid_velocity(track, i)
            else:
                continue
            est.append(tf.mean_velocity)
            gt.append(truth)
            centroids.append(tf.centroid)
    if not est:
        raise ValueError("no evaluable track frames (no OK points or no truth)")
    est_arr = np.asarray(est)
    gt_arr = np.asarray(gt)

    radial_err = np.empty(len(est_arr))
    tangential_err = np.empty(len(est_arr))
    for i in range(len(est_arr)):
        rad, tan = decompose_radial_tangential(est_arr[i] - gt_arr[i], centroids[i])
        radial_err[i] = np.linalg.norm(rad)
        tangential_err[i] = np.linalg.norm(tan)

    angles, weights, excluded = angular_errors(est_arr, gt_arr)
    if excluded:
        logger.info("evaluate_tracks: %d pairs lack a measurable direction", excluded)
    if len(angles):
        avae_deg = float(np.mean(angles))
        avae_w = float(np.sum(weights * angles) / np.sum(weights))
    else:
        avae_deg = 0.0
        avae_w = 0.0
    return MetricsReport(
        ave=ave(est_arr, gt_arr),
        ave_radial=float(np.mean(radial_err)),
        ave_tangential=float(np.mean(tangential_err)),
        avae_deg=avae_deg,
        avae_weighted_deg=avae_w,
        n_frames=len(est_arr),
    )
