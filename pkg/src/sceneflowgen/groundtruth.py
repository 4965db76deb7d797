"""Dense scene-flow ground truth derived from rendered frame passes:
bidirectional optical flow, disparity, disparity change, motion
boundaries, occlusion masks, and 3D scene-flow reconstruction from the
(flow, disparity, disparity change) components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractError, DataCorruptionError, GeometryError
from .geometry import CameraIntrinsics, CameraPose, StereoRig, unproject
from .render import FramePasses

__all__ = [
    "GroundTruthFrame", "derive_disparity", "derive_flow",
    "derive_disparity_change", "derive_motion_boundaries",
    "compute_occlusion_mask", "reconstruct_scene_flow", "derive_frame",
    "bilinear_sample", "pixel_centers",
    "MOTION_DIFF_THRESHOLD_PX", "MIN_BOUNDARY_AREA_PX",
]

MOTION_DIFF_THRESHOLD_PX = 1.5
MIN_BOUNDARY_AREA_PX = 10


@dataclass
class GroundTruthFrame:
    flow_fwd: np.ndarray | None  # (H, W, 2), NaN at void; None at t = frames
    flow_bwd: np.ndarray | None  # None at t = 1
    disparity: np.ndarray  # (H, W), positive at valid pixels
    dispchange_fwd: np.ndarray | None
    dispchange_bwd: np.ndarray | None
    motion_boundaries: np.ndarray | None  # (H, W) bool
    occlusion_fwd: np.ndarray | None  # (H, W) bool
    valid: np.ndarray  # (H, W) bool, non-void


def pixel_centers(h, w):
    """(H, W, 2) array of half-integer pixel-center coordinates."""
    u, v = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    return np.stack([u, v], axis=-1)


def _project_pass(pos, k: CameraIntrinsics):
    """Project a 3D-position pass; pixels with Z <= 0 (or NaN) come back NaN."""
    z = pos[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        ok = z > 0
        safe_z = np.where(ok, z, 1.0)
        u = k.focal_px * pos[..., 0] / safe_z + k.principal_point[0]
        v = k.focal_px * pos[..., 1] / safe_z + k.principal_point[1]
    out = np.stack([u, v], axis=-1)
    out[~ok] = np.nan
    return out


def derive_disparity(passes: FramePasses, rig: StereoRig) -> np.ndarray:
    """d = baseline * focal_px / depth at valid pixels, NaN at void."""
    depth = passes.depth
    valid = passes.valid
    if np.any(valid & ~(depth > 0)):
        raise DataCorruptionError("non-positive depth at a covered pixel")
    with np.errstate(invalid="ignore"):
        d = rig.baseline * rig.intrinsics.focal_px / depth
    d = np.where(valid, d, np.nan)
    return d


def derive_flow(passes: FramePasses, direction: str,
                k: CameraIntrinsics | None = None) -> np.ndarray | None:
    """Optical flow as the difference of projected pixel positions.

    Forward: project(pos3d_next) - project(pos3d_t); backward uses
    pos3d_prev. Defined at every valid pixel, also where the point is
    occluded in the other frame. Returns None at a sequence boundary
    where the required pass is absent.
    """
    other = _other_pass(passes, direction)
    if other is None:
        return None
    k = k or passes.intrinsics
    flow = _project_pass(other, k) - _project_pass(passes.pos3d_t, k)
    flow[~passes.valid] = np.nan
    return flow


def derive_disparity_change(passes: FramePasses, rig: StereoRig,
                            direction: str) -> np.ndarray | None:
    """Delta-d = b*f/Z_other - b*f/Z_t; positive for approaching surfaces."""
    other = _other_pass(passes, direction)
    if other is None:
        return None
    bf = rig.baseline * rig.intrinsics.focal_px
    z_t = passes.pos3d_t[..., 2]
    z_o = other[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        dd = np.where(z_o > 0, bf / z_o, np.nan) - bf / z_t
    dd[~passes.valid] = np.nan
    return dd


def _other_pass(passes: FramePasses, direction: str):
    if direction == "fwd":
        return passes.pos3d_next
    if direction == "bwd":
        return passes.pos3d_prev
    raise ContractError(f"direction must be 'fwd' or 'bwd', got {direction!r}")


def derive_motion_boundaries(passes: FramePasses, flow: np.ndarray,
                             motion_threshold=MOTION_DIFF_THRESHOLD_PX,
                             min_area=MIN_BOUNDARY_AREA_PX) -> np.ndarray:
    """Boundary pixels between differently moving objects.

    A 4-adjacent pixel pair is a candidate when the two pixels belong to
    different objects and their flow vectors differ by at least the motion
    threshold; both pixels of the pair are marked. 8-connected components
    smaller than min_area pixels are removed.
    """
    obj = passes.object_index
    marked = np.zeros(obj.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        for axis in (0, 1):
            a = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
            b = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
            diff_obj = obj[a] != obj[b]
            dflow = np.linalg.norm(flow[a] - flow[b], axis=-1)
            hit = diff_obj & (dflow >= motion_threshold)
            marked[a] |= hit
            marked[b] |= hit
    labels, n = ndimage.label(marked, structure=np.ones((3, 3), dtype=int))
    if n:
        sizes = ndimage.sum_labels(marked, labels, index=np.arange(1, n + 1))
        small = np.nonzero(sizes < min_area)[0] + 1
        marked[np.isin(labels, small)] = False
    return marked


def bilinear_sample(grid: np.ndarray, coords: np.ndarray,
                    fill=np.nan) -> np.ndarray:
    """Bilinear lookup of an (H, W[, C]) grid at continuous pixel
    coordinates (..., 2); samples whose 2x2 footprint leaves the image get
    `fill`. Coordinates follow the half-integer pixel-center convention.
    """
    scalar = grid.ndim == 2
    g = grid[..., None] if scalar else grid
    h, w = g.shape[:2]
    x = coords[..., 0] - 0.5
    y = coords[..., 1] - 0.5
    with np.errstate(invalid="ignore"):
        x0 = np.floor(x)
        y0 = np.floor(y)
        inside = (x0 >= 0) & (y0 >= 0) & (x0 + 1 <= w - 1) & (y0 + 1 <= h - 1)
    x0i = np.clip(np.nan_to_num(x0), 0, w - 2).astype(int)
    y0i = np.clip(np.nan_to_num(y0), 0, h - 2).astype(int)
    fx = np.clip(np.nan_to_num(x - x0), 0, 1)[..., None]
    fy = np.clip(np.nan_to_num(y - y0), 0, 1)[..., None]
    top = g[y0i, x0i] * (1 - fx) + g[y0i, x0i + 1] * fx
    bot = g[y0i + 1, x0i] * (1 - fx) + g[y0i + 1, x0i + 1] * fx
    out = top * (1 - fy) + bot * fy
    out[~inside] = fill
    return out[..., 0] if scalar else out


def compute_occlusion_mask(passes_t: FramePasses, passes_other: FramePasses,
                           k: CameraIntrinsics | None = None,
                           eps=None) -> np.ndarray:
    """Pixels of frame t whose surface point is hidden or out of frame at
    the time of `passes_other` (the t+1 or t-1 frame of the same view).

    A pixel is occluded when the other frame's z-buffer, bilinearly
    sampled at the point's projected location, is nearer than the point
    itself by more than eps, or when the projection leaves the image.
    """
    direction = "fwd" if passes_other.frame_time > passes_t.frame_time else "bwd"
    other = _other_pass(passes_t, direction)
    if other is None:
        raise ContractError("occlusion needs the corresponding 3D-position pass")
    k = k or passes_t.intrinsics
    if eps is None:
        scale = float(np.nanmedian(passes_t.depth))
        eps = 1e-3 * (scale if np.isfinite(scale) and scale > 0 else 1.0)
    proj = _project_pass(other, k)
    z_point = other[..., 2]
    h, w = passes_t.depth.shape
    depth_other = np.where(passes_other.valid, passes_other.depth, np.inf)

    with np.errstate(invalid="ignore"):
        u = np.nan_to_num(proj[..., 0], nan=-1.0)
        v = np.nan_to_num(proj[..., 1], nan=-1.0)
        inside = (u >= 0) & (u <= w) & (v >= 0) & (v <= h) & np.isfinite(proj[..., 0])
        # clamped 2x2 footprint so border projections still get a lookup
        x0i = np.clip(np.floor(u - 0.5), 0, w - 2).astype(int)
        y0i = np.clip(np.floor(v - 0.5), 0, h - 2).astype(int)
        fx = np.clip(u - 0.5 - x0i, 0.0, 1.0)
        fy = np.clip(v - 0.5 - y0i, 0.0, 1.0)
        top = depth_other[y0i, x0i] * (1 - fx) + depth_other[y0i, x0i + 1] * fx
        bot = depth_other[y0i + 1, x0i] * (1 - fx) + depth_other[y0i + 1, x0i + 1] * fx
        sampled = top * (1 - fy) + bot * fy
        hidden = sampled < z_point - eps
        # silhouette-adjacent samples: the 2x2 footprint touches another
        # object, so the point's surface is not cleanly visible there
        oi = passes_other.object_index
        own = passes_t.object_index
        mixed = (
            (oi[y0i, x0i] != own) | (oi[y0i, x0i + 1] != own)
            | (oi[y0i + 1, x0i] != own) | (oi[y0i + 1, x0i + 1] != own)
        )
    occluded = (~inside | hidden | mixed) & passes_t.valid
    return occluded


def reconstruct_scene_flow(flow: np.ndarray, disparity: np.ndarray,
                           dispchange: np.ndarray, rig: StereoRig,
                           pose_t: CameraPose, pose_next: CameraPose):
    """Rebuild 3D positions and world-frame motion from the components.

    Returns (position, motion): (H, W, 3) world-frame point at t and its
    3D displacement to t+1. NaN components stay NaN; finite non-positive
    disparities (d or d + delta-d) are rejected.
    """
    h, w = disparity.shape
    bf = rig.baseline * rig.intrinsics.focal_px
    valid = np.isfinite(disparity) & np.isfinite(dispchange) \
        & np.isfinite(flow).all(axis=-1)
    if np.any(valid & (disparity <= 0)):
        raise GeometryError("non-positive disparity at a valid pixel")
    d_next = disparity + dispchange
    if np.any(valid & (d_next <= 0)):
        raise GeometryError("non-positive disparity at t+1 (d + delta-d <= 0)")

    px = pixel_centers(h, w)
    safe_d = np.where(valid, disparity, 1.0)
    safe_dn = np.where(valid, d_next, 1.0)
    safe_flow = np.where(valid[..., None], flow, 0.0)

    p_cam = unproject(px, bf / safe_d, rig.intrinsics)
    p_next_cam = unproject(px + safe_flow, bf / safe_dn, rig.intrinsics)
    p_world = pose_t.camera_to_world(p_cam)
    p_next_world = pose_next.camera_to_world(p_next_cam)
    motion = p_next_world - p_world
    p_world[~valid] = np.nan
    motion[~valid] = np.nan
    return p_world, motion


def derive_frame(passes: FramePasses, rig: StereoRig,
                 passes_next: FramePasses | None = None) -> GroundTruthFrame:
    """All per-view ground-truth maps for one rendered frame."""
    flow_fwd = derive_flow(passes, "fwd")
    frame = GroundTruthFrame(
        flow_fwd=flow_fwd,
        flow_bwd=derive_flow(passes, "bwd"),
        disparity=derive_disparity(passes, rig),
        dispchange_fwd=derive_disparity_change(passes, rig, "fwd"),
        dispchange_bwd=derive_disparity_change(passes, rig, "bwd"),
        motion_boundaries=(derive_motion_boundaries(passes, flow_fwd)
                           if flow_fwd is not None else None),
        occlusion_fwd=(compute_occlusion_mask(passes, passes_next)
                       if passes_next is not None else None),
        valid=passes.valid.copy(),
    )
    return frame
