import dataclasses

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import sceneflowgen as sf
from sceneflowgen.render import FramePasses
from sceneflowgen.scene import FlyingThingsParams
from sceneflowgen.trajectory import Trajectory


SMALL = FlyingThingsParams(
    n_objects_range=(3, 6), n_background=15, frames=3, width=128, height=96,
)


def small_params(**overrides):
    return dataclasses.replace(SMALL, **overrides)


def make_passes(depth, intrinsics, pos3d_next=None, object_index=None,
                pose=None, pose_next=None, t=1):
    """Hand-built pass bundle for unit tests that don't need the renderer."""
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    u, v = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    valid = np.isfinite(depth)
    safe = np.where(valid, depth, 1.0)
    pos_t = sf.unproject(np.stack([u, v], axis=-1), safe, intrinsics)
    pos_t[~valid] = np.nan
    if object_index is None:
        object_index = valid.astype(np.uint16)
    return FramePasses(
        rgb=np.zeros((h, w, 3), dtype=np.uint8),
        depth=np.where(valid, depth, np.nan),
        pos3d_t=pos_t,
        pos3d_prev=None,
        pos3d_next=pos3d_next,
        object_index=np.asarray(object_index, dtype=np.uint16),
        material_index=np.asarray(object_index, dtype=np.uint16),
        view="left",
        frame_time=t,
        camera_pose=pose or sf.CameraPose(),
        camera_pose_prev=None,
        camera_pose_next=pose_next,
        intrinsics=intrinsics,
    )


def baseline_shift_scene(seed=3, params=None):
    """Static scene whose camera translates by exactly the baseline
    between consecutive frames (forward flow must equal (-d, 0))."""
    params = params or small_params(static=True)
    spec = sf.generate_flyingthings_scene(seed, params)
    b = spec.rig.baseline
    times = np.array([1.0, float(spec.frames)])
    positions = np.array([
        [0.0, 0.0, 0.0],
        [b * (spec.frames - 1), 0.0, 0.0],
    ])
    q = Rotation.identity().as_quat()
    traj = Trajectory(times, positions, np.array([q, q]))
    return dataclasses.replace(spec, rig_trajectory=traj)


@pytest.fixture(scope="session")
def rendered_scene():
    """One small rendered scene shared by read-only tests."""
    spec = sf.generate_flyingthings_scene(7, SMALL)
    passes = {
        (t, v): sf.rasterize_frame(spec, t, v)
        for t in (1, 2, 3) for v in ("left", "right")
    }
    return spec, passes
