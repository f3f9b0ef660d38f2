"""Sensor models producing the agent's partial observation.

The observation is a forward-camera image plus the vector
[u_hat, v_hat, r_hat, d_hat]: noisy surge/sway velocities and yaw rate
from the INS, and the acoustic range to the nearest bucket. A pressure
depth measure exists for logging but is not part of the observation.

The camera is a flat-shaded raycaster: corals and buckets render as
colored spheres sitting on the floor, the floor as brown, open water as
blue, with linear distance fog out to max_range. Classification, not
photorealism, is the goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BodyVelocity, Pose, rotation_matrix
from .world import Bathymetry, query_depth, query_depth_array

HEALTHY_COLOR = np.array([1.0, 0.5, 0.0])   # orange
UNHEALTHY_COLOR = np.array([1.0, 1.0, 1.0])  # white
BUCKET_COLOR = np.array([0.0, 0.0, 1.0])     # blue
FLOOR_COLOR = np.array([0.45, 0.33, 0.18])   # brown
WATER_COLOR = np.array([0.10, 0.30, 0.45])

CORAL_RENDER_RADIUS = 0.15
BUCKET_RENDER_RADIUS = 0.18


@dataclass(frozen=True)
class CameraConfig:
    width: int = 32
    height: int = 32
    hfov: float = 1.2  # horizontal field of view, radians
    max_range: float = 4.0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("camera must be at least 8x8")
        if not 0 < self.hfov < np.pi:
            raise ValueError("hfov must be in (0, pi)")


@dataclass(frozen=True)
class SensorConfig:
    ins_velocity_noise_std: float = 0.02
    ins_yawrate_noise_std: float = 0.01
    range_noise_std: float = 0.05
    altimeter_noise_std: float = 0.02
    depth_noise_std: float = 0.01
    camera: CameraConfig = CameraConfig()
    noise_seed: int = 0

    def __post_init__(self):
        stds = (self.ins_velocity_noise_std, self.ins_yawrate_noise_std,
                self.range_noise_std, self.altimeter_noise_std, self.depth_noise_std)
        if min(stds) < 0:
            raise ValueError("noise stds must be non-negative")


@dataclass(frozen=True)
class Observation:
    image: np.ndarray   # (H, W, 3) in [0, 1]
    vector: np.ndarray  # [u_hat, v_hat, r_hat, d_hat]

    def __post_init__(self):
        object.__setattr__(self, "image", np.asarray(self.image, dtype=float))
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))


def ins_measure(nu: BodyVelocity, config: SensorConfig, rng: np.random.Generator):
    """Surge, sway and yaw rate estimates: truth plus Gaussian noise."""
    noise = rng.standard_normal(3)
    u = nu.linear[0] + config.ins_velocity_noise_std * noise[0]
    v = nu.linear[1] + config.ins_velocity_noise_std * noise[1]
    r = nu.angular[2] + config.ins_yawrate_noise_std * noise[2]
    return float(u), float(v), float(r)


def range_measure(agent_position, bucket_positions, config: SensorConfig,
                  rng: np.random.Generator) -> float:
    """Acoustic range to the nearest bucket, noisy, clamped non-negative."""
    agent_position = np.asarray(agent_position, dtype=float)
    buckets = np.atleast_2d(np.asarray(bucket_positions, dtype=float))
    true_range = float(np.min(np.linalg.norm(buckets - agent_position, axis=1)))
    measured = true_range + config.range_noise_std * rng.standard_normal()
    return max(0.0, float(measured))


def altimeter_measure(position, bathymetry: Bathymetry, config: SensorConfig,
                      rng: np.random.Generator) -> float:
    """Sonar altitude above the floor directly below, noisy, clamped >= 0."""
    position = np.asarray(position, dtype=float)
    true_altitude = position[2] + query_depth(bathymetry, position[0], position[1])
    if true_altitude < 0:
        raise ValueError("agent below the floor surface")
    measured = true_altitude + config.altimeter_noise_std * rng.standard_normal()
    return max(0.0, float(measured))


def depth_measure(position, config: SensorConfig, rng: np.random.Generator) -> float:
    """Pressure depth below the surface; logging only, not observed."""
    measured = -float(position[2]) + config.depth_noise_std * rng.standard_normal()
    return max(0.0, measured)


def _ray_directions(pose: Pose, camera: CameraConfig) -> np.ndarray:
    """World-frame unit ray directions, shape (H*W, 3), row-major pixels.

    Image x grows to the camera's right (-y body), image y grows downward
    (-z body); the optical axis is body +x.
    """
    tan_h = np.tan(camera.hfov / 2)
    tan_v = tan_h * camera.height / camera.width
    xs = (2 * (np.arange(camera.width) + 0.5) / camera.width - 1) * tan_h
    ys = (2 * (np.arange(camera.height) + 0.5) / camera.height - 1) * tan_v
    gx, gy = np.meshgrid(xs, ys)
    dirs = np.stack([np.ones_like(gx), -gx, -gy], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs @ rotation_matrix(pose.attitude).T


def _sphere_hits(origin, dirs, center, radius) -> np.ndarray:
    """Per-ray hit distance to a sphere; inf where the ray misses."""
    oc = center - origin
    b = dirs @ oc
    disc = b * b - (oc @ oc - radius * radius)
    t = np.full(dirs.shape[0], np.inf)
    ok = disc >= 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    t_near = b - root
    hit = ok & (t_near > 1e-6)
    t[hit] = t_near[hit]
    return t


def _floor_hits(origin, dirs, bathymetry: Bathymetry, max_range: float) -> np.ndarray:
    """Per-ray distance to the floor surface z = -depth(x, y); inf if none.

    Flat floors intersect analytically; uneven floors are ray-marched with
    bisection refinement. Rays are clipped to the arena footprint.
    """
    n = dirs.shape[0]
    t = np.full(n, np.inf)
    if bathymetry.is_flat:
        fz = -bathymetry.heightfield.flat[0]
        desc = dirs[:, 2] < -1e-9
        t_hit = np.where(desc, (fz - origin[2]) / np.where(desc, dirs[:, 2], -1.0), np.inf)
        inside = t_hit > 1e-6
        if np.any(inside):
            px = origin[0] + t_hit * dirs[:, 0]
            py = origin[1] + t_hit * dirs[:, 1]
            inside &= (px >= 0) & (px <= bathymetry.extent[0])
            inside &= (py >= 0) & (py <= bathymetry.extent[1])
            t[inside] = t_hit[inside]
        return t

    steps = 48
    ts = np.linspace(1e-3, max_range, steps)
    lo = np.full(n, np.inf)
    hi = np.full(n, np.inf)
    prev = np.full(n, ts[0])
    found = np.zeros(n, dtype=bool)
    for s in ts:
        px = origin[0] + s * dirs[:, 0]
        py = origin[1] + s * dirs[:, 1]
        pz = origin[2] + s * dirs[:, 2]
        valid = ((px >= 0) & (px <= bathymetry.extent[0])
                 & (py >= 0) & (py <= bathymetry.extent[1]))
        below = np.zeros(n, dtype=bool)
        if np.any(valid):
            depth_here = np.zeros(n)
            depth_here[valid] = query_depth_array(bathymetry, px[valid], py[valid])
            below[valid] = pz[valid] <= -depth_here[valid]
        newly = below & ~found
        lo[newly] = prev[newly]
        hi[newly] = s
        found |= newly
        prev = np.where(found, prev, s)
    # Bisection refine the crossing bracket.
    active = np.isfinite(hi)
    for _ in range(10):
        mid = 0.5 * (lo + hi)
        px = origin[0] + mid * dirs[:, 0]
        py = origin[1] + mid * dirs[:, 1]
        pz = origin[2] + mid * dirs[:, 2]
        cx = np.clip(px, 0, bathymetry.extent[0])
        cy = np.clip(py, 0, bathymetry.extent[1])
        below = pz <= -query_depth_array(bathymetry, cx, cy)
        hi = np.where(active & below, mid, hi)
        lo = np.where(active & ~below, mid, lo)
    t[active] = hi[active]
    return t


def render_camera(pose: Pose, scene, camera: CameraConfig) -> np.ndarray:
    """Flat-shaded forward camera image, (H, W, 3) floats in [0, 1].

    scene is anything exposing corals, buckets and bathymetry (an
    EpisodeState qualifies). Collected corals are not rendered. Colors
    fade linearly into water-blue with distance out to max_range.
    """
    dirs = _ray_directions(pose, camera)
    origin = pose.position
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    colors = np.tile(WATER_COLOR, (n, 1))

    def shade(t_hit, color):
        nonlocal best_t, colors
        closer = t_hit < best_t
        if np.any(closer):
            best_t = np.where(closer, t_hit, best_t)
            colors[closer] = color

    t_floor = _floor_hits(origin, dirs, scene.bathymetry, camera.max_range)
    shade(t_floor, FLOOR_COLOR)
    for coral in scene.corals:
        if coral.collected:
            continue
        center = coral.position + np.array([0.0, 0.0, CORAL_RENDER_RADIUS])
        color = HEALTHY_COLOR if coral.healthy else UNHEALTHY_COLOR
        shade(_sphere_hits(origin, dirs, center, CORAL_RENDER_RADIUS), color)
    for bucket in scene.buckets:
        center = bucket.position + np.array([0.0, 0.0, BUCKET_RENDER_RADIUS])
        shade(_sphere_hits(origin, dirs, center, BUCKET_RENDER_RADIUS), BUCKET_COLOR)

    fog = np.clip(best_t / camera.max_range, 0.0, 1.0)[:, None]
    fog[~np.isfinite(best_t).reshape(-1)] = 1.0
    image = colors * (1 - fog) + WATER_COLOR * fog
    return image.reshape(camera.height, camera.width, 3)


def make_observation(state, agent_index: int, config: SensorConfig) -> Observation:
    """Render the camera and sample the noisy vector channels for one agent."""
    vehicle = state.vehicles[agent_index]
    rng = state.sensor_rngs[agent_index]
    u, v, r = ins_measure(vehicle.velocity, config, rng)
    bucket_positions = [b.position for b in state.buckets]
    if bucket_positions:
        d = range_measure(vehicle.pose.position, bucket_positions, config, rng)
    else:
        d = 0.0
        rng.standard_normal()  # keep the draw sequence stable
    image = render_camera(vehicle.pose, state, config.camera)
    return Observation(image=image, vector=np.array([u, v, r, d]))


def save_ppm(image: np.ndarray, path) -> None:
    """Dump an image as binary PPM for eyeballing camera frames."""
    data = (np.clip(image, 0, 1) * 255).astype(np.uint8)
    h, w, _ = data.shape
    with open(path, "wb") as f:
        f.write(f"P6 {w} {h} 255\n".encode())
        f.write(data.tobytes())
