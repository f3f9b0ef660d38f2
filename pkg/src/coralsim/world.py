"""Episodic world: bathymetry, object placement, and contact detection.

The arena is a tank-like box: x in [0, extent_x], y in [0, extent_y],
z in [-depth(x, y), 0] with z = 0 the water surface. The bathymetry grid
stores the water depth below the surface at each node, so the floor
surface sits at z = -depth(x, y).

Corals and buckets sit on the floor. Placement is rejection sampling with
a shared minimum pairwise separation, deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import ControllerState
from .dynamics import BodyVelocity, CurrentField, Pose, VehicleState, wrap_angle
from .reward import ContactEvent, EventKind, Mode, RewardMachine

PLACEMENT_ATTEMPT_BUDGET = 10_000


class OutOfExtentError(ValueError):
    """Depth query outside the arena footprint."""


class PlacementError(RuntimeError):
    """Rejection sampling could not place all objects."""


@dataclass(frozen=True)
class Bathymetry:
    """Grid of water depth below the surface [m], bilinearly interpolated.

    Node (i, j) sits at (x = j * cell_size, y = i * cell_size); the grid
    must cover the full extent.
    """

    heightfield: np.ndarray
    cell_size: float
    extent: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "heightfield", np.asarray(self.heightfield, dtype=float))
        ny, nx = self.heightfield.shape
        if (nx - 1) * self.cell_size < self.extent[0] - 1e-9:
            raise ValueError("heightfield does not cover the x extent")
        if (ny - 1) * self.cell_size < self.extent[1] - 1e-9:
            raise ValueError("heightfield does not cover the y extent")
        if np.any(self.heightfield < 0):
            raise ValueError("depths must be non-negative")

    @property
    def is_flat(self) -> bool:
        return bool(np.all(self.heightfield == self.heightfield.flat[0]))


def flat_bathymetry(extent: tuple[float, float], depth: float, cell_size: float = 0.25) -> Bathymetry:
    nx = int(np.ceil(extent[0] / cell_size)) + 1
    ny = int(np.ceil(extent[1] / cell_size)) + 1
    return Bathymetry(np.full((ny, nx), float(depth)), cell_size, extent)


def noise_bathymetry(
    extent: tuple[float, float],
    depth: float,
    amplitude: float,
    rng: np.random.Generator,
    cell_size: float = 0.25,
    components: int = 4,
) -> Bathymetry:
    """Smooth random heightfield: mean depth plus a few long cosines."""
    nx = int(np.ceil(extent[0] / cell_size)) + 1
    ny = int(np.ceil(extent[1] / cell_size)) + 1
    xs = np.arange(nx) * cell_size
    ys = np.arange(ny) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    hf = np.full((ny, nx), float(depth))
    for _ in range(components):
        freq = rng.uniform(0.1, 0.5, size=2)  # cycles per meter, long wavelengths
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.3, 1.0) * amplitude / components
        hf += amp * np.cos(2 * np.pi * (freq[0] * gx + freq[1] * gy) + phase)
    hf = np.clip(hf, 0.2, None)
    return Bathymetry(hf, cell_size, extent)


def query_depth_array(bathymetry: Bathymetry, x, y) -> np.ndarray:
    """Bilinear depth lookup for arrays of coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < -1e-9) or np.any(x > bathymetry.extent[0] + 1e-9):
        raise OutOfExtentError("x outside extent")
    if np.any(y < -1e-9) or np.any(y > bathymetry.extent[1] + 1e-9):
        raise OutOfExtentError("y outside extent")
    hf = bathymetry.heightfield
    ny, nx = hf.shape
    fx = np.clip(x / bathymetry.cell_size, 0, nx - 1 - 1e-12)
    fy = np.clip(y / bathymetry.cell_size, 0, ny - 1 - 1e-12)
    j0 = fx.astype(int)
    i0 = fy.astype(int)
    tx = fx - j0
    ty = fy - i0
    h00 = hf[i0, j0]
    h01 = hf[i0, j0 + 1]
    h10 = hf[i0 + 1, j0]
    h11 = hf[i0 + 1, j0 + 1]
    return (h00 * (1 - tx) * (1 - ty) + h01 * tx * (1 - ty)
            + h10 * (1 - tx) * ty + h11 * tx * ty)


def query_depth(bathymetry: Bathymetry, x: float, y: float) -> float:
    return float(query_depth_array(bathymetry, x, y))


def floor_z(bathymetry: Bathymetry, x: float, y: float) -> float:
    """z coordinate of the floor surface (surface is z = 0, z up)."""
    return -query_depth(bathymetry, x, y)


@dataclass(frozen=True)
class CoralInstance:
    position: np.ndarray  # on the floor surface
    healthy: bool
    contact_radius: float
    collected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.contact_radius <= 0:
            raise ValueError("contact_radius must be positive")


@dataclass(frozen=True)
class BucketInstance:
    position: np.ndarray
    contact_radius: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.contact_radius <= 0:
            raise ValueError("contact_radius must be positive")


@dataclass(frozen=True)
class WorldConfig:
    extent: tuple[float, float] = (6.0, 3.0)
    depth: float = 1.5
    terrain_amplitude: float = 0.0  # 0 keeps the floor flat
    cell_size: float = 0.25
    num_agents: int = 1
    num_healthy: int = 5
    num_unhealthy: int = 5
    num_buckets: int = 1
    min_separation: float = 0.85
    coral_contact_radius: float = 0.3
    bucket_contact_radius: float = 0.4
    seed: int = 0
    current: tuple[float, float, float] = (0.0, 0.0, 0.0)
    max_current_speed: float = 0.1
    max_episode_steps: int = 2000
    spawn_altitude: float = 0.6
    shaping_coeff: float = -0.01
    wall_margin: float = 0.3
    # Distillation hooks: freeze the layout across episodes (reset seeds are
    # ignored) and/or start every agent already carrying a sample.
    randomize_layout: bool = True
    spawn_carrying: bool = False

    def __post_init__(self):
        if min(self.num_agents, self.num_healthy, self.num_unhealthy, self.num_buckets) < 0:
            raise ValueError("object counts must be non-negative")
        if self.extent[0] < 6.0 or self.extent[1] < 3.0:
            raise ValueError("extent must be at least the 6 x 3 m testbed")
        largest_pair = 2 * max(self.coral_contact_radius, self.bucket_contact_radius)
        if self.min_separation <= largest_pair:
            raise ValueError("min_separation must exceed the sum of contact radii")
        if np.linalg.norm(self.current) > self.max_current_speed + 1e-12:
            raise ValueError("current exceeds the configured maximum speed")


@dataclass
class EpisodeState:
    """Everything episodic: terrain, objects, vehicles, and per-agent state.

    Owned by exactly one stepping context; independent episodes may run in
    parallel without sharing anything.
    """

    bathymetry: Bathymetry
    corals: list[CoralInstance]
    buckets: list[BucketInstance]
    vehicles: list[VehicleState]
    reward_machines: list[RewardMachine]
    controllers: list[ControllerState]
    sensor_rngs: list[np.random.Generator]
    current: CurrentField
    step_count: int = 0
    done: bool = False
    spawn_positions: list[np.ndarray] = field(default_factory=list)

    @property
    def num_agents(self) -> int:
        return len(self.vehicles)

    def remaining_corals(self) -> int:
        return sum(not c.collected for c in self.corals)


def _place_points(
    rng: np.random.Generator,
    count: int,
    extent: tuple[float, float],
    margin: float,
    min_separation: float,
    placed: list[np.ndarray],
) -> list[np.ndarray]:
    """Draw count xy points separated from each other and from `placed`."""
    points = []
    attempts = 0
    while len(points) < count:
        if attempts >= PLACEMENT_ATTEMPT_BUDGET:
            raise PlacementError(
                f"placed {len(points)}/{count} objects in {attempts} attempts; "
                "reduce counts or min_separation, or grow the extent"
            )
        attempts += 1
        candidate = np.array([
            rng.uniform(margin, extent[0] - margin),
            rng.uniform(margin, extent[1] - margin),
        ])
        others = placed + points
        if all(np.linalg.norm(candidate - p[:2]) >= min_separation for p in others):
            points.append(candidate)
    return points


def generate_world(config: WorldConfig, sensor_seed: int = 0) -> EpisodeState:
    """Build a fresh episode: terrain, corals, buckets, spawned agents.

    Deterministic for a fixed (config.seed, sensor_seed) pair.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & 0xFFFFFFFF, 0xC0]))
    if config.terrain_amplitude > 0:
        bath = noise_bathymetry(config.extent, config.depth, config.terrain_amplitude,
                                rng, config.cell_size)
    else:
        bath = flat_bathymetry(config.extent, config.depth, config.cell_size)

    n_corals = config.num_healthy + config.num_unhealthy
    placed: list[np.ndarray] = []
    coral_xy = _place_points(rng, n_corals, config.extent, config.wall_margin,
                             config.min_separation, placed)
    placed += coral_xy
    bucket_xy = _place_points(rng, config.num_buckets, config.extent, config.wall_margin,
                              config.min_separation, placed)
    placed += bucket_xy
    spawn_xy = _place_points(rng, config.num_agents, config.extent, config.wall_margin,
                             config.min_separation, placed)

    corals = []
    for k, xy in enumerate(coral_xy):
        z = -query_depth(bath, xy[0], xy[1])
        corals.append(CoralInstance(
            position=np.array([xy[0], xy[1], z]),
            healthy=k < config.num_healthy,
            contact_radius=config.coral_contact_radius,
        ))
    buckets = [
        BucketInstance(
            position=np.array([xy[0], xy[1], -query_depth(bath, xy[0], xy[1])]),
            contact_radius=config.bucket_contact_radius,
        )
        for xy in bucket_xy
    ]

    vehicles = []
    spawns = []
    for xy in spawn_xy:
        z = -query_depth(bath, xy[0], xy[1]) + config.spawn_altitude
        yaw = rng.uniform(-np.pi, np.pi)
        pose = Pose(np.array([xy[0], xy[1], z]), np.array([0.0, 0.0, wrap_angle(yaw)]))
        vehicles.append(VehicleState(pose, BodyVelocity(np.zeros(3), np.zeros(3))))
        spawns.append(pose.position.copy())

    sensor_rngs = [
        np.random.default_rng(np.random.SeedSequence(
            [config.seed & 0xFFFFFFFF, sensor_seed & 0xFFFFFFFF, 0x5E, i]))
        for i in range(config.num_agents)
    ]

    if config.spawn_carrying:
        machines = [RewardMachine(Mode.BUCKET_SEARCHING, carrying=True)
                    for _ in range(config.num_agents)]
    else:
        machines = [RewardMachine() for _ in range(config.num_agents)]
    return EpisodeState(
        bathymetry=bath,
        corals=corals,
        buckets=buckets,
        vehicles=vehicles,
        reward_machines=machines,
        controllers=[ControllerState() for _ in range(config.num_agents)],
        sensor_rngs=sensor_rngs,
        current=CurrentField(np.asarray(config.current, dtype=float)),
        spawn_positions=spawns,
    )


def detect_events(state: EpisodeState, agent_index: int) -> list[ContactEvent]:
    """Contacts of one agent, nearest first.

    Contact is horizontal (x, y) distance within the object's radius; a
    collected coral never re-triggers. Ties break on kind (corals before
    buckets, matching world enumeration order) then on object index.
    """
    if not 0 <= agent_index < state.num_agents:
        raise IndexError(f"agent index {agent_index} out of range")
    pos = state.vehicles[agent_index].pose.position[:2]
    events = []
    for idx, coral in enumerate(state.corals):
        if coral.collected:
            continue
        d = float(np.linalg.norm(pos - coral.position[:2]))
        if d <= coral.contact_radius:
            kind = EventKind.GOOD_CORAL if coral.healthy else EventKind.BAD_CORAL
            events.append(ContactEvent(kind, idx, d))
    for idx, bucket in enumerate(state.buckets):
        d = float(np.linalg.norm(pos - bucket.position[:2]))
        if d <= bucket.contact_radius:
            events.append(ContactEvent(EventKind.BUCKET, idx, d))
    rank = {EventKind.GOOD_CORAL: 0, EventKind.BAD_CORAL: 0, EventKind.BUCKET: 1}
    events.sort(key=lambda e: (e.distance, rank[e.kind], e.object_index))
    return events


def nearest_bucket_distance(state: EpisodeState, agent_index: int) -> float:
    """True 3D distance from an agent to the nearest bucket."""
    pos = state.vehicles[agent_index].pose.position
    if not state.buckets:
        return 0.0
    return float(min(np.linalg.norm(pos - b.position) for b in state.buckets))
