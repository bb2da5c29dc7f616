"""Seeded procedural room-plus-toys scene generation.

Randomness comes from a Philox 4x64 counter-based generator (documented,
cross-platform stable) seeded with the scene seed; the draw order is
fixed (room extents, plane textures, agent pose, toy count, then per toy
shape / color / position) so seeds stay stable across versions. Toy
positions follow a truncated isotropic Gaussian about the agent so most
toys land within reach; normals are produced from Philox uniforms by the
Box-Muller transform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

RNG_NAME = "philox-4x64"
PLANES = ("floor", "ceiling", "wall_north", "wall_east", "wall_south", "wall_west")
AGENT_FLOOR_FRACTION = 0.8
AGENT_HEIGHT_M = 0.3  # torso center of a seated infant
_MAX_REJECTION_DRAWS = 100000

DEFAULT_TEXTURES = ("wood", "carpet", "tiles", "plaster", "brick", "wallpaper")
DEFAULT_TOYS = ("ball", "cube", "ring", "block_tower", "rattle", "soft_star")


@dataclass(frozen=True)
class SceneConfig:
    room_size_min: tuple[float, float, float] = (2.5, 2.5, 2.2)
    room_size_max: tuple[float, float, float] = (5.0, 5.0, 3.0)
    texture_catalog: tuple[str, ...] = DEFAULT_TEXTURES
    toy_catalog: tuple[str, ...] = DEFAULT_TOYS
    toy_count_min: int = 3
    toy_count_max: int = 8
    reach_radius: float = 0.4
    placement_concentration: float = 2.0

    def __post_init__(self):
        for lo, hi in zip(self.room_size_min, self.room_size_max):
            if not 0 < lo <= hi:
                raise ConfigError("room size ranges must satisfy 0 < min <= max")
        if not self.texture_catalog or not self.toy_catalog:
            raise ConfigError("texture and toy catalogs must be nonempty")
        if not 0 <= self.toy_count_min <= self.toy_count_max:
            raise ConfigError("toy count range must satisfy 0 <= min <= max")
        if self.reach_radius <= 0:
            raise ConfigError("reach_radius must be positive")
        if self.placement_concentration <= 0:
            raise ConfigError("placement_concentration must be positive")
        if self.room_size_min[2] <= AGENT_HEIGHT_M:
            raise ConfigError("room too low for the agent")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scene config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("room_size_min", "room_size_max"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        for key in ("texture_catalog", "toy_catalog"):
            if key in kwargs:
                kwargs[key] = tuple(str(v) for v in kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "SceneConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Plane:
    name: str
    extent: tuple[float, float]
    texture: str


@dataclass(frozen=True)
class Toy:
    shape: str
    color: tuple[float, float, float]
    position: tuple[float, float, float]


@dataclass(frozen=True)
class Scene:
    seed: int
    room_size: tuple[float, float, float]
    planes: tuple[Plane, ...]
    agent_position: tuple[float, float, float]
    agent_yaw: float
    toys: tuple[Toy, ...]

    def room_bounds(self):
        sx, sy, sz = self.room_size
        return (-sx / 2, sx / 2), (-sy / 2, sy / 2), (0.0, sz)


def _normals(rng, count: int) -> list[float]:
    """Standard normals via the Box-Muller transform on Philox uniforms."""
    out = []
    while len(out) < count:
        u1 = rng.random()
        u2 = rng.random()
        u1 = max(u1, 1e-300)
        r = math.sqrt(-2.0 * math.log(u1))
        out.append(r * math.cos(2.0 * math.pi * u2))
        out.append(r * math.sin(2.0 * math.pi * u2))
    return out[:count]


def _pick(rng, items):
    return items[int(rng.random() * len(items)) % len(items)]


def generate_scene(seed: int, config: SceneConfig) -> Scene:
    """Deterministic scene for a 64-bit seed and a configuration."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))

    size = tuple(
        lo + rng.random() * (hi - lo)
        for lo, hi in zip(config.room_size_min, config.room_size_max)
    )
    sx, sy, sz = size
    plane_extents = {
        "floor": (sx, sy), "ceiling": (sx, sy),
        "wall_north": (sx, sz), "wall_south": (sx, sz),
        "wall_east": (sy, sz), "wall_west": (sy, sz),
    }
    planes = tuple(
        Plane(name, plane_extents[name], _pick(rng, config.texture_catalog))
        for name in PLANES
    )

    half = AGENT_FLOOR_FRACTION / 2.0
    agent = (
        (rng.random() - 0.5) * 2.0 * half * sx,
        (rng.random() - 0.5) * 2.0 * half * sy,
        AGENT_HEIGHT_M,
    )
    yaw = (rng.random() - 0.5) * 2.0 * math.pi

    count = config.toy_count_min + int(
        rng.random() * (config.toy_count_max - config.toy_count_min + 1)
    )

    sigma = config.reach_radius / config.placement_concentration
    toys = []
    for _ in range(count):
        shape = _pick(rng, config.toy_catalog)
        color = (rng.random(), rng.random(), rng.random())
        for _ in range(_MAX_REJECTION_DRAWS):
            nx, ny, nz, _unused = _normals(rng, 4)
            pos = (agent[0] + sigma * nx, agent[1] + sigma * ny, agent[2] + sigma * nz)
            if (abs(pos[0]) < sx / 2 and abs(pos[1]) < sy / 2
                    and 0.0 < pos[2] < sz):
                break
        else:
            raise ConfigError("could not place a toy inside the room")
        toys.append(Toy(shape, color, pos))

    return Scene(
        seed=int(seed),
        room_size=size,
        planes=planes,
        agent_position=agent,
        agent_yaw=yaw,
        toys=tuple(toys),
    )


def scene_to_json(scene: Scene) -> str:
    """Serialize with fixed field order for byte-exact reproducibility."""
    doc = {
        "rng": RNG_NAME,
        "seed": scene.seed,
        "room_size": list(scene.room_size),
        "planes": [
            {"name": p.name, "extent": list(p.extent), "texture": p.texture}
            for p in scene.planes
        ],
        "agent_position": list(scene.agent_position),
        "agent_yaw": scene.agent_yaw,
        "toys": [
            {"shape": t.shape, "color": list(t.color), "position": list(t.position)}
            for t in scene.toys
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    doc = json.loads(text)
    return Scene(
        seed=int(doc["seed"]),
        room_size=tuple(doc["room_size"]),
        planes=tuple(
            Plane(p["name"], tuple(p["extent"]), p["texture"]) for p in doc["planes"]
        ),
        agent_position=tuple(doc["agent_position"]),
        agent_yaw=float(doc["agent_yaw"]),
        toys=tuple(
            Toy(t["shape"], tuple(t["color"]), tuple(t["position"]))
            for t in doc["toys"]
        ),
    )
