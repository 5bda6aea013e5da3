"""Scene generators, parameter vectors and parameter-to-world application.

Four scene kinds are supported: three circles in a bin, a second-order
collision chain, stacked boxes, and a gravity-free table of bouncing balls.
Each scene has a test object with fixed parameters (id 0), ``n_unknown``
objects whose parameters are estimated (ids 1..n), and static barriers
(ids from 100).  Geometry and parameters are pure functions of their seeds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import seeding
from .physics2d import Body, Box, Circle, Segment, Shape, World, contact_pairs


class ParamKind(str, enum.Enum):
    MASS = "mass"
    ELASTICITY = "elasticity"
    FRICTION = "friction"


class SceneKind(str, enum.Enum):
    THREE_CIRCLES = "three_circles"
    SECOND_ORDER = "second_order"
    STACKED_BOXES = "stacked_boxes"
    BOUNCING_BALLS = "bouncing_balls"


def parse_kinds(kinds: Iterable) -> Tuple[ParamKind, ...]:
    out = []
    for k in kinds:
        k = ParamKind(k)
        if k not in out:
            out.append(k)
    return tuple(sorted(out, key=list(ParamKind).index))


@dataclass(frozen=True)
class ParamBounds:
    mass: Tuple[float, float] = (1.0, 10.0)
    elasticity: Tuple[float, float] = (0.0, 1.0)
    friction: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        for kind in ParamKind:
            lo, hi = self[kind]
            if not lo < hi or not hi > 0:
                raise ValueError(f"invalid bounds for {kind.value}: {(lo, hi)}")

    def __getitem__(self, kind) -> Tuple[float, float]:
        return getattr(self, ParamKind(kind).value)

    def p_max(self, kind) -> float:
        """Normalisation divisor: the maximum achievable value."""
        return self[kind][1]

    def contains(self, kind, value: float) -> bool:
        lo, hi = self[kind]
        return lo <= value <= hi

    def clamp(self, kind, value: float) -> float:
        lo, hi = self[kind]
        return min(max(value, lo), hi)

    def to_unit(self, kind, value: float) -> float:
        lo, hi = self[kind]
        return (value - lo) / (hi - lo)

    def from_unit(self, kind, u: float) -> float:
        lo, hi = self[kind]
        return lo + u * (hi - lo)

    def as_dict(self) -> dict:
        return {k.value: list(self[k]) for k in ParamKind}


@dataclass(frozen=True)
class ParamEntry:
    object_id: int
    kind: ParamKind
    value: float

    @property
    def key(self) -> Tuple[int, ParamKind]:
        return (self.object_id, self.kind)


@dataclass(frozen=True)
class ParamVector:
    entries: Tuple[ParamEntry, ...]

    @classmethod
    def from_items(cls, items: Iterable[Tuple[int, ParamKind, float]]) -> "ParamVector":
        return cls(tuple(ParamEntry(int(o), ParamKind(k), float(v)) for o, k, v in items))

    @property
    def keys(self) -> Tuple[Tuple[int, ParamKind], ...]:
        return tuple(e.key for e in self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries], dtype=np.float64)

    def with_values(self, values: Sequence[float]) -> "ParamVector":
        if len(values) != len(self.entries):
            raise ValueError("value count does not match entries")
        return ParamVector(tuple(replace(e, value=float(v)) for e, v in zip(self.entries, values)))

    def get(self, object_id: int, kind) -> float:
        kind = ParamKind(kind)
        for e in self.entries:
            if e.object_id == object_id and e.kind == kind:
                return e.value
        raise KeyError((object_id, kind))

    def for_object(self, object_id: int) -> "ParamVector":
        return ParamVector(tuple(e for e in self.entries if e.object_id == object_id))

    def clamped(self, bounds: ParamBounds) -> "ParamVector":
        return ParamVector(tuple(replace(e, value=bounds.clamp(e.kind, e.value)) for e in self.entries))

    def to_unit(self, bounds: ParamBounds) -> np.ndarray:
        return np.array([bounds.to_unit(e.kind, e.value) for e in self.entries])

    def from_unit(self, u: Sequence[float], bounds: ParamBounds) -> "ParamVector":
        return self.with_values([bounds.from_unit(e.kind, x) for e, x in zip(self.entries, u)])

    def as_list(self) -> list:
        return [[e.object_id, e.kind.value, e.value] for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


# The test object is rough: with the product rule every contact it takes part
# in sticks for any unknown friction >= 0.1, so friction between colliding
# circles is saturated.
TEST_MASS = 5.0
TEST_ELASTICITY = 0.1
TEST_FRICTION = 10.0


@dataclass(frozen=True)
class TestObject:
    __test__ = False  # not a pytest class

    shape: Shape
    position: Tuple[float, float]
    velocity: Tuple[float, float]
    mass: float = TEST_MASS
    elasticity: float = TEST_ELASTICITY
    friction: float = TEST_FRICTION


@dataclass(frozen=True)
class Placement:
    object_id: int
    shape: Shape
    position: Tuple[float, float]
    angle: float = 0.0


@dataclass(frozen=True)
class StaticGeometry:
    shape: Segment
    elasticity: float
    friction: float


@dataclass(frozen=True)
class SceneSpec:
    kind: SceneKind
    n_unknown: int
    seed: int
    static: Tuple[StaticGeometry, ...]
    test_object: TestObject
    placements: Tuple[Placement, ...]
    free_kinds: Tuple[ParamKind, ...]
    bounds: ParamBounds = field(default_factory=ParamBounds)
    gravity: Tuple[float, float] = (0.0, 0.0)
    defaults: Tuple[Tuple[str, float], ...] = (("mass", 5.0), ("elasticity", 0.5), ("friction", 0.5))

    @property
    def unknown_ids(self) -> Tuple[int, ...]:
        return tuple(p.object_id for p in self.placements)

    @property
    def free_pairs(self) -> Tuple[Tuple[int, ParamKind], ...]:
        return tuple((i, k) for i in self.unknown_ids for k in self.free_kinds)

    def default(self, kind) -> float:
        return dict(self.defaults)[ParamKind(kind).value]

    def with_free_kinds(self, kinds: Iterable) -> "SceneSpec":
        return replace(self, free_kinds=parse_kinds(kinds))

    def default_params(self) -> ParamVector:
        return ParamVector.from_items((i, k, self.default(k)) for i, k in self.free_pairs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_unknown": self.n_unknown,
            "seed": self.seed,
            "bounds": self.bounds.as_dict(),
            "free_kinds": [k.value for k in self.free_kinds],
            "gravity": list(self.gravity),
            "defaults": dict(self.defaults),
            "test_object": {
                "shape": _shape_dict(self.test_object.shape),
                "position": list(self.test_object.position),
                "velocity": list(self.test_object.velocity),
                "mass": self.test_object.mass,
                "elasticity": self.test_object.elasticity,
                "friction": self.test_object.friction,
            },
            "placements": [
                {"id": p.object_id, "shape": _shape_dict(p.shape),
                 "position": list(p.position), "angle": p.angle}
                for p in self.placements
            ],
            "static": [
                {"shape": _shape_dict(s.shape), "elasticity": s.elasticity, "friction": s.friction}
                for s in self.static
            ],
        }


def _shape_dict(shape: Shape) -> dict:
    if isinstance(shape, Circle):
        return {"type": "circle", "radius": shape.radius}
    if isinstance(shape, Box):
        return {"type": "box", "half_w": shape.half_w, "half_h": shape.half_h}
    return {"type": "segment", "a": list(shape.a), "b": list(shape.b), "thickness": shape.thickness}


def _shape_from_dict(d: Mapping) -> Shape:
    if d["type"] == "circle":
        return Circle(d["radius"])
    if d["type"] == "box":
        return Box(d["half_w"], d["half_h"])
    return Segment(tuple(d["a"]), tuple(d["b"]), d["thickness"])


def spec_from_dict(d: Mapping) -> SceneSpec:
    t = d["test_object"]
    return SceneSpec(
        kind=SceneKind(d["kind"]),
        n_unknown=int(d["n_unknown"]),
        seed=int(d["seed"]),
        static=tuple(StaticGeometry(_shape_from_dict(s["shape"]), s["elasticity"], s["friction"])
                     for s in d["static"]),
        test_object=TestObject(_shape_from_dict(t["shape"]), tuple(t["position"]),
                               tuple(t["velocity"]), t["mass"], t["elasticity"], t["friction"]),
        placements=tuple(Placement(p["id"], _shape_from_dict(p["shape"]), tuple(p["position"]),
                                   p["angle"]) for p in d["placements"]),
        free_kinds=parse_kinds(d["free_kinds"]),
        bounds=ParamBounds(**{k: tuple(v) for k, v in d["bounds"].items()}),
        gravity=tuple(d["gravity"]),
        defaults=tuple((k.value, float(d["defaults"][k.value])) for k in ParamKind),
    )


# ---------------------------------------------------------------------------
# scene geometry

GRAVITY = (0.0, -9.81)
WINDOW = (0.0, 0.0, 10.0, 10.0)
WALL_LO, WALL_HI = 0.5, 9.5
WALL_THICKNESS = 0.3
FLOOR_TOP = WALL_LO + 0.5 * WALL_THICKNESS

BIN_WALL_ELASTICITY = 1.0
BIN_WALL_FRICTION = 0.0
BOX_FLOOR_FRICTION = 0.5
RAIL_ELASTICITY = 0.9
RAIL_FRICTION = 0.0

JITTER = 0.05  # fraction of the object radius / half-size
TEST_ID = 0
STATIC_ID0 = 100

N_UNKNOWN_RANGE = {
    SceneKind.THREE_CIRCLES: (2, 2),
    SceneKind.SECOND_ORDER: (2, 2),
    SceneKind.STACKED_BOXES: (2, 2),
    SceneKind.BOUNCING_BALLS: (2, 6),
}
DEFAULT_FREE_KINDS = {
    SceneKind.THREE_CIRCLES: (ParamKind.MASS,),
    SceneKind.SECOND_ORDER: (ParamKind.MASS,),
    SceneKind.STACKED_BOXES: (ParamKind.MASS,),
    SceneKind.BOUNCING_BALLS: (ParamKind.MASS,),
}

# frames rendered by default: 30 frames every 10 steps
GUARD_STEPS = 290


def _bin_walls(elasticity=BIN_WALL_ELASTICITY, friction=BIN_WALL_FRICTION):
    lo, hi, t = WALL_LO, WALL_HI, WALL_THICKNESS
    segs = [((lo, lo), (hi, lo)), ((lo, lo), (lo, hi)), ((hi, lo), (hi, hi))]
    return tuple(StaticGeometry(Segment(a, b, t), elasticity, friction) for a, b in segs)


def _table_rails():
    lo, hi, t = WALL_LO, WALL_HI, WALL_THICKNESS
    segs = [((lo, lo), (hi, lo)), ((hi, lo), (hi, hi)), ((hi, hi), (lo, hi)), ((lo, hi), (lo, lo))]
    return tuple(StaticGeometry(Segment(a, b, t), RAIL_ELASTICITY, RAIL_FRICTION) for a, b in segs)


def _three_circles(rng: np.random.Generator, n: int):
    r = 1.0
    # mirror-symmetric jitter keeps the left/right unknowns exact mirror images
    half_gap = 0.5 + rng.uniform(-JITTER, JITTER) * r
    y = FLOOR_TOP + r
    placements = (
        Placement(1, Circle(r), (5.0 - r - half_gap, y)),
        Placement(2, Circle(r), (5.0 + r + half_gap, y)),
    )
    test = TestObject(Circle(r), (5.0, 6.5), (0.0, -6.0))
    return placements, test, _bin_walls(), GRAVITY


def _second_order(rng: np.random.Generator, n: int):
    r = 1.0
    y = FLOOR_TOP + r
    xa = 4.6 + rng.uniform(-JITTER, JITTER) * r
    xb = 7.2 + rng.uniform(-JITTER, JITTER) * r
    placements = (
        Placement(1, Circle(r), (xa, y)),
        Placement(2, Circle(r), (xb, y)),
    )
    test = TestObject(Circle(0.8), (1.8, FLOOR_TOP + 0.8), (6.0, 0.0))
    return placements, test, _bin_walls(), GRAVITY


def _stacked_boxes(rng: np.random.Generator, n: int):
    h = 0.9
    x = 6.0 + rng.uniform(-JITTER, JITTER) * h
    x_top = x + rng.uniform(-JITTER, JITTER) * h
    placements = (
        Placement(1, Box(h, h), (x, FLOOR_TOP + h)),
        Placement(2, Box(h, h), (x_top, FLOOR_TOP + 3 * h)),
    )
    test = TestObject(Circle(0.6), (1.6, FLOOR_TOP + 3 * h + 0.9), (7.0, 0.0))
    return placements, test, _bin_walls(friction=BOX_FLOOR_FRICTION), GRAVITY


RACK_R = 0.6
RACK_GAP = 0.1 * RACK_R
# row-major slots of the triangular rack; (row, offset in half-spacings)
RACK_SLOTS = ((0, 0), (1, 1), (1, -1), (2, 0), (2, 2), (2, -2))


def _bouncing_balls(rng: np.random.Generator, n: int):
    r = RACK_R
    spacing = 2 * r + RACK_GAP
    apex = (6.0, 5.0)
    placements = []
    for i in range(n):
        row, off = RACK_SLOTS[i]
        x = apex[0] + row * spacing * math.sqrt(3) / 2
        y = apex[1] + off * spacing / 2
        jx, jy = rng.uniform(-JITTER, JITTER, size=2) * r
        placements.append(Placement(i + 1, Circle(r), (x + jx, y + jy)))
    test = TestObject(Circle(r), (2.0, 5.0), (6.0, 0.0))
    return tuple(placements), test, _table_rails(), (0.0, 0.0)


_BUILDERS = {
    SceneKind.THREE_CIRCLES: _three_circles,
    SceneKind.SECOND_ORDER: _second_order,
    SceneKind.STACKED_BOXES: _stacked_boxes,
    SceneKind.BOUNCING_BALLS: _bouncing_balls,
}

MAX_PLACEMENT_ATTEMPTS = 32


def make_scene(kind, n_unknown: Optional[int] = None, seed: int = 0,
               free_kinds: Optional[Iterable] = None, allow_single: bool = False) -> SceneSpec:
    """Deterministic scene for ``(kind, n_unknown, seed)``.

    ``allow_single`` admits a one-ball bouncing-balls table, a configuration
    used only to probe generalisation beyond the trained object counts.
    """
    kind = SceneKind(kind)
    lo, hi = N_UNKNOWN_RANGE[kind]
    if n_unknown is None:
        n_unknown = lo
    if allow_single and kind is SceneKind.BOUNCING_BALLS:
        lo = 1
    if not lo <= n_unknown <= hi:
        raise ValueError(f"{kind.value} supports {lo}..{hi} unknown objects, got {n_unknown}")
    kinds = parse_kinds(free_kinds) if free_kinds is not None else DEFAULT_FREE_KINDS[kind]
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        rng = seeding.make_rng(seed, seeding.SCENE, attempt)
        placements, test, static, gravity = _BUILDERS[kind](rng, n_unknown)
        spec = SceneSpec(kind=kind, n_unknown=n_unknown, seed=int(seed), static=static,
                         test_object=test, placements=placements, free_kinds=kinds,
                         gravity=gravity)
        if _expressive(spec):
            return spec
    raise RuntimeError(f"no expressive placement found for {kind.value} seed {seed}")


def _expressive(spec: SceneSpec) -> bool:
    """Every unknown must touch another dynamic body at mid-range parameters."""
    mid = ParamVector.from_items(
        (i, k, 0.5 * sum(spec.bounds[k])) for i, k in spec.free_pairs)
    pairs = contact_pairs(apply_params(spec, mid), GUARD_STEPS)
    dynamic = {TEST_ID, *spec.unknown_ids}
    touched = set()
    for a, b in pairs:
        if a in dynamic and b in dynamic:
            touched.update((a, b))
    return all(i in touched for i in spec.unknown_ids)


def sample_params(spec: SceneSpec, seed: int) -> ParamVector:
    """Uniform draw within bounds for every free (object, kind) pair."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & seeding.MASK64))
    items = []
    for i, k in spec.free_pairs:
        lo, hi = spec.bounds[k]
        items.append((i, k, float(rng.uniform(lo, hi))))
    return ParamVector.from_items(items)


def check_params(spec: SceneSpec, params: ParamVector) -> None:
    expected = set(spec.free_pairs)
    got = list(params.keys)
    if len(got) != len(set(got)):
        raise ValueError("duplicate parameter entries")
    missing = expected - set(got)
    extra = set(got) - expected
    if missing or extra:
        raise ValueError(f"parameter structure mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for e in params.entries:
        if not spec.bounds.contains(e.kind, e.value):
            raise ValueError(f"{e.kind.value} of object {e.object_id} out of bounds: {e.value}")


def apply_params(spec: SceneSpec, params: ParamVector) -> World:
    check_params(spec, params)
    given = {e.key: e.value for e in params.entries}
    world = World(gravity=spec.gravity)
    t = spec.test_object
    world.add(Body.dynamic(TEST_ID, t.shape, t.mass, t.position, t.velocity,
                           elasticity=t.elasticity, friction=t.friction))
    for p in spec.placements:
        vals = {k: given.get((p.object_id, k), spec.default(k)) for k in ParamKind}
        world.add(Body.dynamic(p.object_id, p.shape, vals[ParamKind.MASS], p.position,
                               angle=p.angle, elasticity=vals[ParamKind.ELASTICITY],
                               friction=vals[ParamKind.FRICTION]))
    for i, s in enumerate(spec.static):
        world.add(Body.static(STATIC_ID0 + i, s.shape, elasticity=s.elasticity, friction=s.friction))
    return world


def static_geometry(spec: SceneSpec):
    return [(STATIC_ID0 + i, s.shape, 0.0, 0.0, 0.0) for i, s in enumerate(spec.static)]
