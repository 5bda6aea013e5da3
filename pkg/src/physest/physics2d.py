"""Deterministic 2D rigid-body engine.

Circles, boxes and segments; impulse-based contact resolution with
restitution, Coulomb friction and split-impulse penetration recovery.
Everything is plain Python float arithmetic so that a given ``World``
always steps to a bit-identical successor.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

Vec = Tuple[float, float]

INF = math.inf

DEFAULT_DT = 1.0 / 60.0
DEFAULT_ITERATIONS = 10
DEFAULT_SLOP = 0.01
DEFAULT_BAUMGARTE = 0.2
DEFAULT_BOUNCE_THRESHOLD = 0.1

# relative tolerance used when choosing the reference face in polygon pairs
_REF_FACE_TOL = 1e-3


@dataclass(frozen=True)
class Circle:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Box:
    half_w: float
    half_h: float

    def __post_init__(self):
        if not (self.half_w > 0 and self.half_h > 0):
            raise ValueError(f"box half extents must be positive, got {self.half_w}, {self.half_h}")


@dataclass(frozen=True)
class Segment:
    """Line segment in body-local coordinates; ``thickness`` is the full width."""

    a: Vec
    b: Vec
    thickness: float = 0.0

    def __post_init__(self):
        if self.thickness < 0:
            raise ValueError("segment thickness must be >= 0")
        if tuple(self.a) == tuple(self.b):
            raise ValueError("segment endpoints must be distinct")
        object.__setattr__(self, "a", (float(self.a[0]), float(self.a[1])))
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))


Shape = Union[Circle, Box, Segment]


def moment_of_inertia(shape: Shape, mass: float) -> float:
    """Moment of inertia about the centroid for a uniform-density shape."""
    if not mass > 0 or math.isinf(mass):
        raise ValueError(f"mass must be positive and finite, got {mass}")
    if isinstance(shape, Circle):
        return mass * shape.radius ** 2 / 2.0
    if isinstance(shape, Box):
        w, h = 2.0 * shape.half_w, 2.0 * shape.half_h
        return mass * (w * w + h * h) / 12.0
    if isinstance(shape, Segment):
        # thin rod about its midpoint
        length = math.hypot(shape.b[0] - shape.a[0], shape.b[1] - shape.a[1])
        return mass * length * length / 12.0
    raise ValueError(f"unsupported shape {shape!r}")


@dataclass(eq=False)
class Body:
    id: int
    shape: Shape
    mass: float = INF
    moment: float = INF
    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    angle: float = 0.0
    ang_velocity: float = 0.0
    elasticity: float = 0.5
    friction: float = 0.5
    is_static: bool = False

    def __post_init__(self):
        if self.is_static:
            self.mass = INF
            self.moment = INF
        else:
            if not (self.mass > 0 and math.isfinite(self.mass)):
                raise ValueError(f"dynamic body {self.id} needs finite positive mass")
            if not (self.moment > 0 and math.isfinite(self.moment)):
                raise ValueError(f"dynamic body {self.id} needs finite positive moment")
        if not 0.0 <= self.elasticity <= 1.0:
            raise ValueError(f"elasticity must lie in [0, 1], got {self.elasticity}")
        if self.friction < 0:
            raise ValueError(f"friction must be >= 0, got {self.friction}")

    @classmethod
    def dynamic(cls, id: int, shape: Shape, mass: float, position: Vec = (0.0, 0.0),
                velocity: Vec = (0.0, 0.0), angle: float = 0.0, ang_velocity: float = 0.0,
                elasticity: float = 0.5, friction: float = 0.5) -> "Body":
        return cls(id=id, shape=shape, mass=float(mass), moment=moment_of_inertia(shape, mass),
                   x=float(position[0]), y=float(position[1]),
                   vx=float(velocity[0]), vy=float(velocity[1]),
                   angle=float(angle), ang_velocity=float(ang_velocity),
                   elasticity=float(elasticity), friction=float(friction))

    @classmethod
    def static(cls, id: int, shape: Shape, position: Vec = (0.0, 0.0), angle: float = 0.0,
               elasticity: float = 0.5, friction: float = 0.5) -> "Body":
        return cls(id=id, shape=shape, x=float(position[0]), y=float(position[1]),
                   angle=float(angle), elasticity=float(elasticity),
                   friction=float(friction), is_static=True)

    @property
    def position(self) -> Vec:
        return (self.x, self.y)

    @property
    def velocity(self) -> Vec:
        return (self.vx, self.vy)

    @property
    def inv_mass(self) -> float:
        return 0.0 if self.is_static else 1.0 / self.mass

    @property
    def inv_moment(self) -> float:
        return 0.0 if self.is_static else 1.0 / self.moment


@dataclass
class World:
    gravity: Vec = (0.0, 0.0)
    bodies: List[Body] = field(default_factory=list)
    solver_iterations: int = DEFAULT_ITERATIONS
    dt: float = DEFAULT_DT
    slop: float = DEFAULT_SLOP
    baumgarte: float = DEFAULT_BAUMGARTE
    bounce_threshold: float = DEFAULT_BOUNCE_THRESHOLD

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.solver_iterations < 1:
            raise ValueError("solver_iterations must be >= 1")
        ids = [b.id for b in self.bodies]
        if len(set(ids)) != len(ids):
            raise ValueError("body ids must be unique")

    def add(self, body: Body) -> Body:
        if any(b.id == body.id for b in self.bodies):
            raise ValueError(f"duplicate body id {body.id}")
        self.bodies.append(body)
        return body

    def body(self, body_id: int) -> Body:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise KeyError(body_id)

    def copy(self) -> "World":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class Contact:
    """One contact per body pair; ``points`` holds the (point, depth) manifold.

    ``point``/``penetration`` describe the deepest manifold point.  Box pairs
    can carry two manifold points so that resting faces do not rock.
    """

    body_a: int
    body_b: int
    normal: Vec
    penetration: float
    point: Vec
    points: Tuple[Tuple[Vec, float], ...] = ()


@dataclass
class Trajectory:
    """Per-step body states, ``states[k, i] = (x, y, angle, vx, vy, w)``."""

    states: np.ndarray
    dt: float
    body_ids: Tuple[int, ...]
    shapes: Tuple[Shape, ...]
    static_mask: Tuple[bool, ...]

    @property
    def step_count(self) -> int:
        return self.states.shape[0] - 1


# ---------------------------------------------------------------------------
# geometry helpers

def _polygon(body: Body):
    """World-space vertices, outward edge normals and rounding radius."""
    s = body.shape
    c, sn = math.cos(body.angle), math.sin(body.angle)
    if isinstance(s, Box):
        local = ((-s.half_w, -s.half_h), (s.half_w, -s.half_h),
                 (s.half_w, s.half_h), (-s.half_w, s.half_h))
        radius = 0.0
    else:
        local = (s.a, s.b)
        radius = 0.5 * s.thickness
    verts = [(body.x + c * lx - sn * ly, body.y + sn * lx + c * ly) for lx, ly in local]
    n = len(verts)
    normals = []
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        ln = math.hypot(ex, ey)
        normals.append((ey / ln, -ex / ln))
    return verts, normals, radius


def _aabb(body: Body):
    s = body.shape
    if isinstance(s, Circle):
        r = s.radius
        return body.x - r, body.y - r, body.x + r, body.y + r
    verts, _, radius = _polygon(body)
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    return min(xs) - radius, min(ys) - radius, max(xs) + radius, max(ys) + radius


def _circle_circle(a: Body, b: Body):
    ra, rb = a.shape.radius, b.shape.radius
    dx, dy = b.x - a.x, b.y - a.y
    rsum = ra + rb
    d2 = dx * dx + dy * dy
    if d2 > rsum * rsum:
        return None
    d = math.sqrt(d2)
    if d > 0.0:
        nx, ny = dx / d, dy / d
    else:
        nx, ny = 0.0, 1.0
    pen = rsum - d
    k = ra - 0.5 * pen
    return (nx, ny), (((a.x + nx * k, a.y + ny * k), pen),)


def _polygon_circle(poly: Body, circ: Body):
    """Normal points from the polygon toward the circle."""
    verts, normals, pr = _polygon(poly)
    cx, cy = circ.x, circ.y
    cr = circ.shape.radius
    total = pr + cr
    n = len(verts)
    sep = -INF
    idx = 0
    for i in range(n):
        nx, ny = normals[i]
        vx, vy = verts[i]
        s = nx * (cx - vx) + ny * (cy - vy)
        if s > total:
            return None
        if s > sep:
            sep = s
            idx = i
    v1x, v1y = verts[idx]
    v2x, v2y = verts[(idx + 1) % n]
    if sep < 1e-12:
        nx, ny = normals[idx]
    else:
        u1 = (cx - v1x) * (v2x - v1x) + (cy - v1y) * (v2y - v1y)
        u2 = (cx - v2x) * (v1x - v2x) + (cy - v2y) * (v1y - v2y)
        if u1 <= 0.0 or u2 <= 0.0:
            vx, vy = (v1x, v1y) if u1 <= 0.0 else (v2x, v2y)
            dx, dy = cx - vx, cy - vy
            d = math.hypot(dx, dy)
            if d > total:
                return None
            if d > 0.0:
                nx, ny = dx / d, dy / d
            else:
                nx, ny = normals[idx]
            sep = d
        else:
            nx, ny = normals[idx]
    pen = total - sep
    k = cr - 0.5 * pen
    return (nx, ny), (((cx - nx * k, cy - ny * k), pen),)


def _max_separation(va, na, vb):
    best, best_i = -INF, 0
    for i in range(len(va)):
        nx, ny = na[i]
        px, py = va[i]
        s = INF
        for qx, qy in vb:
            d = nx * (qx - px) + ny * (qy - py)
            if d < s:
                s = d
        if s > best:
            best, best_i = s, i
    return best, best_i


def _clip(p1, p2, nx, ny, offset):
    """Keep the part of segment p1-p2 with n.p <= offset."""
    out = []
    d1 = nx * p1[0] + ny * p1[1] - offset
    d2 = nx * p2[0] + ny * p2[1] - offset
    if d1 <= 0.0:
        out.append(p1)
    if d2 <= 0.0:
        out.append(p2)
    if d1 * d2 < 0.0:
        t = d1 / (d1 - d2)
        out.append((p1[0] + t * (p2[0] - p1[0]), p1[1] + t * (p2[1] - p1[1])))
    return out


def _polygon_polygon(a: Body, b: Body):
    """Normal points from ``a`` toward ``b``."""
    va, na, ra = _polygon(a)
    vb, nb, rb = _polygon(b)
    total = ra + rb
    sep_a, edge_a = _max_separation(va, na, vb)
    if sep_a > total:
        return None
    sep_b, edge_b = _max_separation(vb, nb, va)
    if sep_b > total:
        return None
    if sep_b > sep_a + _REF_FACE_TOL:
        rv, rn, iv, inn, edge, flip = vb, nb, va, na, edge_b, True
    else:
        rv, rn, iv, inn, edge, flip = va, na, vb, nb, edge_a, False
    nx, ny = rn[edge]
    # incident edge: most anti-parallel normal
    best, inc = INF, 0
    for i in range(len(iv)):
        d = nx * inn[i][0] + ny * inn[i][1]
        if d < best:
            best, inc = d, i
    i1 = iv[inc]
    i2 = iv[(inc + 1) % len(iv)]
    r1 = rv[edge]
    r2 = rv[(edge + 1) % len(rv)]
    tx, ty = r2[0] - r1[0], r2[1] - r1[1]
    tl = math.hypot(tx, ty)
    tx, ty = tx / tl, ty / tl
    pts = _clip(i1, i2, -tx, -ty, -(tx * r1[0] + ty * r1[1]))
    if len(pts) < 2:
        return None
    pts = _clip(pts[0], pts[1], tx, ty, tx * r2[0] + ty * r2[1])
    if len(pts) < 2:
        return None
    front = nx * r1[0] + ny * r1[1]
    manifold = []
    for px, py in pts:
        s = nx * px + ny * py - front
        if s <= total:
            pen = total - s
            # midpoint between incident point and reference surface
            k = 0.5 * (s - ra + rb) if not flip else 0.5 * (s - rb + ra)
            manifold.append(((px - nx * k, py - ny * k), pen))
    if not manifold:
        return None
    if flip:
        nx, ny = -nx, -ny
    return (nx, ny), tuple(manifold)


def _narrow_phase(a: Body, b: Body):
    """Return ``(normal a->b, manifold)`` or ``None``."""
    sa, sb = a.shape, b.shape
    ca, cb = isinstance(sa, Circle), isinstance(sb, Circle)
    if ca and cb:
        return _circle_circle(a, b)
    if cb:
        return _polygon_circle(a, b)
    if ca:
        hit = _polygon_circle(b, a)
        if hit is None:
            return None
        (nx, ny), manifold = hit
        return (-nx, -ny), manifold
    return _polygon_polygon(a, b)


def detect_contacts(world: World) -> List[Contact]:
    """All touching or overlapping pairs, ordered by (min id, max id)."""
    bodies = sorted(world.bodies, key=lambda b: b.id)
    boxes = [_aabb(b) for b in bodies]
    contacts = []
    n = len(bodies)
    for i in range(n):
        a = bodies[i]
        ax0, ay0, ax1, ay1 = boxes[i]
        for j in range(i + 1, n):
            b = bodies[j]
            if a.is_static and b.is_static:
                continue
            bx0, by0, bx1, by1 = boxes[j]
            if ax0 > bx1 or bx0 > ax1 or ay0 > by1 or by0 > ay1:
                continue
            hit = _narrow_phase(a, b)
            if hit is None:
                continue
            normal, manifold = hit
            deepest = max(manifold, key=lambda m: m[1])
            contacts.append(Contact(a.id, b.id, normal, deepest[1], deepest[0], manifold))
    return contacts


# ---------------------------------------------------------------------------
# solver

def _resolve(world: World, contacts: Sequence[Contact]):
    """Sequential impulses on velocities; returns per-body pseudo velocities."""
    by_id = {b.id: b for b in world.bodies}
    pseudo = {b.id: [0.0, 0.0, 0.0] for b in world.bodies}
    dt = world.dt
    bias_rate = world.baumgarte / dt
    slop = world.slop
    threshold = world.bounce_threshold
    rows = []
    for c in contacts:
        a, b = by_id[c.body_a], by_id[c.body_b]
        ima, imb = a.inv_mass, b.inv_mass
        iia, iib = a.inv_moment, b.inv_moment
        nx, ny = c.normal
        tx, ty = -ny, nx
        e = a.elasticity * b.elasticity
        mu = a.friction * b.friction
        for (px, py), pen in (c.points or ((c.point, c.penetration),)):
            rax, ray = px - a.x, py - a.y
            rbx, rby = px - b.x, py - b.y
            rna = rax * ny - ray * nx
            rnb = rbx * ny - rby * nx
            kn = ima + imb + iia * rna * rna + iib * rnb * rnb
            rta = rax * ty - ray * tx
            rtb = rbx * ty - rby * tx
            kt = ima + imb + iia * rta * rta + iib * rtb * rtb
            dvx = b.vx - b.ang_velocity * rby - a.vx + a.ang_velocity * ray
            dvy = b.vy + b.ang_velocity * rbx - a.vy - a.ang_velocity * rax
            vn = dvx * nx + dvy * ny
            target = -e * vn if -vn > threshold else 0.0
            bias = bias_rate * max(pen - slop, 0.0)
            rows.append([a, b, ima, imb, iia, iib, nx, ny, tx, ty, rax, ray, rbx, rby,
                         1.0 / kn if kn > 0 else 0.0, 1.0 / kt if kt > 0 else 0.0,
                         target, mu, bias, 0.0, 0.0, 0.0])
    if not rows:
        return pseudo

    for _ in range(world.solver_iterations):
        for row in rows:
            (a, b, ima, imb, iia, iib, nx, ny, tx, ty, rax, ray, rbx, rby,
             mn, mt, target, mu, _bias, jn, jt, _jp) = row
            # friction
            dvx = b.vx - b.ang_velocity * rby - a.vx + a.ang_velocity * ray
            dvy = b.vy + b.ang_velocity * rbx - a.vy - a.ang_velocity * rax
            vt = dvx * tx + dvy * ty
            lim = mu * jn
            new = jt - mt * vt
            new = -lim if new < -lim else (lim if new > lim else new)
            d = new - jt
            row[20] = new
            if d != 0.0:
                ix, iy = d * tx, d * ty
                a.vx -= ima * ix
                a.vy -= ima * iy
                a.ang_velocity -= iia * (rax * iy - ray * ix)
                b.vx += imb * ix
                b.vy += imb * iy
                b.ang_velocity += iib * (rbx * iy - rby * ix)
            # normal
            dvx = b.vx - b.ang_velocity * rby - a.vx + a.ang_velocity * ray
            dvy = b.vy + b.ang_velocity * rbx - a.vy - a.ang_velocity * rax
            vn = dvx * nx + dvy * ny
            new = jn - mn * (vn - target)
            if new < 0.0:
                new = 0.0
            d = new - jn
            row[19] = new
            if d != 0.0:
                ix, iy = d * nx, d * ny
                a.vx -= ima * ix
                a.vy -= ima * iy
                a.ang_velocity -= iia * (rax * iy - ray * ix)
                b.vx += imb * ix
                b.vy += imb * iy
                b.ang_velocity += iib * (rbx * iy - rby * ix)

    # split impulse: penetration recovery through pseudo velocities only
    if any(row[18] > 0.0 for row in rows):
        for _ in range(world.solver_iterations):
            for row in rows:
                bias = row[18]
                a, b = row[0], row[1]
                ima, imb, iia, iib = row[2], row[3], row[4], row[5]
                nx, ny = row[6], row[7]
                rax, ray, rbx, rby = row[10], row[11], row[12], row[13]
                pa, pb = pseudo[a.id], pseudo[b.id]
                dvx = pb[0] - pb[2] * rby - pa[0] + pa[2] * ray
                dvy = pb[1] + pb[2] * rbx - pa[1] - pa[2] * rax
                vn = dvx * nx + dvy * ny
                jp = row[21]
                new = jp - row[14] * (vn - bias)
                if new < 0.0:
                    new = 0.0
                d = new - jp
                row[21] = new
                if d != 0.0:
                    ix, iy = d * nx, d * ny
                    pa[0] -= ima * ix
                    pa[1] -= ima * iy
                    pa[2] -= iia * (rax * iy - ray * ix)
                    pb[0] += imb * ix
                    pb[1] += imb * iy
                    pb[2] += iib * (rbx * iy - rby * ix)
    return pseudo


def resolve_collisions(world: World, contacts: Sequence[Contact]) -> World:
    """Apply contact impulses to a copy of ``world``; positions are untouched."""
    out = world.copy()
    _resolve(out, contacts)
    return out


def _advance(world: World) -> List[Contact]:
    gx, gy = world.gravity
    dt = world.dt
    for b in world.bodies:
        if not b.is_static:
            b.vx += gx * dt
            b.vy += gy * dt
    contacts = detect_contacts(world)
    pseudo = _resolve(world, contacts)
    for b in world.bodies:
        if b.is_static:
            continue
        p = pseudo[b.id]
        b.x += (b.vx + p[0]) * dt
        b.y += (b.vy + p[1]) * dt
        b.angle += (b.ang_velocity + p[2]) * dt
    return contacts


def step(world: World) -> World:
    """Advance a copy of ``world`` by one time step (semi-implicit Euler)."""
    out = world.copy()
    _advance(out)
    return out


def _state_row(world: World) -> List[Tuple[float, ...]]:
    return [(b.x, b.y, b.angle, b.vx, b.vy, b.ang_velocity) for b in world.bodies]


def simulate(world: World, steps: int) -> Trajectory:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    w = world.copy()
    rows = [_state_row(w)]
    for _ in range(steps):
        _advance(w)
        rows.append(_state_row(w))
    states = np.asarray(rows, dtype=np.float64).reshape(steps + 1, len(w.bodies), 6)
    return Trajectory(
        states=states,
        dt=w.dt,
        body_ids=tuple(b.id for b in w.bodies),
        shapes=tuple(b.shape for b in w.bodies),
        static_mask=tuple(b.is_static for b in w.bodies),
    )


def kinetic_energy(world: World) -> float:
    total = 0.0
    for b in world.bodies:
        if not b.is_static:
            total += 0.5 * b.mass * (b.vx * b.vx + b.vy * b.vy)
            total += 0.5 * b.moment * b.ang_velocity * b.ang_velocity
    return total


def momentum(world: World) -> Vec:
    px = py = 0.0
    for b in world.bodies:
        if not b.is_static:
            px += b.mass * b.vx
            py += b.mass * b.vy
    return (px, py)


def contact_pairs(world: World, steps: int) -> set:
    """Set of ``(min id, max id)`` pairs that touched during ``steps`` steps."""
    w = world.copy()
    seen = set()
    for _ in range(steps):
        seen.update((c.body_a, c.body_b) for c in _advance(w))
    return seen
