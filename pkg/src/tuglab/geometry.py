"""Open playing domains with membership oracles.

A Domain is an open bounded set in R^n. The game only ever asks three
questions: is a point inside, what is the bounding box, and give me one
documented interior point (the witness). Stopping uses plain "not inside",
which lands the exit point in the closed eps-strip around the boundary.

Descriptors are plain data so configs can round-trip them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def _unit(v) -> tuple:
    arr = tuple(float(x) for x in v)
    s = math.sqrt(sum(x * x for x in arr))
    if s == 0.0:
        raise ParameterError("direction vector must be nonzero")
    return tuple(x / s for x in arr)


@dataclass(frozen=True)
class Domain:
    """Base domain; subclasses implement the membership oracle."""

    n: int

    @property
    def kind(self) -> str:
        raise NotImplementedError

    def contains(self, x) -> bool:
        raise NotImplementedError

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized oracle; pts has shape (m, n)."""
        raise NotImplementedError

    @property
    def lo(self) -> tuple:
        raise NotImplementedError

    @property
    def hi(self) -> tuple:
        raise NotImplementedError

    @property
    def witness(self) -> tuple:
        """A documented interior point."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def diameter(self) -> float:
        return math.dist(self.lo, self.hi)


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def kind(self):
        return "ball"

    def contains(self, x):
        return math.dist(x, self.center) < self.radius

    def contains_many(self, pts):
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return d < self.radius

    @property
    def lo(self):
        return tuple(c - self.radius for c in self.center)

    @property
    def hi(self):
        return tuple(c + self.radius for c in self.center)

    @property
    def witness(self):
        return self.center

    def descriptor(self):
        return {"kind": "ball", "center": self.center, "radius": self.radius}


@dataclass(frozen=True)
class Box(Domain):
    low: tuple
    high: tuple

    def __post_init__(self):
        lo = tuple(float(c) for c in self.low)
        hi = tuple(float(c) for c in self.high)
        if len(lo) != len(hi) or len(lo) != self.n:
            raise ParameterError("box corner dimensions disagree")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ParameterError("box must have positive extent on every axis")
        object.__setattr__(self, "low", lo)
        object.__setattr__(self, "high", hi)

    @property
    def kind(self):
        return "box"

    def contains(self, x):
        return all(a < xi < b for xi, a, b in zip(x, self.low, self.high))

    def contains_many(self, pts):
        lo = np.asarray(self.low)
        hi = np.asarray(self.high)
        return np.all((pts > lo) & (pts < hi), axis=1)

    @property
    def lo(self):
        return self.low

    @property
    def hi(self):
        return self.high

    @property
    def witness(self):
        return tuple((a + b) / 2 for a, b in zip(self.low, self.high))

    def descriptor(self):
        return {"kind": "box", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Annulus(Domain):
    """Open annulus: inner closed ball removed from the open outer ball."""

    center: tuple
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0 < self.r_inner < self.r_outer):
            raise ParameterError("annulus needs 0 < r_inner < r_outer")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def kind(self):
        return "annulus"

    def contains(self, x):
        d = math.dist(x, self.center)
        return self.r_inner < d < self.r_outer

    def contains_many(self, pts):
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return (d > self.r_inner) & (d < self.r_outer)

    @property
    def lo(self):
        return tuple(c - self.r_outer for c in self.center)

    @property
    def hi(self):
        return tuple(c + self.r_outer for c in self.center)

    @property
    def witness(self):
        mid = (self.r_inner + self.r_outer) / 2
        return (self.center[0] + mid,) + tuple(self.center[1:])

    def descriptor(self):
        return {
            "kind": "annulus",
            "center": self.center,
            "r_inner": self.r_inner,
            "r_outer": self.r_outer,
        }


@dataclass(frozen=True)
class BoxMinusCone(Domain):
    """Open box with a closed solid cone removed.

    The cone has its vertex on or inside the box, an axis direction, and a
    half-angle; the removed set is every point whose direction from the
    vertex lies within half_angle of the axis. With half_angle = pi/4 in the
    plane the removed sector occupies exactly 1/4 of directions around the
    vertex, which is the reference value used by the measure-density tests.
    """

    low: tuple
    high: tuple
    vertex: tuple
    axis: tuple
    half_angle: float

    def __post_init__(self):
        if not (0 < self.half_angle < math.pi):
            raise ParameterError("cone half-angle must lie in (0, pi)")
        object.__setattr__(self, "low", tuple(float(c) for c in self.low))
        object.__setattr__(self, "high", tuple(float(c) for c in self.high))
        object.__setattr__(self, "vertex", tuple(float(c) for c in self.vertex))
        object.__setattr__(self, "axis", _unit(self.axis))

    @property
    def kind(self):
        return "box_minus_cone"

    def _in_cone(self, x) -> bool:
        d = tuple(xi - vi for xi, vi in zip(x, self.vertex))
        norm = math.sqrt(sum(di * di for di in d))
        dot = sum(di * ai for di, ai in zip(d, self.axis))
        return dot >= norm * math.cos(self.half_angle)

    def contains(self, x):
        if not all(a < xi < b for xi, a, b in zip(x, self.low, self.high)):
            return False
        return not self._in_cone(x)

    def contains_many(self, pts):
        lo = np.asarray(self.low)
        hi = np.asarray(self.high)
        inside_box = np.all((pts > lo) & (pts < hi), axis=1)
        d = pts - np.asarray(self.vertex)
        norms = np.linalg.norm(d, axis=1)
        dots = d @ np.asarray(self.axis)
        in_cone = dots >= norms * math.cos(self.half_angle)
        return inside_box & ~in_cone

    @property
    def lo(self):
        return self.low

    @property
    def hi(self):
        return self.high

    @property
    def witness(self):
        # opposite the cone axis, halfway to the box wall
        c = tuple((a + b) / 2 for a, b in zip(self.low, self.high))
        step = min(b - a for a, b in zip(self.low, self.high)) / 4
        w = tuple(vi - step * ai for vi, ai in zip(self.vertex, self.axis))
        if self.contains(w):
            return w
        if self.contains(c):
            return c
        raise ParameterError("cone swallows the whole box; no interior witness")

    def descriptor(self):
        return {
            "kind": "box_minus_cone",
            "low": self.low,
            "high": self.high,
            "vertex": self.vertex,
            "axis": self.axis,
            "half_angle": self.half_angle,
        }


@dataclass(frozen=True)
class HalfSpaceCap(Domain):
    """Open half-ball: {|x - center| < radius} cut by {(x - center) . normal < 0}.

    The flat face passes through the center, so the center itself is a
    boundary point whose complement density is exactly 1/2 at every radius
    up to the cap radius.
    """

    center: tuple
    radius: float
    normal: tuple

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError("cap radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "normal", _unit(self.normal))

    @property
    def kind(self):
        return "half_space_cap"

    def contains(self, x):
        d = tuple(xi - ci for xi, ci in zip(x, self.center))
        if sum(di * ni for di, ni in zip(d, self.normal)) >= 0.0:
            return False
        return math.sqrt(sum(di * di for di in d)) < self.radius

    def contains_many(self, pts):
        d = pts - np.asarray(self.center)
        below = d @ np.asarray(self.normal) < 0.0
        return below & (np.linalg.norm(d, axis=1) < self.radius)

    @property
    def lo(self):
        return tuple(c - self.radius for c in self.center)

    @property
    def hi(self):
        return tuple(c + self.radius for c in self.center)

    @property
    def witness(self):
        return tuple(
            c - 0.5 * self.radius * nv for c, nv in zip(self.center, self.normal)
        )

    def descriptor(self):
        return {
            "kind": "half_space_cap",
            "center": self.center,
            "radius": self.radius,
            "normal": self.normal,
        }


def ball(center, radius) -> Ball:
    return Ball(n=len(tuple(center)), center=tuple(center), radius=float(radius))


def box(low, high) -> Box:
    return Box(n=len(tuple(low)), low=tuple(low), high=tuple(high))


def interval(a: float, b: float) -> Box:
    return box((a,), (b,))


def annulus(center, r_inner, r_outer) -> Annulus:
    return Annulus(
        n=len(tuple(center)),
        center=tuple(center),
        r_inner=float(r_inner),
        r_outer=float(r_outer),
    )


def box_minus_cone(low, high, vertex, axis, half_angle) -> BoxMinusCone:
    return BoxMinusCone(
        n=len(tuple(low)),
        low=tuple(low),
        high=tuple(high),
        vertex=tuple(vertex),
        axis=tuple(axis),
        half_angle=float(half_angle),
    )


def half_space_cap(center, radius, normal) -> HalfSpaceCap:
    return HalfSpaceCap(
        n=len(tuple(center)),
        center=tuple(center),
        radius=float(radius),
        normal=tuple(normal),
    )


_BUILDERS = {
    "ball": lambda d: ball(d["center"], d["radius"]),
    "box": lambda d: box(d["low"], d["high"]),
    "annulus": lambda d: annulus(d["center"], d["r_inner"], d["r_outer"]),
    "box_minus_cone": lambda d: box_minus_cone(
        d["low"], d["high"], d["vertex"], d["axis"], d["half_angle"]
    ),
    "half_space_cap": lambda d: half_space_cap(d["center"], d["radius"], d["normal"]),
}


def from_descriptor(desc: dict) -> Domain:
    kind = str(desc.get("kind")).replace("-", "_")
    if kind not in _BUILDERS:
        raise ParameterError(f"unknown domain kind {desc.get('kind')!r}")
    return _BUILDERS[kind](desc)
