"""Node positions over time: static placement and the rectangle waypoint walk."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import NS_PER_S

Position = tuple[float, float]


@dataclass(frozen=True)
class Static:
    pos: Position

    def position_at(self, t: int) -> Position:
        return self.pos

    def points(self) -> list[Position]:
        return [self.pos]


@dataclass(frozen=True)
class Rectangle:
    """Anti-clockwise walk along a rectangle starting at its lower-left corner.

    ``waypoint_count`` stops are spaced evenly by arc length, shifted by
    ``start_offset`` metres along the perimeter. In discrete mode the node
    jumps to each stop at its arrival instant; in continuous mode it moves
    along the perimeter at ``speed`` between stops.
    """

    origin: Position
    width: float
    height: float
    waypoint_count: int = 19
    speed: float = 10.0
    mode: str = "discrete"
    start_offset: float = 0.0
    start_time: int = 0
    _arrivals: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        if self.waypoint_count < 2:
            raise ValueError("need at least two waypoints")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rectangle sides must be positive")
        if self.mode not in ("discrete", "continuous"):
            raise ValueError(f"unknown mobility mode {self.mode!r}")
        arrivals = tuple(self.arrival_time(k) for k in range(self.waypoint_count + 1))
        object.__setattr__(self, "_arrivals", arrivals)

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def spacing(self) -> float:
        return self.perimeter / self.waypoint_count

    @property
    def lap_time(self) -> int:
        return round(self.perimeter / self.speed * NS_PER_S)

    def arrival_time(self, k: int) -> int:
        """Arrival instant (ns) of the k-th stop, k = 0, 1, 2, ... wrapping every lap."""
        lap, i = divmod(k, self.waypoint_count)
        return self.start_time + lap * self.lap_time + round(i * self.spacing / self.speed * NS_PER_S)

    def point_at_arc(self, s: float) -> Position:
        """Perimeter point at arc length ``s`` from the origin, anti-clockwise."""
        w, h = self.width, self.height
        s = math.fmod(s, self.perimeter)
        if s < 0:
            s += self.perimeter
        x0, y0 = self.origin
        if s < w:
            return (x0 + s, y0)
        s -= w
        if s < h:
            return (x0 + w, y0 + s)
        s -= h
        if s < w:
            return (x0 + w - s, y0 + h)
        s -= w
        return (x0, y0 + h - s)

    def waypoint(self, k: int) -> Position:
        return self.point_at_arc(self.start_offset + (k % self.waypoint_count) * self.spacing)

    def waypoint_schedule(self, count: int | None = None) -> list[tuple[Position, int]]:
        count = self.waypoint_count if count is None else count
        return [(self.waypoint(k), self.arrival_time(k)) for k in range(count)]

    def _last_arrived(self, t: int) -> tuple[int, int]:
        """(index, arrival time) of the most recent stop at or before ``t``."""
        if t < self.start_time:
            return 0, self.start_time
        lap, within = divmod(t - self.start_time, self.lap_time)
        i = bisect.bisect_right(self._arrivals, self.start_time + within) - 1
        i = min(i, self.waypoint_count - 1)
        k = lap * self.waypoint_count + i
        return k, self.arrival_time(k)

    def position_at(self, t: int) -> Position:
        k, tk = self._last_arrived(t)
        if self.mode == "discrete" or t <= tk:
            return self.waypoint(k)
        s = self.start_offset + (k % self.waypoint_count) * self.spacing
        return self.point_at_arc(s + self.speed * (t - tk) / NS_PER_S)

    def points(self) -> list[Position]:
        x0, y0 = self.origin
        return [(x0, y0), (x0 + self.width, y0 + self.height)]


def draw_start_offset(seed: int, max_offset: float) -> float:
    """Uniform offset in [0, max_offset) metres from its own seeded stream."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return float(rng.uniform(0.0, max_offset))


MobilityModel = Static | Rectangle
