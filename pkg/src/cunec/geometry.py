"""Manhattan-grid geometry: street corridors, minimal-turn routes and distances.

Streets are full straight corridors.  Vertical street ``V{i}`` has its
centerline at ``x = origin_x + i * (b + w)`` and horizontal street ``H{j}`` at
``y = origin_y + j * (b + w)``.  Buildings are the ``b x b`` squares between
corridors.  All distances are planar; terminal height only carries the role.
"""
from __future__ import annotations

import enum
import math
import numbers
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidPositionError

UNREACHABLE = -1
MAX_STREET_ORDER = 2

# Distance validity bounds per street order (exclusive), applied to the
# segment after the last corner.
VALIDITY_BOUNDS_M = {0: (15.0, 500.0), 1: (1.0, 250.0), 2: (1.0, 500.0)}

Point2 = tuple[float, float]


class Role(str, enum.Enum):
    AP = "AP"
    UE = "UE"


@dataclass(frozen=True)
class Terminal:
    position: tuple[float, float, float]
    role: Role

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) == 2:
            pos = pos + (0.0,)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise InvalidArgumentError(f"terminal position must be 3 finite numbers, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "role", Role(self.role))

    @property
    def xy(self) -> Point2:
        return self.position[0], self.position[1]


@dataclass(frozen=True)
class StreetRef:
    """A terminal's street assignment."""

    street_id: str
    axis: str  # "H" (runs along x) or "V" (runs along y)
    index: int
    along: float  # coordinate along the street centerline
    offset: float  # signed lateral offset from the centerline


@dataclass(frozen=True)
class GridLayout:
    block_length_m: float
    street_width_m: float
    building_height_m: float
    blocks_x: int
    blocks_y: int
    origin: Point2 = (0.0, 0.0)

    def __post_init__(self):
        for name in ("block_length_m", "street_width_m", "building_height_m"):
            v = getattr(self, name)
            if not (isinstance(v, numbers.Real) and math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.block_length_m <= self.street_width_m:
            raise InvalidArgumentError("block_length_m must exceed street_width_m")
        for name in ("blocks_x", "blocks_y"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be an integer >= 1, got {v!r}")
        object.__setattr__(self, "blocks_x", int(self.blocks_x))
        object.__setattr__(self, "blocks_y", int(self.blocks_y))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def pitch(self) -> float:
        return self.block_length_m + self.street_width_m

    def x_street(self, i: int) -> float:
        return self.origin[0] + i * self.pitch

    def y_street(self, j: int) -> float:
        return self.origin[1] + j * self.pitch

    @property
    def street_ids(self) -> list[str]:
        return [f"H{j}" for j in range(self.blocks_y + 1)] + [f"V{i}" for i in range(self.blocks_x + 1)]

    def corridor_width(self, street_id: str) -> float:
        self._parse_street(street_id)
        return self.street_width_m

    def centerline(self, street_id: str) -> float:
        axis, idx = self._parse_street(street_id)
        return self.y_street(idx) if axis == "H" else self.x_street(idx)

    def _parse_street(self, street_id: str) -> tuple[str, int]:
        axis, idx = street_id[0], int(street_id[1:])
        limit = self.blocks_y if axis == "H" else self.blocks_x
        if axis not in "HV" or not 0 <= idx <= limit:
            raise InvalidArgumentError(f"unknown street {street_id!r}")
        return axis, idx

    def intersections(self) -> list[Point2]:
        return [(self.x_street(i), self.y_street(j))
                for j in range(self.blocks_y + 1) for i in range(self.blocks_x + 1)]

    def street_segments(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Edges of the street graph between adjacent intersections ``(i, j)``."""
        edges = []
        for j in range(self.blocks_y + 1):
            for i in range(self.blocks_x):
                edges.append(((i, j), (i + 1, j)))
        for i in range(self.blocks_x + 1):
            for j in range(self.blocks_y):
                edges.append(((i, j), (i, j + 1)))
        return edges

    def is_connected(self) -> bool:
        adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for a, b in self.street_segments():
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        nodes = [(i, j) for j in range(self.blocks_y + 1) for i in range(self.blocks_x + 1)]
        seen = {nodes[0]}
        queue = deque([nodes[0]])
        while queue:
            for nb in adj.get(queue.popleft(), []):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == len(nodes)

    def locate(self, point: Sequence[float]) -> StreetRef:
        """Assign a planar point to a street corridor.

        Inside an intersection area the corridor with the nearer centerline
        wins; exact ties go to the horizontal street.
        """
        x, y = float(point[0]), float(point[1])
        half = self.street_width_m / 2
        tol = 1e-9
        x_lo, x_hi = self.x_street(0) - half, self.x_street(self.blocks_x) + half
        y_lo, y_hi = self.y_street(0) - half, self.y_street(self.blocks_y) + half
        if not (x_lo - tol <= x <= x_hi + tol and y_lo - tol <= y <= y_hi + tol):
            raise InvalidPositionError(f"point ({x}, {y}) lies outside the grid")
        j = min(max(round((y - self.origin[1]) / self.pitch), 0), self.blocks_y)
        i = min(max(round((x - self.origin[0]) / self.pitch), 0), self.blocks_x)
        dy = y - self.y_street(j)
        dx = x - self.x_street(i)
        in_h = abs(dy) <= half + tol
        in_v = abs(dx) <= half + tol
        if in_h and (not in_v or abs(dy) <= abs(dx)):
            return StreetRef(f"H{j}", "H", j, x, dy)
        if in_v:
            return StreetRef(f"V{i}", "V", i, y, dx)
        raise InvalidPositionError(f"point ({x}, {y}) lies inside a building footprint")


def build_grid(block_length_m: float, street_width_m: float, building_height_m: float,
               blocks_x: int, blocks_y: int, origin: Point2 = (0.0, 0.0)) -> GridLayout:
    return GridLayout(block_length_m, street_width_m, building_height_m, blocks_x, blocks_y, origin)


@dataclass(frozen=True)
class Route:
    """One minimal-turn street route between two terminals.

    ``corners`` are centerline intersections, ``segment_lengths`` are measured
    along centerlines (the single order-0 segment is the planar distance).
    ``start_role`` tells which terminal the route starts from; ``indicator``
    is the corner-offset indicator of the first corner (0 for order 0).
    """

    order: int
    corners: tuple[Point2, ...]
    segment_lengths: tuple[float, ...]
    street_ids: tuple[str, ...]
    start_role: Role = Role.AP
    indicator: int = 0

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise InvalidArgumentError(f"route order must be 0, 1 or 2, got {self.order}")
        if len(self.corners) != self.order or len(self.segment_lengths) != self.order + 1:
            raise InvalidArgumentError("route needs `order` corners and `order + 1` segments")
        if len(self.street_ids) != self.order + 1:
            raise InvalidArgumentError("route needs one street id per segment")
        if any(s < 0 for s in self.segment_lengths):
            raise InvalidArgumentError("segment lengths must be non-negative")

    @property
    def length_m(self) -> float:
        return float(sum(self.segment_lengths))

    def reversed(self) -> "Route":
        other = Role.UE if self.start_role == Role.AP else Role.AP
        return Route(self.order, self.corners[::-1], self.segment_lengths[::-1],
                     self.street_ids[::-1], other, self.indicator)

    def ap_first(self) -> "Route":
        return self if self.start_role == Role.AP else self.reversed()


@dataclass(frozen=True)
class LinkClassification:
    order: int  # UNREACHABLE (-1) when no route of order <= max_order exists
    routes: tuple[Route, ...]
    euclidean_distance_m: float
    in_validity_range: bool
    street_ids: tuple[str, str] = field(default=("", ""))  # (first, second) terminal streets

    @property
    def reachable(self) -> bool:
        return self.order != UNREACHABLE

    @property
    def manhattan_distance_m(self) -> float:
        if not self.routes:
            return math.inf
        return min(r.length_m for r in self.routes)


def corner_offset_indicator(ap: Sequence[float], ue: Sequence[float], corner: Sequence[float],
                            street_width_m: float) -> int:
    """1 when either terminal sits further than w/2 from the walls forming the corner."""
    half = street_width_m / 2
    mx = min(abs(ap[0] - corner[0]), abs(ue[0] - corner[0]))
    my = min(abs(ap[1] - corner[1]), abs(ue[1] - corner[1]))
    return int(mx > half or my > half)


def _unit_toward(origin: Point2, target: Point2, axis: str) -> np.ndarray:
    # sign(0) counts as positive so a terminal on the crossing still picks a side
    if axis == "H":
        return np.array([1.0 if target[0] >= origin[0] else -1.0, 0.0])
    return np.array([0.0, 1.0 if target[1] >= origin[1] else -1.0])


def diffraction_corner(crossing: Point2, first_axis: str, first_point: Point2,
                       second_axis: str, second_point: Point2, street_width_m: float) -> Point2:
    """Building corner on the inside of a turn at ``crossing``.

    ``first_point`` lies on the street along ``first_axis`` and
    ``second_point`` on the perpendicular street.
    """
    half = street_width_m / 2
    u1 = _unit_toward(crossing, first_point, first_axis)
    u2 = _unit_toward(crossing, second_point, second_axis)
    c = np.asarray(crossing, dtype=float) + half * (u1 + u2)
    return float(c[0]), float(c[1])


def _crossing(grid: GridLayout, h_index: int, v_index: int) -> Point2:
    return grid.x_street(v_index), grid.y_street(h_index)


def classify_link(grid: GridLayout, ap: Terminal, ue: Terminal,
                  max_order: int = MAX_STREET_ORDER) -> LinkClassification:
    """Street order and every minimal-turn route from ``ap`` to ``ue``.

    Routes run from the first terminal to the second; pass the terminals the
    other way round to get the reversed routes.  Route geometry is always
    built from the AP side, so swapping the arguments only reverses routes.
    """
    if ap.role == Role.UE and ue.role == Role.AP:
        fwd = classify_link(grid, ue, ap, max_order)
        return LinkClassification(fwd.order, tuple(r.reversed() for r in fwd.routes),
                                  fwd.euclidean_distance_m, fwd.in_validity_range,
                                  fwd.street_ids[::-1])
    a_xy, b_xy = ap.xy, ue.xy
    sa, sb = grid.locate(a_xy), grid.locate(b_xy)
    d = math.dist(a_xy, b_xy)
    w = grid.street_width_m
    routes: list[Route] = []

    if sa.street_id == sb.street_id:
        order = 0
        routes.append(Route(0, (), (d,), (sa.street_id,), ap.role, 0))
    elif sa.axis != sb.axis:
        order = 1
        h, v = (sa, sb) if sa.axis == "H" else (sb, sa)
        cross = _crossing(grid, h.index, v.index)
        d_c = abs(sa.along - grid.centerline(sb.street_id))
        d_1 = abs(sb.along - grid.centerline(sa.street_id))
        wall = diffraction_corner(cross, sa.axis, a_xy, sb.axis, b_xy, w)
        ind = corner_offset_indicator(a_xy, b_xy, wall, w)
        routes.append(Route(1, (cross,), (d_c, d_1), (sa.street_id, sb.street_id), ap.role, ind))
    else:
        order = 2
        n_cross = grid.blocks_x if sa.axis == "H" else grid.blocks_y
        gap = abs(grid.centerline(sa.street_id) - grid.centerline(sb.street_id))
        for k in range(n_cross + 1):
            cross_id = f"V{k}" if sa.axis == "H" else f"H{k}"
            pos = grid.centerline(cross_id)
            if sa.axis == "H":
                c1, c2 = _crossing(grid, sa.index, k), _crossing(grid, sb.index, k)
            else:
                c1, c2 = _crossing(grid, k, sa.index), _crossing(grid, k, sb.index)
            other_axis = "V" if sa.axis == "H" else "H"
            wall = diffraction_corner(c1, sa.axis, a_xy, other_axis, c2, w)
            # the far side of the first turn is the next waypoint, not the terminal
            ind = corner_offset_indicator(a_xy, c2, wall, w)
            routes.append(Route(2, (c1, c2), (abs(sa.along - pos), gap, abs(pos - sb.along)),
                                (sa.street_id, cross_id, sb.street_id), ap.role, ind))
        routes.sort(key=lambda r: r.corners)

    if order > max_order:
        return LinkClassification(UNREACHABLE, (), d, False, (sa.street_id, sb.street_id))
    return LinkClassification(order, tuple(routes), d, _in_validity(order, routes),
                              (sa.street_id, sb.street_id))


def _in_validity(order: int, routes: Sequence[Route]) -> bool:
    lo, hi = VALIDITY_BOUNDS_M[order]
    return all(lo < r.ap_first().segment_lengths[-1] < hi for r in routes)
